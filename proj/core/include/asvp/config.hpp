#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asvp/data.hpp"
#include "asvp/defenses.hpp"
#include "asvp/distill.hpp"
#include "asvp/nn.hpp"

namespace asvp {

struct DataConfig {
  DegradationSpec degradation;
  std::size_t image_size = 32;
  std::size_t channels = 1;
  std::size_t train_count = 512;
  std::size_t test_count = 64;
};

struct ModelConfig {
  NetworkArch arch;
  TrainConfig train;
  std::filesystem::path checkpoint;  // teacher only: load instead of training when present
  bool train_inline = true;
};

struct SweepConfig {
  std::vector<double> h;
  std::vector<double> k_ratio;
  AsvpMode mode = AsvpMode::full;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{32, 64, 128};
  std::size_t channels = 16;
  std::size_t trials = 20;
  double h = 100.0;
  double k_ratio = 0.6;
  double truncated_k_ratio = 0.4;
  std::size_t pgd_steps = 3;
  double pgd_epsilon = 0.05;  // multiple of the feature std
};

struct AnalysisConfig {
  std::size_t sample = 0;  // test-split index fed to the teacher
  std::vector<std::size_t> taps;  // empty == every tap
  std::size_t grid_channel = 0;
  DefenseSpec defense = DefenseSpec::asvp_defense(100.0, 0.6);
};

/// Whole-experiment document. Every section is optional; unknown keys are rejected.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "out";
  std::size_t workers = 1;
  DataConfig data;
  ModelConfig teacher;
  ModelConfig student;
  std::vector<DefenseSpec> defenses;  // defense grid rows
  SweepConfig sweep;                  // appended to the grid as an h x k_ratio product
  BenchConfig bench;
  AnalysisConfig analysis;

  /// Re-derives every component seed from `seed`.
  void apply_seed(std::uint64_t s);
  /// Grid rows: `defenses` followed by the sweep product.
  std::vector<DefenseSpec> grid() const;
  void validate() const;
};

ExperimentConfig default_experiment();
ExperimentConfig parse_experiment(const std::string& yaml_text);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Canonical YAML rendering of the effective configuration; parses back to the same config.
std::string emit_experiment(const ExperimentConfig& cfg);

}  // namespace asvp
