#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "asvp/analysis.hpp"
#include "asvp/config.hpp"
#include "asvp/distill.hpp"

namespace asvp {

// ---------------------------------------------------------------------------
// gen-data

struct GenDataResult {
  std::vector<std::filesystem::path> files;  // train/test clean/degraded tensors + manifest
  std::uint64_t checksum = 0;                // FNV-1a over the four tensor files, in order
  std::size_t train_count = 0;
  std::size_t test_count = 0;
};

DatasetSplit build_dataset(const ExperimentConfig& cfg);
GenDataResult cmd_gen_data(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// teachers and students

/// Loads cfg.teacher.checkpoint when it exists, otherwise trains inline (if
/// allowed). Trained parameters are rounded to float32, which is the
/// checkpoint precision, so inline and reloaded teachers behave identically.
Network obtain_teacher(const ExperimentConfig& cfg, const DatasetSplit& data, RunRecord* record = nullptr);

TrainedModel cmd_train_teacher(const ExperimentConfig& cfg);

/// One student distilled under the first grid defense (none when the grid is empty).
TrainedModel cmd_distill(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// defense-grid

struct GridRow {
  DefenseSpec defense;
  Metrics teacher;
  Metrics student;
  double delta_psnr_vs_clean_kd = 0.0;
  double mean_energy = 0.0;
  double wall_ms_per_image = 0.0;
  RunRecord record;
};

inline constexpr const char* kGridHeader =
    "defense,h,k_ratio,teacher_psnr,teacher_ssim,student_psnr,student_ssim,delta_psnr_vs_clean_kd,mean_energy,"
    "wall_ms_per_image";

std::string format_grid_row(const GridRow& row);
std::string format_grid_csv(const std::vector<GridRow>& rows);

struct GridResult {
  std::vector<GridRow> rows;
  std::filesystem::path csv;
};

/// One student per grid defense; rows keep the grid order whatever the worker count.
GridResult cmd_defense_grid(const ExperimentConfig& cfg);

/// Grid rows for an already obtained teacher and dataset (no files written).
std::vector<GridRow> run_defense_grid(const Network& teacher, const ExperimentConfig& cfg, const DatasetSplit& data);

// ---------------------------------------------------------------------------
// stage-ablation

struct AblationResult {
  std::vector<TrainedModel> runs;  // none, early, mid, late, all
  std::filesystem::path csv;
};

std::string format_ablation_csv(const std::vector<TrainedModel>& runs);
AblationResult cmd_stage_ablation(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// bench-overhead

struct OverheadRow {
  std::size_t size = 0;  // feature maps are (1, channels, size, size)
  std::string defense;   // none, asvp-full, asvp-truncated, noise, dropC, pgd-<steps>
  double median_ms = 0.0;
  double min_ms = 0.0;
  std::size_t transient_bytes = 0;
};

/// Analytic scratch memory of one defense call on an m x n matricized map.
std::size_t transient_bytes_estimate(const std::string& defense, std::size_t m, std::size_t n, std::size_t k);

struct OverheadResult {
  std::vector<OverheadRow> rows;
  std::filesystem::path csv;
};

std::vector<OverheadRow> run_bench_overhead(const ExperimentConfig& cfg);
OverheadResult cmd_bench_overhead(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// analyze-features

struct TapReport {
  std::size_t tap = 0;
  FeatureReport clean;
  FeatureReport defended;
};

std::vector<TapReport> analyze_features(const Network& teacher, const Tensor& image, const AnalysisConfig& cfg);
std::string format_feature_csv(const TapReport& r);

struct FeatureResult {
  std::vector<TapReport> taps;
  std::vector<std::filesystem::path> files;
};

FeatureResult cmd_analyze_features(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------

/// Runs `count` independent jobs on up to `workers` threads. The first
/// exception (by job index) is rethrown after every job has finished.
void run_parallel(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace asvp
