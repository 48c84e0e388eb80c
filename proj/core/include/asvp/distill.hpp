#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "asvp/analysis.hpp"
#include "asvp/data.hpp"
#include "asvp/defenses.hpp"
#include "asvp/nn.hpp"

namespace asvp {

enum class Stage { none, early, mid, late, all, explicit_set };

std::string_view to_string(Stage s) noexcept;
Stage parse_stage(std::string_view s);

/// Which student taps are aligned to (defended) teacher taps.
struct TapSelection {
  Stage stage = Stage::all;
  std::vector<std::size_t> indices;  // used when stage == explicit_set

  static TapSelection of(Stage s) { return {s, {}}; }
  static TapSelection explicit_indices(std::vector<std::size_t> idx) { return {Stage::explicit_set, std::move(idx)}; }

  /// Student tap indices, ascending. Stage of tap i is floor(3 i / taps).
  std::vector<std::size_t> resolve(std::size_t student_taps) const;
  std::string label() const;
};

/// Teacher tap aligned with student tap i: round(i (T-1) / (S-1)).
std::size_t paired_teacher_tap(std::size_t student_tap, std::size_t student_taps, std::size_t teacher_taps);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double lambda_align = 1.0;
  TapSelection taps;
  DefenseSpec defense;
  DegradationSpec task;

  void validate() const;
};

struct EvalResult {
  Metrics mean;
  std::vector<Metrics> per_sample;
};

/// Mean (and per-sample) PSNR/SSIM of net(degraded) against clean.
EvalResult evaluate(const Network& net, const Dataset& data, std::size_t batch_size = 16);
/// Same metrics for precomputed outputs, one (C,H,W) tensor per sample.
EvalResult evaluate_outputs(const std::vector<Tensor>& outputs, const Dataset& data);

/// Injected energy per defended teacher tap, averaged over training samples.
struct EnergyLedger {
  std::vector<std::size_t> teacher_taps;
  std::vector<double> mean_energy;
  // ASVP only: original singular values per [tap][sample], and the k used.
  std::vector<std::vector<std::vector<double>>> spectra;
  std::vector<std::size_t> k;
  double h = 1.0;
};

/// Recompute each tap's mean energy from the logged spectra, (h-1)^2 sum_{j<k} sigma_j^2.
std::vector<double> ledger_energy_from_spectra(const EnergyLedger& ledger);

struct RunRecord {
  std::string label;
  std::string config_json;  // effective TrainConfig snapshot
  std::vector<double> epoch_losses;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  EvalResult test;
  double wall_ms = 0.0;
  EnergyLedger energy;
  std::uint64_t teacher_fingerprint = 0;
  std::uint64_t network_fingerprint = 0;
};

struct TrainedModel {
  Network net;
  RunRecord record;
};

/// Distillation objective on one batch: L1(output, output_target) plus
/// lambda_align * L2(student tap student_taps[j], tap_targets[j]) for every j.
Objective kd_objective(Tensor output_target, std::vector<Tensor> tap_targets, std::vector<std::size_t> student_taps,
                       double lambda_align, std::size_t tap_count);

/// L1 restoration training (degraded -> clean). Requires cfg.defense.kind == none.
TrainedModel train_teacher(const NetworkArch& arch, const TrainConfig& cfg, const DatasetSplit& data);

/// Teacher forward with selected taps passed through the defense.
struct DefendedForward {
  Tensor output;                                // teacher output (clean path unless legacy)
  std::vector<std::size_t> tap_indices;         // defended teacher taps, ascending
  std::vector<DualPathOutput> taps;             // one per entry of tap_indices
};

/// `salt` separates random streams between calls (e.g. the first sample index).
DefendedForward defended_forward(const Network& teacher, const Tensor& x, const DefenseSpec& defense,
                                 const std::vector<std::size_t>& teacher_taps, std::uint64_t salt);

/// Teacher test metrics with the defense installed on every tap.
EvalResult evaluate_teacher_under_defense(const Network& teacher, const DefenseSpec& defense, const Dataset& data,
                                          std::size_t batch_size = 16);

/// Student loss: L1(student output, teacher output) + lambda_align * sum over
/// selected taps of L2(student tap, defended teacher tap).
TrainedModel distill_student(const Network& teacher, const NetworkArch& student_arch, const TrainConfig& cfg,
                             const DatasetSplit& data);

/// Students for {none (clean KD), early, mid, late, all} under cfg.defense.
std::vector<TrainedModel> stage_ablation(const Network& teacher, const NetworkArch& student_arch,
                                         const TrainConfig& cfg, const DatasetSplit& data);

std::string config_snapshot(const TrainConfig& cfg);

}  // namespace asvp
