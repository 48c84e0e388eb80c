#include "asvp/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"

namespace asvp {

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::none: return "none";
    case Stage::early: return "early";
    case Stage::mid: return "mid";
    case Stage::late: return "late";
    case Stage::all: return "all";
    case Stage::explicit_set: return "explicit";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::none, Stage::early, Stage::mid, Stage::late, Stage::all, Stage::explicit_set}) {
    if (s == to_string(st)) return st;
  }
  throw ConfigError(fmt::format("unknown tap stage '{}' (expected none, early, mid, late, all)", s));
}

std::vector<std::size_t> TapSelection::resolve(std::size_t student_taps) const {
  std::vector<std::size_t> out;
  if (stage == Stage::explicit_set) {
    out = indices;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    for (std::size_t i : out) {
      if (i >= student_taps) {
        throw ConfigError(fmt::format("tap index {} out of range for {} taps", i, student_taps));
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < student_taps; ++i) {
    const std::size_t third = 3 * i / student_taps;
    const bool keep = stage == Stage::all || (stage == Stage::early && third == 0) ||
                      (stage == Stage::mid && third == 1) || (stage == Stage::late && third == 2);
    if (keep) out.push_back(i);
  }
  return out;
}

std::string TapSelection::label() const {
  if (stage != Stage::explicit_set) return std::string(to_string(stage));
  std::string s = "taps[";
  for (std::size_t i = 0; i < indices.size(); ++i) s += (i ? "," : "") + std::to_string(indices[i]);
  return s + "]";
}

std::size_t paired_teacher_tap(std::size_t student_tap, std::size_t student_taps, std::size_t teacher_taps) {
  if (student_tap >= student_taps || teacher_taps == 0) throw ConfigError("tap pairing out of range");
  if (student_taps == 1) return 0;
  const double pos = static_cast<double>(student_tap) * static_cast<double>(teacher_taps - 1) /
                     static_cast<double>(student_taps - 1);
  return static_cast<std::size_t>(std::lround(pos));
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a positive finite number");
  if (!(lambda_align >= 0.0) || !std::isfinite(lambda_align)) throw ConfigError("lambda_align must be >= 0");
  defense.validate();
  task.validate();
}

std::string config_snapshot(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["seed"] = cfg.seed;
  j["lambda_align"] = cfg.lambda_align;
  j["taps"] = cfg.taps.label();
  const DefenseSpec& d = cfg.defense;
  j["defense"] = {{"kind", std::string(to_string(d.kind))},
                  {"label", d.label()},
                  {"h", d.asvp.h},
                  {"k_ratio", d.asvp.k_ratio},
                  {"mode", std::string(to_string(d.asvp.mode))},
                  {"noise_std", d.noise_std},
                  {"drop_rate", d.drop_rate},
                  {"adv_steps", d.adv_steps},
                  {"adv_epsilon", d.adv_epsilon},
                  {"adv_step_size", d.adv_step_size},
                  {"adv_random_start", d.adv_random_start},
                  {"relative_to_feature_std", d.relative_to_feature_std},
                  {"legacy", d.legacy},
                  {"seed", d.seed}};
  j["task"] = {{"task", std::string(to_string(cfg.task.task))}, {"seed", cfg.task.seed}};
  return j.dump();
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

Tensor sample_view(const Tensor& batch, std::size_t i) {
  const Shape& d = batch.dims();
  return batch.batch_slice(i, 1).reshaped({d[1], d[2], d[3]});
}

Metrics score(const Tensor& out, const Tensor& clean) { return {psnr(out, clean), ssim(out, clean)}; }

EvalResult summarize(std::vector<Metrics> per) {
  EvalResult r;
  for (const Metrics& m : per) {
    r.mean.psnr_db += m.psnr_db;
    r.mean.ssim += m.ssim;
  }
  r.mean.psnr_db /= static_cast<double>(per.size());
  r.mean.ssim /= static_cast<double>(per.size());
  r.per_sample = std::move(per);
  return r;
}

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

EvalResult evaluate(const Network& net, const Dataset& data, std::size_t batch_size) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  std::vector<Metrics> per;
  per.reserve(data.size());
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - first);
    const ForwardOutput f = forward(net, stack_degraded(data, first, count));
    for (std::size_t i = 0; i < count; ++i) per.push_back(score(sample_view(f.output, i), data[first + i].clean));
  }
  return summarize(std::move(per));
}

EvalResult evaluate_outputs(const std::vector<Tensor>& outputs, const Dataset& data) {
  if (data.empty() || outputs.size() != data.size()) throw ShapeError("evaluate_outputs: count mismatch");
  std::vector<Metrics> per;
  per.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) per.push_back(score(outputs[i], data[i].clean));
  return summarize(std::move(per));
}

std::vector<double> ledger_energy_from_spectra(const EnergyLedger& ledger) {
  std::vector<double> out;
  for (std::size_t t = 0; t < ledger.spectra.size(); ++t) {
    double total = 0.0;
    for (const auto& sigma : ledger.spectra[t]) total += perturbation_energy(sigma, ledger.k[t], ledger.h);
    out.push_back(ledger.spectra[t].empty() ? 0.0 : total / static_cast<double>(ledger.spectra[t].size()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Defended teacher pass

DefendedForward defended_forward(const Network& teacher, const Tensor& x, const DefenseSpec& defense,
                                 const std::vector<std::size_t>& teacher_taps, std::uint64_t salt) {
  const NetworkArch& arch = teacher.arch();
  for (std::size_t t : teacher_taps) {
    if (t >= arch.tap_count()) throw ConfigError(fmt::format("teacher tap {} out of range", t));
  }
  const Tensor input = x.rank() == 3 ? x.reshaped({1, x.dims()[0], x.dims()[1], x.dims()[2]}) : x;
  const std::size_t batch = input.dims()[0];

  // PGD attacks the teacher's own downstream output, so it needs the clean result.
  Tensor clean_output;
  if (defense.kind == DefenseKind::adversarial) clean_output = forward(teacher, input).output;

  DefendedForward out;
  out.tap_indices = teacher_taps;
  std::sort(out.tap_indices.begin(), out.tap_indices.end());

  Tensor h = head_forward(teacher, input);
  std::size_t next = 0;
  for (std::size_t b = 0; b < arch.blocks; ++b) {
    h = block_forward(teacher, b, h);
    if (next >= out.tap_indices.size() || out.tap_indices[next] != b) continue;
    ++next;

    DualPathOutput merged;
    merged.clean = h;
    merged.protected_map = h;
    for (std::size_t i = 0; i < batch; ++i) {
      const Tensor feat = h.batch_slice(i, 1);
      DefenseContext ctx;
      if (defense.kind == DefenseKind::adversarial) {
        const Tensor skip = input.batch_slice(i, 1);
        const Tensor ref = clean_output.batch_slice(i, 1);
        ctx.loss_tail = [&teacher, b, skip, ref](const Tensor& cand, Tensor& grad) {
          const ForwardTrace tr = trace_from_tap(teacher, b, cand, skip);
          Tensor d_out;
          const double loss = l2_loss(tr.output, ref, &d_out);
          grad = backward(teacher, tr, d_out, {}, true).input;
          return loss;
        };
      }
      DualPathOutput one = apply_defense(defense, feat, &ctx, derive_seed(salt, {i, b}));
      const std::size_t stride = feat.size();
      std::copy(one.protected_map.data().begin(), one.protected_map.data().end(),
                merged.protected_map.data().begin() + static_cast<std::ptrdiff_t>(i * stride));
      merged.energy += one.energy;
      merged.k = one.k;
      for (auto& s : one.spectra) merged.spectra.push_back(std::move(s));
    }
    if (defense.legacy) h = merged.protected_map;
    out.taps.push_back(std::move(merged));
  }
  out.output = tail_forward(teacher, h, input);
  return out;
}

EvalResult evaluate_teacher_under_defense(const Network& teacher, const DefenseSpec& defense, const Dataset& data,
                                          std::size_t batch_size) {
  if (data.empty()) throw ConfigError("evaluate: empty dataset");
  std::vector<std::size_t> taps(teacher.arch().tap_count());
  std::iota(taps.begin(), taps.end(), std::size_t{0});
  std::vector<Metrics> per;
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - first);
    const DefendedForward f = defended_forward(teacher, stack_degraded(data, first, count), defense, taps, first);
    for (std::size_t i = 0; i < count; ++i) per.push_back(score(sample_view(f.output, i), data[first + i].clean));
  }
  return summarize(std::move(per));
}

Objective kd_objective(Tensor output_target, std::vector<Tensor> tap_targets, std::vector<std::size_t> student_taps,
                       double lambda_align, std::size_t tap_count) {
  if (tap_targets.size() != student_taps.size()) throw ConfigError("kd_objective: one target per selected tap");
  return [out_target = std::move(output_target), tap_targets = std::move(tap_targets),
          student_taps = std::move(student_taps), lambda_align, tap_count](const Network&, const ForwardOutput& f,
                                                                           LossGradients& g) {
    double loss = l1_loss(f.output, out_target, &g.d_output);
    if (lambda_align > 0.0) {
      g.d_taps.assign(tap_count, Tensor{});
      for (std::size_t j = 0; j < student_taps.size(); ++j) {
        const std::size_t s = student_taps[j];
        if (f.taps[s].feature.dims() != tap_targets[j].dims()) {
          throw ConfigError(fmt::format("tap shape mismatch: student tap {} is {}, teacher target is {}", s,
                                        shape_string(f.taps[s].feature.dims()), shape_string(tap_targets[j].dims())));
        }
        Tensor d;
        loss += lambda_align * l2_loss(f.taps[s].feature, tap_targets[j], &d);
        for (double& v : d.data()) v *= lambda_align;
        g.d_taps[s] = std::move(d);
      }
    }
    return loss;
  };
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Targets {
  std::vector<Tensor> output;             // per sample (C,H,W)
  std::vector<std::vector<Tensor>> taps;  // [selected tap][sample] (C,H,W)
};

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5348554646ULL, epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Tensor gather(const std::vector<Tensor>& items, std::span<const std::size_t> idx) {
  std::vector<Tensor> picked;
  picked.reserve(idx.size());
  for (std::size_t i : idx) picked.push_back(items[i]);
  return Tensor::stack(picked);
}

struct LoopSpec {
  const Dataset* inputs = nullptr;
  std::vector<Tensor> input_images;  // (C,H,W) per sample
  Targets targets;
  std::vector<std::size_t> student_taps;  // aligned with targets.taps
  double lambda_align = 0.0;
};

Objective make_objective(const LoopSpec& spec, std::span<const std::size_t> idx, std::size_t tap_count) {
  std::vector<Tensor> tap_targets;
  for (const auto& per_tap : spec.targets.taps) tap_targets.push_back(gather(per_tap, idx));
  return kd_objective(gather(spec.targets.output, idx), std::move(tap_targets), spec.student_taps, spec.lambda_align,
                      tap_count);
}

double dataset_loss(const Network& net, const LoopSpec& spec, std::size_t batch_size) {
  const std::size_t n = spec.input_images.size();
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const std::size_t count = std::min(batch_size, n - first);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), first);
    const Objective obj = make_objective(spec, idx, net.arch().tap_count());
    const ForwardOutput f = forward(net, gather(spec.input_images, idx));
    LossGradients g;
    total += obj(net, f, g) * static_cast<double>(count);
  }
  return total / static_cast<double>(n);
}

TrainedModel run_training(Network net, const TrainConfig& cfg, const LoopSpec& spec, RunRecord record) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = spec.input_images.size();
  if (n == 0) throw ConfigError("training set is empty");
  record.initial_loss = dataset_loss(net, spec, cfg.batch_size);

  AdamState adam(net.params().size(), cfg.lr);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, epoch);
    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < n; first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - first);
      const std::span<const std::size_t> idx(order.data() + first, count);
      GradientResult gr;
      try {
        gr = value_and_grad(net, gather(spec.input_images, idx),
                            make_objective(spec, idx, net.arch().tap_count()));
      } catch (const NumericError& e) {
        throw TrainingError(epoch, e.what());
      }
      if (!std::isfinite(gr.loss)) throw TrainingError(epoch, "non-finite training loss");
      adam_step(adam, net.params(), gr.grad);
      epoch_loss += gr.loss * static_cast<double>(count);
    }
    record.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
  }
  record.final_loss = dataset_loss(net, spec, cfg.batch_size);
  if (!std::isfinite(record.final_loss)) throw TrainingError(cfg.epochs - 1, "non-finite final loss");
  record.network_fingerprint = net.fingerprint();
  record.wall_ms = elapsed_ms(t0);
  return {std::move(net), std::move(record)};
}

std::vector<Tensor> degraded_images(const Dataset& data) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const auto& p : data) out.push_back(p.degraded);
  return out;
}

}  // namespace

TrainedModel train_teacher(const NetworkArch& arch, const TrainConfig& cfg, const DatasetSplit& data) {
  cfg.validate();
  arch.validate();
  if (cfg.defense.kind != DefenseKind::none) throw ConfigError("teacher training requires defense kind none");
  LoopSpec spec;
  spec.input_images = degraded_images(data.train);
  for (const auto& p : data.train) spec.targets.output.push_back(p.clean);

  RunRecord rec;
  rec.label = "teacher";
  rec.config_json = config_snapshot(cfg);
  TrainedModel m = run_training(init_network(arch, derive_seed(cfg.seed, {0x54454143ULL})), cfg, spec, std::move(rec));
  m.record.test = evaluate(m.net, data.test, cfg.batch_size);
  m.record.teacher_fingerprint = m.record.network_fingerprint;
  return m;
}

TrainedModel distill_student(const Network& teacher, const NetworkArch& student_arch, const TrainConfig& cfg,
                             const DatasetSplit& data) {
  cfg.validate();
  student_arch.validate();
  const NetworkArch& tarch = teacher.arch();
  if (student_arch.in_channels != tarch.in_channels) throw ConfigError("student and teacher image channels differ");

  LoopSpec spec;
  spec.lambda_align = cfg.lambda_align;
  spec.student_taps = cfg.lambda_align > 0.0 ? cfg.taps.resolve(student_arch.tap_count()) : std::vector<std::size_t>{};
  if (!spec.student_taps.empty() && student_arch.channels != tarch.channels) {
    throw ConfigError(fmt::format("tap shape mismatch: student has {} channels, teacher {}", student_arch.channels,
                                  tarch.channels));
  }
  std::vector<std::size_t> teacher_taps;
  for (std::size_t s : spec.student_taps) {
    teacher_taps.push_back(paired_teacher_tap(s, student_arch.tap_count(), tarch.tap_count()));
  }
  // Legacy mode perturbs the teacher's own stream, so every tap is defended.
  std::vector<std::size_t> defended = teacher_taps;
  if (cfg.defense.legacy && cfg.defense.kind != DefenseKind::none) {
    defended.resize(tarch.tap_count());
    std::iota(defended.begin(), defended.end(), std::size_t{0});
  }
  std::sort(defended.begin(), defended.end());
  defended.erase(std::unique(defended.begin(), defended.end()), defended.end());

  RunRecord rec;
  rec.label = fmt::format("{}/{}", cfg.defense.label(), cfg.taps.label());
  rec.config_json = config_snapshot(cfg);
  rec.teacher_fingerprint = teacher.fingerprint();

  // The teacher is frozen: its (defended) targets are computed once.
  const std::size_t n = data.train.size();
  spec.input_images = degraded_images(data.train);
  spec.targets.taps.assign(teacher_taps.size(), {});
  EnergyLedger& ledger = rec.energy;
  ledger.teacher_taps = defended;
  ledger.mean_energy.assign(defended.size(), 0.0);
  const bool is_asvp = cfg.defense.kind == DefenseKind::asvp;
  if (is_asvp) {
    ledger.spectra.assign(defended.size(), {});
    ledger.k.assign(defended.size(), 0);
    ledger.h = cfg.defense.asvp.h;
  }
  for (std::size_t first = 0; first < n; first += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, n - first);
    const DefendedForward f =
        defended_forward(teacher, stack_degraded(data.train, first, count), cfg.defense, defended, first);
    for (std::size_t i = 0; i < count; ++i) spec.targets.output.push_back(sample_view(f.output, i));
    for (std::size_t t = 0; t < defended.size(); ++t) {
      ledger.mean_energy[t] += f.taps[t].energy;
      if (is_asvp) {
        ledger.k[t] = f.taps[t].k;
        for (const auto& s : f.taps[t].spectra) ledger.spectra[t].push_back(s);
      }
    }
    for (std::size_t j = 0; j < teacher_taps.size(); ++j) {
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(defended.begin(), defended.end(), teacher_taps[j]) - defended.begin());
      for (std::size_t i = 0; i < count; ++i) {
        spec.targets.taps[j].push_back(sample_view(f.taps[pos].protected_map, i));
      }
    }
  }
  for (double& e : ledger.mean_energy) e /= static_cast<double>(n);

  TrainedModel m = run_training(init_network(student_arch, derive_seed(cfg.seed, {0x53545544ULL})), cfg, spec,
                                std::move(rec));
  m.record.test = evaluate(m.net, data.test, cfg.batch_size);
  return m;
}

std::vector<TrainedModel> stage_ablation(const Network& teacher, const NetworkArch& student_arch,
                                         const TrainConfig& cfg, const DatasetSplit& data) {
  if (teacher.arch().tap_count() < 3) throw ConfigError("stage ablation needs a teacher with at least 3 taps");
  std::vector<TrainedModel> out;
  for (Stage s : {Stage::none, Stage::early, Stage::mid, Stage::late, Stage::all}) {
    TrainConfig c = cfg;
    if (s == Stage::none) {
      c.defense = DefenseSpec::none();
      c.taps = TapSelection::of(Stage::all);
    } else {
      c.taps = TapSelection::of(s);
    }
    TrainedModel m = distill_student(teacher, student_arch, c, data);
    m.record.label = std::string(to_string(s));
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace asvp
