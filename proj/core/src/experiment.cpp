#include "asvp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"
#include "asvp/tensor_file.hpp"

namespace asvp {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

double since_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) { return fmt::format("{:.4f}", v); }

NetworkArch with_channels(NetworkArch a, std::size_t in_channels) {
  a.in_channels = in_channels;
  return a;
}

// Re-raise with a context prefix, keeping the error category (and so the exit code).
[[noreturn]] void rethrow_with(std::exception_ptr ep, const std::string& prefix) {
  try {
    std::rethrow_exception(ep);
  } catch (const TrainingError& e) {
    throw TrainingError(e.epoch(), prefix + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const FormatError& e) {
    throw FormatError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix + e.what());
  }
}

nlohmann::ordered_json record_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["label"] = r.label;
  j["config"] = nlohmann::json::parse(r.config_json);
  j["epoch_losses"] = r.epoch_losses;
  j["initial_loss"] = r.initial_loss;
  j["final_loss"] = r.final_loss;
  j["test_psnr"] = r.test.mean.psnr_db;
  j["test_ssim"] = r.test.mean.ssim;
  j["wall_ms"] = r.wall_ms;
  j["energy"] = {{"teacher_taps", r.energy.teacher_taps}, {"mean_energy", r.energy.mean_energy}};
  j["teacher_fingerprint"] = fmt::format("{:016x}", r.teacher_fingerprint);
  j["network_fingerprint"] = fmt::format("{:016x}", r.network_fingerprint);
  return j;
}

}  // namespace

void run_parallel(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, count));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// gen-data

DatasetSplit build_dataset(const ExperimentConfig& cfg) {
  return make_split(cfg.data.degradation, cfg.data.train_count, cfg.data.test_count, cfg.data.image_size,
                    cfg.data.channels, cfg.data.degradation.seed);
}

GenDataResult cmd_gen_data(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit split = build_dataset(cfg);
  GenDataResult r;
  r.train_count = split.train.size();
  r.test_count = split.test.size();
  const std::pair<const char*, Tensor> items[] = {
      {"train_clean.tensor", stack_clean(split.train, 0, split.train.size())},
      {"train_degraded.tensor", stack_degraded(split.train, 0, split.train.size())},
      {"test_clean.tensor", stack_clean(split.test, 0, split.test.size())},
      {"test_degraded.tensor", stack_degraded(split.test, 0, split.test.size())},
  };
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& [name, t] : items) {
    const auto bytes = encode_tensor(t);
    h = fnv1a(bytes.data(), bytes.size(), h);
    const fs::path p = cfg.output_dir / name;
    write_file_bytes(p, bytes);
    r.files.push_back(p);
  }
  r.checksum = h;

  const DegradationSpec& g = cfg.data.degradation;
  nlohmann::ordered_json m;
  m["train_count"] = r.train_count;
  m["test_count"] = r.test_count;
  m["image_size"] = cfg.data.image_size;
  m["channels"] = cfg.data.channels;
  m["seed"] = cfg.seed;
  m["data_seed"] = g.seed;
  m["task"] = {{"task", std::string(to_string(g.task))},
               {"noise_std", g.noise_std},
               {"scale", g.scale},
               {"upsample", std::string(to_string(g.upsample))},
               {"gamma", g.gamma},
               {"gain", g.gain},
               {"transmission", g.transmission},
               {"airlight", g.airlight},
               {"color_cast", g.color_cast},
               {"rain_streaks", g.rain_streaks},
               {"rain_angle_deg", g.rain_angle_deg},
               {"rain_length", g.rain_length},
               {"rain_intensity", g.rain_intensity}};
  m["files"] = {"train_clean.tensor", "train_degraded.tensor", "test_clean.tensor", "test_degraded.tensor"};
  m["checksum"] = fmt::format("{:016x}", r.checksum);
  const fs::path manifest = cfg.output_dir / "manifest.json";
  write_text(manifest, m.dump(2) + "\n");
  r.files.push_back(manifest);
  return r;
}

// ---------------------------------------------------------------------------
// teachers and students

Network obtain_teacher(const ExperimentConfig& cfg, const DatasetSplit& data, RunRecord* record) {
  const NetworkArch arch = with_channels(cfg.teacher.arch, cfg.data.channels);
  const fs::path& ckpt = cfg.teacher.checkpoint;
  if (!ckpt.empty() && fs::exists(fs::path(ckpt.string() + ".tensor"))) {
    Network net = load_network(ckpt);
    if (!(net.arch() == arch)) {
      throw ConfigError(fmt::format("teacher checkpoint {} does not match the configured teacher arch", ckpt.string()));
    }
    return net;
  }
  if (!cfg.teacher.train_inline) {
    throw IoError(fmt::format("teacher checkpoint {} not found and train_inline is off", ckpt.string()));
  }
  TrainedModel m = train_teacher(arch, cfg.teacher.train, data);
  std::vector<double> params(m.net.params().begin(), m.net.params().end());
  quantize_to_f32(params);
  Network net(arch, std::move(params), m.net.seed());
  if (record) {
    m.record.test = evaluate(net, data.test, cfg.teacher.train.batch_size);
    m.record.network_fingerprint = m.record.teacher_fingerprint = net.fingerprint();
    *record = std::move(m.record);
  }
  return net;
}

TrainedModel cmd_train_teacher(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit data = build_dataset(cfg);
  ExperimentConfig c = cfg;
  c.teacher.checkpoint.clear();
  c.teacher.train_inline = true;
  RunRecord rec;
  Network net = obtain_teacher(c, data, &rec);
  const fs::path stem = cfg.teacher.checkpoint.empty() ? cfg.output_dir / "teacher" : cfg.teacher.checkpoint;
  if (stem.has_parent_path()) ensure_dir(stem.parent_path());
  save_network(stem, net);
  nlohmann::ordered_json j = record_json(rec);
  j["degraded_input_psnr"] = evaluate_outputs(
      [&] {
        std::vector<Tensor> v;
        for (const auto& p : data.test) v.push_back(p.degraded);
        return v;
      }(),
      data.test).mean.psnr_db;
  write_text(cfg.output_dir / "teacher_record.json", j.dump(2) + "\n");
  write_text(cfg.output_dir / "teacher.config.yaml", emit_experiment(cfg));
  return {std::move(net), std::move(rec)};
}

TrainedModel cmd_distill(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit data = build_dataset(cfg);
  const Network teacher = obtain_teacher(cfg, data);
  TrainConfig tc = cfg.student.train;
  const auto grid = cfg.grid();
  tc.defense = grid.empty() ? DefenseSpec::none() : grid.front();
  TrainedModel m = distill_student(teacher, with_channels(cfg.student.arch, cfg.data.channels), tc, data);
  save_network(cfg.output_dir / "student", m.net);
  write_text(cfg.output_dir / "student_record.json", record_json(m.record).dump(2) + "\n");
  write_text(cfg.output_dir / "student.config.yaml", emit_experiment(cfg));
  return m;
}

// ---------------------------------------------------------------------------
// defense-grid

std::string format_grid_row(const GridRow& r) {
  const bool asvp = r.defense.kind == DefenseKind::asvp;
  return fmt::format("\"{}\",{},{},{},{},{},{},{},{},{}", r.defense.label(), asvp ? num(r.defense.asvp.h) : "",
                     asvp ? num(r.defense.asvp.k_ratio) : "", num(r.teacher.psnr_db), num(r.teacher.ssim),
                     num(r.student.psnr_db), num(r.student.ssim), num(r.delta_psnr_vs_clean_kd), num(r.mean_energy),
                     num(r.wall_ms_per_image));
}

std::string format_grid_csv(const std::vector<GridRow>& rows) {
  std::string s = std::string(kGridHeader) + "\n";
  for (const auto& r : rows) s += format_grid_row(r) + "\n";
  return s;
}

namespace {

bool is_clean_kd(const DefenseSpec& d) { return d.kind == DefenseKind::none && !d.legacy; }

GridRow run_cell(const Network& teacher, const ExperimentConfig& cfg, const DatasetSplit& data, const DefenseSpec& d) {
  const auto t0 = std::chrono::steady_clock::now();
  GridRow row;
  row.defense = d;
  row.teacher = evaluate_teacher_under_defense(teacher, d, data.test, cfg.student.train.batch_size).mean;
  TrainConfig tc = cfg.student.train;
  tc.defense = d;
  TrainedModel m = distill_student(teacher, with_channels(cfg.student.arch, cfg.data.channels), tc, data);
  row.student = m.record.test.mean;
  const auto& e = m.record.energy.mean_energy;
  row.mean_energy = e.empty() ? 0.0 : std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
  row.record = std::move(m.record);
  row.wall_ms_per_image = since_ms(t0) / static_cast<double>(data.train.size());
  return row;
}

}  // namespace

namespace {

// Fills `out` with every completed row; returns the first failure (by cell order), if any.
std::exception_ptr grid_impl(const Network& teacher, const ExperimentConfig& cfg, const DatasetSplit& data,
                             std::vector<GridRow>& out) {
  std::vector<DefenseSpec> cells = cfg.grid();
  const bool extra_clean = std::find_if(cells.begin(), cells.end(), is_clean_kd) == cells.end();
  if (extra_clean) {
    DefenseSpec none = DefenseSpec::none();
    none.seed = derive_seed(cfg.seed, {0x44454645ULL});
    cells.push_back(none);
  }
  std::vector<std::optional<GridRow>> rows(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  run_parallel(cells.size(), cfg.workers, [&](std::size_t i) {
    try {
      rows[i] = run_cell(teacher, cfg, data, cells[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });

  const auto clean_idx =
      static_cast<std::size_t>(std::find_if(cells.begin(), cells.end(), is_clean_kd) - cells.begin());
  const std::size_t emitted = extra_clean ? cells.size() - 1 : cells.size();
  for (std::size_t i = 0; i < emitted; ++i) {
    if (!rows[i]) continue;
    GridRow r = *rows[i];
    if (rows[clean_idx]) r.delta_psnr_vs_clean_kd = r.student.psnr_db - rows[clean_idx]->student.psnr_db;
    out.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i]) continue;
    try {
      rethrow_with(errors[i], fmt::format("grid cell {} ({}): ", i, cells[i].label()));
    } catch (...) {
      return std::current_exception();
    }
  }
  return nullptr;
}

}  // namespace

std::vector<GridRow> run_defense_grid(const Network& teacher, const ExperimentConfig& cfg, const DatasetSplit& data) {
  std::vector<GridRow> rows;
  if (auto err = grid_impl(teacher, cfg, data, rows)) std::rethrow_exception(err);
  return rows;
}

GridResult cmd_defense_grid(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit data = build_dataset(cfg);
  const Network teacher = obtain_teacher(cfg, data);
  write_text(cfg.output_dir / "defense_grid.config.yaml", emit_experiment(cfg));

  GridResult res;
  res.csv = cfg.output_dir / "defense_grid.csv";
  const std::exception_ptr failure = grid_impl(teacher, cfg, data, res.rows);
  write_text(res.csv, format_grid_csv(res.rows));
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& r : res.rows) runs.push_back(record_json(r.record));
  write_text(cfg.output_dir / "defense_grid.runs.json", runs.dump(2) + "\n");
  if (failure) std::rethrow_exception(failure);
  return res;
}

// ---------------------------------------------------------------------------
// stage-ablation

std::string format_ablation_csv(const std::vector<TrainedModel>& runs) {
  std::string s = "selection,student_psnr,student_ssim,delta_psnr_vs_clean_kd,mean_energy,teacher_hash\n";
  const double ref = runs.empty() ? 0.0 : runs.front().record.test.mean.psnr_db;
  for (const auto& m : runs) {
    const auto& e = m.record.energy.mean_energy;
    const double energy = e.empty() ? 0.0 : std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    s += fmt::format("{},{},{},{},{},{:016x}\n", m.record.label, num(m.record.test.mean.psnr_db),
                     num(m.record.test.mean.ssim), num(m.record.test.mean.psnr_db - ref), num(energy),
                     m.record.teacher_fingerprint);
  }
  return s;
}

AblationResult cmd_stage_ablation(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit data = build_dataset(cfg);
  const Network teacher = obtain_teacher(cfg, data);
  TrainConfig tc = cfg.student.train;
  const auto grid = cfg.grid();
  const auto it = std::find_if(grid.begin(), grid.end(), [](const DefenseSpec& d) { return d.kind == DefenseKind::asvp; });
  tc.defense = it != grid.end() ? *it : DefenseSpec::preset("asvp");
  tc.defense.seed = derive_seed(cfg.seed, {0x44454645ULL});

  const NetworkArch sarch = with_channels(cfg.student.arch, cfg.data.channels);
  const Stage stages[] = {Stage::none, Stage::early, Stage::mid, Stage::late, Stage::all};
  std::vector<std::optional<TrainedModel>> slots(std::size(stages));
  run_parallel(std::size(stages), cfg.workers, [&](std::size_t i) {
    TrainConfig c = tc;
    if (stages[i] == Stage::none) {
      c.defense = DefenseSpec::none();
      c.taps = TapSelection::of(Stage::all);
    } else {
      c.taps = TapSelection::of(stages[i]);
    }
    TrainedModel m = distill_student(teacher, sarch, c, data);
    m.record.label = std::string(to_string(stages[i]));
    slots[i] = std::move(m);
  });
  AblationResult res;
  for (auto& s : slots) res.runs.push_back(std::move(*s));
  res.csv = cfg.output_dir / "stage_ablation.csv";
  write_text(res.csv, format_ablation_csv(res.runs));
  write_text(cfg.output_dir / "stage_ablation.config.yaml", emit_experiment(cfg));
  return res;
}

// ---------------------------------------------------------------------------
// bench-overhead

std::size_t transient_bytes_estimate(const std::string& defense, std::size_t m, std::size_t n, std::size_t k) {
  const std::size_t r = std::min(m, n);
  const std::size_t d = sizeof(double);
  if (defense == "asvp-full") return (m * r + r + n * r) * d;
  if (defense == "asvp-truncated") return (m * k + k + n * k + r * r) * d;
  if (defense == "noise") return m * n * d;
  if (defense == "dropC") return n * d;
  if (defense.rfind("pgd", 0) == 0) return 2 * m * n * d;
  return 0;
}

std::vector<OverheadRow> run_bench_overhead(const ExperimentConfig& cfg) {
  const BenchConfig& b = cfg.bench;
  NetworkArch arch = cfg.teacher.arch;
  arch.in_channels = 1;
  arch.channels = b.channels;
  arch.zero_init_tail = false;
  const Network net = init_network(arch, derive_seed(cfg.seed, {0x42454E43ULL}));
  const std::size_t tap = (arch.blocks - 1) / 2;
  const std::uint64_t dseed = derive_seed(cfg.seed, {0x44454645ULL});

  struct Entry {
    std::string name;
    DefenseSpec spec;
  };
  DefenseSpec full = DefenseSpec::asvp_defense(b.h, b.k_ratio, AsvpMode::full);
  DefenseSpec trunc = DefenseSpec::asvp_defense(b.h, b.truncated_k_ratio, AsvpMode::truncated);
  DefenseSpec noise = DefenseSpec::preset("noise-L");
  DefenseSpec drop = DefenseSpec::preset("dropC-L");
  DefenseSpec pgd = DefenseSpec::preset("adv-L");
  pgd.adv_steps = b.pgd_steps;
  pgd.adv_epsilon = b.pgd_epsilon;
  std::vector<Entry> entries = {{"none", DefenseSpec::none()}, {"noise", noise},
                                {"dropC", drop},                {"asvp-full", full},
                                {"asvp-truncated", trunc},      {fmt::format("pgd-{}", b.pgd_steps), pgd}};
  for (auto& e : entries) e.spec.seed = dseed;

  std::vector<OverheadRow> rows;
  for (std::size_t size : b.sizes) {
    Rng rng(derive_seed(cfg.seed, {0x53495A45ULL, size}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor image({1, 1, size, size});
    for (double& v : image.data()) v = u(rng);
    Tensor feature = head_forward(net, image);
    for (std::size_t blk = 0; blk <= tap; ++blk) feature = block_forward(net, blk, feature);
    const Tensor ref = tail_forward(net, [&] {
      Tensor f = feature;
      for (std::size_t blk = tap + 1; blk < arch.blocks; ++blk) f = block_forward(net, blk, f);
      return f;
    }(), image);
    DefenseContext ctx;
    ctx.loss_tail = [&](const Tensor& cand, Tensor& grad) {
      const ForwardTrace tr = trace_from_tap(net, tap, cand, image);
      Tensor d_out;
      const double loss = l2_loss(tr.output, ref, &d_out);
      grad = backward(net, tr, d_out, {}, true).input;
      return loss;
    };
    const std::size_t m = size * size, n = b.channels;
    for (const auto& e : entries) {
      std::vector<double> times;
      for (std::size_t t = 0; t < b.trials; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const DualPathOutput out = apply_defense(e.spec, feature, &ctx, t);
        times.push_back(since_ms(t0));
        if (out.protected_map.size() != feature.size()) throw ShapeError("bench: defense changed the feature shape");
      }
      std::sort(times.begin(), times.end());
      OverheadRow row;
      row.size = size;
      row.defense = e.name;
      row.median_ms = times.size() % 2 ? times[times.size() / 2]
                                       : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
      row.min_ms = times.front();
      const std::size_t k = e.spec.kind == DefenseKind::asvp ? e.spec.asvp.top_k(std::min(m, n)) : 0;
      row.transient_bytes = transient_bytes_estimate(e.name, m, n, k);
      rows.push_back(row);
    }
  }
  return rows;
}

OverheadResult cmd_bench_overhead(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  OverheadResult res;
  res.rows = run_bench_overhead(cfg);
  std::string s = "size,defense,median_ms,min_ms,transient_bytes\n";
  for (const auto& r : res.rows) {
    s += fmt::format("{},{},{},{},{}\n", r.size, r.defense, num(r.median_ms), num(r.min_ms), r.transient_bytes);
  }
  res.csv = cfg.output_dir / "bench_overhead.csv";
  write_text(res.csv, s);
  write_text(cfg.output_dir / "bench_overhead.config.yaml", emit_experiment(cfg));
  return res;
}

// ---------------------------------------------------------------------------
// analyze-features

std::vector<TapReport> analyze_features(const Network& teacher, const Tensor& image, const AnalysisConfig& cfg) {
  std::vector<std::size_t> taps = cfg.taps;
  if (taps.empty()) {
    taps.resize(teacher.arch().tap_count());
    std::iota(taps.begin(), taps.end(), std::size_t{0});
  }
  for (std::size_t t : taps) {
    if (t >= teacher.arch().tap_count()) {
      throw ConfigError(fmt::format("tap index {} out of range (teacher has {} taps)", t, teacher.arch().tap_count()));
    }
  }
  const DefendedForward f = defended_forward(teacher, image, cfg.defense, taps, cfg.sample);
  std::vector<TapReport> out;
  for (std::size_t i = 0; i < f.tap_indices.size(); ++i) {
    out.push_back({f.tap_indices[i], feature_report(f.taps[i].clean, cfg.grid_channel),
                   feature_report(f.taps[i].protected_map, cfg.grid_channel)});
  }
  return out;
}

std::string format_feature_csv(const TapReport& r) {
  std::string s = "section,variant,index,value\n";
  for (const auto* rep : {&r.clean, &r.defended}) {
    const char* v = rep == &r.clean ? "clean" : "defended";
    s += fmt::format("summary,{},hist_min,{:.6e}\n", v, rep->hist_min);
    s += fmt::format("summary,{},hist_max,{:.6e}\n", v, rep->hist_max);
    s += fmt::format("summary,{},max_abs,{:.6e}\n", v, rep->max_abs);
    s += fmt::format("summary,{},high_frequency_fraction,{:.6e}\n", v, rep->high_frequency_fraction);
    double total = 0.0;
    for (double e : rep->energy.data()) total += e;
    s += fmt::format("summary,{},energy_total,{:.6e}\n", v, total);
    for (std::size_t i = 0; i < rep->radial_profile.size(); ++i) {
      s += fmt::format("radial,{},{},{:.6e}\n", v, i, rep->radial_profile[i]);
    }
    for (std::size_t i = 0; i < rep->histogram.size(); ++i) s += fmt::format("histogram,{},{},{}\n", v, i, rep->histogram[i]);
    for (std::size_t i = 0; i < rep->energy.size(); ++i) s += fmt::format("energy,{},{},{:.6e}\n", v, i, rep->energy[i]);
  }
  return s;
}

FeatureResult cmd_analyze_features(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const DatasetSplit data = build_dataset(cfg);
  const Network teacher = obtain_teacher(cfg, data);
  if (cfg.analysis.sample >= data.test.size()) {
    throw ConfigError(fmt::format("analysis sample {} out of range ({} test images)", cfg.analysis.sample,
                                  data.test.size()));
  }
  FeatureResult res;
  res.taps = analyze_features(teacher, data.test[cfg.analysis.sample].degraded, cfg.analysis);
  for (const auto& r : res.taps) {
    const fs::path csv = cfg.output_dir / fmt::format("features_tap{}.csv", r.tap);
    write_text(csv, format_feature_csv(r));
    const fs::path gc = cfg.output_dir / fmt::format("features_tap{}_clean_grid.tensor", r.tap);
    const fs::path gd = cfg.output_dir / fmt::format("features_tap{}_defended_grid.tensor", r.tap);
    save_tensor(gc, r.clean.grid);
    save_tensor(gd, r.defended.grid);
    res.files.insert(res.files.end(), {csv, gc, gd});
  }
  write_text(cfg.output_dir / "analyze_features.config.yaml", emit_experiment(cfg));
  return res;
}

}  // namespace asvp
