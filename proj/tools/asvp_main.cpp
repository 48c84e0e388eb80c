#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "asvp/error.hpp"
#include "asvp/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumeric = 3, kIo = 4 };

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

asvp::ExperimentConfig resolve(const GlobalFlags& f) {
  asvp::ExperimentConfig cfg = f.config.empty() ? asvp::default_experiment() : asvp::load_experiment(f.config);
  if (f.seed) cfg.apply_seed(*f.seed);
  if (f.workers) cfg.workers = *f.workers;
  if (f.out) cfg.output_dir = *f.out;
  cfg.validate();
  return cfg;
}

void print_metrics(const char* who, const asvp::RunRecord& r) {
  fmt::print("{}: test PSNR {:.4f} dB, SSIM {:.4f}, final loss {:.6f}, {:.1f} s\n", who, r.test.mean.psnr_db,
             r.test.mean.ssim, r.final_loss, r.wall_ms / 1000.0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asvp: feature-space distillation defense laboratory"};
  app.require_subcommand(1);
  GlobalFlags flags;
  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "experiment YAML file");
    sub->add_option("--seed", flags.seed, "global seed (overrides the config)");
    sub->add_option("--workers", flags.workers, "concurrent grid cells")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
    return sub;
  };
  auto* gen = add_flags(app.add_subcommand("gen-data", "write the synthetic train/test split"));
  auto* teach = add_flags(app.add_subcommand("train-teacher", "train and checkpoint the teacher"));
  auto* distill = add_flags(app.add_subcommand("distill", "distill one student under the first grid defense"));
  auto* grid = add_flags(app.add_subcommand("defense-grid", "one student per defense; CSV report"));
  auto* ablate = add_flags(app.add_subcommand("stage-ablation", "ASVP on early/mid/late/all taps"));
  auto* bench = add_flags(app.add_subcommand("bench-overhead", "per-defense latency and scratch memory"));
  auto* feats = add_flags(app.add_subcommand("analyze-features", "clean vs defended feature reports"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;  // bad flags count as a config problem
  }

  try {
    const asvp::ExperimentConfig cfg = resolve(flags);
    if (*gen) {
      const auto r = asvp::cmd_gen_data(cfg);
      fmt::print("wrote {} train / {} test pairs, checksum {:016x}\n", r.train_count, r.test_count, r.checksum);
    } else if (*teach) {
      const auto m = asvp::cmd_train_teacher(cfg);
      print_metrics("teacher", m.record);
    } else if (*distill) {
      const auto m = asvp::cmd_distill(cfg);
      print_metrics("student", m.record);
    } else if (*grid) {
      const auto r = asvp::cmd_defense_grid(cfg);
      std::fputs(asvp::format_grid_csv(r.rows).c_str(), stdout);
    } else if (*ablate) {
      const auto r = asvp::cmd_stage_ablation(cfg);
      std::fputs(asvp::format_ablation_csv(r.runs).c_str(), stdout);
    } else if (*bench) {
      const auto r = asvp::cmd_bench_overhead(cfg);
      for (const auto& row : r.rows) {
        fmt::print("{:>5} {:<16} {:>10.4f} ms {:>12} B\n", row.size, row.defense, row.median_ms, row.transient_bytes);
      }
    } else if (*feats) {
      const auto r = asvp::cmd_analyze_features(cfg);
      for (const auto& t : r.taps) {
        fmt::print("tap {}: high-frequency fraction {:.4f} -> {:.4f}, max |x| {:.4f} -> {:.4f}\n", t.tap,
                   t.clean.high_frequency_fraction, t.defended.high_frequency_fraction, t.clean.max_abs,
                   t.defended.max_abs);
      }
    }
  } catch (const asvp::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const asvp::TrainingError& e) {
    fmt::print(stderr, "training error: {}\n", e.what());
    return kNumeric;
  } catch (const asvp::NumericError& e) {
    fmt::print(stderr, "numeric error: {}\n", e.what());
    return kNumeric;
  } catch (const asvp::IoError& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return kIo;
  } catch (const asvp::FormatError& e) {
    fmt::print(stderr, "format error: {}\n", e.what());
    return kIo;
  } catch (const asvp::ShapeError& e) {
    fmt::print(stderr, "shape error: {}\n", e.what());
    return kConfig;
  }
  return kOk;
}
