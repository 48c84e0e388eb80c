#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asvp/config.hpp"
#include "asvp/error.hpp"
#include "asvp/experiment.hpp"
#include "asvp/tensor_file.hpp"

using namespace asvp;
namespace fs = std::filesystem;

namespace {

const char* kTinyYaml = R"(
seed: 4
data: {image_size: 8, train_count: 6, test_count: 3}
teacher:
  arch: {channels: 4, blocks: 3}
  train: {epochs: 2, batch_size: 3, lr: 0.003}
student:
  arch: {channels: 4, blocks: 2}
  train: {epochs: 1, batch_size: 3, lr: 0.003}
defenses: [none, asvp, noise-H]
bench: {sizes: [8], channels: 4, trials: 2}
)";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("asvp_exp_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny(const fs::path& out) {
  ExperimentConfig c = parse_experiment(kTinyYaml);
  c.output_dir = out;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// drop the trailing wall-clock column
std::string strip_timing(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << "\n";
  return out.str();
}

}  // namespace

TEST(GenData, IdenticalBytesAcrossRuns) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  const GenDataResult ra = cmd_gen_data(tiny(a));
  const GenDataResult rb = cmd_gen_data(tiny(b));
  EXPECT_EQ(ra.checksum, rb.checksum);
  EXPECT_EQ(ra.train_count, 6u);
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (std::size_t i = 0; i < ra.files.size(); ++i) {
    EXPECT_EQ(read_file_bytes(ra.files[i]), read_file_bytes(rb.files[i])) << ra.files[i];
  }
  EXPECT_EQ(load_tensor(a / "train_clean.tensor").dims(), (Shape{6, 1, 8, 8}));
  ExperimentConfig other = tiny(b);
  other.apply_seed(5);
  EXPECT_NE(cmd_gen_data(other).checksum, ra.checksum);
}

TEST(Grid, CsvFormatting) {
  GridRow r;
  r.defense = DefenseSpec::preset("asvp");
  r.teacher = {30.0, 0.9};
  r.student = {25.5, 0.8};
  r.delta_psnr_vs_clean_kd = -1.25;
  EXPECT_EQ(format_grid_row(r),
            "\"asvp(h=100,k=0.6)\",100.0000,0.6000,30.0000,0.9000,25.5000,0.8000,-1.2500,0.0000,0.0000");
  r.defense = DefenseSpec::preset("noise-L");
  EXPECT_EQ(format_grid_row(r).substr(0, 12), "\"noise-L\",,,");
  EXPECT_EQ(format_grid_csv({r}).substr(0, std::string(kGridHeader).size()), kGridHeader);
}

TEST(Grid, OnlyNoneGivesZeroDelta) {
  ExperimentConfig c = tiny(scratch("grid_none"));
  c.defenses = {DefenseSpec::none()};
  c.apply_seed(c.seed);
  const GridResult r = cmd_defense_grid(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].delta_psnr_vs_clean_kd, 0.0);
  EXPECT_TRUE(fs::exists(r.csv));
  EXPECT_TRUE(fs::exists(c.output_dir / "defense_grid.runs.json"));
}

TEST(Grid, WorkerCountDoesNotChangeResults) {
  ExperimentConfig one = tiny(scratch("grid_w1"));
  ExperimentConfig two = tiny(scratch("grid_w2"));
  two.workers = 2;
  const GridResult a = cmd_defense_grid(one);
  const GridResult b = cmd_defense_grid(two);
  ASSERT_EQ(a.rows.size(), 3u);
  EXPECT_EQ(strip_timing(slurp(a.csv)), strip_timing(slurp(b.csv)));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.rows[i].record.network_fingerprint, b.rows[i].record.network_fingerprint);
  EXPECT_EQ(a.rows[0].delta_psnr_vs_clean_kd, 0.0);
  EXPECT_GT(a.rows[1].mean_energy, 0.0);
}

TEST(Grid, WithoutCleanRowStillReportsDelta) {
  ExperimentConfig c = tiny(scratch("grid_noclean"));
  c.defenses = {DefenseSpec::preset("asvp")};
  c.apply_seed(c.seed);
  const GridResult r = cmd_defense_grid(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_NE(r.rows[0].delta_psnr_vs_clean_kd, 0.0);
}

TEST(Teacher, CheckpointReloadMatchesInline) {
  const fs::path out = scratch("teacher");
  ExperimentConfig c = tiny(out);
  const TrainedModel m = cmd_train_teacher(c);
  EXPECT_TRUE(fs::exists(out / "teacher.tensor"));
  c.teacher.checkpoint = out / "teacher";
  c.teacher.train_inline = false;
  const DatasetSplit data = build_dataset(c);
  EXPECT_EQ(obtain_teacher(c, data).fingerprint(), m.net.fingerprint());
  c.teacher.checkpoint = out / "absent";
  EXPECT_THROW(obtain_teacher(c, data), IoError);
  c.teacher.checkpoint = out / "teacher";
  c.teacher.arch.channels = 6;
  EXPECT_THROW(obtain_teacher(c, data), ConfigError);
}

TEST(Features, NoneDefenseGivesIdenticalReports) {
  ExperimentConfig c = tiny(scratch("features"));
  c.analysis.defense = DefenseSpec::none();
  const FeatureResult r = cmd_analyze_features(c);
  ASSERT_EQ(r.taps.size(), 3u);
  for (const auto& t : r.taps) {
    EXPECT_EQ(t.clean.radial_profile, t.defended.radial_profile);
    EXPECT_EQ(t.clean.histogram, t.defended.histogram);
    EXPECT_EQ(t.clean.energy, t.defended.energy);
  }
  EXPECT_EQ(r.files.size(), 9u);
  c.analysis.sample = 99;
  EXPECT_THROW(cmd_analyze_features(c), ConfigError);
}

TEST(Bench, RowsPerSizeAndDefense) {
  ExperimentConfig c = tiny(scratch("bench"));
  const OverheadResult r = cmd_bench_overhead(c);
  ASSERT_FALSE(r.rows.empty());
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.size, 8u);
    EXPECT_GE(row.median_ms, row.min_ms);
  }
  EXPECT_EQ(transient_bytes_estimate("none", 64, 16, 4), 0u);
  EXPECT_GT(transient_bytes_estimate("asvp-full", 64, 16, 10), transient_bytes_estimate("asvp-truncated", 64, 16, 4));
}

TEST(Parallel, RunsEveryJobAndRethrowsFirstError) {
  std::atomic<int> sum{0};
  run_parallel(10, 3, [&](std::size_t i) { sum += static_cast<int>(i); });
  EXPECT_EQ(sum.load(), 45);
  try {
    run_parallel(5, 2, [](std::size_t i) {
      if (i == 1) throw ConfigError("one");
      if (i == 3) throw IoError("three");
    });
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "one");
  }
}

#ifdef ASVP_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ASVP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "cfg.yaml";
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const fs::path good = write_config(dir, kTinyYaml);
  EXPECT_EQ(run_cli("gen-data --config " + good.string() + " --out " + (dir / "o").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o" / "manifest.json"));
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "missing.yaml").string()), 4);
  EXPECT_EQ(run_cli("gen-data --bogus-flag"), 2);
  EXPECT_EQ(run_cli(""), 2);

  const fs::path bad = scratch("cli_bad");
  EXPECT_EQ(run_cli("gen-data --config " + write_config(bad, "data: {imgae_size: 8}\n").string()), 2);

  const fs::path noinline = scratch("cli_noinline");
  const fs::path cfg2 = noinline / "cfg2.yaml";
  {
    std::string t = kTinyYaml;
    t.replace(t.find("teacher:\n"), 9, "teacher:\n  checkpoint: " + (noinline / "nothing").string() +
                                           "\n  train_inline: false\n");
    std::ofstream(cfg2) << t;
  }
  EXPECT_EQ(run_cli("analyze-features --config " + cfg2.string() + " --out " + (noinline / "o").string()), 4);

  const fs::path diverge = scratch("cli_diverge");
  std::string t = kTinyYaml;
  t.replace(t.find("lr: 0.003"), 9, "lr: 1e300");
  EXPECT_EQ(run_cli("train-teacher --config " + write_config(diverge, t).string() + " --out " +
                    (diverge / "o").string()),
            3);
}
#endif
