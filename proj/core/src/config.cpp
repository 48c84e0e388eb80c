#include "asvp/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "asvp/error.hpp"
#include "asvp/rng.hpp"

namespace asvp {

namespace {

std::string where(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.is_null() ? std::string("config") : fmt::format("line {}", m.line + 1);
}

void check_keys(const YAML::Node& node, std::string_view section, std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError(fmt::format("{}: section '{}' must be a mapping", where(node), section));
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("{}: unknown key '{}' in section '{}'", where(kv.first), key, section));
    }
  }
}

template <typename T>
void read(const YAML::Node& parent, const char* key, T& out) {
  const YAML::Node n = parent[key];
  if (!n) return;
  try {
    out = n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(fmt::format("{}: bad value for '{}'", where(n), key));
  }
}

template <typename T>
void read_list(const YAML::Node& parent, const char* key, std::vector<T>& out) {
  const YAML::Node n = parent[key];
  if (!n) return;
  if (!n.IsSequence()) throw ConfigError(fmt::format("{}: '{}' must be a list", where(n), key));
  out.clear();
  for (const auto& item : n) {
    try {
      out.push_back(item.as<T>());
    } catch (const YAML::Exception&) {
      throw ConfigError(fmt::format("{}: bad list entry in '{}'", where(item), key));
    }
  }
}

template <typename F>
auto with_line(const YAML::Node& n, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", where(n), e.what()));
  }
}

void parse_data(const YAML::Node& n, DataConfig& d) {
  check_keys(n, "data",
             {"task", "noise_std", "scale", "upsample", "gamma", "gain", "transmission", "airlight", "color_cast",
              "rain_streaks", "rain_angle_deg", "rain_length", "rain_intensity", "image_size", "channels",
              "train_count", "test_count"});
  DegradationSpec& g = d.degradation;
  if (n["task"]) g.task = with_line(n["task"], [&] { return parse_task(n["task"].as<std::string>()); });
  if (n["upsample"]) {
    g.upsample = with_line(n["upsample"], [&] { return parse_upsample_mode(n["upsample"].as<std::string>()); });
  }
  read(n, "noise_std", g.noise_std);
  read(n, "scale", g.scale);
  read(n, "gamma", g.gamma);
  read(n, "gain", g.gain);
  read(n, "transmission", g.transmission);
  read(n, "airlight", g.airlight);
  read(n, "color_cast", g.color_cast);
  read(n, "rain_streaks", g.rain_streaks);
  read(n, "rain_angle_deg", g.rain_angle_deg);
  read(n, "rain_length", g.rain_length);
  read(n, "rain_intensity", g.rain_intensity);
  read(n, "image_size", d.image_size);
  read(n, "channels", d.channels);
  read(n, "train_count", d.train_count);
  read(n, "test_count", d.test_count);
}

void parse_arch(const YAML::Node& n, NetworkArch& a) {
  check_keys(n, "arch", {"channels", "blocks", "kernel", "activation", "zero_init_tail"});
  read(n, "channels", a.channels);
  read(n, "blocks", a.blocks);
  read(n, "kernel", a.kernel);
  read(n, "zero_init_tail", a.zero_init_tail);
  if (n["activation"]) {
    a.activation = with_line(n["activation"], [&] { return parse_activation(n["activation"].as<std::string>()); });
  }
}

TapSelection parse_taps(const YAML::Node& n) {
  if (n.IsSequence()) {
    std::vector<std::size_t> idx;
    for (const auto& i : n) idx.push_back(i.as<std::size_t>());
    return TapSelection::explicit_indices(std::move(idx));
  }
  return with_line(n, [&] { return TapSelection::of(parse_stage(n.as<std::string>())); });
}

void parse_train(const YAML::Node& n, TrainConfig& t) {
  check_keys(n, "train", {"epochs", "batch_size", "lr", "lambda_align", "taps"});
  read(n, "epochs", t.epochs);
  read(n, "batch_size", t.batch_size);
  read(n, "lr", t.lr);
  read(n, "lambda_align", t.lambda_align);
  if (n["taps"]) t.taps = parse_taps(n["taps"]);
}

void parse_model(const YAML::Node& n, ModelConfig& m, std::string_view section, bool teacher) {
  if (teacher) {
    check_keys(n, section, {"arch", "train", "checkpoint", "train_inline"});
    if (n["checkpoint"]) m.checkpoint = n["checkpoint"].as<std::string>();
    read(n, "train_inline", m.train_inline);
  } else {
    check_keys(n, section, {"arch", "train"});
  }
  if (n["arch"]) parse_arch(n["arch"], m.arch);
  if (n["train"]) parse_train(n["train"], m.train);
}

DefenseSpec parse_defense(const YAML::Node& n) {
  if (n.IsScalar()) return with_line(n, [&] { return DefenseSpec::preset(n.as<std::string>()); });
  check_keys(n, "defense",
             {"preset", "kind", "intensity", "h", "k_ratio", "mode", "noise_std", "drop_rate", "adv_steps",
              "adv_epsilon", "adv_step_size", "adv_random_start", "relative_to_feature_std", "legacy"});
  DefenseSpec d;
  if (n["preset"]) d = with_line(n["preset"], [&] { return DefenseSpec::preset(n["preset"].as<std::string>()); });
  if (n["kind"]) d.kind = with_line(n["kind"], [&] { return parse_defense_kind(n["kind"].as<std::string>()); });
  if (n["intensity"]) {
    const std::string s = n["intensity"].as<std::string>();
    if (s == "low") d.intensity = Intensity::low;
    else if (s == "high") d.intensity = Intensity::high;
    else if (s == "custom") d.intensity = Intensity::custom;
    else throw ConfigError(fmt::format("{}: unknown intensity '{}'", where(n["intensity"]), s));
  }
  read(n, "h", d.asvp.h);
  read(n, "k_ratio", d.asvp.k_ratio);
  if (n["mode"]) d.asvp.mode = with_line(n["mode"], [&] { return parse_asvp_mode(n["mode"].as<std::string>()); });
  read(n, "noise_std", d.noise_std);
  read(n, "drop_rate", d.drop_rate);
  read(n, "adv_steps", d.adv_steps);
  read(n, "adv_epsilon", d.adv_epsilon);
  read(n, "adv_step_size", d.adv_step_size);
  read(n, "adv_random_start", d.adv_random_start);
  read(n, "relative_to_feature_std", d.relative_to_feature_std);
  read(n, "legacy", d.legacy);
  with_line(n, [&] { d.validate(); });
  return d;
}

void parse_sweep(const YAML::Node& n, SweepConfig& s) {
  check_keys(n, "sweep", {"h", "k_ratio", "mode"});
  read_list(n, "h", s.h);
  read_list(n, "k_ratio", s.k_ratio);
  if (n["mode"]) s.mode = with_line(n["mode"], [&] { return parse_asvp_mode(n["mode"].as<std::string>()); });
}

void parse_bench(const YAML::Node& n, BenchConfig& b) {
  check_keys(n, "bench", {"sizes", "channels", "trials", "h", "k_ratio", "truncated_k_ratio", "pgd_steps", "pgd_epsilon"});
  read_list(n, "sizes", b.sizes);
  read(n, "channels", b.channels);
  read(n, "trials", b.trials);
  read(n, "h", b.h);
  read(n, "k_ratio", b.k_ratio);
  read(n, "truncated_k_ratio", b.truncated_k_ratio);
  read(n, "pgd_steps", b.pgd_steps);
  read(n, "pgd_epsilon", b.pgd_epsilon);
}

void parse_analysis(const YAML::Node& n, AnalysisConfig& a) {
  check_keys(n, "analysis", {"sample", "taps", "grid_channel", "defense"});
  read(n, "sample", a.sample);
  read_list(n, "taps", a.taps);
  read(n, "grid_channel", a.grid_channel);
  if (n["defense"]) a.defense = parse_defense(n["defense"]);
}

// ---------------------------------------------------------------------------
// Emission

void emit_defense(YAML::Emitter& e, const DefenseSpec& d) {
  e << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << std::string(to_string(d.kind));
  e << YAML::Key << "intensity" << YAML::Value << std::string(to_string(d.intensity));
  e << YAML::Key << "h" << YAML::Value << d.asvp.h;
  e << YAML::Key << "k_ratio" << YAML::Value << d.asvp.k_ratio;
  e << YAML::Key << "mode" << YAML::Value << std::string(to_string(d.asvp.mode));
  e << YAML::Key << "noise_std" << YAML::Value << d.noise_std;
  e << YAML::Key << "drop_rate" << YAML::Value << d.drop_rate;
  e << YAML::Key << "adv_steps" << YAML::Value << d.adv_steps;
  e << YAML::Key << "adv_epsilon" << YAML::Value << d.adv_epsilon;
  e << YAML::Key << "adv_step_size" << YAML::Value << d.adv_step_size;
  e << YAML::Key << "adv_random_start" << YAML::Value << d.adv_random_start;
  e << YAML::Key << "relative_to_feature_std" << YAML::Value << d.relative_to_feature_std;
  e << YAML::Key << "legacy" << YAML::Value << d.legacy;
  e << YAML::EndMap;
}

void emit_arch(YAML::Emitter& e, const NetworkArch& a) {
  e << YAML::Key << "arch" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "channels" << YAML::Value << a.channels;
  e << YAML::Key << "blocks" << YAML::Value << a.blocks;
  e << YAML::Key << "kernel" << YAML::Value << a.kernel;
  e << YAML::Key << "activation" << YAML::Value << to_string(a.activation);
  e << YAML::Key << "zero_init_tail" << YAML::Value << a.zero_init_tail;
  e << YAML::EndMap;
}

void emit_train(YAML::Emitter& e, const TrainConfig& t) {
  e << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epochs" << YAML::Value << t.epochs;
  e << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  e << YAML::Key << "lr" << YAML::Value << t.lr;
  e << YAML::Key << "lambda_align" << YAML::Value << t.lambda_align;
  e << YAML::Key << "taps" << YAML::Value;
  if (t.taps.stage == Stage::explicit_set) {
    e << YAML::Flow << t.taps.indices;
  } else {
    e << std::string(to_string(t.taps.stage));
  }
  e << YAML::EndMap;
}

}  // namespace

void ExperimentConfig::apply_seed(std::uint64_t s) {
  seed = s;
  data.degradation.seed = derive_seed(s, {0x44415441ULL});
  teacher.train.seed = derive_seed(s, {0x54454143ULL});
  student.train.seed = derive_seed(s, {0x53545544ULL});
  teacher.train.task = data.degradation;
  student.train.task = data.degradation;
  const std::uint64_t dseed = derive_seed(s, {0x44454645ULL});
  for (auto& d : defenses) d.seed = dseed;
  analysis.defense.seed = dseed;
}

std::vector<DefenseSpec> ExperimentConfig::grid() const {
  std::vector<DefenseSpec> out = defenses;
  const std::uint64_t dseed = derive_seed(seed, {0x44454645ULL});
  for (double h : sweep.h) {
    for (double k : sweep.k_ratio) {
      DefenseSpec d = DefenseSpec::asvp_defense(h, k, sweep.mode);
      d.seed = dseed;
      out.push_back(d);
    }
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (data.image_size < 1 || data.channels < 1) throw ConfigError("image_size and channels must be >= 1");
  if (data.train_count < 1 || data.test_count < 1) throw ConfigError("train_count and test_count must be >= 1");
  data.degradation.validate();
  NetworkArch t = teacher.arch, s = student.arch;
  t.in_channels = s.in_channels = data.channels;
  t.validate();
  s.validate();
  teacher.train.validate();
  student.train.validate();
  for (const auto& d : defenses) d.validate();
  for (double h : sweep.h) AsvpConfig{h, 0.5}.validate();
  for (double k : sweep.k_ratio) AsvpConfig{2.0, k}.validate();
  if (bench.sizes.empty() || bench.trials < 1) throw ConfigError("bench needs at least one size and one trial");
  if (student.train.taps.stage == Stage::explicit_set) student.train.taps.resolve(student.arch.tap_count());
}

ExperimentConfig default_experiment() {
  ExperimentConfig c;
  c.teacher.arch.blocks = 8;
  c.student.arch.blocks = 4;
  c.teacher.train.lambda_align = 0.0;
  c.defenses = {DefenseSpec::none(), DefenseSpec::preset("asvp")};
  c.apply_seed(c.seed);
  return c;
}

ExperimentConfig parse_experiment(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(fmt::format("line {}: {}", e.mark.line + 1, e.msg));
  }
  ExperimentConfig c = default_experiment();
  if (!root || root.IsNull()) return c;
  check_keys(root, "top level",
             {"seed", "output_dir", "workers", "data", "teacher", "student", "defenses", "sweep", "bench", "analysis"});
  read(root, "seed", c.seed);
  if (root["output_dir"]) c.output_dir = root["output_dir"].as<std::string>();
  read(root, "workers", c.workers);
  if (root["data"]) parse_data(root["data"], c.data);
  if (root["teacher"]) parse_model(root["teacher"], c.teacher, "teacher", true);
  if (root["student"]) parse_model(root["student"], c.student, "student", false);
  if (root["defenses"]) {
    const YAML::Node list = root["defenses"];
    if (!list.IsSequence()) throw ConfigError(fmt::format("{}: 'defenses' must be a list", where(list)));
    c.defenses.clear();
    for (const auto& item : list) c.defenses.push_back(parse_defense(item));
  }
  if (root["sweep"]) parse_sweep(root["sweep"], c.sweep);
  if (root["bench"]) parse_bench(root["bench"], c.bench);
  if (root["analysis"]) parse_analysis(root["analysis"], c.analysis);
  c.teacher.arch.in_channels = c.data.channels;
  c.student.arch.in_channels = c.data.channels;
  c.apply_seed(c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_experiment(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string emit_experiment(const ExperimentConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "seed" << YAML::Value << c.seed;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir.string();
  e << YAML::Key << "workers" << YAML::Value << c.workers;

  const DegradationSpec& g = c.data.degradation;
  e << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "task" << YAML::Value << std::string(to_string(g.task));
  e << YAML::Key << "noise_std" << YAML::Value << g.noise_std;
  e << YAML::Key << "scale" << YAML::Value << g.scale;
  e << YAML::Key << "upsample" << YAML::Value << std::string(to_string(g.upsample));
  e << YAML::Key << "gamma" << YAML::Value << g.gamma;
  e << YAML::Key << "gain" << YAML::Value << g.gain;
  e << YAML::Key << "transmission" << YAML::Value << g.transmission;
  e << YAML::Key << "airlight" << YAML::Value << g.airlight;
  e << YAML::Key << "color_cast" << YAML::Value << g.color_cast;
  e << YAML::Key << "rain_streaks" << YAML::Value << g.rain_streaks;
  e << YAML::Key << "rain_angle_deg" << YAML::Value << g.rain_angle_deg;
  e << YAML::Key << "rain_length" << YAML::Value << g.rain_length;
  e << YAML::Key << "rain_intensity" << YAML::Value << g.rain_intensity;
  e << YAML::Key << "image_size" << YAML::Value << c.data.image_size;
  e << YAML::Key << "channels" << YAML::Value << c.data.channels;
  e << YAML::Key << "train_count" << YAML::Value << c.data.train_count;
  e << YAML::Key << "test_count" << YAML::Value << c.data.test_count;
  e << YAML::EndMap;

  e << YAML::Key << "teacher" << YAML::Value << YAML::BeginMap;
  emit_arch(e, c.teacher.arch);
  emit_train(e, c.teacher.train);
  if (!c.teacher.checkpoint.empty()) e << YAML::Key << "checkpoint" << YAML::Value << c.teacher.checkpoint.string();
  e << YAML::Key << "train_inline" << YAML::Value << c.teacher.train_inline;
  e << YAML::EndMap;

  e << YAML::Key << "student" << YAML::Value << YAML::BeginMap;
  emit_arch(e, c.student.arch);
  emit_train(e, c.student.train);
  e << YAML::EndMap;

  e << YAML::Key << "defenses" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : c.defenses) emit_defense(e, d);
  e << YAML::EndSeq;

  e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "h" << YAML::Value << YAML::Flow << c.sweep.h;
  e << YAML::Key << "k_ratio" << YAML::Value << YAML::Flow << c.sweep.k_ratio;
  e << YAML::Key << "mode" << YAML::Value << std::string(to_string(c.sweep.mode));
  e << YAML::EndMap;

  e << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sizes" << YAML::Value << YAML::Flow << c.bench.sizes;
  e << YAML::Key << "channels" << YAML::Value << c.bench.channels;
  e << YAML::Key << "trials" << YAML::Value << c.bench.trials;
  e << YAML::Key << "h" << YAML::Value << c.bench.h;
  e << YAML::Key << "k_ratio" << YAML::Value << c.bench.k_ratio;
  e << YAML::Key << "truncated_k_ratio" << YAML::Value << c.bench.truncated_k_ratio;
  e << YAML::Key << "pgd_steps" << YAML::Value << c.bench.pgd_steps;
  e << YAML::Key << "pgd_epsilon" << YAML::Value << c.bench.pgd_epsilon;
  e << YAML::EndMap;

  e << YAML::Key << "analysis" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "sample" << YAML::Value << c.analysis.sample;
  e << YAML::Key << "taps" << YAML::Value << YAML::Flow << c.analysis.taps;
  e << YAML::Key << "grid_channel" << YAML::Value << c.analysis.grid_channel;
  e << YAML::Key << "defense" << YAML::Value;
  emit_defense(e, c.analysis.defense);
  e << YAML::EndMap;

  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

}  // namespace asvp
