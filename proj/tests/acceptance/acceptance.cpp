// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asvp/analysis.hpp"
#include "asvp/asvp.hpp"
#include "asvp/config.hpp"
#include "asvp/distill.hpp"
#include "asvp/experiment.hpp"
#include "asvp/rng.hpp"

using namespace asvp;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string printf_string(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Matrix random_matrix(Eigen::Index m, Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> d;
  Matrix x(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) x(i, j) = d(rng);
  return x;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// shared desk-scale state: one teacher, students cached by label

struct Desk {
  ExperimentConfig cfg = default_experiment();
  DatasetSplit data;
  std::optional<Network> teacher;
  std::map<std::string, RunRecord> students;
  std::map<std::string, double> seconds;  // wall time per student, target precompute included
  double teacher_seconds = 0.0;

  const Network& get_teacher() {
    if (!teacher) {
      const auto t0 = Clock::now();
      data = build_dataset(cfg);
      RunRecord rec;
      teacher = obtain_teacher(cfg, data, &rec);
      teacher_seconds = seconds_since(t0);
      std::printf("  teacher: %.1f s, test PSNR %.3f dB SSIM %.4f (input %.3f dB)\n", seconds_since(t0),
                  rec.test.mean.psnr_db, rec.test.mean.ssim, evaluate_outputs(inputs(), data.test).mean.psnr_db);
      std::fflush(stdout);
    }
    return *teacher;
  }

  std::vector<Tensor> inputs() const {
    std::vector<Tensor> v;
    for (const auto& p : data.test) v.push_back(p.degraded);
    return v;
  }

  const RunRecord& student(const DefenseSpec& d, TapSelection taps = TapSelection::of(Stage::all)) {
    const std::string key = d.label() + "/" + taps.label();
    auto it = students.find(key);
    if (it != students.end()) return it->second;
    const Network& t = get_teacher();
    TrainConfig tc = cfg.student.train;
    tc.defense = d;
    tc.defense.seed = derive_seed(cfg.seed, {0x44454645ULL});
    tc.taps = taps;
    NetworkArch arch = cfg.student.arch;
    arch.in_channels = cfg.data.channels;
    const auto t0 = Clock::now();
    RunRecord r = distill_student(t, arch, tc, data).record;
    seconds[key] = seconds_since(t0);
    std::printf("  student %-28s %6.1f s  PSNR %.3f dB  SSIM %.4f  energy %.3e\n", key.c_str(), seconds_since(t0),
                r.test.mean.psnr_db, r.test.mean.ssim,
                r.energy.mean_energy.empty() ? 0.0 : r.energy.mean_energy.front());
    std::fflush(stdout);
    return students.emplace(key, std::move(r)).first->second;
  }

  const RunRecord& clean_kd() { return student(DefenseSpec::none()); }
  const RunRecord& asvp(double h, double k, TapSelection taps = TapSelection::of(Stage::all)) {
    return student(DefenseSpec::asvp_defense(h, k), taps);
  }
};

Desk& desk() {
  static Desk d;
  return d;
}

// ---------------------------------------------------------------------------

Verdict energy_identity() {
  const auto t0 = Clock::now();
  Rng rng(derive_seed(11, {1}));
  std::uniform_int_distribution<int> dim(1, 128);
  const double hs[] = {2.0, 10.0, 1e2, 1e3};
  const double ks[] = {0.1, 0.4, 0.6, 1.0};
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix x = random_matrix(dim(rng), dim(rng), rng);
    const AsvpConfig cfg{hs[trial % 4], ks[(trial / 4) % 4]};
    Vector sigma;
    const Matrix xp = perturb_matrix_full(x, cfg, &sigma);
    const double direct = (xp - x).squaredNorm();
    const double predicted = perturbation_energy(sigma, cfg.top_k(static_cast<std::size_t>(sigma.size())), cfg.h);
    worst = std::max(worst, std::abs(direct - predicted) / std::max(1.0, x.squaredNorm()));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 10.0, printf_string("worst scaled error %.2e, %.2f s", worst, secs)};
}

Verdict teacher_invariance() {
  Desk& d = desk();
  const Network& t = d.get_teacher();
  const EvalResult base = evaluate(t, d.data.test);
  bool all_equal = true;
  std::string failing;
  for (const char* name : {"asvp", "asvp-truncated", "noise-L", "noise-H", "dropC-L", "dropC-H", "adv-L", "adv-H"}) {
    DefenseSpec s = DefenseSpec::preset(name);
    s.seed = derive_seed(d.cfg.seed, {0x44454645ULL});
    const EvalResult r = evaluate_teacher_under_defense(t, s, d.data.test);
    bool eq = r.mean.psnr_db == base.mean.psnr_db && r.mean.ssim == base.mean.ssim;
    for (std::size_t i = 0; i < r.per_sample.size(); ++i) {
      eq = eq && r.per_sample[i].psnr_db == base.per_sample[i].psnr_db && r.per_sample[i].ssim == base.per_sample[i].ssim;
    }
    if (!eq) failing += std::string(" ") + name;
    all_equal = all_equal && eq;
  }
  DefenseSpec legacy = DefenseSpec::preset("asvp");
  legacy.legacy = true;
  const double legacy_psnr = evaluate_teacher_under_defense(t, legacy, d.data.test).mean.psnr_db;
  return {all_equal, printf_string("teacher PSNR %.4f dB / SSIM %.4f under 8 defenses%s; legacy asvp %.2f dB",
                                   base.mean.psnr_db, base.mean.ssim, all_equal ? " identical" : failing.c_str(),
                                   legacy_psnr)};
}

Verdict identity_limits() {
  Rng rng(derive_seed(13, {1}));
  std::normal_distribution<double> n;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x({2, 16, 8 + static_cast<std::size_t>(trial % 5), 8});
    for (double& v : x.data()) v = n(rng);
    for (AsvpConfig c : {AsvpConfig{1.0, 0.6}, AsvpConfig{100.0, 0.0}, AsvpConfig{1.0, 0.4, AsvpMode::truncated},
                         AsvpConfig{100.0, 0.0, AsvpMode::truncated}}) {
      const DualPathOutput out = apply_asvp(x, c);
      worst = std::max(worst, std::sqrt(frobenius_norm_sq(out.protected_map - x) / frobenius_norm_sq(x)));
    }
  }
  Desk& d = desk();
  const double clean = d.clean_kd().test.mean.psnr_db;
  const double dh = std::abs(d.asvp(1.0, 0.6).test.mean.psnr_db - clean);
  const double dk = std::abs(d.asvp(100.0, 0.0).test.mean.psnr_db - clean);
  return {worst <= 1e-6 && dh <= 0.01 && dk <= 0.01,
          printf_string("feature rel diff %.1e; student |dPSNR| h=1: %.4f dB, k=0: %.4f dB", worst, dh, dk)};
}

Verdict defense_effectiveness() {
  Desk& d = desk();
  const RunRecord& clean = d.clean_kd();
  const RunRecord& prot = d.asvp(100.0, 0.6);
  const double dpsnr = clean.test.mean.psnr_db - prot.test.mean.psnr_db;
  const double dssim = clean.test.mean.ssim - prot.test.mean.ssim;
  const double total_s = d.teacher_seconds + d.seconds.at(DefenseSpec::none().label() + "/all") +
                         d.seconds.at(DefenseSpec::asvp_defense(100.0, 0.6).label() + "/all");
  return {dpsnr >= 1.5 && dssim >= 0.1 && total_s <= 1800.0,
          printf_string("clean KD %.3f dB / %.4f, ASVP %.3f dB / %.4f: drop %.3f dB, %.4f SSIM; teacher + 2 students %.0f s",
                        clean.test.mean.psnr_db, clean.test.mean.ssim, prot.test.mean.psnr_db, prot.test.mean.ssim,
                        dpsnr, dssim, total_s)};
}

Verdict sweep_monotonicity() {
  Desk& d = desk();
  constexpr double tie = 0.005;
  std::vector<double> by_h, by_k;
  for (double h : {1e1, 1e2, 1e3}) by_h.push_back(d.asvp(h, 0.6).test.mean.ssim);
  for (double k : {0.2, 0.4, 0.6}) by_k.push_back(d.asvp(1e2, k).test.mean.ssim);
  bool ok = true;
  for (std::size_t i = 1; i < 3; ++i) ok = ok && by_h[i] <= by_h[i - 1] + tie && by_k[i] <= by_k[i - 1] + tie;
  return {ok, printf_string("SSIM over h {10,100,1000}: %.4f %.4f %.4f; over k {0.2,0.4,0.6}: %.4f %.4f %.4f", by_h[0],
                            by_h[1], by_h[2], by_k[0], by_k[1], by_k[2])};
}

Verdict stage_ordering() {
  Desk& d = desk();
  constexpr double tie = 0.1;
  // the clean-KD and all-stage students are the "none" and "all" rows of the ablation
  const double none = d.clean_kd().test.mean.psnr_db;
  const double early = d.asvp(100, 0.6, TapSelection::of(Stage::early)).test.mean.psnr_db;
  const double mid = d.asvp(100, 0.6, TapSelection::of(Stage::mid)).test.mean.psnr_db;
  const double late = d.asvp(100, 0.6, TapSelection::of(Stage::late)).test.mean.psnr_db;
  const double all = d.asvp(100, 0.6).test.mean.psnr_db;
  const bool clean_best = none >= std::max({early, mid, late, all});
  const bool all_worst = all <= std::min({none, early, mid, late});
  const bool late_le_early = late <= early + tie;
  return {clean_best && all_worst && late_le_early,
          printf_string("PSNR none %.3f, early %.3f, mid %.3f, late %.3f, all %.3f", none, early, mid, late, all)};
}

Verdict truncated_variant() {
  Rng rng(derive_seed(17, {1}));
  const AsvpConfig full{100.0, 0.4, AsvpMode::full};
  const AsvpConfig trunc{100.0, 0.4, AsvpMode::truncated};
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Matrix x = random_matrix(256, 64, rng);
    const Matrix a = perturb_matrix_full(x, full);
    const Matrix b = perturb_matrix_truncated(x, trunc);
    worst = std::max(worst, (a - b).norm() / a.norm());
  }
  const Matrix x = random_matrix(256, 64, rng);
  std::vector<double> tf, tt;
  for (int i = 0; i < 20; ++i) {
    auto t0 = Clock::now();
    volatile double sink = perturb_matrix_full(x, full)(0, 0);
    tf.push_back(seconds_since(t0));
    t0 = Clock::now();
    sink = perturb_matrix_truncated(x, trunc)(0, 0);
    tt.push_back(seconds_since(t0));
    (void)sink;
  }
  const double mf = median(tf) * 1e3, mt = median(tt) * 1e3;
  return {worst <= 1e-3 && mt < mf,
          printf_string("worst rel diff %.2e; median full %.3f ms, truncated %.3f ms (%.0f%% faster)", worst, mf, mt,
                        100.0 * (1.0 - mt / mf))};
}

Verdict gradient_check() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(derive_seed(seed, {0x4744}));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    NetworkArch tarch{1, 4, 8};
    tarch.zero_init_tail = false;
    NetworkArch sarch{1, 4, 4};
    sarch.zero_init_tail = false;
    const Network teacher = init_network(tarch, derive_seed(seed, {1}));
    const Network student = init_network(sarch, derive_seed(seed, {2}));
    Tensor x({2, 1, 8, 8});
    for (double& v : x.data()) v = u(rng);

    const std::vector<std::size_t> s_taps{0, 1, 2, 3};
    std::vector<std::size_t> t_taps;
    for (std::size_t s : s_taps) t_taps.push_back(paired_teacher_tap(s, 4, 8));
    const DefendedForward f = defended_forward(teacher, x, DefenseSpec::asvp_defense(10.0, 0.5), t_taps, 0);
    std::vector<Tensor> targets;
    for (std::size_t j = 0; j < s_taps.size(); ++j) {
      const auto pos = static_cast<std::size_t>(
          std::find(f.tap_indices.begin(), f.tap_indices.end(), t_taps[j]) - f.tap_indices.begin());
      targets.push_back(f.taps[pos].protected_map);
    }
    const Objective obj = kd_objective(f.output, targets, s_taps, 0.7, 4);
    const GradientResult g = value_and_grad(student, x, obj);
    double gmax = 0.0;
    for (double v : g.grad) gmax = std::max(gmax, std::abs(v));

    auto loss_at = [&](const std::vector<double>& p) {
      const Network n(sarch, p);
      LossGradients unused;
      return obj(n, forward(n, x), unused);
    };
    const std::vector<double> base(student.params().begin(), student.params().end());
    std::uniform_int_distribution<std::size_t> pick(0, base.size() - 1);
    constexpr double delta = 1e-4;
    for (int c = 0; c < 20; ++c) {
      const std::size_t i = pick(rng);
      auto up = base, down = base;
      up[i] += delta;
      down[i] -= delta;
      const double fd = (loss_at(up) - loss_at(down)) / (2 * delta);
      // relative to the coordinate, floored at 1% of the largest gradient entry
      const double scale = std::max({std::abs(fd), std::abs(g.grad[i]), 1e-2 * gmax});
      worst = std::max(worst, std::abs(fd - g.grad[i]) / scale);
    }
  }
  return {worst <= 1e-4, printf_string("worst relative error %.2e over 100 coordinates", worst)};
}

double naive_psnr(const Tensor& a, const Tensor& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  return 10.0 * std::log10(1.0 / (se / static_cast<double>(a.size())));
}

double naive_ssim(const Tensor& a, const Tensor& b, std::size_t h, std::size_t w) {
  std::vector<double> g(11);
  double gs = 0.0;
  for (int i = -5; i <= 5; ++i) gs += g[static_cast<std::size_t>(i + 5)] = std::exp(-i * i / 4.5);
  for (double& v : g) v /= gs;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + 11 <= h; ++y)
    for (std::size_t x = 0; x + 11 <= w; ++x) {
      double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
      for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
          const double k = g[i] * g[j];
          const double va = a[(y + i) * w + x + j], vb = b[(y + i) * w + x + j];
          ma += k * va;
          mb += k * vb;
          aa += k * va * va;
          bb += k * vb * vb;
          ab += k * va * vb;
        }
      total += (2 * ma * mb + c1) * (2 * (ab - ma * mb) + c2) /
               ((ma * ma + mb * mb + c1) * (aa - ma * ma + bb - mb * mb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

Verdict metric_oracles() {
  Rng rng(derive_seed(19, {1}));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> dim(11, 24);
  double worst_psnr = 0.0, worst_ssim = 0.0;
  bool self_one = true;
  for (int i = 0; i < 50; ++i) {
    const std::size_t h = dim(rng), w = dim(rng);
    Tensor a({1, h, w}), b({1, h, w});
    const double noise = 0.02 + 0.2 * u(rng);
    for (std::size_t j = 0; j < a.size(); ++j) {
      a[j] = u(rng);
      b[j] = std::clamp(a[j] + noise * (u(rng) - 0.5), 0.0, 1.0);
    }
    worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - naive_psnr(a, b)));
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - naive_ssim(a, b, h, w)));
    self_one = self_one && ssim(a, a) == 1.0;
  }
  double worst_parseval = 0.0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t h = dim(rng), w = dim(rng);
    std::vector<double> x(h * w);
    double energy = 0.0;
    for (double& v : x) {
      v = u(rng) - 0.5;
      energy += v * v;
    }
    double spec = 0.0;
    for (const auto& c : dft2(x, h, w)) spec += std::norm(c);
    worst_parseval = std::max(worst_parseval, std::abs(spec / static_cast<double>(h * w) - energy) / energy);
  }
  return {worst_psnr <= 1e-8 && worst_ssim <= 1e-8 && self_one && worst_parseval <= 1e-6,
          printf_string("PSNR err %.1e, SSIM err %.1e, ssim(a,a)==1 %s, Parseval rel err %.1e", worst_psnr, worst_ssim,
                        self_one ? "yes" : "no", worst_parseval)};
}

Verdict overhead_ordering() {
  const ExperimentConfig cfg = default_experiment();
  const std::vector<OverheadRow> rows = run_bench_overhead(cfg);
  const std::size_t largest = *std::max_element(cfg.bench.sizes.begin(), cfg.bench.sizes.end());
  std::map<std::string, double> ms;
  for (const auto& r : rows)
    if (r.size == largest) ms[r.defense] = r.median_ms;
  const std::string pgd = "pgd-" + std::to_string(cfg.bench.pgd_steps);
  const bool ok = ms.at("none") < ms.at("asvp-truncated") && ms.at("asvp-truncated") <= ms.at("asvp-full") &&
                  ms.at("asvp-full") < ms.at(pgd);
  return {ok, printf_string("median ms at %zux%zu: none %.4f, truncated %.3f, full %.3f, %s %.3f", largest, largest,
                            ms.at("none"), ms.at("asvp-truncated"), ms.at("asvp-full"), pgd.c_str(), ms.at(pgd))};
}

std::string csv_without_timing(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream out;
  std::string line;
  while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << "\n";
  return out.str();
}

Verdict grid_determinism() {
  ExperimentConfig cfg = parse_experiment(R"(
seed: 21
data: {image_size: 16, train_count: 48, test_count: 16}
teacher:
  arch: {channels: 8, blocks: 4}
  train: {epochs: 4}
student:
  arch: {channels: 8, blocks: 2}
  train: {epochs: 3}
defenses: [none, asvp, noise-L, dropC-L, adv-L]
)");
  std::vector<std::string> csvs;
  for (int run = 0; run < 2; ++run) {
    cfg.output_dir = fs::temp_directory_path() / ("asvp_acceptance_grid_" + std::to_string(run));
    fs::remove_all(cfg.output_dir);
    csvs.push_back(csv_without_timing(cmd_defense_grid(cfg).csv));
  }
  const bool same = csvs[0] == csvs[1] && !csvs[0].empty();
  return {same, printf_string("%zu bytes of CSV (timing column removed) %s", csvs[0].size(),
                              same ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"energy identity", energy_identity},
      {"teacher invariance", teacher_invariance},
      {"identity limits", identity_limits},
      {"defense effectiveness", defense_effectiveness},
      {"sweep monotonicity", sweep_monotonicity},
      {"stage ablation ordering", stage_ordering},
      {"truncated variant", truncated_variant},
      {"gradient correctness", gradient_check},
      {"metric oracles", metric_oracles},
      {"overhead ordering", overhead_ordering},
      {"grid determinism", grid_determinism},
  };
  const auto t0 = Clock::now();
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed, %.0f s\n", failures, criteria.size(), seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
