// Acceptance harness. Prints one PASS/FAIL line per criterion and exits
// nonzero when any selected criterion fails.
//
//   hpal_acceptance [--only N] [--cli PATH_TO_HPAL]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "fuzz.h"
#include "generators.h"
#include "hpal/data_io.h"
#include "hpal/metrics.h"
#include "hpal/selection.h"
#include "hpal/spatial_index.h"
#include "hpal/trainer.h"
#include "hpal/uncertainty.h"
#include "oracles.h"

namespace hpal {
namespace {

using ::hpal::testing::Gen;
using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
};

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string g_cli;  // path of the hpal binary, if given

// ---------------------------------------------------------------------------
// 1. Uncertainty formulas against linear-scan references.

Verdict Criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t clouds = 0;
  for (std::uint64_t seed = 0; seed < 120; ++seed, ++clouds) {
    Gen g(1000 + seed);
    const std::size_t n = g.Int(50, 500);
    const std::size_t c = g.Int(2, 13);
    const PointCloud cloud = g.Cloud(n, g.Uniform(0.5, 4.0));
    const ProbabilityField probs = g.Probs(n, c);
    std::vector<LevelSpec> specs = DefaultLevels();
    if (g.Coin()) {
      specs.clear();
      const std::size_t levels = g.Int(1, 4);
      for (std::size_t l = 0; l < levels; ++l) {
        specs.push_back({g.Uniform(0.02, 1.5), g.Uniform(0.0, 0.5)});
      }
    }
    const VoxelGrid grid = build_grid(cloud, g.Uniform(0.05, 1.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = oracle::Row(probs, i);
      worst = std::max(worst, std::abs(point_margin(row) - oracle::Margin(row)));
      std::vector<double> ul;
      for (const LevelSpec& s : specs) {
        const auto got = contextual_distribution(cloud, probs, grid,
                                                 static_cast<Index>(i), s.radius_m);
        const auto want = oracle::Context(cloud, probs, i, s.radius_m);
        for (std::size_t q = 0; q < c; ++q) {
          worst = std::max(worst, std::abs(got[q] - want[q]));
        }
        const double lm = level_margin(got);
        worst = std::max(worst, std::abs(lm - oracle::Margin(want)));
        ul.push_back(lm);
      }
      double naive = oracle::Margin(row);
      for (std::size_t l = 0; l < specs.size(); ++l) naive += specs[l].weight * ul[l];
      worst = std::max(worst,
                       std::abs(fuse_scores(point_margin(row), ul, specs) - naive));
    }
    ScoreOptions opts;
    opts.threads = static_cast<unsigned>(g.Int(1, 3));
    const UncertaintyScores got = score_hmmu(cloud, probs, specs, opts);
    const oracle::Hmmu want = oracle::ScoreHmmu(cloud, probs, specs);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(got.u_point[i] - want.u_point[i]));
      worst = std::max(worst, std::abs(got.fused[i] - want.fused[i]));
      for (std::size_t l = 0; l < specs.size(); ++l) {
        worst = std::max(worst, std::abs(got.u_level[l][i] - want.u_level[l][i]));
      }
    }
  }
  const double secs = Seconds(t0);
  return {worst <= 1e-9 && secs < 30.0,
          Fmt("%zu clouds, max abs error %.3g (limit 1e-9), %.2f s (limit 30 s)",
              clouds, worst, secs)};
}

// ---------------------------------------------------------------------------
// 2. Suppression guarantee and equality with the quadratic greedy reference.

Verdict Criterion2() {
  const auto t0 = Clock::now();
  std::size_t instances = 0, mismatches = 0, violations = 0, suppressed = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed, ++instances) {
    Gen g(2000 + seed);
    const std::size_t n = 200;
    const PointCloud cloud = g.Cloud(n, 1.0);
    const std::size_t dim = g.Int(2, 8);
    FeatureField feats(n, dim);
    std::vector<std::vector<double>> protos(g.Int(2, 5));
    for (auto& p : protos) {
      for (std::size_t k = 0; k < dim; ++k) p.push_back(g.Uniform(0.0, 1.0));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = protos[g.Int(0, protos.size() - 1)];
      for (std::size_t k = 0; k < dim; ++k) feats.row(i)[k] = p[k] + g.Normal(0.2);
    }
    SelectionConfig cfg;
    cfg.radius_m = g.Uniform(0.05, 0.5);
    cfg.tau = g.Uniform(0.5, 0.95);
    cfg.budget_k = g.Int(0, 50);
    std::vector<Index> ranked(n);
    std::iota(ranked.begin(), ranked.end(), Index{0});
    std::shuffle(ranked.begin(), ranked.end(), g.rng());
    const SelectionResult got =
        fds_select(ranked, cloud, feats, cfg, build_grid(cloud, cfg.radius_m));
    suppressed += got.suppressed.size();
    if (!(got == oracle::Fds(ranked, cloud, feats, cfg.budget_k, cfg.radius_m,
                             cfg.tau))) {
      ++mismatches;
    }
    for (std::size_t a = 0; a < got.selected.size(); ++a) {
      for (std::size_t b = a + 1; b < got.selected.size(); ++b) {
        const Index i = got.selected[a], j = got.selected[b];
        if (oracle::Dist2(cloud.positions[i], cloud.positions[j]) <
                cfg.radius_m * cfg.radius_m &&
            oracle::Cosine(feats.row(i), feats.row(j)) > cfg.tau) {
          ++violations;
        }
      }
    }
  }
  const double secs = Seconds(t0);
  return {mismatches == 0 && violations == 0 && secs < 30.0,
          Fmt("%zu instances, %zu oracle mismatches, %zu pair violations, "
              "%zu suppressions exercised, %.2f s",
              instances, mismatches, violations, suppressed, secs)};
}

// ---------------------------------------------------------------------------
// 3. EMA closed form.

SegmenterParams RandomParams(Gen& g, std::size_t c, std::size_t f) {
  SegmenterParams p = SegmenterParams::Zeros(c, f);
  for (double& w : p.weights.data) w = g.Normal(2.0);
  for (double& b : p.bias) b = g.Normal(2.0);
  return p;
}

Verdict Criterion3() {
  double worst = 0.0;
  std::size_t cases = 0;
  for (double alpha : {0.5, 0.9, 0.955}) {
    for (std::size_t j : {1, 10, 100}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed, ++cases) {
        Gen g(3000 + seed);
        const std::size_t c = g.Int(2, 10), f = g.Int(1, 16);
        const SegmenterParams t0 = RandomParams(g, c, f);
        const SegmenterParams s = RandomParams(g, c, f);
        SegmenterParams t = t0;
        for (std::size_t step = 0; step < j; ++step) t = ema_update(t, s, alpha);
        const double aj = std::pow(alpha, static_cast<double>(j));
        for (std::size_t k = 0; k < t.weights.data.size(); ++k) {
          const double want = aj * t0.weights.data[k] + (1 - aj) * s.weights.data[k];
          worst = std::max(worst, std::abs(t.weights.data[k] - want));
        }
        for (std::size_t k = 0; k < c; ++k) {
          const double want = aj * t0.bias[k] + (1 - aj) * s.bias[k];
          worst = std::max(worst, std::abs(t.bias[k] - want));
        }
      }
    }
  }
  return {worst <= 1e-6,
          Fmt("%zu cases over alpha {0.5,0.9,0.955} x j {1,10,100}, "
              "max abs error %.3g (limit 1e-6)",
              cases, worst)};
}

// ---------------------------------------------------------------------------
// 4. Analytic cross-entropy gradient against central differences.

Verdict Criterion4() {
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 80; ++seed, ++instances) {
    Gen g(4000 + seed);
    const std::size_t c = g.Int(2, 8), f = g.Int(1, 10), n = g.Int(1, 60);
    const SegmenterParams p = RandomParams(g, c, f);
    FeatureField feats(n, f);
    for (double& v : feats.feats.data) v = g.Normal(1.0);
    LabelMap targets;
    for (std::size_t i = 0; i < n; ++i) {
      if (g.Coin(0.7)) {
        targets.push_back({static_cast<Index>(i),
                           static_cast<ClassId>(g.Int(0, c - 1))});
      }
    }
    if (targets.empty()) targets.push_back({0, 0});
    const SegmenterParams got = cross_entropy_gradient(p, feats, targets);
    const SegmenterParams fd =
        oracle::FiniteDifferenceGradient(p, feats, targets, 1e-4);
    double diff = 0.0, ng = 0.0, nf = 0.0;
    auto add = [&](double a, double b) {
      diff += (a - b) * (a - b);
      ng += a * a;
      nf += b * b;
    };
    for (std::size_t k = 0; k < got.weights.data.size(); ++k) {
      add(got.weights.data[k], fd.weights.data[k]);
    }
    for (std::size_t k = 0; k < c; ++k) add(got.bias[k], fd.bias[k]);
    const double denom = std::max({std::sqrt(ng), std::sqrt(nf), 1e-12});
    worst = std::max(worst, std::sqrt(diff) / denom);
  }
  return {worst <= 1e-4,
          Fmt("%zu instances, max relative error %.3g (limit 1e-4, h = 1e-4)",
              instances, worst)};
}

// ---------------------------------------------------------------------------
// 5. Directional benchmark on the reference scene.

Verdict Criterion5() {
  const auto t0 = Clock::now();
  const std::vector<Strategy> strategies = {Strategy::kRandom, Strategy::kMmu,
                                            Strategy::kHmmu, Strategy::kHmmuFds};
  std::vector<std::vector<double>> finals(strategies.size());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SceneSpec spec;
    spec.n_points = 50000;
    spec.n_classes = 8;
    spec.seed = seed;
    const PointCloud cloud = gen_synthetic(spec);
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      TrainerConfig tc;
      tc.seed = seed;
      tc.iterations = 5;
      tc.per_iter_fraction = 0.0002;
      SelectionConfig sc;
      sc.strategy = strategies[s];
      LoopOptions lo;
      lo.scoring.threads = 1;
      const auto reports = active_loop(cloud, tc, sc, DefaultLevels(), lo);
      finals[s].push_back(reports.back().miou);
      std::printf("  seed %llu %-9s final mIoU %.4f\n",
                  static_cast<unsigned long long>(seed),
                  std::string(StrategyName(strategies[s])).c_str(),
                  reports.back().miou);
      std::fflush(stdout);
    }
  }
  std::vector<double> mean;
  for (const auto& f : finals) {
    mean.push_back(std::accumulate(f.begin(), f.end(), 0.0) / f.size());
  }
  const double secs = Seconds(t0);
  const double margin = mean[3] - mean[0];
  const bool pass = margin >= 0.02 && mean[3] >= mean[2] && mean[2] >= mean[1] &&
                    secs < 600.0;
  return {pass, Fmt("mean final mIoU random %.4f mmu %.4f hmmu %.4f hmmu_fds "
                    "%.4f; hmmu_fds - random %+.4f (need >= 0.02), ordering "
                    "hmmu_fds>=hmmu>=mmu %s, %.0f s (limit 600 s)",
                    mean[0], mean[1], mean[2], mean[3], margin,
                    mean[3] >= mean[2] && mean[2] >= mean[1] ? "holds" : "fails",
                    secs)};
}

// ---------------------------------------------------------------------------
// 6. Budget schedule.

Verdict Criterion6() {
  std::size_t checked = 0, wrong = 0;
  std::string first;
  for (std::size_t n : {50000u, 49999u, 12345u, 7777u}) {
    SceneSpec spec;
    spec.n_points = n;
    spec.seed = 6;
    const PointCloud cloud = gen_synthetic(spec);
    for (Strategy s : {Strategy::kRandom, Strategy::kHmmuFds}) {
      TrainerConfig tc;
      tc.steps = 3;
      tc.iterations = 5;
      tc.per_iter_fraction = 0.0002;
      SelectionConfig sc;
      sc.strategy = s;
      const auto reports = active_loop(cloud, tc, sc, DefaultLevels());
      for (std::size_t i = 1; i <= 5; ++i, ++checked) {
        const std::size_t want = oracle::FlooredCount(n, i, 0.0002);
        const auto& r = reports[i - 1];
        const bool ok = r.iteration == i && r.labeled_count == want &&
                        r.labeled_fraction == static_cast<double>(want) / n;
        if (!ok && wrong++ == 0) {
          first = Fmt("n %zu iteration %zu: got %zu want %zu", n, i,
                      r.labeled_count, want);
        }
      }
    }
  }
  return {wrong == 0 && checked == 40,
          Fmt("%zu iteration counts checked, %zu wrong%s%s", checked, wrong,
              wrong ? "; first: " : "", first.c_str())};
}

// ---------------------------------------------------------------------------
// 7. Determinism of the simulate command.

std::string Slurp(const std::filesystem::path& p) {
  return ReadFile(p.string());
}

Verdict Criterion7() {
  namespace fs = std::filesystem;
  // Library level: two runs of the loop agree on every reported field.
  SceneSpec spec;
  spec.n_points = 20000;
  spec.seed = 7;
  const PointCloud cloud = gen_synthetic(spec);
  TrainerConfig tc;
  tc.steps = 40;
  tc.seed = 3;
  SelectionConfig sc;
  auto strip = [](std::vector<IterationReport> r) {
    for (auto& x : r) x.wall_seconds = 0.0;
    return r;
  };
  const bool lib_same = strip(active_loop(cloud, tc, sc, DefaultLevels())) ==
                        strip(active_loop(cloud, tc, sc, DefaultLevels()));
  if (g_cli.empty()) {
    return {lib_same, Fmt("library-level repeat %s; CLI not given",
                          lib_same ? "identical" : "DIFFERS")};
  }

  const fs::path dir = fs::temp_directory_path() /
                       ("hpal_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  save_ply(cloud, (dir / "scene.ply").string());
  std::size_t files = 0, differing = 0;
  bool ran = true;
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    const std::string cmd =
        "'" + g_cli + "' simulate --cloud '" + (dir / "scene.ply").string() +
        "' --strategies random,mmu,hmmu,hmmu_fds --seeds 2 --steps 40"
        " --out '" + (dir / ("results" + tag + ".json")).string() +
        "' --selections-dir '" + (dir / ("sel" + tag)).string() +
        "' > /dev/null 2>&1";
    ran &= std::system(cmd.c_str()) == 0;
  }
  if (ran) {
    ++files;
    differing += Slurp(dir / "results0.json") != Slurp(dir / "results1.json");
    for (const auto& e : fs::directory_iterator(dir / "sel0")) {
      ++files;
      const fs::path twin = dir / "sel1" / e.path().filename();
      differing += !fs::exists(twin) || Slurp(e.path()) != Slurp(twin);
    }
    std::size_t other = 0;
    for (const auto& e : fs::directory_iterator(dir / "sel1")) {
      (void)e;
      ++other;
    }
    differing += other + 1 != files;
  }
  fs::remove_all(dir);
  return {lib_same && ran && differing == 0 && files > 1,
          Fmt("library-level repeat %s; CLI simulate twice: %s, %zu files "
              "compared, %zu differ",
              lib_same ? "identical" : "DIFFERS", ran ? "ran" : "FAILED to run",
              files, differing)};
}

// ---------------------------------------------------------------------------
// 8. Performance at one million points.

Verdict Criterion8() {
  SceneSpec spec;
  spec.n_points = 1000000;
  spec.seed = 8;
  const PointCloud cloud = gen_synthetic(spec);
  Gen g(8);
  const ProbabilityField probs = g.Probs(cloud.size(), spec.n_classes);
  ScoreOptions opts;
  opts.threads = std::max(1u, std::thread::hardware_concurrency());

  auto t0 = Clock::now();
  const UncertaintyScores scores = score_hmmu(cloud, probs, DefaultLevels(), opts);
  const double score_secs = Seconds(t0);

  const FeatureField feats = local_geometric_features(cloud, 0.15);
  std::vector<Index> all(cloud.size());
  std::iota(all.begin(), all.end(), Index{0});
  const std::vector<Index> ranked =
      rank_candidates(scores.fused, all, RankDirection::kAscending);
  SelectionConfig sc;
  sc.budget_k = 1000;
  t0 = Clock::now();
  const SelectionResult sel =
      fds_select(ranked, cloud, feats, sc, build_grid(cloud, sc.radius_m));
  const double fds_secs = Seconds(t0);
  return {score_secs < 30.0 && fds_secs < 10.0 && sel.selected.size() == 1000,
          Fmt("score_hmmu 3 levels on 1M points: %.2f s (limit 30 s, %u "
              "thread%s); fds_select K=1000: %.3f s (limit 10 s), %zu "
              "suppressed",
              score_secs, opts.threads, opts.threads == 1 ? "" : "s", fds_secs,
              sel.suppressed.size())};
}

// ---------------------------------------------------------------------------
// 9. File format round trips and fuzzing.

Verdict Criterion9() {
  std::size_t ply_bad = 0, mtx_bad = 0, fixtures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed, ++fixtures) {
    Gen g(9000 + seed);
    const std::size_t n = g.Int(0, 400);
    const bool labels = g.Coin();
    PointCloud c = g.Cloud(n, 20.0, labels ? 10 : 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) {
        // Declared precision: float32 positions, 8-bit colors.
        c.positions[i][a] = static_cast<double>(static_cast<float>(c.positions[i][a] - 10.0));
        c.colors[i][a] = static_cast<double>(g.Int(0, 255)) / 255.0;
      }
    }
    ply_bad += !(ParsePly(FormatPly(c)) == c);

    const std::size_t rows = g.Int(0, 50), cols = g.Int(0, 20);
    Matrix<float> mf(rows, cols);
    for (float& v : mf.data) {
      std::uint32_t bits = static_cast<std::uint32_t>(g.rng()());
      std::memcpy(&v, &bits, sizeof v);  // any bit pattern, NaNs included
    }
    const MatrixBlob bf = DecodeMatrix(EncodeMatrix(mf));
    mtx_bad += bf.dtype != MatrixDtype::kFloat32 || bf.f32.rows != rows ||
               bf.f32.cols != cols ||
               std::memcmp(bf.f32.data.data(), mf.data.data(),
                           mf.data.size() * sizeof(float)) != 0;
    Matrix<std::uint32_t> mu(rows, cols);
    for (auto& v : mu.data) v = static_cast<std::uint32_t>(g.rng()());
    const MatrixBlob bu = DecodeMatrix(EncodeMatrix(mu));
    mtx_bad += bu.dtype != MatrixDtype::kUint32 || !(bu.u32 == mu);
  }

  Gen g(99);
  PointCloud seed_cloud = g.Cloud(20, 2.0, 4);
  Matrix<float> seed_mtx(6, 3, 0.5f);
  const fuzz::Outcome ply = fuzz::FuzzPly(FormatPly(seed_cloud), 12000, 91);
  const fuzz::Outcome mtx = fuzz::FuzzMatrix(EncodeMatrix(seed_mtx), 12000, 92);
  const bool pass = ply_bad == 0 && mtx_bad == 0 && ply.other_failures == 0 &&
                    mtx.other_failures == 0 && ply.cases >= 10000 &&
                    mtx.cases >= 10000;
  return {pass,
          Fmt("%zu fixtures: %zu PLY and %zu matrix round-trip failures; fuzz "
              "PLY %zu cases (%zu errors, %zu parsed, %zu unstructured%s%s), "
              "matrix %zu cases (%zu errors, %zu parsed, %zu unstructured)",
              fixtures, ply_bad, mtx_bad, ply.cases, ply.structured_errors,
              ply.parsed, ply.other_failures, ply.other_failures ? ": " : "",
              ply.first_failure.c_str(), mtx.cases, mtx.structured_errors,
              mtx.parsed, mtx.other_failures)};
}

}  // namespace
}  // namespace hpal

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (a == "--cli" && i + 1 < argc) {
      hpal::g_cli = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--only N] [--cli PATH]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::function<hpal::Verdict()>> criteria = {
      hpal::Criterion1, hpal::Criterion2, hpal::Criterion3,
      hpal::Criterion4, hpal::Criterion5, hpal::Criterion6,
      hpal::Criterion7, hpal::Criterion8, hpal::Criterion9};
  bool all = true;
  for (int c = 1; c <= 9; ++c) {
    if (only != 0 && c != only) continue;
    hpal::Verdict v;
    try {
      v = criteria[c - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %d: %s  %s\n", c, v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
    all &= v.pass;
  }
  return all ? 0 : 1;
}
