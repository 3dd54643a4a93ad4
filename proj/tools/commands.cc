#include "commands.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "hpal/data_io.h"
#include "hpal/metrics.h"
#include "hpal/selection.h"
#include "hpal/spatial_index.h"
#include "hpal/trainer.h"
#include "hpal/uncertainty.h"
#include "json.hpp"

namespace hpal::cli {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

class Timer {
 public:
  explicit Timer(bool enabled) : enabled_(enabled), start_(Clock::now()) {}
  void Mark(const char* what) {
    if (!enabled_) return;
    const auto now = Clock::now();
    std::fprintf(stderr, "timing: %s %.3f s\n", what,
                 std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  bool enabled_;
  Clock::time_point start_;
};

// Config file, then flag overrides, then full validation by the library.
RunConfig EffectiveConfig(const Common& c) {
  json merged = json::object();
  if (!c.config_path.empty()) {
    try {
      merged = json::parse(ReadFile(c.config_path));
    } catch (const json::exception& e) {
      throw Error("config: invalid JSON: " + std::string(e.what()));
    }
  }
  for (const auto& [key, text] : c.overrides) {
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      value = text;  // bare words are strings
    }
    std::string ptr = "/" + key;
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    merged[json::json_pointer(ptr)] = value;
  }
  RunConfig cfg = ParseConfig(merged.dump());
  std::cerr << "effective config: " << ConfigToJson(cfg, -1) << "\n";
  return cfg;
}

unsigned Threads(const Common& c) {
  if (c.threads != 0) return c.threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

json OptionalDouble(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json ReportJson(const IterationReport& r, bool with_selection) {
  json per_class = json::array();
  for (const auto& v : r.per_class_iou) per_class.push_back(OptionalDouble(v));
  json j = {{"iteration", r.iteration},
            {"labeled_count", r.labeled_count},
            {"labeled_fraction", r.labeled_fraction},
            {"miou", r.miou},
            {"per_class_iou", per_class}};
  if (with_selection) j["selected"] = r.selected;
  return j;
}

std::vector<Strategy> SplitStrategies(const std::string& list) {
  std::vector<Strategy> out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    const Strategy s = ParseStrategy(name);
    if (std::find(out.begin(), out.end(), s) != out.end()) {
      throw Error("strategy '" + name + "' listed twice");
    }
    out.push_back(s);
  }
  if (out.empty()) throw Error("no strategies given");
  return out;
}

std::vector<double> ScoreColumn(const MatrixBlob& blob) {
  if (blob.dtype != MatrixDtype::kFloat32 || blob.cols() != 1) {
    throw Error("scores must be an N x 1 float matrix");
  }
  return std::vector<double>(blob.f32.data.begin(), blob.f32.data.end());
}

}  // namespace

void RunGen(const GenArgs& a, const Common& c) {
  Timer timer(c.timings);
  if (a.room.size() != 3) throw Error("--room takes three extents");
  SceneSpec spec;
  spec.n_points = a.points;
  spec.n_classes = a.classes;
  spec.room = {a.room[0], a.room[1], a.room[2]};
  spec.surface_noise = a.surface_noise;
  spec.color_noise = a.color_noise;
  spec.outlier_fraction = a.outlier_fraction;
  spec.seed = a.seed;
  const PointCloud cloud = gen_synthetic(spec);
  timer.Mark("generate");
  save_ply(cloud, a.out);
  timer.Mark("write");
  std::vector<std::size_t> counts(a.classes, 0);
  for (ClassId l : cloud.labels()) ++counts[l];
  for (std::size_t k = 0; k < counts.size(); ++k) {
    std::printf("class %zu: %zu\n", k, counts[k]);
  }
}

void RunScore(const ScoreArgs& a, const Common& c) {
  Timer timer(c.timings);
  RunConfig cfg = EffectiveConfig(c);
  const Strategy strategy =
      a.strategy ? ParseStrategy(*a.strategy) : cfg.selection.strategy;
  const PointCloud cloud = load_ply(a.cloud);
  const ProbabilityField probs = ProbabilitiesFromBlob(load_matrix(a.probs));
  if (probs.size() != cloud.size()) {
    throw Error("probs rows (" + std::to_string(probs.size()) +
                ") do not match cloud points (" +
                std::to_string(cloud.size()) + ")");
  }
  timer.Mark("load");
  ScoreOptions opts;
  opts.mode = cfg.context_mode;
  opts.threads = Threads(c);
  const std::vector<double> scores =
      score_points(strategy, cloud, probs, cfg.levels, a.seed, opts);
  timer.Mark("score");
  Matrix<double> m(scores.size(), 1);
  std::copy(scores.begin(), scores.end(), m.data.begin());
  save_matrix(ToFloat32(m), a.out);
}

void RunSelect(const SelectArgs& a, const Common& c) {
  Timer timer(c.timings);
  if (a.k < 0) throw Error("--k must be non-negative");
  RunConfig cfg = EffectiveConfig(c);
  cfg.selection.budget_k = static_cast<std::size_t>(a.k);
  ValidateSelectionConfig(cfg.selection);

  const PointCloud cloud = load_ply(a.cloud);
  const std::vector<double> scores = ScoreColumn(load_matrix(a.scores));
  const std::size_t n = cloud.size();
  if (scores.size() != n) throw Error("scores rows do not match cloud points");
  std::vector<Index> labeled;
  if (!a.labeled.empty()) labeled = ParseSelectionList(ReadFile(a.labeled));
  const SelectionState state(n, labeled);
  const bool fds = cfg.selection.strategy == Strategy::kHmmuFds;
  FeatureField feats;
  if (fds) {
    if (a.features.empty()) throw Error("--features is required for hmmu_fds");
    feats = FeaturesFromBlob(load_matrix(a.features));
    if (feats.size() != n) {
      throw Error("features rows do not match cloud points");
    }
  }
  timer.Mark("load");

  const std::vector<Index> ranked = rank_candidates(
      scores, state.unlabeled(), DirectionFor(cfg.selection.strategy));
  const SelectionResult result =
      fds ? fds_select(ranked, cloud, feats, cfg.selection,
                       build_grid(cloud, cfg.selection.radius_m))
          : top_k_select(ranked, cfg.selection.budget_k);
  timer.Mark("select");

  WriteFile(a.out, FormatSelectionList(result.selected));
  if (!a.report.empty()) {
    json selected = json::array();
    for (Index i : result.selected) {
      selected.push_back({{"index", i}, {"score", scores[i]}});
    }
    json suppressed = json::array();
    for (const Suppression& s : result.suppressed) {
      suppressed.push_back({{"index", s.index},
                            {"neighbor", s.neighbor},
                            {"distance", s.distance},
                            {"similarity", s.similarity}});
    }
    const json report = {
        {"strategy", StrategyName(cfg.selection.strategy)},
        {"k", cfg.selection.budget_k},
        {"radius_m", cfg.selection.radius_m},
        {"tau", cfg.selection.tau},
        {"selected", selected},
        {"suppressed", suppressed},
        {"exhausted", result.exhausted}};
    WriteFile(a.report, report.dump(2) + "\n");
  }
}

void RunSimulate(const SimulateArgs& a, const Common& c) {
  Timer timer(c.timings);
  const RunConfig cfg = EffectiveConfig(c);
  const std::vector<Strategy> strategies = SplitStrategies(a.strategies);
  std::vector<std::uint64_t> seeds;
  if (a.seeds) {
    if (*a.seeds == 0) throw Error("--seeds must be positive");
    for (std::uint64_t s = 1; s <= *a.seeds; ++s) seeds.push_back(s);
  } else {
    seeds.push_back(cfg.trainer.seed);
  }
  const PointCloud cloud = load_ply(a.cloud);
  if (!cloud.has_labels()) throw Error("simulate needs ground-truth labels");
  timer.Mark("load");

  struct Cell {
    Strategy strategy;
    std::uint64_t seed;
    std::vector<IterationReport> reports;
  };
  std::vector<Cell> cells;
  for (Strategy s : strategies) {
    for (std::uint64_t seed : seeds) cells.push_back({s, seed, {}});
  }

  // Cells are independent and individually seeded, so scheduling order does
  // not affect any output.
  const unsigned workers =
      std::min<unsigned>(Threads(c), static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        Cell& cell = cells[i];
        TrainerConfig tc = cfg.trainer;
        tc.seed = cell.seed;
        SelectionConfig sc = cfg.selection;
        sc.strategy = cell.strategy;
        LoopOptions lo;
        lo.scoring.mode = cfg.context_mode;
        lo.scoring.threads = workers > 1 ? 1 : Threads(c);
        cell.reports = active_loop(cloud, tc, sc, cfg.levels, lo);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  timer.Mark("simulate");

  json runs = json::array();
  std::map<std::string, std::vector<IterationReport>> means;
  for (Strategy s : strategies) {
    std::vector<std::vector<IterationReport>> per_seed;
    for (const Cell& cell : cells) {
      if (cell.strategy != s) continue;
      json reports = json::array();
      for (const auto& r : cell.reports) reports.push_back(ReportJson(r, true));
      runs.push_back({{"strategy", StrategyName(s)},
                      {"seed", cell.seed},
                      {"reports", reports}});
      per_seed.push_back(cell.reports);
      if (!a.selections_dir.empty()) {
        std::filesystem::create_directories(a.selections_dir);
        for (const auto& r : cell.reports) {
          const std::string name = std::string(StrategyName(s)) + "_seed" +
                                   std::to_string(cell.seed) + "_iter" +
                                   std::to_string(r.iteration) + ".txt";
          WriteFile((std::filesystem::path(a.selections_dir) / name).string(),
                    FormatSelectionList(r.selected));
        }
      }
    }
    means[std::string(StrategyName(s))] = MeanReports(per_seed);
  }
  json mean = json::object();
  for (const auto& [name, reports] : means) {
    json list = json::array();
    for (const auto& r : reports) list.push_back(ReportJson(r, false));
    mean[name] = list;
  }
  json comparison = json::array();
  for (const StrategyRow& row : compare_strategies(means).rows) {
    comparison.push_back({{"strategy", row.strategy},
                          {"miou_per_iteration", row.miou_per_iteration},
                          {"final_miou", row.final_miou},
                          {"delta_vs_random", OptionalDouble(row.delta_vs_random)}});
  }
  const json results = {{"config", json::parse(ConfigToJson(cfg))},
                        {"n_points", cloud.size()},
                        {"seeds", seeds},
                        {"runs", runs},
                        {"mean", mean},
                        {"comparison", comparison}};
  WriteFile(a.out, results.dump(2) + "\n");

  for (const json& row : comparison) {
    std::printf("%-18s final mIoU %.4f", row["strategy"].get<std::string>().c_str(),
                row["final_miou"].get<double>());
    if (!row["delta_vs_random"].is_null()) {
      std::printf("  vs random %+.4f", row["delta_vs_random"].get<double>());
    }
    std::printf("\n");
  }
}

void RunEval(const EvalArgs& a, const Common& c) {
  Timer timer(c.timings);
  const PointCloud cloud = load_ply(a.cloud);
  const std::vector<ClassId>& gt = cloud.labels();
  const MatrixBlob blob = load_matrix(a.pred);
  if (blob.rows() != gt.size()) {
    throw Error("pred rows (" + std::to_string(blob.rows()) +
                ") do not match cloud points (" + std::to_string(gt.size()) +
                ")");
  }
  std::vector<ClassId> pred(gt.size());
  std::size_t n_classes = 0;
  if (blob.dtype == MatrixDtype::kUint32) {
    if (blob.cols() != 1) throw Error("integer predictions must be N x 1");
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = static_cast<ClassId>(blob.u32.data[i]);
    }
  } else {
    const ProbabilityField probs = ProbabilitiesFromBlob(blob);
    n_classes = probs.n_classes();
    pred = probs.argmax();
  }
  for (ClassId v : pred) n_classes = std::max<std::size_t>(n_classes, v + 1);
  for (ClassId v : gt) n_classes = std::max<std::size_t>(n_classes, v + 1);
  const IouResult r = miou(confusion(pred, gt, n_classes));
  timer.Mark("eval");
  json per_class = json::array();
  for (const auto& v : r.per_class) per_class.push_back(OptionalDouble(v));
  const json out = {{"miou", r.miou}, {"per_class_iou", per_class}};
  WriteFile(a.out, out.dump(2) + "\n");
  std::printf("mIoU %.6f\n", r.miou);
}

}  // namespace hpal::cli
