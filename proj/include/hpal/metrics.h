#ifndef HPAL_METRICS_H_
#define HPAL_METRICS_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpal/core_model.h"

namespace hpal {

// counts(g, p): points with ground truth g predicted as p.
struct ConfusionMatrix {
  Matrix<std::uint64_t> counts;

  std::size_t n_classes() const { return counts.rows; }
  std::uint64_t total() const;
};

// Throws Error on a length mismatch or an id >= n_classes.
ConfusionMatrix confusion(std::span<const ClassId> pred,
                          std::span<const ClassId> gt, std::size_t n_classes);

struct IouResult {
  double miou = 0.0;
  // IoU per class; nullopt for classes absent from both prediction and
  // ground truth, which are left out of the mean.
  std::vector<std::optional<double>> per_class;
};

// Throws Error when the matrix holds no points.
IouResult miou(const ConfusionMatrix& cm);

// One active-learning iteration as seen by an evaluator.
struct IterationReport {
  std::size_t iteration = 0;  // 1-based
  std::size_t labeled_count = 0;
  double labeled_fraction = 0.0;
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  std::vector<Index> selected;
  double wall_seconds = 0.0;

  bool operator==(const IterationReport&) const = default;
};

struct StrategyRow {
  std::string strategy;
  std::vector<double> miou_per_iteration;
  double final_miou = 0.0;
  std::optional<double> delta_vs_random;  // absent for random itself
};

struct ComparisonTable {
  // Sorted by final mIoU, descending; ties by strategy name.
  std::vector<StrategyRow> rows;
};

// Throws Error when the report lists differ in length.
ComparisonTable compare_strategies(
    const std::map<std::string, std::vector<IterationReport>>& reports);

// Per-iteration mean of several runs of the same strategy (mIoU, per-class
// IoU over the runs where the class was scored, labeled counts). Selections
// are dropped. Throws Error when the runs differ in length.
std::vector<IterationReport> MeanReports(
    std::span<const std::vector<IterationReport>> runs);

}  // namespace hpal

#endif  // HPAL_METRICS_H_
