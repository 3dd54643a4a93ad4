#include "hpal/metrics.h"

#include <algorithm>
#include <numeric>

namespace hpal {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.data.begin(), counts.data.end(),
                         std::uint64_t{0});
}

ConfusionMatrix confusion(std::span<const ClassId> pred,
                          std::span<const ClassId> gt, std::size_t n_classes) {
  if (pred.size() != gt.size()) {
    throw Error("confusion: " + std::to_string(pred.size()) +
                " predictions for " + std::to_string(gt.size()) +
                " ground-truth labels");
  }
  ConfusionMatrix cm{Matrix<std::uint64_t>(n_classes, n_classes, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= n_classes || gt[i] >= n_classes) {
      throw Error("confusion: class id out of range at point " +
                  std::to_string(i) + " (pred " + std::to_string(pred[i]) +
                  ", gt " + std::to_string(gt[i]) + ", " +
                  std::to_string(n_classes) + " classes)");
    }
    ++cm.counts(gt[i], pred[i]);
  }
  return cm;
}

IouResult miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("mIoU of an empty confusion matrix");
  const std::size_t c = cm.n_classes();
  IouResult out;
  out.per_class.resize(c);
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < c; ++j) {
      row += cm.counts(k, j);
      col += cm.counts(j, k);
    }
    const std::uint64_t tp = cm.counts(k, k);
    const std::uint64_t denom = row + col - tp;  // TP + FN + FP
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[k] = iou;
    sum += iou;
    ++included;
  }
  out.miou = sum / static_cast<double>(included);
  return out;
}

ComparisonTable compare_strategies(
    const std::map<std::string, std::vector<IterationReport>>& reports) {
  ComparisonTable table;
  std::optional<std::size_t> len;
  for (const auto& [name, list] : reports) {
    if (len && *len != list.size()) {
      throw Error("compare_strategies: strategy '" + name + "' has " +
                  std::to_string(list.size()) + " iterations, expected " +
                  std::to_string(*len));
    }
    len = list.size();
    StrategyRow row;
    row.strategy = name;
    for (const auto& r : list) row.miou_per_iteration.push_back(r.miou);
    row.final_miou = list.empty() ? 0.0 : list.back().miou;
    table.rows.push_back(std::move(row));
  }
  auto random = reports.find("random");
  if (random != reports.end() && !random->second.empty()) {
    const double base = random->second.back().miou;
    for (auto& row : table.rows) {
      if (row.strategy != "random") row.delta_vs_random = row.final_miou - base;
    }
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const StrategyRow& a, const StrategyRow& b) {
                     if (a.final_miou != b.final_miou) {
                       return a.final_miou > b.final_miou;
                     }
                     return a.strategy < b.strategy;
                   });
  return table;
}

std::vector<IterationReport> MeanReports(
    std::span<const std::vector<IterationReport>> runs) {
  if (runs.empty()) return {};
  const std::size_t len = runs.front().size();
  for (const auto& run : runs) {
    if (run.size() != len) throw Error("MeanReports: runs differ in length");
  }
  std::vector<IterationReport> out(len);
  const double n = static_cast<double>(runs.size());
  for (std::size_t it = 0; it < len; ++it) {
    IterationReport& m = out[it];
    m.iteration = runs.front()[it].iteration;
    std::size_t n_classes = 0;
    for (const auto& run : runs) {
      n_classes = std::max(n_classes, run[it].per_class_iou.size());
    }
    std::vector<double> class_sum(n_classes, 0.0);
    std::vector<std::size_t> class_n(n_classes, 0);
    double labeled = 0.0;
    for (const auto& run : runs) {
      const auto& r = run[it];
      m.miou += r.miou / n;
      m.labeled_fraction += r.labeled_fraction / n;
      m.wall_seconds += r.wall_seconds / n;
      labeled += static_cast<double>(r.labeled_count);
      for (std::size_t k = 0; k < r.per_class_iou.size(); ++k) {
        if (r.per_class_iou[k]) {
          class_sum[k] += *r.per_class_iou[k];
          ++class_n[k];
        }
      }
    }
    m.labeled_count = static_cast<std::size_t>(labeled / n + 0.5);
    m.per_class_iou.resize(n_classes);
    for (std::size_t k = 0; k < n_classes; ++k) {
      if (class_n[k]) m.per_class_iou[k] = class_sum[k] / class_n[k];
    }
  }
  return out;
}

}  // namespace hpal
