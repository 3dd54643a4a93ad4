#ifndef HPAL_SELECTION_H_
#define HPAL_SELECTION_H_

#include <cstddef>
#include <span>
#include <vector>

#include "hpal/core_model.h"
#include "hpal/spatial_index.h"
#include "hpal/uncertainty.h"

namespace hpal {

struct SelectionConfig {
  std::size_t budget_k = 0;
  double radius_m = 0.20;  // suppression radius
  double tau = 0.8;        // feature-similarity threshold
  Strategy strategy = Strategy::kHmmuFds;

  bool operator==(const SelectionConfig&) const = default;
};

// Throws Error naming the offending field.
void ValidateSelectionConfig(const SelectionConfig& cfg);

enum class RankDirection { kAscending, kDescending };

inline RankDirection DirectionFor(Strategy s) {
  return RanksAscending(s) ? RankDirection::kAscending
                           : RankDirection::kDescending;
}

// A candidate rejected because an already-selected point within the radius
// had a feature similarity above the threshold. `neighbor` is the most
// similar such point (lowest index on ties).
struct Suppression {
  Index index = 0;
  Index neighbor = 0;
  double distance = 0.0;
  double similarity = 0.0;

  bool operator==(const Suppression&) const = default;
};

struct SelectionResult {
  std::vector<Index> selected;  // in selection order
  std::vector<Suppression> suppressed;
  bool exhausted = false;  // ranked list ran out before the budget was met

  bool operator==(const SelectionResult&) const = default;
};

// Unlabeled indices ordered by score; ties broken by ascending index. NaN
// scores sort last in either direction.
std::vector<Index> rank_candidates(std::span<const double> scores,
                                   std::span<const Index> unlabeled,
                                   RankDirection direction);

// Cosine of the angle between two feature vectors, clamped to [-1, 1];
// 0 when either vector is zero. Throws Error on a dimension mismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Greedy walk over `ranked`: a candidate is kept unless some already-kept
// point closer than cfg.radius_m has similarity > cfg.tau. Stops after
// cfg.budget_k picks. `grid` must be built on `cloud`.
SelectionResult fds_select(std::span<const Index> ranked,
                           const PointCloud& cloud, const FeatureField& feats,
                           const SelectionConfig& cfg, const VoxelGrid& grid);

// First `budget_k` entries of `ranked`.
SelectionResult top_k_select(std::span<const Index> ranked,
                             std::size_t budget_k);

}  // namespace hpal

#endif  // HPAL_SELECTION_H_
