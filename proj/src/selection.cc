#include "hpal/selection.h"

#include <algorithm>
#include <cmath>

namespace hpal {

void ValidateSelectionConfig(const SelectionConfig& cfg) {
  if (!(cfg.radius_m > 0.0) || !std::isfinite(cfg.radius_m)) {
    throw Error("fds radius_m must be positive, got " +
                std::to_string(cfg.radius_m));
  }
  if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) {
    throw Error("tau out of range [0,1]: " + std::to_string(cfg.tau));
  }
}

std::vector<Index> rank_candidates(std::span<const double> scores,
                                   std::span<const Index> unlabeled,
                                   RankDirection direction) {
  for (Index i : unlabeled) {
    if (i >= scores.size()) {
      throw Error("candidate index " + std::to_string(i) +
                  " has no score (" + std::to_string(scores.size()) +
                  " scores)");
    }
  }
  std::vector<Index> out(unlabeled.begin(), unlabeled.end());
  const bool asc = direction == RankDirection::kAscending;
  std::sort(out.begin(), out.end(), [&](Index a, Index b) {
    const double sa = scores[a];
    const double sb = scores[b];
    const bool na = std::isnan(sa);
    const bool nb = std::isnan(sb);
    if (na || nb) {
      if (na != nb) return nb;  // non-NaN first
      return a < b;
    }
    if (sa != sb) return asc ? sa < sb : sa > sb;
    return a < b;
  });
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error("cosine_similarity: dimensions " + std::to_string(a.size()) +
                " and " + std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

SelectionResult fds_select(std::span<const Index> ranked,
                           const PointCloud& cloud, const FeatureField& feats,
                           const SelectionConfig& cfg, const VoxelGrid& grid) {
  ValidateSelectionConfig(cfg);
  if (feats.size() != cloud.size()) {
    throw Error("feature rows (" + std::to_string(feats.size()) +
                ") do not match the cloud (" + std::to_string(cloud.size()) +
                ")");
  }
  if (grid.n_points() != cloud.size()) {
    throw Error("voxel grid was built on a different cloud");
  }
  SelectionResult out;
  if (cfg.budget_k == 0) return out;

  std::vector<std::uint8_t> picked(cloud.size(), 0);
  for (Index i : ranked) {
    if (out.selected.size() == cfg.budget_k) return out;
    if (i >= cloud.size()) {
      throw Error("ranked index " + std::to_string(i) + " out of range");
    }
    if (picked[i]) continue;

    bool blocked = false;
    Suppression best{i, 0, 0.0, -2.0};
    const auto fi = feats.row(i);
    ForEachNeighbor(grid, cloud, cloud.positions[i], cfg.radius_m,
                    [&](Index j) {
                      if (!picked[j]) return;
                      const double sim = cosine_similarity(fi, feats.row(j));
                      if (sim > best.similarity ||
                          (sim == best.similarity && j < best.neighbor)) {
                        best.neighbor = j;
                        best.similarity = sim;
                      }
                    });
    if (best.similarity > cfg.tau) {
      blocked = true;
      best.distance = std::sqrt(
          SquaredDistance(cloud.positions[i], cloud.positions[best.neighbor]));
    }
    if (blocked) {
      out.suppressed.push_back(best);
    } else {
      picked[i] = 1;
      out.selected.push_back(i);
    }
  }
  out.exhausted = out.selected.size() < cfg.budget_k;
  return out;
}

SelectionResult top_k_select(std::span<const Index> ranked,
                             std::size_t budget_k) {
  SelectionResult out;
  const std::size_t k = std::min(budget_k, ranked.size());
  out.selected.assign(ranked.begin(), ranked.begin() + k);
  out.exhausted = k < budget_k;
  return out;
}

}  // namespace hpal
