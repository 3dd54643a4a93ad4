#ifndef HPAL_UNCERTAINTY_H_
#define HPAL_UNCERTAINTY_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpal/core_model.h"
#include "hpal/spatial_index.h"

namespace hpal {

// One level of the contextual hierarchy: predictions are averaged over a
// ball of `radius_m` around each point and the resulting margin enters the
// fused score with `weight`.
struct LevelSpec {
  double radius_m = 0.0;
  double weight = 0.0;

  bool operator==(const LevelSpec&) const = default;
};

// 10 cm / 50 cm / 100 cm with weights 0.1 / 0.01 / 0.001.
std::vector<LevelSpec> DefaultLevels();

// Throws Error unless radius > 0 and weight >= 0 (both finite).
void ValidateLevel(const LevelSpec& spec);

enum class Strategy { kRandom, kEntropy, kLeastConfidence, kMmu, kHmmu, kHmmuFds };

std::string_view StrategyName(Strategy s);
// Throws Error listing the valid names.
Strategy ParseStrategy(std::string_view name);
std::vector<std::string_view> StrategyNames();

// Margin strategies rank smallest first; the others rank largest first.
bool RanksAscending(Strategy s);

// How contextual distributions are formed.
//   kExact: mean over every point within the level radius of the point.
//   kVoxel: mean over the members of the point's voxel (edge = radius).
enum class ContextMode { kExact, kVoxel };

struct UncertaintyScores {
  std::vector<double> u_point;               // per point
  std::vector<std::vector<double>> u_level;  // per level, per point
  std::vector<double> fused;                 // per point
};

// Highest minus second-highest entry; 1 for a single-class row. Throws Error
// on an empty row.
double point_margin(std::span<const double> row);

// Mean prediction over the points within `radius` of point `center` (which is
// always included).
std::vector<double> contextual_distribution(const PointCloud& cloud,
                                            const ProbabilityField& probs,
                                            const VoxelGrid& grid,
                                            Index center, double radius);

// Margin of a contextual distribution (same arithmetic as point_margin).
double level_margin(std::span<const double> context);

// u_point + sum_i weight_i * u_levels[i]. Throws Error on a length mismatch.
double fuse_scores(double u_point, std::span<const double> u_levels,
                   std::span<const LevelSpec> specs);

struct ScoreOptions {
  ContextMode mode = ContextMode::kExact;
  unsigned threads = 1;  // 0 = hardware concurrency
};

// Point margins, per-level contextual margins and the fused score for every
// point. An empty level list reduces to plain minimum margin.
UncertaintyScores score_hmmu(const PointCloud& cloud,
                             const ProbabilityField& probs,
                             std::span<const LevelSpec> specs,
                             const ScoreOptions& options = {});

// -sum p ln p per row (0 ln 0 = 0).
std::vector<double> score_entropy(const ProbabilityField& probs);
// 1 - max p per row.
std::vector<double> score_least_confidence(const ProbabilityField& probs);
// Seeded uniform draws in [0, 1). Throws Error when n == 0.
std::vector<double> score_random(std::size_t n, std::uint64_t seed);

// Per-point score for any strategy; the hmmu variants return the fused score,
// mmu returns the point margin.
std::vector<double> score_points(Strategy strategy, const PointCloud& cloud,
                                 const ProbabilityField& probs,
                                 std::span<const LevelSpec> specs,
                                 std::uint64_t seed,
                                 const ScoreOptions& options = {});

}  // namespace hpal

#endif  // HPAL_UNCERTAINTY_H_
