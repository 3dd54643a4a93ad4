#include "hpal/uncertainty.h"

#include <cmath>
#include <random>
#include <sstream>

namespace hpal {

std::vector<LevelSpec> DefaultLevels() {
  return {{0.10, 0.1}, {0.50, 0.01}, {1.00, 0.001}};
}

void ValidateLevel(const LevelSpec& spec) {
  if (!(spec.radius_m > 0.0) || !std::isfinite(spec.radius_m)) {
    throw Error("level radius_m must be positive, got " +
                std::to_string(spec.radius_m));
  }
  if (!(spec.weight >= 0.0) || !std::isfinite(spec.weight)) {
    throw Error("level weight must be non-negative, got " +
                std::to_string(spec.weight));
  }
}

namespace {
constexpr std::pair<Strategy, std::string_view> kStrategyNames[] = {
    {Strategy::kRandom, "random"}, {Strategy::kEntropy, "entropy"},
    {Strategy::kLeastConfidence, "lc"}, {Strategy::kMmu, "mmu"},
    {Strategy::kHmmu, "hmmu"},     {Strategy::kHmmuFds, "hmmu_fds"},
};
}  // namespace

std::string_view StrategyName(Strategy s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == s) return name;
  }
  return "unknown";
}

std::vector<std::string_view> StrategyNames() {
  std::vector<std::string_view> out;
  for (const auto& entry : kStrategyNames) out.push_back(entry.second);
  return out;
}

Strategy ParseStrategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  std::ostringstream os;
  os << "unknown strategy '" << name << "' (valid:";
  for (const auto& entry : kStrategyNames) os << ' ' << entry.second;
  os << ')';
  throw Error(os.str());
}

bool RanksAscending(Strategy s) {
  return s == Strategy::kMmu || s == Strategy::kHmmu ||
         s == Strategy::kHmmuFds;
}

double point_margin(std::span<const double> row) {
  if (row.empty()) throw Error("margin of an empty probability row");
  if (row.size() == 1) return 1.0;
  double p1 = -std::numeric_limits<double>::infinity();
  double p2 = p1;
  for (double p : row) {
    if (p > p1) {
      p2 = p1;
      p1 = p;
    } else if (p > p2) {
      p2 = p;
    }
  }
  return p1 - p2;
}

double level_margin(std::span<const double> context) {
  return point_margin(context);
}

std::vector<double> contextual_distribution(const PointCloud& cloud,
                                            const ProbabilityField& probs,
                                            const VoxelGrid& grid,
                                            Index center, double radius) {
  if (center >= cloud.size()) {
    throw Error("center index " + std::to_string(center) + " out of range");
  }
  if (probs.size() != cloud.size()) {
    throw Error("probability rows do not match the cloud");
  }
  std::vector<double> mean(probs.n_classes(), 0.0);
  std::size_t k = 0;
  for (Index j : radius_neighbors(grid, cloud, cloud.positions[center], radius)) {
    const auto row = probs.row(j);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
    ++k;
  }
  for (double& m : mean) m /= static_cast<double>(k);
  return mean;
}

double fuse_scores(double u_point, std::span<const double> u_levels,
                   std::span<const LevelSpec> specs) {
  if (u_levels.size() != specs.size()) {
    throw Error("fuse_scores: " + std::to_string(u_levels.size()) +
                " level scores for " + std::to_string(specs.size()) +
                " levels");
  }
  double v = u_point;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    v += specs[i].weight * u_levels[i];
  }
  return v;
}

UncertaintyScores score_hmmu(const PointCloud& cloud,
                             const ProbabilityField& probs,
                             std::span<const LevelSpec> specs,
                             const ScoreOptions& options) {
  if (probs.size() != cloud.size()) {
    throw Error("probability rows (" + std::to_string(probs.size()) +
                ") do not match the cloud (" + std::to_string(cloud.size()) +
                ")");
  }
  for (const auto& s : specs) ValidateLevel(s);
  const std::size_t n = cloud.size();
  UncertaintyScores out;
  out.u_point.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.u_point[i] = point_margin(probs.row(i));

  std::vector<NeighborhoodSums> exact;
  if (n > 0 && options.mode == ContextMode::kExact) {
    std::vector<double> radii;
    for (const auto& spec : specs) radii.push_back(spec.radius_m);
    exact = radius_sums_multi(cloud, probs.probs, radii, options.threads);
  }
  for (std::size_t l = 0; l < specs.size(); ++l) {
    std::vector<double> level(n);
    if (!exact.empty()) {
      const NeighborhoodSums& sums = exact[l];
      std::vector<double> mean(probs.n_classes());
      for (std::size_t i = 0; i < n; ++i) {
        const auto row = sums.sums.row(i);
        const double k = sums.counts[i];
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = row[c] / k;
        level[i] = level_margin(mean);
      }
    } else if (n > 0) {
      const auto means = voxel_means(cloud, probs.probs, specs[l].radius_m);
      for (std::size_t i = 0; i < n; ++i) level[i] = level_margin(means.row(i));
    }
    out.u_level.push_back(std::move(level));
  }

  out.fused.resize(n);
  std::vector<double> levels(specs.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < specs.size(); ++l) levels[l] = out.u_level[l][i];
    out.fused[i] = fuse_scores(out.u_point[i], levels, specs);
  }
  return out;
}

std::vector<double> score_entropy(const ProbabilityField& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double h = 0.0;
    for (double p : probs.row(i)) {
      if (p > 0.0) h -= p * std::log(p);
    }
    out[i] = h;
  }
  return out;
}

std::vector<double> score_least_confidence(const ProbabilityField& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto row = probs.row(i);
    double p1 = row.empty() ? 0.0 : row[0];
    for (double p : row) p1 = std::max(p1, p);
    out[i] = 1.0 - p1;
  }
  return out;
}

std::vector<double> score_random(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("score_random needs at least one point");
  std::mt19937_64 rng(seed);
  std::vector<double> out(n);
  // 53 random mantissa bits; never returns 1.0.
  for (double& v : out) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return out;
}

std::vector<double> score_points(Strategy strategy, const PointCloud& cloud,
                                 const ProbabilityField& probs,
                                 std::span<const LevelSpec> specs,
                                 std::uint64_t seed,
                                 const ScoreOptions& options) {
  switch (strategy) {
    case Strategy::kRandom:
      return score_random(cloud.size(), seed);
    case Strategy::kEntropy:
      return score_entropy(probs);
    case Strategy::kLeastConfidence:
      return score_least_confidence(probs);
    case Strategy::kMmu:
      return score_hmmu(cloud, probs, {}, options).fused;
    case Strategy::kHmmu:
    case Strategy::kHmmuFds:
      return score_hmmu(cloud, probs, specs, options).fused;
  }
  throw Error("unhandled strategy");
}

}  // namespace hpal
