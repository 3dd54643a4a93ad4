#ifndef HPAL_SPATIAL_INDEX_H_
#define HPAL_SPATIAL_INDEX_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hpal/core_model.h"

namespace hpal {

// Squared Euclidean distance. Every neighborhood test in the library is
// `SquaredDistance(a, b) < r * r`, evaluated in exactly this order, so that
// the accelerated paths agree bit-for-bit with a linear scan.
inline double SquaredDistance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::uint64_t h = static_cast<std::uint32_t>(k.x);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.y);
    h = h * 0x9E3779B97F4A7C15ull ^ static_cast<std::uint32_t>(k.z);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};

// Componentwise floor(position / edge). Throws Error if the key does not fit
// in 32 bits.
VoxelKey ComputeVoxelKey(const Vec3& p, double edge);

// Points bucketed into a cubic grid. Buckets are stored in ascending key
// order; members of a bucket are in ascending point index order.
class VoxelGrid {
 public:
  double edge() const { return edge_; }
  std::size_t n_points() const { return point_to_voxel_.size(); }
  std::size_t bucket_count() const { return keys_.size(); }

  const VoxelKey& bucket_key(std::size_t b) const { return keys_[b]; }
  std::span<const Index> bucket(std::size_t b) const {
    return {members_.data() + offsets_[b], offsets_[b + 1] - offsets_[b]};
  }
  std::optional<std::size_t> find(const VoxelKey& key) const;

  // Key of the voxel each point falls in.
  const std::vector<VoxelKey>& point_to_voxel() const {
    return point_to_voxel_;
  }

 private:
  friend VoxelGrid build_grid(const PointCloud& cloud, double edge);

  double edge_ = 0.0;
  std::vector<VoxelKey> keys_;
  std::vector<std::size_t> offsets_;
  std::vector<Index> members_;
  std::vector<VoxelKey> point_to_voxel_;
  std::unordered_map<VoxelKey, std::uint32_t, VoxelKeyHash> lookup_;
};

// Throws Error on a non-positive edge or an empty cloud.
VoxelGrid build_grid(const PointCloud& cloud, double edge);

// Calls visit(i) for every point i with distance(position_i, center) < r, in
// unspecified order. The grid may have any edge; small edges relative to r
// only cost time.
void ForEachNeighbor(const VoxelGrid& grid, const PointCloud& cloud,
                     const Vec3& center, double r,
                     const std::function<void(Index)>& visit);

// Indices within distance r of center (strict), ascending. A point at the
// center is included. Throws Error when r <= 0.
std::vector<Index> radius_neighbors(const VoxelGrid& grid,
                                    const PointCloud& cloud,
                                    const Vec3& center, double r);

// Number of entries in a local geometric descriptor.
inline constexpr std::size_t kGeometricFeatureDim = 8;

// Per point: normalized height, rgb, linearity, planarity, scattering and
// relative local density over the radius neighborhood.
FeatureField local_geometric_features(const PointCloud& cloud, double radius);

// Sum of `values` rows and neighbor count over every point's radius
// neighborhood (self included, strict distance < r).
struct NeighborhoodSums {
  Matrix<double> sums;
  std::vector<std::uint32_t> counts;
};

// Exact for every point at once. Points are arranged in a balanced kd-tree
// with per-node sums and tight boxes; small groups of neighboring points
// walk the tree together, whole subtrees inside (or outside) the radius of
// the group are taken (or dropped) at once, and only the leaves straddling
// the radius are tested point by point. `threads` = 0 uses the hardware
// concurrency.
NeighborhoodSums radius_sums(const PointCloud& cloud,
                             const Matrix<double>& values, double r,
                             unsigned threads = 1);

// Same for several radii, sharing one tree.
std::vector<NeighborhoodSums> radius_sums_multi(const PointCloud& cloud,
                                               const Matrix<double>& values,
                                               std::span<const double> radii,
                                               unsigned threads = 1);

// Voxel-averaged variant: every point receives the mean of `values` over
// the members of its voxel of edge `edge`. Approximates radius_sums / counts
// at a fraction of the cost.
Matrix<double> voxel_means(const PointCloud& cloud,
                           const Matrix<double>& values, double edge);

}  // namespace hpal

#endif  // HPAL_SPATIAL_INDEX_H_
