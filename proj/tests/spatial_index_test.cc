#include "hpal/spatial_index.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "generators.h"

namespace hpal {
namespace {

using ::hpal::testing::Gen;

std::vector<Index> ScanNeighbors(const PointCloud& cloud, const Vec3& c,
                                 double r) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (SquaredDistance(cloud.positions[i], c) < r * r) {
      out.push_back(static_cast<Index>(i));
    }
  }
  return out;
}

PointCloud FromPositions(std::vector<Vec3> pos) {
  PointCloud c;
  c.positions = std::move(pos);
  c.colors.assign(c.positions.size(), {0.5, 0.5, 0.5});
  return c;
}

TEST(BuildGrid, KeysAreFloorOfPositionOverEdge) {
  const PointCloud a = FromPositions({{0, 0, 0}, {0.05, 0, 0}});
  const VoxelGrid ga = build_grid(a, 0.1);
  EXPECT_EQ(ga.bucket_count(), 1u);
  EXPECT_EQ(ga.point_to_voxel()[1], (VoxelKey{0, 0, 0}));

  const PointCloud b = FromPositions({{0, 0, 0}, {0.15, 0, 0}});
  const VoxelGrid gb = build_grid(b, 0.1);
  EXPECT_EQ(gb.point_to_voxel()[0], (VoxelKey{0, 0, 0}));
  EXPECT_EQ(gb.point_to_voxel()[1], (VoxelKey{1, 0, 0}));
}

TEST(BuildGrid, RejectsBadInput) {
  const PointCloud a = FromPositions({{0, 0, 0}});
  EXPECT_THROW(build_grid(a, 0.0), Error);
  EXPECT_THROW(build_grid(a, -1.0), Error);
  EXPECT_THROW(build_grid(PointCloud{}, 0.1), Error);
}

TEST(BuildGrid, EveryPointInExactlyOneBucket) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Gen g(seed);
    const PointCloud c = g.Cloud(g.Int(1, 300), g.Uniform(0.1, 5.0));
    const double edge = g.Uniform(0.02, 1.0);
    const VoxelGrid grid = build_grid(c, edge);
    std::vector<int> seen(c.size(), 0);
    for (std::size_t b = 0; b < grid.bucket_count(); ++b) {
      const auto members = grid.bucket(b);
      ASSERT_TRUE(std::is_sorted(members.begin(), members.end()));
      for (Index i : members) {
        ++seen[i];
        ASSERT_EQ(grid.point_to_voxel()[i], grid.bucket_key(b));
        ASSERT_EQ(ComputeVoxelKey(c.positions[i], edge), grid.bucket_key(b));
      }
    }
    for (int s : seen) ASSERT_EQ(s, 1);
  }
}

TEST(RadiusNeighbors, SmallExamples) {
  const PointCloud c = FromPositions({{0, 0, 0}, {0.05, 0, 0}, {1, 0, 0}});
  const VoxelGrid grid = build_grid(c, 0.1);
  EXPECT_EQ(radius_neighbors(grid, c, {0, 0, 0}, 0.1),
            (std::vector<Index>{0, 1}));
  EXPECT_EQ(radius_neighbors(grid, c, {0, 0, 0}, 2.0),
            (std::vector<Index>{0, 1, 2}));
  EXPECT_THROW(radius_neighbors(grid, c, {0, 0, 0}, 0.0), Error);
}

TEST(RadiusNeighbors, BoundaryIsExcluded) {
  const PointCloud c = FromPositions({{0, 0, 0}, {0.5, 0, 0}});
  const VoxelGrid grid = build_grid(c, 0.25);
  EXPECT_EQ(radius_neighbors(grid, c, {0, 0, 0}, 0.5),
            (std::vector<Index>{0}));
}

// 1000+ random queries against a linear scan, with grid edges both much
// smaller and much larger than the radius.
TEST(RadiusNeighbors, MatchesLinearScan) {
  std::size_t queries = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Gen g(seed);
    const PointCloud c = g.Cloud(500, g.Uniform(0.5, 3.0));
    const VoxelGrid grid = build_grid(c, g.Uniform(0.02, 1.5));
    for (int q = 0; q < 50; ++q) {
      Vec3 center;
      if (g.Coin()) {
        center = c.positions[g.Int(0, c.size() - 1)];
      } else {
        center = {g.Uniform(-0.5, 3.5), g.Uniform(-0.5, 3.5),
                  g.Uniform(-0.5, 3.5)};
      }
      const double r = g.Uniform(0.01, 1.0);
      ASSERT_EQ(radius_neighbors(grid, c, center, r),
                ScanNeighbors(c, center, r));
      ++queries;
    }
  }
  EXPECT_GE(queries, 1000u);
}

TEST(RadiusNeighbors, InvariantToPointOrder) {
  Gen g(11);
  const PointCloud c = g.Cloud(200);
  std::vector<Index> perm(c.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<Index>(i);
  std::shuffle(perm.begin(), perm.end(), g.rng());
  PointCloud shuffled;
  for (Index p : perm) {
    shuffled.positions.push_back(c.positions[p]);
    shuffled.colors.push_back(c.colors[p]);
  }
  const VoxelGrid ga = build_grid(c, 0.1);
  const VoxelGrid gb = build_grid(shuffled, 0.1);
  for (int q = 0; q < 50; ++q) {
    const Vec3 center{g.Uniform(0, 1), g.Uniform(0, 1), g.Uniform(0, 1)};
    std::vector<Index> mapped;
    for (Index i : radius_neighbors(gb, shuffled, center, 0.2)) {
      mapped.push_back(perm[i]);
    }
    std::sort(mapped.begin(), mapped.end());
    ASSERT_EQ(mapped, radius_neighbors(ga, c, center, 0.2));
  }
}

// Brute-force neighborhood sums for the kd-tree path.
NeighborhoodSums ScanSums(const PointCloud& c, const Matrix<double>& v,
                          double r) {
  NeighborhoodSums out{Matrix<double>(c.size(), v.cols, 0.0),
                       std::vector<std::uint32_t>(c.size(), 0)};
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (Index j : ScanNeighbors(c, c.positions[i], r)) {
      for (std::size_t k = 0; k < v.cols; ++k) out.sums(i, k) += v(j, k);
      ++out.counts[i];
    }
  }
  return out;
}

void ExpectSumsMatch(const NeighborhoodSums& got, const NeighborhoodSums& want) {
  ASSERT_EQ(got.counts, want.counts);
  ASSERT_EQ(got.sums.rows, want.sums.rows);
  ASSERT_EQ(got.sums.cols, want.sums.cols);
  for (std::size_t k = 0; k < got.sums.data.size(); ++k) {
    ASSERT_NEAR(got.sums.data[k], want.sums.data[k], 1e-11) << "entry " << k;
  }
}

TEST(RadiusSums, MatchesLinearScan) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Gen g(seed);
    const PointCloud c = g.Cloud(g.Int(1, 700), g.Uniform(0.2, 2.0));
    const std::size_t cols = g.Int(1, 19);
    Matrix<double> v(c.size(), cols);
    for (double& x : v.data) x = g.Uniform(0.0, 1.0);
    const double r = g.Uniform(0.01, 1.5);
    ExpectSumsMatch(radius_sums(c, v, r), ScanSums(c, v, r));
  }
}

TEST(RadiusSums, MultiRadiusAndThreadsAgree) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Gen g(100 + seed);
    const PointCloud c = g.Cloud(g.Int(200, 2000), 1.5);
    Matrix<double> v(c.size(), 8);
    for (double& x : v.data) x = g.Uniform(0.0, 1.0);
    const std::vector<double> radii = {0.05, 0.2, 0.6};
    const auto one = radius_sums_multi(c, v, radii, 1);
    const auto four = radius_sums_multi(c, v, radii, 4);
    ASSERT_EQ(one.size(), radii.size());
    for (std::size_t l = 0; l < radii.size(); ++l) {
      // Each point's sum is formed by the same walk whatever the thread
      // count, so the results are bit-identical.
      ASSERT_EQ(one[l].counts, four[l].counts);
      ASSERT_EQ(one[l].sums, four[l].sums);
      ExpectSumsMatch(one[l], ScanSums(c, v, radii[l]));
    }
  }
}

TEST(RadiusSums, DuplicatePointsAndEmptyCloud) {
  const PointCloud c = FromPositions(std::vector<Vec3>(40, Vec3{1, 1, 1}));
  Matrix<double> v(40, 2, 0.5);
  const NeighborhoodSums s = radius_sums(c, v, 0.1);
  for (auto k : s.counts) EXPECT_EQ(k, 40u);
  EXPECT_DOUBLE_EQ(s.sums(0, 0), 20.0);

  const NeighborhoodSums e = radius_sums(PointCloud{}, Matrix<double>(0, 3), 0.1);
  EXPECT_TRUE(e.counts.empty());
}

TEST(VoxelMeans, MatchVoxelMembership) {
  Gen g(5);
  const PointCloud c = g.Cloud(400, 1.0);
  Matrix<double> v(c.size(), 3);
  for (double& x : v.data) x = g.Uniform(0.0, 1.0);
  const double edge = 0.25;
  const Matrix<double> m = voxel_means(c, v, edge);
  std::map<VoxelKey, std::vector<Index>> groups;
  for (std::size_t i = 0; i < c.size(); ++i) {
    groups[ComputeVoxelKey(c.positions[i], edge)].push_back(
        static_cast<Index>(i));
  }
  for (const auto& [key, members] : groups) {
    for (std::size_t k = 0; k < 3; ++k) {
      double s = 0.0;
      for (Index j : members) s += v(j, k);
      s /= static_cast<double>(members.size());
      for (Index i : members) ASSERT_NEAR(m(i, k), s, 1e-12);
    }
  }
}

TEST(GeometricFeatures, LineIsPurelyLinear) {
  std::vector<Vec3> pos;
  for (int i = 0; i < 10; ++i) pos.push_back({0.01 * i, 0.02 * i, 0.0});
  const FeatureField f = local_geometric_features(FromPositions(pos), 1.0);
  ASSERT_EQ(f.dim(), kGeometricFeatureDim);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(f.row(i)[4], 1.0, 1e-9);
    EXPECT_NEAR(f.row(i)[5], 0.0, 1e-9);
    EXPECT_NEAR(f.row(i)[6], 0.0, 1e-9);
  }
}

TEST(GeometricFeatures, PlaneHasNoScattering) {
  Gen g(2);
  std::vector<Vec3> pos;
  for (int i = 0; i < 50; ++i) pos.push_back({g.Uniform(0, 1), g.Uniform(0, 1), 0.3});
  const FeatureField f = local_geometric_features(FromPositions(pos), 0.4);
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(f.row(i)[6], 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(f.row(i)[0], 0.0);  // zero height extent
  }
}

TEST(GeometricFeatures, IsolatedPointIsZero) {
  const PointCloud c = FromPositions({{0, 0, 0}, {5, 5, 5}, {5.01, 5, 5}});
  const FeatureField f = local_geometric_features(c, 0.1);
  EXPECT_EQ(f.row(0)[4], 0.0);
  EXPECT_EQ(f.row(0)[5], 0.0);
  EXPECT_EQ(f.row(0)[6], 0.0);
  // Counts are 1, 2, 2 against a mean of 5/3.
  EXPECT_NEAR(f.row(0)[7], 0.6, 1e-12);
  EXPECT_NEAR(f.row(1)[7], 1.2, 1e-12);
  EXPECT_THROW(local_geometric_features(c, 0.0), Error);
}

TEST(GeometricFeatures, HeightAndColorColumns) {
  PointCloud c = FromPositions({{0, 0, 1}, {0, 0, 3}, {0, 0, 2}});
  c.colors[2] = {0.1, 0.2, 0.3};
  const FeatureField f = local_geometric_features(c, 0.5);
  EXPECT_DOUBLE_EQ(f.row(0)[0], 0.0);
  EXPECT_DOUBLE_EQ(f.row(1)[0], 1.0);
  EXPECT_DOUBLE_EQ(f.row(2)[0], 0.5);
  EXPECT_DOUBLE_EQ(f.row(2)[1], 0.1);
  EXPECT_DOUBLE_EQ(f.row(2)[3], 0.3);
}

// Eigen-features depend only on shape: unchanged by rotation and
// translation. Points sit well inside or outside the radius so that no
// membership decision is within rounding distance of the boundary.
TEST(GeometricFeatures, RigidMotionInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Gen g(seed);
    std::vector<Vec3> pos;
    for (int cluster = 0; cluster < 6; ++cluster) {
      const Vec3 base{3.0 * cluster, 0.0, 0.0};
      for (int i = 0; i < 15; ++i) {
        pos.push_back({base[0] + g.Uniform(0, 0.3), base[1] + g.Uniform(0, 0.2),
                       base[2] + g.Uniform(0, 0.05 * cluster)});
      }
    }
    const PointCloud c = FromPositions(pos);
    const double a = g.Uniform(0, 2 * std::numbers::pi);
    const double b = g.Uniform(0, 2 * std::numbers::pi);
    const Vec3 t{g.Uniform(-10, 10), g.Uniform(-10, 10), g.Uniform(-10, 10)};
    PointCloud moved = c;
    for (auto& p : moved.positions) {
      // Rotation about z then about x.
      const double x = std::cos(a) * p[0] - std::sin(a) * p[1];
      const double y = std::sin(a) * p[0] + std::cos(a) * p[1];
      const double y2 = std::cos(b) * y - std::sin(b) * p[2];
      const double z2 = std::sin(b) * y + std::cos(b) * p[2];
      p = {x + t[0], y2 + t[1], z2 + t[2]};
    }
    const FeatureField fa = local_geometric_features(c, 1.0);
    const FeatureField fb = local_geometric_features(moved, 1.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (std::size_t k = 4; k < 8; ++k) {
        ASSERT_NEAR(fa.row(i)[k], fb.row(i)[k], 1e-6) << i << "," << k;
      }
    }
  }
}

TEST(GeometricFeatures, AlwaysFinite) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Gen g(seed);
    const PointCloud c = g.Cloud(g.Int(1, 300), g.Uniform(0.01, 3.0));
    const FeatureField f = local_geometric_features(c, g.Uniform(0.01, 0.5));
    for (double v : f.feats.data) ASSERT_TRUE(std::isfinite(v));
  }
}

}  // namespace
}  // namespace hpal
