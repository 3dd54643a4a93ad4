#include "hpal/spatial_index.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#if defined(__x86_64__)
#include <immintrin.h>
#endif

#include <Eigen/Dense>

namespace hpal {

VoxelKey ComputeVoxelKey(const Vec3& p, double edge) {
  VoxelKey key;
  std::int32_t* out[3] = {&key.x, &key.y, &key.z};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(p[a] / edge);
    if (!(f >= -2147483647.0 && f <= 2147483647.0)) {
      throw Error("coordinate " + std::to_string(p[a]) +
                  " out of range for voxel edge " + std::to_string(edge));
    }
    *out[a] = static_cast<std::int32_t>(f);
  }
  return key;
}

std::optional<std::size_t> VoxelGrid::find(const VoxelKey& key) const {
  auto it = lookup_.find(key);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

VoxelGrid build_grid(const PointCloud& cloud, double edge) {
  if (!(edge > 0.0) || !std::isfinite(edge)) {
    throw Error("voxel edge must be positive, got " + std::to_string(edge));
  }
  if (cloud.empty()) throw Error("cannot build a voxel grid on an empty cloud");

  VoxelGrid grid;
  grid.edge_ = edge;
  const std::size_t n = cloud.size();
  grid.point_to_voxel_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid.point_to_voxel_[i] = ComputeVoxelKey(cloud.positions[i], edge);
  }

  // Stable sort keeps ascending point order inside each bucket.
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return grid.point_to_voxel_[a] < grid.point_to_voxel_[b];
  });

  grid.members_ = std::move(order);
  grid.offsets_.push_back(0);
  for (std::size_t k = 0; k < n; ++k) {
    const VoxelKey& key = grid.point_to_voxel_[grid.members_[k]];
    if (grid.keys_.empty() || grid.keys_.back() != key) {
      if (!grid.keys_.empty()) grid.offsets_.push_back(k);
      grid.keys_.push_back(key);
    }
  }
  grid.offsets_.push_back(n);
  grid.lookup_.reserve(grid.keys_.size());
  for (std::size_t b = 0; b < grid.keys_.size(); ++b) {
    grid.lookup_.emplace(grid.keys_[b], static_cast<std::uint32_t>(b));
  }
  return grid;
}

void ForEachNeighbor(const VoxelGrid& grid, const PointCloud& cloud,
                     const Vec3& center, double r,
                     const std::function<void(Index)>& visit) {
  if (!(r > 0.0)) {
    throw Error("radius must be positive, got " + std::to_string(r));
  }
  const double r2 = r * r;
  const double edge = grid.edge();
  Vec3 lo_p{center[0] - r, center[1] - r, center[2] - r};
  Vec3 hi_p{center[0] + r, center[1] + r, center[2] + r};
  const VoxelKey lo = ComputeVoxelKey(lo_p, edge);
  const VoxelKey hi = ComputeVoxelKey(hi_p, edge);

  const std::int64_t span = std::int64_t{hi.x - lo.x + 1} *
                            (hi.y - lo.y + 1) * (hi.z - lo.z + 1);
  auto scan_bucket = [&](std::size_t b) {
    for (Index i : grid.bucket(b)) {
      if (SquaredDistance(cloud.positions[i], center) < r2) visit(i);
    }
  };
  if (span > static_cast<std::int64_t>(grid.bucket_count())) {
    // Radius is large relative to the grid; walking occupied buckets is
    // cheaper than probing empty keys.
    for (std::size_t b = 0; b < grid.bucket_count(); ++b) {
      const VoxelKey& k = grid.bucket_key(b);
      if (k.x < lo.x || k.x > hi.x || k.y < lo.y || k.y > hi.y || k.z < lo.z ||
          k.z > hi.z) {
        continue;
      }
      scan_bucket(b);
    }
    return;
  }
  for (std::int32_t x = lo.x; x <= hi.x; ++x) {
    for (std::int32_t y = lo.y; y <= hi.y; ++y) {
      for (std::int32_t z = lo.z; z <= hi.z; ++z) {
        if (auto b = grid.find({x, y, z})) scan_bucket(*b);
      }
    }
  }
}

std::vector<Index> radius_neighbors(const VoxelGrid& grid,
                                    const PointCloud& cloud,
                                    const Vec3& center, double r) {
  std::vector<Index> out;
  ForEachNeighbor(grid, cloud, center, r, [&](Index i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Geometric descriptors

namespace {

struct Eigenvalues {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;  // l1 >= l2 >= l3 >= 0
};

Eigenvalues CovarianceEigenvalues(const PointCloud& cloud,
                                  std::span<const Index> nbrs) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (Index j : nbrs) {
    const auto& p = cloud.positions[j];
    mean += Eigen::Vector3d(p[0], p[1], p[2]);
  }
  mean /= static_cast<double>(nbrs.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (Index j : nbrs) {
    const auto& p = cloud.positions[j];
    const Eigen::Vector3d d = Eigen::Vector3d(p[0], p[1], p[2]) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(nbrs.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(
      cov, Eigen::EigenvaluesOnly);
  Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  Eigenvalues out{ev[2], ev[1], ev[0]};
  // Round-off from the solver shows up as tiny (possibly negative) values on
  // exactly degenerate neighborhoods; snap them to zero.
  const double floor = out.l1 * 1e-12;
  if (out.l1 <= 0.0) return {};
  if (out.l2 < floor) out.l2 = 0.0;
  if (out.l3 < floor) out.l3 = 0.0;
  return out;
}

}  // namespace

FeatureField local_geometric_features(const PointCloud& cloud, double radius) {
  if (!(radius > 0.0)) {
    throw Error("feature radius must be positive, got " +
                std::to_string(radius));
  }
  const std::size_t n = cloud.size();
  FeatureField out(n, kGeometricFeatureDim);
  if (n == 0) return out;

  double zmin = std::numeric_limits<double>::infinity();
  double zmax = -zmin;
  for (const auto& p : cloud.positions) {
    zmin = std::min(zmin, p[2]);
    zmax = std::max(zmax, p[2]);
  }
  const double zext = zmax - zmin;

  const VoxelGrid grid = build_grid(cloud, radius);
  std::vector<std::uint32_t> counts(n);
  std::vector<Index> nbrs;
  for (std::size_t i = 0; i < n; ++i) {
    nbrs.clear();
    ForEachNeighbor(grid, cloud, cloud.positions[i], radius,
                    [&](Index j) { nbrs.push_back(j); });
    counts[i] = static_cast<std::uint32_t>(nbrs.size());
    auto f = out.row(i);
    f[0] = zext > 0.0 ? (cloud.positions[i][2] - zmin) / zext : 0.0;
    f[1] = cloud.colors[i][0];
    f[2] = cloud.colors[i][1];
    f[3] = cloud.colors[i][2];
    if (nbrs.size() >= 3) {
      // Deterministic summation order regardless of grid layout.
      std::sort(nbrs.begin(), nbrs.end());
      const Eigenvalues ev = CovarianceEigenvalues(cloud, nbrs);
      if (ev.l1 > 0.0) {
        f[4] = (ev.l1 - ev.l2) / ev.l1;
        f[5] = (ev.l2 - ev.l3) / ev.l1;
        f[6] = ev.l3 / ev.l1;
      }
    }
  }
  const double mean_count =
      std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.row(i)[7] = counts[i] / mean_count;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchical radius sums

namespace {

constexpr std::uint32_t kLeafSize = 8;  // one SIMD register of points
// Query nodes with at most this many points walk the tree together.
constexpr std::uint32_t kQueryGroup = 32;

struct Box {
  double lo[3];
  double hi[3];
};

// Both bounds use the evaluation order of SquaredDistance. Every axis term
// bounds the matching term of any point pair drawn from the two boxes and
// IEEE rounding is monotone, so a box verdict never contradicts the
// per-pair test.
inline double BoxMinD2(const Box& a, const Box& b) {
  double d[3];
  for (int k = 0; k < 3; ++k) {
    const double g1 = a.lo[k] - b.hi[k];
    const double g2 = b.lo[k] - a.hi[k];
    d[k] = g1 > 0.0 ? g1 : (g2 > 0.0 ? g2 : 0.0);
  }
  return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
}

inline double BoxMaxD2(const Box& a, const Box& b) {
  double d[3];
  for (int k = 0; k < 3; ++k) {
    d[k] = std::max(a.hi[k] - b.lo[k], b.hi[k] - a.lo[k]);
  }
  return d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
}

struct Node {
  std::uint32_t begin = 0, end = 0;
  std::uint32_t left = 0, right = 0;  // both 0 for a leaf
  bool leaf() const { return left == 0; }
};

// Balanced kd-tree with per-node value sums. Points are permuted so every
// node covers a contiguous range; coordinates and values are stored
// column-wise in that order.
class SumTree {
 public:
  SumTree(const PointCloud& cloud, const Matrix<double>& values)
      : n_(cloud.size()), c_(values.cols) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), Index{0});
    nodes_.reserve(2 * (n_ / (kLeafSize / 2) + 1));
    nodes_.push_back({});
    Build(cloud, 0, 0, static_cast<std::uint32_t>(n_));

    // Padding lets a full register load start at any leaf.
    for (auto& col : xyz_) col.assign(n_ + kLeafSize, 0.0);
    vals_.assign(c_ * n_ + kLeafSize, 0.0);
    for (std::size_t k = 0; k < n_; ++k) {
      const Index i = order_[k];
      for (int a = 0; a < 3; ++a) xyz_[a][k] = cloud.positions[i][a];
      for (std::size_t c = 0; c < c_; ++c) vals_[c * n_ + k] = values(i, c);
    }
    box_.resize(nodes_.size());
    sum_.assign(nodes_.size() * c_, 0.0);
    Summarize(0);
  }

  std::size_t n_classes() const { return c_; }
  Index original_index(std::size_t k) const { return order_[k]; }

  // Maximal nodes holding at most kQueryGroup points, in tree order.
  std::vector<std::uint32_t> Groups() const {
    std::vector<std::uint32_t> out, stack{0};
    while (!stack.empty()) {
      const std::uint32_t id = stack.back();
      stack.pop_back();
      const Node& nd = nodes_[id];
      if (nd.end - nd.begin <= kQueryGroup || nd.leaf()) {
        out.push_back(id);
      } else {
        stack.push_back(nd.right);
        stack.push_back(nd.left);
      }
    }
    return out;
  }

  // Per-group working storage.
  struct Work {
    std::vector<std::uint32_t> stack;
    std::vector<std::uint32_t> band;  // leaves straddling the radius
    std::vector<std::uint8_t> hits;   // band leaves x group points
    std::vector<double> acc;          // group points x 8 classes x 8 lanes
    std::vector<double> whole;  // sums of nodes inside for the whole group
  };

  // Writes the radius sums of the points of group g at permuted positions.
  void ResolveGroup(std::uint32_t g, double r2, Work& w, double* out_sums,
                    std::uint32_t* out_cnt) const {
    const Node& gn = nodes_[g];
    const Box& gb = box_[g];
    w.whole.assign(c_, 0.0);
    w.band.clear();
    std::uint32_t whole_cnt = 0;
    w.stack.clear();
    w.stack.push_back(0);
    while (!w.stack.empty()) {
      const std::uint32_t id = w.stack.back();
      w.stack.pop_back();
      const Box& b = box_[id];
      if (BoxMinD2(gb, b) >= r2) continue;
      const Node& nd = nodes_[id];
      if (BoxMaxD2(gb, b) < r2) {
        const double* s = &sum_[std::size_t{id} * c_];
        for (std::size_t c = 0; c < c_; ++c) w.whole[c] += s[c];
        whole_cnt += nd.end - nd.begin;
        continue;
      }
      if (nd.leaf()) {
        w.band.push_back(id);
        continue;
      }
      w.stack.push_back(nd.right);
      w.stack.push_back(nd.left);
    }
    for (std::uint32_t k = gn.begin; k < gn.end; ++k) {
      std::copy(w.whole.begin(), w.whole.end(), out_sums + std::size_t{k} * c_);
      out_cnt[k] = whole_cnt;
    }
    BandSums(gn, r2, w, out_sums, out_cnt);
  }

 private:
  void Build(const PointCloud& cloud, std::uint32_t slot, std::uint32_t begin,
             std::uint32_t end) {
    nodes_[slot] = {begin, end, 0, 0};
    if (end - begin <= kLeafSize) return;
    double lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::numeric_limits<double>::infinity();
      hi[a] = -lo[a];
    }
    for (std::uint32_t k = begin; k < end; ++k) {
      const Vec3& p = cloud.positions[order_[k]];
      for (int a = 0; a < 3; ++a) {
        lo[a] = std::min(lo[a], p[a]);
        hi[a] = std::max(hi[a], p[a]);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    const std::uint32_t mid = begin + (end - begin) / 2;
    // Index tie-break keeps the layout independent of the library's
    // selection algorithm.
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](Index x, Index y) {
                       const double px = cloud.positions[x][axis];
                       const double py = cloud.positions[y][axis];
                       return px < py || (px == py && x < y);
                     });
    const auto left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[slot].left = left;
    nodes_[slot].right = left + 1;
    Build(cloud, left, begin, mid);
    Build(cloud, left + 1, mid, end);
  }

  void Summarize(std::uint32_t id) {
    const Node nd = nodes_[id];
    Box& box = box_[id];
    double* sum = &sum_[std::size_t{id} * c_];
    if (nd.leaf()) {
      for (int a = 0; a < 3; ++a) {
        box.lo[a] = std::numeric_limits<double>::infinity();
        box.hi[a] = -box.lo[a];
        for (std::uint32_t k = nd.begin; k < nd.end; ++k) {
          box.lo[a] = std::min(box.lo[a], xyz_[a][k]);
          box.hi[a] = std::max(box.hi[a], xyz_[a][k]);
        }
      }
      for (std::size_t c = 0; c < c_; ++c) {
        for (std::uint32_t k = nd.begin; k < nd.end; ++k) {
          sum[c] += vals_[c * n_ + k];
        }
      }
      return;
    }
    Summarize(nd.left);
    Summarize(nd.right);
    const Box& l = box_[nd.left];
    const Box& r = box_[nd.right];
    for (int a = 0; a < 3; ++a) {
      box.lo[a] = std::min(l.lo[a], r.lo[a]);
      box.hi[a] = std::max(l.hi[a], r.hi[a]);
    }
    const double* ls = &sum_[std::size_t{nd.left} * c_];
    const double* rs = &sum_[std::size_t{nd.right} * c_];
    for (std::size_t c = 0; c < c_; ++c) sum[c] = ls[c] + rs[c];
  }

  // Adds to every point of group gn the band points within r.
  void BandSums(const Node& gn, double r2, Work& w, double* out_sums,
                std::uint32_t* out_cnt) const;
#if defined(__x86_64__)
  __attribute__((target("avx512f"))) void BandSumsAvx512(
      const Node& gn, double r2, Work& w, double* out_sums,
      std::uint32_t* out_cnt) const;
#endif

  std::size_t n_;
  std::size_t c_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  std::vector<Box> box_;
  std::vector<double> sum_;  // nodes x c
  std::vector<double> xyz_[3];
  std::vector<double> vals_;  // c x n
};

#if defined(__x86_64__)
bool HaveAvx512() {
  static const bool have = __builtin_cpu_supports("avx512f");
  return have;
}

// Distances use the evaluation order of SquaredDistance, so they agree with
// the box bounds. Each band leaf is loaded once and applied to every point
// of the group.
__attribute__((target("avx512f"))) void SumTree::BandSumsAvx512(
    const Node& gn, double r2, Work& w, double* out_sums,
    std::uint32_t* out_cnt) const {
  const std::uint32_t nq = gn.end - gn.begin;
  const std::size_t nb = w.band.size();
  const __m512d r2v = _mm512_set1_pd(r2);
  w.hits.resize(nb * nq);
  for (std::size_t b = 0; b < nb; ++b) {
    const Node& leaf = nodes_[w.band[b]];
    const auto live = static_cast<__mmask8>((1u << (leaf.end - leaf.begin)) - 1);
    const __m512d px = _mm512_loadu_pd(&xyz_[0][leaf.begin]);
    const __m512d py = _mm512_loadu_pd(&xyz_[1][leaf.begin]);
    const __m512d pz = _mm512_loadu_pd(&xyz_[2][leaf.begin]);
    std::uint8_t* row = &w.hits[b * nq];
    for (std::uint32_t q = 0; q < nq; ++q) {
      const std::size_t k = gn.begin + q;
      const __m512d dx = _mm512_sub_pd(_mm512_set1_pd(xyz_[0][k]), px);
      const __m512d dy = _mm512_sub_pd(_mm512_set1_pd(xyz_[1][k]), py);
      const __m512d dz = _mm512_sub_pd(_mm512_set1_pd(xyz_[2][k]), pz);
      const __m512d d2 = _mm512_add_pd(
          _mm512_add_pd(_mm512_mul_pd(dx, dx), _mm512_mul_pd(dy, dy)),
          _mm512_mul_pd(dz, dz));
      const __mmask8 hit = _mm512_mask_cmp_pd_mask(live, d2, r2v, _CMP_LT_OQ);
      row[q] = hit;
      out_cnt[k] += std::popcount(static_cast<unsigned>(hit));
    }
  }
  constexpr std::size_t kBlock = 8;
  w.acc.resize(std::size_t{nq} * kBlock * 8);
  for (std::size_t c0 = 0; c0 < c_; c0 += kBlock) {
    const std::size_t nc = std::min(kBlock, c_ - c0);
    std::fill(w.acc.begin(), w.acc.end(), 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      const std::uint8_t* row = &w.hits[b * nq];
      const double* v = &vals_[c0 * n_ + nodes_[w.band[b]].begin];
      __m512d lv[kBlock];
#pragma GCC unroll 8
      for (std::size_t c = 0; c < kBlock; ++c) {
        lv[c] = c < nc ? _mm512_loadu_pd(v + c * n_) : _mm512_setzero_pd();
      }
      for (std::uint32_t q = 0; q < nq; ++q) {
        const auto hit = static_cast<__mmask8>(row[q]);
        if (hit == 0) continue;
        double* a = &w.acc[std::size_t{q} * kBlock * 8];
#pragma GCC unroll 8
        for (std::size_t c = 0; c < kBlock; ++c) {
          const __m512d cur = _mm512_loadu_pd(a + 8 * c);
          _mm512_storeu_pd(a + 8 * c, _mm512_mask_add_pd(cur, hit, cur, lv[c]));
        }
      }
    }
    for (std::uint32_t q = 0; q < nq; ++q) {
      double* dst = out_sums + (gn.begin + std::size_t{q}) * c_;
      const double* a = &w.acc[std::size_t{q} * kBlock * 8];
      for (std::size_t c = 0; c < nc; ++c) {
        dst[c0 + c] += _mm512_reduce_add_pd(_mm512_loadu_pd(a + 8 * c));
      }
    }
  }
}
#endif

void SumTree::BandSums(const Node& gn, double r2, Work& w, double* out_sums,
                       std::uint32_t* out_cnt) const {
#if defined(__x86_64__)
  if (HaveAvx512()) {
    BandSumsAvx512(gn, r2, w, out_sums, out_cnt);
    return;
  }
#endif
  for (std::uint32_t k = gn.begin; k < gn.end; ++k) {
    double* dst = out_sums + std::size_t{k} * c_;
    for (std::uint32_t id : w.band) {
      const Node& leaf = nodes_[id];
      for (std::uint32_t j = leaf.begin; j < leaf.end; ++j) {
        const double dx = xyz_[0][k] - xyz_[0][j];
        const double dy = xyz_[1][k] - xyz_[1][j];
        const double dz = xyz_[2][k] - xyz_[2][j];
        if (!(dx * dx + dy * dy + dz * dz < r2)) continue;
        ++out_cnt[k];
        for (std::size_t c = 0; c < c_; ++c) dst[c] += vals_[c * n_ + j];
      }
    }
  }
}

}  // namespace

std::vector<NeighborhoodSums> radius_sums_multi(const PointCloud& cloud,
                                               const Matrix<double>& values,
                                               std::span<const double> radii,
                                               unsigned threads) {
  for (double r : radii) {
    if (!(r > 0.0)) {
      throw Error("radius must be positive, got " + std::to_string(r));
    }
  }
  if (values.rows != cloud.size()) {
    throw Error("values have " + std::to_string(values.rows) +
                " rows, cloud has " + std::to_string(cloud.size()));
  }
  const std::size_t n = cloud.size();
  const std::size_t c = values.cols;
  std::vector<NeighborhoodSums> out;
  for (std::size_t k = 0; k < radii.size(); ++k) {
    out.push_back({Matrix<double>(n, c, 0.0), std::vector<std::uint32_t>(n, 0)});
  }
  if (n == 0 || radii.empty()) return out;

  const SumTree tree(cloud, values);
  const std::vector<std::uint32_t> groups = tree.Groups();
  std::vector<double> sums(n * c);
  std::vector<std::uint32_t> counts(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, groups.size()));

  for (std::size_t level = 0; level < radii.size(); ++level) {
    const double r2 = radii[level] * radii[level];
    if (threads <= 1) {
      SumTree::Work w;
      for (std::uint32_t g : groups) {
        tree.ResolveGroup(g, r2, w, sums.data(), counts.data());
      }
    } else {
      // Groups own disjoint point ranges, so writes never overlap.
      std::atomic<std::size_t> next{0};
      std::vector<std::jthread> pool;
      for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
          SumTree::Work w;
          for (std::size_t k; (k = next.fetch_add(1)) < groups.size();) {
            tree.ResolveGroup(groups[k], r2, w, sums.data(), counts.data());
          }
        });
      }
    }
    NeighborhoodSums& dst = out[level];
    for (std::size_t k = 0; k < n; ++k) {
      const Index i = tree.original_index(k);
      std::copy_n(sums.begin() + k * c, c, dst.sums.row(i).begin());
      dst.counts[i] = counts[k];
    }
  }
  return out;
}

NeighborhoodSums radius_sums(const PointCloud& cloud,
                             const Matrix<double>& values, double r,
                             unsigned threads) {
  const double radii[] = {r};
  return std::move(radius_sums_multi(cloud, values, radii, threads)[0]);
}

Matrix<double> voxel_means(const PointCloud& cloud,
                           const Matrix<double>& values, double edge) {
  if (values.rows != cloud.size()) {
    throw Error("values have " + std::to_string(values.rows) +
                " rows, cloud has " + std::to_string(cloud.size()));
  }
  Matrix<double> out(cloud.size(), values.cols, 0.0);
  if (cloud.empty()) return out;
  const VoxelGrid grid = build_grid(cloud, edge);
  std::vector<double> mean(values.cols);
  for (std::size_t b = 0; b < grid.bucket_count(); ++b) {
    const auto members = grid.bucket(b);
    std::fill(mean.begin(), mean.end(), 0.0);
    for (Index i : members) {
      const auto row = values.row(i);
      for (std::size_t c = 0; c < values.cols; ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(members.size());
    for (Index i : members) {
      std::copy(mean.begin(), mean.end(), out.row(i).begin());
    }
  }
  return out;
}

}  // namespace hpal
