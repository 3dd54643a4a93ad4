#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "hpal/data_io.h"

namespace hpal {

void ValidateSceneSpec(const SceneSpec& spec) {
  if (spec.n_classes < 2) {
    throw Error("infeasible spec: n_classes must be at least 2");
  }
  for (double e : spec.room) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw Error("infeasible spec: room extent must be positive");
    }
  }
  if (!(spec.outlier_fraction >= 0.0 && spec.outlier_fraction <= 1.0)) {
    throw Error("infeasible spec: outlier_fraction must lie in [0,1]");
  }
  if (!(spec.surface_noise >= 0.0) || !(spec.color_noise >= 0.0)) {
    throw Error("infeasible spec: noise levels must be non-negative");
  }
  if (spec.n_points < spec.n_classes) {
    throw Error("infeasible spec: " + std::to_string(spec.n_points) +
                " points cannot cover " + std::to_string(spec.n_classes) +
                " classes");
  }
  const std::size_t n_out = static_cast<std::size_t>(
      std::floor(spec.outlier_fraction * static_cast<double>(spec.n_points)));
  const std::size_t min_per_class = (spec.n_points + 99) / 100;
  if (spec.n_classes * min_per_class > spec.n_points - n_out) {
    throw Error("infeasible spec: " + std::to_string(spec.n_classes) +
                " classes x 1% minimum exceeds the " +
                std::to_string(spec.n_points - n_out) + " surface points");
  }
}

namespace {

using Rng = std::mt19937_64;

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

struct Box3 {
  Vec3 lo, hi;
};

// Furniture kinds used for classes >= 2, in order.
enum class Kind { kTable, kChair, kLamp, kCabinet, kBoard, kClutter };
constexpr Kind kKindCycle[] = {Kind::kTable,   Kind::kChair, Kind::kLamp,
                               Kind::kCabinet, Kind::kBoard, Kind::kClutter};

// A class's geometry: a set of boxes and spheres, sampled on their surfaces
// proportionally to area.
struct Shape {
  bool sphere = false;
  Box3 box;        // when !sphere
  Vec3 center{};   // when sphere
  double radius = 0.0;

  double Area() const {
    if (sphere) return 4.0 * std::numbers::pi * radius * radius;
    const double dx = box.hi[0] - box.lo[0];
    const double dy = box.hi[1] - box.lo[1];
    const double dz = box.hi[2] - box.lo[2];
    return 2.0 * (dx * dy + dy * dz + dx * dz);
  }

  Vec3 Sample(Rng& rng) const {
    if (sphere) {
      const double z = Uniform(rng, -1.0, 1.0);
      const double phi = Uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      return {center[0] + radius * s * std::cos(phi),
              center[1] + radius * s * std::sin(phi), center[2] + radius * z};
    }
    const double d[3] = {box.hi[0] - box.lo[0], box.hi[1] - box.lo[1],
                         box.hi[2] - box.lo[2]};
    // Face pairs normal to x, y, z.
    const double w[3] = {d[1] * d[2], d[0] * d[2], d[0] * d[1]};
    double t = Uniform(rng, 0.0, w[0] + w[1] + w[2]);
    int axis = 0;
    while (axis < 2 && t >= w[axis]) t -= w[axis++];
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = Uniform(rng, box.lo[a], box.hi[a]);
    p[axis] = Uniform(rng, 0.0, 1.0) < 0.5 ? box.lo[axis] : box.hi[axis];
    return p;
  }
};

struct ClassModel {
  std::vector<Shape> shapes;
  bool floor = false;
  bool walls = false;
  Vec3 color{};
  double share = 0.0;
};

Vec3 PaletteColor(std::size_t cls, std::size_t n_classes) {
  static constexpr Vec3 kBase[] = {
      {0.50, 0.47, 0.43},  // floor
      {0.62, 0.60, 0.57},  // wall
      {0.48, 0.36, 0.24},  // table
      {0.42, 0.33, 0.25},  // chair
      {0.85, 0.80, 0.55},  // lamp
      {0.45, 0.38, 0.30},  // cabinet
      {0.75, 0.75, 0.72},  // board
      {0.35, 0.45, 0.55},  // clutter
  };
  if (cls < std::size(kBase)) return kBase[cls];
  // Evenly spaced hues at moderate saturation for larger vocabularies.
  const double h = std::fmod(static_cast<double>(cls) * 0.61803398875, 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  Vec3 rgb;
  switch (static_cast<int>(h)) {
    case 0: rgb = {1, x, 0}; break;
    case 1: rgb = {x, 1, 0}; break;
    case 2: rgb = {0, 1, x}; break;
    case 3: rgb = {0, x, 1}; break;
    case 4: rgb = {x, 0, 1}; break;
    default: rgb = {1, 0, x}; break;
  }
  (void)n_classes;
  for (double& v : rgb) v = 0.3 + 0.45 * v;
  return rgb;
}

// Places one instance of a furniture kind and appends its shapes.
void PlaceFurniture(Kind kind, const Vec3& room, Rng& rng,
                    std::vector<Shape>& out) {
  auto box = [&](Vec3 lo, Vec3 hi) {
    Shape s;
    s.box = {lo, hi};
    out.push_back(s);
  };
  auto sphere = [&](Vec3 c, double r) {
    Shape s;
    s.sphere = true;
    s.center = c;
    s.radius = r;
    out.push_back(s);
  };
  const double mx = std::min(0.3, room[0] / 4);
  const double my = std::min(0.3, room[1] / 4);
  switch (kind) {
    case Kind::kTable: {
      const double w = Uniform(rng, 1.0, 1.6), d = Uniform(rng, 0.6, 0.9);
      const double x = Uniform(rng, mx, std::max(mx, room[0] - mx - w));
      const double y = Uniform(rng, my, std::max(my, room[1] - my - d));
      const double h = 0.75;
      box({x, y, h - 0.04}, {x + w, y + d, h});
      for (int k = 0; k < 4; ++k) {
        const double lx = (k & 1) ? x + w - 0.05 : x;
        const double ly = (k & 2) ? y + d - 0.05 : y;
        box({lx, ly, 0.0}, {lx + 0.05, ly + 0.05, h - 0.04});
      }
      break;
    }
    case Kind::kChair: {
      const double s = Uniform(rng, 0.42, 0.5);
      const double x = Uniform(rng, mx, std::max(mx, room[0] - mx - s));
      const double y = Uniform(rng, my, std::max(my, room[1] - my - s));
      box({x, y, 0.0}, {x + s, y + s, 0.45});
      box({x, y, 0.45}, {x + s, y + 0.05, 0.9});
      break;
    }
    case Kind::kLamp: {
      const double r = Uniform(rng, 0.15, 0.25);
      sphere({Uniform(rng, mx + r, std::max(mx + r, room[0] - mx - r)),
              Uniform(rng, my + r, std::max(my + r, room[1] - my - r)),
              std::min(room[2] - r, Uniform(rng, 1.4, 2.0))},
             r);
      break;
    }
    case Kind::kCabinet: {
      const double w = Uniform(rng, 0.8, 1.2), d = 0.4;
      const double h = std::min(room[2], Uniform(rng, 1.6, 2.0));
      if (Uniform(rng, 0.0, 1.0) < 0.5) {
        const double x = Uniform(rng, 0.0, std::max(0.0, room[0] - w));
        const double y = Uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : room[1] - d;
        box({x, y, 0.0}, {x + w, y + d, h});
      } else {
        const double y = Uniform(rng, 0.0, std::max(0.0, room[1] - w));
        const double x = Uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : room[0] - d;
        box({x, y, 0.0}, {x + d, y + w, h});
      }
      break;
    }
    case Kind::kBoard: {
      const double w = Uniform(rng, 1.5, 2.5);
      const double z0 = std::min(0.9, room[2] / 3);
      const double z1 = std::min(room[2], z0 + 1.1);
      if (Uniform(rng, 0.0, 1.0) < 0.5) {
        const double x = Uniform(rng, 0.0, std::max(0.0, room[0] - w));
        const double y = Uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : room[1] - 0.02;
        box({x, y, z0}, {x + w, y + 0.02, z1});
      } else {
        const double y = Uniform(rng, 0.0, std::max(0.0, room[1] - w));
        const double x = Uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : room[0] - 0.02;
        box({x, y, z0}, {x + 0.02, y + w, z1});
      }
      break;
    }
    case Kind::kClutter: {
      for (int k = 0; k < 3; ++k) {
        const double r = Uniform(rng, 0.08, 0.15);
        if (k % 2 == 0) {
          sphere({Uniform(rng, r, std::max(r, room[0] - r)),
                  Uniform(rng, r, std::max(r, room[1] - r)), r},
                 r);
        } else {
          const double x = Uniform(rng, 0.0, std::max(0.0, room[0] - 2 * r));
          const double y = Uniform(rng, 0.0, std::max(0.0, room[1] - 2 * r));
          box({x, y, 0.0}, {x + 2 * r, y + 2 * r, 2 * r});
        }
      }
      break;
    }
  }
}

constexpr double kFurnitureShares[] = {0.12, 0.09, 0.04, 0.10, 0.05, 0.04};

std::vector<std::size_t> AllocateCounts(const std::vector<ClassModel>& classes,
                                        std::size_t n_surface,
                                        std::size_t min_per_class) {
  const std::size_t c = classes.size();
  double total_share = 0.0;
  for (const auto& m : classes) total_share += m.share;
  std::vector<std::size_t> counts(c);
  std::size_t sum = 0;
  for (std::size_t k = 0; k < c; ++k) {
    counts[k] = std::max(
        min_per_class,
        static_cast<std::size_t>(std::floor(classes[k].share / total_share *
                                            static_cast<double>(n_surface))));
    sum += counts[k];
  }
  // Give any remainder to the walls; take any excess from the largest
  // classes without going below the minimum.
  if (sum < n_surface) counts[1] += n_surface - sum;
  while (sum > n_surface) {
    const auto it = std::max_element(counts.begin(), counts.end());
    const std::size_t spare = *it - min_per_class;
    const std::size_t take = std::min(spare, sum - n_surface);
    if (take == 0) throw Error("infeasible spec: cannot satisfy class minimum");
    *it -= take;
    sum -= take;
  }
  return counts;
}

}  // namespace

PointCloud gen_synthetic(const SceneSpec& spec) {
  ValidateSceneSpec(spec);
  Rng rng(spec.seed);
  const Vec3& room = spec.room;
  const std::size_t c_n = spec.n_classes;

  std::vector<ClassModel> classes(c_n);
  classes[0].floor = true;
  classes[0].share = 0.26;
  classes[1].walls = true;
  classes[1].share = 0.30;
  for (std::size_t k = 2; k < c_n; ++k) {
    const std::size_t slot = (k - 2) % std::size(kKindCycle);
    const Kind kind = kKindCycle[slot];
    const int instances = kind == Kind::kLamp ? 3 : (kind == Kind::kBoard ? 1 : 2);
    for (int i = 0; i < instances; ++i) {
      PlaceFurniture(kind, room, rng, classes[k].shapes);
    }
    classes[k].share = kFurnitureShares[slot];
  }
  for (std::size_t k = 0; k < c_n; ++k) classes[k].color = PaletteColor(k, c_n);

  const std::size_t n_out = static_cast<std::size_t>(
      std::floor(spec.outlier_fraction * static_cast<double>(spec.n_points)));
  const std::size_t n_surface = spec.n_points - n_out;
  const std::vector<std::size_t> counts =
      AllocateCounts(classes, n_surface, (spec.n_points + 99) / 100);

  PointCloud cloud;
  cloud.positions.reserve(spec.n_points);
  cloud.colors.reserve(spec.n_points);
  cloud.gt_labels.emplace();
  cloud.gt_labels->reserve(spec.n_points);

  std::normal_distribution<double> surface(0.0, 1.0);
  auto noisy = [&](Vec3 p) {
    if (spec.surface_noise > 0.0) {
      for (double& v : p) v += spec.surface_noise * surface(rng);
    }
    return p;
  };
  auto color = [&](const Vec3& base) {
    Vec3 c;
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp(base[a] + spec.color_noise * surface(rng), 0.0, 1.0);
    }
    return c;
  };

  const double wall_area[4] = {room[0], room[0], room[1], room[1]};
  for (std::size_t k = 0; k < c_n; ++k) {
    const ClassModel& m = classes[k];
    std::vector<double> areas;
    for (const auto& s : m.shapes) areas.push_back(s.Area());
    std::discrete_distribution<std::size_t> pick_shape(areas.begin(),
                                                       areas.end());
    std::discrete_distribution<int> pick_wall(std::begin(wall_area),
                                              std::end(wall_area));
    for (std::size_t i = 0; i < counts[k]; ++i) {
      Vec3 p;
      if (m.floor) {
        p = {Uniform(rng, 0.0, room[0]), Uniform(rng, 0.0, room[1]), 0.0};
      } else if (m.walls) {
        const int w = pick_wall(rng);
        const double z = Uniform(rng, 0.0, room[2]);
        switch (w) {
          case 0: p = {Uniform(rng, 0.0, room[0]), 0.0, z}; break;
          case 1: p = {Uniform(rng, 0.0, room[0]), room[1], z}; break;
          case 2: p = {0.0, Uniform(rng, 0.0, room[1]), z}; break;
          default: p = {room[0], Uniform(rng, 0.0, room[1]), z}; break;
        }
      } else {
        p = m.shapes[pick_shape(rng)].Sample(rng);
      }
      cloud.positions.push_back(noisy(p));
      cloud.colors.push_back(color(m.color));
      cloud.gt_labels->push_back(static_cast<ClassId>(k));
    }
  }
  std::uniform_int_distribution<ClassId> any_class(
      0, static_cast<ClassId>(c_n - 1));
  for (std::size_t i = 0; i < n_out; ++i) {
    cloud.positions.push_back({Uniform(rng, 0.0, room[0]),
                               Uniform(rng, 0.0, room[1]),
                               Uniform(rng, 0.0, room[2])});
    Vec3 col{Uniform(rng, 0.0, 1.0), Uniform(rng, 0.0, 1.0),
             Uniform(rng, 0.0, 1.0)};
    cloud.colors.push_back(col);
    cloud.gt_labels->push_back(any_class(rng));
  }

  // Shuffle so that point order carries no class information.
  std::vector<std::size_t> perm(cloud.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  PointCloud shuffled;
  shuffled.positions.reserve(cloud.size());
  shuffled.colors.reserve(cloud.size());
  shuffled.gt_labels.emplace();
  shuffled.gt_labels->reserve(cloud.size());
  for (std::size_t i : perm) {
    shuffled.positions.push_back(cloud.positions[i]);
    shuffled.colors.push_back(cloud.colors[i]);
    shuffled.gt_labels->push_back((*cloud.gt_labels)[i]);
  }
  return shuffled;
}

}  // namespace hpal
