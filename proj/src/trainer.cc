#include "hpal/trainer.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hpal/spatial_index.h"

namespace hpal {

SegmenterParams SegmenterParams::Zeros(std::size_t n_classes, std::size_t dim) {
  return {Matrix<double>(n_classes, dim, 0.0),
          std::vector<double>(n_classes, 0.0)};
}

void ValidateTrainerConfig(const TrainerConfig& cfg) {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(std::string(name) + " out of range [0,1]: " +
                  std::to_string(v));
    }
  };
  unit(cfg.alpha, "alpha");
  unit(cfg.pseudo_threshold, "pseudo_threshold");
  unit(cfg.per_iter_fraction, "per_iter_fraction");
  unit(cfg.initial_fraction, "initial_fraction");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw Error("learning_rate must be positive, got " +
                std::to_string(cfg.learning_rate));
  }
  if (!(cfg.jitter_sigma >= 0.0) || !std::isfinite(cfg.jitter_sigma)) {
    throw Error("jitter_sigma_m must be non-negative");
  }
  if (!(cfg.color_sigma >= 0.0) || !std::isfinite(cfg.color_sigma)) {
    throw Error("color_sigma must be non-negative");
  }
  if (!(cfg.feature_radius_m > 0.0) || !std::isfinite(cfg.feature_radius_m)) {
    throw Error("feature_radius_m must be positive");
  }
  if (cfg.augment_views == 0) throw Error("augment_views must be at least 1");
}

namespace {

void CheckDims(const SegmenterParams& params, const FeatureField& feats) {
  if (params.dim() != feats.dim() || params.bias.size() != params.n_classes()) {
    throw Error("feature dimension " + std::to_string(feats.dim()) +
                " does not match parameters (" +
                std::to_string(params.n_classes()) + " x " +
                std::to_string(params.dim()) + ")");
  }
}

// Softmax of the logits of one feature row into `out`.
void SoftmaxRow(const SegmenterParams& params, std::span<const double> f,
                std::span<double> out) {
  const std::size_t c_n = params.n_classes();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < c_n; ++c) {
    double z = params.bias[c];
    const auto w = params.weights.row(c);
    for (std::size_t k = 0; k < f.size(); ++k) z += w[k] * f[k];
    out[c] = z;
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < c_n; ++c) {
    out[c] = std::exp(out[c] - mx);
    sum += out[c];
  }
  for (std::size_t c = 0; c < c_n; ++c) out[c] /= sum;
}

}  // namespace

ProbabilityField predict(const SegmenterParams& params,
                         const FeatureField& feats) {
  CheckDims(params, feats);
  ProbabilityField out(feats.size(), params.n_classes());
  for (std::size_t i = 0; i < feats.size(); ++i) {
    SoftmaxRow(params, feats.row(i), out.row(i));
  }
  return out;
}

PointCloud augment(const PointCloud& cloud, double jitter_sigma,
                   double color_sigma, std::mt19937_64& rng) {
  PointCloud out = cloud;
  if (jitter_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, jitter_sigma);
    for (auto& p : out.positions) {
      for (double& v : p) v += n(rng);
    }
  }
  if (color_sigma > 0.0) {
    std::normal_distribution<double> n(0.0, color_sigma);
    for (auto& col : out.colors) {
      for (double& v : col) v = std::clamp(v + n(rng), 0.0, 1.0);
    }
  }
  return out;
}

LabelMap pseudo_labels(const ProbabilityField& teacher_probs,
                       std::span<const Index> labeled, double threshold) {
  std::vector<std::uint8_t> mask(teacher_probs.size(), 0);
  for (Index i : labeled) {
    if (i < mask.size()) mask[i] = 1;
  }
  LabelMap out;
  for (std::size_t i = 0; i < teacher_probs.size(); ++i) {
    if (mask[i]) continue;
    const auto row = teacher_probs.row(i);
    const auto it = std::max_element(row.begin(), row.end());
    if (it != row.end() && *it > threshold) {
      out.emplace_back(static_cast<Index>(i),
                       static_cast<ClassId>(it - row.begin()));
    }
  }
  return out;
}

double cross_entropy(const SegmenterParams& params, const FeatureField& feats,
                     const LabelMap& targets) {
  CheckDims(params, feats);
  if (targets.empty()) throw Error("cross-entropy over empty targets");
  std::vector<double> p(params.n_classes());
  double loss = 0.0;
  for (const auto& [i, y] : targets) {
    SoftmaxRow(params, feats.row(i), p);
    loss -= std::log(std::max(p[y], std::numeric_limits<double>::min()));
  }
  return loss / static_cast<double>(targets.size());
}

SegmenterParams cross_entropy_gradient(const SegmenterParams& params,
                                       const FeatureField& feats,
                                       const LabelMap& targets) {
  CheckDims(params, feats);
  if (targets.empty()) throw Error("gradient over empty targets");
  const std::size_t c_n = params.n_classes();
  const std::size_t f_n = params.dim();
  SegmenterParams grad = SegmenterParams::Zeros(c_n, f_n);
  std::vector<double> p(c_n);
  for (const auto& [i, y] : targets) {
    if (i >= feats.size() || y >= c_n) {
      throw Error("target (" + std::to_string(i) + ", " + std::to_string(y) +
                  ") out of range");
    }
    const auto f = feats.row(i);
    SoftmaxRow(params, f, p);
    p[y] -= 1.0;
    for (std::size_t c = 0; c < c_n; ++c) {
      auto g = grad.weights.row(c);
      for (std::size_t k = 0; k < f_n; ++k) g[k] += p[c] * f[k];
      grad.bias[c] += p[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(targets.size());
  for (double& g : grad.weights.data) g *= inv;
  for (double& g : grad.bias) g *= inv;
  return grad;
}

SegmenterParams student_step(const SegmenterParams& params,
                             const FeatureField& feats,
                             const LabelMap& targets, double learning_rate) {
  if (targets.empty()) throw Error("student_step needs at least one target");
  const SegmenterParams grad = cross_entropy_gradient(params, feats, targets);
  SegmenterParams out = params;
  for (std::size_t k = 0; k < out.weights.data.size(); ++k) {
    out.weights.data[k] -= learning_rate * grad.weights.data[k];
  }
  for (std::size_t c = 0; c < out.bias.size(); ++c) {
    out.bias[c] -= learning_rate * grad.bias[c];
  }
  return out;
}

SegmenterParams student_step(const SegmenterParams& params,
                             const FeatureField& feats, const LabelMap& truth,
                             const LabelMap& pseudo, double learning_rate) {
  if (truth.empty() && pseudo.empty()) {
    throw Error("student_step needs at least one target");
  }
  SegmenterParams out = params;
  for (const LabelMap* part : {&truth, &pseudo}) {
    if (part->empty()) continue;
    const SegmenterParams grad = cross_entropy_gradient(params, feats, *part);
    for (std::size_t k = 0; k < out.weights.data.size(); ++k) {
      out.weights.data[k] -= learning_rate * grad.weights.data[k];
    }
    for (std::size_t c = 0; c < out.bias.size(); ++c) {
      out.bias[c] -= learning_rate * grad.bias[c];
    }
  }
  return out;
}

SegmenterParams ema_update(const SegmenterParams& teacher,
                           const SegmenterParams& student, double alpha) {
  if (teacher.weights.rows != student.weights.rows ||
      teacher.weights.cols != student.weights.cols ||
      teacher.bias.size() != student.bias.size()) {
    throw Error("ema_update: teacher and student shapes differ");
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error("alpha out of range [0,1]: " + std::to_string(alpha));
  }
  SegmenterParams out = teacher;
  const double beta = 1.0 - alpha;
  for (std::size_t k = 0; k < out.weights.data.size(); ++k) {
    out.weights.data[k] =
        alpha * teacher.weights.data[k] + beta * student.weights.data[k];
  }
  for (std::size_t c = 0; c < out.bias.size(); ++c) {
    out.bias[c] = alpha * teacher.bias[c] + beta * student.bias[c];
  }
  return out;
}

namespace {

std::mt19937_64 DerivedRng(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

std::uint64_t DerivedSeed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t tag) {
  return DerivedRng(seed, stream, tag)();
}

enum StreamTag : std::uint64_t {
  kAugmentStream = 1,
  kInitialStream = 2,
  kColdStartStream = 3,
  kRandomScoreStream = 4,
};

}  // namespace

TrainResult train_iteration(const PointCloud& cloud,
                            const FeatureField& feats,
                            const SelectionState& state,
                            const SegmenterParams& student,
                            const TrainerConfig& cfg) {
  ValidateTrainerConfig(cfg);
  if (state.labeled_count() == 0) {
    throw Error("train_iteration needs at least one labeled point");
  }
  if (feats.size() != cloud.size() || state.n_points() != cloud.size()) {
    throw Error("train_iteration: cloud, features and state sizes differ");
  }
  const auto& gt = cloud.labels();
  const std::vector<Index> labeled = state.labeled();
  LabelMap truth;
  truth.reserve(labeled.size());
  for (Index i : labeled) truth.emplace_back(i, gt[i]);

  TrainResult result;
  result.params.student = student;
  result.params.teacher = student;
  if (cfg.steps > 0) {
    std::mt19937_64 rng =
        DerivedRng(cfg.seed, state.iteration(), kAugmentStream);
    std::vector<FeatureField> views;
    views.reserve(cfg.augment_views);
    for (std::size_t v = 0; v < cfg.augment_views; ++v) {
      views.push_back(local_geometric_features(
          augment(cloud, cfg.jitter_sigma, cfg.color_sigma, rng),
          cfg.feature_radius_m));
    }

    for (std::size_t step = 0; step < cfg.steps; ++step) {
      const ProbabilityField teacher_probs =
          predict(result.params.teacher, feats);
      const LabelMap pseudo =
          pseudo_labels(teacher_probs, labeled, cfg.pseudo_threshold);
      result.params.student =
          student_step(result.params.student, views[step % views.size()],
                       truth, pseudo, cfg.learning_rate);
      result.params.teacher = ema_update(result.params.teacher,
                                         result.params.student, cfg.alpha);
    }
  }
  result.student_probs = predict(result.params.student, feats);
  return result;
}

std::size_t ScheduledLabelCount(const TrainerConfig& cfg, std::size_t n,
                                std::size_t iteration) {
  const double nd = static_cast<double>(n);
  // Fractions such as 0.0002 are not exact in binary; the small slack keeps
  // 5 * 0.0002 * 50000 from flooring to 49.
  const auto initial =
      static_cast<std::size_t>(std::floor(cfg.initial_fraction * nd + 1e-9));
  const auto added = static_cast<std::size_t>(std::floor(
      static_cast<double>(iteration) * cfg.per_iter_fraction * nd + 1e-9));
  return std::min(n, initial + added);
}

std::vector<IterationReport> active_loop(const PointCloud& cloud,
                                         const TrainerConfig& cfg,
                                         const SelectionConfig& sel_cfg,
                                         std::span<const LevelSpec> levels,
                                         const LoopOptions& options) {
  ValidateTrainerConfig(cfg);
  ValidateSelectionConfig(sel_cfg);
  for (const auto& l : levels) ValidateLevel(l);
  if (!cloud.has_labels()) {
    throw Error("active_loop needs ground-truth labels as the annotator");
  }
  if (cloud.empty()) throw Error("active_loop on an empty cloud");
  const auto& gt = cloud.labels();
  const std::size_t n = cloud.size();
  const std::size_t n_classes =
      options.n_classes.value_or(*std::max_element(gt.begin(), gt.end()) + 1);
  for (ClassId g : gt) {
    if (g >= n_classes) throw Error("ground-truth label exceeds class count");
  }

  const FeatureField feats = local_geometric_features(cloud, cfg.feature_radius_m);
  const VoxelGrid fds_grid = build_grid(cloud, sel_cfg.radius_m);
  const SegmenterParams initial_params =
      SegmenterParams::Zeros(n_classes, feats.dim());

  // Initial labeled set: uniform over the scene.
  std::vector<Index> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<Index>(i);
  std::vector<Index> initial;
  {
    auto rng = DerivedRng(cfg.seed, 0, kInitialStream);
    std::sample(all.begin(), all.end(), std::back_inserter(initial),
                ScheduledLabelCount(cfg, n, 0), rng);
  }
  SelectionState state(n, initial);

  SegmenterParams params = initial_params;
  ProbabilityField probs = predict(params, feats);
  bool trained = false;
  auto train = [&] {
    if (state.labeled_count() == 0) return;
    const SegmenterParams& start =
        cfg.retrain_from_scratch ? initial_params : params;
    TrainResult tr = train_iteration(cloud, feats, state, start, cfg);
    params = std::move(tr.params.student);
    probs = std::move(tr.student_probs);
    trained = true;
  };
  train();

  std::vector<IterationReport> reports;
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    state.next_iteration();
    const std::size_t target = ScheduledLabelCount(cfg, n, it);
    const std::size_t budget =
        target > state.labeled_count() ? target - state.labeled_count() : 0;
    const std::vector<Index> unlabeled = state.unlabeled();

    SelectionResult sel;
    if (budget > 0) {
      if (!trained) {
        // Nothing to score with yet: every strategy starts from the same
        // random draw.
        const auto scores =
            score_random(n, DerivedSeed(cfg.seed, it, kColdStartStream));
        sel = top_k_select(
            rank_candidates(scores, unlabeled, RankDirection::kDescending),
            budget);
      } else {
        const auto scores =
            score_points(sel_cfg.strategy, cloud, probs, levels,
                         DerivedSeed(cfg.seed, it, kRandomScoreStream),
                         options.scoring);
        const auto ranked = rank_candidates(scores, unlabeled,
                                            DirectionFor(sel_cfg.strategy));
        if (sel_cfg.strategy == Strategy::kHmmuFds) {
          SelectionConfig c = sel_cfg;
          c.budget_k = budget;
          sel = fds_select(ranked, cloud, feats, c, fds_grid);
        } else {
          sel = top_k_select(ranked, budget);
        }
      }
    }
    state = promote_to_labeled(state, sel.selected);
    train();

    const auto pred = probs.argmax();
    const IouResult iou = miou(confusion(pred, gt, n_classes));
    IterationReport report;
    report.iteration = it;
    report.labeled_count = state.labeled_count();
    report.labeled_fraction =
        static_cast<double>(state.labeled_count()) / static_cast<double>(n);
    report.per_class_iou = iou.per_class;
    report.miou = iou.miou;
    report.selected = sel.selected;
    report.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace hpal
