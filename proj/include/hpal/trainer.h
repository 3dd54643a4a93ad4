#ifndef HPAL_TRAINER_H_
#define HPAL_TRAINER_H_

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "hpal/core_model.h"
#include "hpal/metrics.h"
#include "hpal/selection.h"
#include "hpal/uncertainty.h"

namespace hpal {

// Multinomial logistic regression: logits = weights * f + bias.
struct SegmenterParams {
  Matrix<double> weights;  // C x F
  std::vector<double> bias;  // C

  static SegmenterParams Zeros(std::size_t n_classes, std::size_t dim);
  std::size_t n_classes() const { return weights.rows; }
  std::size_t dim() const { return weights.cols; }

  bool operator==(const SegmenterParams&) const = default;
};

struct TeacherStudent {
  SegmenterParams student;
  SegmenterParams teacher;

  bool operator==(const TeacherStudent&) const = default;
};

struct TrainerConfig {
  double alpha = 0.955;            // EMA keep rate
  double pseudo_threshold = 0.75;  // teacher confidence for a pseudo-label
  double learning_rate = 3.0;
  std::size_t steps = 200;  // gradient steps per active iteration
  std::uint64_t seed = 0;
  double jitter_sigma = 0.01;  // meters
  double color_sigma = 0.02;
  std::size_t iterations = 5;
  double per_iter_fraction = 0.0002;
  double initial_fraction = 0.0;
  double feature_radius_m = 0.15;
  // Augmented clouds drawn per active iteration; gradient steps cycle
  // through them.
  std::size_t augment_views = 2;
  bool retrain_from_scratch = false;

  bool operator==(const TrainerConfig&) const = default;
};

// Throws Error naming the offending field.
void ValidateTrainerConfig(const TrainerConfig& cfg);

// Sorted by point index.
using LabelMap = std::vector<std::pair<Index, ClassId>>;

// Row-wise softmax of the logits. Throws Error on a dimension mismatch.
ProbabilityField predict(const SegmenterParams& params,
                         const FeatureField& feats);

// Gaussian position jitter and color noise (colors clamped to [0,1]).
PointCloud augment(const PointCloud& cloud, double jitter_sigma,
                   double color_sigma, std::mt19937_64& rng);

// Argmax class of every point outside `labeled` whose teacher confidence
// strictly exceeds `threshold`.
LabelMap pseudo_labels(const ProbabilityField& teacher_probs,
                       std::span<const Index> labeled, double threshold);

// Mean cross-entropy over `targets` and its gradient with respect to the
// parameters.
double cross_entropy(const SegmenterParams& params, const FeatureField& feats,
                     const LabelMap& targets);
SegmenterParams cross_entropy_gradient(const SegmenterParams& params,
                                       const FeatureField& feats,
                                       const LabelMap& targets);

// One full-batch gradient-descent step. Throws Error on empty targets.
SegmenterParams student_step(const SegmenterParams& params,
                             const FeatureField& feats,
                             const LabelMap& targets, double learning_rate);

// One step on the sum of the mean cross-entropy over the true labels and the
// mean cross-entropy over the pseudo-labels, so that each kind of target
// carries equal weight however many pseudo-labels there are. An empty part
// contributes nothing. Throws Error when both are empty.
SegmenterParams student_step(const SegmenterParams& params,
                             const FeatureField& feats, const LabelMap& truth,
                             const LabelMap& pseudo, double learning_rate);

// alpha * teacher + (1 - alpha) * student, elementwise.
SegmenterParams ema_update(const SegmenterParams& teacher,
                           const SegmenterParams& student, double alpha);

struct TrainResult {
  TeacherStudent params;
  ProbabilityField student_probs;  // on the clean features
};

// Runs cfg.steps rounds of teacher prediction, pseudo-labeling, a student
// step on augmented features and an EMA update. The teacher starts as a copy
// of the student. Randomness derives from (cfg.seed, state.iteration()).
TrainResult train_iteration(const PointCloud& cloud,
                            const FeatureField& feats,
                            const SelectionState& state,
                            const SegmenterParams& student,
                            const TrainerConfig& cfg);

struct LoopOptions {
  ScoreOptions scoring;
  // Defaults to 1 + the largest ground-truth label.
  std::optional<std::size_t> n_classes;
};

// Labeled count after `iteration` active iterations:
// floor((initial_fraction + iteration * per_iter_fraction) * n), capped at n.
std::size_t ScheduledLabelCount(const TrainerConfig& cfg, std::size_t n,
                                std::size_t iteration);

// Full active-learning simulation using ground truth as the annotator.
// sel_cfg.budget_k is ignored; budgets come from the fraction schedule.
std::vector<IterationReport> active_loop(const PointCloud& cloud,
                                         const TrainerConfig& cfg,
                                         const SelectionConfig& sel_cfg,
                                         std::span<const LevelSpec> levels,
                                         const LoopOptions& options = {});

}  // namespace hpal

#endif  // HPAL_TRAINER_H_
