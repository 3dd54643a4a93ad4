#ifndef HPAL_CORE_MODEL_H_
#define HPAL_CORE_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpal {

// All library failures are reported through this exception type. The message
// is meant to be shown to a user as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Index = std::uint32_t;
using ClassId = std::uint32_t;
using Vec3 = std::array<double, 3>;

// Dense row-major matrix.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{})
      : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

// Positions in meters, colors normalized to [0,1], optional ground truth.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::optional<std::vector<ClassId>> gt_labels;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_labels() const { return gt_labels.has_value(); }
  // Throws Error when ground truth is absent.
  const std::vector<ClassId>& labels() const;

  bool operator==(const PointCloud&) const = default;
};

// N x C per-point softmax outputs. The class count is carried explicitly so
// that one-class fields are representable.
struct ProbabilityField {
  Matrix<double> probs;

  ProbabilityField() = default;
  explicit ProbabilityField(Matrix<double> m) : probs(std::move(m)) {}
  ProbabilityField(std::size_t n, std::size_t n_classes, double fill = 0.0)
      : probs(n, n_classes, fill) {}

  std::size_t size() const { return probs.rows; }
  std::size_t n_classes() const { return probs.cols; }
  std::span<const double> row(std::size_t i) const { return probs.row(i); }
  std::span<double> row(std::size_t i) { return probs.row(i); }
  // Index of the largest entry of each row; ties go to the lower class id.
  std::vector<ClassId> argmax() const;
};

// N x F per-point descriptors.
struct FeatureField {
  Matrix<double> feats;

  FeatureField() = default;
  explicit FeatureField(Matrix<double> m) : feats(std::move(m)) {}
  FeatureField(std::size_t n, std::size_t dim) : feats(n, dim, 0.0) {}

  std::size_t size() const { return feats.rows; }
  std::size_t dim() const { return feats.cols; }
  std::span<const double> row(std::size_t i) const { return feats.row(i); }
  std::span<double> row(std::size_t i) { return feats.row(i); }
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kRowCountMismatch,
  kNonFinite,
  kColorOutOfRange,
  kNotSimplex,
  kLabelOutOfRange,
};

const char* ViolationKindName(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string field;            // "positions", "probs", ...
  std::optional<std::size_t> row;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string Summary() const;
  bool operator==(const ValidationReport&) const = default;
};

// Checks every invariant of the cloud and, when given, the paired fields.
// Reports at most `max_per_kind` violations of each kind per field so that a
// badly broken file does not produce millions of lines.
ValidationReport validate_cloud(const PointCloud& cloud,
                                const ProbabilityField* probs = nullptr,
                                const FeatureField* feats = nullptr,
                                std::size_t max_per_kind = 32);

// Throws Error with the report summary when validation fails.
void require_valid(const PointCloud& cloud,
                   const ProbabilityField* probs = nullptr,
                   const FeatureField* feats = nullptr);

// ---------------------------------------------------------------------------
// Labeled / unlabeled bookkeeping for one scene.
//
// Iteration 0 holds the initial labeled set, which is not counted against the
// budget. Each call to next_iteration() opens a new entry in
// selections_per_iteration that subsequent promotions are recorded under.
class SelectionState {
 public:
  SelectionState() = default;
  SelectionState(std::size_t n_points, std::span<const Index> initial_labeled);

  std::size_t n_points() const { return is_labeled_.size(); }
  bool is_labeled(Index i) const { return is_labeled_.at(i) != 0; }
  std::vector<Index> labeled() const;
  std::vector<Index> unlabeled() const;
  std::size_t labeled_count() const { return labeled_count_; }
  std::size_t initial_count() const { return initial_count_; }
  std::size_t iteration() const { return iteration_; }
  std::size_t budget_spent() const { return labeled_count_ - initial_count_; }
  const std::vector<std::vector<Index>>& selections_per_iteration() const {
    return selections_;
  }

  // Opens the next iteration.
  void next_iteration();

  bool operator==(const SelectionState&) const = default;

  // Reconstructs a state from its serialized parts, validating all
  // invariants. Used by data_io.
  static SelectionState FromParts(std::size_t n_points,
                                  std::vector<Index> initial,
                                  std::size_t iteration,
                                  std::vector<std::vector<Index>> selections);
  std::vector<Index> initial_labeled() const;

 private:
  friend SelectionState promote_to_labeled(const SelectionState&,
                                           std::span<const Index>);
  std::vector<std::uint8_t> is_labeled_;  // 0 unlabeled, 1 initial, 2 promoted
  std::size_t labeled_count_ = 0;
  std::size_t initial_count_ = 0;
  std::size_t iteration_ = 0;
  std::vector<std::vector<Index>> selections_ = {{}};
};

// Moves `indices` from unlabeled to labeled under the current iteration.
// Throws Error naming the first index that is out of range, already labeled
// or repeated.
SelectionState promote_to_labeled(const SelectionState& state,
                                  std::span<const Index> indices);

}  // namespace hpal

#endif  // HPAL_CORE_MODEL_H_
