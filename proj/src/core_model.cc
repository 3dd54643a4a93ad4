#include "hpal/core_model.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hpal {

const std::vector<ClassId>& PointCloud::labels() const {
  if (!gt_labels) {
    throw Error("point cloud has no ground-truth labels");
  }
  return *gt_labels;
}

std::vector<ClassId> ProbabilityField::argmax() const {
  std::vector<ClassId> out(size(), 0);
  for (std::size_t i = 0; i < size(); ++i) {
    auto r = row(i);
    out[i] = static_cast<ClassId>(std::max_element(r.begin(), r.end()) -
                                  r.begin());
  }
  return out;
}

const char* ViolationKindName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kRowCountMismatch:
      return "row-count mismatch";
    case ViolationKind::kNonFinite:
      return "non-finite value";
    case ViolationKind::kColorOutOfRange:
      return "color out of range";
    case ViolationKind::kNotSimplex:
      return "not on simplex";
    case ViolationKind::kLabelOutOfRange:
      return "label out of range";
  }
  return "unknown";
}

std::string ValidationReport::Summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

namespace {

class Reporter {
 public:
  Reporter(ValidationReport& report, std::size_t cap)
      : report_(report), cap_(cap) {}

  // Drops the violation once the cap for this (field, kind) is reached.
  void Add(ViolationKind kind, const std::string& field,
           std::optional<std::size_t> row, std::string message) {
    std::size_t n = 0;
    for (const auto& v : report_.violations) {
      if (v.kind == kind && v.field == field) ++n;
    }
    if (n >= cap_) return;
    report_.violations.push_back({kind, field, row, std::move(message)});
  }

 private:
  ValidationReport& report_;
  std::size_t cap_;
};

bool RowCountOk(Reporter& rep, const std::string& field, std::size_t got,
                std::size_t want) {
  if (got == want) return true;
  std::ostringstream os;
  os << field << ": row-count mismatch (" << got << " rows, cloud has " << want
     << ")";
  rep.Add(ViolationKind::kRowCountMismatch, field, std::nullopt, os.str());
  return false;
}

void CheckFiniteRows(Reporter& rep, const std::string& field,
                     const Matrix<double>& m) {
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (double v : m.row(i)) {
      if (!std::isfinite(v)) {
        rep.Add(ViolationKind::kNonFinite, field, i,
                field + ": row " + std::to_string(i) + " has a non-finite value");
        break;
      }
    }
  }
}

}  // namespace

ValidationReport validate_cloud(const PointCloud& cloud,
                                const ProbabilityField* probs,
                                const FeatureField* feats,
                                std::size_t max_per_kind) {
  ValidationReport report;
  Reporter rep(report, max_per_kind);
  const std::size_t n = cloud.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.positions[i];
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      rep.Add(ViolationKind::kNonFinite, "positions", i,
              "positions: row " + std::to_string(i) + " has a non-finite value");
    }
  }
  if (RowCountOk(rep, "colors", cloud.colors.size(), n)) {
    for (std::size_t i = 0; i < n; ++i) {
      for (double c : cloud.colors[i]) {
        if (!std::isfinite(c)) {
          rep.Add(ViolationKind::kNonFinite, "colors", i,
                  "colors: row " + std::to_string(i) +
                      " has a non-finite value");
          break;
        }
        if (c < 0.0 || c > 1.0) {
          rep.Add(ViolationKind::kColorOutOfRange, "colors", i,
                  "colors: row " + std::to_string(i) + " outside [0,1]");
          break;
        }
      }
    }
  }
  if (cloud.gt_labels) {
    RowCountOk(rep, "gt_labels", cloud.gt_labels->size(), n);
  }

  if (probs) {
    if (RowCountOk(rep, "probs", probs->size(), n)) {
      CheckFiniteRows(rep, "probs", probs->probs);
      for (std::size_t i = 0; i < probs->size(); ++i) {
        double sum = 0.0;
        bool negative = false;
        for (double v : probs->row(i)) {
          sum += v;
          negative |= v < 0.0;
        }
        if (!std::isfinite(sum)) continue;  // already reported
        if (negative || std::abs(sum - 1.0) > 1e-5) {
          std::ostringstream os;
          os << "probs: row " << i;
          if (negative) {
            os << " has a negative entry";
          } else {
            os << " sums to " << sum;
          }
          rep.Add(ViolationKind::kNotSimplex, "probs", i, os.str());
        }
      }
    }
    if (cloud.gt_labels && cloud.gt_labels->size() == n) {
      const auto c = probs->n_classes();
      for (std::size_t i = 0; i < n; ++i) {
        if ((*cloud.gt_labels)[i] >= c) {
          rep.Add(ViolationKind::kLabelOutOfRange, "gt_labels", i,
                  "gt_labels: row " + std::to_string(i) + " label " +
                      std::to_string((*cloud.gt_labels)[i]) + " >= " +
                      std::to_string(c) + " classes");
        }
      }
    }
  }

  if (feats && RowCountOk(rep, "feats", feats->size(), n)) {
    CheckFiniteRows(rep, "feats", feats->feats);
  }
  return report;
}

void require_valid(const PointCloud& cloud, const ProbabilityField* probs,
                   const FeatureField* feats) {
  auto report = validate_cloud(cloud, probs, feats, 4);
  if (!report.ok()) throw Error("invalid input: " + report.Summary());
}

// ---------------------------------------------------------------------------

SelectionState::SelectionState(std::size_t n_points,
                               std::span<const Index> initial_labeled)
    : is_labeled_(n_points, 0) {
  for (Index i : initial_labeled) {
    if (i >= n_points) {
      throw Error("index " + std::to_string(i) + " out of range [0, " +
                  std::to_string(n_points) + ")");
    }
    if (is_labeled_[i]) {
      throw Error("index " + std::to_string(i) + " already labeled");
    }
    is_labeled_[i] = 1;
  }
  labeled_count_ = initial_count_ = initial_labeled.size();
}

std::vector<Index> SelectionState::labeled() const {
  std::vector<Index> out;
  out.reserve(labeled_count_);
  for (std::size_t i = 0; i < is_labeled_.size(); ++i) {
    if (is_labeled_[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::vector<Index> SelectionState::unlabeled() const {
  std::vector<Index> out;
  out.reserve(is_labeled_.size() - labeled_count_);
  for (std::size_t i = 0; i < is_labeled_.size(); ++i) {
    if (!is_labeled_[i]) out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::vector<Index> SelectionState::initial_labeled() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < is_labeled_.size(); ++i) {
    if (is_labeled_[i] == 1) out.push_back(static_cast<Index>(i));
  }
  return out;
}

void SelectionState::next_iteration() {
  ++iteration_;
  selections_.emplace_back();
}

SelectionState SelectionState::FromParts(
    std::size_t n_points, std::vector<Index> initial, std::size_t iteration,
    std::vector<std::vector<Index>> selections) {
  if (selections.size() != iteration + 1) {
    throw Error("selection state: expected " + std::to_string(iteration + 1) +
                " selection lists, got " + std::to_string(selections.size()));
  }
  SelectionState state(n_points, initial);
  for (std::size_t it = 0; it < selections.size(); ++it) {
    if (it > 0) state.next_iteration();
    state = promote_to_labeled(state, selections[it]);
  }
  return state;
}

SelectionState promote_to_labeled(const SelectionState& state,
                                  std::span<const Index> indices) {
  if (indices.empty()) return state;
  SelectionState next = state;
  for (Index i : indices) {
    if (i >= next.is_labeled_.size()) {
      throw Error("index " + std::to_string(i) + " out of range [0, " +
                  std::to_string(next.is_labeled_.size()) + ")");
    }
    if (next.is_labeled_[i]) {
      throw Error("index " + std::to_string(i) + " already labeled");
    }
    next.is_labeled_[i] = 2;
  }
  next.labeled_count_ += indices.size();
  auto& bucket = next.selections_.back();
  bucket.insert(bucket.end(), indices.begin(), indices.end());
  return next;
}

}  // namespace hpal
