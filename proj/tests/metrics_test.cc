#include "hpal/metrics.h"

#include <gtest/gtest.h>

#include <numeric>

#include "generators.h"

namespace hpal {
namespace {

using ::hpal::testing::Gen;

TEST(Confusion, PerfectPredictionIsDiagonal) {
  std::vector<ClassId> gt = {0, 1, 2, 2, 1, 0, 0, 1, 2, 0};
  const auto cm = confusion(gt, gt, 3);
  std::uint64_t diag = 0;
  for (std::size_t k = 0; k < 3; ++k) diag += cm.counts(k, k);
  EXPECT_EQ(diag, 10u);
  EXPECT_EQ(cm.total(), 10u);
}

TEST(Confusion, SingleCellAndEmpty) {
  const std::vector<ClassId> pred(7, 0), gt(7, 1);
  const auto cm = confusion(pred, gt, 2);
  EXPECT_EQ(cm.counts(1, 0), 7u);
  const auto empty = confusion({}, {}, 4);
  EXPECT_EQ(empty.total(), 0u);
  EXPECT_EQ(empty.n_classes(), 4u);
}

TEST(Confusion, Errors) {
  const std::vector<ClassId> a = {0, 1}, b = {0}, c = {0, 5};
  EXPECT_THROW(confusion(a, b, 2), Error);
  EXPECT_THROW(confusion(c, a, 2), Error);
}

TEST(Miou, Examples) {
  const std::vector<ClassId> gt = {0, 0, 1, 1};
  EXPECT_EQ(miou(confusion(gt, gt, 2)).miou, 1.0);
  const std::vector<ClassId> wrong = {1, 1, 0, 0};
  EXPECT_EQ(miou(confusion(wrong, gt, 2)).miou, 0.0);

  const std::vector<ClassId> pred = {0, 1, 1, 1};
  const IouResult r = miou(confusion(pred, gt, 2));
  EXPECT_NEAR(*r.per_class[0], 0.5, 1e-15);
  EXPECT_NEAR(*r.per_class[1], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.miou, 7.0 / 12.0, 1e-15);
}

TEST(Miou, AbsentClassesAreExcluded) {
  const std::vector<ClassId> gt = {0, 2}, pred = {0, 2};
  const IouResult r = miou(confusion(pred, gt, 4));
  EXPECT_FALSE(r.per_class[1].has_value());
  EXPECT_FALSE(r.per_class[3].has_value());
  EXPECT_EQ(r.miou, 1.0);
  EXPECT_THROW(miou(confusion({}, {}, 3)), Error);
}

// Hand-rolled per-class IoU from the label vectors, no confusion matrix.
double NaiveMiou(const std::vector<ClassId>& pred,
                 const std::vector<ClassId>& gt, std::size_t c) {
  double sum = 0.0;
  int used = 0;
  for (ClassId k = 0; k < c; ++k) {
    int inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      inter += pred[i] == k && gt[i] == k;
      uni += pred[i] == k || gt[i] == k;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / uni;
    ++used;
  }
  return sum / used;
}

TEST(MiouProperty, MatchesNaiveBoundedAndPermutationInvariant) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Gen g(seed);
    const std::size_t c = g.Int(1, 10);
    const std::size_t n = g.Int(1, 300);
    std::vector<ClassId> pred(n), gt(n);
    for (std::size_t i = 0; i < n; ++i) {
      gt[i] = static_cast<ClassId>(g.Int(0, c - 1));
      pred[i] = g.Coin(0.6) ? gt[i] : static_cast<ClassId>(g.Int(0, c - 1));
    }
    const auto cm = confusion(pred, gt, c);
    ASSERT_EQ(cm.total(), n);
    const IouResult r = miou(cm);
    ASSERT_NEAR(r.miou, NaiveMiou(pred, gt, c), 1e-12);
    ASSERT_GE(r.miou, 0.0);
    ASSERT_LE(r.miou, 1.0);
    for (const auto& v : r.per_class) {
      if (v) {
        ASSERT_GE(*v, 0.0);
        ASSERT_LE(*v, 1.0);
      }
    }
    std::vector<ClassId> perm(c);
    std::iota(perm.begin(), perm.end(), ClassId{0});
    std::shuffle(perm.begin(), perm.end(), g.rng());
    std::vector<ClassId> pp(n), pg(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = perm[pred[i]];
      pg[i] = perm[gt[i]];
    }
    ASSERT_NEAR(miou(confusion(pp, pg, c)).miou, r.miou, 1e-12);
  }
}

std::vector<IterationReport> Reports(std::vector<double> mious) {
  std::vector<IterationReport> out;
  for (std::size_t i = 0; i < mious.size(); ++i) {
    IterationReport r;
    r.iteration = i + 1;
    r.miou = mious[i];
    out.push_back(r);
  }
  return out;
}

TEST(CompareStrategies, SingleRowHasNoDelta) {
  const auto t = compare_strategies({{"random", Reports({0.3, 0.4})}});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_FALSE(t.rows[0].delta_vs_random.has_value());
  EXPECT_EQ(t.rows[0].final_miou, 0.4);
}

TEST(CompareStrategies, DeltaAgainstRandomAndOrdering) {
  const auto t = compare_strategies({{"random", Reports({0.4, 0.50})},
                                     {"hmmu_fds", Reports({0.45, 0.55})},
                                     {"mmu", Reports({0.2, 0.50})}});
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].strategy, "hmmu_fds");
  EXPECT_NEAR(*t.rows[0].delta_vs_random, 0.05, 1e-12);
  // Equal finals fall back to name order.
  EXPECT_EQ(t.rows[1].strategy, "mmu");
  EXPECT_EQ(t.rows[2].strategy, "random");
  EXPECT_EQ(*t.rows[1].delta_vs_random, 0.0);
}

TEST(CompareStrategies, LengthMismatchThrows) {
  EXPECT_THROW(compare_strategies({{"a", Reports({0.1})}, {"b", Reports({0.1, 0.2})}}),
               Error);
}

TEST(MeanReports, AveragesMiouAndPerClass) {
  auto a = Reports({0.2, 0.4});
  auto b = Reports({0.4, 0.8});
  a[1].per_class_iou = {0.5, std::nullopt};
  b[1].per_class_iou = {0.7, 0.9};
  a[1].labeled_count = 10;
  b[1].labeled_count = 10;
  const std::vector<std::vector<IterationReport>> runs = {a, b};
  const auto m = MeanReports(runs);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_NEAR(m[0].miou, 0.3, 1e-15);
  EXPECT_NEAR(m[1].miou, 0.6, 1e-15);
  EXPECT_NEAR(*m[1].per_class_iou[0], 0.6, 1e-15);
  EXPECT_NEAR(*m[1].per_class_iou[1], 0.9, 1e-15);
  EXPECT_EQ(m[1].labeled_count, 10u);
  const std::vector<std::vector<IterationReport>> bad = {a, Reports({0.1})};
  EXPECT_THROW(MeanReports(bad), Error);
}

}  // namespace
}  // namespace hpal
