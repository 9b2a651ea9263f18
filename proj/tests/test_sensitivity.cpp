#include <set>

#include "support.hpp"

using namespace gsketch;
using namespace gsketch::testing;

TEST(BoundedSimplex, SmallLp) {
  // max x + y  s.t.  x + 2y = 2,  0 <= x <= 1,  y >= 0.
  Mat A(1, 2);
  A << 1, 2;
  Vec rhs(1), c(2), lb = Vec::Zero(2), ub(2);
  rhs << 2;
  c << 1, 1;
  ub << 1, BoundedSimplex::kInf;
  LPResult r = BoundedSimplex().solve(A, rhs, c, lb, ub);
  ASSERT_EQ(r.status, LPResult::Optimal);
  EXPECT_NEAR(r.value, 1.5, 1e-12);
}

TEST(BoundedSimplex, DetectsInfeasibleAndUnbounded) {
  Mat A(1, 1);
  A << 1;
  Vec rhs(1);
  rhs << 5;
  Vec c = Vec::Ones(1), lb = Vec::Zero(1), ub = Vec::Ones(1);
  EXPECT_EQ(BoundedSimplex().solve(A, rhs, c, lb, ub).status, LPResult::Infeasible);
  Mat B(1, 2);
  B << 1, -1;
  Vec r0 = Vec::Zero(1), c2 = Vec::Ones(2), lb2 = Vec::Zero(2), ub2 = Vec::Constant(2, BoundedSimplex::kInf);
  EXPECT_EQ(BoundedSimplex().solve(B, r0, c2, lb2, ub2).status, LPResult::Unbounded);
}

TEST(Sensitivity, ClosedFormCases) {
  Vec e0 = Vec::Unit(2, 0), e1 = Vec::Unit(2, 1);
  EXPECT_NEAR(l1_sensitivity({e0, e0}, 0), 0.5, 1e-9);
  EXPECT_NEAR(l1_sensitivity({e0, e1}, 0), 1.0, 1e-9);
  EXPECT_NEAR(l1_sensitivity({e0}, 0), 1.0, 1e-12);
  EXPECT_EQ(l1_sensitivity({Vec::Zero(2), e0}, 0), 0.0);
  EXPECT_NEAR(l1_sensitivity({e0, e0, e0, e1}, 3), 1.0, 1e-9);
}

TEST(Sensitivity, MatchesGridSearchIn2d) {
  for_cases(1, 20, [](Gen& g) {
    int n = g.integer(2, 12);
    std::vector<Vec> rows;
    for (int i = 0; i < n; ++i) rows.push_back(g.vec(2));
    double best = 0;
    for (int k = 0; k < 20000; ++k) {
      double th = M_PI * k / 20000;
      Vec x(2);
      x << std::cos(th), std::sin(th);
      double den = 0;
      for (const auto& r : rows) den += std::abs(r.dot(x));
      best = std::max(best, std::abs(rows[0].dot(x)) / den);
    }
    double s = l1_sensitivity(rows, 0);
    EXPECT_GE(s, best - 1e-9);
    EXPECT_LE(s, best + 1e-3);
  });
}

TEST(Sensitivity, SqrtLeverageUpperBounds) {
  for_cases(2, 30, [](Gen& g) {
    int n = g.integer(3, 30), d = g.integer(1, 4);
    std::vector<Vec> rows;
    Mat G = Mat::Zero(d, d);
    for (int i = 0; i < n; ++i) {
      rows.push_back(g.vec(d) * std::exp(g.unif(-1, 1)));
      G += rows.back() * rows.back().transpose();
    }
    for (int i = 0; i < n; ++i) EXPECT_GE(sqrt_leverage(G, rows[i]) + 1e-9, l1_sensitivity(rows, i));
  });
}

TEST(Sensitivity, ThresholdTestAgreesWithLp) {
  for_cases(3, 10, [](Gen& g) {
    int n = g.integer(5, 60), d = g.integer(1, 4);
    Mat A = g.rows(n, d, 1);
    Vec b = g.labels(n);
    auto s = exact_sensitivities(A, b);
    for (int i = 0; i < n; ++i) {
      for (double thr : {0.01, 0.1, 0.3, 0.9}) {
        if (std::abs(s[i] - thr) < 1e-6) continue;
        EXPECT_EQ(sensitivity_at_least(A, b, i, thr), s[i] >= thr);
      }
    }
  });
}

TEST(Sensitivity, TotalPerClassBoundedByDimension) {
  Gen g(4);
  const int n = 120, d = 3;
  Mat A = g.rows(n, d, 0.3);
  Vec b = g.labels(n);
  auto s = exact_sensitivities(A, b);
  std::map<int, double> per_class;
  for (int i = 0; i < n; ++i) per_class[norm_class(A.row(i).norm())] += s[i];
  for (const auto& kv : per_class) EXPECT_LE(kv.second, d + 1 + 1e-6);
}

TEST(StreamingSensitivity, RetainedSupersetOfSensitiveRows) {
  for_cases(5, 6, [](Gen& g) {
    int n = g.integer(60, 200), d = g.integer(2, 4);
    Mat A = g.rows(n, d, 1.5);
    Vec b = g.labels(n);
    // A few outliers.
    for (int i = 0; i < 5; ++i) A.row(g.integer(0, n - 1)) *= 20;
    SensitivityConfig cfg;
    cfg.threshold_override = g.unif(0.02, 0.2);
    cfg.batch = g.integer(4, 64);
    StreamingSensitivity S(cfg);
    std::set<uint64_t> demoted;
    for (int i = 0; i < n; ++i)
      for (const auto& r : S.observe(i, A.row(i).transpose(), b[i]).demoted) demoted.insert(r.id);
    for (const auto& r : S.finalize()) demoted.insert(r.id);
    std::set<uint64_t> kept;
    for (const auto& r : S.retained()) kept.insert(r.id);
    for (uint64_t id : kept) EXPECT_EQ(demoted.count(id), 0u);
    for (int i = 0; i < n; ++i) {
      if (sensitivity_at_least(A, b, i, cfg.threshold())) {
        EXPECT_EQ(kept.count(i), 1u) << "row " << i;
      }
    }
  });
}

TEST(FrobeniusShare, KeepsLargeShares) {
  SensitivityConfig cfg;
  cfg.threshold_override = 0.2;
  cfg.batch = 2;
  FrobeniusShareRetention R(cfg);
  R.observe(0, Vec::Constant(1, 1), 0);
  R.observe(1, Vec::Constant(1, 3), 0);
  R.observe(2, Vec::Constant(1, 0.5), 0);
  R.observe(3, Vec::Constant(1, 0.5), 0);
  R.finalize();
  std::set<uint64_t> kept;
  for (const auto& r : R.retained()) kept.insert(r.id);
  // Shares: 1/10.5, 9/10.5, 0.25/10.5 each.
  EXPECT_EQ(kept, std::set<uint64_t>({1}));
}

TEST(RetainAll, KeepsNonzeroRows) {
  RetainAll R;
  EXPECT_TRUE(R.observe(0, Vec::Ones(2), 0).retained);
  EXPECT_FALSE(R.observe(1, Vec::Zero(2), 0).retained);
  EXPECT_EQ(R.retained().size(), 1u);
}
