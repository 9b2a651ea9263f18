#include "support.hpp"

using namespace gsketch;
using namespace gsketch::testing;

TEST(LevelGrid, ClassifiesIntoHalfOpenIntervals) {
  for_cases(1, 200, [](Gen& g) {
    double alpha = g.unif(0.05, 0.5), gamma = g.unif(0.5, 1), M = std::exp(g.unif(-5, 5));
    int K = g.integer(5, 80);
    LevelGrid grid(alpha, gamma, M, K);
    for (int k = 0; k < 50; ++k) {
      double v = M * std::exp(g.unif(-12, 3));
      int j = grid.level_of(v);
      if (j == 0) {
        EXPECT_GE(v, grid.boundary(1));
      } else if (j <= K) {
        EXPECT_GE(v, grid.lower(j));
        EXPECT_LT(v, grid.upper(j));
      } else {
        EXPECT_LT(v, grid.boundary(K + 1));
      }
    }
    // Boundaries themselves land in the level they open.
    for (int j = 1; j <= K; ++j) EXPECT_EQ(grid.level_of(grid.lower(j)), j);
  });
}

TEST(LevelGrid, OracleSharesBoundaries) {
  std::vector<double> norms = {0.5, 1, 2, 4, 8};
  LevelGrid grid(0.25, 0.75, 10, 30);
  ExactLevels L = exact_level_sets(norms, 0.75, 0.25, 10, 30);
  for (size_t i = 0; i < norms.size(); ++i) EXPECT_EQ(L.level[i], grid.level_of(norms[i]));
  double mass = 0;
  for (double m : L.mass) mass += m;
  EXPECT_DOUBLE_EQ(mass, 15.5);
}

TEST(LevelGrid, SingleRowLandsInOneLevel) {
  ExactLevels L = exact_level_sets(std::vector<double>{3.0}, 0.9, 0.1, 3.0, 50);
  int hits = 0;
  for (int c : L.count) hits += c;
  EXPECT_EQ(hits, 1);
}

TEST(DepthSchedule, MonotoneAndScaled) {
  GSamplerParams P = sampler(2, 4096, 0.125);
  DepthSchedule S(P);
  int prev = 1;
  for (int j = 0; j <= P.K(); ++j) {
    int s = S.substream(j);
    EXPECT_GE(s, prev);
    EXPECT_LE(s, P.L());
    EXPECT_DOUBLE_EQ(S.scale(j), std::ldexp(1.0, s - 1));
    prev = s;
  }
  EXPECT_EQ(S.substream(0), 1);
}

TEST(DummySpec, TotalIsHalfTheGuess) {
  for_cases(2, 100, [](Gen& g) {
    GSamplerParams P = sampler(2, 16 + g.integer(0, 100000), g.unif(0.05, 0.45));
    DummySpec D(P);
    double M = std::exp(g.unif(-3, 3));
    double t = D.total_mass(M);
    if (D.first_level() > D.K()) {
      EXPECT_EQ(t, 0);
      return;
    }
    EXPECT_LE(t, M / 2);
    EXPECT_NEAR(t, M / 2, 1e-9 * M);
    for (int j = 1; j < D.first_level(); ++j) EXPECT_EQ(D.count(j), 0);
  });
}

namespace {

ClassCandidates exact_candidates(const std::vector<double>& norms, int L) {
  ClassCandidates C;
  C.by_sub.resize(L + 1);
  for (size_t i = 0; i < norms.size(); ++i) {
    C.by_sub[1].push_back(Candidate{i, Vec::Constant(1, norms[i]), norms[i]});
    C.max_norm = std::max(C.max_norm, norms[i]);
  }
  C.rows = norms.size();
  return C;
}

}  // namespace

TEST(Estimator, EmptyCandidatesGiveZero) {
  GSamplerParams P = sampler(2, 64);
  LevelAggregator agg(P);
  ClassCandidates C;
  EXPECT_EQ(agg.guess_and_verify(C, 0.75, 0.5).value, 0);
}

TEST(Estimator, ExactCandidatesRecoverMass) {
  // All rows sit in substream 1 here, so only levels read from substream 1
  // count; keep norms within a narrow band so every row lands in one.
  for_cases(3, 100, [](Gen& g) {
    GSamplerParams P = sampler(2, 64 + g.integer(0, 1000));
    LevelAggregator agg(P);
    int n = g.integer(1, 40);
    std::vector<double> norms;
    double F = 0;
    for (int i = 0; i < n; ++i) {
      norms.push_back(std::exp(g.unif(0, 1.5)));
      F += norms.back();
    }
    ClassCandidates C = exact_candidates(norms, P.L());
    MassEstimate e = agg.guess_and_verify(C, g.unif(0.5, 1), 0.5);
    EXPECT_GE(e.value, F / 2);
    EXPECT_LE(e.value, 2 * F);
  });
}

TEST(Estimator, SketchedMassWithinFactorTwo) {
  MeasureSpec m;
  for_cases(4, 40, [&](Gen& g) {
    int n = g.integer(20, 200), d = g.integer(1, 4);
    Mat A = g.rows(n, d, 2);
    Vec b = g.labels(n), x = g.vec(d);
    ExactInstance I(A, b, m);
    GSampler S(sampler(d, n), g.integer(0, 1 << 30));
    for (int i = 0; i < n; ++i) S.process_row(i, I.row(i), b[i]);
    S.freeze();
    Projector proj(Layout(d, 2), QueryKind::Gradient, m, x);
    double F = 0;
    for (double v : gradient_norms(I, x)) F += v;
    double est = estimate_mass(S, proj, 0.5).value;
    EXPECT_GE(est, F / 2);
    EXPECT_LE(est, 2 * F);
  });
}
