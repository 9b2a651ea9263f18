#include <sstream>

#include "support.hpp"

using namespace gsketch;
using namespace gsketch::testing;

TEST(NormClass, PowersOfTwo) {
  EXPECT_EQ(norm_class(1.0), 0);
  EXPECT_EQ(norm_class(1.999), 0);
  EXPECT_EQ(norm_class(2.0), 1);
  EXPECT_EQ(norm_class(0.5), -1);
  EXPECT_EQ(norm_class(0.75), -1);
}

TEST(GSampler, SingleNonzeroRowAlwaysDrawn) {
  const int n = 64, d = 4;
  Generated G = gen_example1(n, d, 3);
  MeasureSpec m;
  BoostedSampler B(sampler(d, n), 5, 0.25);
  for (int i = 0; i < n; ++i) B.process_row(i, G.A.row(i).transpose(), G.b[i]);
  B.freeze();
  Projector proj(Layout(d, 2), QueryKind::Gradient, m, G.x);
  auto R = B.replay(proj);
  Rng rng(1);
  Vec truth = proj.exact(G.A.row(0).transpose(), G.b[0]);
  for (int k = 0; k < 500; ++k) {
    SampleOutcome o = R.draw(rng);
    ASSERT_TRUE(o.ok);
    EXPECT_EQ(o.id, 0u);
    EXPECT_NEAR(o.p_hat, 1.0, 1e-9);
    EXPECT_LE((o.v - truth).norm(), 1e-9 * truth.norm());
  }
}

TEST(GSampler, ZeroMassReportsFailure) {
  const int n = 8, d = 2;
  GSampler S(sampler(d, n), 1);
  for (int i = 0; i < n; ++i) S.process_row(i, Vec::Zero(d), 1.0);
  S.freeze();
  MeasureSpec m;
  Projector proj(Layout(d, 2), QueryKind::Gradient, m, Vec::Ones(d));
  Rng rng(2);
  SampleOutcome o = S.sample_once(proj, rng);
  EXPECT_FALSE(o.ok);
  EXPECT_EQ(o.reason, FailReason::ZeroMass);
}

TEST(GSampler, DistributionTracksExactImportance) {
  const MeasureKind kinds[] = {MeasureKind::L2, MeasureKind::L1, MeasureKind::Huber};
  for (int k = 0; k < 3; ++k) {
    SCOPED_TRACE(to_string(kinds[k]));
    const int n = 48, d = 3;
    Generated G = gen_gaussian(n, d, 10 + k);
    MeasureSpec m = spec(kinds[k], 0.8);
    ExactInstance I(G.A, G.b, m);
    BoostedSampler B(sampler(d, n), 20 + k, 0.25);
    for (int i = 0; i < n; ++i) B.process_row(i, I.row(i), G.b[i]);
    B.freeze();
    Projector proj(Layout(d, 2), QueryKind::Gradient, m, G.x);
    auto R = B.replay(proj);
    Rng rng(30 + k);
    std::vector<double> cnt(n, 0);
    for (int t = 0; t < 40000; ++t) {
      SampleOutcome o = R.draw(rng);
      if (o.ok) cnt[o.id] += 1;
    }
    EXPECT_LE(total_variation(exact_importance_distribution(I, G.x), normalize(cnt)), 0.1);
  }
}

TEST(GSampler, PHatTracksTrueProbability) {
  const int n = 64, d = 4;
  Generated G = gen_gaussian(n, d, 40);
  MeasureSpec m;
  ExactInstance I(G.A, G.b, m);
  GSampler S(sampler(d, n), 41);
  for (int i = 0; i < n; ++i) S.process_row(i, I.row(i), G.b[i]);
  S.freeze();
  Projector proj(Layout(d, 2), QueryKind::Gradient, m, G.x);
  QueryState Q = S.prepare(proj);
  auto p = exact_importance_distribution(I, G.x);
  Rng rng(42);
  for (int t = 0; t < 200; ++t) {
    SampleOutcome o = S.draw(Q, rng);
    if (!o.ok) continue;
    EXPECT_NEAR(o.p_hat / p[o.id], 1.0, 0.5);
  }
}

TEST(GSampler, DeterministicUnderSeed) {
  const int n = 32, d = 3;
  Generated G = gen_gaussian(n, d, 50);
  std::string bytes[2];
  for (int r = 0; r < 2; ++r) {
    GSampler S(sampler(d, n), 51);
    for (int i = 0; i < n; ++i) S.process_row(i, G.A.row(i).transpose(), G.b[i]);
    S.freeze();
    std::ostringstream os;
    S.write(os);
    bytes[r] = os.str();
  }
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST(GSampler, RejectsMisuse) {
  GSampler S(sampler(2, 4), 1);
  EXPECT_THROW(S.process_row(0, Vec::Ones(3), 0), ContractViolation);
  MeasureSpec m;
  Projector proj(Layout(2, 2), QueryKind::Gradient, m, Vec::Ones(2));
  EXPECT_THROW(S.prepare(proj), ContractViolation);
  S.freeze();
  EXPECT_THROW(S.process_row(0, Vec::Ones(2), 0), ContractViolation);
  GSamplerParams P = sampler(2, 4);
  P.alpha = 1.5;
  EXPECT_THROW(GSampler(P, 1), ContractViolation);
}

TEST(BoostedSampler, ConsumesInstancesOnce) {
  const int n = 16, d = 2;
  Generated G = gen_gaussian(n, d, 60);
  MeasureSpec m;
  BoostedSampler B(sampler(d, n), 61, 0.5, 4);
  EXPECT_EQ(B.R(), 4);
  for (int i = 0; i < n; ++i) B.process_row(i, G.A.row(i).transpose(), G.b[i]);
  B.freeze();
  Projector proj(Layout(d, 2), QueryKind::Gradient, m, G.x);
  Rng rng(62);
  std::vector<int> used;
  while (B.remaining() > 0) {
    SampleOutcome o = B.sample_boosted(proj, rng);
    if (o.exhausted) break;
    used.push_back(o.instance);
  }
  for (size_t k = 1; k < used.size(); ++k) EXPECT_GT(used[k], used[k - 1]);
  SampleOutcome o = B.sample_boosted(proj, rng);
  EXPECT_TRUE(o.exhausted);
  EXPECT_FALSE(o.ok);
}

TEST(GSampler, HessianDrawsFollowFrobeniusNorms) {
  const int n = 24, d = 3;
  Generated G = gen_gaussian(n, d, 70);
  for (MeasureKind k : {MeasureKind::L2, MeasureKind::Huber}) {
    SCOPED_TRACE(to_string(k));
    MeasureSpec m = spec(k, 1.0);
    ExactInstance I(G.A, G.b, m);
    BoostedSampler B(sampler(d, n, 0.125, 3), 71, 0.25);
    for (int i = 0; i < n; ++i) B.process_row(i, I.row(i), G.b[i]);
    B.freeze();
    Projector proj(Layout(d, 3), QueryKind::Hessian, m, G.x);
    auto R = B.replay(proj);
    Rng rng(72);
    std::vector<double> cnt(n, 0);
    for (int t = 0; t < 30000; ++t) {
      SampleOutcome o = R.draw(rng);
      if (!o.ok) continue;
      cnt[o.id] += 1;
      Mat V = as_matrix(o.v, d);
      Mat H = data_hessian(m, I.row(o.id), G.b[o.id], G.x);
      ASSERT_LE((V - H).norm(), 0.125 * H.norm() + 1e-12);
    }
    EXPECT_LE(total_variation(normalize(hessian_norms(I, G.x)), normalize(cnt)), 0.1);
  }
}
