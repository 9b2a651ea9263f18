#include <sstream>

#include "support.hpp"

using namespace gsketch;
using namespace gsketch::testing;

namespace {

SGDConfig config(uint64_t n, int d, int T, uint64_t seed) {
  SGDConfig c;
  c.n = n;
  c.d = d;
  c.T = T;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(BucketConfig, Sizes) {
  BucketConfig B;
  B.T = 10;
  B.dim_for_counts = 4;
  EXPECT_EQ(B.beta(), 40);
  EXPECT_EQ(B.samplers_per_bucket(), static_cast<int>(std::ceil(2 * std::log2(40.0))));
  EXPECT_EQ(B.boost(), 8);
}

TEST(SGD, ConvergesOnLeastSquares) {
  const int n = 300, d = 4;
  Generated G = gen_lstsq(n, d, 1);
  ExactInstance I(G.A, G.b, MeasureSpec{});
  SGDEngine e(config(n, d, 400, 2));
  for (int i = 0; i < n; ++i) e.ingest(i, I.row(i), G.b[i]);
  SGDTrajectory tr = e.run(Vec::Zero(d));
  double Fs = objective(I, least_squares_solution(I));
  EXPECT_LE(objective(I, tr.average()) - Fs, 0.05 * (objective(I, Vec::Zero(d)) - Fs));
  EXPECT_TRUE(tr.fresh());
  EXPECT_EQ(tr.iterates.size(), 401u);
}

TEST(SGD, SketchedPathUsesEachInstanceOnce) {
  const int n = 200, d = 3, T = 20;
  Generated G = gen_lstsq(n, d, 3);
  SGDConfig c = config(n, d, T, 4);
  c.use_sensitivity = false;
  c.sampler.reps_override = 3;
  SGDEngine e(c);
  for (int i = 0; i < n; ++i) e.ingest(i, G.A.row(i).transpose(), G.b[i]);
  SGDTrajectory tr = e.run(Vec::Zero(d));
  EXPECT_EQ(tr.heavy_draws, 0);
  EXPECT_TRUE(tr.fresh());
  EXPECT_GE(static_cast<int>(tr.usage.size()), T);
  for (const auto& s : tr.steps) {
    EXPECT_FALSE(s.heavy);
    EXPECT_GE(s.instance, 0);
  }
}

TEST(SGD, ExhaustionIsReported) {
  // One pool sampler per bucket and one bucket: the second step has nothing
  // fresh left.
  const int n = 50, d = 2;
  Generated G = gen_gaussian(n, d, 5);
  SGDConfig c = config(n, d, 5, 6);
  c.use_sensitivity = false;
  c.C_beta = 0.2;
  c.C_s = 0.01;
  c.sampler.reps_override = 3;
  SGDEngine e(c);
  for (int i = 0; i < n; ++i) e.ingest(i, G.A.row(i).transpose(), G.b[i]);
  EXPECT_THROW(e.run(Vec::Zero(d)), FreshnessExhausted);
}

TEST(SGD, HeavyRowsAreExact) {
  const int n = 100, d = 3;
  Generated G = gen_lstsq(n, d, 7);
  SGDEngine e(config(n, d, 10, 8));
  for (int i = 0; i < n; ++i) e.ingest(i, G.A.row(i).transpose(), G.b[i]);
  e.freeze();
  EXPECT_EQ(e.buckets().heavy_count(), static_cast<size_t>(n));
  SGDTrajectory tr;
  Vec x = Vec::Zero(d);
  e.step(x, 0, tr);
  ASSERT_EQ(tr.steps.size(), 1u);
  const StepRecord& s = tr.steps[0];
  EXPECT_TRUE(s.heavy);
  Projector proj(Layout(d, 2), QueryKind::Gradient, MeasureSpec{}, x);
  ExactInstance I(G.A, G.b, MeasureSpec{});
  auto p = exact_importance_distribution(I, x);
  EXPECT_NEAR(s.p_hat, p[s.row], 1e-12);
}

TEST(SGD, IngestAfterRunRejected) {
  SGDEngine e(config(10, 2, 2, 1));
  e.ingest(0, Vec::Ones(2), 1);
  e.run(Vec::Zero(2));
  EXPECT_THROW(e.ingest(1, Vec::Ones(2), 1), ContractViolation);
}

TEST(SGD, RegularizerAppliedExactly) {
  // All-zero data: each step only moves by the ridge term.
  const int n = 10, d = 2;
  SGDConfig c = config(n, d, 3, 1);
  c.measure = spec(MeasureKind::Ridge, 1, 0.5);
  c.eta = 0.1;
  SGDEngine e(c);
  for (int i = 0; i < n; ++i) e.ingest(i, Vec::Zero(d), 0);
  SGDTrajectory tr = e.run(Vec::Ones(d));
  EXPECT_TRUE(tr.steps[0].null_step);
  EXPECT_NEAR(tr.iterates[3][0], std::pow(1 - 0.1 * 2 * 0.5, 3), 1e-12);
}

TEST(Baselines, FullGradientDescentConverges) {
  const int n = 100, d = 3;
  Generated G = gen_lstsq(n, d, 9);
  ExactInstance I(G.A, G.b, MeasureSpec{});
  SGDConfig c = config(n, d, 200, 1);
  c.eta = 0.1;
  SGDTrajectory tr = run_baseline(I, Vec::Zero(d), c, BaselineMode::FullGD);
  EXPECT_LE((tr.iterates.back() - least_squares_solution(I)).norm(), 1e-6);
}

TEST(Baselines, ExactImportanceIsUnbiased) {
  Generated G = gen_gaussian(20, 2, 10);
  ExactInstance I(G.A, G.b, MeasureSpec{});
  SGDConfig c = config(20, 2, 1, 0);
  c.eta = 1;
  Vec mean = Vec::Zero(2);
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    c.seed = r;
    SGDTrajectory tr = run_baseline(I, G.x, c, BaselineMode::ExactImportance);
    mean += G.x - tr.iterates[1];
  }
  mean /= reps;
  EXPECT_LE((mean - full_gradient(I, G.x)).norm(), 0.05 * full_gradient(I, G.x).norm() + 0.05);
}

TEST(SGD, TrajectoryCsvIsDeterministic) {
  const int n = 80, d = 3;
  Generated G = gen_lstsq(n, d, 11);
  ExactInstance I(G.A, G.b, MeasureSpec{});
  std::string out[2];
  for (int r = 0; r < 2; ++r) {
    SGDEngine e(config(n, d, 30, 12));
    for (int i = 0; i < n; ++i) e.ingest(i, I.row(i), G.b[i]);
    std::ostringstream os;
    write_trajectory_csv(os, e.run(Vec::Zero(d)), &I);
    out[r] = os.str();
  }
  EXPECT_EQ(out[0], out[1]);
  EXPECT_EQ(out[0].substr(0, out[0].find('\n')), "step,bucket,instance,row,heavy,p_hat,w_norm,var_proxy,F");
}

namespace {

struct ReplayStats {
  Vec mean;
  double var = 0;  // around the true gradient
};

ReplayStats replay_steps(const Generated& G, const ExactInstance& I, int draws, uint64_t seed) {
  const int n = I.n(), d = I.d();
  BoostedSampler B(sampler(d, n), derive_seed(seed, {1}), 0.25);
  for (int i = 0; i < n; ++i) B.process_row(i, G.A.row(i).transpose(), G.b[i]);
  B.freeze();
  Projector proj(Layout(d, 2), QueryKind::Gradient, I.measure, G.x);
  auto R = B.replay(proj);
  Rng rng(derive_seed(seed, {2}));
  Vec truth = full_gradient(I, G.x);
  ReplayStats st;
  st.mean = Vec::Zero(d);
  int ok = 0;
  for (int k = 0; k < draws; ++k) {
    SampleOutcome o = R.draw(rng);
    if (!o.ok) continue;
    Vec y = o.v / (n * o.p_hat);
    st.mean += y;
    st.var += (y - truth).squaredNorm();
    ++ok;
  }
  st.mean /= ok;
  st.var /= ok;
  return st;
}

}  // namespace

TEST(SGD, StepDirectionAlignsWithGradient) {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    Generated G = gen_gaussian(128, 4, seed);
    ExactInstance I(G.A, G.b, MeasureSpec{});
    Vec truth = full_gradient(I, G.x);
    Vec mean = replay_steps(G, I, 10000, seed).mean;
    EXPECT_GE(mean.dot(truth) / (mean.norm() * truth.norm()), 0.95);
  }
}

TEST(SGD, VarianceWithinConstantOfOptimal) {
  const int n = 256, d = 4;
  Generated gens[] = {gen_example1(n, d, 1), gen_example2(n, d, 1), gen_example3(n, d, 1.0 / 16, 1)};
  for (const Generated& G : gens) {
    ExactInstance I(G.A, G.b, MeasureSpec{});
    Variances V = exact_variances(I, G.x);
    ReplayStats st = replay_steps(G, I, 10000, 7);
    EXPECT_LE(st.var, 8 * V.sigma2_opt + 1e-9 * V.m2_opt);
    // Uniform sampling, measured the same way.
    Rng rng(8);
    Vec truth = full_gradient(I, G.x);
    double uni = 0;
    for (int k = 0; k < 10000; ++k) uni += (data_gradient(I, static_cast<int>(rng() % n), G.x) - truth).squaredNorm();
    EXPECT_LE(st.var, uni / 10000);
  }
}
