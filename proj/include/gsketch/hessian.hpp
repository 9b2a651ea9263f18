#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gsketch/sgd.hpp"

namespace gsketch {

inline Mat as_matrix(const Vec& v, int d) {
  Mat M(d, d);
  for (int k = 0; k < d; ++k)
    for (int c = 0; c < d; ++c) M(k, c) = v[k * d + c];
  return M;
}

struct HSample {
  bool ok = false;
  Mat V;
  uint64_t id = 0;
  double p_hat = 0;
};

// One Hessian draw from an order-p sampler state.
inline HSample hsample(const GSampler& s, const Vec& x, const MeasureSpec& m, Rng& rng) {
  Projector proj(s.params().layout, QueryKind::Hessian, m, x);
  SampleOutcome o = s.sample_once(proj, rng);
  HSample h;
  if (!o.ok) return h;
  h.ok = true;
  h.V = as_matrix(o.v, s.params().layout.d);
  h.id = o.id;
  h.p_hat = o.p_hat;
  return h;
}

struct HessianConfig {
  uint64_t n = 1;
  int d = 1;
  int p = 0;          // tensor order; 0 picks the smallest order the measure needs
  int T = 1;
  int s = 1;          // Hessians per step
  MeasureSpec measure;
  uint64_t seed = 0;
  double eps = 0.5;
  double delta = 0.25;
  double C_beta = 4;
  double C_s = 2;
  double C_R = 4;
  GSamplerParams sampler;
  SensitivityConfig sens;
  bool use_sensitivity = true;
  bool sampled_gradient = false;  // route g_t through the first-order sampler

  int order() const { return p > 0 ? p : hessian_order(measure); }

  BucketConfig buckets() const {
    BucketConfig B;
    B.n = n;
    B.T = T * s;
    B.C_beta = C_beta;
    B.C_s = C_s;
    B.C_R = C_R;
    B.delta = delta;
    B.seed = derive_seed(seed, {71});
    B.sampler = sampler;
    B.sampler.layout = Layout(d, order());
    B.sampler.n = n;
    B.sampler.T = T * s;
    B.sampler.alpha = smoothness_alpha(measure, eps);
    B.sens = sens;
    B.sens.T = T;
    B.sens.d = d;
    B.dim_for_counts = d;
    return B;
  }

  SGDConfig gradient_config() const {
    SGDConfig g;
    g.n = n;
    g.d = d;
    g.T = T;
    g.measure = measure;
    g.seed = derive_seed(seed, {72});
    g.eps = eps;
    g.delta = delta;
    g.C_beta = C_beta;
    g.C_s = C_s;
    g.C_R = C_R;
    g.sampler = sampler;
    g.sens = sens;
    g.use_sensitivity = use_sensitivity;
    return g;
  }
};

struct HessianStep {
  int t = 0;
  std::vector<Draw> draws;
  Mat H;  // averaged estimate including the regularizer
};

struct HessianTrajectory {
  std::vector<Vec> iterates;
  std::vector<HessianStep> steps;
  std::map<std::pair<int, int>, int> usage;

  int sampler_usages() const {
    int s = 0;
    for (const auto& kv : usage) s += kv.second;
    return s;
  }
};

// x_{t+1} = x_t - pinv(H) g, the default second-order update.
inline Vec newton_update(const Vec& x, const Mat& H, const Vec& g) {
  return x - H.completeOrthogonalDecomposition().solve(g);
}

class HessianEngine {
 public:
  using GradientOracle = std::function<Vec(const Vec&)>;
  using UpdateOracle = std::function<Vec(const Vec&, const Mat&, const Vec&)>;

  explicit HessianEngine(HessianConfig cfg)
      : cfg_(std::move(cfg)), rng_(derive_seed(cfg_.seed, {73})),
        hb_(cfg_.buckets(), make_retention(cfg_)) {
    validate(cfg_.measure, cfg_.d);
    require(cfg_.T >= 1 && cfg_.s >= 1, "T and s must be positive");
    if (cfg_.sampled_gradient) grad_ = std::make_unique<SGDEngine>(cfg_.gradient_config());
  }

  const HessianConfig& config() const { return cfg_; }
  const BucketedSampler& buckets() const { return hb_; }

  void ingest(uint64_t id, const Vec& a, double b) {
    hb_.ingest(id, a, b);
    if (grad_) grad_->ingest(id, a, b);
  }

  void freeze() {
    hb_.freeze();
    if (grad_) grad_->freeze();
  }

  // Averaged sampled Hessian at x for step t.
  HessianStep sample_hessian(const Vec& x, int t, HessianTrajectory& tr) {
    freeze();
    Projector proj(Layout(cfg_.d, cfg_.order()), QueryKind::Hessian, cfg_.measure, x);
    HessianStep st;
    st.t = t;
    st.H = Mat::Zero(cfg_.d, cfg_.d);
    for (int k = 0; k < cfg_.s; ++k) {
      Draw dr = hb_.draw(proj, t * cfg_.s + k, rng_, tr.usage);
      if (!dr.null) st.H += as_matrix(dr.v, cfg_.d) / (static_cast<double>(cfg_.n) * dr.p_hat);
      st.draws.push_back(std::move(dr));
    }
    st.H /= cfg_.s;
    st.H += regularizer_hessian(cfg_.measure, cfg_.d);
    return st;
  }

  HessianTrajectory run(const Vec& x0, const GradientOracle& exact_gradient, const UpdateOracle& update = newton_update) {
    require(x0.size() == cfg_.d, "dimension mismatch");
    HessianTrajectory tr;
    tr.iterates.push_back(x0);
    Vec x = x0;
    SGDTrajectory gtr;
    for (int t = 0; t < cfg_.T; ++t) {
      HessianStep st = sample_hessian(x, t, tr);
      Vec g;
      if (grad_) {
        Vec nx = grad_->step(x, t, gtr);
        // step() applies x - eta * g; recover g from the move.
        g = (x - nx) / grad_->config().step_size(t);
      } else {
        g = exact_gradient(x);
      }
      x = update(x, st.H, g);
      tr.steps.push_back(std::move(st));
      tr.iterates.push_back(x);
    }
    return tr;
  }

 private:
  static std::unique_ptr<Retention> make_retention(const HessianConfig& c) {
    SensitivityConfig s = c.sens;
    s.T = c.T;
    s.d = c.d;
    if (!c.use_sensitivity) {
      s.threshold_override = 2.0;
      return std::make_unique<FrobeniusShareRetention>(s);
    }
    switch (c.measure.kind) {
      case MeasureKind::Huber: return std::make_unique<RetainAll>();
      case MeasureKind::Cubic: return std::make_unique<StreamingSensitivity>(s, 2);
      default: return std::make_unique<FrobeniusShareRetention>(s);
    }
  }

  HessianConfig cfg_;
  Rng rng_;
  BucketedSampler hb_;
  std::unique_ptr<SGDEngine> grad_;
};

}  // namespace gsketch
