#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsketch/gsampler.hpp"
#include "gsketch/oracle.hpp"
#include "gsketch/sensitivity.hpp"

namespace gsketch {

struct FreshnessExhausted : std::runtime_error {
  int step;
  int bucket;
  FreshnessExhausted(int t, int j)
      : std::runtime_error("sampler instances of bucket " + std::to_string(j) + " exhausted at step " +
                           std::to_string(t)),
        step(t),
        bucket(j) {}
};

struct StepFailed : std::runtime_error {
  int step;
  explicit StepFailed(int t) : std::runtime_error("every boosted attempt failed at step " + std::to_string(t)), step(t) {}
};

struct BucketConfig {
  uint64_t n = 1;
  int T = 1;
  double C_beta = 4;
  double C_s = 2;
  double C_R = 4;
  double delta = 0.25;       // per-step boosting failure target
  uint64_t seed = 0;
  GSamplerParams sampler;    // layout, n, alpha and T are filled in by the owner
  SensitivityConfig sens;
  int dim_for_counts = 1;    // d in the log(Td) sampler count

  int beta() const { return std::max(1, static_cast<int>(std::ceil(C_beta * T))); }
  int samplers_per_bucket() const {
    return std::max(1, static_cast<int>(std::ceil(C_s * std::log2(std::max(2.0, double(T) * dim_for_counts)))));
  }
  int boost() const { return std::max(1, static_cast<int>(std::ceil(C_R * std::log2(1.0 / delta)))); }
};

struct Draw {
  Vec v;                // G-vector of the drawn row
  double p_hat = 0;     // |v| / sum_j q_j
  int bucket = -1;
  int instance = -1;
  int64_t row = -1;
  bool heavy = false;
  bool null = false;    // all bucket masses were zero
  int attempts = 0;
};

// Rows hashed into beta buckets; every bucket owns one estimator and a pool of
// independently seeded samplers. Rows kept by the retention policy are stored
// explicitly and never enter a bucket sketch.
class BucketedSampler {
 public:
  BucketedSampler(BucketConfig cfg, std::unique_ptr<Retention> retention)
      : cfg_(std::move(cfg)), retention_(std::move(retention)),
        h_(derive_seed(cfg_.seed, {41}), cfg_.beta()), buckets_(cfg_.beta()) {}

  const BucketConfig& config() const { return cfg_; }
  int beta() const { return cfg_.beta(); }
  int bucket_of(uint64_t id) const { return static_cast<int>(h_(id)); }
  bool frozen() const { return frozen_; }
  const Retention& retention() const { return *retention_; }

  void ingest(uint64_t id, const Vec& a, double b) {
    require(!frozen_, "ingestion after the step loop began");
    Observation o = retention_->observe(id, a, b);
    if (!o.retained) forward(id, a, b);
    for (const auto& r : o.demoted) forward(r.id, r.a, r.b);
  }

  void freeze() {
    if (frozen_) return;
    for (const auto& r : retention_->finalize()) forward(r.id, r.a, r.b);
    for (auto& r : retention_->retained()) buckets_[bucket_of(r.id)].heavy.push_back(std::move(r));
    for (auto& B : buckets_) {
      if (B.est) B.est->freeze();
      for (auto& s : B.pool) s->freeze();
    }
    frozen_ = true;
  }

  std::vector<uint64_t> bucket_ids(int j) const { return buckets_[j].ids; }
  size_t heavy_count() const {
    size_t s = 0;
    for (const auto& B : buckets_) s += B.heavy.size();
    return s;
  }
  size_t pool_used(int j) const { return buckets_[j].next; }
  size_t pool_size(int j) const { return buckets_[j].pool.size(); }

  // q_j for every bucket: estimated sketched mass plus exact heavy mass.
  std::vector<double> masses(const Projector& proj, std::vector<double>* heavy_mass = nullptr) const {
    std::vector<double> q(buckets_.size(), 0.0);
    if (heavy_mass) heavy_mass->assign(buckets_.size(), 0.0);
    for (size_t j = 0; j < buckets_.size(); ++j) {
      const Bucket& B = buckets_[j];
      double h = 0;
      for (const auto& r : B.heavy) h += proj.exact(r.a, r.b).norm();
      double f = B.est ? estimate_mass(*B.est, proj, 0.5).value : 0.0;
      q[j] = h + f;
      if (heavy_mass) (*heavy_mass)[j] = h;
    }
    return q;
  }

  // One importance-sampled draw at step t. Usage of every consumed sampler
  // instance is recorded in `usage`.
  Draw draw(const Projector& proj, int t, Rng& rng, std::map<std::pair<int, int>, int>& usage) {
    require(frozen_, "draw before freeze");
    std::vector<double> hm;
    std::vector<double> q = masses(proj, &hm);
    double Q = 0;
    for (double v : q) Q += v;
    Draw d;
    if (!(Q > 0)) {
      d.null = true;
      return d;
    }
    double u = uniform01(rng) * Q;
    int j = static_cast<int>(q.size()) - 1;
    for (size_t k = 0; k < q.size(); ++k) {
      if (u < q[k]) {
        j = static_cast<int>(k);
        break;
      }
      u -= q[k];
    }
    while (q[j] <= 0) --j;
    d.bucket = j;
    Bucket& B = buckets_[j];
    if (uniform01(rng) * q[j] < hm[j]) {
      double pick = uniform01(rng) * hm[j];
      // Rounding can run past the end; fall back to the last row with mass.
      const SensitivityRecord* rec = nullptr;
      for (const auto& r : B.heavy) {
        double nv = proj.exact(r.a, r.b).norm();
        if (nv <= 0) continue;
        rec = &r;
        if (pick < nv) break;
        pick -= nv;
      }
      d.v = proj.exact(rec->a, rec->b);
      d.row = static_cast<int64_t>(rec->id);
      d.heavy = true;
      d.p_hat = d.v.norm() / Q;
      return d;
    }
    for (int attempt = 0; attempt < cfg_.boost(); ++attempt) {
      if (B.next >= B.pool.size()) throw FreshnessExhausted(t, j);
      int inst = static_cast<int>(B.next++);
      usage[{j, inst}]++;
      SampleOutcome o = B.pool[inst]->sample_once(proj, rng);
      d.attempts = attempt + 1;
      if (o.ok) {
        d.v = o.v;
        d.instance = inst;
        d.row = static_cast<int64_t>(o.id);
        d.p_hat = d.v.norm() / Q;
        return d;
      }
    }
    throw StepFailed(t);
  }

 private:
  struct Bucket {
    std::unique_ptr<GSampler> est;
    std::vector<std::unique_ptr<GSampler>> pool;
    size_t next = 0;
    std::vector<uint64_t> ids;
    std::vector<SensitivityRecord> heavy;
  };

  void forward(uint64_t id, const Vec& a, double b) {
    int j = bucket_of(id);
    Bucket& B = buckets_[j];
    if (!B.est) {
      B.est = std::make_unique<GSampler>(cfg_.sampler, derive_seed(cfg_.seed, {42, uint64_t(j)}));
      for (int s = 0; s < cfg_.samplers_per_bucket(); ++s)
        B.pool.push_back(
            std::make_unique<GSampler>(cfg_.sampler, derive_seed(cfg_.seed, {43, uint64_t(j), uint64_t(s)})));
    }
    B.ids.push_back(id);
    B.est->process_row(id, a, b);
    for (auto& s : B.pool) s->process_row(id, a, b);
  }

  BucketConfig cfg_;
  std::unique_ptr<Retention> retention_;
  BucketHash h_;
  std::vector<Bucket> buckets_;
  bool frozen_ = false;
};

struct SGDConfig {
  uint64_t n = 1;
  int d = 1;
  int T = 1;
  double eta = 0;                   // <= 0 selects 1/sqrt(T)
  std::vector<double> eta_schedule; // overrides eta when nonempty
  MeasureSpec measure;
  uint64_t seed = 0;
  double eps = 0.5;
  double delta = 0.25;
  double C_beta = 4;
  double C_s = 2;
  double C_R = 4;
  GSamplerParams sampler;           // constants and overrides; sizes are filled in
  SensitivityConfig sens;
  bool use_sensitivity = true;

  double step_size(int t) const {
    if (!eta_schedule.empty()) return eta_schedule[std::min<size_t>(t, eta_schedule.size() - 1)];
    return eta > 0 ? eta : 1.0 / std::sqrt(static_cast<double>(T));
  }

  BucketConfig buckets() const {
    BucketConfig B;
    B.n = n;
    B.T = T;
    B.C_beta = C_beta;
    B.C_s = C_s;
    B.C_R = C_R;
    B.delta = delta;
    B.seed = seed;
    B.sampler = sampler;
    B.sampler.layout = Layout(d, 2);
    B.sampler.n = n;
    B.sampler.T = T;
    B.sampler.alpha = smoothness_alpha(measure, eps);
    B.sens = sens;
    B.sens.T = T;
    B.sens.d = d;
    B.dim_for_counts = d;
    return B;
  }
};

struct StepRecord {
  int t = 0;
  int bucket = -1;
  int instance = -1;
  int64_t row = -1;
  bool heavy = false;
  bool null_step = false;
  double p_hat = 0;
  double w_norm = 0;
  double var_proxy = 0;  // |w / (n p_hat)|^2
};

struct SGDTrajectory {
  std::vector<Vec> iterates;
  std::vector<StepRecord> steps;
  std::map<std::pair<int, int>, int> usage;  // (bucket, instance) -> queries
  int heavy_draws = 0;

  bool fresh() const {
    for (const auto& kv : usage)
      if (kv.second > 1) return false;
    return true;
  }

  Vec average(int from = 1) const {
    Vec s = Vec::Zero(iterates.front().size());
    int c = 0;
    for (size_t t = from; t < iterates.size(); ++t, ++c) s += iterates[t];
    return c ? Vec(s / c) : iterates.front();
  }
};

// Single-pass importance-sampled SGD.
class SGDEngine {
 public:
  explicit SGDEngine(SGDConfig cfg)
      : cfg_(std::move(cfg)), rng_(derive_seed(cfg_.seed, {51})),
        buckets_(cfg_.buckets(), make_retention(cfg_)) {
    validate(cfg_.measure, cfg_.d);
    require(cfg_.T >= 1, "T must be positive");
  }

  const SGDConfig& config() const { return cfg_; }
  const BucketedSampler& buckets() const { return buckets_; }

  void ingest(uint64_t id, const Vec& a, double b) { buckets_.ingest(id, a, b); }
  void freeze() { buckets_.freeze(); }

  // One update from x at step t.
  Vec step(const Vec& x, int t, SGDTrajectory& traj) {
    freeze();
    Projector proj(Layout(cfg_.d, 2), QueryKind::Gradient, cfg_.measure, x);
    Draw dr = buckets_.draw(proj, t, rng_, traj.usage);
    StepRecord rec;
    rec.t = t;
    if (dr.null) {
      // All data gradients vanish; only the regularizer moves x.
      rec.null_step = true;
      traj.steps.push_back(rec);
      return x - cfg_.step_size(t) * regularizer_gradient(cfg_.measure, x);
    }
    rec.bucket = dr.bucket;
    rec.instance = dr.instance;
    rec.row = dr.row;
    rec.heavy = dr.heavy;
    rec.p_hat = dr.p_hat;
    rec.w_norm = dr.v.norm();
    if (dr.heavy) traj.heavy_draws++;
    double eta = cfg_.step_size(t);
    Vec est = dr.v / (static_cast<double>(cfg_.n) * dr.p_hat);
    rec.var_proxy = est.squaredNorm();
    traj.steps.push_back(rec);
    return x - eta * est - eta * regularizer_gradient(cfg_.measure, x);
  }

  SGDTrajectory run(const Vec& x0) {
    require(x0.size() == cfg_.d, "dimension mismatch");
    SGDTrajectory traj;
    traj.iterates.push_back(x0);
    Vec x = x0;
    for (int t = 0; t < cfg_.T; ++t) {
      x = step(x, t, traj);
      traj.iterates.push_back(x);
    }
    return traj;
  }

 private:
  static std::unique_ptr<Retention> make_retention(const SGDConfig& c) {
    if (!c.use_sensitivity) {
      SensitivityConfig s = c.sens;
      s.threshold_override = 2.0;  // above any sensitivity: nothing is kept
      return std::make_unique<StreamingSensitivity>(s);
    }
    SensitivityConfig s = c.sens;
    s.T = c.T;
    s.d = c.d;
    return std::make_unique<StreamingSensitivity>(s);
  }

  SGDConfig cfg_;
  Rng rng_;
  BucketedSampler buckets_;
};

enum class BaselineMode { Uniform, ExactImportance, FullGD };

inline SGDTrajectory run_baseline(const ExactInstance& I, const Vec& x0, const SGDConfig& cfg, BaselineMode mode) {
  Rng rng(derive_seed(cfg.seed, {61}));
  SGDTrajectory traj;
  traj.iterates.push_back(x0);
  Vec x = x0;
  const double n = I.n();
  for (int t = 0; t < cfg.T; ++t) {
    double eta = cfg.step_size(t);
    StepRecord rec;
    rec.t = t;
    Vec est;
    if (mode == BaselineMode::FullGD) {
      est = full_gradient(I, x) - regularizer_gradient(I.measure, x);
      rec.p_hat = 1;
    } else if (mode == BaselineMode::Uniform) {
      int i = std::min(I.n() - 1, static_cast<int>(uniform01(rng) * I.n()));
      est = data_gradient(I, i, x);
      rec.row = i;
      rec.p_hat = 1.0 / n;
    } else {
      std::vector<double> w = gradient_norms(I, x);
      double s = 0;
      for (double v : w) s += v;
      if (!(s > 0)) {
        rec.null_step = true;
        traj.steps.push_back(rec);
        x = x - eta * regularizer_gradient(I.measure, x);
        traj.iterates.push_back(x);
        continue;
      }
      double u = uniform01(rng) * s;
      int i = I.n() - 1;
      for (int k = 0; k < I.n(); ++k) {
        if (u < w[k]) {
          i = k;
          break;
        }
        u -= w[k];
      }
      while (w[i] <= 0) --i;
      rec.row = i;
      rec.p_hat = w[i] / s;
      est = data_gradient(I, i, x) / (n * rec.p_hat);
    }
    rec.w_norm = est.norm();
    rec.var_proxy = est.squaredNorm();
    traj.steps.push_back(rec);
    x = x - eta * est - eta * regularizer_gradient(I.measure, x);
    traj.iterates.push_back(x);
  }
  return traj;
}

// step,bucket,instance,row,heavy,p_hat,w_norm,var_proxy[,F]
inline void write_trajectory_csv(std::ostream& os, const SGDTrajectory& tr, const ExactInstance* oracle = nullptr) {
  os.precision(17);
  os << "step,bucket,instance,row,heavy,p_hat,w_norm,var_proxy";
  if (oracle) os << ",F";
  os << "\n";
  for (size_t k = 0; k < tr.steps.size(); ++k) {
    const auto& s = tr.steps[k];
    os << s.t << ',' << s.bucket << ',' << s.instance << ',' << s.row << ',' << (s.heavy ? 1 : 0) << ','
       << s.p_hat << ',' << s.w_norm << ',' << s.var_proxy;
    if (oracle) os << ',' << objective(*oracle, tr.iterates[k + 1]);
    os << "\n";
  }
}

}  // namespace gsketch
