#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "gsketch/estimator.hpp"

namespace gsketch {

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

enum class FailReason { None, Dummy, ZeroMass, EmptyLevel };

struct SampleOutcome {
  bool ok = false;
  FailReason reason = FailReason::None;
  bool exhausted = false;  // boosting ran out of instances
  Vec v;
  uint64_t id = 0;
  double p_hat = 0;
  int attempts = 0;
  int instance = -1;
};

// Class of a row by the binary exponent of its norm: 2^k <= |a| < 2^{k+1}.
inline int norm_class(double norm) {
  int e = 0;
  std::frexp(norm, &e);
  return e - 1;
}

struct LevelChoice {
  int j = 0;
  double real_w = 0;   // real members times lower boundary, rescaled
  double dummy_w = 0;  // surviving dummies times their weight, rescaled
  std::vector<std::pair<int, int>> members;
};

struct ClassQuery {
  ClassCandidates cands;
  MassEstimate est;
  std::vector<LevelChoice> levels;
  double mass_tilde = 0;
};

// Everything a draw needs at one query point; prepared once, drawn from many
// times.
struct QueryState {
  std::vector<ClassQuery> classes;
  double F_hat = 0;
  double mass_tilde = 0;
};

class GSampler {
 public:
  GSampler() = default;
  GSampler(const GSamplerParams& P, uint64_t seed) : P_(P), seed_(seed), agg_(P), dummies_(P) {
    P.validate();
    member_ = UnitHash(derive_seed(seed, {11}));
    Rng g(derive_seed(seed, {12}));
    gamma_ = 0.5 + 0.5 * uniform01(g);
    DepthSchedule sched(P);
    dummy_counts_.assign(P.K() + 1, 0.0);
    for (int j = dummies_.first_level(); j <= P.K(); ++j) {
      double nd = dummies_.count(j);
      int s = sched.substream(j);
      if (s == 1) {
        dummy_counts_[j] = nd;
      } else {
        Rng r(derive_seed(seed, {13, uint64_t(j)}));
        std::binomial_distribution<long long> bin(static_cast<long long>(std::min(nd, 4e18)),
                                                  std::ldexp(1.0, -(s - 1)));
        dummy_counts_[j] = static_cast<double>(bin(r));
      }
    }
  }

  const GSamplerParams& params() const { return P_; }
  uint64_t seed() const { return seed_; }
  double gamma() const { return gamma_; }
  const DummySpec& dummy_spec() const { return dummies_; }
  const std::vector<double>& dummy_counts() const { return dummy_counts_; }
  bool frozen() const { return frozen_; }
  size_t rows() const { return rows_; }

  // Deepest substream holding id; substream l keeps ids with u < 2^-(l-1).
  int membership_depth(uint64_t id) const {
    double u = member_(id);
    int l = 1;
    while (l < P_.L() && u < std::ldexp(1.0, -l)) ++l;
    return l;
  }

  void process_row(uint64_t id, const Vec& a, double b) {
    require(!frozen_, "ingestion after freeze");
    require(a.size() == P_.layout.d, "dimension mismatch");
    double nrm = a.norm();
    if (nrm == 0) return;
    int k = norm_class(nrm);
    auto& subs = classes_[k];
    if (subs.empty()) subs.resize(P_.L() + 1);
    int depth = membership_depth(id);
    for (int s = 1; s <= depth; ++s) {
      if (!subs[s]) subs[s].emplace(P_.sketch(derive_seed(seed_, {14, uint64_t(k + 4096), uint64_t(s)})));
      subs[s]->insert(id, a, b);
    }
    ++rows_;
  }

  void freeze() {
    frozen_ = true;
    for (auto& [k, subs] : classes_)
      for (auto& s : subs)
        if (s) s->freeze();
  }

  const RowSketch* substream(int cls, int s) const {
    auto it = classes_.find(cls);
    if (it == classes_.end() || s >= static_cast<int>(it->second.size()) || !it->second[s]) return nullptr;
    return &*it->second[s];
  }

  std::vector<int> class_ids() const {
    std::vector<int> out;
    for (const auto& kv : classes_) out.push_back(kv.first);
    return out;
  }

  ClassCandidates candidates(const Projector& proj, int cls) const {
    ClassCandidates C;
    C.cls = cls;
    C.dummies = &dummy_counts_;
    const auto& subs = classes_.at(cls);
    C.by_sub.resize(subs.size());
    for (size_t s = 1; s < subs.size(); ++s) {
      if (!subs[s]) continue;
      if (s == 1) C.rows = subs[s]->rows();
      for (const HeavyHit& h : subs[s]->query_heavy(proj, P_.theta())) {
        Vec g = subs[s]->estimate_G(proj, h.id);
        double nrm = g.norm();
        if (!(nrm > 0)) continue;
        C.max_norm = std::max(C.max_norm, nrm);
        C.by_sub[s].push_back(Candidate{h.id, std::move(g), nrm});
      }
    }
    return C;
  }

  QueryState prepare(const Projector& proj, double eps = 0.5) const {
    require(frozen_, "query before freeze");
    require(proj.layout() == P_.layout, "projector layout mismatch");
    QueryState Q;
    const DepthSchedule& sched = agg_.schedule();
    for (const auto& kv : classes_) {
      ClassQuery cq;
      cq.cands = candidates(proj, kv.first);
      cq.est = agg_.guess_and_verify(cq.cands, gamma_, eps);
      if (cq.est.value <= 0) continue;
      double M = cq.est.guess_used;
      LevelGrid grid(P_.alpha, gamma_, M, P_.K());
      std::vector<char> seen(P_.K() + 1, 0);
      for (LevelAgg& L : agg_.levels(cq.cands, grid, true)) {
        seen[L.j] = 1;
        double D = agg_.dummies_at(cq.cands, L.j);
        if (!agg_.significant(L.j, L.real + D)) continue;
        double sc = sched.scale(L.j);
        LevelChoice c;
        c.j = L.j;
        c.real_w = sc * L.real * grid.lower(L.j);
        c.dummy_w = sc * D * dummies_.weight(L.j, M);
        c.members = std::move(L.members);
        cq.levels.push_back(std::move(c));
      }
      for (int j = dummies_.first_level(); j <= P_.K(); ++j) {
        double D = dummy_counts_[j];
        if (seen[j] || D <= 0 || !agg_.significant(j, D)) continue;
        LevelChoice c;
        c.j = j;
        c.dummy_w = sched.scale(j) * D * dummies_.weight(j, M);
        cq.levels.push_back(std::move(c));
      }
      for (const auto& c : cq.levels) cq.mass_tilde += c.real_w + c.dummy_w;
      Q.F_hat += cq.est.value;
      Q.mass_tilde += cq.mass_tilde;
      Q.classes.push_back(std::move(cq));
    }
    return Q;
  }

  SampleOutcome draw(const QueryState& Q, Rng& rng) const {
    SampleOutcome out;
    out.attempts = 1;
    if (!(Q.F_hat > 0) || !(Q.mass_tilde > 0)) {
      out.reason = FailReason::ZeroMass;
      return out;
    }
    double t = uniform01(rng) * Q.mass_tilde;
    const ClassQuery* cq = &Q.classes.back();
    for (const auto& c : Q.classes) {
      if (t < c.mass_tilde) {
        cq = &c;
        break;
      }
      t -= c.mass_tilde;
    }
    t = uniform01(rng) * cq->mass_tilde;
    const LevelChoice* lv = &cq->levels.back();
    for (const auto& l : cq->levels) {
      double w = l.real_w + l.dummy_w;
      if (t < w) {
        lv = &l;
        break;
      }
      t -= w;
    }
    double u = uniform01(rng) * (lv->real_w + lv->dummy_w);
    if (u >= lv->real_w || lv->members.empty()) {
      out.reason = lv->members.empty() && lv->dummy_w == 0 ? FailReason::EmptyLevel : FailReason::Dummy;
      return out;
    }
    size_t pick = std::min(lv->members.size() - 1,
                           static_cast<size_t>(uniform01(rng) * lv->members.size()));
    auto [s, i] = lv->members[pick];
    const Candidate& c = cq->cands.by_sub[s][i];
    out.ok = true;
    out.v = c.G;
    out.id = c.id;
    out.p_hat = c.norm / Q.F_hat;
    return out;
  }

  SampleOutcome sample_once(const Projector& proj, Rng& rng) const { return draw(prepare(proj), rng); }

  void write(std::ostream& os) const {
    require(frozen_, "serializing an unfrozen sampler");
    os.write("GSKG", 4);
    bin::put<uint32_t>(os, 1);
    bin::put<uint64_t>(os, seed_);
    bin::put<double>(os, gamma_);
    bin::put<uint32_t>(os, static_cast<uint32_t>(classes_.size()));
    for (const auto& [k, subs] : classes_) {
      bin::put<int32_t>(os, k);
      uint32_t present = 0;
      for (const auto& s : subs) present += s.has_value();
      bin::put<uint32_t>(os, present);
      for (size_t s = 0; s < subs.size(); ++s) {
        if (!subs[s]) continue;
        bin::put<uint32_t>(os, static_cast<uint32_t>(s));
        subs[s]->write(os);
      }
    }
  }

 private:
  GSamplerParams P_;
  uint64_t seed_ = 0;
  LevelAggregator agg_{GSamplerParams{}};
  DummySpec dummies_;
  UnitHash member_;
  double gamma_ = 0.75;
  std::vector<double> dummy_counts_;
  std::map<int, std::vector<std::optional<RowSketch>>> classes_;
  bool frozen_ = false;
  size_t rows_ = 0;
};

inline MassEstimate estimate_mass(const GSampler& s, const Projector& proj, double eps) {
  require(eps > 0 && eps < 1, "eps must lie in (0,1)");
  QueryState Q = s.prepare(proj, eps);
  MassEstimate out;
  out.eps = eps;
  out.value = Q.F_hat;
  for (const auto& c : Q.classes) out.guess_used += c.est.guess_used;
  return out;
}

// R independently seeded samplers over the same stream. sample_boosted
// consumes instances; replay() draws repeatedly at one query point without
// consuming, for distribution measurements.
class BoostedSampler {
 public:
  BoostedSampler(const GSamplerParams& P, uint64_t seed, double delta, double C_R = 4) {
    require(delta > 0 && delta <= 1, "delta must lie in (0,1]");
    int R = std::max(1, static_cast<int>(std::ceil(C_R * std::log2(1.0 / delta))));
    for (int r = 0; r < R; ++r) inst_.emplace_back(P, derive_seed(seed, {21, uint64_t(r)}));
  }

  int R() const { return static_cast<int>(inst_.size()); }
  int remaining() const { return R() - static_cast<int>(next_.load()); }
  const GSampler& instance(int r) const { return inst_[r]; }

  void process_row(uint64_t id, const Vec& a, double b) {
    for (auto& s : inst_) s.process_row(id, a, b);
  }
  void freeze() {
    for (auto& s : inst_) s.freeze();
  }

  SampleOutcome sample_boosted(const Projector& proj, Rng& rng) {
    SampleOutcome last;
    int attempts = 0;
    while (true) {
      size_t r = next_.fetch_add(1);
      if (r >= inst_.size()) {
        next_.store(inst_.size());
        last.ok = false;
        last.exhausted = true;
        last.attempts = attempts;
        return last;
      }
      last = inst_[r].sample_once(proj, rng);
      last.attempts = ++attempts;
      last.instance = static_cast<int>(r);
      if (last.ok || last.reason == FailReason::ZeroMass) return last;
    }
  }

  class Replay {
   public:
    Replay(const BoostedSampler& b, Projector proj) : b_(b), proj_(std::move(proj)), states_(b.R()) {}
    SampleOutcome draw(Rng& rng) {
      SampleOutcome last;
      for (int r = 0; r < b_.R(); ++r) {
        if (!states_[r]) states_[r] = b_.inst_[r].prepare(proj_);
        last = b_.inst_[r].draw(*states_[r], rng);
        last.attempts = r + 1;
        last.instance = r;
        if (last.ok || last.reason == FailReason::ZeroMass) return last;
      }
      last.exhausted = true;
      return last;
    }

   private:
    const BoostedSampler& b_;
    Projector proj_;
    std::vector<std::optional<QueryState>> states_;
  };

  Replay replay(const Projector& proj) const { return Replay(*this, proj); }

 private:
  std::vector<GSampler> inst_;
  std::atomic<size_t> next_{0};
};

}  // namespace gsketch
