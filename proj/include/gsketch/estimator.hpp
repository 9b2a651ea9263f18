#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsketch/levels.hpp"

namespace gsketch {

struct EstimationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MassEstimate {
  double value = 0;       // F_hat
  double eps = 0.5;
  double guess_used = 0;  // accepted M_hat, 0 when the mass is zero
};

// A heavy row reported by one substream, with its estimated G-vector.
struct Candidate {
  uint64_t id;
  Vec G;
  double norm;
};

// Heavy sets of one class, indexed by substream (entry 0 unused).
struct ClassCandidates {
  int cls = 0;
  std::vector<std::vector<Candidate>> by_sub;
  double max_norm = 0;
  uint64_t rows = 0;
  // Dummy rows surviving each level's subsampling (index j), fixed per instance.
  const std::vector<double>* dummies = nullptr;

  bool empty() const { return max_norm <= 0; }
};

struct LevelAgg {
  int j = 0;
  uint64_t real = 0;
  double norm_sum = 0;
  std::vector<std::pair<int, int>> members;  // (substream, index)
};

class LevelAggregator {
 public:
  LevelAggregator(const GSamplerParams& P) : P_(P), sched_(P) {}

  const DepthSchedule& schedule() const { return sched_; }

  bool significant(int j, double members) const {
    return sched_.substream(j) == 1 || members > 1.0 / (P_.alpha * P_.alpha);
  }

  // Level membership of real candidates at guess M_hat. Level j only takes
  // rows from its own substream.
  std::vector<LevelAgg> levels(const ClassCandidates& C, const LevelGrid& grid, bool keep_members) const {
    std::vector<LevelAgg> out;
    std::vector<int> slot(P_.K() + 1, -1);
    for (size_t s = 1; s < C.by_sub.size(); ++s) {
      for (size_t i = 0; i < C.by_sub[s].size(); ++i) {
        const Candidate& c = C.by_sub[s][i];
        int j = grid.level_of(c.norm);
        if (j > grid.K() || sched_.substream(j) != static_cast<int>(s)) continue;
        if (slot[j] < 0) {
          slot[j] = static_cast<int>(out.size());
          out.push_back(LevelAgg{j, 0, 0, {}});
        }
        LevelAgg& L = out[slot[j]];
        L.real++;
        L.norm_sum += c.norm;
        if (keep_members) L.members.emplace_back(static_cast<int>(s), static_cast<int>(i));
      }
    }
    return out;
  }

  double dummies_at(const ClassCandidates& C, int j) const {
    return (C.dummies && j < static_cast<int>(C.dummies->size())) ? (*C.dummies)[j] : 0.0;
  }

  // Rescaled estimated mass of real rows over significant levels.
  double aggregate(const ClassCandidates& C, const LevelGrid& grid) const {
    double A = 0;
    for (const LevelAgg& L : levels(C, grid, false)) {
      if (!significant(L.j, L.real + dummies_at(C, L.j))) continue;
      A += sched_.scale(L.j) * L.norm_sum;
    }
    return A;
  }

  // Guess-and-verify: the first power of two M_hat whose aggregate lands in
  // [M_hat/2, 2 M_hat].
  MassEstimate guess_and_verify(const ClassCandidates& C, double gamma, double eps) const {
    MassEstimate out;
    out.eps = eps;
    if (C.empty()) return out;
    double rows = std::max<double>(1.0, static_cast<double>(C.rows));
    int lo = static_cast<int>(std::floor(std::log2(C.max_norm / 16)));
    int hi = static_cast<int>(std::ceil(std::log2(2 * rows * C.max_norm))) + 2;
    for (int g = lo; g <= hi; ++g) {
      double M = std::ldexp(1.0, g);
      LevelGrid grid(P_.alpha, gamma, M, P_.K());
      double A = aggregate(C, grid);
      if (A >= M / 2 && A <= 2 * M) {
        out.value = A;
        out.guess_used = M;
        return out;
      }
    }
    throw EstimationFailure("no self-consistent mass guess");
  }

 private:
  GSamplerParams P_;
  DepthSchedule sched_;
};

}  // namespace gsketch
