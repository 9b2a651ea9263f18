#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gsketch/measures.hpp"

namespace gsketch {

struct LPResult {
  enum Status { Optimal, Infeasible, Unbounded, IterationLimit } status = Optimal;
  double value = 0;
  Vec x;
};

// Dense bounded-variable primal simplex for
//   maximize c^T x  subject to  A x = rhs,  lb <= x <= ub,
// with finite lb. Phase 1 drives one artificial per row to zero; phase 2
// keeps artificials fixed at [0, 0].
class BoundedSimplex {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  LPResult solve(const Mat& A, const Vec& rhs, const Vec& c, const Vec& lb, const Vec& ub,
                 int max_iter = 100000) {
    m_ = static_cast<int>(A.rows());
    n_ = static_cast<int>(A.cols());
    require(rhs.size() == m_ && c.size() == n_ && lb.size() == n_ && ub.size() == n_, "lp shape mismatch");
    const int N = n_ + m_;
    lb_.assign(N, 0.0);
    ub_.assign(N, 0.0);
    for (int j = 0; j < n_; ++j) {
      require(std::isfinite(lb[j]) && lb[j] <= ub[j], "lp bounds");
      lb_[j] = lb[j];
      ub_[j] = ub[j];
    }
    at_ub_.assign(N, 0);
    basis_.assign(m_, 0);
    xb_.assign(m_, 0.0);
    T_ = Mat::Zero(m_, N);
    T_.leftCols(n_) = A;
    Vec resid = rhs - A * lb;
    for (int r = 0; r < m_; ++r) {
      double s = resid[r] >= 0 ? 1.0 : -1.0;
      T_(r, n_ + r) = s;
      // Scale the row so the artificial column is +1.
      if (s < 0) T_.row(r) *= -1;
      basis_[r] = n_ + r;
      xb_[r] = std::abs(resid[r]);
      ub_[n_ + r] = kInf;
    }
    // Phase 1: maximize -sum(artificials).
    std::vector<double> c1(N, 0.0);
    for (int r = 0; r < m_; ++r) c1[n_ + r] = -1.0;
    LPResult::Status st = iterate(c1, max_iter);
    if (st == LPResult::IterationLimit) return {st, 0, {}};
    double infeas = 0;
    for (int r = 0; r < m_; ++r)
      if (basis_[r] >= n_) infeas += xb_[r];
    if (infeas > 1e-7 * (1 + resid.cwiseAbs().sum())) return {LPResult::Infeasible, 0, {}};
    for (int r = 0; r < m_; ++r) ub_[n_ + r] = 0.0;
    std::vector<double> c2(N, 0.0);
    for (int j = 0; j < n_; ++j) c2[j] = c[j];
    st = iterate(c2, max_iter);
    LPResult out;
    out.status = st;
    out.x = values().head(n_);
    out.value = c.dot(out.x);
    return out;
  }

 private:
  Vec values() const {
    Vec x(n_ + m_);
    for (int j = 0; j < n_ + m_; ++j) x[j] = at_ub_[j] ? ub_[j] : lb_[j];
    for (int r = 0; r < m_; ++r) x[basis_[r]] = xb_[r];
    return x;
  }

  // Dantzig pricing on an incrementally updated reduced-cost row; after a run
  // of degenerate pivots it drops to Bland's rule until progress resumes.
  LPResult::Status iterate(const std::vector<double>& c, int max_iter) {
    const int N = n_ + m_;
    const double tol = 1e-9;
    std::vector<char> is_basic(N, 0);
    for (int r = 0; r < m_; ++r) is_basic[basis_[r]] = 1;
    Vec dj(N);
    for (int j = 0; j < N; ++j) {
      double v = c[j];
      for (int r = 0; r < m_; ++r) v -= c[basis_[r]] * T_(r, j);
      dj[j] = v;
    }
    int degenerate = 0;
    for (int it = 0; it < max_iter; ++it) {
      const bool bland = degenerate > 50;
      int enter = -1;
      double dir = 0, best = tol;
      for (int j = 0; j < N; ++j) {
        if (is_basic[j] || ub_[j] - lb_[j] <= 0) continue;
        double gain = at_ub_[j] ? -dj[j] : dj[j];
        if (gain <= best) continue;
        enter = j;
        dir = at_ub_[j] ? -1 : 1;
        if (bland) break;
        best = gain;
      }
      if (enter < 0) return LPResult::Optimal;

      double theta = ub_[enter] - lb_[enter];
      int leave = -1;
      for (int r = 0; r < m_; ++r) {
        double coef = T_(r, enter) * dir;
        int bv = basis_[r];
        double lim;
        if (coef > tol) {
          lim = (xb_[r] - lb_[bv]) / coef;
        } else if (coef < -tol) {
          lim = (ub_[bv] - xb_[r]) / -coef;
        } else {
          continue;
        }
        lim = std::max(lim, 0.0);
        if (lim < theta || (lim == theta && leave >= 0 && bv < basis_[leave])) {
          theta = lim;
          leave = r;
        }
      }
      if (!std::isfinite(theta)) return LPResult::Unbounded;
      degenerate = theta <= tol ? degenerate + 1 : 0;
      for (int r = 0; r < m_; ++r) xb_[r] -= T_(r, enter) * dir * theta;
      if (leave < 0) {
        at_ub_[enter] = !at_ub_[enter];
        continue;
      }
      int out = basis_[leave];
      double coef = T_(leave, enter) * dir;
      at_ub_[out] = coef < 0;
      double enter_val = (at_ub_[enter] ? ub_[enter] : lb_[enter]) + dir * theta;
      double piv = T_(leave, enter);
      T_.row(leave) /= piv;
      for (int r = 0; r < m_; ++r) {
        if (r == leave) continue;
        double f = T_(r, enter);
        if (f != 0) T_.row(r) -= f * T_.row(leave);
      }
      dj -= dj[enter] * T_.row(leave).transpose();
      dj[enter] = 0;
      is_basic[out] = 0;
      is_basic[enter] = 1;
      basis_[leave] = enter;
      xb_[leave] = enter_val;
      at_ub_[enter] = 0;
    }
    return LPResult::IterationLimit;
  }

  int m_ = 0, n_ = 0;
  Mat T_;
  std::vector<double> lb_, ub_;
  std::vector<char> at_ub_;
  std::vector<int> basis_;
  std::vector<double> xb_;
};

}  // namespace gsketch
