#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsketch {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

inline void require(bool cond, const char* what) {
  if (!cond) throw ContractViolation(what);
}

// Cubic is M(r) = |r|^3 / 3. It only enters the second-order path, where its
// Hessian 2|r| a a^T needs an order-3 sketch.
enum class MeasureKind { L1, L2, Huber, Ridge, Lasso, GroupLasso, Cubic };

struct MeasureSpec {
  MeasureKind kind = MeasureKind::L2;
  double tau = 1.0;
  double lambda = 0.0;
  std::vector<std::vector<int>> groups;
};

inline std::string to_string(MeasureKind k) {
  switch (k) {
    case MeasureKind::L1: return "l1";
    case MeasureKind::L2: return "l2";
    case MeasureKind::Huber: return "huber";
    case MeasureKind::Ridge: return "ridge";
    case MeasureKind::Lasso: return "lasso";
    case MeasureKind::GroupLasso: return "group_lasso";
    case MeasureKind::Cubic: return "cubic";
  }
  return "?";
}

inline MeasureKind parse_measure_kind(const std::string& s) {
  if (s == "l1") return MeasureKind::L1;
  if (s == "l2") return MeasureKind::L2;
  if (s == "huber") return MeasureKind::Huber;
  if (s == "ridge") return MeasureKind::Ridge;
  if (s == "lasso") return MeasureKind::Lasso;
  if (s == "group_lasso" || s == "grouplasso") return MeasureKind::GroupLasso;
  if (s == "cubic") return MeasureKind::Cubic;
  throw std::invalid_argument("unknown measure: " + s);
}

inline double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline bool has_squared_data_term(MeasureKind k) {
  return k == MeasureKind::L2 || k == MeasureKind::Ridge || k == MeasureKind::Lasso ||
         k == MeasureKind::GroupLasso;
}

inline void validate(const MeasureSpec& spec, int d) {
  require(spec.lambda >= 0, "lambda must be nonnegative");
  if (spec.kind == MeasureKind::Huber) require(spec.tau > 0, "tau must be positive");
  if (spec.kind == MeasureKind::GroupLasso) {
    std::vector<int> seen(d, 0);
    for (const auto& g : spec.groups) {
      require(!g.empty(), "empty group");
      for (int c : g) {
        require(c >= 0 && c < d, "group index out of range");
        require(seen[c]++ == 0, "groups overlap");
      }
    }
    for (int c = 0; c < d; ++c) require(seen[c] == 1, "groups must partition [d]");
  }
}

inline double residual(const Vec& a, double b, const Vec& x) {
  require(a.size() == x.size(), "dimension mismatch");
  return a.dot(x) - b;
}

inline double huber(double r, double tau) {
  double ar = std::abs(r);
  return ar <= tau ? r * r / (2 * tau) : ar - tau / 2;
}

// Scalar g with data gradient g(r) * a.
inline double g_scalar(const MeasureSpec& spec, double r) {
  switch (spec.kind) {
    case MeasureKind::L1: return sgn(r);
    case MeasureKind::Huber: return std::abs(r) <= spec.tau ? r / spec.tau : sgn(r);
    case MeasureKind::Cubic: return r * std::abs(r);
    default: return 2 * r;
  }
}

inline double regularizer(const MeasureSpec& spec, const Vec& x) {
  switch (spec.kind) {
    case MeasureKind::Ridge: return spec.lambda * x.squaredNorm();
    case MeasureKind::Lasso: return spec.lambda * x.lpNorm<1>();
    case MeasureKind::GroupLasso: {
      double s = 0;
      for (const auto& g : spec.groups) {
        double q = 0;
        for (int c : g) q += x[c] * x[c];
        s += std::sqrt(static_cast<double>(g.size())) * std::sqrt(q);
      }
      return spec.lambda * s;
    }
    default: return 0.0;
  }
}

inline Vec regularizer_gradient(const MeasureSpec& spec, const Vec& x) {
  Vec out = Vec::Zero(x.size());
  switch (spec.kind) {
    case MeasureKind::Ridge: out = 2 * spec.lambda * x; break;
    case MeasureKind::Lasso:
      for (int c = 0; c < x.size(); ++c) out[c] = spec.lambda * sgn(x[c]);
      break;
    case MeasureKind::GroupLasso:
      for (const auto& g : spec.groups) {
        double q = 0;
        for (int c : g) q += x[c] * x[c];
        if (q == 0) continue;
        double scale = spec.lambda * std::sqrt(static_cast<double>(g.size())) / std::sqrt(q);
        for (int c : g) out[c] = scale * x[c];
      }
      break;
    default: break;
  }
  return out;
}

inline double loss(const MeasureSpec& spec, const Vec& a, double b, const Vec& x) {
  double r = residual(a, b, x);
  double data = 0;
  switch (spec.kind) {
    case MeasureKind::L1: data = std::abs(r); break;
    case MeasureKind::Huber: data = huber(r, spec.tau); break;
    case MeasureKind::Cubic: data = std::abs(r) * r * r / 3; break;
    default: data = r * r; break;
  }
  return data + regularizer(spec, x);
}

inline Vec sampling_gradient(const MeasureSpec& spec, const Vec& a, double b, const Vec& x) {
  return g_scalar(spec, residual(a, b, x)) * a;
}

inline Vec gradient(const MeasureSpec& spec, const Vec& a, double b, const Vec& x) {
  return sampling_gradient(spec, a, b, x) + regularizer_gradient(spec, x);
}

inline double smoothness_alpha(const MeasureSpec&, double eps) {
  require(eps > 0 && eps < 1, "eps must lie in (0,1)");
  return eps / 4;
}

// Maps sketch estimates w ~ r*a and u ~ a to the data gradient g(r)*a.
// Piecewise measures pick their piece from r_hat = <w,u>/|u|^2; inside a
// piece the map is linear, so unbiased inputs give unbiased outputs.
inline Vec apply_gradient_map(const MeasureSpec& spec, const Vec& w, const Vec& u) {
  switch (spec.kind) {
    case MeasureKind::L1: return sgn(w.dot(u)) * u;
    case MeasureKind::Huber: {
      double uu = u.squaredNorm();
      if (uu == 0) return Vec::Zero(w.size());
      double r = w.dot(u) / uu;
      if (std::abs(r) <= spec.tau) return w / spec.tau;
      return sgn(r) * u;
    }
    case MeasureKind::Cubic:
      throw ContractViolation("cubic measure has no first-order sketch map");
    default: return 2 * w;
  }
}

// Exact data Hessian f(r) a a^T.
inline double hessian_scalar(const MeasureSpec& spec, double r) {
  switch (spec.kind) {
    case MeasureKind::Huber: return std::abs(r) <= spec.tau ? 1.0 / spec.tau : 0.0;
    case MeasureKind::Cubic: return 2 * std::abs(r);
    case MeasureKind::L1: throw ContractViolation("l1 measure has no Hessian");
    default: return 2.0;
  }
}

inline Mat data_hessian(const MeasureSpec& spec, const Vec& a, double b, const Vec& x) {
  return hessian_scalar(spec, residual(a, b, x)) * (a * a.transpose());
}

inline Mat regularizer_hessian(const MeasureSpec& spec, int d) {
  if (spec.kind == MeasureKind::Ridge) return 2 * spec.lambda * Mat::Identity(d, d);
  return Mat::Zero(d, d);
}

// Smallest tensor order whose sketch can reproduce the data Hessian.
inline int hessian_order(const MeasureSpec& spec) {
  if (spec.kind == MeasureKind::Huber || spec.kind == MeasureKind::Cubic) return 3;
  if (spec.kind == MeasureKind::L1) throw ContractViolation("l1 measure has no Hessian");
  return 2;
}

// Hessian analogue of apply_gradient_map. w ~ r*a a^T (flattened, zero when
// the sketch order is 2) and u ~ a a^T.
inline Vec apply_hessian_map(const MeasureSpec& spec, const Vec& w, const Vec& u) {
  switch (spec.kind) {
    case MeasureKind::Huber: {
      double uu = u.squaredNorm();
      if (uu == 0) return Vec::Zero(u.size());
      double r = w.dot(u) / uu;
      return std::abs(r) <= spec.tau ? Vec(u / spec.tau) : Vec(Vec::Zero(u.size()));
    }
    case MeasureKind::Cubic: {
      double uu = u.squaredNorm();
      if (uu == 0) return Vec::Zero(u.size());
      return 2 * sgn(w.dot(u)) * w;
    }
    case MeasureKind::L1: throw ContractViolation("l1 measure has no Hessian");
    default: return 2 * u;
  }
}

}  // namespace gsketch
