#pragma once

#include <cstdint>
#include <vector>

#include "gsketch/measures.hpp"

namespace gsketch {

// Per-row payload for an order-p sketch. The row contributes a^{(x)p}
// viewed as a d x D matrix (D = d^{p-1}), plus b * a^{(x)(p-1)} and
// a^{(x)(p-1)} itself. Storage is slice-major: slice c holds column c of the
// matrix followed by the two scalars, so a slice is everything needed for
// output coordinate c.
struct Layout {
  int d = 0;
  int p = 2;

  Layout() = default;
  Layout(int d_, int p_) : d(d_), p(p_) {
    require(d > 0, "dimension must be positive");
    require(p == 2 || p == 3, "tensor order must be 2 or 3");
    require(static_cast<double>(width()) * d <= 1e6, "d^p exceeds the per-table cap");
  }

  int slices() const { return p == 2 ? d : d * d; }
  int slice_width() const { return d + 2; }
  int width() const { return slices() * slice_width(); }

  double lead(const Vec& a, int c) const { return p == 2 ? a[c] : a[c / d] * a[c % d]; }

  void slice_payload(const Vec& a, double b, int c, double* out) const {
    double t = lead(a, c);
    for (int k = 0; k < d; ++k) out[k] = a[k] * t;
    out[d] = b * t;
    out[d + 1] = t;
  }

  void payload(const Vec& a, double b, double* out) const {
    for (int c = 0; c < slices(); ++c) slice_payload(a, b, c, out + c * slice_width());
  }

  bool operator==(const Layout& o) const { return d == o.d && p == o.p; }
};

enum class QueryKind { Gradient, Hessian };

// Applies a query point x to sketched payloads and maps the result through the
// measure's G. Gradient queries read (w, u) ~ (r a, a); Hessian queries read
// (w, u) ~ (r a a^T, a a^T), where w is unavailable (zero) at order 2.
class Projector {
 public:
  Projector(Layout layout, QueryKind kind, MeasureSpec spec, Vec x)
      : layout_(layout), kind_(kind), spec_(std::move(spec)), x_(std::move(x)) {
    require(x_.size() == layout_.d, "dimension mismatch");
    if (kind_ == QueryKind::Gradient) {
      require(layout_.p == 2, "gradient queries need an order-2 sketch");
    } else {
      require(layout_.p >= hessian_order(spec_), "measure needs an order-3 sketch");
    }
  }

  const Layout& layout() const { return layout_; }
  QueryKind kind() const { return kind_; }
  const MeasureSpec& spec() const { return spec_; }
  const Vec& x() const { return x_; }

  int out_dim() const { return kind_ == QueryKind::Gradient ? layout_.d : layout_.d * layout_.d; }
  int outputs_per_slice() const {
    return (kind_ == QueryKind::Hessian && layout_.p == 2) ? layout_.d : 1;
  }
  int out_index(int c, int t) const {
    return (kind_ == QueryKind::Hessian && layout_.p == 2) ? t * layout_.d + c : c;
  }

  // Scalars (w, u) for output t of slice c.
  void slice_wu(const double* e, int t, double& w, double& u) const {
    const int d = layout_.d;
    if (kind_ == QueryKind::Hessian && layout_.p == 2) {
      w = 0;
      u = e[t];
      return;
    }
    double acc = 0;
    for (int k = 0; k < d; ++k) acc += e[k] * x_[k];
    w = acc - e[d];
    u = e[d + 1];
  }

  void wu(const double* payload, Vec& w, Vec& u) const {
    w.resize(out_dim());
    u.resize(out_dim());
    const int sw = layout_.slice_width();
    for (int c = 0; c < layout_.slices(); ++c) {
      for (int t = 0; t < outputs_per_slice(); ++t) {
        int o = out_index(c, t);
        slice_wu(payload + c * sw, t, w[o], u[o]);
      }
    }
  }

  Vec map(const Vec& w, const Vec& u) const {
    return kind_ == QueryKind::Gradient ? apply_gradient_map(spec_, w, u)
                                        : apply_hessian_map(spec_, w, u);
  }

  Vec G(const double* payload) const {
    Vec w, u;
    wu(payload, w, u);
    return map(w, u);
  }

  // G of the difference of two payloads, without materializing it.
  Vec G_diff(const double* p1, const double* p2, std::vector<double>& scratch) const {
    scratch.resize(layout_.width());
    for (int k = 0; k < layout_.width(); ++k) scratch[k] = p1[k] - p2[k];
    return G(scratch.data());
  }

  // Exact G for a row, built directly from (r, a) in the same output layout
  // the sketch path produces.
  Vec exact(const Vec& a, double b) const {
    double r = a.dot(x_) - b;
    if (kind_ == QueryKind::Gradient) return map(r * a, a);
    const int d = layout_.d;
    Vec u(d * d);
    for (int k = 0; k < d; ++k)
      for (int c = 0; c < d; ++c) u[k * d + c] = a[k] * a[c];
    Vec w = layout_.p == 2 ? Vec(Vec::Zero(d * d)) : Vec(r * u);
    return map(w, u);
  }

 private:
  Layout layout_;
  QueryKind kind_;
  MeasureSpec spec_;
  Vec x_;
};

}  // namespace gsketch
