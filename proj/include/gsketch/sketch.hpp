#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <unordered_set>
#include <vector>

#include "gsketch/hash.hpp"
#include "gsketch/sparse_table.hpp"
#include "gsketch/tensor.hpp"

namespace gsketch {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

enum class IdMode { Bits, CandidateList };

struct SketchParams {
  Layout layout;
  uint64_t n = 1;          // ids lie in [0, n)
  uint64_t buckets = 64;
  int reps = 5;
  int id_reps = 3;         // repetitions that carry id-recovery bit tables
  IdMode id_mode = IdMode::Bits;
  uint64_t seed = 0;

  int id_bits() const {
    int bits = 1;
    while (bits < 63 && (uint64_t{1} << bits) < n) ++bits;
    return bits;
  }
};

inline int odd_reps(double c_rep, double n_times_t) {
  int r = static_cast<int>(std::ceil(c_rep * std::log2(std::max(2.0, n_times_t))));
  r = std::max(r, 1);
  return r % 2 == 0 ? r + 1 : r;
}

// Lower median; reorders v.
inline double lower_median(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  size_t k = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  return v[k];
}

struct HeavyHit {
  uint64_t id;
  double norm;  // median over repetitions of the bucket G-norm
};

// Detection sketch: signed bucket sums of full row payloads, repeated over
// independent hash pairs, with per-bit sub-tables for id recovery.
class CountSketch {
 public:
  CountSketch() = default;
  explicit CountSketch(const SketchParams& P) : P_(P) {
    require(P.reps >= 1 && P.buckets >= 1, "bad sketch size");
    const int W = P.layout.width();
    for (int r = 0; r < P.reps; ++r) {
      h_.emplace_back(derive_seed(P.seed, {1, uint64_t(r)}), P.buckets);
      s_.emplace_back(derive_seed(P.seed, {2, uint64_t(r)}));
      tables_.emplace_back(W);
    }
    if (P.id_mode == IdMode::Bits) {
      int nr = std::min(P.id_reps, P.reps);
      bits_.assign(nr, std::vector<SparseTable>(P.id_bits(), SparseTable(W)));
    }
  }

  const SketchParams& params() const { return P_; }
  int reps() const { return P_.reps; }
  const SparseTable& table(int r) const { return tables_[r]; }
  const SparseTable& bit_table(int r, int t) const { return bits_[r][t]; }
  uint64_t bucket_of(int r, uint64_t id) const { return h_[r](id); }
  double sign_of(int r, uint64_t id) const { return s_[r](id); }

  void insert(uint64_t id, const double* payload) {
    for (int r = 0; r < P_.reps; ++r) {
      uint64_t key = h_[r](id);
      double sg = s_[r](id);
      tables_[r].add(key, payload, sg);
      if (r < static_cast<int>(bits_.size())) {
        for (size_t t = 0; t < bits_[r].size(); ++t)
          if ((id >> t) & 1) bits_[r][t].add(key, payload, sg);
      }
    }
  }

  void freeze() {
    for (auto& t : tables_) t.freeze();
    for (auto& row : bits_)
      for (auto& t : row) t.freeze();
  }

  void merge(const CountSketch& o) {
    require(o.P_.seed == P_.seed && o.P_.reps == P_.reps && o.P_.layout == P_.layout,
            "merging sketches with different hashes");
    for (int r = 0; r < P_.reps; ++r) tables_[r].merge(o.tables_[r]);
    for (size_t r = 0; r < bits_.size(); ++r)
      for (size_t t = 0; t < bits_[r].size(); ++t) bits_[r][t].merge(o.bits_[r][t]);
  }

  // Median over repetitions of the summed bucket G-norms after dropping the
  // `top` largest buckets. This lower-bounds the tail mass.
  double tail_estimate(const Projector& proj, uint64_t top) const {
    std::vector<double> per_rep;
    std::vector<double> norms;
    for (const auto& t : tables_) {
      norms.clear();
      for (size_t i = 0; i < t.size(); ++i) norms.push_back(proj.G(t.values_at(i)).norm());
      double s = 0;
      if (top < norms.size()) {
        std::nth_element(norms.begin(), norms.begin() + top, norms.end(), std::greater<double>());
        for (size_t i = top; i < norms.size(); ++i) s += norms[i];
      }
      per_rep.push_back(s);
    }
    return lower_median(per_rep);
  }

  double median_norm(const Projector& proj, uint64_t id) const {
    std::vector<double> v;
    v.reserve(P_.reps);
    for (int r = 0; r < P_.reps; ++r) {
      const double* e = tables_[r].find(h_[r](id));
      v.push_back(e ? proj.G(e).norm() : 0.0);
    }
    return lower_median(v);
  }

  // Bitwise id decoding of every bucket in the id-carrying repetitions whose
  // norm reaches `floor`. Decoded ids are checked against the bucket hash.
  std::vector<uint64_t> decode_candidates(const Projector& proj, double floor) const {
    std::vector<uint64_t> out;
    std::vector<double> scratch;
    const int W = P_.layout.width();
    std::vector<double> zero(W, 0.0);
    for (size_t r = 0; r < bits_.size(); ++r) {
      const SparseTable& t = tables_[r];
      for (size_t i = 0; i < t.size(); ++i) {
        const double* e = t.values_at(i);
        double tot = proj.G(e).norm();
        if (tot == 0 || tot < floor) continue;
        uint64_t key = t.key_at(i);
        uint64_t id = 0;
        for (size_t b = 0; b < bits_[r].size(); ++b) {
          const double* eb = bits_[r][b].find(key);
          if (!eb) eb = zero.data();
          double on = proj.G(eb).norm();
          double off = proj.G_diff(e, eb, scratch).norm();
          if (on > off) id |= uint64_t{1} << b;
        }
        if (id < P_.n && h_[r](id) == key) out.push_back(id);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  SketchParams P_;
  std::vector<BucketHash> h_;
  std::vector<SignHash> s_;
  std::vector<SparseTable> tables_;
  std::vector<std::vector<SparseTable>> bits_;
};

// Unbiased estimator: for every payload slice (one per output coordinate)
// an independent CountSketch over that slice alone. Each scalar of the
// estimate is the median over repetitions, so a row's slice is never split
// across buckets and the per-repetition error is sign-symmetric.
class CoordinateMedianSketch {
 public:
  CoordinateMedianSketch() = default;
  explicit CoordinateMedianSketch(const SketchParams& P) : P_(P) {
    const int S = P.layout.slices();
    for (int c = 0; c < S; ++c) {
      for (int r = 0; r < P.reps; ++r) {
        h_.emplace_back(derive_seed(P.seed, {3, uint64_t(c), uint64_t(r)}), P.buckets);
        s_.emplace_back(derive_seed(P.seed, {4, uint64_t(c), uint64_t(r)}));
        tables_.emplace_back(P.layout.slice_width());
      }
    }
  }

  const SketchParams& params() const { return P_; }
  const SparseTable& table(int c, int r) const { return tables_[c * P_.reps + r]; }

  void insert(uint64_t id, const double* payload) {
    const int sw = P_.layout.slice_width();
    for (int c = 0; c < P_.layout.slices(); ++c) {
      for (int r = 0; r < P_.reps; ++r) {
        int k = c * P_.reps + r;
        tables_[k].add(h_[k](id), payload + c * sw, s_[k](id));
      }
    }
  }

  void freeze() {
    for (auto& t : tables_) t.freeze();
  }

  void merge(const CoordinateMedianSketch& o) {
    require(o.P_.seed == P_.seed && o.P_.reps == P_.reps && o.P_.layout == P_.layout,
            "merging sketches with different hashes");
    for (size_t k = 0; k < tables_.size(); ++k) tables_[k].merge(o.tables_[k]);
  }

  // Per-repetition scalar estimates of (w, u) for output t of slice c.
  void rep_estimates(const Projector& proj, uint64_t id, int c, int t, std::vector<double>& w,
                     std::vector<double>& u) const {
    w.clear();
    u.clear();
    for (int r = 0; r < P_.reps; ++r) {
      int k = c * P_.reps + r;
      const double* e = tables_[k].find(h_[k](id));
      double wi = 0, ui = 0;
      if (e) {
        proj.slice_wu(e, t, wi, ui);
        double sg = s_[k](id);
        wi *= sg;
        ui *= sg;
      }
      w.push_back(wi);
      u.push_back(ui);
    }
  }

  void estimate(const Projector& proj, uint64_t id, Vec& w, Vec& u) const {
    w.resize(proj.out_dim());
    u.resize(proj.out_dim());
    std::vector<double> wv, uv;
    for (int c = 0; c < P_.layout.slices(); ++c) {
      for (int t = 0; t < proj.outputs_per_slice(); ++t) {
        rep_estimates(proj, id, c, t, wv, uv);
        int o = proj.out_index(c, t);
        w[o] = lower_median(wv);
        u[o] = lower_median(uv);
      }
    }
  }

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  SketchParams P_;
  std::vector<BucketHash> h_;
  std::vector<SignHash> s_;
  std::vector<SparseTable> tables_;
};

// One detection sketch plus one estimation sketch over the same rows.
class RowSketch {
 public:
  RowSketch() = default;
  explicit RowSketch(const SketchParams& P)
      : P_(P), cs1_(P), cs2_(SketchParams{P.layout, P.n, P.buckets, P.reps, P.id_reps, P.id_mode,
                                          derive_seed(P.seed, {9})}) {}

  const SketchParams& params() const { return P_; }
  const CountSketch& detection() const { return cs1_; }
  const CoordinateMedianSketch& estimation() const { return cs2_; }
  bool frozen() const { return frozen_; }
  size_t rows() const { return ids_.size(); }

  void insert(uint64_t id, const Vec& a, double b) {
    require(!frozen_, "insert after freeze");
    require(a.size() == P_.layout.d, "dimension mismatch");
    require(id < P_.n, "row id out of range");
    require(seen_.insert(id).second, "duplicate row id");
    ids_.push_back(id);
    buf_.resize(P_.layout.width());
    P_.layout.payload(a, b, buf_.data());
    cs1_.insert(id, buf_.data());
    cs2_.insert(id, buf_.data());
  }

  void freeze() {
    if (frozen_) return;
    frozen_ = true;
    cs1_.freeze();
    cs2_.freeze();
    seen_.clear();
  }

  // Sum of two sketches built with the same seed over disjoint rows.
  void merge(const RowSketch& o) {
    require(!frozen_ && !o.frozen_, "merge requires unfrozen sketches");
    for (uint64_t id : o.ids_) require(seen_.insert(id).second, "duplicate row id");
    ids_.insert(ids_.end(), o.ids_.begin(), o.ids_.end());
    cs1_.merge(o.cs1_);
    cs2_.merge(o.cs2_);
  }

  // Unbiased estimate of the data term (w ~ r a) for gradient queries.
  Vec query_estimate(uint64_t id, const Vec& x) const {
    require(frozen_, "query before freeze");
    Projector proj(P_.layout, QueryKind::Gradient, MeasureSpec{}, x);
    Vec w, u;
    cs2_.estimate(proj, id, w, u);
    return w;
  }

  // Estimated G-vector for id under the projector.
  Vec estimate_G(const Projector& proj, uint64_t id) const {
    require(frozen_, "query before freeze");
    Vec w, u;
    cs2_.estimate(proj, id, w, u);
    return proj.map(w, u);
  }

  // Ids whose median bucket norm reaches 3/4 of eps times the tail estimate
  // over all but the top ceil(2/eps^2) buckets.
  std::vector<HeavyHit> query_heavy(const Projector& proj, double eps) const {
    require(frozen_, "query before freeze");
    require(eps > 0 && eps <= 1, "eps must lie in (0,1]");
    double topd = std::ceil(2.0 / (eps * eps));
    uint64_t top = topd > 1e18 ? uint64_t(1e18) : static_cast<uint64_t>(topd);
    double thr = 0.75 * eps * cs1_.tail_estimate(proj, top);
    std::vector<uint64_t> cand;
    if (P_.id_mode == IdMode::CandidateList) {
      cand = ids_;
    } else {
      cand = cs1_.decode_candidates(proj, 0.5 * thr);
    }
    std::vector<HeavyHit> out;
    for (uint64_t id : cand) {
      double m = cs1_.median_norm(proj, id);
      if (m > 0 && m >= thr) out.push_back({id, m});
    }
    return out;
  }

  void write(std::ostream& os) const;
  void read(std::istream& is);

 private:
  SketchParams P_;
  CountSketch cs1_;
  CoordinateMedianSketch cs2_;
  bool frozen_ = false;
  std::vector<uint64_t> ids_;
  std::unordered_set<uint64_t> seen_;
  std::vector<double> buf_;
};

// ---- binary format ------------------------------------------------------

inline constexpr char kSketchMagic[4] = {'G', 'S', 'K', 'S'};
inline constexpr uint32_t kSketchVersion = 1;

namespace bin {
template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("truncated sketch stream");
  return v;
}
inline void put_table(std::ostream& os, const SparseTable& t) {
  require(t.frozen(), "serializing an unfrozen table");
  put<uint64_t>(os, t.size());
  for (size_t i = 0; i < t.size(); ++i) {
    put<uint64_t>(os, t.key_at(i));
    os.write(reinterpret_cast<const char*>(t.values_at(i)), sizeof(double) * t.width());
  }
}
inline SparseTable get_table(std::istream& is, int width) {
  SparseTable t(width);
  uint64_t n = get<uint64_t>(is);
  std::vector<double> buf(width);
  for (uint64_t i = 0; i < n; ++i) {
    uint64_t key = get<uint64_t>(is);
    is.read(reinterpret_cast<char*>(buf.data()), sizeof(double) * width);
    if (!is) throw std::runtime_error("truncated sketch stream");
    t.add(key, buf.data(), 1.0);
  }
  t.freeze();
  return t;
}
inline void put_header(std::ostream& os, const SketchParams& P) {
  os.write(kSketchMagic, 4);
  put<uint32_t>(os, kSketchVersion);
  put<uint64_t>(os, P.n);
  put<uint32_t>(os, P.layout.d);
  put<uint64_t>(os, P.buckets);
  put<uint32_t>(os, P.reps);
  put<uint64_t>(os, P.seed);
  put<uint32_t>(os, P.layout.p);
  put<uint32_t>(os, P.id_reps);
  put<uint32_t>(os, P.id_mode == IdMode::Bits ? 0 : 1);
}
inline SketchParams get_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kSketchMagic, 4) != 0) throw std::runtime_error("bad sketch magic");
  if (get<uint32_t>(is) != kSketchVersion) throw std::runtime_error("unsupported sketch version");
  SketchParams P;
  P.n = get<uint64_t>(is);
  int d = static_cast<int>(get<uint32_t>(is));
  P.buckets = get<uint64_t>(is);
  P.reps = static_cast<int>(get<uint32_t>(is));
  P.seed = get<uint64_t>(is);
  int p = static_cast<int>(get<uint32_t>(is));
  P.layout = Layout(d, p);
  P.id_reps = static_cast<int>(get<uint32_t>(is));
  P.id_mode = get<uint32_t>(is) == 0 ? IdMode::Bits : IdMode::CandidateList;
  return P;
}
}  // namespace bin

inline void CountSketch::write(std::ostream& os) const {
  for (const auto& t : tables_) bin::put_table(os, t);
  for (const auto& row : bits_)
    for (const auto& t : row) bin::put_table(os, t);
}

inline void CountSketch::read(std::istream& is) {
  const int W = P_.layout.width();
  for (auto& t : tables_) t = bin::get_table(is, W);
  for (auto& row : bits_)
    for (auto& t : row) t = bin::get_table(is, W);
}

inline void CoordinateMedianSketch::write(std::ostream& os) const {
  for (const auto& t : tables_) bin::put_table(os, t);
}

inline void CoordinateMedianSketch::read(std::istream& is) {
  for (auto& t : tables_) t = bin::get_table(is, P_.layout.slice_width());
}

inline void RowSketch::write(std::ostream& os) const {
  require(frozen_, "serializing an unfrozen sketch");
  bin::put_header(os, P_);
  bin::put<uint64_t>(os, ids_.size());
  for (uint64_t id : ids_) bin::put<uint64_t>(os, id);
  cs1_.write(os);
  cs2_.write(os);
}

inline void RowSketch::read(std::istream& is) {
  SketchParams P = bin::get_header(is);
  *this = RowSketch(P);
  uint64_t n = bin::get<uint64_t>(is);
  ids_.resize(n);
  for (auto& id : ids_) id = bin::get<uint64_t>(is);
  cs1_.read(is);
  cs2_.read(is);
  frozen_ = true;
}

}  // namespace gsketch
