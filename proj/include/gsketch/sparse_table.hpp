#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gsketch/measures.hpp"

namespace gsketch {

// Bucket table that only materializes touched buckets. Rows are appended as
// (key, payload) pairs; freeze() sorts by key and sums duplicates, after which
// lookups are binary searches. Memory is O(touched buckets) regardless of the
// nominal bucket count.
class SparseTable {
 public:
  SparseTable() = default;
  explicit SparseTable(int width) : width_(width) {}

  int width() const { return width_; }
  bool frozen() const { return frozen_; }
  size_t size() const { return keys_.size(); }

  void add(uint64_t key, const double* payload, double scale) {
    require(!frozen_, "table is frozen");
    keys_.push_back(key);
    size_t off = vals_.size();
    vals_.resize(off + width_);
    for (int k = 0; k < width_; ++k) vals_[off + k] = scale * payload[k];
  }

  void freeze() {
    if (frozen_) return;
    frozen_ = true;
    if (keys_.empty()) return;
    std::vector<size_t> order(keys_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return keys_[x] < keys_[y]; });
    std::vector<uint64_t> keys;
    std::vector<double> vals;
    for (size_t idx : order) {
      const double* src = &vals_[idx * width_];
      if (keys.empty() || keys.back() != keys_[idx]) {
        keys.push_back(keys_[idx]);
        vals.insert(vals.end(), src, src + width_);
      } else {
        double* dst = &vals[vals.size() - width_];
        for (int k = 0; k < width_; ++k) dst[k] += src[k];
      }
    }
    keys_.swap(keys);
    vals_.swap(vals);
  }

  const double* find(uint64_t key) const {
    require(frozen_, "lookup before freeze");
    auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
    if (it == keys_.end() || *it != key) return nullptr;
    return &vals_[(it - keys_.begin()) * width_];
  }

  uint64_t key_at(size_t i) const { return keys_[i]; }
  const double* values_at(size_t i) const { return &vals_[i * width_]; }

  // Entry-wise sum; both tables must share hash functions to be meaningful.
  void merge(const SparseTable& other) {
    require(width_ == other.width_, "width mismatch");
    bool was_frozen = frozen_;
    frozen_ = false;
    for (size_t i = 0; i < other.keys_.size(); ++i) add(other.keys_[i], other.values_at(i), 1.0);
    if (was_frozen || other.frozen_) freeze();
  }

 private:
  int width_ = 0;
  bool frozen_ = false;
  std::vector<uint64_t> keys_;
  std::vector<double> vals_;
};

}  // namespace gsketch
