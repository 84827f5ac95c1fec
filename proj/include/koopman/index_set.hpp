#pragma once

#include <algorithm>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/errors.hpp"

namespace koopman {

// Sorted, duplicate-free set of 1-based coordinate indices I ⊆ {1..n}.
// The ambient dimension n is not stored; range checks happen where an n is
// available (range_check).
class IndexSet {
 public:
  IndexSet() = default;

  explicit IndexSet(std::vector<int> indices) : idx_(std::move(indices)) {
    std::sort(idx_.begin(), idx_.end());
    idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
    for (int i : idx_) {
      if (i < 1) throw ValidationError("IndexSet: indices are 1-based, got " + std::to_string(i));
    }
  }

  IndexSet(std::initializer_list<int> indices) : IndexSet(std::vector<int>(indices)) {}

  // The full set {1..n}.
  static IndexSet full(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i + 1;
    return IndexSet(std::move(v));
  }

  int size() const { return static_cast<int>(idx_.size()); }
  bool empty() const { return idx_.empty(); }
  int operator[](int k) const { return idx_[static_cast<std::size_t>(k)]; }
  const std::vector<int>& indices() const { return idx_; }

  auto begin() const { return idx_.begin(); }
  auto end() const { return idx_.end(); }

  bool contains(int i) const {
    return std::binary_search(idx_.begin(), idx_.end(), i);
  }

  // Position of global index i within this set (0-based), or -1.
  int position_of(int i) const {
    auto it = std::lower_bound(idx_.begin(), idx_.end(), i);
    if (it == idx_.end() || *it != i) return -1;
    return static_cast<int>(it - idx_.begin());
  }

  bool subset_of(const IndexSet& other) const {
    return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
  }

  void range_check(int n, const std::string& context) const {
    for (int i : idx_) {
      if (i < 1 || i > n) {
        throw ValidationError(context + ": index " + std::to_string(i) +
                              " out of range 1.." + std::to_string(n));
      }
    }
  }

  friend IndexSet set_union(const IndexSet& a, const IndexSet& b) {
    std::vector<int> out;
    std::set_union(a.idx_.begin(), a.idx_.end(), b.idx_.begin(), b.idx_.end(),
                   std::back_inserter(out));
    IndexSet r;
    r.idx_ = std::move(out);
    return r;
  }

  friend IndexSet set_intersection(const IndexSet& a, const IndexSet& b) {
    std::vector<int> out;
    std::set_intersection(a.idx_.begin(), a.idx_.end(), b.idx_.begin(), b.idx_.end(),
                          std::back_inserter(out));
    IndexSet r;
    r.idx_ = std::move(out);
    return r;
  }

  bool operator==(const IndexSet& other) const { return idx_ == other.idx_; }
  bool operator!=(const IndexSet& other) const { return idx_ != other.idx_; }

  // Order by cardinality, then lexicographically; used for canonical listings.
  bool operator<(const IndexSet& other) const {
    if (idx_.size() != other.idx_.size()) return idx_.size() < other.idx_.size();
    return idx_ < other.idx_;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << '{';
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      if (k) os << ',';
      os << idx_[k];
    }
    os << '}';
    return os.str();
  }

 private:
  std::vector<int> idx_;
};

// Π_I x: pick the coordinates of I (ascending) out of an n-vector.
inline Eigen::VectorXd project_coords(const Eigen::VectorXd& x, const IndexSet& I) {
  Eigen::VectorXd out(I.size());
  for (int k = 0; k < I.size(); ++k) out[k] = x[I[k] - 1];
  return out;
}

inline Eigen::VectorXcd project_coords(const Eigen::VectorXcd& x, const IndexSet& I) {
  Eigen::VectorXcd out(I.size());
  for (int k = 0; k < I.size(); ++k) out[k] = x[I[k] - 1];
  return out;
}

// Embed an |I|-vector into ℝⁿ, placing w_k at coordinate I[k] and 0 elsewhere.
inline Eigen::VectorXd scatter_coords(const Eigen::VectorXd& w, const IndexSet& I, int n) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < I.size(); ++k) out[I[k] - 1] = w[k];
  return out;
}

inline Eigen::VectorXcd scatter_coords(const Eigen::VectorXcd& w, const IndexSet& I, int n) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
  for (int k = 0; k < I.size(); ++k) out[I[k] - 1] = w[k];
  return out;
}

// The selection matrix DΠ_I: |I|×n with (DΠ_I)_{k, I[k]-1} = 1.
inline Eigen::MatrixXd projection_matrix(const IndexSet& I, int n) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(I.size(), n);
  for (int k = 0; k < I.size(); ++k) P(k, I[k] - 1) = 1.0;
  return P;
}

}  // namespace koopman
