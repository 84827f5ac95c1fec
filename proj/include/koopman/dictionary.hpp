#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"
#include "koopman/polynomial.hpp"
#include "koopman/rng.hpp"

namespace koopman {

// Monomial observable x^exps over the dictionary's variables.
struct MonomialObs {
  std::vector<int> exps;
};

// Gaussian radial basis function exp(−‖x_S − c_S‖² / (2σ²)) reading only the
// coordinates in `support` (1-based, ascending). For an unlifted RBF the
// support is all coordinates; lifting restricts it to a subsystem's.
struct RbfObs {
  Eigen::VectorXd center;
  double width = 1.0;
  std::vector<int> support;
};

using Observable = std::variant<MonomialObs, RbfObs>;

// Descriptor sufficient to rebuild a generated dictionary (JSON round trip).
struct DictionaryMeta {
  std::string kind;  // "monomials" | "rbf"
  int d = 0;
  int l = 0;
  Box box;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

// An ordered list of observables Ψ = (ψ_1..ψ_l) on ℝ^dim. When
// includes_coords is set, evaluation prepends the coordinate functions
// x_1..x_dim as extra rows (so EDMD gets a trivial exact decoder for
// linear-recovery settings); `entries` excludes those rows.
class Dictionary {
 public:
  Dictionary(int dim, std::vector<Observable> entries, bool includes_coords = false)
      : dim_(dim), includes_coords_(includes_coords), entries_(std::move(entries)) {
    if (dim < 1) throw ValidationError("Dictionary: dimension must be positive");
    if (entries_.empty() && !includes_coords_)
      throw ValidationError("Dictionary: needs at least one observable");
    for (const Observable& e : entries_) {
      if (const auto* m = std::get_if<MonomialObs>(&e)) {
        if (static_cast<int>(m->exps.size()) != dim_)
          throw ValidationError("Dictionary: monomial exponent size mismatch");
        for (int v : m->exps)
          if (v < 0) throw ValidationError("Dictionary: negative exponent");
      } else {
        const auto& r = std::get<RbfObs>(e);
        if (r.center.size() != dim_) throw ValidationError("Dictionary: RBF center size mismatch");
        if (!r.center.allFinite()) throw ValidationError("Dictionary: non-finite RBF center");
        if (!(r.width > 0.0)) throw ValidationError("Dictionary: RBF width must be positive");
        if (r.support.empty()) throw ValidationError("Dictionary: RBF with empty support");
        for (int i : r.support)
          if (i < 1 || i > dim_) throw ValidationError("Dictionary: RBF support out of range");
      }
    }
  }

  int dim() const { return dim_; }
  bool includes_coords() const { return includes_coords_; }
  const std::vector<Observable>& entries() const { return entries_; }
  int num_entries() const { return static_cast<int>(entries_.size()); }

  // Number of rows evaluate() produces.
  int rows() const { return (includes_coords_ ? dim_ : 0) + num_entries(); }

  const std::optional<DictionaryMeta>& meta() const { return meta_; }

  // All monomials of total degree ≤ d, graded-lex (1, x1, …, xn, x1², x1x2, …).
  static Dictionary monomials(int n, int d) {
    if (d < 0) throw ValidationError("Dictionary::monomials: negative degree");
    std::vector<Observable> es;
    for (std::vector<int>& e : monomial_basis(n, d)) es.push_back(MonomialObs{std::move(e)});
    Dictionary dict(n, std::move(es), false);
    DictionaryMeta meta;
    meta.kind = "monomials";
    meta.d = d;
    dict.meta_ = std::move(meta);
    return dict;
  }

  // l Gaussian RBFs with centers drawn uniformly in `box` (seeded,
  // deterministic) and a single shared width.
  static Dictionary gaussian_rbf(int n, int l, const Box& box, double width, std::uint64_t seed,
                                 bool include_coords = true) {
    if (l < 1) throw ValidationError("Dictionary::gaussian_rbf: need at least one entry");
    if (static_cast<int>(box.size()) != n)
      throw ValidationError("Dictionary::gaussian_rbf: box dimension mismatch");
    if (!(width > 0.0)) throw ValidationError("Dictionary::gaussian_rbf: width must be positive");
    RngStream rng(seed);
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i + 1;
    std::vector<Observable> es;
    es.reserve(static_cast<std::size_t>(l));
    for (int k = 0; k < l; ++k) {
      Eigen::VectorXd c(n);
      for (int i = 0; i < n; ++i)
        c[i] = rng.uniform(box[static_cast<std::size_t>(i)][0], box[static_cast<std::size_t>(i)][1]);
      es.push_back(RbfObs{std::move(c), width, all});
    }
    Dictionary dict(n, std::move(es), include_coords);
    DictionaryMeta meta;
    meta.kind = "rbf";
    meta.l = l;
    meta.box = box;
    meta.sigma = width;
    meta.seed = seed;
    dict.meta_ = std::move(meta);
    return dict;
  }

  double eval_entry(const Observable& e, const Eigen::VectorXd& x) const {
    if (const auto* m = std::get_if<MonomialObs>(&e)) {
      double v = 1.0;
      for (int i = 0; i < dim_; ++i) {
        const int p = m->exps[static_cast<std::size_t>(i)];
        for (int k = 0; k < p; ++k) v *= x[i];
      }
      return v;
    }
    const auto& r = std::get<RbfObs>(e);
    double sq = 0.0;
    for (int i : r.support) {
      const double d = x[i - 1] - r.center[i - 1];
      sq += d * d;
    }
    return std::exp(-sq / (2.0 * r.width * r.width));
  }

  // Ψ(x) as a column (coordinate rows first when includes_coords).
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const {
    if (x.size() != dim_) throw ValidationError("Dictionary::evaluate: dimension mismatch");
    Eigen::VectorXd out(rows());
    int r = 0;
    if (includes_coords_)
      for (int i = 0; i < dim_; ++i) out[r++] = x[i];
    for (const Observable& e : entries_) out[r++] = eval_entry(e, x);
    return out;
  }

  // Column k holds Ψ(pts.col(k)); a dim×m matrix in, rows()×m out.
  Eigen::MatrixXd evaluate(const Eigen::MatrixXd& pts) const {
    if (pts.rows() != dim_) throw ValidationError("Dictionary::evaluate: dimension mismatch");
    Eigen::MatrixXd out(rows(), pts.cols());
    for (Eigen::Index k = 0; k < pts.cols(); ++k)
      out.col(k) = evaluate(Eigen::VectorXd(pts.col(k)));
    return out;
  }

  // ψ ∘ Π_I for every entry: a dictionary on ℝⁿ that reads only the I
  // coordinates, evaluating bitwise-identically to this dictionary at Π_I x.
  // Prepended coordinate rows become explicit coordinate monomials x_{I_k}.
  Dictionary lift(const IndexSet& I, int n) const {
    if (I.size() != dim_)
      throw ValidationError("Dictionary::lift: |I| must equal dictionary dimension");
    I.range_check(n, "Dictionary::lift");
    std::vector<Observable> es;
    es.reserve(static_cast<std::size_t>(rows()));
    if (includes_coords_) {
      for (int k = 0; k < dim_; ++k) {
        std::vector<int> e(static_cast<std::size_t>(n), 0);
        e[static_cast<std::size_t>(I[k] - 1)] = 1;
        es.push_back(MonomialObs{std::move(e)});
      }
    }
    for (const Observable& obs : entries_) {
      if (const auto* m = std::get_if<MonomialObs>(&obs)) {
        std::vector<int> e(static_cast<std::size_t>(n), 0);
        for (int k = 0; k < dim_; ++k)
          e[static_cast<std::size_t>(I[k] - 1)] = m->exps[static_cast<std::size_t>(k)];
        es.push_back(MonomialObs{std::move(e)});
      } else {
        const auto& r = std::get<RbfObs>(obs);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        std::vector<int> support;
        support.reserve(r.support.size());
        for (int s : r.support) {
          c[I[s - 1] - 1] = r.center[s - 1];
          support.push_back(I[s - 1]);
        }
        es.push_back(RbfObs{std::move(c), r.width, std::move(support)});
      }
    }
    return Dictionary(n, std::move(es), false);
  }

  // Row index of coordinate function x_i (1-based i) in evaluate() output,
  // or -1 when the dictionary does not contain it as an explicit entry.
  int coordinate_row(int i) const {
    if (i < 1 || i > dim_) throw ValidationError("Dictionary::coordinate_row: index out of range");
    if (includes_coords_) return i - 1;
    const int base = 0;
    for (int k = 0; k < num_entries(); ++k) {
      const auto* m = std::get_if<MonomialObs>(&entries_[static_cast<std::size_t>(k)]);
      if (!m) continue;
      if (total_degree(m->exps) != 1) continue;
      if (m->exps[static_cast<std::size_t>(i - 1)] == 1) return base + k;
    }
    return -1;
  }

 private:
  int dim_;
  bool includes_coords_;
  std::vector<Observable> entries_;
  std::optional<DictionaryMeta> meta_;
};

}  // namespace koopman
