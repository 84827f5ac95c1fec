#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"

namespace koopman {

// Compensated (Kahan) accumulator. Coefficient arithmetic in polynomial
// products/compositions runs through this so that expanded coefficients stay
// accurate to a few ulps even with many cancelling contributions.
struct KahanAcc {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    double y = v - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

inline std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  if (k > n - k) k = n - k;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline int total_degree(const std::vector<int>& exps) {
  int d = 0;
  for (int e : exps) d += e;
  return d;
}

// Graded-lexicographic order on exponent vectors: lower total degree first;
// within a degree, lexicographically descending (x1² before x1x2 before x2²).
struct GradedLexLess {
  bool operator()(const std::vector<int>& a, const std::vector<int>& b) const {
    int da = total_degree(a), db = total_degree(b);
    if (da != db) return da < db;
    return b < a;
  }
};

// All exponent vectors in n variables with total degree ≤ d, graded-lex.
// Size binom(n+d, n). For n = 0 the single empty monomial.
inline std::vector<std::vector<int>> monomial_basis(int n, int d) {
  if (n < 0 || d < 0) throw ValidationError("monomial_basis: n and d must be nonnegative");
  std::vector<std::vector<int>> out;
  std::vector<int> cur(static_cast<std::size_t>(n), 0);
  // Emit all vectors of total degree exactly `deg`, lexicographically descending.
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == n - 1) {
      cur[static_cast<std::size_t>(pos)] = remaining;
      out.push_back(cur);
      return;
    }
    for (int e = remaining; e >= 0; --e) {
      cur[static_cast<std::size_t>(pos)] = e;
      self(self, pos + 1, remaining - e);
    }
  };
  for (int deg = 0; deg <= d; ++deg) {
    if (n == 0) {
      if (deg == 0) out.emplace_back();
      continue;
    }
    rec(rec, 0, deg);
  }
  return out;
}

// A multivariate polynomial in canonical form: terms sorted graded-lex,
// no duplicate exponent vectors, zero coefficients removed.
class Polynomial {
 public:
  struct Term {
    double coeff;
    std::vector<int> exps;
  };

  Polynomial() : n_(0) {}
  explicit Polynomial(int n) : n_(n) {
    if (n < 0) throw ValidationError("Polynomial: negative dimension");
  }

  Polynomial(int n, const std::vector<Term>& terms) : Polynomial(n) {
    std::map<std::vector<int>, KahanAcc, GradedLexLess> acc;
    for (const Term& t : terms) {
      if (static_cast<int>(t.exps.size()) != n)
        throw ValidationError("Polynomial: term exponent size mismatch");
      for (int e : t.exps)
        if (e < 0) throw ValidationError("Polynomial: negative exponent");
      acc[t.exps].add(t.coeff);
    }
    assign_from(acc);
  }

  static Polynomial zero(int n) { return Polynomial(n); }

  static Polynomial constant(int n, double c) {
    Polynomial p(n);
    if (c != 0.0) p.terms_.push_back({c, std::vector<int>(static_cast<std::size_t>(n), 0)});
    return p;
  }

  // c · x^exps
  static Polynomial monomial(int n, std::vector<int> exps, double c = 1.0) {
    return Polynomial(n, {Term{c, std::move(exps)}});
  }

  // x_i (1-based).
  static Polynomial coordinate(int n, int i) {
    if (i < 1 || i > n) throw ValidationError("Polynomial::coordinate: index out of range");
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    e[static_cast<std::size_t>(i - 1)] = 1;
    return monomial(n, std::move(e));
  }

  int n() const { return n_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const Term& t : terms_) d = std::max(d, total_degree(t.exps));
    return d;
  }

  // Indices (1-based) of variables appearing with a nonzero exponent.
  IndexSet support() const {
    std::vector<int> vars;
    for (const Term& t : terms_)
      for (int i = 0; i < n_; ++i)
        if (t.exps[static_cast<std::size_t>(i)] > 0) vars.push_back(i + 1);
    return IndexSet(std::move(vars));
  }

  // Evaluation with a fixed, canonical operation order: terms in graded-lex
  // order, factors by ascending variable index, powers by repeated
  // multiplication. Subsystem-projected polynomials (see relabel) then
  // reproduce the exact same floating-point operations, which is what makes
  // projection commute with simulation bitwise.
  double eval(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw ValidationError("Polynomial::eval: dimension mismatch");
    double s = 0.0;
    for (const Term& t : terms_) {
      double v = t.coeff;
      for (int i = 0; i < n_; ++i) {
        const int e = t.exps[static_cast<std::size_t>(i)];
        for (int k = 0; k < e; ++k) v *= x[i];
      }
      s += v;
    }
    return s;
  }

  Polynomial operator-() const {
    Polynomial p(*this);
    for (Term& t : p.terms_) t.coeff = -t.coeff;
    return p;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    check_same_dim(a, b, "+");
    std::vector<Term> ts = a.terms_;
    ts.insert(ts.end(), b.terms_.begin(), b.terms_.end());
    return Polynomial(a.n_, ts);
  }

  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }

  friend Polynomial operator*(double c, const Polynomial& p) {
    std::vector<Term> ts = p.terms_;
    for (Term& t : ts) t.coeff *= c;
    return Polynomial(p.n_, ts);
  }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    check_same_dim(a, b, "*");
    std::map<std::vector<int>, KahanAcc, GradedLexLess> acc;
    std::vector<int> e(static_cast<std::size_t>(a.n_));
    for (const Term& ta : a.terms_) {
      for (const Term& tb : b.terms_) {
        for (int i = 0; i < a.n_; ++i)
          e[static_cast<std::size_t>(i)] =
              ta.exps[static_cast<std::size_t>(i)] + tb.exps[static_cast<std::size_t>(i)];
        acc[e].add(ta.coeff * tb.coeff);
      }
    }
    Polynomial p(a.n_);
    p.assign_from(acc);
    return p;
  }

  Polynomial pow(int e) const {
    if (e < 0) throw ValidationError("Polynomial::pow: negative exponent");
    Polynomial r = constant(n_, 1.0);
    for (int k = 0; k < e; ++k) r = r * (*this);
    return r;
  }

  // ∂p/∂x_i (1-based).
  Polynomial derivative(int i) const {
    if (i < 1 || i > n_) throw ValidationError("Polynomial::derivative: index out of range");
    std::vector<Term> ts;
    for (const Term& t : terms_) {
      const int e = t.exps[static_cast<std::size_t>(i - 1)];
      if (e == 0) continue;
      Term d = t;
      d.coeff *= e;
      d.exps[static_cast<std::size_t>(i - 1)] = e - 1;
      ts.push_back(std::move(d));
    }
    return Polynomial(n_, ts);
  }

  // p ∘ f where f = (f_1..f_n) is a polynomial map into the same space the
  // f_i live on. All f_i must share a dimension.
  Polynomial compose(const std::vector<Polynomial>& f) const {
    if (static_cast<int>(f.size()) != n_)
      throw ValidationError("Polynomial::compose: map dimension mismatch");
    const int m = f.empty() ? 0 : f.front().n();
    for (const Polynomial& fi : f)
      if (fi.n() != m) throw ValidationError("Polynomial::compose: inconsistent map components");
    Polynomial out = Polynomial::zero(m);
    for (const Term& t : terms_) {
      Polynomial prod = constant(m, t.coeff);
      for (int i = 0; i < n_; ++i) {
        const int e = t.exps[static_cast<std::size_t>(i)];
        for (int k = 0; k < e; ++k) prod = prod * f[static_cast<std::size_t>(i)];
      }
      out = out + prod;
    }
    return out;
  }

  // Restrict an n-variable polynomial whose support lies in I to |I| local
  // variables (sorted order of I ↦ 1..|I|). The relabeling is
  // order-preserving, so term order and per-term factor order are unchanged.
  Polynomial relabel_to_subset(const IndexSet& I) const {
    I.range_check(n_, "Polynomial::relabel_to_subset");
    std::vector<Term> ts;
    for (const Term& t : terms_) {
      Term local;
      local.coeff = t.coeff;
      local.exps.assign(static_cast<std::size_t>(I.size()), 0);
      for (int i = 0; i < n_; ++i) {
        const int e = t.exps[static_cast<std::size_t>(i)];
        if (e == 0) continue;
        const int pos = I.position_of(i + 1);
        if (pos < 0)
          throw StructuralError("Polynomial::relabel_to_subset: term touches x" +
                                std::to_string(i + 1) + " outside " + I.to_string());
        local.exps[static_cast<std::size_t>(pos)] = e;
      }
      ts.push_back(std::move(local));
    }
    return Polynomial(I.size(), ts);
  }

  // Inverse of relabel_to_subset: scatter an |I|-variable polynomial into n
  // ambient variables, local slot k ↦ global coordinate I[k].
  Polynomial embed(const IndexSet& I, int n) const {
    if (I.size() != n_) throw ValidationError("Polynomial::embed: |I| must equal dimension");
    I.range_check(n, "Polynomial::embed");
    std::vector<Term> ts;
    for (const Term& t : terms_) {
      Term g;
      g.coeff = t.coeff;
      g.exps.assign(static_cast<std::size_t>(n), 0);
      for (int k = 0; k < n_; ++k)
        g.exps[static_cast<std::size_t>(I[k] - 1)] = t.exps[static_cast<std::size_t>(k)];
      ts.push_back(std::move(g));
    }
    return Polynomial(n, ts);
  }

  bool operator==(const Polynomial& other) const {
    if (n_ != other.n_ || terms_.size() != other.terms_.size()) return false;
    for (std::size_t k = 0; k < terms_.size(); ++k) {
      if (terms_[k].exps != other.terms_[k].exps || terms_[k].coeff != other.terms_[k].coeff)
        return false;
    }
    return true;
  }

  std::string to_string(const std::string& var = "x") const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const Term& t : terms_) {
      double c = t.coeff;
      if (!first) {
        os << (c < 0 ? " - " : " + ");
        if (c < 0) c = -c;
      }
      first = false;
      bool has_var = total_degree(t.exps) > 0;
      if (!has_var || c != 1.0) {
        os << c;
        if (has_var) os << '*';
      }
      bool fv = true;
      for (int i = 0; i < n_; ++i) {
        const int e = t.exps[static_cast<std::size_t>(i)];
        if (e == 0) continue;
        if (!fv) os << '*';
        fv = false;
        os << var << (i + 1);
        if (e > 1) os << '^' << e;
      }
    }
    return os.str();
  }

 private:
  static void check_same_dim(const Polynomial& a, const Polynomial& b, const char* op) {
    if (a.n_ != b.n_)
      throw ValidationError(std::string("Polynomial: dimension mismatch in operator") + op);
  }

  void assign_from(const std::map<std::vector<int>, KahanAcc, GradedLexLess>& acc) {
    terms_.clear();
    for (const auto& [e, a] : acc) {
      if (a.sum != 0.0) terms_.push_back({a.sum, e});
    }
  }

  int n_;
  std::vector<Term> terms_;  // canonical: graded-lex sorted, unique, nonzero
};

// x^α ∘ f, fully expanded: the product Π f_i^{α_i} with compensated
// coefficient accumulation.
inline Polynomial compose_monomial_with_map(const std::vector<int>& alpha,
                                            const std::vector<Polynomial>& f) {
  if (f.empty()) throw ValidationError("compose_monomial_with_map: empty map");
  if (alpha.size() != f.size())
    throw ValidationError("compose_monomial_with_map: multi-index size mismatch");
  const int m = f.front().n();
  Polynomial prod = Polynomial::constant(m, 1.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i].n() != m)
      throw ValidationError("compose_monomial_with_map: inconsistent map components");
    for (int k = 0; k < alpha[i]; ++k) prod = prod * f[i];
  }
  return prod;
}

}  // namespace koopman
