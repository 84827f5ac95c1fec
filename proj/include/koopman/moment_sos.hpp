#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"
#include "koopman/measures.hpp"
#include "koopman/polynomial.hpp"

namespace koopman {

// Basic closed set {x : g_i(x) ≥ 0, i = 1..m}. The constant inequality
// g_0 ≡ 1 is implicit (it yields the plain moment matrix). ball_index marks a
// constraint of the form R − ‖x‖², when one is present.
struct SemialgebraicSet {
  int dim = 0;
  std::vector<Polynomial> inequalities;
  std::optional<int> ball_index;

  void validate() const {
    if (dim < 1) throw ValidationError("SemialgebraicSet: dimension must be positive");
    for (const Polynomial& g : inequalities)
      if (g.n() != dim)
        throw ValidationError("SemialgebraicSet: inequality dimension mismatch");
    if (ball_index &&
        (*ball_index < 0 || *ball_index >= static_cast<int>(inequalities.size())))
      throw ValidationError("SemialgebraicSet: ball_index out of range");
  }

  // [-1,1]^dim via 1 − x_i² per coordinate. In one dimension this single
  // constraint is itself the unit-ball constraint.
  static SemialgebraicSet unit_box(int dim) {
    SemialgebraicSet s;
    s.dim = dim;
    for (int i = 1; i <= dim; ++i) {
      Polynomial xi = Polynomial::coordinate(dim, i);
      s.inequalities.push_back(Polynomial::constant(dim, 1.0) - xi * xi);
    }
    if (dim == 1) s.ball_index = 0;
    s.validate();
    return s;
  }

  // Single constraint R − ‖x‖².
  static SemialgebraicSet ball(int dim, double R = 1.0) {
    SemialgebraicSet s;
    s.dim = dim;
    Polynomial norm2 = Polynomial::zero(dim);
    for (int i = 1; i <= dim; ++i) {
      Polynomial xi = Polynomial::coordinate(dim, i);
      norm2 = norm2 + xi * xi;
    }
    s.inequalities.push_back(Polynomial::constant(dim, R) - norm2);
    s.ball_index = 0;
    s.validate();
    return s;
  }
};

// Truncated moment sequence over the monomial basis of a clique: values y_α
// for all |α| ≤ degree, α over the clique's coordinates, in graded-lex order.
class MomentVector {
 public:
  MomentVector(IndexSet clique, int degree)
      : clique_(std::move(clique)),
        degree_(degree),
        basis_(monomial_basis(clique_.size(), degree)),
        y_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_.size()))) {
    if (degree < 0) throw ValidationError("MomentVector: negative degree");
  }

  const IndexSet& clique() const { return clique_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(basis_.size()); }
  const std::vector<std::vector<int>>& basis() const { return basis_; }
  Eigen::VectorXd& values() { return y_; }
  const Eigen::VectorXd& values() const { return y_; }
  double operator[](int i) const { return y_[i]; }
  double& operator[](int i) { return y_[i]; }

  // Position of α in the graded-lex basis, or −1 when |α| > degree.
  int index_of(const std::vector<int>& alpha) const {
    if (static_cast<int>(alpha.size()) != clique_.size())
      throw ValidationError("MomentVector: multi-index length does not match clique");
    auto it = std::lower_bound(basis_.begin(), basis_.end(), alpha, GradedLexLess{});
    if (it == basis_.end() || *it != alpha) return -1;
    return static_cast<int>(it - basis_.begin());
  }

  double value(const std::vector<int>& alpha) const {
    const int i = index_of(alpha);
    if (i < 0)
      throw ValidationError("MomentVector: multi-index exceeds truncation degree");
    return y_[i];
  }

  void set_value(const std::vector<int>& alpha, double v) {
    const int i = index_of(alpha);
    if (i < 0)
      throw ValidationError("MomentVector: multi-index exceeds truncation degree");
    y_[i] = v;
  }

  // y_α = Σ_i w_i · (Π_clique x_i)^α for an atomic measure on the ambient space.
  static MomentVector from_measure(const AtomicMeasure& mu, const IndexSet& clique, int degree) {
    clique.range_check(mu.dim(), "MomentVector::from_measure");
    MomentVector mv(clique, degree);
    for (int a = 0; a < mv.size(); ++a) {
      const std::vector<int>& alpha = mv.basis_[static_cast<std::size_t>(a)];
      KahanAcc acc;
      for (int i = 0; i < mu.size(); ++i) {
        double term = mu.weight(i);
        for (int c = 0; c < clique.size(); ++c) {
          const double xc = mu.position(i)[clique[c] - 1];
          for (int e = 0; e < alpha[static_cast<std::size_t>(c)]; ++e) term *= xc;
        }
        acc.add(term);
      }
      mv.y_[a] = acc.sum;
    }
    return mv;
  }

  // Moments of the arcsine distribution on [−1, 1] (density 1/(π√(1−x²))):
  // m_{2k} = C(2k, k)/4^k, odd moments zero. This is the unique absolutely
  // continuous invariant distribution of x ↦ 2x² − 1.
  static MomentVector arcsine(int degree) {
    MomentVector mv(IndexSet{1}, degree);
    for (int j = 0; j <= degree; ++j) {
      if (j % 2 != 0) continue;
      const int k = j / 2;
      mv.y_[j] = static_cast<double>(binomial(j, k)) / std::pow(4.0, k);
    }
    return mv;
  }

 private:
  IndexSet clique_;
  int degree_;
  std::vector<std::vector<int>> basis_;
  Eigen::VectorXd y_;
};

// ℓ_y(p) = Σ_α p_α y_α. p is written in the clique's local variables.
inline double riesz_apply(const MomentVector& y, const Polynomial& p) {
  if (p.n() != y.clique().size())
    throw ValidationError("riesz_apply: polynomial dimension does not match clique");
  if (p.degree() > y.degree())
    throw ValidationError("riesz_apply: polynomial degree exceeds truncation degree");
  KahanAcc acc;
  for (const auto& term : p.terms()) acc.add(term.coeff * y.value(term.exps));
  return acc.sum;
}

// M(g y): entries ℓ_y(g · x^α · x^β) over the degree-d_i basis,
// d_i = ⌊(d − deg g)/2⌋. PSD whenever y has a representing measure supported
// where g ≥ 0.
inline Eigen::MatrixXd localizing_matrix(const Polynomial& g, const MomentVector& y, int d) {
  if (g.n() != y.clique().size())
    throw ValidationError("localizing_matrix: dimension mismatch");
  if (g.degree() > d) throw ValidationError("localizing_matrix: deg g exceeds d");
  if (d > y.degree())
    throw ValidationError("localizing_matrix: d exceeds the moment vector's degree");
  const int di = (d - g.degree()) / 2;
  const std::vector<std::vector<int>> basis = monomial_basis(g.n(), di);
  const int s = static_cast<int>(basis.size());
  Eigen::MatrixXd M(s, s);
  for (int u = 0; u < s; ++u) {
    for (int v = u; v < s; ++v) {
      Polynomial mono = Polynomial::monomial(g.n(), basis[static_cast<std::size_t>(u)]) *
                        Polynomial::monomial(g.n(), basis[static_cast<std::size_t>(v)]);
      M(u, v) = riesz_apply(y, g * mono);
      M(v, u) = M(u, v);
    }
  }
  return M;
}

// ---- problem description ---------------------------------------------------

// Sparse linear form Σ c_v · y_v over the problem's flat variable vector.
struct LinearForm {
  std::vector<std::pair<int, double>> terms;  // (variable index, coefficient), sorted

  double dot(const Eigen::VectorXd& y) const {
    KahanAcc acc;
    for (const auto& [v, c] : terms) acc.add(c * y[v]);
    return acc.sum;
  }
  bool empty() const { return terms.empty(); }
};

enum class EqKind { mass, invariance, overlap };

struct LinearEq {
  LinearForm lhs;
  double rhs = 0.0;
  EqKind kind = EqKind::mass;
  std::string label;
};

// One PSD constraint: a symmetric matrix whose entries are linear forms in
// the flat variable vector. Upper triangle stored row-major.
struct PsdBlock {
  int size = 0;
  int clique_index = 0;
  std::string label;
  std::vector<LinearForm> upper;  // size·(size+1)/2 entries

  const LinearForm& entry(int i, int j) const {
    if (i > j) std::swap(i, j);
    return upper[static_cast<std::size_t>(i * size - i * (i - 1) / 2 + (j - i))];
  }

  Eigen::MatrixXd assemble(const Eigen::VectorXd& y) const {
    Eigen::MatrixXd M(size, size);
    for (int i = 0; i < size; ++i)
      for (int j = i; j < size; ++j) {
        M(i, j) = entry(i, j).dot(y);
        M(j, i) = M(i, j);
      }
    return M;
  }
};

struct CliqueDecl {
  IndexSet vars;   // global coordinates
  int degree = 0;
  int offset = 0;  // start of this clique's variables in the flat vector
  std::vector<std::vector<int>> basis;

  int size() const { return static_cast<int>(basis.size()); }
};

struct MomentProblem {
  int dim = 0;     // ambient state dimension
  int degree = 0;  // truncation degree d
  std::vector<CliqueDecl> cliques;
  LinearForm objective;  // minimized
  std::vector<LinearEq> equalities;
  std::vector<PsdBlock> psd_blocks;
  int total_vars = 0;

  int var_index(int k, const std::vector<int>& alpha) const {
    const CliqueDecl& cl = cliques[static_cast<std::size_t>(k)];
    auto it = std::lower_bound(cl.basis.begin(), cl.basis.end(), alpha, GradedLexLess{});
    if (it == cl.basis.end() || *it != alpha)
      throw ValidationError("MomentProblem: multi-index exceeds truncation degree");
    return cl.offset + static_cast<int>(it - cl.basis.begin());
  }

  // Side length of clique k's plain moment matrix, C(|I_k| + d/2, |I_k|).
  // This is the count the variable-number shorthand C(n + d/2, n) refers to.
  int moment_matrix_side(int k) const {
    const CliqueDecl& cl = cliques[static_cast<std::size_t>(k)];
    return static_cast<int>(binomial(cl.vars.size() + degree / 2, cl.vars.size()));
  }

  std::vector<MomentVector> split(const Eigen::VectorXd& y) const {
    if (y.size() != total_vars)
      throw ValidationError("MomentProblem::split: flat vector has wrong length");
    std::vector<MomentVector> out;
    out.reserve(cliques.size());
    for (const CliqueDecl& cl : cliques) {
      MomentVector mv(cl.vars, cl.degree);
      mv.values() = y.segment(cl.offset, cl.size());
      out.push_back(std::move(mv));
    }
    return out;
  }

  Eigen::VectorXd flatten(const std::vector<MomentVector>& values) const {
    if (values.size() != cliques.size())
      throw ValidationError("MomentProblem::flatten: clique count mismatch");
    Eigen::VectorXd y(total_vars);
    for (std::size_t k = 0; k < cliques.size(); ++k) {
      const CliqueDecl& cl = cliques[k];
      if (values[k].clique() != cl.vars || values[k].degree() != cl.degree)
        throw ValidationError("MomentProblem::flatten: clique " + std::to_string(k + 1) +
                              " does not match the problem declaration");
      y.segment(cl.offset, cl.size()) = values[k].values();
    }
    return y;
  }
};

namespace detail {

inline LinearForm consolidate(std::map<int, double> acc) {
  LinearForm f;
  for (const auto& [v, c] : acc)
    if (c != 0.0) f.terms.emplace_back(v, c);
  return f;
}

// ℓ_y(p) as a linear form over clique cl's variables; p in local variables.
inline LinearForm riesz_form(const Polynomial& p, const CliqueDecl& cl,
                             const MomentProblem& prob, int k) {
  std::map<int, double> acc;
  for (const auto& term : p.terms()) {
    if (total_degree(term.exps) > cl.degree)
      throw ValidationError("moment problem assembly: polynomial degree exceeds truncation");
    acc[prob.var_index(k, term.exps)] += term.coeff;
  }
  return consolidate(std::move(acc));
}

inline PsdBlock localizing_block(const Polynomial& g_local, int k, const MomentProblem& prob,
                                 std::string label) {
  const CliqueDecl& cl = prob.cliques[static_cast<std::size_t>(k)];
  if (g_local.degree() > cl.degree)
    throw ValidationError("moment problem assembly: inequality degree exceeds truncation (" +
                          label + ")");
  const int di = (cl.degree - g_local.degree()) / 2;
  const std::vector<std::vector<int>> basis = monomial_basis(g_local.n(), di);
  PsdBlock blk;
  blk.size = static_cast<int>(basis.size());
  blk.clique_index = k;
  blk.label = std::move(label);
  blk.upper.reserve(static_cast<std::size_t>(blk.size) * (blk.size + 1) / 2);
  for (int u = 0; u < blk.size; ++u)
    for (int v = u; v < blk.size; ++v) {
      Polynomial mono = Polynomial::monomial(g_local.n(), basis[static_cast<std::size_t>(u)]) *
                        Polynomial::monomial(g_local.n(), basis[static_cast<std::size_t>(v)]);
      blk.upper.push_back(riesz_form(g_local * mono, cl, prob, k));
    }
  return blk;
}

inline std::string exps_string(const std::vector<int>& alpha) {
  std::string s = "(";
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(alpha[i]);
  }
  return s + ")";
}

// Shared preconditions of all three builders.
inline void check_builder_inputs(const SparseSystem& f, int d) {
  if (!f.is_discrete())
    throw ValidationError("moment problem assembly: discrete-time systems only");
  if (!f.is_polynomial())
    throw ValidationError("moment problem assembly: polynomial systems only");
  if (d < 2 || d % 2 != 0)
    throw ValidationError("moment problem assembly: degree must be even and ≥ 2");
}

// Mass + invariance equalities for clique k whose dynamics are f_local
// (a polynomial map in the clique's local variables).
inline void append_clique_equalities(MomentProblem& prob, int k,
                                     const std::vector<Polynomial>& f_local,
                                     const std::string& tag) {
  const CliqueDecl& cl = prob.cliques[static_cast<std::size_t>(k)];
  {
    LinearEq eq;
    eq.lhs.terms.emplace_back(cl.offset, 1.0);
    eq.rhs = 1.0;
    eq.kind = EqKind::mass;
    eq.label = "mass" + tag;
    prob.equalities.push_back(std::move(eq));
  }
  for (const std::vector<int>& alpha : cl.basis) {
    if (total_degree(alpha) == 0) continue;
    const Polynomial comp = compose_monomial_with_map(alpha, f_local);
    if (comp.degree() > cl.degree) continue;
    std::map<int, double> acc;
    for (const auto& term : comp.terms()) acc[prob.var_index(k, term.exps)] += term.coeff;
    acc[prob.var_index(k, alpha)] -= 1.0;
    LinearForm lhs = consolidate(std::move(acc));
    if (lhs.empty()) continue;  // x^α∘f ≡ x^α (identity component): vacuous
    LinearEq eq;
    eq.lhs = std::move(lhs);
    eq.rhs = 0.0;
    eq.kind = EqKind::invariance;
    eq.label = "invariance" + tag + " " + exps_string(alpha);
    prob.equalities.push_back(std::move(eq));
  }
}

inline std::vector<Polynomial> local_component_polys(const SparseSystem& sub) {
  std::vector<Polynomial> out;
  out.reserve(static_cast<std::size_t>(sub.n()));
  for (int j = 1; j <= sub.n(); ++j) out.push_back(*sub.comp(j).poly);
  return out;
}

}  // namespace detail

// Full truncated problem: one clique {1..n}; minimize ℓ_y(G) subject to
// y_0 = 1, ℓ_y(x^α∘f) = y_α whenever deg(x^α∘f) ≤ d, M(y) ⪰ 0 and
// M(g_i y) ⪰ 0 for each inequality of X.
inline MomentProblem build_full_problem(const SparseSystem& f, const SemialgebraicSet& X,
                                        const Polynomial& G, int d) {
  detail::check_builder_inputs(f, d);
  X.validate();
  if (X.dim != f.n())
    throw ValidationError("build_full_problem: set dimension does not match system");
  if (G.n() != f.n())
    throw ValidationError("build_full_problem: cost dimension does not match system");
  if (G.degree() > d) throw ValidationError("build_full_problem: cost degree exceeds d");

  MomentProblem prob;
  prob.dim = f.n();
  prob.degree = d;
  CliqueDecl cl{IndexSet::full(f.n()), d, 0, monomial_basis(f.n(), d)};
  prob.total_vars = cl.size();
  prob.cliques.push_back(std::move(cl));

  prob.objective = detail::riesz_form(G, prob.cliques[0], prob, 0);
  detail::append_clique_equalities(prob, 0, detail::local_component_polys(f), "");
  prob.psd_blocks.push_back(detail::localizing_block(Polynomial::constant(f.n(), 1.0), 0,
                                                     prob, "moment"));
  for (std::size_t i = 0; i < X.inequalities.size(); ++i)
    prob.psd_blocks.push_back(detail::localizing_block(
        X.inequalities[i], 0, prob, "localizing g" + std::to_string(i + 1)));
  return prob;
}

// Sparse truncated problem: one clique per part I_k at degree d, each with its
// own mass, invariance (w.r.t. the subsystem map f_{I_k}), and PSD blocks from
// the projected set; marginal consistency y^(k)_α = y^(l)_α on overlaps;
// objective Σ_k ℓ_{y^(k)}(G_k).
inline MomentProblem build_sparse_problem(const SparseSystem& f,
                                          const std::vector<IndexSet>& parts,
                                          const std::vector<SemialgebraicSet>& partsets,
                                          const std::vector<Polynomial>& costs, int d) {
  detail::check_builder_inputs(f, d);
  if (parts.empty()) throw ValidationError("build_sparse_problem: no parts");
  if (partsets.size() != parts.size() || costs.size() != parts.size())
    throw ValidationError("build_sparse_problem: parts/partsets/costs length mismatch");
  const SparsityGraph graph = f.sparsity_graph();
  IndexSet cover;
  for (const IndexSet& I : parts) {
    I.range_check(f.n(), "build_sparse_problem");
    if (!graph.is_subsystem(I))
      throw ValidationError("build_sparse_problem: part " + I.to_string() +
                            " is not a subsystem");
    cover = set_union(cover, I);
  }
  if (cover != IndexSet::full(f.n()))
    throw ValidationError("build_sparse_problem: parts do not cover all coordinates");

  MomentProblem prob;
  prob.dim = f.n();
  prob.degree = d;
  int offset = 0;
  for (const IndexSet& I : parts) {
    CliqueDecl cl{I, d, offset, monomial_basis(I.size(), d)};
    offset += cl.size();
    prob.cliques.push_back(std::move(cl));
  }
  prob.total_vars = offset;

  // Objective: each part's cost, validated against its coordinates.
  std::map<int, double> obj;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Polynomial& Gk = costs[k];
    if (Gk.n() != f.n())
      throw ValidationError("build_sparse_problem: cost " + std::to_string(k + 1) +
                            " must be written in the ambient variables");
    if (!Gk.support().subset_of(parts[k]))
      throw ValidationError("build_sparse_problem: cost " + std::to_string(k + 1) +
                            " references coordinates outside " + parts[k].to_string());
    const Polynomial local = Gk.relabel_to_subset(parts[k]);
    if (local.degree() > d)
      throw ValidationError("build_sparse_problem: cost degree exceeds d");
    for (const auto& term : local.terms())
      obj[prob.var_index(static_cast<int>(k), term.exps)] += term.coeff;
  }
  prob.objective = detail::consolidate(std::move(obj));

  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::string tag = "[" + std::to_string(k + 1) + "]";
    const SparseSystem sub = f.project(parts[k]);
    detail::append_clique_equalities(prob, static_cast<int>(k),
                                     detail::local_component_polys(sub), tag);
    const SemialgebraicSet& S = partsets[k];
    S.validate();
    if (S.dim != parts[k].size())
      throw ValidationError("build_sparse_problem: partset " + std::to_string(k + 1) +
                            " dimension does not match its part");
    prob.psd_blocks.push_back(detail::localizing_block(
        Polynomial::constant(S.dim, 1.0), static_cast<int>(k), prob, "moment" + tag));
    for (std::size_t i = 0; i < S.inequalities.size(); ++i)
      prob.psd_blocks.push_back(
          detail::localizing_block(S.inequalities[i], static_cast<int>(k), prob,
                                   "localizing" + tag + " g" + std::to_string(i + 1)));
  }

  // Overlap consistency, once per unordered pair.
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    for (std::size_t l = k + 1; l < parts.size(); ++l) {
      const IndexSet O = set_intersection(parts[k], parts[l]);
      if (O.empty()) continue;
      const IndexSet pos_k = detail::local_positions(parts[k], O);
      const IndexSet pos_l = detail::local_positions(parts[l], O);
      for (const std::vector<int>& alpha : monomial_basis(O.size(), d)) {
        if (total_degree(alpha) == 0) continue;
        std::vector<int> ek(static_cast<std::size_t>(parts[k].size()), 0);
        std::vector<int> el(static_cast<std::size_t>(parts[l].size()), 0);
        for (int c = 0; c < O.size(); ++c) {
          ek[static_cast<std::size_t>(pos_k[c] - 1)] = alpha[static_cast<std::size_t>(c)];
          el[static_cast<std::size_t>(pos_l[c] - 1)] = alpha[static_cast<std::size_t>(c)];
        }
        LinearEq eq;
        eq.lhs.terms.emplace_back(prob.var_index(static_cast<int>(k), ek), 1.0);
        eq.lhs.terms.emplace_back(prob.var_index(static_cast<int>(l), el), -1.0);
        std::sort(eq.lhs.terms.begin(), eq.lhs.terms.end());
        eq.rhs = 0.0;
        eq.kind = EqKind::overlap;
        eq.label = "overlap[" + std::to_string(k + 1) + "," + std::to_string(l + 1) + "] " +
                   detail::exps_string(alpha);
        prob.equalities.push_back(std::move(eq));
      }
    }
  }
  return prob;
}

// Full clique and full PSD blocks, but invariance only for test monomials
// supported on some part — the relaxation dropping cross-part invariance.
inline MomentProblem build_relaxed_full_problem(const SparseSystem& f,
                                                const std::vector<IndexSet>& parts,
                                                const SemialgebraicSet& X, const Polynomial& G,
                                                int d) {
  detail::check_builder_inputs(f, d);
  if (parts.empty()) throw ValidationError("build_relaxed_full_problem: no parts");
  const SparsityGraph graph = f.sparsity_graph();
  for (const IndexSet& I : parts) {
    I.range_check(f.n(), "build_relaxed_full_problem");
    if (!graph.is_subsystem(I))
      throw ValidationError("build_relaxed_full_problem: part " + I.to_string() +
                            " is not a subsystem");
  }
  MomentProblem prob = build_full_problem(f, X, G, d);
  // Rebuild the equality list, keeping mass and only part-supported invariance.
  std::vector<LinearEq> eqs;
  for (LinearEq& eq : prob.equalities)
    if (eq.kind == EqKind::mass) eqs.push_back(std::move(eq));
  const std::vector<Polynomial> fpolys = detail::local_component_polys(f);
  std::set<std::vector<int>, GradedLexLess> alphas;
  for (const IndexSet& I : parts)
    for (const std::vector<int>& alpha_local : monomial_basis(I.size(), d)) {
      if (total_degree(alpha_local) == 0) continue;
      std::vector<int> alpha(static_cast<std::size_t>(f.n()), 0);
      for (int c = 0; c < I.size(); ++c)
        alpha[static_cast<std::size_t>(I[c] - 1)] = alpha_local[static_cast<std::size_t>(c)];
      alphas.insert(std::move(alpha));
    }
  for (const std::vector<int>& alpha : alphas) {
    const Polynomial comp = compose_monomial_with_map(alpha, fpolys);
    if (comp.degree() > d) continue;
    std::map<int, double> acc;
    for (const auto& term : comp.terms()) acc[prob.var_index(0, term.exps)] += term.coeff;
    acc[prob.var_index(0, alpha)] -= 1.0;
    LinearForm lhs = detail::consolidate(std::move(acc));
    if (lhs.empty()) continue;
    LinearEq eq;
    eq.lhs = std::move(lhs);
    eq.rhs = 0.0;
    eq.kind = EqKind::invariance;
    eq.label = "invariance " + detail::exps_string(alpha);
    eqs.push_back(std::move(eq));
  }
  prob.equalities = std::move(eqs);
  return prob;
}

// ---- feasibility checking --------------------------------------------------

struct FeasibilityReport {
  double equality_max = 0.0;  // mass + invariance equalities
  double overlap_max = 0.0;   // marginal-consistency equalities
  double psd_min_eig = 0.0;   // min eigenvalue over all PSD blocks
  bool feasible = false;
};

inline FeasibilityReport verify_feasibility(const std::vector<MomentVector>& values,
                                            const MomentProblem& prob, double tol) {
  const Eigen::VectorXd y = prob.flatten(values);
  FeasibilityReport rep;
  for (const LinearEq& eq : prob.equalities) {
    const double r = std::abs(eq.lhs.dot(y) - eq.rhs);
    if (eq.kind == EqKind::overlap)
      rep.overlap_max = std::max(rep.overlap_max, r);
    else
      rep.equality_max = std::max(rep.equality_max, r);
  }
  double mineig = std::numeric_limits<double>::infinity();
  for (const PsdBlock& blk : prob.psd_blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(blk.assemble(y),
                                                      Eigen::EigenvaluesOnly);
    mineig = std::min(mineig, es.eigenvalues().minCoeff());
  }
  rep.psd_min_eig = prob.psd_blocks.empty() ? 0.0 : mineig;
  rep.feasible =
      rep.equality_max <= tol && rep.overlap_max <= tol && rep.psd_min_eig >= -tol;
  return rep;
}

}  // namespace koopman
