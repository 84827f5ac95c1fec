#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"
#include "koopman/polynomial.hpp"
#include "koopman/rng.hpp"
#include "koopman/sparsity_graph.hpp"

namespace koopman {

enum class SystemKind { continuous, discrete };

// Per-coordinate sampling box [lo, hi].
using Box = std::vector<std::array<double, 2>>;

struct Trajectory {
  std::vector<double> times;            // strictly increasing
  std::vector<Eigen::VectorXd> states;  // same length as times
};

// Snapshot pairs (x(k), y(k)) with y(k) = φ_h(x(k)) (continuous) or f(x(k))
// (discrete), stored as columns.
struct SnapshotSet {
  Eigen::MatrixXd X;
  Eigen::MatrixXd Y;
  double h = 0.0;          // macro step (continuous systems only)
  std::uint64_t seed = 0;  // RNG seed the set was drawn with
};

struct SnapshotOptions {
  int substeps = 10;  // internal RK4 substeps per macro step h
  int traj_len = 1;   // consecutive pairs collected per initial condition
};

// Provenance of a builtin (possibly projected) system, kept for serialization.
struct BuiltinInfo {
  std::string name;
  std::map<std::string, std::vector<double>> params;
  std::vector<int> project;  // composed projection onto original coordinates
};

// One component f_j of the vector field / map: a declared dependency set
// (which, unlike sparsity-graph edges, may include j itself) plus an
// evaluator — either a polynomial in the system's n variables or an opaque
// function of the state vector.
struct Component {
  IndexSet deps;
  std::optional<Polynomial> poly;
  std::function<double(const Eigen::VectorXd&)> fn;
};

struct DuffingParams {
  double delta = 0.5;
  double beta = -1.0;
  double alpha = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 2.0;
};

// A dynamical system ẋ = f(x) or x⁺ = f(x) whose components carry explicit
// dependency sets. Immutable; all operations are pure.
class SparseSystem {
 public:
  SparseSystem(int n, SystemKind kind, std::vector<Component> components)
      : n_(n), kind_(kind), comps_(std::move(components)) {
    if (n < 1) throw ValidationError("SparseSystem: dimension must be positive");
    if (static_cast<int>(comps_.size()) != n)
      throw ValidationError("SparseSystem: expected " + std::to_string(n) + " components, got " +
                            std::to_string(comps_.size()));
    for (int j = 1; j <= n_; ++j) {
      const Component& c = comp(j);
      c.deps.range_check(n_, "SparseSystem: component " + std::to_string(j) + " deps");
      if (c.poly) {
        if (c.poly->n() != n_)
          throw ValidationError("SparseSystem: component " + std::to_string(j) +
                                " polynomial has wrong dimension");
        // A polynomial may not touch undeclared coordinates.
        for (int i : c.poly->support()) {
          if (!c.deps.contains(i))
            throw ValidationError("SparseSystem: component " + std::to_string(j) +
                                  " polynomial depends on undeclared x" + std::to_string(i));
        }
      } else if (!c.fn) {
        throw ValidationError("SparseSystem: component " + std::to_string(j) +
                              " has no evaluator");
      }
    }
    labels_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) labels_[static_cast<std::size_t>(i)] = i + 1;
  }

  int n() const { return n_; }
  SystemKind kind() const { return kind_; }
  bool is_discrete() const { return kind_ == SystemKind::discrete; }
  const Component& comp(int j) const { return comps_[static_cast<std::size_t>(j - 1)]; }
  bool is_polynomial() const {
    for (const Component& c : comps_)
      if (!c.poly) return false;
    return true;
  }

  // Global coordinate labels: identity for a freshly built system; for a
  // projected system, the original indices each local coordinate came from.
  const std::vector<int>& labels() const { return labels_; }

  const std::optional<BuiltinInfo>& builtin_info() const { return builtin_info_; }

  double eval_component(int j, const Eigen::VectorXd& x) const {
    const Component& c = comp(j);
    return c.poly ? c.poly->eval(x) : c.fn(x);
  }

  Eigen::VectorXd eval(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw ValidationError("SparseSystem::eval: dimension mismatch");
    Eigen::VectorXd out(n_);
    for (int j = 1; j <= n_; ++j) out[j - 1] = eval_component(j, x);
    return out;
  }

  // Sparsity graph of the field: declared deps minus self-dependencies.
  SparsityGraph sparsity_graph() const {
    std::vector<IndexSet> d;
    d.reserve(comps_.size());
    for (const Component& c : comps_) d.push_back(c.deps);
    return SparsityGraph::from_dependencies(d, n_);  // constructor drops self-edges
  }

  // The subsystem (I, f_I): the components f_i, i ∈ I, relabeled to local
  // coordinates 1..|I| in the sorted order of I. Satisfies
  // f_I(Π_I x) = Π_I f(x) — bitwise, because each component performs the
  // identical floating-point operations on the identical coordinate values
  // (polynomials are relabeled order-preservingly; opaque components receive
  // their declared coordinates via scatter).
  SparseSystem project(const IndexSet& I) const {
    I.range_check(n_, "SparseSystem::project");
    if (I.empty()) throw ValidationError("SparseSystem::project: empty index set");
    for (int j : I) {
      for (int i : comp(j).deps) {
        if (i != j && !I.contains(i))
          throw StructuralError("SparseSystem::project: " + I.to_string() +
                                " is not a subsystem — component " + std::to_string(j) +
                                " depends on x" + std::to_string(i));
      }
    }
    std::vector<Component> sub;
    sub.reserve(static_cast<std::size_t>(I.size()));
    const int parent_n = n_;
    for (int j : I) {
      const Component& c = comp(j);
      Component lc;
      std::vector<int> local_deps;
      for (int i : c.deps) local_deps.push_back(I.position_of(i) + 1);
      lc.deps = IndexSet(std::move(local_deps));
      if (c.poly) {
        lc.poly = c.poly->relabel_to_subset(I);
      } else {
        lc.fn = [fn = c.fn, I, parent_n](const Eigen::VectorXd& xl) {
          return fn(scatter_coords(xl, I, parent_n));
        };
      }
      sub.push_back(std::move(lc));
    }
    SparseSystem s(I.size(), kind_, std::move(sub));
    for (int k = 0; k < I.size(); ++k)
      s.labels_[static_cast<std::size_t>(k)] = labels_[static_cast<std::size_t>(I[k] - 1)];
    if (builtin_info_) {
      BuiltinInfo bi = *builtin_info_;
      std::vector<int> proj;
      for (int k = 0; k < I.size(); ++k) {
        proj.push_back(bi.project.empty() ? I[k]
                                          : bi.project[static_cast<std::size_t>(I[k] - 1)]);
      }
      bi.project = std::move(proj);
      s.builtin_info_ = std::move(bi);
    }
    return s;
  }

  // One classical RK4 step. The combination formulas are evaluated
  // coefficient-wise, so coordinate i of the result involves only
  // coordinates reachable through deps — the basis of the bitwise
  // projection/flow commutation.
  Eigen::VectorXd rk4_step(const Eigen::VectorXd& x, double h) const {
    Eigen::VectorXd k1 = eval(x);
    Eigen::VectorXd k2 = eval(x + (0.5 * h) * k1);
    Eigen::VectorXd k3 = eval(x + (0.5 * h) * k2);
    Eigen::VectorXd k4 = eval(x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Fixed-step RK4 trajectory; continuous systems only.
  Trajectory integrate(const Eigen::VectorXd& x0, double h, int steps) const {
    if (kind_ != SystemKind::continuous)
      throw ValidationError("integrate: system is discrete; use iterate_map");
    if (h <= 0.0) throw ValidationError("integrate: step size must be positive");
    if (steps < 0) throw ValidationError("integrate: negative step count");
    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(steps) + 1);
    traj.states.reserve(static_cast<std::size_t>(steps) + 1);
    Eigen::VectorXd x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (int k = 1; k <= steps; ++k) {
      x = rk4_step(x, h);
      if (!x.allFinite())
        throw DivergenceError("integrate: non-finite state at step " + std::to_string(k),
                              static_cast<std::size_t>(k));
      traj.times.push_back(static_cast<double>(k) * h);
      traj.states.push_back(x);
    }
    return traj;
  }

  // x_{k+1} = f(x_k); discrete systems only. times = 0..steps.
  Trajectory iterate_map(const Eigen::VectorXd& x0, int steps) const {
    if (kind_ != SystemKind::discrete)
      throw ValidationError("iterate_map: system is continuous; use integrate");
    if (steps < 0) throw ValidationError("iterate_map: negative step count");
    Trajectory traj;
    traj.times.reserve(static_cast<std::size_t>(steps) + 1);
    traj.states.reserve(static_cast<std::size_t>(steps) + 1);
    Eigen::VectorXd x = x0;
    traj.times.push_back(0.0);
    traj.states.push_back(x);
    for (int k = 1; k <= steps; ++k) {
      x = eval(x);
      if (!x.allFinite())
        throw DivergenceError("iterate_map: non-finite state at step " + std::to_string(k),
                              static_cast<std::size_t>(k));
      traj.times.push_back(static_cast<double>(k));
      traj.states.push_back(x);
    }
    return traj;
  }

  // φ_h with `substeps` internal RK4 steps (continuous), or f (discrete).
  Eigen::VectorXd advance(const Eigen::VectorXd& x, double h, int substeps) const {
    if (kind_ == SystemKind::discrete) return eval(x);
    Eigen::VectorXd y = x;
    const double sub = h / static_cast<double>(substeps);
    for (int s = 0; s < substeps; ++s) y = rk4_step(y, sub);
    return y;
  }

  // Draw m initial conditions uniformly in `box` (seeded, deterministic) and
  // collect traj_len consecutive snapshot pairs from each. Pure in
  // (system, box, m, h, seed, options).
  SnapshotSet sample_snapshots(const Box& box, int m, double h, std::uint64_t seed,
                               const SnapshotOptions& opts = {}) const {
    if (static_cast<int>(box.size()) != n_)
      throw ValidationError("sample_snapshots: box dimension mismatch");
    for (const auto& [lo, hi] : box)
      if (!(lo <= hi)) throw ValidationError("sample_snapshots: empty box interval");
    if (m < 1) throw ValidationError("sample_snapshots: need at least one sample");
    if (opts.traj_len < 1) throw ValidationError("sample_snapshots: traj_len must be ≥ 1");
    if (kind_ == SystemKind::continuous) {
      if (h <= 0.0) throw ValidationError("sample_snapshots: step size must be positive");
      if (opts.substeps < 1) throw ValidationError("sample_snapshots: substeps must be ≥ 1");
    }
    RngStream rng(seed);
    const int pairs = m * opts.traj_len;
    SnapshotSet out;
    out.X.resize(n_, pairs);
    out.Y.resize(n_, pairs);
    out.h = kind_ == SystemKind::continuous ? h : 0.0;
    out.seed = seed;
    int col = 0;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd x(n_);
      for (int j = 0; j < n_; ++j)
        x[j] = rng.uniform(box[static_cast<std::size_t>(j)][0], box[static_cast<std::size_t>(j)][1]);
      for (int k = 0; k < opts.traj_len; ++k) {
        Eigen::VectorXd y = advance(x, h, opts.substeps);
        if (!y.allFinite())
          throw DivergenceError("sample_snapshots: non-finite state (initial condition " +
                                    std::to_string(i) + ", step " + std::to_string(k) + ")",
                                static_cast<std::size_t>(k));
        out.X.col(col) = x;
        out.Y.col(col) = y;
        ++col;
        x = y;
      }
    }
    return out;
  }

  // Jacobian Df(x): exact for polynomial components, central differences
  // (step 1e-6) over declared dependencies for opaque ones.
  Eigen::MatrixXd linearize(const Eigen::VectorXd& x) const {
    if (x.size() != n_) throw ValidationError("linearize: dimension mismatch");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n_, n_);
    const double fd = 1e-6;
    for (int j = 1; j <= n_; ++j) {
      const Component& c = comp(j);
      if (c.poly) {
        for (int i : c.poly->support()) J(j - 1, i - 1) = c.poly->derivative(i).eval(x);
      } else {
        for (int i : c.deps) {
          Eigen::VectorXd xp = x, xm = x;
          xp[i - 1] += fd;
          xm[i - 1] -= fd;
          J(j - 1, i - 1) = (c.fn(xp) - c.fn(xm)) / (2.0 * fd);
        }
      }
    }
    return J;
  }

  // ---- builtins ----------------------------------------------------------

  // Three coupled double-well Duffing oscillators (6-D, continuous):
  //   ẋ₁ = x₂              ẋ₂ = −δx₂ − βx₁ − 4αx₁³
  //   ẋ₃ = x₄              ẋ₄ = −δx₄ − βx₃ − 4αx₃³ + γ₁x₁
  //   ẋ₅ = x₆              ẋ₆ = −δx₆ − βx₅ − 4αx₅³ + γ₂x₁
  // Subsystems: {1,2}, {1,2,3,4}, {1,2,5,6} (and the full set).
  static SparseSystem coupled_duffing(const DuffingParams& p = DuffingParams()) {
    const int n = 6;
    auto X = [&](int i) { return Polynomial::coordinate(n, i); };
    auto osc = [&](int pos, int vel, double drive_gamma) {
      Polynomial rhs = (-p.delta) * X(vel) + (-p.beta) * X(pos) +
                       (-4.0 * p.alpha) * (X(pos) * X(pos) * X(pos));
      if (drive_gamma != 0.0) rhs = rhs + drive_gamma * X(1);
      return rhs;
    };
    std::vector<Component> comps(6);
    comps[0] = {IndexSet{2}, X(2), nullptr};
    comps[1] = {IndexSet{1, 2}, osc(1, 2, 0.0), nullptr};
    comps[2] = {IndexSet{4}, X(4), nullptr};
    comps[3] = {IndexSet{1, 3, 4}, osc(3, 4, p.gamma1), nullptr};
    comps[4] = {IndexSet{6}, X(6), nullptr};
    comps[5] = {IndexSet{1, 5, 6}, osc(5, 6, p.gamma2), nullptr};
    SparseSystem s(n, SystemKind::continuous, std::move(comps));
    s.builtin_info_ = BuiltinInfo{"coupled_duffing",
                                  {{"delta", {p.delta}},
                                   {"beta", {p.beta}},
                                   {"alpha", {p.alpha}},
                                   {"gamma", {p.gamma1, p.gamma2}}},
                                  {}};
    return s;
  }

  // Coupled tent maps (3-D, discrete), coordinates (z, x, y):
  //   z⁺ = z
  //   x⁺ = (1 − sin(πz)) · tent(x)
  //   y⁺ = (√2 + ((z−√2)/(2−√2))·(2−√2)) · tent(y)
  // with tent(u) = u for u ≤ 1/2 and 1−u otherwise. The y-slope is kept in
  // its redundant form (it simplifies to z) on purpose. The x-slope is the
  // affine correction of a bare sin(πz), which is nonpositive for z ∈ [1, 2]
  // and would collapse the x dynamics onto 0; 1 − sin(πz) stays inside the
  // tent family's chaotic parameter range (1, 2] on that interval.
  // Subsystems: {1}, {1,2}, {1,3} (and the full set).
  static SparseSystem coupled_tent() {
    std::vector<Component> comps(3);
    comps[0].deps = IndexSet{1};
    comps[0].fn = [](const Eigen::VectorXd& s) { return s[0]; };
    comps[1].deps = IndexSet{1, 2};
    comps[1].fn = [](const Eigen::VectorXd& s) {
      const double slope = 1.0 - std::sin(std::numbers::pi * s[0]);
      const double t = s[1] <= 0.5 ? s[1] : 1.0 - s[1];
      return slope * t;
    };
    comps[2].deps = IndexSet{1, 3};
    comps[2].fn = [](const Eigen::VectorXd& s) {
      const double r2 = std::sqrt(2.0);
      const double slope = r2 + ((s[0] - r2) / (2.0 - r2)) * (2.0 - r2);
      const double t = s[2] <= 0.5 ? s[2] : 1.0 - s[2];
      return slope * t;
    };
    SparseSystem s(3, SystemKind::discrete, std::move(comps));
    s.builtin_info_ = BuiltinInfo{"coupled_tent", {}, {}};
    return s;
  }

  // x ↦ 2x² − 1 on [−1, 1] (1-D, discrete).
  static SparseSystem logistic_cheb() {
    Polynomial f = Polynomial(1, {{2.0, {2}}, {-1.0, {0}}});
    std::vector<Component> comps(1);
    comps[0] = {IndexSet{1}, f, nullptr};
    SparseSystem s(1, SystemKind::discrete, std::move(comps));
    s.builtin_info_ = BuiltinInfo{"logistic_cheb", {}, {}};
    return s;
  }

  // Two decoupled copies of logistic_cheb (2-D, discrete).
  static SparseSystem product_logistic() {
    Polynomial f1 = Polynomial(2, {{2.0, {2, 0}}, {-1.0, {0, 0}}});
    Polynomial f2 = Polynomial(2, {{2.0, {0, 2}}, {-1.0, {0, 0}}});
    std::vector<Component> comps(2);
    comps[0] = {IndexSet{1}, f1, nullptr};
    comps[1] = {IndexSet{2}, f2, nullptr};
    SparseSystem s(2, SystemKind::discrete, std::move(comps));
    s.builtin_info_ = BuiltinInfo{"product_logistic", {}, {}};
    return s;
  }

  // ẋ = Ax or x⁺ = Ax; dependency sets read off the nonzero pattern.
  static SparseSystem linear(const Eigen::MatrixXd& A, SystemKind kind) {
    if (A.rows() != A.cols() || A.rows() < 1)
      throw ValidationError("linear: A must be square and nonempty");
    const int n = static_cast<int>(A.rows());
    std::vector<Component> comps(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) {
      std::vector<Polynomial::Term> ts;
      std::vector<int> deps;
      for (int i = 1; i <= n; ++i) {
        if (A(j - 1, i - 1) != 0.0) {
          std::vector<int> e(static_cast<std::size_t>(n), 0);
          e[static_cast<std::size_t>(i - 1)] = 1;
          ts.push_back({A(j - 1, i - 1), std::move(e)});
          deps.push_back(i);
        }
      }
      comps[static_cast<std::size_t>(j - 1)] = {IndexSet(std::move(deps)), Polynomial(n, ts),
                                                nullptr};
    }
    SparseSystem s(n, kind, std::move(comps));
    std::vector<double> a_flat;
    a_flat.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a_flat.push_back(A(r, c));
    s.builtin_info_ = BuiltinInfo{
        "linear",
        {{"A", std::move(a_flat)}, {"discrete", {kind == SystemKind::discrete ? 1.0 : 0.0}}},
        {}};
    return s;
  }

  // Dispatch by name with default parameters.
  static SparseSystem builtin(const std::string& name) {
    if (name == "coupled_duffing") return coupled_duffing();
    if (name == "coupled_tent") return coupled_tent();
    if (name == "logistic_cheb") return logistic_cheb();
    if (name == "product_logistic") return product_logistic();
    throw ValidationError("builtin: unknown system '" + name + "'");
  }

 private:
  int n_;
  SystemKind kind_;
  std::vector<Component> comps_;
  std::vector<int> labels_;
  std::optional<BuiltinInfo> builtin_info_;
};

// Π_I applied to a whole trajectory.
inline Trajectory project_trajectory(const Trajectory& traj, const IndexSet& I) {
  Trajectory out;
  out.times = traj.times;
  out.states.reserve(traj.states.size());
  for (const Eigen::VectorXd& x : traj.states) out.states.push_back(project_coords(x, I));
  return out;
}

}  // namespace koopman
