#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"

namespace koopman {

// Dense spectrum with optional eigenvectors (columns).
struct Spectrum {
  Eigen::VectorXcd values;
  std::optional<Eigen::MatrixXcd> vectors;
};

// Eigendecomposition with a residual contract: every pair must satisfy
// ‖Av − λv‖ ≤ 1e-8‖A‖ (‖v‖ = 1), else the solver is deemed to have failed.
inline Spectrum compute_spectrum(const Eigen::MatrixXd& A, bool with_vectors = true) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, with_vectors);
  if (es.info() != Eigen::Success) throw NumericalError("compute_spectrum: eigensolver failed");
  Spectrum s;
  s.values = es.eigenvalues();
  if (with_vectors) {
    s.vectors = es.eigenvectors();
    const double scale = std::max(1.0, A.norm());
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      const double res =
          (A.cast<std::complex<double>>() * s.vectors->col(i) - s.values[i] * s.vectors->col(i))
              .norm();
      if (!(res <= 1e-8 * scale))
        throw NumericalError("compute_spectrum: eigenpair residual " + std::to_string(res) +
                             " exceeds contract");
    }
  }
  return s;
}

// w̄ = DΠ_Iᵀ w: place w_k at coordinate I[k], zero elsewhere. The zero vector
// passes through unchanged (it is, of course, not an eigenvector).
inline Eigen::VectorXd extend_eigenvector(const Eigen::VectorXd& w, const IndexSet& I, int n) {
  if (w.size() != I.size())
    throw ValidationError("extend_eigenvector: |w| must equal |I|");
  I.range_check(n, "extend_eigenvector");
  return scatter_coords(w, I, n);
}

inline Eigen::VectorXcd extend_eigenvector(const Eigen::VectorXcd& w, const IndexSet& I, int n) {
  if (w.size() != I.size())
    throw ValidationError("extend_eigenvector: |w| must equal |I|");
  I.range_check(n, "extend_eigenvector");
  return scatter_coords(w, I, n);
}

// ‖DΠ_I·Df(x) − Df_I(Π_I x)·DΠ_I‖_max — the Jacobian intertwining residual.
// Identically ≤ 1e-12 for polynomial systems when I is a subsystem.
inline double check_jacobian_intertwining(const SparseSystem& sys, const IndexSet& I,
                                          const Eigen::VectorXd& x) {
  const SparseSystem sub = sys.project(I);
  const Eigen::MatrixXd P = projection_matrix(I, sys.n());
  const Eigen::MatrixXd lhs = P * sys.linearize(x);
  const Eigen::MatrixXd rhs = sub.linearize(project_coords(x, I)) * P;
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

// Witness of a resonance λ_i = Σ_{j≠i} m_j λ_j with 2 ≤ Σm_j ≤ k.
struct ResonanceWitness {
  int i = 0;               // 1-based index of the resonant eigenvalue
  std::vector<int> m;      // m_i = 0
  int order = 0;           // Σ m_j
  double residual = 0.0;   // |λ_i − Σ m_j λ_j|
};

// Exhaustive resonance search. Candidates are scanned by eigenvalue index i
// ascending, order s = 2..k ascending, and within an order lexicographically
// descending on m; the first hit is returned. tol < 0 selects the default
// 1e-9·max|λ|. Throws CapExceededError when the candidate count exceeds 1e7.
inline std::optional<ResonanceWitness> is_resonant(const std::vector<std::complex<double>>& eigs,
                                                   int k, double tol = -1.0) {
  if (k < 2) throw ValidationError("is_resonant: order bound k must be ≥ 2");
  const int n = static_cast<int>(eigs.size());
  if (n <= 1) return std::nullopt;  // the sum over j ≠ i is empty
  double maxabs = 0.0;
  for (const auto& l : eigs) maxabs = std::max(maxabs, std::abs(l));
  if (tol < 0.0) tol = 1e-9 * maxabs;

  // Candidate count: per i, Σ_{s=2..k} #{m ∈ ℕ^{n-1} : Σm = s}.
  double candidates = 0.0;
  for (int s = 2; s <= k; ++s)
    candidates += static_cast<double>(binomial(s + n - 2, n - 2));
  candidates *= n;
  if (candidates > 1e7)
    throw CapExceededError("is_resonant: candidate count " + std::to_string(candidates) +
                               " exceeds 1e7",
                           static_cast<std::size_t>(1e7));

  std::vector<int> m(static_cast<std::size_t>(n), 0);
  std::vector<int> free_idx;  // indices j ≠ i (0-based)
  std::optional<ResonanceWitness> found;
  // Fill the free slots with total `rem`, lexicographically descending.
  auto rec = [&](auto&& self, int pos, int rem, int i, int s) -> bool {
    if (pos == static_cast<int>(free_idx.size()) - 1) {
      m[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(pos)])] = rem;
      std::complex<double> sum{0.0, 0.0};
      for (int j = 0; j < n; ++j)
        sum += static_cast<double>(m[static_cast<std::size_t>(j)]) * eigs[static_cast<std::size_t>(j)];
      const double res = std::abs(eigs[static_cast<std::size_t>(i)] - sum);
      if (res <= tol) {
        found = ResonanceWitness{i + 1, m, s, res};
        return true;
      }
      return false;
    }
    for (int e = rem; e >= 0; --e) {
      m[static_cast<std::size_t>(free_idx[static_cast<std::size_t>(pos)])] = e;
      if (self(self, pos + 1, rem - e, i, s)) return true;
    }
    return false;
  };

  for (int i = 0; i < n; ++i) {
    free_idx.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) free_idx.push_back(j);
    std::fill(m.begin(), m.end(), 0);
    for (int s = 2; s <= k; ++s) {
      if (rec(rec, 0, s, i, s)) return found;
    }
  }
  return std::nullopt;
}

// Damped Newton search for a fixed point (‖f(x)‖ ≤ tol, or ‖f(x)−x‖ ≤ tol for
// maps) from a user seed.
inline Eigen::VectorXd find_fixed_point(const SparseSystem& sys, const Eigen::VectorXd& seed,
                                        double tol = 1e-9, int max_iter = 100) {
  const bool discrete = sys.is_discrete();
  auto F = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return discrete ? Eigen::VectorXd(sys.eval(x) - x) : sys.eval(x);
  };
  Eigen::VectorXd x = seed;
  Eigen::VectorXd Fx = F(x);
  for (int it = 0; it < max_iter; ++it) {
    if (Fx.lpNorm<Eigen::Infinity>() <= tol) return x;
    Eigen::MatrixXd J = sys.linearize(x);
    if (discrete) J.diagonal().array() -= 1.0;
    Eigen::VectorXd step = J.fullPivLu().solve(-Fx);
    if (!step.allFinite()) throw NumericalError("find_fixed_point: singular Jacobian");
    double t = 1.0;
    const double base = Fx.norm();
    while (t > 1e-4) {
      Eigen::VectorXd cand = x + t * step;
      Eigen::VectorXd Fc = F(cand);
      if (Fc.allFinite() && Fc.norm() <= (1.0 - 0.5 * t) * base) {
        x = cand;
        Fx = Fc;
        break;
      }
      t *= 0.5;
    }
    if (t <= 1e-4) throw NumericalError("find_fixed_point: line search stalled");
  }
  if (F(x).lpNorm<Eigen::Infinity>() <= tol) return x;
  throw NumericalError("find_fixed_point: no convergence within iteration budget");
}

// Report pairing the spectrum of Df(x*) with the spectrum of Df_I(Π_I x*).
struct SpectrumPairing {
  Spectrum full;
  Spectrum sub;
  // (sub eigenvalue index, full eigenvalue index), |difference| ≤ tol.
  std::vector<std::pair<int, int>> eigenvalue_matches;
  std::vector<int> unmatched_sub;  // sub eigenvalues missing from the full spectrum
  struct VectorPair {
    int full_index;
    int sub_index;
    double residual;  // ‖Df_I·Π_I v − λ·Π_I v‖ / ‖Π_I v‖
  };
  std::vector<VectorPair> vector_pairings;
  std::vector<int> unpaired_full;  // full eigenvectors with Π_I v ≈ 0
};

// Verify spec(Df_I(Π_I x*)) ⊆ spec(Df(x*)) at a fixed point x* and pair full
// eigenvectors v with Π_I v ≠ 0 to subsystem eigenvectors.
inline SpectrumPairing subsystem_spectrum_embedding(const SparseSystem& sys, const IndexSet& I,
                                                    const Eigen::VectorXd& xstar,
                                                    double tol = 1e-8) {
  const double fp =
      sys.is_discrete() ? (sys.eval(xstar) - xstar).norm() : sys.eval(xstar).norm();
  if (!(fp <= 1e-9))
    throw ValidationError("subsystem_spectrum_embedding: not a fixed point (residual " +
                          std::to_string(fp) + ")");
  const SparseSystem sub = sys.project(I);
  const Eigen::VectorXd xsub = project_coords(xstar, I);
  const Eigen::MatrixXd A = sys.linearize(xstar);
  const Eigen::MatrixXd Asub = sub.linearize(xsub);

  SpectrumPairing rep;
  rep.full = compute_spectrum(A);
  rep.sub = compute_spectrum(Asub);

  std::vector<bool> used(static_cast<std::size_t>(rep.full.values.size()), false);
  for (Eigen::Index s = 0; s < rep.sub.values.size(); ++s) {
    int best = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < rep.full.values.size(); ++f) {
      if (used[static_cast<std::size_t>(f)]) continue;
      const double d = std::abs(rep.sub.values[s] - rep.full.values[f]);
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(f);
      }
    }
    if (best >= 0 && bestd <= tol) {
      used[static_cast<std::size_t>(best)] = true;
      rep.eigenvalue_matches.emplace_back(static_cast<int>(s), best);
    } else {
      rep.unmatched_sub.push_back(static_cast<int>(s));
    }
  }

  const double sub_scale = std::max(1.0, Asub.norm());
  for (Eigen::Index f = 0; f < rep.full.values.size(); ++f) {
    const Eigen::VectorXcd v = rep.full.vectors->col(f);
    const Eigen::VectorXcd w = project_coords(v, I);
    if (w.norm() <= 1e-10 * v.norm()) {
      rep.unpaired_full.push_back(static_cast<int>(f));
      continue;
    }
    // Π_I v must then be an eigenvector of Df_I for the same eigenvalue;
    // attach it to the nearest subsystem eigenvalue.
    int best = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < rep.sub.values.size(); ++s) {
      const double d = std::abs(rep.sub.values[s] - rep.full.values[f]);
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(s);
      }
    }
    const double res =
        (Asub.cast<std::complex<double>>() * w - rep.full.values[f] * w).norm() / w.norm();
    if (best >= 0 && res <= tol * sub_scale) {
      rep.vector_pairings.push_back({static_cast<int>(f), best, res});
    } else {
      rep.unpaired_full.push_back(static_cast<int>(f));
    }
  }
  return rep;
}

// (1/T)∫₀ᵀ e^{−λt} h(φ_t(x₀)) dt via the trapezoid rule on a fixed RK4 grid.
// Convergence is the caller's to assess (compare T against 2T).
inline std::complex<double> laplace_average(
    const SparseSystem& sys, const std::function<std::complex<double>(const Eigen::VectorXd&)>& h,
    std::complex<double> lambda, const Eigen::VectorXd& x0, double T, double dt) {
  if (sys.is_discrete()) throw ValidationError("laplace_average: continuous systems only");
  if (!(T > 0.0) || !(dt > 0.0)) throw ValidationError("laplace_average: T and dt must be positive");
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const double step = T / static_cast<double>(steps);
  Eigen::VectorXd x = x0;
  std::complex<double> acc = 0.5 * h(x);  // t = 0 weight (e^0 = 1)
  for (int k = 1; k <= steps; ++k) {
    x = sys.rk4_step(x, step);
    if (!x.allFinite())
      throw DivergenceError("laplace_average: non-finite state at step " + std::to_string(k),
                            static_cast<std::size_t>(k));
    const double t = static_cast<double>(k) * step;
    const std::complex<double> w = k == steps ? 0.5 : 1.0;
    acc += w * std::exp(-lambda * t) * h(x);
  }
  return acc * step / T;
}

// Checkable hypotheses for principal-eigenfunction existence/uniqueness at an
// attracting fixed point: diagonalizability, simple spectrum, and
// non-resonance of order k for the smallest admissible k > max Re λ_i/Re λ_j.
// The k-bound is only evaluated when all real parts share one sign.
struct HypothesesReport {
  Eigen::VectorXcd eigenvalues;
  bool diagonalizable = false;
  bool simple_spectrum = false;
  std::optional<double> k_bound;  // max_{i,j} Re λ_i / Re λ_j when evaluable
  std::string k_bound_note;
  int k_checked = 0;
  std::optional<ResonanceWitness> witness;
  bool nonresonant = false;
};

inline HypothesesReport principal_eigenfunction_hypotheses(const SparseSystem& sys,
                                                           const Eigen::VectorXd& xstar) {
  const double fp =
      sys.is_discrete() ? (sys.eval(xstar) - xstar).norm() : sys.eval(xstar).norm();
  if (!(fp <= 1e-9))
    throw ValidationError("principal_eigenfunction_hypotheses: not a fixed point");
  const Eigen::MatrixXd A = sys.linearize(xstar);
  const Spectrum spec = compute_spectrum(A);

  HypothesesReport rep;
  rep.eigenvalues = spec.values;
  const int n = static_cast<int>(spec.values.size());
  double maxabs = 0.0;
  for (int i = 0; i < n; ++i) maxabs = std::max(maxabs, std::abs(spec.values[i]));

  rep.simple_spectrum = true;
  for (int i = 0; i < n && rep.simple_spectrum; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(spec.values[i] - spec.values[j]) <= 1e-8 * std::max(1.0, maxabs)) {
        rep.simple_spectrum = false;
        break;
      }

  // Numerical diagonalizability: the eigenvector matrix has full rank.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(*spec.vectors);
  const Eigen::VectorXd sv = svd.singularValues();
  rep.diagonalizable = sv.size() > 0 && sv[sv.size() - 1] > 1e-10 * sv[0];

  bool all_pos = true, all_neg = true;
  for (int i = 0; i < n; ++i) {
    if (!(spec.values[i].real() > 0.0)) all_pos = false;
    if (!(spec.values[i].real() < 0.0)) all_neg = false;
  }
  int k = 2;
  if (all_pos || all_neg) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = std::abs(spec.values[i].real());
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    rep.k_bound = hi / lo;
    k = std::max(2, static_cast<int>(std::floor(*rep.k_bound)) + 1);
  } else {
    rep.k_bound_note = "not evaluated: eigenvalue real parts do not share a sign";
  }
  rep.k_checked = k;
  std::vector<std::complex<double>> eigs(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) eigs[static_cast<std::size_t>(i)] = spec.values[i];
  rep.witness = is_resonant(eigs, k);
  rep.nonresonant = !rep.witness.has_value();
  return rep;
}

}  // namespace koopman
