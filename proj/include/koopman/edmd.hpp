#pragma once

#include <algorithm>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "koopman/dictionary.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"

namespace koopman {

// A fitted EDMD model: K advances lifted coordinates (K maps Ψ(x) to an
// estimate of Ψ(y)), decoder B maps lifted coordinates back to state.
struct KoopmanApprox {
  Eigen::MatrixXd K;
  Dictionary dict;
  Eigen::MatrixXd decoder;
  double reg = 0.0;                // regularization actually used
  double training_residual = 0.0;  // ‖Ψ_Y − KΨ_X‖_F on the training data
  double h = 0.0;                  // snapshot step (0 for discrete systems)
};

// Per-subsystem family of EDMD models covering all coordinates.
struct SparseKoopman {
  struct Part {
    IndexSet I;
    KoopmanApprox approx;
  };
  int n = 0;
  std::vector<Part> parts;
};

// Least-squares Koopman fit:
//   K = Ψ_Y Ψ_Xᵀ (Ψ_X Ψ_Xᵀ + reg·Id)⁻¹ ,  B = X Ψ_Xᵀ (Ψ_X Ψ_Xᵀ + reg·Id)⁻¹.
// reg = nullopt applies the default 1e-8·trace(Ψ_XΨ_Xᵀ)/l; reg = 0 solves via
// SVD with singular-value cutoff 1e-10·σ_max.
inline KoopmanApprox edmd_fit(const Dictionary& D, const SnapshotSet& snaps,
                              std::optional<double> reg = std::nullopt) {
  if (snaps.X.cols() < 1) throw DegenerateDataError("edmd_fit: no snapshot pairs");
  if (snaps.X.rows() != D.dim())
    throw ValidationError("edmd_fit: snapshot/dictionary dimension mismatch");
  if (reg && *reg < 0.0) throw ValidationError("edmd_fit: negative regularization");

  const Eigen::MatrixXd PX = D.evaluate(snaps.X);
  const Eigen::MatrixXd PY = D.evaluate(snaps.Y);
  if (PX.norm() == 0.0) throw DegenerateDataError("edmd_fit: all-zero lifted data");
  const int L = static_cast<int>(PX.rows());

  KoopmanApprox ka{Eigen::MatrixXd(), D, Eigen::MatrixXd(), 0.0, 0.0, snaps.h};
  if (!reg) reg = 1e-8 * PX.rowwise().squaredNorm().sum() / static_cast<double>(L);
  ka.reg = *reg;

  if (*reg > 0.0) {
    Eigen::MatrixXd G = PX * PX.transpose();
    G.diagonal().array() += *reg;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("edmd_fit: Gram factorization failed");
    ka.K = ldlt.solve(PX * PY.transpose()).transpose();
    ka.decoder = ldlt.solve(PX * snaps.X.transpose()).transpose();
  } else {
    // Rank-revealing solve of min ‖Ψ_Y − AΨ_X‖ via the pseudoinverse of Ψ_X.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(PX, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double cutoff = 1e-10 * sv[0];
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv[i] > cutoff) inv[i] = 1.0 / sv[i];
    // pinv(Ψ_X) = V Σ⁺ Uᵀ applied from the right.
    const Eigen::MatrixXd right = inv.asDiagonal() * svd.matrixU().transpose();
    ka.K = (PY * svd.matrixV()) * right;
    ka.decoder = (snaps.X * svd.matrixV()) * right;
  }
  ka.training_residual = (PY - ka.K * PX).norm();
  return ka;
}

// Project the snapshot columns onto the coordinates of I.
inline SnapshotSet project_snapshots(const SnapshotSet& snaps, const IndexSet& I) {
  SnapshotSet out;
  out.h = snaps.h;
  out.seed = snaps.seed;
  out.X.resize(I.size(), snaps.X.cols());
  out.Y.resize(I.size(), snaps.Y.cols());
  for (int k = 0; k < I.size(); ++k) {
    out.X.row(k) = snaps.X.row(I[k] - 1);
    out.Y.row(k) = snaps.Y.row(I[k] - 1);
  }
  return out;
}

// Sparse EDMD: fit one model per subsystem on the projected snapshots. The
// parts must each be subsystems of `sys` and together cover {1..n}.
inline SparseKoopman sparse_edmd(const SparseSystem& sys, const std::vector<IndexSet>& parts,
                                 const std::vector<Dictionary>& dicts, const SnapshotSet& snaps,
                                 std::optional<double> reg = std::nullopt) {
  if (parts.empty()) throw ValidationError("sparse_edmd: no parts");
  if (parts.size() != dicts.size())
    throw ValidationError("sparse_edmd: one dictionary per part required");
  const SparsityGraph g = sys.sparsity_graph();
  IndexSet cover;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (!g.is_subsystem(parts[k]))
      throw StructuralError("sparse_edmd: part " + parts[k].to_string() + " is not a subsystem");
    if (dicts[k].dim() != parts[k].size())
      throw ValidationError("sparse_edmd: dictionary " + std::to_string(k) +
                            " dimension does not match part " + parts[k].to_string());
    cover = set_union(cover, parts[k]);
  }
  if (cover != IndexSet::full(sys.n()))
    throw ValidationError("sparse_edmd: parts do not cover all coordinates");

  SparseKoopman sk;
  sk.n = sys.n();
  sk.parts.reserve(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    SnapshotSet sub = project_snapshots(snaps, parts[k]);
    sk.parts.push_back({parts[k], edmd_fit(dicts[k], sub, reg)});
  }
  return sk;
}

// Roll the lifted state forward: z_{k+1} = K z_k, x̂_k = B z_k. The returned
// trajectory holds the state estimates for k = 0..steps; times advance by the
// training snapshot step (or by 1 for discrete-time models).
inline Trajectory predict(const KoopmanApprox& ka, const Eigen::VectorXd& x0, int steps) {
  if (steps < 0) throw ValidationError("predict: negative step count");
  const double dt = ka.h > 0.0 ? ka.h : 1.0;
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  Eigen::VectorXd z = ka.dict.evaluate(x0);
  for (int k = 0; k <= steps; ++k) {
    traj.times.push_back(static_cast<double>(k) * dt);
    traj.states.push_back(ka.decoder * z);
    if (k < steps) z = ka.K * z;
  }
  return traj;
}

// Index (into parts) of the model that estimates coordinate j: the smallest
// part containing j, ties resolved by parts order.
inline int owning_part(const SparseKoopman& sk, int j) {
  int best = -1;
  for (std::size_t k = 0; k < sk.parts.size(); ++k) {
    if (!sk.parts[k].I.contains(j)) continue;
    if (best < 0 || sk.parts[k].I.size() < sk.parts[static_cast<std::size_t>(best)].I.size())
      best = static_cast<int>(k);
  }
  return best;
}

// Per-subsystem prediction: each coordinate is read off the prediction of its
// owning part (smallest containing subsystem).
inline Trajectory predict_sparse(const SparseKoopman& sk, const Eigen::VectorXd& x0, int steps) {
  if (x0.size() != sk.n) throw ValidationError("predict_sparse: dimension mismatch");
  std::vector<Trajectory> part_traj(sk.parts.size());
  std::vector<bool> needed(sk.parts.size(), false);
  std::vector<int> owner(static_cast<std::size_t>(sk.n));
  for (int j = 1; j <= sk.n; ++j) {
    int k = owning_part(sk, j);
    if (k < 0) throw ValidationError("predict_sparse: coordinate " + std::to_string(j) +
                                     " not covered by any part");
    owner[static_cast<std::size_t>(j - 1)] = k;
    needed[static_cast<std::size_t>(k)] = true;
  }
  for (std::size_t k = 0; k < sk.parts.size(); ++k) {
    if (needed[k])
      part_traj[k] = predict(sk.parts[k].approx, project_coords(x0, sk.parts[k].I), steps);
  }
  Trajectory traj;
  const std::size_t len = static_cast<std::size_t>(steps) + 1;
  traj.times.resize(len);
  traj.states.assign(len, Eigen::VectorXd(sk.n));
  // Times from any needed part (they all share the snapshot step).
  for (std::size_t k = 0; k < sk.parts.size(); ++k)
    if (needed[k]) traj.times = part_traj[k].times;
  for (int j = 1; j <= sk.n; ++j) {
    const int k = owner[static_cast<std::size_t>(j - 1)];
    const int local = sk.parts[static_cast<std::size_t>(k)].I.position_of(j);
    for (std::size_t s = 0; s < len; ++s)
      traj.states[s][j - 1] = part_traj[static_cast<std::size_t>(k)].states[s][local];
  }
  return traj;
}

struct KoopmanEig {
  std::complex<double> lambda;
  Eigen::VectorXcd coeffs;  // φ(x) = Σ coeffs_i ψ_i(x)
};

// Eigenpairs of the fitted operator: right eigenvectors of Kᵀ, so that
// φ(x) = ⟨coeffs, Ψ(x)⟩ satisfies φ(f(x)) ≈ λ φ(x). Sorted by |λ| descending
// (ties: real then imaginary part descending, for determinism).
inline std::vector<KoopmanEig> koopman_eigs(const KoopmanApprox& ka) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(ka.K.transpose());
  if (es.info() != Eigen::Success) throw NumericalError("koopman_eigs: eigensolver failed");
  std::vector<KoopmanEig> out;
  const int L = static_cast<int>(ka.K.rows());
  out.reserve(static_cast<std::size_t>(L));
  for (int i = 0; i < L; ++i) out.push_back({es.eigenvalues()[i], es.eigenvectors().col(i)});
  std::stable_sort(out.begin(), out.end(), [](const KoopmanEig& a, const KoopmanEig& b) {
    const double ma = std::abs(a.lambda), mb = std::abs(b.lambda);
    if (ma != mb) return ma > mb;
    if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
    return a.lambda.imag() > b.lambda.imag();
  });
  return out;
}

// A Koopman eigenfunction (or any dictionary-spanned observable) as a
// callable, φ(x) = Σ coeffs_i ψ_i(x).
struct EigenfunctionHandle {
  Dictionary dict;
  Eigen::VectorXcd coeffs;

  std::complex<double> operator()(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd psi = dict.evaluate(x);
    std::complex<double> s{0.0, 0.0};
    for (Eigen::Index i = 0; i < psi.size(); ++i) s += coeffs[i] * psi[i];
    return s;
  }
};

// ĝ = g ∘ Π_I: lift a subsystem eigenfunction to the ambient space. Same
// eigenvalue; realized by lifting the dictionary.
inline EigenfunctionHandle lift_eigenfunction(const Eigen::VectorXcd& coeffs,
                                              const Dictionary& dict, const IndexSet& I, int n) {
  if (coeffs.size() != dict.rows())
    throw ValidationError("lift_eigenfunction: coefficient/dictionary size mismatch");
  return EigenfunctionHandle{dict.lift(I, n), coeffs};
}

inline EigenfunctionHandle as_eigenfunction(const Eigen::VectorXcd& coeffs,
                                            const Dictionary& dict) {
  if (coeffs.size() != dict.rows())
    throw ValidationError("as_eigenfunction: coefficient/dictionary size mismatch");
  return EigenfunctionHandle{dict, coeffs};
}

// Numerical eigenfunction check along a trajectory:
// max_k |φ(x_{k+1}) − μ_k φ(x_k)| with μ_k = e^{λ(t_{k+1}−t_k)} (continuous)
// or λ (discrete).
inline double eigenfunction_residual(const std::function<std::complex<double>(const Eigen::VectorXd&)>& phi,
                                     std::complex<double> lambda, const Trajectory& traj,
                                     SystemKind kind) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const std::complex<double> mu =
        kind == SystemKind::continuous
            ? std::exp(lambda * (traj.times[k + 1] - traj.times[k]))
            : lambda;
    const std::complex<double> r = phi(traj.states[k + 1]) - mu * phi(traj.states[k]);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace koopman
