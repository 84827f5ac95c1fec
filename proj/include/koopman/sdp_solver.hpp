#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "koopman/errors.hpp"
#include "koopman/moment_sos.hpp"

namespace koopman {

// Symmetric-matrix vectorization with √2 on off-diagonal entries, so that
// ⟨M, N⟩_F = svec(M)·svec(N). Row-major upper triangle, matching
// PsdBlock::upper ordering.
inline Eigen::VectorXd svec(const Eigen::MatrixXd& M) {
  const int s = static_cast<int>(M.rows());
  Eigen::VectorXd v(s * (s + 1) / 2);
  const double r2 = std::numbers::sqrt2;
  int p = 0;
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) v[p++] = (i == j) ? M(i, j) : r2 * M(i, j);
  return v;
}

inline Eigen::MatrixXd unsvec(const Eigen::VectorXd& v, int s) {
  Eigen::MatrixXd M(s, s);
  const double inv_r2 = 1.0 / std::numbers::sqrt2;
  int p = 0;
  for (int i = 0; i < s; ++i)
    for (int j = i; j < s; ++j) {
      M(i, j) = (i == j) ? v[p] : inv_r2 * v[p];
      M(j, i) = M(i, j);
      ++p;
    }
  return M;
}

// Nearest PSD matrix in Frobenius norm (eigenvalue clamping), in svec form.
inline Eigen::VectorXd psd_project_svec(const Eigen::VectorXd& v, int s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unsvec(v, s));
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  return svec(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

enum class SolveStatus { optimal, max_iter, infeasible_detected };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::max_iter: return "max-iter";
    case SolveStatus::infeasible_detected: return "infeasible-detected";
  }
  return "unknown";
}

struct SolverOptions {
  int max_iter = 20000;
  double tol = 1e-9;
  double rho = 1.0;
  std::optional<std::vector<MomentVector>> warm_start;
};

struct SolveResiduals {
  double equality_max = std::numeric_limits<double>::infinity();
  double psd_min_eig = -std::numeric_limits<double>::infinity();
};

struct SDPSolution {
  std::vector<MomentVector> values;
  double objective = 0.0;
  SolveStatus status = SolveStatus::max_iter;
  SolveResiduals residuals;
  int iterations = 0;
};

// ADMM over the splitting  min c·y + Σ_j 1_PSD(Z_j)  s.t.  A y = b,
// Z_j = M_j(y).  The y-update solves an equality-constrained least-squares
// KKT system with a factorization reused across iterations; the Z-update is
// one symmetric eigendecomposition per block. Over-relaxation 1.6 and
// residual-balancing updates of ρ every 50 iterations.
inline SDPSolution solve(const MomentProblem& prob, const SolverOptions& opts = {}) {
  const int N = prob.total_vars;
  if (N <= 0) throw ValidationError("solve: problem has no variables");

  // Equality system A y = b (trivially satisfiable rows dropped).
  std::vector<const LinearEq*> eqs;
  for (const LinearEq& e : prob.equalities) {
    if (e.lhs.empty()) {
      if (std::abs(e.rhs) > 1e-12) {
        SDPSolution sol;
        sol.status = SolveStatus::infeasible_detected;
        sol.values = prob.split(Eigen::VectorXd::Zero(N));
        return sol;
      }
      continue;
    }
    eqs.push_back(&e);
  }
  const int m = static_cast<int>(eqs.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, N);
  Eigen::VectorXd b(m);
  for (int r = 0; r < m; ++r) {
    for (const auto& [v, c] : eqs[static_cast<std::size_t>(r)]->lhs.terms) A(r, v) = c;
    b[r] = eqs[static_cast<std::size_t>(r)]->rhs;
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
  for (const auto& [v, w] : prob.objective.terms) c[v] += w;

  // Row-rank reduction of A (duplicate/trivially-dependent equalities are
  // common in the sparse assembly) plus a consistency check.
  Eigen::MatrixXd A_red(0, N);
  Eigen::VectorXd b_red(0);
  Eigen::VectorXd y_ls = Eigen::VectorXd::Zero(N);
  if (m > 0) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    int rank = 0;
    while (rank < svd.singularValues().size() &&
           svd.singularValues()[rank] > 1e-12 * std::max(1.0, smax))
      ++rank;
    const Eigen::MatrixXd Ur = svd.matrixU().leftCols(rank);
    const Eigen::MatrixXd Vr = svd.matrixV().leftCols(rank);
    const Eigen::VectorXd sr = svd.singularValues().head(rank);
    y_ls = Vr * (sr.cwiseInverse().asDiagonal() * (Ur.transpose() * b));
    if ((A * y_ls - b).cwiseAbs().maxCoeff() >
        1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
      SDPSolution sol;
      sol.status = SolveStatus::infeasible_detected;
      sol.values = prob.split(y_ls);
      sol.iterations = 0;
      return sol;
    }
    A_red = sr.asDiagonal() * Vr.transpose();
    b_red = Ur.transpose() * b;
  }
  const int r = static_cast<int>(A_red.rows());

  auto eq_residual = [&](const Eigen::VectorXd& y) {
    return m == 0 ? 0.0 : (A * y - b).cwiseAbs().maxCoeff();
  };

  // Without PSD blocks the problem is linear over an affine set; report the
  // least-squares point (bounded objectives over affine sets are constant on
  // the feasible set only in degenerate cases — callers always have blocks).
  const std::size_t J = prob.psd_blocks.size();
  if (J == 0) {
    SDPSolution sol;
    sol.values = prob.split(y_ls);
    sol.objective = c.dot(y_ls);
    sol.residuals.equality_max = eq_residual(y_ls);
    sol.residuals.psd_min_eig = 0.0;
    sol.status =
        sol.residuals.equality_max <= opts.tol ? SolveStatus::optimal : SolveStatus::max_iter;
    return sol;
  }

  // Per-block svec maps B_j.
  std::vector<Eigen::MatrixXd> B(J), Bt(J);
  std::vector<int> bs(J);
  const double r2 = std::numbers::sqrt2;
  for (std::size_t j = 0; j < J; ++j) {
    const PsdBlock& blk = prob.psd_blocks[j];
    bs[j] = blk.size;
    const int t = blk.size * (blk.size + 1) / 2;
    B[j] = Eigen::MatrixXd::Zero(t, N);
    int p = 0;
    for (int i = 0; i < blk.size; ++i)
      for (int q = i; q < blk.size; ++q) {
        const double scale = (i == q) ? 1.0 : r2;
        for (const auto& [v, w] : blk.entry(i, q).terms) B[j](p, v) += scale * w;
        ++p;
      }
    Bt[j] = B[j].transpose();
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
  for (std::size_t j = 0; j < J; ++j) H += Bt[j] * B[j];

  double rho = opts.rho > 0 ? opts.rho : 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXd> kkt_lu;
  auto factor = [&]() {
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(N + r, N + r);
    K.topLeftCorner(N, N) = rho * H;
    if (r > 0) {
      K.topRightCorner(N, r) = A_red.transpose();
      K.bottomLeftCorner(r, N) = A_red;
    }
    kkt_lu.compute(K);
  };
  factor();

  // State.
  Eigen::VectorXd y = y_ls;
  if (opts.warm_start) y = prob.flatten(*opts.warm_start);
  std::vector<Eigen::VectorXd> z(J), u(J);
  for (std::size_t j = 0; j < J; ++j) {
    z[j] = psd_project_svec(B[j] * y, bs[j]);
    u[j] = Eigen::VectorXd::Zero(z[j].size());
  }

  const double alpha = 1.6;
  double prim = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  SDPSolution sol;
  int it = 0;
  for (it = 1; it <= opts.max_iter; ++it) {
    // y-update: argmin c·y + (ρ/2)Σ‖B_j y − z_j + u_j‖²  s.t.  A y = b.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N + r);
    for (std::size_t j = 0; j < J; ++j) rhs.head(N) += rho * (Bt[j] * (z[j] - u[j]));
    rhs.head(N) -= c;
    if (r > 0) rhs.tail(r) = b_red;
    y = kkt_lu.solve(rhs).head(N);

    prim = 0.0;
    dual = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      const Eigen::VectorXd w = B[j] * y;
      const Eigen::VectorXd v = alpha * w + (1.0 - alpha) * z[j];
      const Eigen::VectorXd z_old = z[j];
      z[j] = psd_project_svec(v + u[j], bs[j]);
      u[j] += v - z[j];
      prim = std::max(prim, (w - z[j]).cwiseAbs().maxCoeff());
      dual = std::max(dual, rho * (Bt[j] * (z[j] - z_old)).cwiseAbs().maxCoeff());
    }

    if (prim <= 10 * opts.tol && dual <= 10 * opts.tol) {
      const double eq = eq_residual(y);
      if (eq <= opts.tol) {
        double mineig = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < J; ++j) {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unsvec(B[j] * y, bs[j]),
                                                            Eigen::EigenvaluesOnly);
          mineig = std::min(mineig, es.eigenvalues().minCoeff());
        }
        if (mineig >= -opts.tol) {
          sol.status = SolveStatus::optimal;
          sol.residuals.equality_max = eq;
          sol.residuals.psd_min_eig = mineig;
          break;
        }
      }
    }

    if (it % 50 == 0 && it < opts.max_iter) {
      if (prim > 10 * dual && rho < 1e6) {
        rho *= 2.0;
        for (auto& uj : u) uj *= 0.5;
        factor();
      } else if (dual > 10 * prim && rho > 1e-4) {
        rho *= 0.5;
        for (auto& uj : u) uj *= 2.0;
        factor();
      }
    }
  }

  if (sol.status != SolveStatus::optimal) {
    sol.status = SolveStatus::max_iter;
    sol.iterations = opts.max_iter;
    sol.residuals.equality_max = eq_residual(y);
    double mineig = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < J; ++j) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(unsvec(B[j] * y, bs[j]),
                                                        Eigen::EigenvaluesOnly);
      mineig = std::min(mineig, es.eigenvalues().minCoeff());
    }
    sol.residuals.psd_min_eig = mineig;
  } else {
    sol.iterations = it;
  }
  sol.values = prob.split(y);
  sol.objective = c.dot(y);
  return sol;
}

}  // namespace koopman
