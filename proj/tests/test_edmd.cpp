#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include <koopman/edmd.hpp>
#include <koopman/rng.hpp>

using namespace koopman;

namespace {

Eigen::MatrixXd random_stable_matrix(RngStream& rng, int n, double radius = 0.9) {
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.uniform(-1.0, 1.0);
  const double rho = A.eigenvalues().cwiseAbs().maxCoeff();
  return A * (radius / rho);
}

}  // namespace

TEST_CASE("degree-one fit recovers a linear map exactly", "[edmd]") {
  RngStream rng(2024);
  Eigen::MatrixXd A = random_stable_matrix(rng, 4);
  SparseSystem sys = SparseSystem::linear(A, SystemKind::discrete);
  SnapshotSet snaps = sys.sample_snapshots(Box(4, {-1.0, 1.0}), 50, 0.0, 31);
  Dictionary dict = Dictionary::monomials(4, 1);
  KoopmanApprox ka = edmd_fit(dict, snaps, 0.0);

  Eigen::MatrixXd Kc(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) Kc(i, j) = ka.K(ka.dict.coordinate_row(i + 1),
                                                ka.dict.coordinate_row(j + 1));
  CHECK((Kc - A).cwiseAbs().maxCoeff() < 1e-8);

  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(4, 0.3);
  Trajectory pred = predict(ka, x0, 25);
  Trajectory truth = sys.iterate_map(x0, 25);
  double sq = 0.0;
  for (int k = 1; k <= 25; ++k)
    sq += (pred.states[static_cast<std::size_t>(k)] - truth.states[static_cast<std::size_t>(k)])
              .squaredNorm();
  CHECK(std::sqrt(sq / (25.0 * 4.0)) < 1e-6);

  // Zero-step prediction is the decoder applied to the lifted initial state.
  Trajectory zero = predict(ka, x0, 0);
  REQUIRE(zero.states.size() == 1);
  CHECK((zero.states[0] - x0).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("identity dynamics yield the identity operator", "[edmd]") {
  SparseSystem id = SparseSystem::linear(Eigen::MatrixXd::Identity(2, 2), SystemKind::discrete);
  SnapshotSet snaps = id.sample_snapshots(Box(2, {-1.0, 1.0}), 30, 0.0, 7);
  KoopmanApprox ka = edmd_fit(Dictionary::monomials(2, 2), snaps, 0.0);
  CHECK((ka.K - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(ka.training_residual < 1e-8);
}

TEST_CASE("degenerate snapshot data is rejected", "[edmd]") {
  SnapshotSet empty;
  empty.X.resize(1, 0);
  empty.Y.resize(1, 0);
  CHECK_THROWS_AS(edmd_fit(Dictionary::monomials(1, 1), empty), DegenerateDataError);

  // All-zero lifted features (dictionary without the constant observable).
  Dictionary pure(1, {Observable{MonomialObs{{1}}}});
  SnapshotSet zeros;
  zeros.X = Eigen::MatrixXd::Zero(1, 5);
  zeros.Y = Eigen::MatrixXd::Zero(1, 5);
  CHECK_THROWS_AS(edmd_fit(pure, zeros), DegenerateDataError);

  CHECK_THROWS_AS(edmd_fit(Dictionary::monomials(2, 1), zeros), ValidationError);
  CHECK_THROWS_AS(edmd_fit(Dictionary::monomials(1, 1), zeros, -1.0), ValidationError);
}

TEST_CASE("regularization defaults and residual monotonicity", "[edmd]") {
  SparseSystem log1 = SparseSystem::logistic_cheb();
  SnapshotSet snaps = log1.sample_snapshots(Box(1, {-1.0, 1.0}), 40, 0.0, 13);
  Dictionary dict = Dictionary::monomials(1, 3);

  KoopmanApprox def = edmd_fit(dict, snaps);
  const Eigen::MatrixXd PX = dict.evaluate(snaps.X);
  CHECK(def.reg == 1e-8 * PX.rowwise().squaredNorm().sum() / dict.rows());

  // The unregularized training objective lower-bounds the penalized ones.
  const double r0 = edmd_fit(dict, snaps, 0.0).training_residual;
  const double r1 = edmd_fit(dict, snaps, 1e-6).training_residual;
  const double r2 = edmd_fit(dict, snaps, 1e-2).training_residual;
  CHECK(r0 <= r1 + 1e-12);
  CHECK(r1 <= r2 + 1e-12);
}

TEST_CASE("single full part reproduces the plain fit bitwise", "[edmd]") {
  SparseSystem sys = SparseSystem::product_logistic();
  SnapshotSet snaps = sys.sample_snapshots(Box(2, {-1.0, 1.0}), 30, 0.0, 3);
  Dictionary dict = Dictionary::monomials(2, 2);
  KoopmanApprox full = edmd_fit(dict, snaps, 1e-8);
  SparseKoopman sk = sparse_edmd(sys, {IndexSet{1, 2}}, {dict}, snaps, 1e-8);
  REQUIRE(sk.parts.size() == 1);
  CHECK((sk.parts[0].approx.K - full.K).cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd x0(2);
  x0 << 0.4, -0.2;
  Trajectory a = predict(full, x0, 10);
  Trajectory b = predict_sparse(sk, x0, 10);
  for (std::size_t k = 0; k < a.states.size(); ++k)
    CHECK((a.states[k] - b.states[k]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("decoupled dynamics factor into independent part fits", "[edmd]") {
  SparseSystem sys = SparseSystem::product_logistic();
  SnapshotSet snaps = sys.sample_snapshots(Box(2, {-1.0, 1.0}), 50, 0.0, 19);
  Dictionary d1 = Dictionary::monomials(1, 2);
  SparseKoopman sk = sparse_edmd(sys, {IndexSet{1}, IndexSet{2}}, {d1, d1}, snaps, 0.0);

  // Per-part fits on manually projected data must agree exactly.
  for (int k = 0; k < 2; ++k) {
    SnapshotSet sub = project_snapshots(snaps, sk.parts[static_cast<std::size_t>(k)].I);
    KoopmanApprox solo = edmd_fit(d1, sub, 0.0);
    CHECK((sk.parts[static_cast<std::size_t>(k)].approx.K - solo.K).cwiseAbs().maxCoeff() == 0.0);
  }

  // Coordinate estimates come from the owning one-variable parts.
  Eigen::VectorXd x0(2);
  x0 << 0.35, -0.6;
  Trajectory joint = predict_sparse(sk, x0, 8);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd x0k(1);
    x0k << x0[k];
    Trajectory solo = predict(sk.parts[static_cast<std::size_t>(k)].approx, x0k, 8);
    for (std::size_t s = 0; s < joint.states.size(); ++s)
      CHECK(joint.states[s][k] == solo.states[s][0]);
  }
}

TEST_CASE("sparse fitting validates parts, cover, and dictionaries", "[edmd]") {
  SparseSystem tent = SparseSystem::coupled_tent();
  SnapshotSet snaps = tent.sample_snapshots(Box(3, {0.0, 1.0}), 10, 0.0, 1);
  Dictionary d2 = Dictionary::monomials(2, 1);
  CHECK_THROWS_AS(sparse_edmd(tent, {IndexSet{2}}, {Dictionary::monomials(1, 1)}, snaps),
                  StructuralError);
  CHECK_THROWS_AS(sparse_edmd(tent, {IndexSet{1, 2}}, {Dictionary::monomials(3, 1)}, snaps),
                  ValidationError);
  CHECK_THROWS_AS(sparse_edmd(tent, {IndexSet{1, 2}}, {d2}, snaps), ValidationError);  // no cover
  CHECK_THROWS_AS(sparse_edmd(tent, {}, {}, snaps), ValidationError);
}

TEST_CASE("operator eigenpairs sort by magnitude and act as expected", "[edmd]") {
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2, 2);
  K(0, 0) = 0.2;
  K(1, 1) = 0.5;
  KoopmanApprox ka{K, Dictionary::monomials(1, 1), Eigen::MatrixXd::Zero(1, 2), 0.0, 0.0, 0.0};
  std::vector<KoopmanEig> eigs = koopman_eigs(ka);
  REQUIRE(eigs.size() == 2);
  CHECK(std::abs(eigs[0].lambda - std::complex<double>(0.5, 0.0)) < 1e-14);
  CHECK(std::abs(eigs[1].lambda - std::complex<double>(0.2, 0.0)) < 1e-14);
  // Unit coordinate coefficient vectors for a diagonal operator.
  CHECK(std::abs(std::abs(eigs[0].coeffs[1]) - 1.0) < 1e-14);
  CHECK(std::abs(eigs[0].coeffs[0]) < 1e-14);

  KoopmanApprox id = ka;
  id.K = Eigen::MatrixXd::Identity(2, 2);
  for (const KoopmanEig& e : koopman_eigs(id))
    CHECK(std::abs(e.lambda - std::complex<double>(1.0, 0.0)) < 1e-14);
}

TEST_CASE("fitted eigenfunctions satisfy the eigen-relation on orbits", "[edmd]") {
  Eigen::MatrixXd A(2, 2);
  A << 0.5, 0.1, 0.0, 0.3;
  SparseSystem sys = SparseSystem::linear(A, SystemKind::discrete);
  SnapshotSet snaps = sys.sample_snapshots(Box(2, {-1.0, 1.0}), 40, 0.0, 8);
  KoopmanApprox ka = edmd_fit(Dictionary::monomials(2, 1), snaps, 0.0);

  // The fitted spectrum contains the map's eigenvalues (plus 1 for the
  // constant observable).
  std::vector<KoopmanEig> eigs = koopman_eigs(ka);
  auto has = [&](double v) {
    for (const KoopmanEig& e : eigs)
      if (std::abs(e.lambda - std::complex<double>(v, 0.0)) < 1e-8) return true;
    return false;
  };
  CHECK(has(1.0));
  CHECK(has(0.5));
  CHECK(has(0.3));

  Eigen::VectorXd x0(2);
  x0 << 0.7, -0.4;
  Trajectory traj = sys.iterate_map(x0, 15);
  for (const KoopmanEig& e : eigs) {
    EigenfunctionHandle phi = as_eigenfunction(e.coeffs, ka.dict);
    CHECK(eigenfunction_residual(phi, e.lambda, traj, SystemKind::discrete) < 1e-8);
  }
}

TEST_CASE("lifting an eigenfunction preserves values and residuals", "[edmd]") {
  SparseSystem prod = SparseSystem::product_logistic();
  SnapshotSet snaps = prod.sample_snapshots(Box(2, {-1.0, 1.0}), 60, 0.0, 21);
  SnapshotSet sub = project_snapshots(snaps, IndexSet{1});
  KoopmanApprox ka = edmd_fit(Dictionary::monomials(1, 2), sub, 0.0);
  std::vector<KoopmanEig> eigs = koopman_eigs(ka);

  Eigen::VectorXd x0(2);
  x0 << 0.3, 0.8;
  Trajectory full_traj = prod.iterate_map(x0, 12);
  Trajectory sub_traj = project_trajectory(full_traj, IndexSet{1});

  for (const KoopmanEig& e : eigs) {
    EigenfunctionHandle g = as_eigenfunction(e.coeffs, ka.dict);
    EigenfunctionHandle lifted = lift_eigenfunction(e.coeffs, ka.dict, IndexSet{1}, 2);
    // Lifted values agree with composing the projection.
    for (const auto& s : full_traj.states)
      CHECK(std::abs(lifted(s) - g(project_coords(s, IndexSet{1}))) == 0.0);
    const double r_sub = eigenfunction_residual(g, e.lambda, sub_traj, SystemKind::discrete);
    const double r_full = eigenfunction_residual(lifted, e.lambda, full_traj, SystemKind::discrete);
    CHECK(r_full <= r_sub + 1e-12);
  }

  // Constant observable: eigenvalue 1, zero residual, trivial lift.
  Eigen::VectorXcd ones = Eigen::VectorXcd::Zero(3);
  ones[0] = 1.0;
  EigenfunctionHandle c = lift_eigenfunction(ones, ka.dict, IndexSet{1}, 2);
  CHECK(eigenfunction_residual(c, {1.0, 0.0}, full_traj, SystemKind::discrete) == 0.0);
}
