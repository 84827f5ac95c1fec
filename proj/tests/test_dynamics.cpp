#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <koopman/dynamics.hpp>
#include <koopman/rng.hpp>

using namespace koopman;
using Catch::Approx;

TEST_CASE("builtin systems declare their sparsity structure", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  REQUIRE(duf.n() == 6);
  CHECK(duf.kind() == SystemKind::continuous);
  CHECK(duf.comp(3).deps == IndexSet{4});
  CHECK(duf.comp(4).deps == IndexSet{1, 3, 4});
  std::vector<IndexSet> subs = duf.sparsity_graph().enumerate_subsystems();
  std::vector<IndexSet> want = {IndexSet{1, 2}, IndexSet{1, 2, 3, 4}, IndexSet{1, 2, 5, 6},
                                IndexSet::full(6)};
  CHECK(subs == want);

  SparseSystem tent = SparseSystem::coupled_tent();
  REQUIRE(tent.n() == 3);
  CHECK(tent.is_discrete());
  CHECK(tent.comp(1).deps == IndexSet{1});
  std::vector<IndexSet> tsubs = tent.sparsity_graph().enumerate_subsystems();
  std::vector<IndexSet> twant = {IndexSet{1}, IndexSet{1, 2}, IndexSet{1, 3}, IndexSet{1, 2, 3}};
  CHECK(tsubs == twant);

  std::vector<IndexSet> psubs =
      SparseSystem::product_logistic().sparsity_graph().enumerate_subsystems();
  std::vector<IndexSet> pwant = {IndexSet{1}, IndexSet{2}, IndexSet{1, 2}};
  CHECK(psubs == pwant);

  CHECK_THROWS_AS(SparseSystem::builtin("no_such_system"), ValidationError);
  CHECK(SparseSystem::builtin("logistic_cheb").n() == 1);
}

TEST_CASE("projection relabels a subsystem and commutes with evaluation", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  SparseSystem sub = duf.project(IndexSet{1, 2});
  REQUIRE(sub.n() == 2);

  RngStream rng(42);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd x(6);
    for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd lhs = sub.eval(project_coords(x, IndexSet{1, 2}));
    Eigen::VectorXd rhs = project_coords(duf.eval(x), IndexSet{1, 2});
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  CHECK(worst == 0.0);  // identical floating-point operations on both sides

  // Full-set projection is an identity relabeling.
  SparseSystem same = duf.project(IndexSet::full(6));
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -0.5, 0.5);
  CHECK((same.eval(x) - duf.eval(x)).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(duf.project(IndexSet{2}), StructuralError);
}

TEST_CASE("integration matches the exponential decay closed form", "[dynamics]") {
  Eigen::MatrixXd A(1, 1);
  A << -1.0;
  SparseSystem sys = SparseSystem::linear(A, SystemKind::continuous);
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  Trajectory traj = sys.integrate(x0, 0.1, 10);
  REQUIRE(traj.states.size() == 11);
  CHECK(traj.times.back() == Approx(1.0));
  CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) < 1e-6);
  for (std::size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);

  // Zero vector field: constant trajectory.
  SparseSystem still = SparseSystem::linear(Eigen::MatrixXd::Zero(2, 2), SystemKind::continuous);
  Eigen::VectorXd y0(2);
  y0 << 0.3, -0.7;
  Trajectory flat = still.integrate(y0, 0.5, 4);
  for (const auto& s : flat.states) CHECK((s - y0).norm() == 0.0);
}

TEST_CASE("the coupled oscillator benchmark stays bounded", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  Eigen::VectorXd x0(6);
  x0 << -0.3, -0.3, 0.7, 0.5, 0.3, 0.2;
  Trajectory traj = duf.integrate(x0, 0.25, 100);
  for (const auto& s : traj.states) CHECK(s.cwiseAbs().maxCoeff() < 10.0);
}

TEST_CASE("map iteration follows hand-computed orbits", "[dynamics]") {
  SparseSystem log1 = SparseSystem::logistic_cheb();
  Eigen::VectorXd x0(1);
  x0 << 0.0;
  Trajectory traj = log1.iterate_map(x0, 4);
  REQUIRE(traj.states.size() == 5);
  CHECK(traj.states[0][0] == 0.0);
  CHECK(traj.states[1][0] == -1.0);
  CHECK(traj.states[2][0] == 1.0);
  CHECK(traj.states[3][0] == 1.0);
  CHECK(traj.states[4][0] == 1.0);

  // Fixed point in, constant orbit out.
  Eigen::VectorXd fp(1);
  fp << 1.0;
  Trajectory still = log1.iterate_map(fp, 3);
  for (const auto& s : still.states) CHECK(s[0] == 1.0);

  CHECK_THROWS_AS(log1.integrate(x0, 0.1, 3), ValidationError);  // maps don't integrate
}

TEST_CASE("tent family slopes take their corrected values", "[dynamics]") {
  SparseSystem tent = SparseSystem::coupled_tent();
  // At z = 2 the x-slope 1 − sin(2π) is 1 and the y-slope expression
  // collapses to z = 2 exactly.
  Eigen::VectorXd s(3);
  s << 2.0, 0.4, 0.25;
  Eigen::VectorXd next = tent.eval(s);
  CHECK(next[0] == 2.0);
  CHECK(next[1] == Approx(0.4).margin(1e-12));
  CHECK(next[2] == Approx(0.5).margin(1e-15));

  // On the sampled interval the x-slope stays inside the chaotic range (1, 2].
  for (double z = 1.4143; z < 2.0; z += 0.01) {
    const double slope = 1.0 - std::sin(std::numbers::pi * z);
    CHECK(slope > 1.0);
    CHECK(slope <= 2.0);
  }
}

TEST_CASE("snapshot sampling is seeded and shape-correct", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  Box box(6, {-1.0, 1.0});
  SnapshotOptions opts;
  opts.traj_len = 5;
  SnapshotSet a = duf.sample_snapshots(box, 20, 0.25, 99, opts);
  SnapshotSet b = duf.sample_snapshots(box, 20, 0.25, 99, opts);
  REQUIRE(a.X.cols() == 100);
  REQUIRE(a.X.rows() == 6);
  CHECK((a.X - b.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Y - b.Y).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.h == 0.25);
  CHECK(a.seed == 99);

  // Each successor column is one macro step of the integrator.
  Eigen::VectorXd y = duf.advance(a.X.col(0), 0.25, opts.substeps);
  CHECK((a.Y.col(0) - y).cwiseAbs().maxCoeff() == 0.0);

  SnapshotSet single = SparseSystem::logistic_cheb().sample_snapshots(Box(1, {-1.0, 1.0}), 1, 0.0, 5);
  CHECK(single.X.cols() == 1);
  CHECK(single.h == 0.0);

  CHECK_THROWS_AS(duf.sample_snapshots(Box(2, {-1.0, 1.0}), 5, 0.25, 1), ValidationError);
  CHECK_THROWS_AS(duf.sample_snapshots(box, 0, 0.25, 1), ValidationError);
  CHECK_THROWS_AS(duf.sample_snapshots(box, 5, -0.1, 1), ValidationError);
}

TEST_CASE("linearization is exact for polynomial components", "[dynamics]") {
  Eigen::MatrixXd A(3, 3);
  A << 0.5, 0.1, 0.0, -0.2, 0.7, 0.3, 0.0, 0.0, 0.9;
  SparseSystem lin = SparseSystem::linear(A, SystemKind::discrete);
  Eigen::VectorXd x(3);
  x << 0.3, -0.8, 0.5;
  CHECK((lin.linearize(x) - A).cwiseAbs().maxCoeff() == 0.0);

  SparseSystem log1 = SparseSystem::logistic_cheb();
  Eigen::VectorXd half(1);
  half << 0.5;
  CHECK(log1.linearize(half)(0, 0) == 2.0);  // d/dx (2x² − 1) = 4x

  // Two-coordinate oscillator block: [[0, 1], [1 − 12·x₁², −0.5]] at 0.
  SparseSystem sub = SparseSystem::coupled_duffing().project(IndexSet{1, 2});
  Eigen::MatrixXd J = sub.linearize(Eigen::VectorXd::Zero(2));
  CHECK(J(0, 0) == 0.0);
  CHECK(J(0, 1) == 1.0);
  CHECK(J(1, 0) == 1.0);
  CHECK(J(1, 1) == -0.5);
}

TEST_CASE("divergence raises a typed error with the step index", "[dynamics]") {
  std::vector<Component> comps(1);
  comps[0].deps = IndexSet{1};
  comps[0].poly = Polynomial::monomial(1, {2});  // x ↦ x²
  SparseSystem sq(1, SystemKind::discrete, std::move(comps));
  Eigen::VectorXd x0(1);
  x0 << 2.0;
  CHECK_THROWS_AS(sq.iterate_map(x0, 20), DivergenceError);
  try {
    sq.iterate_map(x0, 20);
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 9);   // 2^(2^k) overflows double near k = 10
    CHECK(e.step() <= 11);
  }
}

TEST_CASE("trajectory projection picks subsystem coordinates", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  Eigen::VectorXd x0(6);
  x0 << -0.3, -0.3, 0.7, 0.5, 0.3, 0.2;
  Trajectory traj = duf.integrate(x0, 0.25, 5);
  Trajectory sub = project_trajectory(traj, IndexSet{1, 2});
  REQUIRE(sub.states.size() == traj.states.size());
  CHECK(sub.times == traj.times);
  for (std::size_t k = 0; k < sub.states.size(); ++k) {
    CHECK(sub.states[k].size() == 2);
    CHECK(sub.states[k][0] == traj.states[k][0]);
    CHECK(sub.states[k][1] == traj.states[k][1]);
  }
}

TEST_CASE("projection commutes with integration step for step", "[dynamics]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  for (const IndexSet& I : {IndexSet{1, 2}, IndexSet{1, 2, 3, 4}, IndexSet{1, 2, 5, 6}}) {
    SparseSystem sub = duf.project(I);
    RngStream rng(3);
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(6);
      for (int i = 0; i < 6; ++i) x[i] = rng.uniform(-1.0, 1.0);
      Eigen::VectorXd xs = project_coords(x, I);
      for (int k = 0; k < 20; ++k) {
        x = duf.rk4_step(x, 0.05);
        xs = sub.rk4_step(xs, 0.05);
      }
      worst = std::max(worst, (project_coords(x, I) - xs).cwiseAbs().maxCoeff());
    }
    CHECK(worst == 0.0);
  }
}

TEST_CASE("component declarations are validated", "[dynamics]") {
  std::vector<Component> comps(2);
  comps[0].deps = IndexSet{1, 2};
  comps[0].poly = Polynomial::coordinate(2, 2);
  comps[1].deps = IndexSet{1};  // lies: the polynomial below reads x2
  comps[1].poly = Polynomial::coordinate(2, 2);
  CHECK_THROWS_AS(SparseSystem(2, SystemKind::discrete, std::move(comps)), ValidationError);
}
