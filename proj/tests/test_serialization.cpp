#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <koopman/serialization.hpp>

using namespace koopman;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

bool eval_identical(const SparseSystem& a, const SparseSystem& b, std::uint64_t seed) {
  if (a.n() != b.n() || a.kind() != b.kind()) return false;
  RngStream rng(seed);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(a.n());
    for (int i = 0; i < a.n(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd fa = a.eval(x), fb = b.eval(x);
    for (int i = 0; i < a.n(); ++i)
      if (fa[i] != fb[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("builtin systems round trip through json with parameters", "[serialization]") {
  DuffingParams p;
  p.delta = 0.4;
  p.gamma2 = 0.25;
  SparseSystem duf = SparseSystem::coupled_duffing(p);
  json j = system_to_json(duf);
  CHECK(j.at("builtin") == "coupled_duffing");
  CHECK(j.at("kind") == "ode");
  CHECK(j.at("params").at("delta").get<double>() == 0.4);
  REQUIRE(j.at("params").at("gamma").size() == 2);
  SparseSystem back = system_from_json(j);
  CHECK(eval_identical(duf, back, 11));

  // Projection provenance survives the trip.
  SparseSystem sub = duf.project(IndexSet{1, 2});
  json js = system_to_json(sub);
  CHECK(js.at("project") == std::vector<int>{1, 2});
  CHECK(eval_identical(sub, system_from_json(js), 12));

  SparseSystem tent = SparseSystem::coupled_tent();  // opaque comps, named builtin
  CHECK(eval_identical(tent, system_from_json(system_to_json(tent)), 13));

  Eigen::MatrixXd A(2, 2);
  A << 0.5, 0.25, 0.0, -0.75;
  SparseSystem lin = SparseSystem::linear(A, SystemKind::discrete);
  json jl = system_to_json(lin);
  CHECK(jl.at("kind") == "map");
  CHECK(eval_identical(lin, system_from_json(jl), 14));
}

TEST_CASE("custom polynomial systems serialize componentwise", "[serialization]") {
  std::vector<Component> comps(2);
  comps[0].deps = IndexSet{1};
  comps[0].poly = 2.0 * Polynomial::monomial(2, {2, 0}) - Polynomial::constant(2, 1.0);
  comps[1].deps = IndexSet{1, 2};
  comps[1].poly = Polynomial::monomial(2, {1, 1});
  SparseSystem sys(2, SystemKind::discrete, std::move(comps));

  json j = system_to_json(sys);
  CHECK(j.at("n") == 2);
  REQUIRE(j.at("components").size() == 2);
  CHECK(j.at("components")[1].at("deps") == std::vector<int>{1, 2});
  SparseSystem back = system_from_json(j);
  CHECK(eval_identical(sys, back, 21));
  CHECK(back.comp(1).deps == IndexSet{1});

  // Opaque components without builtin provenance cannot be serialized.
  std::vector<Component> opaque(1);
  opaque[0].deps = IndexSet{1};
  opaque[0].fn = [](const Eigen::VectorXd& s) { return s[0] * 0.5; };
  SparseSystem dark(1, SystemKind::discrete, std::move(opaque));
  CHECK_THROWS_AS(system_to_json(dark), ValidationError);
}

TEST_CASE("malformed system json is rejected", "[serialization]") {
  CHECK_THROWS_AS(system_from_json(json{{"builtin", "no_such_system"}}), ValidationError);
  // Declared kind contradicting the builtin.
  CHECK_THROWS_AS(system_from_json(json{{"builtin", "logistic_cheb"}, {"kind", "ode"}}),
                  ValidationError);
  CHECK_THROWS_AS(kind_from_string("flow"), ValidationError);
  // Component count disagrees with n.
  json bad;
  bad["n"] = 2;
  bad["kind"] = "map";
  bad["components"] = json::array();
  CHECK_THROWS_AS(system_from_json(bad), ValidationError);
  // Wrong exps arity inside a polynomial.
  json poly;
  poly["terms"] = json::array({{{"coeff", 1.0}, {"exps", {1, 0}}}});
  CHECK_THROWS_AS(polynomial_from_json(poly, 1), ValidationError);
  // gamma must carry both oscillator forcings.
  json duf;
  duf["builtin"] = "coupled_duffing";
  duf["params"] = {{"gamma", {0.5}}};
  CHECK_THROWS_AS(system_from_json(duf), ValidationError);
  // Non-square linear system matrix.
  json lin;
  lin["builtin"] = "linear";
  lin["params"] = {{"A", {1.0, 2.0, 3.0}}};
  CHECK_THROWS_AS(system_from_json(lin), ValidationError);
}

TEST_CASE("dictionaries round trip through their descriptors", "[serialization]") {
  Dictionary mono = Dictionary::monomials(3, 4);
  json jm = dictionary_to_json(mono);
  CHECK(jm.at("kind") == "monomials");
  CHECK(jm.at("dim") == 3);
  CHECK(jm.at("d") == 4);
  Dictionary mono2 = dictionary_from_json(jm);
  Eigen::VectorXd x(3);
  x << 0.3, -0.8, 0.5;
  CHECK((mono.evaluate(x) - mono2.evaluate(x)).cwiseAbs().maxCoeff() == 0.0);

  Box box(2, {-2.0, 2.0});
  Dictionary rbf = Dictionary::gaussian_rbf(2, 7, box, 0.8, 42, false);
  json jr = dictionary_to_json(rbf);
  CHECK(jr.at("kind") == "rbf");
  CHECK(jr.at("l") == 7);
  CHECK(jr.at("sigma") == 0.8);
  CHECK(jr.at("seed") == 42);
  CHECK(jr.at("include_coords") == false);
  Dictionary rbf2 = dictionary_from_json(jr);
  Eigen::VectorXd p(2);
  p << 0.9, -1.4;
  CHECK((rbf.evaluate(p) - rbf2.evaluate(p)).cwiseAbs().maxCoeff() == 0.0);
  CHECK(rbf2.rows() == 7);

  // Hand-assembled dictionaries carry no descriptor.
  Dictionary bare(1, {Observable{MonomialObs{{1}}}});
  CHECK_THROWS_AS(dictionary_to_json(bare), ValidationError);

  CHECK_THROWS_AS(dictionary_from_json(json{{"kind", "wavelets"}, {"dim", 1}}),
                  ValidationError);
  CHECK_THROWS_AS(dictionary_from_json(json{{"kind", "monomials"}, {"d", 2}}),
                  ValidationError);  // dimension missing and no default
  json badbox;
  badbox["kind"] = "rbf";
  badbox["dim"] = 1;
  badbox["l"] = 3;
  badbox["seed"] = 1;
  badbox["box"] = json::array({{0.0, 1.0, 2.0}});
  CHECK_THROWS_AS(dictionary_from_json(badbox), ValidationError);
}

TEST_CASE("snapshot matrices survive csv round trips bit for bit", "[serialization]") {
  SparseSystem duf = SparseSystem::coupled_duffing();
  Box box(6, {-1.0, 1.0});
  SnapshotSet snaps = duf.sample_snapshots(box, 10, 0.1, 77);
  TempFile tmp("koopman_test_snaps.csv");
  snapshots_to_csv(snaps, tmp.path);
  SnapshotSet back = snapshots_from_csv(tmp.path);
  REQUIRE(back.X.rows() == 6);
  REQUIRE(back.X.cols() == snaps.X.cols());
  CHECK((back.X - snaps.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.Y - snaps.Y).cwiseAbs().maxCoeff() == 0.0);

  {
    std::ofstream out(tmp.path);
    out << "x1,x2,y1,y2\n1.0,2.0,3.0\n";  // ragged row
  }
  CHECK_THROWS_AS(snapshots_from_csv(tmp.path), ValidationError);
  {
    std::ofstream out(tmp.path);
    out << "x1,x2,y1\n";  // odd column count
  }
  CHECK_THROWS_AS(snapshots_from_csv(tmp.path), ValidationError);
  {
    std::ofstream out(tmp.path);
    out << "x1,y1\n";  // header without data
  }
  CHECK_THROWS_AS(snapshots_from_csv(tmp.path), ValidationError);
  CHECK_THROWS_AS(snapshots_from_csv("no_such_snapshots.csv"), ValidationError);
}

TEST_CASE("particle clouds survive csv round trips bit for bit", "[serialization]") {
  std::vector<double> w{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::vector<Eigen::VectorXd> pos;
  RngStream rng(5);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd x(2);
    x << rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0);
    pos.push_back(x);
  }
  AtomicMeasure mu(2, w, pos);
  TempFile tmp("koopman_test_particles.csv");
  particles_to_csv(mu, tmp.path);
  AtomicMeasure back = particles_from_csv(tmp.path);
  CHECK(exactly_equal(mu, back));

  {
    std::ofstream out(tmp.path);
    out << "w,x1\n0.5\n";
  }
  CHECK_THROWS_AS(particles_from_csv(tmp.path), ValidationError);
  {
    std::ofstream out(tmp.path);
    out << "w\n";
  }
  CHECK_THROWS_AS(particles_from_csv(tmp.path), ValidationError);
}

TEST_CASE("trajectories and matrices write plain csv tables", "[serialization]") {
  SparseSystem lin =
      SparseSystem::linear(-Eigen::MatrixXd::Identity(1, 1), SystemKind::continuous);
  Eigen::VectorXd x0(1);
  x0 << 1.0;
  Trajectory traj = lin.integrate(x0, 0.1, 5);
  TempFile tmp("koopman_test_traj.csv");
  trajectory_to_csv(traj, tmp.path);
  std::ifstream in(tmp.path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x1");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == static_cast<int>(traj.times.size()));

  Eigen::MatrixXd M(2, 3);
  M << 1, 2, 3, 4, 5, 6;
  TempFile tmp2("koopman_test_matrix.csv");
  matrix_to_csv(M, tmp2.path);
  std::ifstream min(tmp2.path);
  std::getline(min, line);
  CHECK(line == "1,2,3");
  std::getline(min, line);
  CHECK(line == "4,5,6");
}

TEST_CASE("moment problems describe themselves as json", "[serialization]") {
  MomentProblem prob = build_full_problem(SparseSystem::logistic_cheb(),
                                          SemialgebraicSet::unit_box(1),
                                          Polynomial::coordinate(1, 1), 4);
  json j = problem_to_json(prob);
  CHECK(j.at("dim") == 1);
  CHECK(j.at("degree") == 4);
  CHECK(j.at("variables") == 5);
  REQUIRE(j.at("cliques").size() == 1);
  CHECK(j.at("cliques")[0].at("count") == 5);
  CHECK(j.at("cliques")[0].at("moment_matrix_side") == 3);
  REQUIRE(j.at("equalities").size() == 3);
  CHECK(j.at("equalities")[0].at("kind") == "mass");
  CHECK(j.at("equalities")[1].at("kind") == "invariance");
  REQUIRE(j.at("psd_blocks").size() == 2);
  CHECK(j.at("psd_blocks")[0].at("size") == 3);
  CHECK(j.at("psd_blocks")[1].at("size") == 2);
  CHECK(j.at("objective").size() == 1);
}

TEST_CASE("json file helpers validate input", "[serialization]") {
  TempFile tmp("koopman_test_blob.json");
  json j{{"alpha", 1}, {"beta", {1, 2, 3}}};
  save_json(j, tmp.path);
  CHECK(load_json(tmp.path) == j);

  {
    std::ofstream out(tmp.path);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_json(tmp.path), ValidationError);
  CHECK_THROWS_AS(load_json("definitely_missing.json"), ValidationError);
}
