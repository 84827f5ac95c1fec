// koopman-sparse: command-line front end over the header-only library.
// Subcommands: graph, simulate, edmd, spectral, measure, moments.

#include <cctype>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include <koopman/dictionary.hpp>
#include <koopman/dynamics.hpp>
#include <koopman/edmd.hpp>
#include <koopman/errors.hpp>
#include <koopman/measures.hpp>
#include <koopman/moment_sos.hpp>
#include <koopman/rng.hpp>
#include <koopman/sdp_solver.hpp>
#include <koopman/sdpa_export.hpp>
#include <koopman/serialization.hpp>
#include <koopman/spectral.hpp>

namespace fs = std::filesystem;
using koopman::json;

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(sep, start);
    if (end == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(trim(s), &used);
    if (used != trim(s).size())
      throw koopman::ValidationError(what + ": trailing characters in '" + s + "'");
    return v;
  } catch (const std::invalid_argument&) {
    throw koopman::ValidationError(what + ": '" + s + "' is not a number");
  } catch (const std::out_of_range&) {
    throw koopman::ValidationError(what + ": '" + s + "' is out of range");
  }
}

Eigen::VectorXd parse_vector(const std::string& s, const std::string& what) {
  const auto fields = split(s, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size()));
  for (std::size_t i = 0; i < fields.size(); ++i)
    v[static_cast<Eigen::Index>(i)] = parse_double(fields[i], what);
  return v;
}

koopman::IndexSet parse_index_set(const std::string& s, const std::string& what) {
  std::vector<int> idx;
  for (const std::string& f : split(s, ',')) {
    const std::string t = trim(f);
    if (t.empty()) continue;
    try {
      idx.push_back(std::stoi(t));
    } catch (const std::exception&) {
      throw koopman::ValidationError(what + ": '" + t + "' is not an index");
    }
  }
  if (idx.empty()) throw koopman::ValidationError(what + ": empty index set");
  return koopman::IndexSet(std::move(idx));
}

std::vector<koopman::IndexSet> parse_parts(const std::string& s,
                                           const std::string& what = "--parts") {
  std::vector<koopman::IndexSet> parts;
  for (const std::string& p : split(s, ';')) {
    if (trim(p).empty()) continue;
    parts.push_back(parse_index_set(p, what));
  }
  if (parts.empty()) throw koopman::ValidationError(what + ": no index sets given");
  return parts;
}

// Cost grammar: terms joined by +/−, each term a '*'-separated product of
// numeric literals and powers x<i>[^<e>], e.g. "x1 + 0.5*x2^3 - 2".
koopman::Polynomial parse_cost(const std::string& text, int n) {
  const std::string src = trim(text);
  if (src.empty()) throw koopman::ValidationError("--cost: empty expression");
  koopman::Polynomial total = koopman::Polynomial::zero(n);
  std::size_t pos = 0;
  double sign = 1.0;
  if (src[0] == '+' || src[0] == '-') {
    sign = src[0] == '-' ? -1.0 : 1.0;
    pos = 1;
  }
  while (pos < src.size()) {
    std::size_t end = pos;
    while (end < src.size() && src[end] != '+' && src[end] != '-') ++end;
    const std::string term = trim(src.substr(pos, end - pos));
    if (term.empty()) throw koopman::ValidationError("--cost: empty term in '" + text + "'");
    double coeff = sign;
    std::vector<int> exps(static_cast<std::size_t>(n), 0);
    for (const std::string& rawfac : split(term, '*')) {
      const std::string fac = trim(rawfac);
      if (fac.empty()) throw koopman::ValidationError("--cost: empty factor in '" + term + "'");
      if (fac[0] == 'x' || fac[0] == 'X') {
        const std::size_t caret = fac.find('^');
        const std::string idxs = fac.substr(1, caret == std::string::npos
                                                   ? std::string::npos
                                                   : caret - 1);
        int idx = 0, p = 1;
        try {
          idx = std::stoi(trim(idxs));
          if (caret != std::string::npos) p = std::stoi(trim(fac.substr(caret + 1)));
        } catch (const std::exception&) {
          throw koopman::ValidationError("--cost: cannot parse factor '" + fac + "'");
        }
        if (idx < 1 || idx > n)
          throw koopman::ValidationError("--cost: variable x" + std::to_string(idx) +
                                         " outside 1.." + std::to_string(n));
        if (p < 0) throw koopman::ValidationError("--cost: negative exponent in '" + fac + "'");
        exps[static_cast<std::size_t>(idx - 1)] += p;
      } else {
        coeff *= parse_double(fac, "--cost");
      }
    }
    total = total + koopman::Polynomial::monomial(n, exps, coeff);
    if (end >= src.size()) break;
    sign = src[end] == '-' ? -1.0 : 1.0;
    pos = end + 1;
  }
  return total;
}

koopman::SparseSystem load_system(const std::string& spec) {
  const std::string t = trim(spec);
  if (t.empty()) throw koopman::ValidationError("--system: empty specification");
  if (t.front() == '{') {
    json j;
    try {
      j = json::parse(t);
    } catch (const json::parse_error& e) {
      throw koopman::ValidationError(std::string("--system: inline JSON invalid: ") + e.what());
    }
    return koopman::system_from_json(j);
  }
  if (fs::exists(t)) return koopman::system_from_json(koopman::load_json(t));
  return koopman::SparseSystem::builtin(t);
}

// "monomials:<d>" or "rbf:<l>".
koopman::Dictionary make_dictionary(const std::string& spec, int dim, const koopman::Box& box,
                                    double sigma, std::uint64_t seed, bool include_coords) {
  const auto parts = split(trim(spec), ':');
  if (parts.size() != 2)
    throw koopman::ValidationError("--dict: expected kind:count, got '" + spec + "'");
  int count = 0;
  try {
    count = std::stoi(trim(parts[1]));
  } catch (const std::exception&) {
    throw koopman::ValidationError("--dict: '" + parts[1] + "' is not a count");
  }
  const std::string kind = trim(parts[0]);
  if (kind == "monomials") return koopman::Dictionary::monomials(dim, count);
  if (kind == "rbf")
    return koopman::Dictionary::gaussian_rbf(dim, count, box, sigma, seed, include_coords);
  throw koopman::ValidationError("--dict: unknown kind '" + kind + "'");
}

fs::path prepare_outdir(const std::string& out) {
  fs::path dir(out.empty() ? "." : out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec && !fs::exists(dir))
    throw koopman::ValidationError("--out: cannot create directory '" + out + "'");
  return dir;
}

void write_run_echo(const fs::path& outdir, json cfg) {
  koopman::save_json(cfg, (outdir / "run.json").string());
}

json eig_to_json(std::complex<double> z) {
  return json{{"re", z.real()}, {"im", z.imag()}};
}

// Discrete: iterate the map. Continuous: macro steps of size h, each taken
// with `substeps` internal RK4 steps (matching how snapshots are generated).
koopman::Trajectory advance_trajectory(const koopman::SparseSystem& sys,
                                       const Eigen::VectorXd& x0, double h, int steps,
                                       int substeps) {
  if (sys.is_discrete()) return sys.iterate_map(x0, steps);
  if (h <= 0.0) throw koopman::ValidationError("--h: step size must be positive");
  if (substeps < 1) throw koopman::ValidationError("--substeps: must be at least 1");
  if (steps < 0) throw koopman::ValidationError("--steps: negative step count");
  koopman::Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  Eigen::VectorXd x = x0;
  for (int k = 1; k <= steps; ++k) {
    x = sys.advance(x, h, substeps);
    if (!x.allFinite())
      throw koopman::DivergenceError("trajectory: non-finite state at step " +
                                         std::to_string(k),
                                     static_cast<std::size_t>(k));
    traj.times.push_back(static_cast<double>(k) * h);
    traj.states.push_back(x);
  }
  return traj;
}

// Default decomposition: every enumerated proper subsystem; the full set when
// those do not cover every coordinate.
std::vector<koopman::IndexSet> default_parts(const koopman::SparseSystem& sys) {
  const koopman::SparsityGraph g = sys.sparsity_graph();
  const koopman::IndexSet full = koopman::IndexSet::full(sys.n());
  std::vector<koopman::IndexSet> parts;
  koopman::IndexSet cover;
  for (const koopman::IndexSet& I : g.enumerate_subsystems()) {
    if (I == full || I.empty()) continue;
    parts.push_back(I);
    cover = set_union(cover, I);
  }
  if (parts.empty() || cover != full) return {full};
  return parts;
}

double rmse(const koopman::Trajectory& a, const koopman::Trajectory& b,
            const std::vector<int>& coords) {
  const std::size_t steps = std::min(a.states.size(), b.states.size());
  if (steps == 0 || coords.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t s = 0; s < steps; ++s)
    for (int c : coords) {
      const double d = a.states[s][c - 1] - b.states[s][c - 1];
      acc += d * d;
    }
  return std::sqrt(acc / (static_cast<double>(steps) * coords.size()));
}

koopman::Trajectory reference_trajectory(const koopman::SparseSystem& sys,
                                         const Eigen::VectorXd& x0, double h, int steps) {
  return advance_trajectory(sys, x0, h, steps, koopman::SnapshotOptions{}.substeps);
}

// ---- subcommand state -------------------------------------------------------

struct GraphCfg {
  std::string system;
  std::size_t cap = 4096;
  std::string out = ".";
};

struct SimulateCfg {
  std::string system;
  std::string x0;
  int steps = 100;
  double h = 0.01;
  int substeps = 10;
  std::string project;
  std::string out = ".";
};

struct EdmdCfg {
  std::string system;
  int samples = 500;
  int traj_len = 25;
  double h = 0.25;
  std::uint64_t seed = 1;
  double box_lo = -1.0;
  double box_hi = 1.0;
  std::string dict = "rbf:1000";
  std::string sparse_dict = "rbf:350";
  double sigma = 1.0;
  std::string parts;
  std::string x0;
  int steps = 25;
  double reg = -1.0;
  bool reg_given = false;
  std::string out = ".";
};

struct SpectralCfg {
  std::string system;
  std::string dict = "monomials:2";
  int samples = 200;
  int traj_len = 1;
  double h = 0.01;
  std::uint64_t seed = 1;
  double box_lo = -1.0;
  double box_hi = 1.0;
  double sigma = 1.0;
  int top = 10;
  int check_steps = 20;
  std::string part;
  std::string out = ".";
};

struct AttractorCfg {
  int z_count = 550;
  int burn_in = 200;
  int keep = 300;
  std::uint64_t seed = 1;
  double x0 = 0.48934;
  double y0 = 0.8979573;
  std::string out = ".";
};

struct GlueCfg {
  std::vector<std::string> files;
  std::string coords;
  int n = 0;
  std::string out = ".";
};

struct AverageCfg {
  std::string system;
  std::string x0;
  int T = 1000;
  int test_degree = 6;
  std::string out = ".";
};

struct MomentsCfg {
  std::string system;
  int degree = 8;
  std::string cost = "x1";
  bool sparse = false;
  bool relaxed = false;
  std::string parts;
  double tol = 1e-9;
  int max_iter = 20000;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string path;
  std::string out = ".";
};

// ---- subcommand bodies --------------------------------------------------------

void run_graph(const GraphCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  write_run_echo(outdir, json{{"command", "graph"},
                              {"system", cfg.system},
                              {"cap", cfg.cap},
                              {"out", cfg.out}});
  const koopman::SparsityGraph graph = sys.sparsity_graph();
  json j;
  j["n"] = graph.n();
  json edges = json::array();
  for (const auto& [i, k] : graph.edges()) edges.push_back({i, k});
  j["edges"] = std::move(edges);
  const std::vector<koopman::IndexSet> subs = graph.enumerate_subsystems(cfg.cap);
  json jsubs = json::array();
  for (const koopman::IndexSet& I : subs) jsubs.push_back(I.indices());
  j["subsystems"] = std::move(jsubs);
  j["count"] = subs.size();
  koopman::save_json(j, (outdir / "graph.json").string());
  std::cout << j.dump(2) << "\n";
}

void run_simulate(const SimulateCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  koopman::SparseSystem sys = load_system(cfg.system);
  if (!cfg.project.empty())
    sys = sys.project(parse_index_set(cfg.project, "--project"));
  Eigen::VectorXd x0;
  if (cfg.x0.empty())
    x0 = Eigen::VectorXd::Zero(sys.n());
  else
    x0 = parse_vector(cfg.x0, "--x0");
  if (x0.size() != sys.n())
    throw koopman::ValidationError("--x0: expected " + std::to_string(sys.n()) + " entries");
  write_run_echo(outdir, json{{"command", "simulate"},
                              {"system", cfg.system},
                              {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                              {"steps", cfg.steps},
                              {"h", cfg.h},
                              {"substeps", cfg.substeps},
                              {"project", cfg.project},
                              {"out", cfg.out}});
  const koopman::Trajectory traj =
      advance_trajectory(sys, x0, cfg.h, cfg.steps, cfg.substeps);
  koopman::trajectory_to_csv(traj, (outdir / "trajectory.csv").string());
  std::cout << "wrote " << (outdir / "trajectory.csv").string() << " ("
            << traj.times.size() << " rows)\n";
}

void run_edmd(const EdmdCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  const int n = sys.n();
  const koopman::Box box(static_cast<std::size_t>(n), {cfg.box_lo, cfg.box_hi});
  const std::vector<koopman::IndexSet> parts =
      cfg.parts.empty() ? default_parts(sys) : parse_parts(cfg.parts);
  Eigen::VectorXd x0 =
      cfg.x0.empty() ? Eigen::VectorXd::Zero(n) : parse_vector(cfg.x0, "--x0");
  if (x0.size() != n)
    throw koopman::ValidationError("--x0: expected " + std::to_string(n) + " entries");

  json jparts = json::array();
  for (const koopman::IndexSet& I : parts) jparts.push_back(I.indices());
  write_run_echo(outdir, json{{"command", "edmd"},
                              {"system", cfg.system},
                              {"samples", cfg.samples},
                              {"traj_len", cfg.traj_len},
                              {"h", cfg.h},
                              {"seed", cfg.seed},
                              {"box", {cfg.box_lo, cfg.box_hi}},
                              {"dict", cfg.dict},
                              {"sparse_dict", cfg.sparse_dict},
                              {"sigma", cfg.sigma},
                              {"parts", jparts},
                              {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                              {"steps", cfg.steps},
                              {"reg", cfg.reg_given ? json(cfg.reg) : json(nullptr)},
                              {"out", cfg.out}});

  // One root seed; every consumer pulls from its own named stream.
  const koopman::RootRng root(cfg.seed);
  koopman::SnapshotOptions sopts;
  sopts.traj_len = cfg.traj_len;
  const koopman::SnapshotSet snaps =
      sys.sample_snapshots(box, cfg.samples, cfg.h, root.derive("snapshots"), sopts);

  const std::optional<double> reg =
      cfg.reg_given ? std::optional<double>(cfg.reg) : std::nullopt;
  const koopman::Dictionary full_dict =
      make_dictionary(cfg.dict, n, box, cfg.sigma, root.derive("dict[full]"), true);
  const koopman::KoopmanApprox full = koopman::edmd_fit(full_dict, snaps, reg);

  std::vector<koopman::Dictionary> part_dicts;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const koopman::Box pbox(static_cast<std::size_t>(parts[k].size()),
                            {cfg.box_lo, cfg.box_hi});
    part_dicts.push_back(make_dictionary(cfg.sparse_dict, parts[k].size(), pbox, cfg.sigma,
                                         root.derive("dict[" + std::to_string(k + 1) + "]"),
                                         true));
  }
  const koopman::SparseKoopman sparse =
      koopman::sparse_edmd(sys, parts, part_dicts, snaps, reg);

  const koopman::Trajectory truth = reference_trajectory(sys, x0, cfg.h, cfg.steps);
  const koopman::Trajectory pfull = koopman::predict(full, x0, cfg.steps);
  const koopman::Trajectory psparse = koopman::predict_sparse(sparse, x0, cfg.steps);

  std::vector<int> all_coords;
  for (int i = 1; i <= n; ++i) all_coords.push_back(i);
  json metrics;
  metrics["full_rmse"] = rmse(truth, pfull, all_coords);
  metrics["sparse_rmse"] = rmse(truth, psparse, all_coords);
  metrics["full_training_residual"] = full.training_residual;
  json per_part = json::array();
  for (std::size_t k = 0; k < sparse.parts.size(); ++k) {
    json pj;
    pj["coords"] = sparse.parts[k].I.indices();
    pj["training_residual"] = sparse.parts[k].approx.training_residual;
    pj["rmse"] = rmse(truth, psparse, sparse.parts[k].I.indices());
    per_part.push_back(std::move(pj));
  }
  metrics["parts"] = std::move(per_part);
  koopman::save_json(metrics, (outdir / "metrics.json").string());

  // Side-by-side prediction table: truth, dense model, decomposed model.
  std::ofstream outcsv(outdir / "prediction.csv");
  outcsv << "t";
  for (int i = 1; i <= n; ++i) outcsv << ",true_x" << i;
  for (int i = 1; i <= n; ++i) outcsv << ",full_x" << i;
  for (int i = 1; i <= n; ++i) outcsv << ",sparse_x" << i;
  outcsv << "\n";
  for (std::size_t s = 0; s < truth.times.size(); ++s) {
    outcsv << koopman::detail::fmt17(truth.times[s]);
    for (int i = 0; i < n; ++i) outcsv << "," << koopman::detail::fmt17(truth.states[s][i]);
    for (int i = 0; i < n; ++i) outcsv << "," << koopman::detail::fmt17(pfull.states[s][i]);
    for (int i = 0; i < n; ++i) outcsv << "," << koopman::detail::fmt17(psparse.states[s][i]);
    outcsv << "\n";
  }
  std::cout << "full rmse " << metrics["full_rmse"].get<double>() << ", sparse rmse "
            << metrics["sparse_rmse"].get<double>() << "\n";
}

void run_spectral(const SpectralCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  const int n = sys.n();
  const koopman::Box box(static_cast<std::size_t>(n), {cfg.box_lo, cfg.box_hi});
  write_run_echo(outdir, json{{"command", "spectral"},
                              {"system", cfg.system},
                              {"dict", cfg.dict},
                              {"samples", cfg.samples},
                              {"traj_len", cfg.traj_len},
                              {"h", cfg.h},
                              {"seed", cfg.seed},
                              {"box", {cfg.box_lo, cfg.box_hi}},
                              {"sigma", cfg.sigma},
                              {"top", cfg.top},
                              {"check_steps", cfg.check_steps},
                              {"part", cfg.part},
                              {"out", cfg.out}});

  const koopman::RootRng root(cfg.seed);
  koopman::SnapshotOptions sopts;
  sopts.traj_len = cfg.traj_len;
  const koopman::SnapshotSet snaps =
      sys.sample_snapshots(box, cfg.samples, cfg.h, root.derive("snapshots"), sopts);
  const koopman::Dictionary dict =
      make_dictionary(cfg.dict, n, box, cfg.sigma, root.derive("dict[full]"), true);
  const koopman::KoopmanApprox ka = koopman::edmd_fit(dict, snaps);
  const std::vector<koopman::KoopmanEig> eigs = koopman::koopman_eigs(ka);

  const Eigen::VectorXd x0 = snaps.X.col(0);
  const koopman::Trajectory traj = reference_trajectory(sys, x0, cfg.h, cfg.check_steps);

  json out;
  out["training_residual"] = ka.training_residual;
  json jeigs = json::array();
  const int count = std::min<int>(cfg.top, static_cast<int>(eigs.size()));
  for (int i = 0; i < count; ++i) {
    const koopman::KoopmanEig& e = eigs[static_cast<std::size_t>(i)];
    json je;
    je["lambda_step"] = eig_to_json(e.lambda);
    const koopman::EigenfunctionHandle phi = koopman::as_eigenfunction(e.coeffs, dict);
    if (sys.is_discrete()) {
      je["residual"] = koopman::eigenfunction_residual(
          [phi](const Eigen::VectorXd& x) { return phi(x); }, e.lambda, traj, sys.kind());
    } else if (std::abs(e.lambda) > 1e-12) {
      const std::complex<double> lam_cont = std::log(e.lambda) / cfg.h;
      je["lambda_continuous"] = eig_to_json(lam_cont);
      je["residual"] = koopman::eigenfunction_residual(
          [phi](const Eigen::VectorXd& x) { return phi(x); }, lam_cont, traj, sys.kind());
    }
    jeigs.push_back(std::move(je));
  }
  out["eigenvalues"] = std::move(jeigs);

  if (!cfg.part.empty()) {
    const koopman::IndexSet I = parse_index_set(cfg.part, "--part");
    const koopman::SparseSystem sub = sys.project(I);
    const koopman::SnapshotSet psnaps = koopman::project_snapshots(snaps, I);
    const koopman::Box pbox(static_cast<std::size_t>(I.size()), {cfg.box_lo, cfg.box_hi});
    const koopman::Dictionary pdict =
        make_dictionary(cfg.dict, I.size(), pbox, cfg.sigma, root.derive("dict[part]"), true);
    const koopman::KoopmanApprox pka = koopman::edmd_fit(pdict, psnaps);
    const std::vector<koopman::KoopmanEig> peigs = koopman::koopman_eigs(pka);
    json jsub;
    jsub["coords"] = I.indices();
    jsub["training_residual"] = pka.training_residual;
    json jpe = json::array();
    const int pcount = std::min<int>(cfg.top, static_cast<int>(peigs.size()));
    for (int i = 0; i < pcount; ++i) {
      const koopman::KoopmanEig& e = peigs[static_cast<std::size_t>(i)];
      json je;
      je["lambda_step"] = eig_to_json(e.lambda);
      const koopman::EigenfunctionHandle lifted =
          koopman::lift_eigenfunction(e.coeffs, pdict, I, n);
      if (sys.is_discrete()) {
        je["lift_residual"] = koopman::eigenfunction_residual(
            [lifted](const Eigen::VectorXd& x) { return lifted(x); }, e.lambda, traj,
            sys.kind());
      } else if (std::abs(e.lambda) > 1e-12) {
        const std::complex<double> lam_cont = std::log(e.lambda) / cfg.h;
        je["lambda_continuous"] = eig_to_json(lam_cont);
        je["lift_residual"] = koopman::eigenfunction_residual(
            [lifted](const Eigen::VectorXd& x) { return lifted(x); }, lam_cont, traj,
            sys.kind());
      }
      jpe.push_back(std::move(je));
    }
    jsub["eigenvalues"] = std::move(jpe);
    out["subsystem"] = std::move(jsub);
  }
  koopman::save_json(out, (outdir / "spectrum.json").string());
  std::cout << "wrote " << (outdir / "spectrum.json").string() << "\n";
}

void run_attractor(const AttractorCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  write_run_echo(outdir, json{{"command", "measure attractor"},
                              {"z_count", cfg.z_count},
                              {"burn_in", cfg.burn_in},
                              {"keep", cfg.keep},
                              {"seed", cfg.seed},
                              {"x0", cfg.x0},
                              {"y0", cfg.y0},
                              {"out", cfg.out}});
  koopman::AttractorParams p;
  p.z_count = cfg.z_count;
  p.burn_in = cfg.burn_in;
  p.keep = cfg.keep;
  p.seed = cfg.seed;
  p.x0 = cfg.x0;
  p.y0 = cfg.y0;
  const koopman::AttractorResult res = koopman::attractor_cloud(p);
  koopman::particles_to_csv(res.cloud_zx, (outdir / "cloud_zx.csv").string());
  koopman::particles_to_csv(res.cloud_zy, (outdir / "cloud_zy.csv").string());
  koopman::particles_to_csv(res.glued, (outdir / "glued.csv").string());
  const koopman::CompatibilityReport rep = koopman::compatibility_check(
      res.cloud_zx, res.cloud_zy, koopman::IndexSet{1, 2}, koopman::IndexSet{1, 3}, 1e-12);
  json summary;
  summary["atoms"] = res.glued.size();
  summary["z_samples"] = res.z_samples.size();
  summary["compatible"] = rep.compatible;
  summary["max_discrepancy"] = rep.max_discrepancy;
  summary["total_mass"] = res.glued.total_mass();
  koopman::save_json(summary, (outdir / "summary.json").string());
  std::cout << summary.dump(2) << "\n";
}

void run_glue(const GlueCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  if (cfg.files.empty()) throw koopman::ValidationError("--particles: no part files given");
  const std::vector<koopman::IndexSet> coords = parse_parts(cfg.coords, "--coords");
  if (coords.size() != cfg.files.size())
    throw koopman::ValidationError("--coords: need one index set per particle file");
  if (cfg.n < 1) throw koopman::ValidationError("--n: ambient dimension required");
  write_run_echo(outdir, json{{"command", "measure glue"},
                              {"particles", cfg.files},
                              {"coords", cfg.coords},
                              {"n", cfg.n},
                              {"out", cfg.out}});
  std::vector<std::pair<koopman::AtomicMeasure, koopman::IndexSet>> parts;
  for (std::size_t k = 0; k < cfg.files.size(); ++k)
    parts.emplace_back(koopman::particles_from_csv(cfg.files[k]), coords[k]);
  const koopman::AtomicMeasure glued = koopman::glue_atomic(parts, cfg.n);
  koopman::particles_to_csv(glued, (outdir / "glued.csv").string());
  std::cout << "glued " << parts.size() << " parts into " << glued.size() << " atoms\n";
}

void run_average(const AverageCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  Eigen::VectorXd x0 = cfg.x0.empty() ? Eigen::VectorXd::Zero(sys.n())
                                      : parse_vector(cfg.x0, "--x0");
  if (x0.size() != sys.n())
    throw koopman::ValidationError("--x0: expected " + std::to_string(sys.n()) + " entries");
  write_run_echo(outdir, json{{"command", "measure average"},
                              {"system", cfg.system},
                              {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                              {"T", cfg.T},
                              {"test_degree", cfg.test_degree},
                              {"out", cfg.out}});
  const koopman::AtomicMeasure mu0(sys.n(), {1.0}, {x0});
  const koopman::AtomicMeasure avg = koopman::cesaro_average(sys, mu0, cfg.T);
  koopman::particles_to_csv(avg, (outdir / "average.csv").string());
  const koopman::Dictionary testdict = koopman::Dictionary::monomials(sys.n(), cfg.test_degree);
  const koopman::InvarianceReport rep = koopman::invariance_report(avg, sys, testdict);
  json j;
  j["atoms"] = avg.size();
  j["T"] = cfg.T;
  j["max_normalized_residual"] = rep.max_normalized;
  json rows = json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"raw", row.raw}, {"atom_sup", row.atom_sup}, {"image_sup", row.image_sup}});
  j["rows"] = std::move(rows);
  koopman::save_json(j, (outdir / "invariance.json").string());
  std::cout << "T=" << cfg.T << " max normalized residual " << rep.max_normalized << "\n";
}

koopman::MomentProblem build_moment_problem(const MomentsCfg& cfg,
                                            const koopman::SparseSystem& sys) {
  const int n = sys.n();
  const koopman::Polynomial G = parse_cost(cfg.cost, n);
  if (cfg.sparse && cfg.relaxed)
    throw koopman::ValidationError("moments: --sparse and --relaxed are mutually exclusive");
  if (!cfg.sparse && !cfg.relaxed)
    return koopman::build_full_problem(sys, koopman::SemialgebraicSet::unit_box(n), G,
                                       cfg.degree);
  const std::vector<koopman::IndexSet> parts =
      cfg.parts.empty() ? default_parts(sys) : parse_parts(cfg.parts);
  if (cfg.relaxed)
    return koopman::build_relaxed_full_problem(sys, parts,
                                               koopman::SemialgebraicSet::unit_box(n), G,
                                               cfg.degree);
  std::vector<koopman::SemialgebraicSet> sets;
  for (const koopman::IndexSet& I : parts)
    sets.push_back(koopman::SemialgebraicSet::unit_box(I.size()));
  // Split the ambient cost: each term goes to the first part containing its
  // support; coupling terms have no home and are rejected.
  std::vector<std::vector<koopman::Polynomial::Term>> split_terms(parts.size());
  for (const auto& term : G.terms()) {
    std::vector<int> sup;
    for (std::size_t i = 0; i < term.exps.size(); ++i)
      if (term.exps[i] > 0) sup.push_back(static_cast<int>(i) + 1);
    const koopman::IndexSet tsup(sup);
    bool placed = false;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!tsup.subset_of(parts[k])) continue;
      split_terms[k].push_back(term);
      placed = true;
      break;
    }
    if (!placed)
      throw koopman::ValidationError(
          "moments: cost term couples coordinates across parts; supply --parts covering it");
  }
  std::vector<koopman::Polynomial> costs;
  for (std::size_t k = 0; k < parts.size(); ++k)
    costs.push_back(koopman::Polynomial(n, split_terms[k]));
  return koopman::build_sparse_problem(sys, parts, sets, costs, cfg.degree);
}

json moments_run_echo(const MomentsCfg& cfg, const std::string& verb) {
  return json{{"command", "moments " + verb},
              {"system", cfg.system},
              {"degree", cfg.degree},
              {"cost", cfg.cost},
              {"mode", cfg.sparse ? "sparse" : (cfg.relaxed ? "relaxed" : "full")},
              {"parts", cfg.parts},
              {"tol", cfg.tol},
              {"max_iter", cfg.max_iter},
              {"seed", cfg.seed_given ? json(cfg.seed) : json(nullptr)},
              {"out", cfg.out}};
}

void run_moments_build(const MomentsCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  write_run_echo(outdir, moments_run_echo(cfg, "build"));
  const koopman::MomentProblem prob = build_moment_problem(cfg, sys);
  json j = koopman::problem_to_json(prob);
  koopman::save_json(j, (outdir / "problem.json").string());
  std::cout << "variables " << prob.total_vars << ", equalities " << prob.equalities.size()
            << ", psd blocks " << prob.psd_blocks.size() << "\n";
}

void run_moments_solve(const MomentsCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  write_run_echo(outdir, moments_run_echo(cfg, "solve"));
  const koopman::MomentProblem prob = build_moment_problem(cfg, sys);
  koopman::SolverOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  if (cfg.seed_given) {
    // Noisy warm start: unit mass, everything else uniform in [−0.1, 0.1].
    koopman::RngStream rng(koopman::RootRng(cfg.seed).derive("warm-start"));
    std::vector<koopman::MomentVector> ws;
    for (const koopman::CliqueDecl& cl : prob.cliques) {
      koopman::MomentVector mv(cl.vars, cl.degree);
      for (int i = 0; i < mv.size(); ++i) mv[i] = rng.uniform(-0.1, 0.1);
      mv[0] = 1.0;
      ws.push_back(std::move(mv));
    }
    opts.warm_start = std::move(ws);
  }
  const koopman::SDPSolution sol = koopman::solve(prob, opts);
  const koopman::FeasibilityReport rep =
      koopman::verify_feasibility(sol.values, prob, std::max(cfg.tol, 1e-6));
  json j;
  j["objective"] = sol.objective;
  j["status"] = koopman::to_string(sol.status);
  j["iterations"] = sol.iterations;
  j["residuals"] = {{"equality_max", sol.residuals.equality_max},
                    {"psd_min_eig", sol.residuals.psd_min_eig}};
  j["feasibility"] = {{"equality_max", rep.equality_max},
                      {"overlap_max", rep.overlap_max},
                      {"psd_min_eig", rep.psd_min_eig},
                      {"feasible", rep.feasible}};
  json jvals = json::array();
  for (std::size_t k = 0; k < sol.values.size(); ++k) {
    const koopman::MomentVector& mv = sol.values[k];
    json jv;
    jv["coords"] = mv.clique().indices();
    jv["moments"] = std::vector<double>(mv.values().data(),
                                        mv.values().data() + mv.values().size());
    jvals.push_back(std::move(jv));
  }
  j["values"] = std::move(jvals);
  koopman::save_json(j, (outdir / "solution.json").string());
  std::cout << "objective " << sol.objective << " (" << koopman::to_string(sol.status)
            << ", " << sol.iterations << " iterations)\n";
}

void run_moments_export(const MomentsCfg& cfg) {
  const fs::path outdir = prepare_outdir(cfg.out);
  const koopman::SparseSystem sys = load_system(cfg.system);
  write_run_echo(outdir, moments_run_echo(cfg, "export"));
  const koopman::MomentProblem prob = build_moment_problem(cfg, sys);
  const std::string path =
      cfg.path.empty() ? (outdir / "problem.dat-s").string() : cfg.path;
  const koopman::SdpaExport ex = koopman::export_sdpa(prob, path);
  std::cout << "wrote " << path << " (free variables " << ex.free_count << ", blocks "
            << ex.block_sizes.size() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("KOOPMAN_SPARSE_THREADS")) {
    const int t = std::atoi(threads);
    if (t > 0) Eigen::setNbThreads(t);
  }

  CLI::App app{"Koopman-operator sparsity toolkit"};
  app.require_subcommand(1);

  GraphCfg graph_cfg;
  auto* graph_cmd =
      app.add_subcommand("graph", "List sparsity-graph edges and enumerate subsystems");
  graph_cmd->add_option("--system", graph_cfg.system,
                        "builtin name, JSON file path, or inline JSON")->required();
  graph_cmd->add_option("--cap", graph_cfg.cap, "enumeration cap");
  graph_cmd->add_option("--out", graph_cfg.out, "output directory");
  graph_cmd->callback([&] { run_graph(graph_cfg); });

  SimulateCfg sim_cfg;
  auto* sim_cmd = app.add_subcommand("simulate", "Integrate or iterate a system");
  sim_cmd->add_option("--system", sim_cfg.system, "system specification")->required();
  sim_cmd->add_option("--x0", sim_cfg.x0, "comma-separated initial state");
  sim_cmd->add_option("--steps", sim_cfg.steps, "number of steps");
  sim_cmd->add_option("--step", sim_cfg.h, "step size (flows)");
  sim_cmd->add_option("--substeps", sim_cfg.substeps, "integrator substeps per step");
  sim_cmd->add_option("--project", sim_cfg.project, "subsystem coordinates, e.g. 1,2");
  sim_cmd->add_option("--out", sim_cfg.out, "output directory");
  sim_cmd->callback([&] { run_simulate(sim_cfg); });

  EdmdCfg edmd_cfg;
  auto* edmd_cmd =
      app.add_subcommand("edmd", "Fit dense and decomposed Koopman approximations");
  edmd_cmd->add_option("--system", edmd_cfg.system, "system specification")->required();
  edmd_cmd->add_option("--samples", edmd_cfg.samples, "number of sampled trajectories");
  edmd_cmd->add_option("--traj-len", edmd_cfg.traj_len, "snapshot pairs per trajectory");
  edmd_cmd->add_option("--step", edmd_cfg.h, "snapshot step size");
  edmd_cmd->add_option("--seed", edmd_cfg.seed, "root seed");
  edmd_cmd->add_option("--box-lo", edmd_cfg.box_lo, "sampling box lower bound");
  edmd_cmd->add_option("--box-hi", edmd_cfg.box_hi, "sampling box upper bound");
  edmd_cmd->add_option("--dict", edmd_cfg.dict, "dense dictionary, kind:count");
  edmd_cmd->add_option("--sparse-dict", edmd_cfg.sparse_dict, "per-part dictionary");
  edmd_cmd->add_option("--sigma", edmd_cfg.sigma, "rbf width");
  edmd_cmd->add_option("--parts", edmd_cfg.parts, "semicolon-separated subsystems");
  edmd_cmd->add_option("--x0", edmd_cfg.x0, "prediction start state");
  edmd_cmd->add_option("--steps", edmd_cfg.steps, "prediction steps");
  auto* reg_opt = edmd_cmd->add_option("--reg", edmd_cfg.reg, "ridge regularization");
  edmd_cmd->add_option("--out", edmd_cfg.out, "output directory");
  edmd_cmd->callback([&, reg_opt] {
    edmd_cfg.reg_given = reg_opt->count() > 0;
    run_edmd(edmd_cfg);
  });

  SpectralCfg spec_cfg;
  auto* spec_cmd =
      app.add_subcommand("spectral", "Eigenvalues and eigenfunction residuals via EDMD");
  spec_cmd->add_option("--system", spec_cfg.system, "system specification")->required();
  spec_cmd->add_option("--dict", spec_cfg.dict, "dictionary, kind:count");
  spec_cmd->add_option("--samples", spec_cfg.samples, "number of sampled trajectories");
  spec_cmd->add_option("--traj-len", spec_cfg.traj_len, "snapshot pairs per trajectory");
  spec_cmd->add_option("--step", spec_cfg.h, "snapshot step size");
  spec_cmd->add_option("--seed", spec_cfg.seed, "root seed");
  spec_cmd->add_option("--box-lo", spec_cfg.box_lo, "sampling box lower bound");
  spec_cmd->add_option("--box-hi", spec_cfg.box_hi, "sampling box upper bound");
  spec_cmd->add_option("--sigma", spec_cfg.sigma, "rbf width");
  spec_cmd->add_option("--top", spec_cfg.top, "number of leading eigenvalues to report");
  spec_cmd->add_option("--check-steps", spec_cfg.check_steps, "residual check trajectory length");
  spec_cmd->add_option("--part", spec_cfg.part, "also analyze this subsystem and lift");
  spec_cmd->add_option("--out", spec_cfg.out, "output directory");
  spec_cmd->callback([&] { run_spectral(spec_cfg); });

  auto* measure_cmd = app.add_subcommand("measure", "Atomic-measure operations");
  measure_cmd->require_subcommand(1);

  AttractorCfg att_cfg;
  auto* att_cmd = measure_cmd->add_subcommand(
      "attractor", "Coupled tent-map experiment: per-part clouds and their glue");
  att_cmd->add_option("--z-count", att_cfg.z_count, "number of z samples");
  att_cmd->add_option("--burn-in", att_cfg.burn_in, "discarded iterations per sample");
  att_cmd->add_option("--keep", att_cfg.keep, "kept iterations per sample");
  att_cmd->add_option("--seed", att_cfg.seed, "sampler seed");
  att_cmd->add_option("--x0", att_cfg.x0, "initial x");
  att_cmd->add_option("--y0", att_cfg.y0, "initial y");
  att_cmd->add_option("--out", att_cfg.out, "output directory");
  att_cmd->callback([&] { run_attractor(att_cfg); });

  GlueCfg glue_cfg;
  auto* glue_cmd =
      measure_cmd->add_subcommand("glue", "Glue particle clouds along shared coordinates");
  glue_cmd->add_option("--particles", glue_cfg.files, "particle CSV per part")->required();
  glue_cmd->add_option("--coords", glue_cfg.coords,
                       "semicolon-separated coordinate sets, e.g. 1,2;1,3")->required();
  glue_cmd->add_option("--n", glue_cfg.n, "ambient dimension")->required();
  glue_cmd->add_option("--out", glue_cfg.out, "output directory");
  glue_cmd->callback([&] { run_glue(glue_cfg); });

  AverageCfg avg_cfg;
  auto* avg_cmd =
      measure_cmd->add_subcommand("average", "Cesàro average of a point mass under a map");
  avg_cmd->add_option("--system", avg_cfg.system, "system specification")->required();
  avg_cmd->add_option("--x0", avg_cfg.x0, "comma-separated start state");
  avg_cmd->add_option("--T", avg_cfg.T, "number of averaged steps");
  avg_cmd->add_option("--test-degree", avg_cfg.test_degree, "invariance test degree");
  avg_cmd->add_option("--out", avg_cfg.out, "output directory");
  avg_cmd->callback([&] { run_average(avg_cfg); });

  auto* moments_cmd = app.add_subcommand("moments", "Invariant-measure moment programs");
  moments_cmd->require_subcommand(1);

  MomentsCfg mom_cfg;
  auto add_moment_flags = [&](CLI::App* cmd, bool with_solver, bool with_path) {
    cmd->add_option("--system", mom_cfg.system, "system specification")->required();
    cmd->add_option("--degree", mom_cfg.degree, "truncation degree (even)");
    cmd->add_option("--cost", mom_cfg.cost, "polynomial cost, e.g. x1+x2");
    cmd->add_flag("--sparse", mom_cfg.sparse, "per-subsystem decomposition");
    cmd->add_flag("--relaxed", mom_cfg.relaxed, "full clique, part-supported invariance");
    cmd->add_option("--parts", mom_cfg.parts, "semicolon-separated subsystems");
    cmd->add_option("--out", mom_cfg.out, "output directory");
    if (with_solver) {
      cmd->add_option("--tol", mom_cfg.tol, "solver tolerance");
      cmd->add_option("--max-iter", mom_cfg.max_iter, "solver iteration cap");
      auto* seed_opt =
          cmd->add_option("--seed", mom_cfg.seed, "warm-start noise seed");
      cmd->parse_complete_callback(
          [&, seed_opt] { mom_cfg.seed_given = seed_opt->count() > 0; });
    }
    if (with_path) cmd->add_option("--path", mom_cfg.path, "output .dat-s path");
  };
  auto* mb_cmd = moments_cmd->add_subcommand("build", "Assemble and describe the program");
  add_moment_flags(mb_cmd, false, false);
  mb_cmd->callback([&] { run_moments_build(mom_cfg); });
  auto* ms_cmd = moments_cmd->add_subcommand("solve", "Assemble and solve the program");
  add_moment_flags(ms_cmd, true, false);
  ms_cmd->callback([&] { run_moments_solve(mom_cfg); });
  auto* me_cmd = moments_cmd->add_subcommand("export", "Write the program in SDPA format");
  add_moment_flags(me_cmd, false, true);
  me_cmd->callback([&] { run_moments_export(mom_cfg); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const koopman::CapExceededError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const koopman::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const koopman::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
