#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include <json.hpp>

#include "koopman/dictionary.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/measures.hpp"
#include "koopman/moment_sos.hpp"
#include "koopman/text.hpp"

namespace koopman {

using json = nlohmann::json;

// ---- systems ----------------------------------------------------------------

inline std::string kind_string(SystemKind k) {
  return k == SystemKind::continuous ? "ode" : "map";
}

inline SystemKind kind_from_string(const std::string& s) {
  if (s == "ode") return SystemKind::continuous;
  if (s == "map") return SystemKind::discrete;
  throw ValidationError("system JSON: kind must be \"ode\" or \"map\", got \"" + s + "\"");
}

inline json polynomial_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& t : p.terms()) terms.push_back({{"coeff", t.coeff}, {"exps", t.exps}});
  return json{{"terms", std::move(terms)}};
}

inline Polynomial polynomial_from_json(const json& j, int n) {
  std::vector<Polynomial::Term> terms;
  for (const auto& jt : j.at("terms")) {
    Polynomial::Term t;
    t.coeff = jt.at("coeff").get<double>();
    t.exps = jt.at("exps").get<std::vector<int>>();
    if (static_cast<int>(t.exps.size()) != n)
      throw ValidationError("polynomial JSON: exps length does not match dimension");
    terms.push_back(std::move(t));
  }
  return Polynomial(n, terms);
}

inline json system_to_json(const SparseSystem& sys) {
  json j;
  j["kind"] = kind_string(sys.kind());
  if (sys.builtin_info()) {
    const BuiltinInfo& bi = *sys.builtin_info();
    j["builtin"] = bi.name;
    json params = json::object();
    for (const auto& [key, vals] : bi.params) {
      if (vals.size() == 1)
        params[key] = vals[0];
      else
        params[key] = vals;
    }
    if (!params.empty()) j["params"] = std::move(params);
    if (!bi.project.empty()) j["project"] = bi.project;
    return j;
  }
  if (!sys.is_polynomial())
    throw ValidationError(
        "system_to_json: systems with opaque components need builtin provenance");
  j["n"] = sys.n();
  json comps = json::array();
  for (int c = 1; c <= sys.n(); ++c) {
    json jc;
    jc["deps"] = sys.comp(c).deps.indices();
    jc["poly"] = polynomial_to_json(*sys.comp(c).poly);
    comps.push_back(std::move(jc));
  }
  j["components"] = std::move(comps);
  return j;
}

namespace detail {

inline std::vector<double> param_values(const json& params, const std::string& key) {
  const json& v = params.at(key);
  if (v.is_number()) return {v.get<double>()};
  return v.get<std::vector<double>>();
}

inline SparseSystem builtin_from_json(const json& j) {
  const std::string name = j.at("builtin").get<std::string>();
  const json params = j.value("params", json::object());
  SparseSystem sys = [&]() -> SparseSystem {
    if (name == "coupled_duffing") {
      DuffingParams p;
      if (params.contains("delta")) p.delta = param_values(params, "delta")[0];
      if (params.contains("beta")) p.beta = param_values(params, "beta")[0];
      if (params.contains("alpha")) p.alpha = param_values(params, "alpha")[0];
      if (params.contains("gamma")) {
        const auto g = param_values(params, "gamma");
        if (g.size() != 2)
          throw ValidationError("system JSON: coupled_duffing gamma needs two entries");
        p.gamma1 = g[0];
        p.gamma2 = g[1];
      }
      return SparseSystem::coupled_duffing(p);
    }
    if (name == "linear") {
      const auto a_flat = param_values(params, "A");
      int n = 0;
      while (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) < a_flat.size()) ++n;
      if (static_cast<std::size_t>(n) * static_cast<std::size_t>(n) != a_flat.size())
        throw ValidationError("system JSON: linear system needs a square A");
      Eigen::MatrixXd A(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          A(r, c) = a_flat[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                           static_cast<std::size_t>(c)];
      const bool discrete =
          params.contains("discrete") && param_values(params, "discrete")[0] != 0.0;
      return SparseSystem::linear(A,
                                  discrete ? SystemKind::discrete : SystemKind::continuous);
    }
    return SparseSystem::builtin(name);
  }();
  if (j.contains("project")) {
    const auto proj = j.at("project").get<std::vector<int>>();
    sys = sys.project(IndexSet(proj));
  }
  if (j.contains("kind") && kind_from_string(j.at("kind").get<std::string>()) != sys.kind())
    throw ValidationError("system JSON: declared kind contradicts builtin '" + name + "'");
  return sys;
}

}  // namespace detail

inline SparseSystem system_from_json(const json& j) {
  if (j.contains("builtin")) return detail::builtin_from_json(j);
  const int n = j.at("n").get<int>();
  const SystemKind kind = kind_from_string(j.at("kind").get<std::string>());
  const json& jcomps = j.at("components");
  if (static_cast<int>(jcomps.size()) != n)
    throw ValidationError("system JSON: expected " + std::to_string(n) + " components");
  std::vector<Component> comps;
  comps.reserve(jcomps.size());
  for (const json& jc : jcomps) {
    Component c;
    c.deps = IndexSet(jc.at("deps").get<std::vector<int>>());
    c.poly = polynomial_from_json(jc.at("poly"), n);
    comps.push_back(std::move(c));
  }
  return SparseSystem(n, kind, std::move(comps));
}

// ---- dictionaries -------------------------------------------------------------

inline json dictionary_to_json(const Dictionary& dict) {
  if (!dict.meta())
    throw ValidationError("dictionary_to_json: only generated dictionaries carry a descriptor");
  const DictionaryMeta& m = *dict.meta();
  json j;
  j["kind"] = m.kind;
  j["dim"] = dict.dim();
  if (m.kind == "monomials") {
    j["d"] = m.d;
  } else {
    j["l"] = m.l;
    json box = json::array();
    for (const auto& [lo, hi] : m.box) box.push_back({lo, hi});
    j["box"] = std::move(box);
    j["sigma"] = m.sigma;
    j["seed"] = m.seed;
    j["include_coords"] = dict.includes_coords();
  }
  return j;
}

inline Dictionary dictionary_from_json(const json& j, int default_dim = 0) {
  const std::string kind = j.at("kind").get<std::string>();
  const int dim = j.contains("dim") ? j.at("dim").get<int>() : default_dim;
  if (dim < 1) throw ValidationError("dictionary JSON: missing or invalid dim");
  if (kind == "monomials") return Dictionary::monomials(dim, j.at("d").get<int>());
  if (kind == "rbf") {
    Box box;
    for (const auto& jb : j.at("box")) {
      if (jb.size() != 2) throw ValidationError("dictionary JSON: box entries need [lo, hi]");
      box.push_back({jb[0].get<double>(), jb[1].get<double>()});
    }
    return Dictionary::gaussian_rbf(dim, j.at("l").get<int>(), box,
                                    j.value("sigma", 1.0), j.at("seed").get<std::uint64_t>(),
                                    j.value("include_coords", true));
  }
  throw ValidationError("dictionary JSON: unknown kind \"" + kind + "\"");
}

// ---- CSV artifacts ------------------------------------------------------------

inline void snapshots_to_csv(const SnapshotSet& snaps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("snapshots_to_csv: cannot open '" + path + "'");
  const int n = static_cast<int>(snaps.X.rows());
  for (int i = 1; i <= n; ++i) out << "x" << i << ",";
  for (int i = 1; i <= n; ++i) out << "y" << i << (i == n ? "" : ",");
  out << "\n";
  for (Eigen::Index c = 0; c < snaps.X.cols(); ++c) {
    for (int i = 0; i < n; ++i) out << detail::fmt17(snaps.X(i, c)) << ",";
    for (int i = 0; i < n; ++i) out << detail::fmt17(snaps.Y(i, c)) << (i == n - 1 ? "" : ",");
    out << "\n";
  }
}

inline SnapshotSet snapshots_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("snapshots_from_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("snapshots_from_csv: empty file");
  const std::size_t cols = detail::split_csv_line(line).size();
  if (cols == 0 || cols % 2 != 0)
    throw ValidationError("snapshots_from_csv: header must list x1..xn,y1..yn");
  const int n = static_cast<int>(cols / 2);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != cols)
      throw ValidationError("snapshots_from_csv: ragged row in '" + path + "'");
    std::vector<double> row;
    row.reserve(cols);
    for (const std::string& f : fields) row.push_back(std::stod(f));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("snapshots_from_csv: no data rows");
  SnapshotSet snaps;
  snaps.X.resize(n, static_cast<Eigen::Index>(rows.size()));
  snaps.Y.resize(n, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int i = 0; i < n; ++i) {
      snaps.X(i, static_cast<Eigen::Index>(r)) = rows[r][static_cast<std::size_t>(i)];
      snaps.Y(i, static_cast<Eigen::Index>(r)) =
          rows[r][static_cast<std::size_t>(i) + static_cast<std::size_t>(n)];
    }
  return snaps;
}

inline void trajectory_to_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("trajectory_to_csv: cannot open '" + path + "'");
  const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  out << "t";
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  out << "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    out << detail::fmt17(traj.times[k]);
    for (int i = 0; i < n; ++i) out << "," << detail::fmt17(traj.states[k][i]);
    out << "\n";
  }
}

inline void particles_to_csv(const AtomicMeasure& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("particles_to_csv: cannot open '" + path + "'");
  out << "w";
  for (int i = 1; i <= mu.dim(); ++i) out << ",x" << i;
  out << "\n";
  for (int a = 0; a < mu.size(); ++a) {
    out << detail::fmt17(mu.weight(a));
    for (int i = 0; i < mu.dim(); ++i) out << "," << detail::fmt17(mu.position(a)[i]);
    out << "\n";
  }
}

inline AtomicMeasure particles_from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("particles_from_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("particles_from_csv: empty file");
  const std::size_t cols = detail::split_csv_line(line).size();
  if (cols < 2) throw ValidationError("particles_from_csv: header must list w,x1..xn");
  const int n = static_cast<int>(cols - 1);
  std::vector<double> w;
  std::vector<Eigen::VectorXd> pos;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != cols)
      throw ValidationError("particles_from_csv: ragged row in '" + path + "'");
    w.push_back(std::stod(fields[0]));
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = std::stod(fields[static_cast<std::size_t>(i) + 1]);
    pos.push_back(std::move(x));
  }
  return AtomicMeasure(n, std::move(w), std::move(pos));
}

inline void matrix_to_csv(const Eigen::MatrixXd& M, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("matrix_to_csv: cannot open '" + path + "'");
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      out << detail::fmt17(M(r, c)) << (c + 1 == M.cols() ? "" : ",");
    out << "\n";
  }
}

// ---- moment problems -----------------------------------------------------------

inline json linear_form_to_json(const LinearForm& f) {
  json terms = json::array();
  for (const auto& [v, c] : f.terms) terms.push_back({v, c});
  return terms;
}

inline json problem_to_json(const MomentProblem& prob) {
  json j;
  j["dim"] = prob.dim;
  j["degree"] = prob.degree;
  j["variables"] = prob.total_vars;
  json cls = json::array();
  for (std::size_t k = 0; k < prob.cliques.size(); ++k) {
    const CliqueDecl& cl = prob.cliques[k];
    cls.push_back({{"vars", cl.vars.indices()},
                   {"degree", cl.degree},
                   {"offset", cl.offset},
                   {"count", cl.size()},
                   {"moment_matrix_side", prob.moment_matrix_side(static_cast<int>(k))}});
  }
  j["cliques"] = std::move(cls);
  j["objective"] = linear_form_to_json(prob.objective);
  json eqs = json::array();
  for (const LinearEq& e : prob.equalities) {
    const char* kind = e.kind == EqKind::mass        ? "mass"
                       : e.kind == EqKind::invariance ? "invariance"
                                                      : "overlap";
    eqs.push_back({{"label", e.label},
                   {"kind", kind},
                   {"rhs", e.rhs},
                   {"terms", linear_form_to_json(e.lhs)}});
  }
  j["equalities"] = std::move(eqs);
  json blocks = json::array();
  for (const PsdBlock& b : prob.psd_blocks) {
    json entries = json::array();
    for (const LinearForm& f : b.upper) entries.push_back(linear_form_to_json(f));
    blocks.push_back({{"label", b.label},
                      {"size", b.size},
                      {"clique", b.clique_index + 1},
                      {"upper_entries", std::move(entries)}});
  }
  j["psd_blocks"] = std::move(blocks);
  return j;
}

// ---- file helpers ---------------------------------------------------------------

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("load_json: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("load_json: '" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("save_json: cannot open '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace koopman
