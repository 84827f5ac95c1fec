#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <json.hpp>

#include "koopman/errors.hpp"
#include "koopman/moment_sos.hpp"
#include "koopman/text.hpp"

namespace koopman {

// Result of eliminating the equality constraints: the feasible affine set is
// {y_particular + nullbasis·t}, with orthonormal nullbasis columns, so
// t = nullbasisᵀ(y − y_particular) recovers free coordinates of a feasible y.
struct SdpaExport {
  Eigen::VectorXd y_particular;
  Eigen::MatrixXd nullbasis;          // var_count × free_count
  Eigen::VectorXd objective;          // on t: nullbasisᵀ c
  double objective_constant = 0.0;    // c·y_particular
  std::vector<int> block_sizes;
  std::vector<CliqueDecl> cliques;
  int var_count = 0;
  int free_count = 0;

  Eigen::VectorXd embed(const Eigen::VectorXd& t) const {
    if (t.size() != free_count) throw ValidationError("SdpaExport: wrong free-vector length");
    return y_particular + nullbasis * t;
  }
  Eigen::VectorXd reduce(const Eigen::VectorXd& y) const {
    if (y.size() != var_count) throw ValidationError("SdpaExport: wrong moment-vector length");
    return nullbasis.transpose() * (y - y_particular);
  }
  std::vector<MomentVector> split(const Eigen::VectorXd& y) const {
    std::vector<MomentVector> out;
    out.reserve(cliques.size());
    for (const CliqueDecl& cl : cliques) {
      MomentVector mv(cl.vars, cl.degree);
      mv.values() = y.segment(cl.offset, cl.size());
      out.push_back(std::move(mv));
    }
    return out;
  }
};

// Eliminate the equalities A y = b of prob (min-norm particular solution +
// orthonormal null-space basis). Inconsistent equalities are an infeasibility.
inline SdpaExport eliminate_equalities(const MomentProblem& prob) {
  const int N = prob.total_vars;
  std::vector<const LinearEq*> eqs;
  for (const LinearEq& e : prob.equalities) {
    if (e.lhs.empty()) {
      if (std::abs(e.rhs) > 1e-12)
        throw IncompatibilityError("eliminate_equalities: inconsistent trivial equality '" +
                                   e.label + "'");
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

  SdpaExport ex;
  ex.var_count = N;
  ex.cliques = prob.cliques;
  if (m == 0) {
    ex.y_particular = Eigen::VectorXd::Zero(N);
    ex.nullbasis = Eigen::MatrixXd::Identity(N, N);
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    int rank = 0;
    while (rank < svd.singularValues().size() &&
           svd.singularValues()[rank] > 1e-12 * std::max(1.0, smax))
      ++rank;
    ex.y_particular =
        svd.matrixV().leftCols(rank) *
        (svd.singularValues().head(rank).cwiseInverse().asDiagonal() *
         (svd.matrixU().leftCols(rank).transpose() * b));
    if ((A * ex.y_particular - b).cwiseAbs().maxCoeff() >
        1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff()))
      throw IncompatibilityError("eliminate_equalities: equality constraints are inconsistent");
    ex.nullbasis = svd.matrixV().rightCols(N - rank);
  }
  ex.free_count = static_cast<int>(ex.nullbasis.cols());

  Eigen::VectorXd c = Eigen::VectorXd::Zero(N);
  for (const auto& [v, w] : prob.objective.terms) c[v] += w;
  ex.objective = ex.nullbasis.transpose() * c;
  ex.objective_constant = c.dot(ex.y_particular);
  for (const PsdBlock& blk : prob.psd_blocks) ex.block_sizes.push_back(blk.size);
  return ex;
}

// Write prob in SDPA sparse format:  min c·t  s.t.  Σ_s t_s F_s − F_0 ⪰ 0
// blockwise, where F_0 = −M_j(y_particular) and F_s = M_j(n_s) for the
// null-basis columns n_s. A sidecar JSON at path + ".json" stores the affine
// re-embedding y = y_particular + nullbasis·t and the moment labels.
inline SdpaExport export_sdpa(const MomentProblem& prob, const std::string& path) {
  if (prob.psd_blocks.empty())
    throw ValidationError("export_sdpa: the format requires at least one PSD block");
  SdpaExport ex = eliminate_equalities(prob);

  std::ofstream out(path);
  if (!out) throw ValidationError("export_sdpa: cannot open '" + path + "' for writing");
  out << "*koopman-sparse moment problem export\n";
  out << ex.free_count << " = mDIM\n";
  out << prob.psd_blocks.size() << " = nBLOCK\n";
  for (std::size_t j = 0; j < prob.psd_blocks.size(); ++j)
    out << (j ? " " : "") << prob.psd_blocks[j].size;
  out << "\n";
  for (int s = 0; s < ex.free_count; ++s)
    out << (s ? " " : "") << detail::fmt17(ex.objective[s]);
  out << "\n";

  // Entry quadruples: matno 0 is F_0, matno s ≥ 1 is F_s.
  const Eigen::VectorXd& yp = ex.y_particular;
  auto emit = [&](int matno, int blkno, const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); ++i)
      for (int j = i; j < M.cols(); ++j)
        if (std::abs(M(i, j)) > 1e-13)
          out << matno << " " << blkno << " " << (i + 1) << " " << (j + 1) << " "
              << detail::fmt17(M(i, j)) << "\n";
  };
  for (std::size_t jb = 0; jb < prob.psd_blocks.size(); ++jb) {
    const PsdBlock& blk = prob.psd_blocks[jb];
    emit(0, static_cast<int>(jb) + 1, -blk.assemble(yp));
    for (int s = 0; s < ex.free_count; ++s)
      emit(s + 1, static_cast<int>(jb) + 1, blk.assemble(ex.nullbasis.col(s)));
  }
  out.close();

  nlohmann::json side;
  side["format"] = "koopman-sparse-sdpa-sidecar";
  side["version"] = 1;
  side["sdpa_path"] = path;
  side["var_count"] = ex.var_count;
  side["free_count"] = ex.free_count;
  side["objective_constant"] = ex.objective_constant;
  side["objective"] = std::vector<double>(ex.objective.data(),
                                          ex.objective.data() + ex.objective.size());
  side["y_particular"] = std::vector<double>(yp.data(), yp.data() + yp.size());
  {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < ex.nullbasis.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int s = 0; s < ex.nullbasis.cols(); ++s) row.push_back(ex.nullbasis(i, s));
      rows.push_back(std::move(row));
    }
    side["null_basis"] = std::move(rows);
  }
  {
    nlohmann::json cls = nlohmann::json::array();
    for (const CliqueDecl& cl : prob.cliques) {
      nlohmann::json jc;
      jc["vars"] = cl.vars.indices();
      jc["degree"] = cl.degree;
      jc["offset"] = cl.offset;
      jc["count"] = cl.size();
      cls.push_back(std::move(jc));
    }
    side["cliques"] = std::move(cls);
  }
  {
    nlohmann::json labels = nlohmann::json::array();
    for (std::size_t k = 0; k < prob.cliques.size(); ++k)
      for (const std::vector<int>& alpha : prob.cliques[k].basis)
        labels.push_back("y[" + std::to_string(k + 1) + "]" + detail::exps_string(alpha));
    side["variable_labels"] = std::move(labels);
  }
  {
    nlohmann::json blocks = nlohmann::json::array();
    for (const PsdBlock& blk : prob.psd_blocks) {
      nlohmann::json jb;
      jb["size"] = blk.size;
      jb["clique"] = blk.clique_index + 1;
      jb["label"] = blk.label;
      blocks.push_back(std::move(jb));
    }
    side["blocks"] = std::move(blocks);
  }
  std::ofstream sout(path + ".json");
  if (!sout) throw ValidationError("export_sdpa: cannot open sidecar for writing");
  sout << side.dump(2) << "\n";
  return ex;
}

// A parsed .dat-s file: block-diagonal symmetric coefficient matrices
// F_0..F_mdim and the objective vector.
struct SdpaProblem {
  int mdim = 0;
  std::vector<int> block_sizes;
  Eigen::VectorXd c;
  std::vector<std::vector<Eigen::MatrixXd>> F;  // F[matno][block]

  // Σ_s t_s F_s − F_0 for one block.
  Eigen::MatrixXd slack_block(const Eigen::VectorXd& t, int block) const {
    Eigen::MatrixXd X = -F[0][static_cast<std::size_t>(block)];
    for (int s = 0; s < mdim; ++s)
      X += t[s] * F[static_cast<std::size_t>(s + 1)][static_cast<std::size_t>(block)];
    return X;
  }
};

inline SdpaProblem parse_sdpa(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("parse_sdpa: cannot open '" + path + "'");
  // Strip comments and the punctuation SDPA allows in header lines.
  std::vector<std::string> lines;
  std::string raw;
  while (std::getline(in, raw)) {
    if (!raw.empty() && (raw[0] == '*' || raw[0] == '"')) continue;
    for (char& ch : raw)
      if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}') ch = ' ';
    // Header lines may carry trailing annotations like "= mDIM".
    const std::size_t eq = raw.find('=');
    if (eq != std::string::npos) raw = raw.substr(0, eq);
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.push_back(raw);
  }
  if (lines.size() < 4) throw ValidationError("parse_sdpa: truncated file");

  SdpaProblem p;
  std::istringstream(lines[0]) >> p.mdim;
  int nblock = 0;
  std::istringstream(lines[1]) >> nblock;
  if (p.mdim < 0 || nblock <= 0) throw ValidationError("parse_sdpa: bad header");
  {
    std::istringstream ss(lines[2]);
    int s;
    while (ss >> s) {
      if (s <= 0) throw ValidationError("parse_sdpa: only dense positive blocks supported");
      p.block_sizes.push_back(s);
    }
    if (static_cast<int>(p.block_sizes.size()) != nblock)
      throw ValidationError("parse_sdpa: block size count mismatch");
  }
  {
    std::istringstream ss(lines[3]);
    std::vector<double> cv;
    double v;
    while (ss >> v) cv.push_back(v);
    if (static_cast<int>(cv.size()) != p.mdim)
      throw ValidationError("parse_sdpa: objective length mismatch");
    p.c = Eigen::Map<Eigen::VectorXd>(cv.data(), static_cast<Eigen::Index>(cv.size()));
  }
  p.F.assign(static_cast<std::size_t>(p.mdim) + 1, {});
  for (auto& mats : p.F) {
    mats.reserve(p.block_sizes.size());
    for (int s : p.block_sizes) mats.push_back(Eigen::MatrixXd::Zero(s, s));
  }
  for (std::size_t li = 4; li < lines.size(); ++li) {
    std::istringstream ss(lines[li]);
    int matno, blkno, i, j;
    double v;
    while (ss >> matno >> blkno >> i >> j >> v) {
      if (matno < 0 || matno > p.mdim || blkno < 1 ||
          blkno > static_cast<int>(p.block_sizes.size()))
        throw ValidationError("parse_sdpa: entry indices out of range");
      const int s = p.block_sizes[static_cast<std::size_t>(blkno - 1)];
      if (i < 1 || j < i || j > s)
        throw ValidationError("parse_sdpa: entry position out of range");
      Eigen::MatrixXd& M =
          p.F[static_cast<std::size_t>(matno)][static_cast<std::size_t>(blkno - 1)];
      M(i - 1, j - 1) = v;
      M(j - 1, i - 1) = v;
    }
  }
  return p;
}

// Load the sidecar written by export_sdpa, sufficient to re-embed a free
// vector t into per-clique moment vectors.
inline SdpaExport load_sdpa_sidecar(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw ValidationError("load_sdpa_sidecar: cannot open '" + sidecar_path + "'");
  nlohmann::json side;
  in >> side;
  if (side.value("format", "") != "koopman-sparse-sdpa-sidecar")
    throw ValidationError("load_sdpa_sidecar: unrecognized sidecar format");
  SdpaExport ex;
  ex.var_count = side.at("var_count").get<int>();
  ex.free_count = side.at("free_count").get<int>();
  ex.objective_constant = side.at("objective_constant").get<double>();
  {
    const auto v = side.at("y_particular").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != ex.var_count)
      throw ValidationError("load_sdpa_sidecar: y_particular length mismatch");
    ex.y_particular = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                        static_cast<Eigen::Index>(v.size()));
  }
  {
    const auto& rows = side.at("null_basis");
    ex.nullbasis.resize(ex.var_count, ex.free_count);
    if (static_cast<int>(rows.size()) != ex.var_count)
      throw ValidationError("load_sdpa_sidecar: null_basis row count mismatch");
    for (int i = 0; i < ex.var_count; ++i) {
      const auto row = rows[static_cast<std::size_t>(i)].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != ex.free_count)
        throw ValidationError("load_sdpa_sidecar: null_basis column count mismatch");
      for (int s = 0; s < ex.free_count; ++s) ex.nullbasis(i, s) = row[static_cast<std::size_t>(s)];
    }
  }
  {
    const auto v = side.at("objective").get<std::vector<double>>();
    ex.objective = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                     static_cast<Eigen::Index>(v.size()));
  }
  for (const auto& jc : side.at("cliques")) {
    CliqueDecl cl;
    cl.vars = IndexSet(jc.at("vars").get<std::vector<int>>());
    cl.degree = jc.at("degree").get<int>();
    cl.offset = jc.at("offset").get<int>();
    cl.basis = monomial_basis(cl.vars.size(), cl.degree);
    if (cl.size() != jc.at("count").get<int>())
      throw ValidationError("load_sdpa_sidecar: clique size mismatch");
    ex.cliques.push_back(std::move(cl));
  }
  ex.block_sizes.clear();
  for (const auto& jb : side.at("blocks")) ex.block_sizes.push_back(jb.at("size").get<int>());
  return ex;
}

}  // namespace koopman
