#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopman/dictionary.hpp"
#include "koopman/dynamics.hpp"
#include "koopman/errors.hpp"
#include "koopman/index_set.hpp"
#include "koopman/polynomial.hpp"
#include "koopman/rng.hpp"

namespace koopman {

// A finitely supported measure Σ aᵢ δ_{xᵢ}. Canonical form: atoms sorted
// lexicographically by position, duplicates within the merge tolerance
// combined (weights Kahan-summed). Atom positions typically come from
// identical arithmetic, so exact duplicates are the expected case; the
// tolerance only guards rounding.
class AtomicMeasure {
 public:
  static constexpr double kMergeTol = 1e-12;

  AtomicMeasure(int dim, std::vector<double> weights, std::vector<Eigen::VectorXd> positions)
      : dim_(dim) {
    if (dim < 0) throw ValidationError("AtomicMeasure: negative dimension");
    if (weights.size() != positions.size())
      throw ValidationError("AtomicMeasure: weight/position count mismatch");
    if (weights.empty()) throw ValidationError("AtomicMeasure: empty measure");
    for (double w : weights)
      if (!(w >= 0.0)) throw ValidationError("AtomicMeasure: weights must be nonnegative");
    for (const Eigen::VectorXd& p : positions) {
      if (p.size() != dim) throw ValidationError("AtomicMeasure: position dimension mismatch");
      if (!p.allFinite()) throw ValidationError("AtomicMeasure: non-finite position");
    }
    // Canonicalize: stable lex sort, then merge runs of near-identical atoms.
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const Eigen::VectorXd& pa = positions[a];
      const Eigen::VectorXd& pb = positions[b];
      for (int i = 0; i < dim_; ++i) {
        if (pa[i] < pb[i]) return true;
        if (pa[i] > pb[i]) return false;
      }
      return false;
    });
    std::size_t k = 0;
    while (k < order.size()) {
      const Eigen::VectorXd& anchor = positions[order[k]];
      KahanAcc w;
      w.add(weights[order[k]]);
      std::size_t j = k + 1;
      while (j < order.size() && within_tol(anchor, positions[order[j]])) {
        w.add(weights[order[j]]);
        ++j;
      }
      weights_.push_back(w.sum);
      positions_.push_back(anchor);
      k = j;
    }
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(weights_.size()); }
  double weight(int i) const { return weights_[static_cast<std::size_t>(i)]; }
  const Eigen::VectorXd& position(int i) const { return positions_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& positions() const { return positions_; }

  double total_mass() const {
    KahanAcc acc;
    for (double w : weights_) acc.add(w);
    return acc.sum;
  }

  bool is_probability() const { return std::abs(total_mass() - 1.0) <= 1e-12; }

  // Positions as a dim×m matrix (atoms as columns).
  Eigen::MatrixXd positions_matrix() const {
    Eigen::MatrixXd P(dim_, size());
    for (int i = 0; i < size(); ++i) P.col(i) = positions_[static_cast<std::size_t>(i)];
    return P;
  }

  friend bool exactly_equal(const AtomicMeasure& a, const AtomicMeasure& b) {
    if (a.dim_ != b.dim_ || a.size() != b.size()) return false;
    for (int i = 0; i < a.size(); ++i) {
      if (a.weight(i) != b.weight(i)) return false;
      for (int c = 0; c < a.dim_; ++c)
        if (a.position(i)[c] != b.position(i)[c]) return false;
    }
    return true;
  }

 private:
  bool within_tol(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    for (int i = 0; i < dim_; ++i)
      if (std::abs(a[i] - b[i]) > kMergeTol) return false;
    return true;
  }

  int dim_;
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> positions_;
};

// (Π_I)_# μ: project every atom, merging collisions. Mass is preserved.
// I = ∅ gives the unique point mass on ℝ⁰ carrying the total mass.
inline AtomicMeasure pushforward(const AtomicMeasure& mu, const IndexSet& I) {
  I.range_check(mu.dim(), "pushforward");
  std::vector<Eigen::VectorXd> pos;
  pos.reserve(static_cast<std::size_t>(mu.size()));
  for (int i = 0; i < mu.size(); ++i) pos.push_back(project_coords(mu.position(i), I));
  return AtomicMeasure(I.size(), mu.weights(), std::move(pos));
}

// The Perron–Frobenius step for a map: atoms move to f(xᵢ), weights carried.
inline AtomicMeasure map_pushforward(const AtomicMeasure& mu, const SparseSystem& sys) {
  if (!sys.is_discrete()) throw ValidationError("map_pushforward: discrete systems only");
  if (mu.dim() != sys.n()) throw ValidationError("map_pushforward: dimension mismatch");
  std::vector<Eigen::VectorXd> pos;
  pos.reserve(static_cast<std::size_t>(mu.size()));
  for (int i = 0; i < mu.size(); ++i) {
    Eigen::VectorXd y = sys.eval(mu.position(i));
    if (!y.allFinite())
      throw DivergenceError("map_pushforward: non-finite image of atom " + std::to_string(i),
                            static_cast<std::size_t>(i));
    pos.push_back(std::move(y));
  }
  return AtomicMeasure(mu.dim(), mu.weights(), std::move(pos));
}

struct CompatibilityReport {
  bool compatible = false;
  double max_position_discrepancy = 0.0;
  double max_weight_discrepancy = 0.0;
  // max over both of the above (infinite when atom counts differ)
  double max_discrepancy = 0.0;
  std::string detail;
};

namespace detail {

inline double atom_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// Local positions (within I) of the overlap coordinates O ⊆ I.
inline IndexSet local_positions(const IndexSet& I, const IndexSet& O) {
  std::vector<int> loc;
  loc.reserve(static_cast<std::size_t>(O.size()));
  for (int o : O) loc.push_back(I.position_of(o) + 1);
  return IndexSet(std::move(loc));
}

}  // namespace detail

// Do μ_k and μ_l agree on the overlap I_k ∩ I_l? Both overlap pushforwards
// are computed, sorted, and matched positionally; the match must pair every atom
// within tol in position and weight. Neighbor atoms within tol of a matched
// target raise AmbiguityError. An empty overlap is vacuously compatible when
// the total masses agree.
inline CompatibilityReport compatibility_check(const AtomicMeasure& mu_k,
                                               const AtomicMeasure& mu_l, const IndexSet& Ik,
                                               const IndexSet& Il, double tol) {
  if (mu_k.dim() != Ik.size() || mu_l.dim() != Il.size())
    throw ValidationError("compatibility_check: measure/index-set dimension mismatch");
  CompatibilityReport rep;
  const IndexSet O = set_intersection(Ik, Il);
  if (O.empty()) {
    const double md = std::abs(mu_k.total_mass() - mu_l.total_mass());
    rep.max_weight_discrepancy = rep.max_discrepancy = md;
    rep.compatible = md <= tol;
    rep.detail = "empty overlap: compared total masses";
    return rep;
  }
  const AtomicMeasure A = pushforward(mu_k, detail::local_positions(Ik, O));
  const AtomicMeasure B = pushforward(mu_l, detail::local_positions(Il, O));
  if (A.size() != B.size()) {
    rep.compatible = false;
    rep.max_discrepancy = std::numeric_limits<double>::infinity();
    rep.detail = "overlap atom counts differ: " + std::to_string(A.size()) + " vs " +
                 std::to_string(B.size());
    return rep;
  }
  for (int i = 0; i < A.size(); ++i) {
    const double d = detail::atom_distance(A.position(i), B.position(i));
    const double dw = std::abs(A.weight(i) - B.weight(i));
    // Both lists are sorted: a second candidate within tol must sit adjacent.
    if (d <= tol) {
      for (int j : {i - 1, i + 1}) {
        if (j < 0 || j >= A.size()) continue;
        if (detail::atom_distance(A.position(j), B.position(i)) <= tol ||
            detail::atom_distance(A.position(i), B.position(j)) <= tol)
          throw AmbiguityError("compatibility_check: two atoms within tolerance of one target "
                               "(around overlap atom " +
                               std::to_string(i) + ")");
      }
    }
    rep.max_position_discrepancy = std::max(rep.max_position_discrepancy, d);
    rep.max_weight_discrepancy = std::max(rep.max_weight_discrepancy, dw);
  }
  rep.max_discrepancy = std::max(rep.max_position_discrepancy, rep.max_weight_discrepancy);
  rep.compatible = rep.max_discrepancy <= tol;
  if (!rep.compatible) rep.detail = "overlap marginals differ";
  return rep;
}

// Glue atomic marginals into one measure μ with (Π_{I_k})_# μ = μ_k.
//
// Requires the gluing hypotheses: the parts cover {1..n}, every part has the
// same atom count, and on each pairwise overlap the projected atoms are
// pairwise distinct (otherwise HypothesisError). Atoms are matched across
// parts by sorting on overlap coordinates; weights are taken from part 1 and
// must agree across parts to the merge tolerance.
inline AtomicMeasure glue_atomic(const std::vector<std::pair<AtomicMeasure, IndexSet>>& parts,
                                 int n) {
  if (parts.empty()) throw ValidationError("glue_atomic: no parts");
  IndexSet cover;
  for (const auto& [mu, I] : parts) {
    I.range_check(n, "glue_atomic");
    if (mu.dim() != I.size())
      throw ValidationError("glue_atomic: part measure dimension does not match its index set");
    cover = set_union(cover, I);
  }
  if (cover != IndexSet::full(n))
    throw ValidationError("glue_atomic: parts do not cover all coordinates");
  const int m = parts.front().first.size();
  for (std::size_t k = 1; k < parts.size(); ++k) {
    if (parts[k].first.size() != m)
      throw IncompatibilityError("glue_atomic: parts 1 and " + std::to_string(k + 1) +
                                 " have different atom counts (" + std::to_string(m) + " vs " +
                                 std::to_string(parts[k].first.size()) + ")");
  }

  // Running glue: atoms as n-vectors with the coordinates of U filled in.
  IndexSet U = parts.front().second;
  std::vector<Eigen::VectorXd> atoms(static_cast<std::size_t>(m),
                                     Eigen::VectorXd::Zero(n));
  std::vector<double> weights(parts.front().first.weights());
  for (int i = 0; i < m; ++i)
    atoms[static_cast<std::size_t>(i)] =
        scatter_coords(parts.front().first.position(i), U, n);

  for (std::size_t k = 1; k < parts.size(); ++k) {
    const AtomicMeasure& mu = parts[k].first;
    const IndexSet& Ik = parts[k].second;
    const IndexSet O = set_intersection(U, Ik);

    if (O.empty()) {
      if (m != 1)
        throw HypothesisError(
            "glue_atomic: empty overlap between parts 1.." + std::to_string(k) + " and " +
            std::to_string(k + 1) +
            " — overlap projections of multiple atoms cannot be pairwise distinct");
    }

    // Overlap keys on the running glue and on part k, with distinctness checks.
    auto keys_of = [&](auto&& getter, int count) {
      std::vector<Eigen::VectorXd> keys;
      keys.reserve(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) keys.push_back(getter(i));
      return keys;
    };
    std::vector<Eigen::VectorXd> key_glue = keys_of(
        [&](int i) { return project_coords(atoms[static_cast<std::size_t>(i)], O); }, m);
    IndexSet O_local = detail::local_positions(Ik, O);
    std::vector<Eigen::VectorXd> key_part =
        keys_of([&](int i) { return project_coords(mu.position(i), O_local); }, m);

    auto sorted_order = [&](const std::vector<Eigen::VectorXd>& keys) {
      std::vector<int> order(keys.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const Eigen::VectorXd& pa = keys[static_cast<std::size_t>(a)];
        const Eigen::VectorXd& pb = keys[static_cast<std::size_t>(b)];
        for (Eigen::Index i = 0; i < pa.size(); ++i) {
          if (pa[i] < pb[i]) return true;
          if (pa[i] > pb[i]) return false;
        }
        return false;
      });
      return order;
    };
    const std::vector<int> og = sorted_order(key_glue);
    const std::vector<int> op = sorted_order(key_part);
    for (int i = 0; i + 1 < m; ++i) {
      if (detail::atom_distance(key_glue[static_cast<std::size_t>(og[static_cast<std::size_t>(i)])],
                                key_glue[static_cast<std::size_t>(og[static_cast<std::size_t>(i + 1)])]) <=
          AtomicMeasure::kMergeTol)
        throw HypothesisError("glue_atomic: overlap projections of parts 1.." + std::to_string(k) +
                              " are not pairwise distinct on " + O.to_string());
      if (detail::atom_distance(key_part[static_cast<std::size_t>(op[static_cast<std::size_t>(i)])],
                                key_part[static_cast<std::size_t>(op[static_cast<std::size_t>(i + 1)])]) <=
          AtomicMeasure::kMergeTol)
        throw HypothesisError("glue_atomic: overlap projections of part " + std::to_string(k + 1) +
                              " are not pairwise distinct on " + O.to_string());
    }

    std::vector<Eigen::VectorXd> next_atoms(static_cast<std::size_t>(m));
    std::vector<double> next_weights(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
      const int ia = og[static_cast<std::size_t>(r)];  // running-glue atom
      const int ib = op[static_cast<std::size_t>(r)];  // part-k atom
      if (detail::atom_distance(key_glue[static_cast<std::size_t>(ia)],
                                key_part[static_cast<std::size_t>(ib)]) >
          AtomicMeasure::kMergeTol)
        throw IncompatibilityError("glue_atomic: parts 1.." + std::to_string(k) + " and " +
                                   std::to_string(k + 1) +
                                   " cannot be matched on overlap " + O.to_string());
      if (std::abs(weights[static_cast<std::size_t>(ia)] - mu.weight(ib)) >
          AtomicMeasure::kMergeTol)
        throw IncompatibilityError("glue_atomic: parts 1 and " + std::to_string(k + 1) +
                                   " disagree on atom weights");
      Eigen::VectorXd merged = atoms[static_cast<std::size_t>(ia)];
      for (int c = 0; c < Ik.size(); ++c) {
        const int g = Ik[c];
        if (!U.contains(g)) merged[g - 1] = mu.position(ib)[c];
      }
      next_atoms[static_cast<std::size_t>(r)] = std::move(merged);
      next_weights[static_cast<std::size_t>(r)] = weights[static_cast<std::size_t>(ia)];
    }
    atoms = std::move(next_atoms);
    weights = std::move(next_weights);
    U = set_union(U, Ik);
  }
  return AtomicMeasure(n, std::move(weights), std::move(atoms));
}

// (1/T) Σ_{s=0}^{T-1} P_s μ₀ for a map: atoms f^s(xᵢ) with weights aᵢ/T.
inline AtomicMeasure cesaro_average(const SparseSystem& sys, const AtomicMeasure& mu0, int T) {
  if (!sys.is_discrete()) throw ValidationError("cesaro_average: discrete systems only");
  if (mu0.dim() != sys.n()) throw ValidationError("cesaro_average: dimension mismatch");
  if (T < 1) throw ValidationError("cesaro_average: T must be ≥ 1");
  std::vector<double> w;
  std::vector<Eigen::VectorXd> pos;
  w.reserve(static_cast<std::size_t>(mu0.size()) * static_cast<std::size_t>(T));
  pos.reserve(w.capacity());
  for (int i = 0; i < mu0.size(); ++i) {
    Eigen::VectorXd x = mu0.position(i);
    const double wi = mu0.weight(i) / static_cast<double>(T);
    for (int s = 0; s < T; ++s) {
      if (!x.allFinite())
        throw DivergenceError("cesaro_average: non-finite state at step " + std::to_string(s),
                              static_cast<std::size_t>(s));
      w.push_back(wi);
      pos.push_back(x);
      if (s + 1 < T) x = sys.eval(x);
    }
  }
  return AtomicMeasure(sys.n(), std::move(w), std::move(pos));
}

// Per-observable invariance data: ⟨g∘f − g, μ⟩ together with the sup of |g|
// over the atoms and over their images (the two point sets where g is read).
struct InvarianceReport {
  struct Row {
    double raw = 0.0;        // |⟨g∘f, μ⟩ − ⟨g, μ⟩|
    double atom_sup = 0.0;   // max over atoms of |g|
    double image_sup = 0.0;  // max over atom images of |g|
  };
  std::vector<Row> rows;
  double max_normalized = 0.0;  // max_g raw / max(1, atom_sup)
};

inline InvarianceReport invariance_report(const AtomicMeasure& mu, const SparseSystem& sys,
                                          const Dictionary& testdict) {
  if (!sys.is_discrete()) throw ValidationError("invariance_report: discrete systems only");
  if (mu.dim() != sys.n() || testdict.dim() != sys.n())
    throw ValidationError("invariance_report: dimension mismatch");
  const Eigen::MatrixXd X = mu.positions_matrix();
  Eigen::MatrixXd FX(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) FX.col(i) = sys.eval(X.col(i));
  const Eigen::MatrixXd G = testdict.evaluate(X);
  const Eigen::MatrixXd GF = testdict.evaluate(FX);
  InvarianceReport rep;
  rep.rows.resize(static_cast<std::size_t>(G.rows()));
  for (Eigen::Index r = 0; r < G.rows(); ++r) {
    KahanAcc diff;
    double asup = 0.0, isup = 0.0;
    for (int i = 0; i < mu.size(); ++i) {
      diff.add(mu.weight(i) * (GF(r, i) - G(r, i)));
      asup = std::max(asup, std::abs(G(r, i)));
      isup = std::max(isup, std::abs(GF(r, i)));
    }
    auto& row = rep.rows[static_cast<std::size_t>(r)];
    row.raw = std::abs(diff.sum);
    row.atom_sup = asup;
    row.image_sup = isup;
    rep.max_normalized = std::max(rep.max_normalized, row.raw / std::max(1.0, asup));
  }
  return rep;
}

// max over dictionary entries g of |⟨g∘f, μ⟩ − ⟨g, μ⟩| / max(1, sup_atoms|g|).
inline double invariance_residual(const AtomicMeasure& mu, const SparseSystem& sys,
                                  const Dictionary& testdict) {
  return invariance_report(mu, sys, testdict).max_normalized;
}

// ---- coupled tent-map attractor experiment --------------------------------

struct AttractorParams {
  int z_count = 550;
  int burn_in = 200;
  int keep = 300;
  double x0 = 0.48934;
  double y0 = 0.8979573;
  double z_lo = std::numbers::sqrt2;
  double z_hi = 2.0;
  // Sampling density for z, ∝ max(ρ(z), 0) on [z_lo, z_hi]; nullopt selects
  // the default bump 1 − ((z−c)/r)² (c, r = interval midpoint/half-width).
  std::optional<Polynomial> density;
  std::uint64_t seed = 1;
};

struct AttractorResult {
  AtomicMeasure cloud_zx;  // subsystem {1,2} cloud, coordinates (z, x)
  AtomicMeasure cloud_zy;  // subsystem {1,3} cloud, coordinates (z, y)
  AtomicMeasure glued;     // glued 3-D cloud, coordinates (z, x, y)
  std::vector<double> z_samples;
};

// Draw one z from the rejection sampler for density ρ on [lo, hi].
inline double sample_density(RngStream& rng, const Polynomial& rho, double lo, double hi) {
  // Envelope: grid maximum with a safety factor.
  double m = 0.0;
  const int grid = 10000;
  for (int i = 0; i <= grid; ++i) {
    Eigen::VectorXd z(1);
    z[0] = lo + (hi - lo) * static_cast<double>(i) / grid;
    m = std::max(m, rho.eval(z));
  }
  if (!(m > 0.0)) throw ValidationError("sample_density: density is nonpositive on the interval");
  m *= 1.0001;
  for (int tries = 0; tries < 100000; ++tries) {
    const double z = rng.uniform(lo, hi);
    const double u = rng.uniform(0.0, m);
    Eigen::VectorXd zz(1);
    zz[0] = z;
    if (u <= std::max(rho.eval(zz), 0.0)) return z;
  }
  throw NumericalError("sample_density: rejection sampling failed to accept");
}

// Evolve the coupled tent map per subsystem over sampled z values, producing
// the two subsystem clouds and their glue.
//
// Gluing granularity: the full clouds cannot be glued directly — all kept
// steps of one z-slice share that z, so the distinctness hypothesis of
// glue_atomic fails (by design it then throws). The hypotheses do hold for
// each (z-sample, kept-step) pair separately, so the experiment glues those
// single-atom marginals and unions the results. The outcome coincides,
// bitwise, with simultaneously simulating the full 3-D system.
inline AttractorResult attractor_cloud(const AttractorParams& params = {}) {
  if (params.z_count < 1 || params.keep < 1 || params.burn_in < 0)
    throw ValidationError("attractor_cloud: invalid counts");
  const SparseSystem sys = SparseSystem::coupled_tent();
  const IndexSet Izx{1, 2}, Izy{1, 3};
  const SparseSystem sub_zx = sys.project(Izx);
  const SparseSystem sub_zy = sys.project(Izy);

  Polynomial rho = params.density.value_or([&] {
    // 1 − ((z−c)/r)²  =  1 − (z−c)²/r²
    const double c = 0.5 * (params.z_lo + params.z_hi);
    const double r = 0.5 * (params.z_hi - params.z_lo);
    Polynomial z = Polynomial::coordinate(1, 1);
    Polynomial shift = z - Polynomial::constant(1, c);
    return Polynomial::constant(1, 1.0) - (1.0 / (r * r)) * (shift * shift);
  }());
  if (rho.n() != 1) throw ValidationError("attractor_cloud: density must be univariate");

  RngStream rng(params.seed);
  std::vector<double> zs;
  zs.reserve(static_cast<std::size_t>(params.z_count));
  for (int i = 0; i < params.z_count; ++i)
    zs.push_back(sample_density(rng, rho, params.z_lo, params.z_hi));

  const double w =
      (1.0 / static_cast<double>(params.z_count)) / static_cast<double>(params.keep);
  const std::size_t total =
      static_cast<std::size_t>(params.z_count) * static_cast<std::size_t>(params.keep);
  std::vector<double> wx(total, w), wy(total, w), wg(total, w);
  std::vector<Eigen::VectorXd> px, py, pg;
  px.reserve(total);
  py.reserve(total);
  pg.reserve(total);

  for (double z : zs) {
    Eigen::VectorXd sx(2), sy(2);
    sx << z, params.x0;
    sy << z, params.y0;
    for (int s = 0; s < params.burn_in; ++s) {
      sx = sub_zx.eval(sx);
      sy = sub_zy.eval(sy);
    }
    for (int s = 0; s < params.keep; ++s) {
      px.push_back(sx);
      py.push_back(sy);
      // Single-atom gluing along the shared z coordinate.
      AtomicMeasure ax(2, {w}, {sx});
      AtomicMeasure ay(2, {w}, {sy});
      AtomicMeasure g = glue_atomic({{ax, Izx}, {ay, Izy}}, 3);
      pg.push_back(g.position(0));
      sx = sub_zx.eval(sx);
      sy = sub_zy.eval(sy);
    }
  }

  AttractorResult res{AtomicMeasure(2, wx, std::move(px)), AtomicMeasure(2, wy, std::move(py)),
                      AtomicMeasure(3, wg, std::move(pg)), std::move(zs)};
  // By construction the glue's marginals are the part clouds — assert it.
  if (!exactly_equal(pushforward(res.glued, IndexSet{1, 2}), res.cloud_zx) ||
      !exactly_equal(pushforward(res.glued, IndexSet{1, 3}), res.cloud_zy))
    throw NumericalError("attractor_cloud: internal marginal consistency check failed");
  return res;
}

}  // namespace koopman
