#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsvd/core.hpp"
#include "fsvd/sdp.hpp"
#include "fsvd/trigpoly.hpp"
#include "fsvd/vandermonde.hpp"

namespace fsvd {

enum class MomentObjective { None, MaxTraceFirstBand, MinTraceFirstBand };

/// Outcome of the truncated K-moment problem.
struct MomentResult {
  enum class Status { Feasible, Infeasible };
  Status status = Status::Infeasible;
  std::optional<AtomicMeasure> measure;
  std::optional<std::vector<MomentSequence>> per_band_moments;
  /// Infeasibility witness: coefficients (in real-embedding order) of a
  /// polynomial nonnegative on K that pairs negatively with the data.
  std::optional<RVector> certificate;
  std::optional<bool> unique;
};

namespace detail {

/// Variable layout of one complex moment sequence: [t_0, Re t_1, Im t_1, ...].
inline int seq_var_count(int n) { return 2 * n - 1; }

inline MomentSequence sequence_from_vars(const RVector& x, int base, int n) {
  CVector t(n);
  t(0) = Complex(x(base), 0.0);
  for (int j = 1; j < n; ++j)
    t(j) = Complex(x(base + 2 * j - 1), x(base + 2 * j));
  return MomentSequence(n, std::move(t));
}

/// Adds the 2n x 2n real embedding of T(t) >= 0 over the sequence variables
/// rooted at var base; returns the block id.
inline int add_toeplitz_block(ConicProgram& prog, int base, int n) {
  const int blk = prog.add_block(2 * n);
  for (int j = 0; j < n; ++j)
    for (int r = 0; r + j < n; ++r) {
      if (j == 0) {
        prog.add_herm_entry(blk, base, r, r, 1.0);
      } else {
        prog.add_herm_entry(blk, base + 2 * j - 1, r, r + j, 1.0);
        prog.add_herm_entry(blk, base + 2 * j, r, r + j, Complex(0, 1));
      }
    }
  return blk;
}

/// Contribution of a coefficient c * t_j (two-sided j) to the Hermitian upper
/// entry (r, c_col) of a stencil block, emitted onto the sequence variables.
inline void emit_seq_coeff(ConicProgram& prog, int blk, int base, int r, int c_col,
                           int j, Complex coeff) {
  if (coeff == Complex(0, 0)) return;
  if (j == 0) {
    prog.add_herm_entry(blk, base, r, c_col, coeff);
  } else if (j > 0) {
    prog.add_herm_entry(blk, base + 2 * j - 1, r, c_col, coeff);
    prog.add_herm_entry(blk, base + 2 * j, r, c_col, coeff * Complex(0, 1));
  } else {
    prog.add_herm_entry(blk, base - 2 * j - 1, r, c_col, coeff);
    prog.add_herm_entry(blk, base - 2 * j, r, c_col, coeff * Complex(0, -1));
  }
}

/// Adds the real embedding of T_g(t) >= 0 for the degree-one polynomial g.
inline int add_toeplitz_g_block(ConicProgram& prog, int base, int n,
                                const DegOnePoly& g) {
  const int dim = n - 1;
  const int blk = prog.add_block(2 * dim);
  for (int r = 0; r < dim; ++r)
    for (int c = r; c < dim; ++c) {
      const int d = c - r;
      if (d == 0) {
        // r1 t_1 + r0 t_0 + conj(r1) t_{-1} collapses to a real combination
        prog.add_herm_entry(blk, base, r, r, g.r0);
        prog.add_herm_entry(blk, base + 1, r, r, 2.0 * g.r1.real());
        prog.add_herm_entry(blk, base + 2, r, r, -2.0 * g.r1.imag());
      } else {
        emit_seq_coeff(prog, blk, base, r, c, d + 1, g.r1);
        emit_seq_coeff(prog, blk, base, r, c, d, g.r0);
        emit_seq_coeff(prog, blk, base, r, c, d - 1, std::conj(g.r1));
      }
    }
  return blk;
}

inline std::vector<DegOnePoly> band_polys(const BandSet& k) {
  std::vector<DegOnePoly> gs;
  gs.reserve(k.size());
  for (const auto& b : k.bands) gs.push_back(g_from_interval(b));
  return gs;
}

}  // namespace detail

/// True iff the measure reproduces the moments to tol (relative l2) and every
/// atom lies on K (torus tolerance 1e-6).
inline bool verify_measure(const AtomicMeasure& mu, const MomentSequence& t,
                           const BandSet& k, double tol) {
  const auto rec = moments_from_measure(mu, t.size());
  const double err = (rec.coeffs() - t.coeffs()).norm() /
                     std::max(t.coeffs().norm(), 1e-300);
  if (err > tol) return false;
  for (const auto& a : mu.atoms())
    if (!band_contains(k, a.f, 1e-6)) return false;
  return true;
}

/// Value of the certificate polynomial sum_j gamma_j e^{i 2 pi j f} encoded by
/// alpha in real-embedding order.
inline double certificate_polynomial(const RVector& alpha, double f) {
  const auto len = alpha.size();
  const int n = static_cast<int>((len + 1) / 2);
  double v = std::numbers::sqrt2 * alpha(n - 1);  // gamma_0
  for (int j = 1; j < n; ++j) {
    const Complex gj(alpha(n - 1 - j), alpha(n - 1 + j));
    v += 2.0 * (gj * std::polar(1.0, two_pi * j * f)).real();
  }
  return v;
}

/// Grid check used before presenting an infeasibility witness to callers.
inline bool certificate_is_valid(const MomentSequence& t, const BandSet& k,
                                 const RVector& alpha, int grid = 10000,
                                 double poly_floor = -1e-7,
                                 double pairing_ceiling = -1e-8) {
  if (real_embedding(t).vec.dot(alpha) >= pairing_ceiling) return false;
  for (const auto& band : k.bands)
    for (int i = 0; i <= grid; ++i)
      if (certificate_polynomial(alpha, band.point_at(double(i) / grid)) < poly_floor)
        return false;
  return true;
}

/// Searches the intersection of the per-band Gram cones for a polynomial
/// nonnegative on K that pairs negatively with t. Returns the coefficient
/// vector when the optimal pairing is below -1e-8, otherwise nullopt.
inline std::optional<RVector> dual_certificate(const MomentSequence& t,
                                               const BandSet& k,
                                               const SolveOptions& sopts = {}) {
  const int n = t.size();
  const int j_count = static_cast<int>(k.size());
  const int alpha_len = 2 * n - 1;
  // variables: alpha, then per band the Gram parameters of Q0 (n x n) and
  // Q1 ((n-1) x (n-1)), each stored [diag..., (Re,Im) upper pairs...]
  const int q0_params = n * n;
  const int q1_params = (n - 1) * (n - 1);
  const int m = alpha_len + j_count * (q0_params + q1_params);
  ConicProgram prog(m);

  const RVector tr_vec = real_embedding(t).vec;
  for (int i = 0; i < alpha_len; ++i) prog.set_objective(i, tr_vec(i));

  struct GramLayout {
    int base;
    int dim;
    int blk;
  };
  auto add_gram = [&](int base, int dim) {
    const int blk = prog.add_block(2 * dim);
    int idx = base;
    for (int r = 0; r < dim; ++r) prog.add_herm_entry(blk, idx++, r, r, 1.0);
    for (int r = 0; r < dim; ++r)
      for (int c = r + 1; c < dim; ++c) {
        prog.add_herm_entry(blk, idx++, r, c, 1.0);
        prog.add_herm_entry(blk, idx++, r, c, Complex(0, 1));
      }
    return GramLayout{base, dim, blk};
  };

  // upper-pair parameter index of Q[r][c], r < c
  auto pair_index = [](const GramLayout& g, int r, int c) {
    // offset after the diagonal block: pairs ordered row-major
    int off = 0;
    for (int rr = 0; rr < r; ++rr) off += g.dim - 1 - rr;
    off += c - r - 1;
    return g.base + g.dim + 2 * off;
  };

  // linear expression of tr(E_j Q) = sum_m Q[m+j, m] over Gram parameters
  auto trace_terms = [&](const GramLayout& g, int j) {
    std::vector<std::pair<int, Complex>> terms;
    if (std::abs(j) > g.dim - 1) return terms;
    if (j == 0) {
      for (int r = 0; r < g.dim; ++r) terms.push_back({g.base + r, 1.0});
    } else if (j > 0) {
      // below-diagonal entries: conj of the stored pair
      for (int mrow = 0; mrow + j < g.dim; ++mrow) {
        const int p = pair_index(g, mrow, mrow + j);
        terms.push_back({p, 1.0});
        terms.push_back({p + 1, Complex(0, -1)});
      }
    } else {
      for (int mrow = 0; mrow - j < g.dim; ++mrow) {
        const int p = pair_index(g, mrow, mrow - j);
        terms.push_back({p, 1.0});
        terms.push_back({p + 1, Complex(0, 1)});
      }
    }
    return terms;
  };

  const auto gs = detail::band_polys(k);
  int next = alpha_len;
  std::vector<std::pair<GramLayout, GramLayout>> grams;
  for (int l = 0; l < j_count; ++l) {
    auto g0 = add_gram(next, n);
    next += q0_params;
    auto g1 = add_gram(next, n - 1);
    next += q1_params;
    grams.push_back({g0, g1});
  }

  // cone equations per band: gamma_{-j} = tr(Theta_j Q0) + tr(Theta_gj Q1),
  // with gamma_0 = sqrt(2) alpha_0 and gamma_{-j} = alpha_{-j} - i alpha_j.
  for (int l = 0; l < j_count; ++l) {
    const auto& [g0, g1] = grams[l];
    const Complex r1 = gs[l].r1;
    const double r0 = gs[l].r0;
    for (int j = 0; j < n; ++j) {
      // rhs terms: tr(E_j Q0) + r1 tr(E_{j-1} Q1) + r0 tr(E_j Q1)
      //                      + conj(r1) tr(E_{j+1} Q1)
      std::vector<std::pair<int, Complex>> rhs;
      for (auto& [var, cf] : trace_terms(g0, j)) rhs.push_back({var, cf});
      for (auto& [var, cf] : trace_terms(g1, j - 1)) rhs.push_back({var, r1 * cf});
      for (auto& [var, cf] : trace_terms(g1, j)) rhs.push_back({var, r0 * cf});
      for (auto& [var, cf] : trace_terms(g1, j + 1))
        rhs.push_back({var, std::conj(r1) * cf});
      if (j == 0) {
        std::vector<std::pair<int, double>> eq;
        eq.push_back({n - 1, std::numbers::sqrt2});
        for (auto& [var, cf] : rhs) eq.push_back({var, -cf.real()});
        prog.add_equality(std::move(eq), 0.0);
      } else {
        std::vector<std::pair<int, double>> eq_re, eq_im;
        eq_re.push_back({n - 1 - j, 1.0});   // alpha_{-j}
        eq_im.push_back({n - 1 + j, -1.0});  // -alpha_j
        for (auto& [var, cf] : rhs) {
          if (cf.real() != 0.0) eq_re.push_back({var, -cf.real()});
          if (cf.imag() != 0.0) eq_im.push_back({var, -cf.imag()});
        }
        prog.add_equality(std::move(eq_re), 0.0);
        prog.add_equality(std::move(eq_im), 0.0);
      }
    }
  }

  // normalization: tr(Q0) + tr(Q1) of the first band bounded by one
  {
    const int blk = prog.add_block(1);
    prog.add_const_entry(blk, 0, 0, 1.0);
    const auto& [g0, g1] = grams[0];
    for (int r = 0; r < g0.dim; ++r) prog.add_entry(blk, g0.base + r, 0, 0, -1.0);
    for (int r = 0; r < g1.dim; ++r) prog.add_entry(blk, g1.base + r, 0, 0, -1.0);
  }

  auto rep = solve(prog, sopts);
  if (rep.status == SolveStatus::Optimal) {
    if (rep.objective_value < -1e-8) return RVector(rep.x.head(alpha_len));
    return std::nullopt;
  }
  if (rep.status == SolveStatus::Inaccurate) {
    if (rep.objective_value < -1e-6) return RVector(rep.x.head(alpha_len));
    if (rep.objective_value > -1e-10) return std::nullopt;
  }
  throw NumericalError(std::string("dual_certificate: solver ") + to_string(rep.status) +
                       " (" + rep.message + ")");
}

/// Single-interval K-moment problem (deterministic: two eigenchecks plus the
/// FS decomposition; no conic solve on the feasible path).
inline MomentResult representing_measure_single(const MomentSequence& t,
                                                const TorusInterval& iv,
                                                const DecompositionOptions& dopts = {},
                                                const SolveOptions& sopts = {}) {
  MomentResult res;
  const auto adm = fs_admissible(t, iv, dopts.tol_psd);
  if (adm.admissible()) {
    auto rep = fs_vandermonde_decompose(t, iv, dopts);
    res.status = MomentResult::Status::Feasible;
    res.measure = rep.measure;
    res.per_band_moments = std::vector<MomentSequence>{t};
    res.unique = rep.unique;
    return res;
  }
  res.status = MomentResult::Status::Infeasible;
  try {
    auto cert = dual_certificate(t, BandSet({iv}), sopts);
    if (cert && certificate_is_valid(t, BandSet({iv}), *cert)) res.certificate = cert;
  } catch (const Error&) {
    // admissibility already settles infeasibility; the witness is best-effort
  }
  return res;
}

/// Multi-band K-moment problem via the band-split feasibility program:
/// find t_l with sum_l t_l = t, T(t_l) >= 0 and T_{g_l}(t_l) >= 0.
inline MomentResult representing_measure_multiband(
    const MomentSequence& t, const BandSet& k,
    MomentObjective objective = MomentObjective::None,
    const DecompositionOptions& dopts_in = {}, const SolveOptions& sopts = {}) {
  const int j_count = static_cast<int>(k.size());
  if (j_count == 1)
    return representing_measure_single(t, k.bands[0], dopts_in, sopts);

  const int n = t.size();
  const int per = detail::seq_var_count(n);
  ConicProgram prog(j_count * per);
  const auto gs = detail::band_polys(k);
  for (int l = 0; l < j_count; ++l) {
    detail::add_toeplitz_block(prog, l * per, n);
    detail::add_toeplitz_g_block(prog, l * per, n, gs[l]);
  }
  for (int comp = 0; comp < per; ++comp) {
    std::vector<std::pair<int, double>> eq;
    for (int l = 0; l < j_count; ++l) eq.push_back({l * per + comp, 1.0});
    double rhs;
    if (comp == 0)
      rhs = t.t0();
    else if (comp % 2 == 1)
      rhs = t.at((comp + 1) / 2).real();
    else
      rhs = t.at(comp / 2).imag();
    prog.add_equality(std::move(eq), rhs);
  }
  if (objective == MomentObjective::MaxTraceFirstBand)
    prog.set_objective(0, -double(n));
  else if (objective == MomentObjective::MinTraceFirstBand)
    prog.set_objective(0, double(n));

  auto rep = solve(prog, sopts);

  if (rep.status == SolveStatus::Optimal) {
    MomentResult res;
    res.status = MomentResult::Status::Feasible;
    std::vector<MomentSequence> parts;
    std::vector<AtomicMeasure::Atom> atoms;
    DecompositionOptions dopts = dopts_in;
    dopts.tol_psd = std::max(dopts.tol_psd, 1e-6);  // solver-boundary slack
    for (int l = 0; l < j_count; ++l) {
      MomentSequence tl = detail::sequence_from_vars(rep.x, l * per, n);
      parts.push_back(tl);
      if (tl.t0() < 1e-9 * std::max(1.0, t.t0())) continue;  // empty band
      auto dec = fs_vandermonde_decompose(tl, k.bands[l], dopts);
      for (const auto& a : dec.measure.atoms()) atoms.push_back(a);
    }
    auto mu = AtomicMeasure::from_atoms(std::move(atoms), 0.0,
                                        1e-10 * std::max(1.0, t.t0()));
    if (!verify_measure(mu, t, k, 1e-6))
      throw NumericalError(
          "representing_measure_multiband: assembled measure fails verification");
    res.measure = std::move(mu);
    res.per_band_moments = std::move(parts);
    return res;
  }

  if (rep.status == SolveStatus::Infeasible) {
    MomentResult res;
    res.status = MomentResult::Status::Infeasible;
    auto cert = dual_certificate(t, k, sopts);
    if (!cert || !certificate_is_valid(t, k, *cert))
      throw NumericalError(
          "representing_measure_multiband: infeasible by phase-I but the dual "
          "certificate could not be verified");
    res.certificate = cert;
    return res;
  }
  throw NumericalError(std::string("representing_measure_multiband: solver ") +
                       to_string(rep.status) + " (" + rep.message + ")");
}

}  // namespace fsvd
