#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsvd/core.hpp"
#include "fsvd/moments.hpp"
#include "fsvd/sdp.hpp"
#include "fsvd/trigpoly.hpp"
#include "fsvd/vandermonde.hpp"

namespace fsvd {

/// Line spectral estimation instance: M of N uniform samples observed on the
/// index set omega, frequencies confined to the given bands, noise energy
/// bounded by eta (0 means exact interpolation).
struct LSEProblem {
  int n;
  std::vector<int> omega;
  CVector y_obs;
  BandSet bands;
  double eta = 0.0;

  LSEProblem(int n_, std::vector<int> omega_, CVector y_obs_, BandSet bands_,
             double eta_ = 0.0)
      : n(n_), omega(std::move(omega_)), y_obs(std::move(y_obs_)),
        bands(std::move(bands_)), eta(eta_) {
    if (n < 2) throw Error("LSEProblem: n must be >= 2");
    if (static_cast<int>(omega.size()) != y_obs.size())
      throw Error("LSEProblem: omega and y_obs sizes differ");
    if (omega.empty() || static_cast<int>(omega.size()) > n)
      throw Error("LSEProblem: need 1 <= M <= N samples");
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (omega[i] < 0 || omega[i] >= n) throw Error("LSEProblem: index out of range");
      if (i > 0 && omega[i] <= omega[i - 1])
        throw Error("LSEProblem: omega must be strictly increasing");
    }
    if (eta < 0) throw Error("LSEProblem: eta must be nonnegative");
  }
};

struct LSESolution {
  CVector y_full;
  std::vector<double> frequencies;
  CVector amplitudes;
  double atomic_norm = 0.0;
  MomentSequence toeplitz_moments;  ///< summed solved sequence
  double x_scalar = 0.0;
  std::vector<MomentSequence> band_moments;
  CVector dual_z;  ///< dual vector extracted from the bordered block
  double amplitude_residual = 0.0;
  SolveStatus solver_status = SolveStatus::Failed;
  std::string warning;
};

struct AtomicNormResult {
  double value = 0.0;
  MomentSequence t;  ///< summed over bands
  double x = 0.0;
  std::vector<MomentSequence> band_moments;
  SolveStatus status = SolveStatus::Failed;
};

namespace detail {

struct AnmLayout {
  int var_x = 0;
  std::vector<int> t_base;       // per band
  std::vector<int> y_var;        // per sample index, -1 when fixed (2 reals each)
  int bordered_block = 0;
};

/// Shared builder for the atomic-norm programs: bordered block
/// [[x, y^H],[y, sum_l T(t_l)]], plus per band T(t_l) >= 0 and T_g(t_l) >= 0.
/// Entries of y listed in free_y become variables; the rest are fixed to
/// y_fixed. A positive eta adds the noise ball |y_Omega - y_obs| <= eta as a
/// bordered PSD block (all observed entries must then be free).
inline std::pair<ConicProgram, AnmLayout> build_anm_program(
    int n, const BandSet& bands, const CVector& y_fixed,
    const std::vector<int>& free_y, const std::vector<int>& omega,
    const CVector& y_obs, double eta) {
  const int j_count = static_cast<int>(bands.size());
  const int per = seq_var_count(n);
  const int m = 1 + j_count * per + 2 * static_cast<int>(free_y.size());
  ConicProgram prog(m);
  AnmLayout lay;
  lay.var_x = 0;
  prog.set_objective(0, 0.5);
  for (int l = 0; l < j_count; ++l) {
    lay.t_base.push_back(1 + l * per);
    prog.set_objective(1 + l * per, 0.5);
  }
  lay.y_var.assign(n, -1);
  int next = 1 + j_count * per;
  for (int idx : free_y) {
    lay.y_var[idx] = next;
    next += 2;
  }

  // bordered block, complex dimension n + 1
  const int bb = prog.add_block(2 * (n + 1));
  lay.bordered_block = bb;
  prog.add_herm_entry(bb, lay.var_x, 0, 0, 1.0);
  for (int kidx = 0; kidx < n; ++kidx) {
    // upper entry (0, 1+k) holds conj(y_k)
    if (lay.y_var[kidx] >= 0) {
      prog.add_herm_entry(bb, lay.y_var[kidx], 0, 1 + kidx, 1.0);
      prog.add_herm_entry(bb, lay.y_var[kidx] + 1, 0, 1 + kidx, Complex(0, -1));
    } else if (y_fixed(kidx) != Complex(0, 0)) {
      prog.add_herm_const_entry(bb, 0, 1 + kidx, std::conj(y_fixed(kidx)));
    }
  }
  for (int l = 0; l < j_count; ++l) {
    const int base = lay.t_base[l];
    for (int j = 0; j < n; ++j)
      for (int r = 0; r + j < n; ++r)
        emit_seq_coeff(prog, bb, base, 1 + r, 1 + r + j, j, 1.0);
  }

  const auto gs = band_polys(bands);
  for (int l = 0; l < j_count; ++l) {
    add_toeplitz_block(prog, lay.t_base[l], n);
    add_toeplitz_g_block(prog, lay.t_base[l], n, gs[l]);
  }

  if (eta > 0.0) {
    // [[eta, (y_Omega - y_obs)^H], [(y_Omega - y_obs), eta I]] >= 0
    const int mm = static_cast<int>(omega.size());
    const int nb = prog.add_block(2 * (mm + 1));
    prog.add_herm_const_entry(nb, 0, 0, eta);
    for (int i = 0; i < mm; ++i) {
      prog.add_herm_const_entry(nb, 1 + i, 1 + i, eta);
      const int yv = lay.y_var[omega[i]];
      if (yv < 0) throw Error("build_anm_program: eta > 0 requires free samples");
      prog.add_herm_entry(nb, yv, 0, 1 + i, 1.0);
      prog.add_herm_entry(nb, yv + 1, 0, 1 + i, Complex(0, -1));
      prog.add_herm_const_entry(nb, 0, 1 + i, -std::conj(y_obs(i)));
    }
  }
  return {std::move(prog), std::move(lay)};
}

inline CVector assemble_y(const RVector& x, const AnmLayout& lay,
                          const CVector& y_fixed) {
  CVector y = y_fixed;
  for (int k = 0; k < y.size(); ++k)
    if (lay.y_var[k] >= 0) y(k) = Complex(x(lay.y_var[k]), x(lay.y_var[k] + 1));
  return y;
}

inline MomentSequence sum_sequences(const std::vector<MomentSequence>& parts) {
  CVector t = CVector::Zero(parts.front().size());
  for (const auto& p : parts) t += p.coeffs();
  return MomentSequence(static_cast<int>(t.size()), std::move(t));
}

/// Dual vector from the bordered block's dual matrix: the complex projection
/// scaled so its (0,0) entry is one, matching the bounded-real-lemma
/// normalization.
inline CVector extract_dual_z(const RMatrix& z_block) {
  CMatrix zc = herm_from_real(z_block);
  const double z00 = zc(0, 0).real();
  if (!(z00 > 1e-14)) return CVector::Zero(zc.rows() - 1);
  return CVector(zc.block(1, 0, zc.rows() - 1, 1) / z00);
}

}  // namespace detail

/// Frequencies supported by per-band solved sequences: each band's sequence is
/// checked for admissibility (loosened to solver tolerance) and decomposed;
/// atoms below 1e-6 of the total mass are dropped.
inline std::vector<double> retrieve_frequencies(
    const std::vector<MomentSequence>& per_band, const BandSet& bands,
    const DecompositionOptions& dopts_in = {}) {
  if (per_band.size() != bands.size())
    throw Error("retrieve_frequencies: one sequence per band required");
  DecompositionOptions dopts = dopts_in;
  dopts.tol_psd = std::max(dopts.tol_psd, 1e-6);
  double mass = 0.0;
  for (const auto& tl : per_band) mass += tl.t0();
  std::vector<double> freqs;
  for (std::size_t l = 0; l < per_band.size(); ++l) {
    if (per_band[l].t0() <= 1e-9 * std::max(1.0, mass)) continue;
    auto rep = fs_vandermonde_decompose(per_band[l], bands.bands[l], dopts);
    for (const auto& a : rep.measure.atoms())
      if (a.p >= 1e-6 * mass) freqs.push_back(a.f);
  }
  std::sort(freqs.begin(), freqs.end());
  return freqs;
}

/// Least-squares amplitudes for the model y = sum_k a(f_k) s_k.
inline CVector recover_amplitudes(const CVector& y_full,
                                  const std::vector<double>& freqs,
                                  double* residual_out = nullptr) {
  const int n = static_cast<int>(y_full.size());
  const int r = static_cast<int>(freqs.size());
  if (r == 0) {
    if (residual_out) *residual_out = y_full.norm();
    return CVector();
  }
  if (r > n) throw Error("recover_amplitudes: more frequencies than samples");
  CMatrix a(n, r);
  for (int k = 0; k < r; ++k) a.col(k) = atom_vector(n, freqs[k]);
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.singularValues()(r - 1) < 1e-10 * svd.singularValues()(0))
    throw Error("recover_amplitudes: near-duplicate frequencies");
  CVector s = svd.solve(y_full);
  if (residual_out) *residual_out = (a * s - y_full).norm();
  return s;
}

/// FS atomic norm of a fully observed vector via the bordered-Toeplitz
/// semidefinite program; returns the optimal value with the solved sequence.
inline AtomicNormResult fs_atomic_norm(const CVector& y, const BandSet& bands,
                                       const SolveOptions& sopts = {}) {
  const int n = static_cast<int>(y.size());
  if (n < 2) throw Error("fs_atomic_norm: need length >= 2");
  auto [prog, lay] = detail::build_anm_program(n, bands, y, {}, {}, CVector(), 0.0);
  auto rep = solve(prog, sopts);
  if (rep.status != SolveStatus::Optimal && rep.status != SolveStatus::Inaccurate)
    throw NumericalError(std::string("fs_atomic_norm: solver ") + to_string(rep.status) +
                         " (" + rep.message + ")");
  AtomicNormResult res{0.0, MomentSequence(2, CVector::Zero(2)), 0.0, {}, rep.status};
  for (std::size_t l = 0; l < bands.size(); ++l)
    res.band_moments.push_back(
        detail::sequence_from_vars(rep.x, lay.t_base[l], n));
  res.t = detail::sum_sequences(res.band_moments);
  res.x = rep.x(lay.var_x);
  res.value = rep.objective_value;
  return res;
}

/// Signal completion by FS atomic norm minimization: fills the unobserved
/// samples, then retrieves frequencies (FS decomposition per band) and
/// amplitudes (least squares).
inline LSESolution fs_anm_complete(const LSEProblem& p, const SolveOptions& sopts = {},
                                   const DecompositionOptions& dopts = {}) {
  const int n = p.n;
  CVector y_fixed = CVector::Zero(n);
  std::vector<int> free_y;
  if (p.eta > 0.0) {
    for (int k = 0; k < n; ++k) free_y.push_back(k);
  } else {
    std::vector<bool> observed(n, false);
    for (std::size_t i = 0; i < p.omega.size(); ++i) {
      observed[p.omega[i]] = true;
      y_fixed(p.omega[i]) = p.y_obs(i);
    }
    for (int k = 0; k < n; ++k)
      if (!observed[k]) free_y.push_back(k);
  }
  auto [prog, lay] =
      detail::build_anm_program(n, p.bands, y_fixed, free_y, p.omega, p.y_obs, p.eta);
  auto rep = solve(prog, sopts);
  if (rep.status != SolveStatus::Optimal && rep.status != SolveStatus::Inaccurate)
    throw NumericalError(std::string("fs_anm_complete: solver ") + to_string(rep.status) +
                         " (" + rep.message + ")");

  LSESolution sol{CVector(),
                  {},
                  CVector(),
                  rep.objective_value,
                  MomentSequence(2, CVector::Zero(2)),
                  rep.x(lay.var_x),
                  {},
                  CVector(),
                  0.0,
                  rep.status,
                  {}};
  if (rep.status == SolveStatus::Inaccurate)
    sol.warning = "solver reached only moderate accuracy";
  for (std::size_t l = 0; l < p.bands.size(); ++l)
    sol.band_moments.push_back(detail::sequence_from_vars(rep.x, lay.t_base[l], n));
  sol.toeplitz_moments = detail::sum_sequences(sol.band_moments);
  sol.y_full = detail::assemble_y(rep.x, lay, y_fixed);
  if (!rep.block_duals.empty())
    sol.dual_z = detail::extract_dual_z(rep.block_duals[0]);

  sol.frequencies = retrieve_frequencies(sol.band_moments, p.bands, dopts);
  if (!sol.frequencies.empty() &&
      static_cast<int>(sol.frequencies.size()) <= n) {
    sol.amplitudes = recover_amplitudes(sol.y_full, sol.frequencies,
                                        &sol.amplitude_residual);
    if (sol.amplitude_residual > 1e-4 * std::max(1.0, sol.y_full.norm())) {
      if (!sol.warning.empty()) sol.warning += "; ";
      sol.warning += "amplitude fit residual above 1e-4";
    }
  }
  return sol;
}

/// Samples of the dual polynomial magnitude |a(f)^H z| at f = i/grid.
inline std::vector<std::pair<double, double>> dual_polynomial(const CVector& z,
                                                              int grid) {
  if (grid < 2) throw Error("dual_polynomial: grid must be >= 2");
  const int n = static_cast<int>(z.size());
  std::vector<std::pair<double, double>> out;
  out.reserve(grid + 1);
  for (int i = 0; i <= grid; ++i) {
    const double f = double(i) / grid;
    Complex q = 0;
    for (int k = 0; k < n; ++k) q += std::conj(std::polar(1.0, two_pi * k * f)) * z(k);
    out.push_back({f, std::abs(q)});
  }
  return out;
}

struct AnmDualResult {
  CVector z;
  CMatrix q0;
  CMatrix q1;
  double value = 0.0;
  SolveStatus status = SolveStatus::Failed;
};

/// Bounded-real-lemma dual of the single-band completion problem:
///   max Re(y_obs^H z_Omega) s.t. the Gram pair certifies |q(f)| <= 1 on the
/// band and z vanishes off Omega. Solved in standard form: the PSD matrix
/// variables are the interior-point method's dual blocks.
inline AnmDualResult fs_anm_dual(const LSEProblem& p, const SolveOptions& sopts = {}) {
  if (p.bands.size() != 1)
    throw Error("fs_anm_dual: only single-band problems are supported");
  if (p.eta != 0.0) throw Error("fs_anm_dual: noiseless problems only");
  const int n = p.n;
  const auto g = g_from_interval(p.bands.bands[0]);

  // standard form: X = diag(X0, X1), X0 = [[x00, z^H],[z, Q0]] of complex
  // dimension n+1, X1 = Q1 of dimension n-1. Constraints (value b each):
  //   x00 = 1; Re/Im z_k = 0 off Omega; the Gram trace rows.
  // Feed to the LMI solver as F_i = embedding(A_i), c_i = 2 b_i, F_0 = -C;
  // the solver's dual blocks then converge to X.
  struct Row {
    std::vector<std::pair<int, std::pair<std::pair<int, int>, Complex>>> entries;
  };
  std::vector<bool> observed(n, false);
  for (int idx : p.omega) observed[idx] = true;

  // count constraints
  std::vector<int> free_idx;
  for (int k = 0; k < n; ++k)
    if (!observed[k]) free_idx.push_back(k);
  const int m = 1 + 2 * static_cast<int>(free_idx.size()) + (2 * n - 1);
  ConicProgram prog(m);
  const int b0 = prog.add_block(2 * (n + 1));
  const int b1 = prog.add_block(2 * (n - 1));

  int row = 0;
  // x00 = 1
  prog.add_herm_entry(b0, row, 0, 0, 1.0);
  prog.set_objective(row, 2.0);
  ++row;
  // z_k = 0 off Omega: A = (e_{1+k,0} + e_{0,1+k})/2 and the i/2 variant
  for (int k : free_idx) {
    prog.add_herm_entry(b0, row, 0, 1 + k, 0.5);
    prog.set_objective(row, 0.0);
    ++row;
    prog.add_herm_entry(b0, row, 0, 1 + k, Complex(0, -0.5));
    prog.set_objective(row, 0.0);
    ++row;
  }
  // Gram trace rows, one Hermitian functional per real equation:
  //   Re tr(Theta_j Q0 + Theta_gj Q1) pairs with (Theta_j + Theta_j^H)/2,
  //   Im tr(...) with i(Theta_j^H - Theta_j)/2; value one at j = 0.
  for (int j = 0; j < n; ++j) {
    auto [theta, theta_g] = elementary_matrices(n, g, j);
    CMatrix a0_re = 0.5 * (theta + theta.adjoint());
    CMatrix a1_re = 0.5 * (theta_g + theta_g.adjoint());
    auto emit = [&](int var, const CMatrix& a0, const CMatrix& a1) {
      for (int r = 0; r < n; ++r)
        for (int c = r; c < n; ++c)
          if (a0(r, c) != Complex(0, 0))
            prog.add_herm_entry(b0, var, 1 + r, 1 + c,
                                (r == c) ? Complex(a0(r, c).real(), 0) : a0(r, c));
      for (int r = 0; r < n - 1; ++r)
        for (int c = r; c < n - 1; ++c)
          if (a1(r, c) != Complex(0, 0))
            prog.add_herm_entry(b1, var, r, c,
                                (r == c) ? Complex(a1(r, c).real(), 0) : a1(r, c));
    };
    emit(row, a0_re, a1_re);
    prog.set_objective(row, (j == 0) ? 2.0 : 0.0);
    ++row;
    if (j > 0) {
      CMatrix a0_im = Complex(0, 0.5) * (theta.adjoint() - theta);
      CMatrix a1_im = Complex(0, 0.5) * (theta_g.adjoint() - theta_g);
      emit(row, a0_im, a1_im);
      prog.set_objective(row, 0.0);
      ++row;
    }
  }

  // objective matrix C: max Re(y_obs^H z_Omega) -> F_0 = -C embedded
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    const int k = p.omega[i];
    // C[0, 1+k] = conj(y_i)/2 ; embed -C
    prog.add_herm_const_entry(b0, 0, 1 + k, -0.5 * std::conj(p.y_obs(i)));
  }

  auto rep = solve(prog, sopts);
  if (rep.status != SolveStatus::Optimal && rep.status != SolveStatus::Inaccurate)
    throw NumericalError(std::string("fs_anm_dual: solver ") + to_string(rep.status) +
                         " (" + rep.message + ")");
  AnmDualResult res;
  res.status = rep.status;
  res.value = 0.5 * rep.objective_value;
  CMatrix x0 = herm_from_real(rep.block_duals[0]);
  CMatrix x1 = herm_from_real(rep.block_duals[1]);
  const double x00 = std::max(x0(0, 0).real(), 1e-300);
  res.z = x0.block(1, 0, n, 1) / x00;
  res.q0 = x0.block(1, 1, n, n) / x00;
  res.q1 = x1 / x00;
  return res;
}

/// Root-finding retrieval baseline: frequencies are the unit-modulus roots of
/// the degree-(2N-2) polynomial w^{N-1} (1 - |q|^2(w)).
inline std::vector<double> root_finding_retrieval(const CVector& z,
                                                  double modulus_tol = 1e-4,
                                                  double cluster_tol = 1e-4) {
  const int n = static_cast<int>(z.size());
  if (z.norm() == 0.0) throw Error("root_finding_retrieval: z must be nonzero");
  // coefficients of |q|^2 in powers of w = e^{i 2 pi f}: c_d = sum_k conj(z_k) z_{k-d}
  CVector coef = CVector::Zero(2 * n - 1);
  for (int d = -(n - 1); d <= n - 1; ++d) {
    Complex c = 0;
    for (int k = std::max(0, d); k < std::min(n, n + d); ++k)
      c += std::conj(z(k)) * z(k - d);
    coef(d + n - 1) = c;
  }
  // p(w) = w^{n-1} - sum_d c_d w^{d+n-1}
  CVector poly = -coef;
  poly(n - 1) += 1.0;
  // trim zero leading/trailing coefficients (z vanishing off Omega)
  int lo = 0, hi = static_cast<int>(poly.size()) - 1;
  const double tiny = 1e-14 * poly.cwiseAbs().maxCoeff();
  while (hi > 0 && std::abs(poly(hi)) < tiny) --hi;
  while (lo < hi && std::abs(poly(lo)) < tiny) ++lo;
  const int deg = hi - lo;
  if (deg < 1) return {};
  CMatrix comp = CMatrix::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -poly(lo + i) / poly(hi);
  Eigen::ComplexEigenSolver<CMatrix> es(comp);
  if (es.info() != Eigen::Success)
    throw NumericalError("root_finding_retrieval: eigensolver failed");
  std::vector<double> freqs;
  for (int i = 0; i < deg; ++i) {
    const Complex w = es.eigenvalues()(i);
    if (std::fabs(std::abs(w) - 1.0) < modulus_tol)
      freqs.push_back(torus_mod(std::arg(w) / two_pi));
  }
  std::sort(freqs.begin(), freqs.end());
  // roots on the circle come in touching pairs; merge clusters
  std::vector<double> merged;
  std::size_t i = 0;
  while (i < freqs.size()) {
    double sum = freqs[i];
    std::size_t j = i + 1;
    while (j < freqs.size() && freqs[j] - freqs[j - 1] <= cluster_tol) {
      sum += freqs[j];
      ++j;
    }
    merged.push_back(sum / double(j - i));
    i = j;
  }
  if (merged.size() > 1 &&
      torus_distance(merged.front(), merged.back()) <= cluster_tol)
    merged.pop_back();
  return merged;
}

}  // namespace fsvd
