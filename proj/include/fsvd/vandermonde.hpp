#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "fsvd/core.hpp"
#include "fsvd/trigpoly.hpp"

namespace fsvd {

/// Outcome of a (FS) Vandermonde decomposition.
struct DecompositionReport {
  AtomicMeasure measure;
  int rank_used = 0;
  bool unique = false;
  /// Relative Frobenius norm of T - sum_k p_k a(f_k) a(f_k)^H.
  double residual = 0.0;
};

struct DecompositionOptions {
  double eps_rank = 1e-7;   ///< eigenvalue cut, relative to lambda_max
  double tol_psd = 1e-8;    ///< admissibility tolerance for psd_check
  double tol_f = 1e-6;      ///< band membership tolerance for FS outputs
  double max_residual = 1e-6;
};

/// Number of eigenvalues above eps_rank * lambda_max. Errors on indefinite input.
inline int numerical_rank(const CMatrix& m, double eps_rank = 1e-7,
                          double tol_psd = 1e-8) {
  auto [ok, lmin] = psd_check(m, tol_psd);
  if (!ok) throw Error("numerical_rank: matrix is not PSD (min eig " +
                       std::to_string(lmin) + ")");
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (m + m.adjoint()),
                                            Eigen::EigenvaluesOnly);
  const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
  int r = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > eps_rank * lmax) ++r;
  return r;
}

/// t'_j = t_j - p e^{-i 2 pi j f}; removes the atom (p, f) from the sequence.
inline MomentSequence deflate(const MomentSequence& t, double f, double p) {
  CVector out = t.coeffs();
  for (int j = 0; j < t.size(); ++j) out(j) -= p * std::polar(1.0, -two_pi * j * f);
  return MomentSequence(t.size(), std::move(out));
}

namespace detail {

/// Frequencies of the rank-r pencil (V_U^H V_L, V_U^H V_U) built from the
/// top-r eigenspace square root of T. Eigenvalues are projected onto the unit
/// circle; a modulus off by more than 1e-3 is a numerical failure.
inline std::vector<double> pencil_frequencies(const CMatrix& T, int r) {
  const int n = static_cast<int>(T.rows());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (T + T.adjoint()));
  if (es.info() != Eigen::Success)
    throw NumericalError("pencil: eigendecomposition failed");
  CMatrix V(n, r);
  for (int k = 0; k < r; ++k) {
    const int idx = n - 1 - k;  // eigenvalues ascending; take the top r
    const double lam = std::max(es.eigenvalues()(idx), 0.0);
    V.col(k) = es.eigenvectors().col(idx) * std::sqrt(lam);
  }
  CMatrix vu = V.topRows(n - 1);
  CMatrix vl = V.bottomRows(n - 1);
  CMatrix a = vu.adjoint() * vu;
  CMatrix b = vu.adjoint() * vl;
  // Ordinary eigenproblem of A^{-1} B with a pseudo-inverse fallback when A
  // is ill-conditioned (V_U has full column rank in exact arithmetic).
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cond = svd.singularValues()(0) /
                      std::max(svd.singularValues()(r - 1), 1e-300);
  CMatrix p;
  if (cond < 1e12) {
    p = a.ldlt().solve(b);
  } else {
    svd.setThreshold(1e-14);
    p = svd.solve(b);
  }
  Eigen::ComplexEigenSolver<CMatrix> ces(p);
  if (ces.info() != Eigen::Success) throw NumericalError("pencil: eigensolver failed");
  std::vector<double> freqs(r);
  for (int k = 0; k < r; ++k) {
    const Complex z = ces.eigenvalues()(k);
    const double mod = std::abs(z);
    if (std::fabs(mod - 1.0) > 1e-3)
      throw NumericalError("pencil: eigenvalue modulus " + std::to_string(mod) +
                           " deviates from the unit circle");
    freqs[k] = torus_mod(std::arg(z) / two_pi);
  }
  return freqs;
}

/// Least-squares weights for t_j = sum_k p_k e^{-i 2 pi j f_k}. Tiny negative
/// fits are clipped to zero; larger ones indicate failure.
inline std::vector<double> fit_weights(const MomentSequence& t,
                                       const std::vector<double>& freqs) {
  const int n = t.size();
  const int r = static_cast<int>(freqs.size());
  RMatrix m(2 * n, r);
  RVector rhs(2 * n);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < r; ++k) {
      const Complex e = std::polar(1.0, -two_pi * j * freqs[k]);
      m(j, k) = e.real();
      m(n + j, k) = e.imag();
    }
    rhs(j) = t.at(j).real();
    rhs(n + j) = t.at(j).imag();
  }
  RVector p = m.colPivHouseholderQr().solve(rhs);
  std::vector<double> w(r);
  for (int k = 0; k < r; ++k) {
    if (p(k) < -1e-8 * std::max(1.0, t.t0()))
      throw NumericalError("weight fit produced a negative weight");
    w[k] = std::max(p(k), 0.0);
  }
  return w;
}

inline double decomposition_residual(const CMatrix& T, const AtomicMeasure& mu) {
  const int n = static_cast<int>(T.rows());
  CMatrix rec = CMatrix::Zero(n, n);
  for (const auto& a : mu.atoms()) {
    CVector v = atom_vector(n, a.f);
    rec += a.p * v * v.adjoint();
  }
  return (T - rec).norm() / std::max(T.norm(), 1e-300);
}

inline AtomicMeasure measure_from_fit(const MomentSequence& t,
                                      const std::vector<double>& freqs,
                                      const std::vector<double>& weights) {
  std::vector<AtomicMeasure::Atom> atoms;
  atoms.reserve(freqs.size());
  for (std::size_t k = 0; k < freqs.size(); ++k)
    atoms.push_back({weights[k], freqs[k]});
  return AtomicMeasure::from_atoms(std::move(atoms), 1e-8,
                                   1e-10 * std::max(1.0, t.t0()));
}

inline MomentSequence sequence_from_toeplitz(const CMatrix& T) {
  const int n = static_cast<int>(T.rows());
  if (T.cols() != n || n < 2) throw Error("expected a square matrix of size >= 2");
  // verify Hermitian Toeplitz structure before reading the first row
  const double scale = std::max(1.0, T.norm());
  if (detail::herm_deviation(T) > 1e-10)
    throw Error("matrix is not Hermitian");
  for (int m = 1; m < n; ++m)
    for (int k = 1; k < n; ++k)
      if (std::abs(T(m, k) - T(m - 1, k - 1)) > 1e-10 * scale)
        throw Error("matrix is not Toeplitz");
  CVector t(n);
  for (int j = 0; j < n; ++j) t(j) = T(0, j);
  return MomentSequence(n, std::move(t));
}

}  // namespace detail

/// Vandermonde decomposition of a PSD Hermitian Toeplitz matrix given by its
/// moment sequence. Rank-deficient inputs decompose uniquely via the matrix
/// pencil; full-rank inputs pin one atom at f_extra and deflate once.
inline DecompositionReport vandermonde_decompose(const MomentSequence& t,
                                                 std::optional<double> f_extra = {},
                                                 const DecompositionOptions& opts = {}) {
  const int n = t.size();
  const CMatrix T = toeplitz_from_moments(t);
  auto [ok, lmin] = psd_check(T, opts.tol_psd);
  if (!ok)
    throw Error("vandermonde_decompose: matrix is not PSD (min eig " +
                std::to_string(lmin) + ")");
  const int r = numerical_rank(T, opts.eps_rank, opts.tol_psd);

  std::vector<double> freqs;
  if (r < n) {
    freqs = detail::pencil_frequencies(T, r);
  } else {
    const double fn = torus_mod(f_extra.value_or(0.0));
    const CVector a = atom_vector(n, fn);
    const double quad = (a.adjoint() * T.llt().solve(a))(0, 0).real();
    if (!(quad > 0.0)) throw NumericalError("deflation: a^H T^{-1} a not positive");
    const double pn = 1.0 / quad;
    const MomentSequence deflated = deflate(t, fn, pn);
    freqs = detail::pencil_frequencies(toeplitz_from_moments(deflated), n - 1);
    freqs.push_back(fn);
  }
  const auto weights = detail::fit_weights(t, freqs);
  AtomicMeasure mu = detail::measure_from_fit(t, freqs, weights);
  const double residual = detail::decomposition_residual(T, mu);
  if (residual > opts.max_residual)
    throw NumericalError("vandermonde_decompose: residual " +
                         std::to_string(residual) + " exceeds bound");
  return DecompositionReport{std::move(mu), r, r < n, residual};
}

/// Matrix-facing overload; verifies Hermitian Toeplitz structure first.
inline DecompositionReport vandermonde_decompose(const CMatrix& T,
                                                 std::optional<double> f_extra = {},
                                                 const DecompositionOptions& opts = {}) {
  return vandermonde_decompose(detail::sequence_from_toeplitz(T), f_extra, opts);
}

struct AdmissibilityReport {
  bool psd_T = false;
  bool psd_Tg = false;
  double min_eig_T = 0.0;
  double min_eig_Tg = 0.0;
  bool admissible() const { return psd_T && psd_Tg; }
};

/// Conditions of the FS decomposition theorem: T >= 0 and T_g >= 0.
inline AdmissibilityReport fs_admissible(const MomentSequence& t,
                                         const TorusInterval& iv,
                                         double tol = 1e-8) {
  auto [ok_t, min_t] = psd_check(toeplitz_from_moments(t), tol);
  auto [ok_g, min_g] = psd_check(toeplitz_g(t, g_from_interval(iv)), tol);
  return AdmissibilityReport{ok_t, ok_g, min_t, min_g};
}

/// FS Vandermonde decomposition on the arc iv. Full-rank T pins f_N = f_lo.
/// unique iff T or T_g is numerically rank-deficient.
inline DecompositionReport fs_vandermonde_decompose(const MomentSequence& t,
                                                    const TorusInterval& iv,
                                                    const DecompositionOptions& opts = {}) {
  const auto adm = fs_admissible(t, iv, opts.tol_psd);
  if (!adm.admissible())
    throw NotRepresentableError(
        "fs_vandermonde_decompose: no FS decomposition on the interval (min eig T " +
        std::to_string(adm.min_eig_T) + ", min eig T_g " +
        std::to_string(adm.min_eig_Tg) + ")");
  const int n = t.size();
  const CMatrix T = toeplitz_from_moments(t);
  const int r = numerical_rank(T, opts.eps_rank, opts.tol_psd);
  DecompositionReport rep =
      (r < n) ? vandermonde_decompose(t, {}, opts)
              : vandermonde_decompose(t, iv.f_lo, opts);
  for (const auto& a : rep.measure.atoms())
    if (!iv.contains(a.f, opts.tol_f))
      throw NumericalError("fs_vandermonde_decompose: frequency " +
                           std::to_string(a.f) + " left the interval");
  const CMatrix tg = toeplitz_g(t, g_from_interval(iv));
  int rg = 0;
  try {
    rg = numerical_rank(tg, opts.eps_rank, opts.tol_psd);
  } catch (const Error&) {
    rg = n - 1;  // marginally indefinite T_g counts as full rank
  }
  rep.unique = (r < n) || (rg <= n - 2);
  return rep;
}

}  // namespace fsvd
