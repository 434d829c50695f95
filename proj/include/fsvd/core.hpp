#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace fsvd {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An eigensolve, pencil or least-squares step left the stated contract.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The requested decomposition or measure does not exist for the input.
class NotRepresentableError : public Error {
 public:
  using Error::Error;
};

/// Reduce a frequency to the fundamental domain [0, 1).
inline double torus_mod(double f) {
  double r = f - std::floor(f);
  return (r >= 1.0) ? r - 1.0 : r;
}

/// Wrap-around distance between two frequencies on the unit circle.
inline double torus_distance(double a, double b) {
  double d = std::fabs(torus_mod(a) - torus_mod(b));
  return std::min(d, 1.0 - d);
}

/// Closed arc on the torus. For f_lo > f_hi the set wraps through 0.
struct TorusInterval {
  double f_lo;
  double f_hi;

  TorusInterval(double lo, double hi) : f_lo(torus_mod(lo)), f_hi(torus_mod(hi)) {
    if (f_lo == f_hi)
      throw Error("TorusInterval: degenerate interval, endpoints coincide");
  }

  /// Raw endpoint difference sign; -1 for wrap-around intervals.
  double orientation() const { return (f_hi > f_lo) ? 1.0 : -1.0; }

  bool contains(double f, double tol_f = 0.0) const {
    return distance(f) <= tol_f;
  }

  /// Torus distance from f to the arc (0 inside).
  double distance(double f) const {
    f = torus_mod(f);
    bool inside = (f_lo < f_hi) ? (f >= f_lo && f <= f_hi) : (f >= f_lo || f <= f_hi);
    if (inside) return 0.0;
    return std::min(torus_distance(f, f_lo), torus_distance(f, f_hi));
  }

  /// Arc length.
  double width() const { return (f_lo < f_hi) ? f_hi - f_lo : 1.0 - (f_lo - f_hi); }

  /// Point at relative position u in [0,1] along the arc from f_lo.
  double point_at(double u) const { return torus_mod(f_lo + u * width()); }
};

/// Union of pairwise disjoint closed arcs.
struct BandSet {
  std::vector<TorusInterval> bands;

  explicit BandSet(std::vector<TorusInterval> b) : bands(std::move(b)) {
    if (bands.empty()) throw Error("BandSet: at least one band required");
    for (std::size_t i = 0; i < bands.size(); ++i)
      for (std::size_t j = i + 1; j < bands.size(); ++j) {
        const auto& a = bands[i];
        const auto& b2 = bands[j];
        if (a.contains(b2.f_lo) || a.contains(b2.f_hi) || b2.contains(a.f_lo) ||
            b2.contains(a.f_hi))
          throw Error("BandSet: bands overlap");
      }
  }

  std::size_t size() const { return bands.size(); }
};

/// Membership of a frequency in a band set, within torus distance tol_f.
inline bool band_contains(const BandSet& k, double f, double tol_f = 0.0) {
  for (const auto& b : k.bands)
    if (b.contains(f, tol_f)) return true;
  return false;
}

/// Finite Hermitian moment sequence t_0..t_{N-1}; t_{-j} is implied conj(t_j).
class MomentSequence {
 public:
  MomentSequence(int n, CVector t) : n_(n), t_(std::move(t)) { validate(); }

  explicit MomentSequence(CVector t)
      : n_(static_cast<int>(t.size())), t_(std::move(t)) {
    validate();
  }

  int size() const { return n_; }
  const CVector& coeffs() const { return t_; }
  double t0() const { return t_(0).real(); }

  /// Two-sided access: at(j) = t_j for j >= 0, conj(t_{-j}) for j < 0.
  Complex at(int j) const {
    if (std::abs(j) >= n_) throw Error("MomentSequence: lag out of range");
    return j >= 0 ? t_(j) : std::conj(t_(-j));
  }

 private:
  void validate() {
    if (n_ < 2) throw Error("MomentSequence: n must be >= 2");
    if (t_.size() != n_) throw Error("MomentSequence: length mismatch");
    if (std::fabs(t_(0).imag()) > 1e-12)
      throw Error("MomentSequence: t_0 must be real");
    t_(0) = Complex(t_(0).real(), 0.0);
  }

  int n_;
  CVector t_;
};

/// Finite nonnegative atomic measure; atoms sorted by frequency.
class AtomicMeasure {
 public:
  struct Atom {
    double p;
    double f;
  };

  /// Canonicalizes: frequencies reduced mod 1, sorted; atoms closer than
  /// merge_tol on the torus are merged by weight addition; weights below
  /// drop_below are discarded.
  static AtomicMeasure from_atoms(std::vector<Atom> atoms, double merge_tol = 0.0,
                                  double drop_below = 0.0) {
    for (auto& a : atoms) a.f = torus_mod(a.f);
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.f < b.f; });
    if (merge_tol > 0.0 && atoms.size() > 1) {
      std::vector<Atom> merged;
      merged.push_back(atoms.front());
      for (std::size_t i = 1; i < atoms.size(); ++i) {
        if (torus_distance(atoms[i].f, merged.back().f) <= merge_tol) {
          double w = merged.back().p + atoms[i].p;
          merged.back().f = (merged.back().p * merged.back().f + atoms[i].p * atoms[i].f) / w;
          merged.back().p = w;
        } else {
          merged.push_back(atoms[i]);
        }
      }
      // wrap-around pair (first vs last)
      if (merged.size() > 1 &&
          torus_distance(merged.front().f, merged.back().f) <= merge_tol) {
        merged.front().p += merged.back().p;
        merged.pop_back();
      }
      atoms = std::move(merged);
    }
    if (drop_below > 0.0) {
      std::erase_if(atoms, [&](const Atom& a) { return a.p < drop_below; });
    }
    return AtomicMeasure(std::move(atoms));
  }

  explicit AtomicMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw Error("AtomicMeasure: empty measure");
    for (const auto& a : atoms_) {
      if (!(a.p > 0.0)) throw Error("AtomicMeasure: weights must be positive");
      if (a.f < 0.0 || a.f >= 1.0) throw Error("AtomicMeasure: frequency outside [0,1)");
    }
    for (std::size_t i = 1; i < atoms_.size(); ++i)
      if (!(atoms_[i - 1].f < atoms_[i].f))
        throw Error("AtomicMeasure: frequencies must be distinct and sorted");
  }

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double total_mass() const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.p;
    return s;
  }

 private:
  std::vector<Atom> atoms_;
};

/// a(n, f) = [1, e^{i2pi f}, ..., e^{i2pi (n-1) f}]^T.
inline CVector atom_vector(int n, double f) {
  if (n < 1) throw Error("atom_vector: n must be >= 1");
  f = torus_mod(f);
  CVector a(n);
  for (int m = 0; m < n; ++m) a(m) = std::polar(1.0, two_pi * m * f);
  return a;
}

/// N x N Hermitian Toeplitz matrix with T[m][n] = t_{n-m}.
inline CMatrix toeplitz_from_moments(const MomentSequence& t) {
  const int n = t.size();
  CMatrix T(n, n);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k) T(m, k) = t.at(k - m);
  return T;
}

/// t_j = sum_k p_k e^{-i 2 pi j f_k}, j = 0..n-1.
inline MomentSequence moments_from_measure(const AtomicMeasure& mu, int n) {
  CVector t = CVector::Zero(n);
  for (const auto& a : mu.atoms())
    for (int j = 0; j < n; ++j) t(j) += a.p * std::polar(1.0, -two_pi * j * a.f);
  t(0) = Complex(t(0).real(), 0.0);
  return MomentSequence(n, std::move(t));
}

/// Real coordinates [Re t_{N-1},...,Re t_1, (sqrt(2)/2) t_0, Im t_1,...,Im t_{N-1}].
struct RealEmbedding {
  RVector vec;
};

inline RealEmbedding real_embedding(const MomentSequence& t) {
  const int n = t.size();
  RVector v(2 * n - 1);
  for (int j = 1; j < n; ++j) v(n - 1 - j) = t.at(j).real();
  v(n - 1) = std::numbers::sqrt2 / 2.0 * t.t0();
  for (int j = 1; j < n; ++j) v(n - 1 + j) = t.at(j).imag();
  return RealEmbedding{std::move(v)};
}

inline MomentSequence moments_from_real_embedding(const RealEmbedding& e) {
  const auto len = e.vec.size();
  if (len < 3 || len % 2 == 0) throw Error("real embedding: length must be odd and >= 3");
  const int n = static_cast<int>((len + 1) / 2);
  CVector t(n);
  t(0) = Complex(e.vec(n - 1) * std::numbers::sqrt2, 0.0);
  for (int j = 1; j < n; ++j) t(j) = Complex(e.vec(n - 1 - j), e.vec(n - 1 + j));
  return MomentSequence(n, std::move(t));
}

namespace detail {

/// Relative deviation from Hermitian symmetry.
inline double herm_deviation(const CMatrix& m) {
  double scale = std::max(1.0, m.norm());
  return (m - m.adjoint()).norm() / scale;
}

}  // namespace detail

/// PSD test on a symmetrized copy: is_psd iff lambda_min >= -tol*max(1, lambda_max).
inline std::pair<bool, double> psd_check(const CMatrix& m, double tol = 1e-8) {
  if (m.rows() != m.cols()) throw Error("psd_check: matrix must be square");
  if (detail::herm_deviation(m) > 1e-10)
    throw Error("psd_check: matrix is not Hermitian");
  CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("psd_check: eigensolver failed");
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  return {lmin >= -tol * std::max(1.0, lmax), lmin};
}

}  // namespace fsvd
