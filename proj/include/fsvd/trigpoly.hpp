#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "fsvd/core.hpp"

namespace fsvd {

/// Hermitian degree-one trigonometric polynomial g(f) = r0 + 2 Re{r1 e^{-i2pi f}}.
struct DegOnePoly {
  double r0;
  Complex r1;
};

/// Selector polynomial of an arc: zero at both endpoints, positive inside,
/// negative on the complementary arc. The sign convention uses the raw
/// endpoint difference so wrap-around intervals get orientation -1.
inline DegOnePoly g_from_interval(const TorusInterval& iv) {
  const double s = iv.orientation();
  const double r0 = -2.0 * std::cos(std::numbers::pi * (iv.f_hi - iv.f_lo)) * s;
  const Complex r1 = std::polar(1.0, std::numbers::pi * (iv.f_lo + iv.f_hi)) * s;
  return DegOnePoly{r0, r1};
}

inline double eval_g(const DegOnePoly& g, double f) {
  return g.r0 + 2.0 * (g.r1 * std::polar(1.0, -two_pi * f)).real();
}

namespace detail {

/// Applies the degree-one stencil to an arbitrary two-sided sequence:
/// out[m][n] = r1 s(n-m+1) + r0 s(n-m) + conj(r1) s(n-m-1), out is dim x dim.
/// Both T_g and the elementary Theta_gj go through this single path.
inline CMatrix stencil_matrix(const std::function<Complex(int)>& s, int dim,
                              const DegOnePoly& g) {
  CMatrix out(dim, dim);
  for (int m = 0; m < dim; ++m)
    for (int n = 0; n < dim; ++n) {
      const int d = n - m;
      out(m, n) = g.r1 * s(d + 1) + g.r0 * s(d) + std::conj(g.r1) * s(d - 1);
    }
  return out;
}

}  // namespace detail

/// (N-1) x (N-1) Hermitian Toeplitz matrix T_g built from t and g.
inline CMatrix toeplitz_g(const MomentSequence& t, const DegOnePoly& g) {
  const int n = t.size();
  if (n < 2) throw Error("toeplitz_g: need N >= 2");
  auto s = [&](int j) -> Complex {
    return (std::abs(j) <= n - 1) ? t.at(j) : Complex(0.0, 0.0);
  };
  return detail::stencil_matrix(s, n - 1, g);
}

/// Elementary Toeplitz matrix Theta_j (ones on diagonal j) together with its
/// stencil image Theta_gj, so that T = sum_j Theta_j t_j and
/// T_g = sum_j Theta_gj t_j over j = 1-n .. n-1.
inline std::pair<CMatrix, CMatrix> elementary_matrices(int n, const DegOnePoly& g,
                                                       int j) {
  if (std::abs(j) >= n) throw Error("elementary_matrices: |j| must be < n");
  CMatrix theta = CMatrix::Zero(n, n);
  for (int m = 0; m < n; ++m) {
    const int c = m + j;
    if (c >= 0 && c < n) theta(m, c) = 1.0;
  }
  auto delta = [j](int k) -> Complex { return k == j ? 1.0 : 0.0; };
  CMatrix theta_g = detail::stencil_matrix(delta, n - 1, g);
  return {std::move(theta), std::move(theta_g)};
}

}  // namespace fsvd
