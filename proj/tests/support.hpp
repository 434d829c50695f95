#pragma once

// Shared helpers for the test suites: a deterministic RNG, random measure
// generators and the independent fine-grid l1 oracle used to cross-check the
// SDP route of the frequency-selective atomic norm.

#include <cstdint>
#include <vector>

#include "fsvd/core.hpp"
#include "fsvd/sdp.hpp"

namespace testsup {

using fsvd::Complex;
using fsvd::CVector;

/// xoshiro-free deterministic generator: splitmix64-seeded mt19937_64 with
/// explicit real/int mappings so draws are identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// uniform in [0, 1)
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int n) { return int(next_u64() % std::uint64_t(n)); }

  /// k distinct indices from {0..n-1}, sorted
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  std::uint64_t state_;
};

/// Random atoms with pairwise torus separation at least min_sep, drawn inside
/// the given interval (or the whole torus).
inline fsvd::AtomicMeasure random_measure(Rng& rng, int r, double min_sep,
                                          const fsvd::TorusInterval* band = nullptr) {
  std::vector<fsvd::AtomicMeasure::Atom> atoms;
  int guard = 0;
  while (static_cast<int>(atoms.size()) < r) {
    if (++guard > 10000) throw std::runtime_error("random_measure: separation too strict");
    double f = band ? band->point_at(rng.uniform()) : rng.uniform();
    bool ok = true;
    for (const auto& a : atoms)
      if (fsvd::torus_distance(a.f, f) < min_sep) ok = false;
    if (!ok) continue;
    atoms.push_back({rng.uniform(0.2, 3.0), f});
  }
  return fsvd::AtomicMeasure::from_atoms(std::move(atoms));
}

inline CVector random_cvector(Rng& rng, int n) {
  CVector y(n);
  for (int i = 0; i < n; ++i) y(i) = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
  return y;
}

/// Independent oracle for the FS atomic norm: value of the grid-restricted
/// l1 program min ||s||_1 s.t. sum_g s_g a(f_g) = y, computed through its dual
///   max Re(z^H y)  s.t.  |a(f_g)^H z| <= 1 for every grid point,
/// with each modulus constraint a 2x2 Hermitian PSD block. Builds on the sdp
/// module only; shares nothing with the spectral formulation it checks.
inline double grid_l1_atomic_norm(const CVector& y, const fsvd::BandSet& bands,
                                  int grid_per_band = 10000) {
  const int n = static_cast<int>(y.size());
  const int m = 2 * n;  // Re z, Im z
  fsvd::ConicProgram prog(m);
  // maximize Re(z^H y) = sum_k Re(conj(z_k) y_k)  ->  minimize the negative
  for (int k = 0; k < n; ++k) {
    prog.set_objective(2 * k, -y(k).real());
    prog.set_objective(2 * k + 1, -y(k).imag());
  }
  for (const auto& band : bands.bands) {
    for (int gidx = 0; gidx < grid_per_band; ++gidx) {
      const double f = band.point_at(double(gidx) / (grid_per_band - 1));
      const CVector a = fsvd::atom_vector(n, f);
      const int blk = prog.add_block(4);  // embeds [[1, q*],[q, 1]], q = a^H z
      prog.add_herm_const_entry(blk, 0, 0, 1.0);
      prog.add_herm_const_entry(blk, 1, 1, 1.0);
      // q = sum_k conj(a_k) z_k
      for (int k = 0; k < n; ++k) {
        const Complex ac = std::conj(a(k));
        prog.add_herm_entry(blk, 2 * k, 1, 0, ac);
        prog.add_herm_entry(blk, 2 * k + 1, 1, 0, ac * Complex(0, 1));
      }
    }
  }
  fsvd::SolveOptions opts;
  opts.tol_gap = 1e-9;
  opts.tol_feas = 1e-9;
  auto rep = fsvd::solve(prog, opts);
  if (rep.status != fsvd::SolveStatus::Optimal &&
      rep.status != fsvd::SolveStatus::Inaccurate)
    throw std::runtime_error("grid_l1_atomic_norm: solve failed");
  return -rep.objective_value;
}

}  // namespace testsup
