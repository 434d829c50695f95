#include <catch2/catch_amalgamated.hpp>

#include "fsvd/spectral.hpp"
#include "support.hpp"

using namespace fsvd;
using Catch::Matchers::WithinAbs;

namespace {

CVector signal(int n, const std::vector<std::pair<Complex, double>>& comps) {
  CVector y = CVector::Zero(n);
  for (const auto& [s, f] : comps) y += s * atom_vector(n, f);
  return y;
}

}  // namespace

TEST_CASE("atomic norm of a single in-band atom") {
  BandSet k({TorusInterval(0.2, 0.3)});
  auto res = fs_atomic_norm(signal(8, {{3.0, 0.25}}), k);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK_THAT(res.value, WithinAbs(3.0, 1e-6));
  // proof identity: the decomposition mass equals t_0 equals the norm
  CHECK_THAT(res.t.t0(), WithinAbs(3.0, 1e-5));
  CHECK_THAT(res.x, WithinAbs(3.0, 1e-5));
}

TEST_CASE("atomic norm of zero is zero") {
  BandSet k({TorusInterval(0.2, 0.3)});
  auto res = fs_atomic_norm(CVector::Zero(6), k);
  CHECK(std::fabs(res.value) < 1e-6);
  CHECK(res.t.coeffs().norm() < 1e-5);
}

TEST_CASE("out-of-band atom costs much more than one") {
  BandSet k({TorusInterval(0.2, 0.3)});
  auto res = fs_atomic_norm(signal(8, {{1.0, 0.5}}), k);
  CHECK(res.value >= 1.05);
}

TEST_CASE("atomic norm properties: homogeneity, triangle, upper bound") {
  testsup::Rng rng(501);
  BandSet k({TorusInterval(0.15, 0.65)});
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 5;
    CVector y1 = testsup::random_cvector(rng, n);
    CVector y2 = testsup::random_cvector(rng, n);
    const double v1 = fs_atomic_norm(y1, k).value;
    const double v2 = fs_atomic_norm(y2, k).value;

    const Complex c(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double vc = fs_atomic_norm(CVector(c * y1), k).value;
    CHECK_THAT(vc, WithinAbs(std::abs(c) * v1, 1e-6 * (1 + std::abs(c) * v1)));

    const double vsum = fs_atomic_norm(CVector(y1 + y2), k).value;
    CHECK(vsum <= v1 + v2 + 1e-6);
  }

  // feasibility upper bound: an explicit in-band decomposition caps the norm
  for (int rep = 0; rep < 5; ++rep) {
    const int n = 6;
    const Complex s1(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Complex s2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double f1 = rng.uniform(0.2, 0.4), f2 = rng.uniform(0.45, 0.6);
    auto res = fs_atomic_norm(signal(n, {{s1, f1}, {s2, f2}}), k);
    CHECK(res.value <= std::abs(s1) + std::abs(s2) + 1e-6);
  }
}

TEST_CASE("atomic norm is monotone in the band set") {
  testsup::Rng rng(503);
  BandSet small({TorusInterval(0.2, 0.5)});
  BandSet large({TorusInterval(0.1, 0.62)});
  for (int rep = 0; rep < 4; ++rep) {
    CVector y = testsup::random_cvector(rng, 5);
    const double vs = fs_atomic_norm(y, small).value;
    const double vl = fs_atomic_norm(y, large).value;
    CHECK(vl <= vs + 1e-6 * (1 + vs));
  }
}

TEST_CASE("proof-of-sdp identity on achieved decompositions") {
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 10;
  auto y = signal(n, {{Complex(1.2, 0.4), 0.22}, {Complex(0, -0.8), 0.27}});
  auto res = fs_atomic_norm(y, k);
  REQUIRE(res.status == SolveStatus::Optimal);
  auto freqs = retrieve_frequencies(res.band_moments, k);
  double mass = res.t.t0();
  CHECK_THAT(res.value, WithinAbs(0.5 * res.x + 0.5 * mass, 1e-9));
  CHECK_THAT(mass, WithinAbs(res.value, 1e-6 * (1 + res.value)));
  const double expect = std::abs(Complex(1.2, 0.4)) + 0.8;
  CHECK_THAT(res.value, WithinAbs(expect, 1e-5));
}

TEST_CASE("completion with full observation returns the data") {
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 12;
  auto y = signal(n, {{Complex(1, 0.5), 0.23}, {Complex(-0.3, 0.9), 0.28}});
  std::vector<int> omega(n);
  for (int i = 0; i < n; ++i) omega[i] = i;
  LSEProblem p(n, omega, y, k, 0.0);
  auto sol = fs_anm_complete(p);
  CHECK((sol.y_full - y).norm() < 1e-8);
  REQUIRE(sol.frequencies.size() == 2);
  CHECK(torus_distance(sol.frequencies[0], 0.23) < 1e-7);
  CHECK(torus_distance(sol.frequencies[1], 0.28) < 1e-7);
  CHECK((sol.amplitudes - (CVector(2) << Complex(1, 0.5), Complex(-0.3, 0.9)).finished())
            .norm() < 1e-6);
}

TEST_CASE("completion of a single atom from full data") {
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 8;
  auto y = signal(n, {{1.0, 0.25}});
  std::vector<int> omega(n);
  for (int i = 0; i < n; ++i) omega[i] = i;
  auto sol = fs_anm_complete(LSEProblem(n, omega, y, k, 0.0));
  CHECK_THAT(sol.atomic_norm, WithinAbs(1.0, 1e-6));
  REQUIRE(sol.frequencies.size() == 1);
  CHECK(torus_distance(sol.frequencies[0], 0.25) < 1e-7);
}

TEST_CASE("partial-data completion recovers close frequencies") {
  testsup::Rng rng(507);
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 32, m = 12;
  CVector y = signal(n, {{std::polar(1.0, two_pi * rng.uniform()), 0.22},
                         {std::polar(1.0, two_pi * rng.uniform()), 0.28}});
  auto omega = rng.sample_without_replacement(n, m);
  CVector yobs(m);
  for (int i = 0; i < m; ++i) yobs(i) = y(omega[i]);
  LSEProblem p(n, omega, yobs, k, 0.0);
  auto sol = fs_anm_complete(p);
  REQUIRE(sol.frequencies.size() == 2);
  CHECK(torus_distance(sol.frequencies[0], 0.22) < 1e-6);
  CHECK(torus_distance(sol.frequencies[1], 0.28) < 1e-6);
  CHECK((sol.y_full - y).norm() < 1e-4 * y.norm());

  // observed samples are interpolated exactly (solver tolerance)
  for (int i = 0; i < m; ++i)
    CHECK(std::abs(sol.y_full(omega[i]) - yobs(i)) < 1e-9);

  // the extracted dual vector certifies: |q| <= 1 on the band, ~1 at atoms
  REQUIRE(sol.dual_z.size() == n);
  double qmax = 0;
  for (int i = 0; i <= 2000; ++i) {
    const double f = k.bands[0].point_at(i / 2000.0);
    Complex q = 0;
    for (int kk = 0; kk < n; ++kk)
      q += std::conj(std::polar(1.0, two_pi * kk * f)) * sol.dual_z(kk);
    qmax = std::max(qmax, std::abs(q));
  }
  CHECK(qmax <= 1.0 + 1e-5);
  for (double f : sol.frequencies) {
    Complex q = 0;
    for (int kk = 0; kk < n; ++kk)
      q += std::conj(std::polar(1.0, two_pi * kk * f)) * sol.dual_z(kk);
    CHECK(std::abs(q) >= 1.0 - 1e-4);
  }
  // z vanishes off Omega
  std::vector<bool> obs(n, false);
  for (int idx : omega) obs[idx] = true;
  for (int kk = 0; kk < n; ++kk)
    if (!obs[kk]) CHECK(std::abs(sol.dual_z(kk)) < 1e-6);
}

TEST_CASE("noisy completion respects the energy ball") {
  testsup::Rng rng(509);
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 16, m = 10;
  CVector y = signal(n, {{Complex(1, 0), 0.24}, {Complex(0, 1), 0.29}});
  auto omega = rng.sample_without_replacement(n, m);
  CVector yobs(m);
  for (int i = 0; i < m; ++i) yobs(i) = y(omega[i]);
  // perturb within eta
  const double eta = 0.1;
  CVector noise = testsup::random_cvector(rng, m);
  yobs += noise * (0.5 * eta / noise.norm());
  auto sol = fs_anm_complete(LSEProblem(n, omega, yobs, k, eta));
  double dev = 0;
  for (int i = 0; i < m; ++i) dev += std::norm(sol.y_full(omega[i]) - yobs(i));
  CHECK(std::sqrt(dev) <= eta + 1e-6);
  REQUIRE(sol.frequencies.size() >= 1);
}

TEST_CASE("retrieve_frequencies edge cases") {
  BandSet k({TorusInterval(0.2, 0.3)});
  std::vector<MomentSequence> zero{MomentSequence(4, CVector::Zero(4))};
  CHECK(retrieve_frequencies(zero, k).empty());

  auto t = moments_from_measure(AtomicMeasure::from_atoms({{1.0, 0.25}}), 4);
  auto freqs = retrieve_frequencies({t}, k);
  REQUIRE(freqs.size() == 1);
  CHECK(torus_distance(freqs[0], 0.25) < 1e-9);

  CHECK_THROWS_AS(retrieve_frequencies({t, t}, k), Error);
}

TEST_CASE("recover_amplitudes examples") {
  const int n = 12;
  auto y = signal(n, {{2.0, 0.1}, {Complex(0, 1), 0.4}});
  auto s = recover_amplitudes(y, {0.1, 0.4});
  REQUIRE(s.size() == 2);
  CHECK(std::abs(s(0) - Complex(2, 0)) < 1e-10);
  CHECK(std::abs(s(1) - Complex(0, 1)) < 1e-10);

  // all Fourier frequencies: the design matrix is orthogonal, A^H A = N I
  testsup::Rng rng(511);
  CVector yr = testsup::random_cvector(rng, 8);
  std::vector<double> fourier;
  CMatrix a(8, 8);
  for (int j = 0; j < 8; ++j) {
    fourier.push_back(j / 8.0);
    a.col(j) = atom_vector(8, j / 8.0);
  }
  CHECK((CMatrix(a.adjoint() * a) - 8.0 * CMatrix::Identity(8, 8)).norm() < 1e-10);
  auto sf = recover_amplitudes(yr, fourier);
  CHECK((a * sf - yr).norm() < 1e-10);

  double resid = 0;
  auto empty = recover_amplitudes(CVector::Zero(4), {}, &resid);
  CHECK(empty.size() == 0);
  CHECK_THAT(resid, WithinAbs(0.0, 1e-15));

  CHECK_THROWS_AS(recover_amplitudes(y, {0.1, 0.1 + 1e-13}), Error);
}

TEST_CASE("dual_polynomial samples") {
  CVector e0 = CVector::Zero(5);
  e0(0) = 1;
  for (auto [f, q] : dual_polynomial(e0, 64)) CHECK_THAT(q, WithinAbs(1.0, 1e-12));

  const int n = 16;
  CVector z = atom_vector(n, 0.3) / double(n);
  auto samples = dual_polynomial(z, 1000);
  CHECK(samples.size() == 1001);
  double best_f = -1, best_q = 0;
  for (auto [f, q] : samples) {
    CHECK(q <= 1.0 + 1e-12);
    if (q > best_q) {
      best_q = q;
      best_f = f;
    }
  }
  CHECK_THAT(best_q, WithinAbs(1.0, 1e-6));
  CHECK(torus_distance(best_f, 0.3) < 1e-3);

  for (auto [f, q] : dual_polynomial(CVector::Zero(4), 32))
    CHECK_THAT(q, WithinAbs(0.0, 1e-15));
}

TEST_CASE("dual route matches the primal objective") {
  testsup::Rng rng(513);
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 14, m = 7;
  CVector y = signal(n, {{std::polar(1.0, two_pi * rng.uniform()), 0.23},
                         {std::polar(0.7, two_pi * rng.uniform()), 0.285}});
  auto omega = rng.sample_without_replacement(n, m);
  CVector yobs(m);
  for (int i = 0; i < m; ++i) yobs(i) = y(omega[i]);
  LSEProblem p(n, omega, yobs, k, 0.0);

  auto primal = fs_anm_complete(p);
  auto dual = fs_anm_dual(p);
  REQUIRE(dual.status == SolveStatus::Optimal);
  CHECK_THAT(dual.value, WithinAbs(primal.atomic_norm,
                                   1e-5 * (1 + primal.atomic_norm)));

  // the Gram pair certifies the unit bound on the band
  const int grid = 3000;
  for (int i = 0; i <= grid; ++i) {
    const double f = k.bands[0].point_at(double(i) / grid);
    Complex q = 0;
    for (int kk = 0; kk < n; ++kk)
      q += std::conj(std::polar(1.0, two_pi * kk * f)) * dual.z(kk);
    CHECK(std::abs(q) <= 1.0 + 1e-5);
  }
  // trace rows of the bounded real lemma hold at the solution
  auto g = g_from_interval(k.bands[0]);
  for (int j = 0; j < n; ++j) {
    auto [theta, theta_g] = elementary_matrices(n, g, j);
    Complex v = (theta * dual.q0).trace() + (theta_g * dual.q1).trace();
    if (j == 0)
      CHECK_THAT(v.real(), WithinAbs(1.0, 1e-5));
    else
      CHECK(std::abs(v) < 1e-5);
  }
  // z vanishes off Omega
  std::vector<bool> obs(n, false);
  for (int idx : omega) obs[idx] = true;
  for (int kk = 0; kk < n; ++kk)
    if (!obs[kk]) CHECK(std::abs(dual.z(kk)) < 1e-6);
}

TEST_CASE("dual of the zero signal is zero") {
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 8;
  std::vector<int> omega{0, 2, 4, 6};
  CVector yobs = CVector::Zero(4);
  auto dual = fs_anm_dual(LSEProblem(n, omega, yobs, k, 0.0));
  CHECK(std::fabs(dual.value) < 1e-6);
}

TEST_CASE("dual of a fully observed atom reaches its magnitude") {
  BandSet k({TorusInterval(0.2, 0.3)});
  const int n = 10;
  const Complex s(0.6, -0.8);
  auto y = signal(n, {{s, 0.26}});
  std::vector<int> omega(n);
  for (int i = 0; i < n; ++i) omega[i] = i;
  auto dual = fs_anm_dual(LSEProblem(n, omega, y, k, 0.0));
  CHECK_THAT(dual.value, WithinAbs(std::abs(s), 1e-5));
  Complex q = 0;
  for (int kk = 0; kk < n; ++kk)
    q += std::conj(std::polar(1.0, two_pi * kk * 0.26)) * dual.z(kk);
  CHECK_THAT(std::abs(q), WithinAbs(1.0, 1e-5));
}

TEST_CASE("fs_anm_dual rejects multiband problems") {
  BandSet k({TorusInterval(0.1, 0.2), TorusInterval(0.5, 0.6)});
  LSEProblem p(8, {0, 1, 2}, CVector::Zero(3), k, 0.0);
  CHECK_THROWS_AS(fs_anm_dual(p), Error);
}

TEST_CASE("root finding retrieval") {
  const int n = 16;
  CVector z = atom_vector(n, 0.3) / double(n);
  auto roots = root_finding_retrieval(z);
  bool found = false;
  for (double f : roots)
    if (torus_distance(f, 0.3) < 1e-6) found = true;
  CHECK(found);

  CVector small = 0.5 * z;
  CHECK(root_finding_retrieval(small).empty());

  CHECK_THROWS_AS(root_finding_retrieval(CVector::Zero(4)), Error);
}

TEST_CASE("atomic norm agrees with the fine-grid oracle") {
  testsup::Rng rng(517);
  BandSet k({TorusInterval(0.15, 0.65)});
  for (int rep = 0; rep < 3; ++rep) {
    const int n = 4 + rng.uniform_int(3);
    CVector y = testsup::random_cvector(rng, n);
    const double sdp_value = fs_atomic_norm(y, k).value;
    const double oracle = testsup::grid_l1_atomic_norm(y, k, 4000);
    CHECK_THAT(sdp_value, WithinAbs(oracle, 1e-3 * (1 + oracle)));
  }
}
