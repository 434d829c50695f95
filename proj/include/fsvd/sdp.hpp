#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "fsvd/core.hpp"

namespace fsvd {

/// [[Re H, -Im H], [Im H, Re H]]; PSD iff H is, eigenvalues doubled in
/// multiplicity.
inline RMatrix herm_to_real(const CMatrix& h) {
  if (h.rows() != h.cols()) throw Error("herm_to_real: matrix must be square");
  if (detail::herm_deviation(h) > 1e-10)
    throw Error("herm_to_real: matrix is not Hermitian");
  const auto n = h.rows();
  RMatrix e(2 * n, 2 * n);
  e.topLeftCorner(n, n) = h.real();
  e.bottomRightCorner(n, n) = h.real();
  e.topRightCorner(n, n) = -h.imag();
  e.bottomLeftCorner(n, n) = h.imag();
  return e;
}

/// Projects a real symmetric 2n x 2n dual block back to the Hermitian matrix
/// it embeds. Pairings satisfy <herm_to_real(A), Z> = 2 Re<A, herm_from_real(Z)>.
inline CMatrix herm_from_real(const RMatrix& z) {
  const auto n2 = z.rows();
  if (n2 % 2 != 0 || z.cols() != n2) throw Error("herm_from_real: bad dimensions");
  const auto n = n2 / 2;
  RMatrix a = 0.5 * (z.topLeftCorner(n, n) + z.bottomRightCorner(n, n));
  a = 0.5 * (a + a.transpose()).eval();
  RMatrix b = 0.5 * (z.bottomLeftCorner(n, n) - z.topRightCorner(n, n));
  b = 0.5 * (b - b.transpose()).eval();
  return a.cast<Complex>() + Complex(0, 1) * b.cast<Complex>();
}

enum class SolveStatus { Optimal, Infeasible, Unbounded, Inaccurate, Failed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::Inaccurate: return "inaccurate";
    case SolveStatus::Failed: return "failed";
  }
  return "?";
}

struct SolveOptions {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iter = 120;
  double step_fraction = 0.98;
  int verbose = 0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::Failed;
  RVector x;
  double objective_value = 0.0;
  /// Dual matrix per PSD block (Farkas certificate blocks when infeasible).
  std::vector<RMatrix> block_duals;
  RVector eq_duals;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string message;
};

/// Linear objective over real variables subject to affine PSD-block
/// constraints S0 + sum_i x_i S_i >= 0 and affine equalities A x = b.
/// Hermitian data enters through the real embedding helpers.
class ConicProgram {
 public:
  explicit ConicProgram(int num_vars)
      : num_vars_(num_vars), objective_(RVector::Zero(num_vars)) {
    if (num_vars < 1) throw Error("ConicProgram: need at least one variable");
  }

  int num_vars() const { return num_vars_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int block_dim(int b) const { return blocks_.at(b).dim; }
  const RVector& objective() const { return objective_; }

  void set_objective(int var, double coeff) {
    check_var(var);
    objective_(var) = coeff;
  }

  int add_block(int dim) {
    if (dim < 1) throw Error("ConicProgram: block dimension must be positive");
    blocks_.push_back(Block{dim, {}, {}});
    return static_cast<int>(blocks_.size()) - 1;
  }

  /// Accumulates v at (r,c) and, for r != c, at (c,r) of the constant term.
  void add_const_entry(int block, int r, int c, double v) {
    auto& bl = blocks_.at(block);
    check_rc(bl, r, c);
    bl.const_entries.emplace_back(r, c, v);
    if (r != c) bl.const_entries.emplace_back(c, r, v);
  }

  /// Accumulates v at (r,c) and, for r != c, at (c,r) of variable var's
  /// coefficient matrix.
  void add_entry(int block, int var, int r, int c, double v) {
    check_var(var);
    auto& bl = blocks_.at(block);
    check_rc(bl, r, c);
    bl.var_entries.emplace_back(VarEntry{var, r, c, v});
  }

  /// Hermitian contribution H[r,c] += v (and H[c,r] += conj(v)) to a block
  /// that holds the real embedding of a d x d Hermitian matrix; the block must
  /// have been created with dimension 2d.
  void add_herm_const_entry(int block, int r, int c, Complex v) {
    herm_emit(block, -1, r, c, v);
  }
  void add_herm_entry(int block, int var, int r, int c, Complex v) {
    check_var(var);
    herm_emit(block, var, r, c, v);
  }

  void add_equality(std::vector<std::pair<int, double>> terms, double rhs) {
    for (const auto& [var, coeff] : terms) {
      check_var(var);
      (void)coeff;
    }
    equalities_.push_back(Equality{std::move(terms), rhs});
  }

  int num_equalities() const { return static_cast<int>(equalities_.size()); }

 private:
  struct VarEntry {
    int var, r, c;
    double v;
  };
  struct Block {
    int dim;
    std::vector<Eigen::Triplet<double>> const_entries;
    std::vector<VarEntry> var_entries;
  };
  struct Equality {
    std::vector<std::pair<int, double>> terms;
    double rhs;
  };

  void check_var(int var) const {
    if (var < 0 || var >= num_vars_) throw Error("ConicProgram: variable index out of range");
  }
  static void check_rc(const Block& bl, int r, int c) {
    if (r < 0 || c < 0 || r >= bl.dim || c >= bl.dim)
      throw Error("ConicProgram: entry outside block");
  }

  void herm_emit(int block, int var, int r, int c, Complex v) {
    auto& bl = blocks_.at(block);
    if (bl.dim % 2 != 0)
      throw Error("ConicProgram: Hermitian entries need an even block dimension");
    const int d = bl.dim / 2;
    if (r < 0 || c < 0 || r >= d || c >= d)
      throw Error("ConicProgram: Hermitian entry outside block");
    auto emit = [&](int rr, int cc, double val) {
      if (val == 0.0) return;
      if (var < 0)
        add_const_entry(block, rr, cc, val);
      else
        add_entry(block, var, rr, cc, val);
    };
    if (r == c) {
      if (std::fabs(v.imag()) > 1e-14 * std::max(1.0, std::fabs(v.real())))
        throw Error("ConicProgram: Hermitian diagonal entry must be real");
      emit(r, r, v.real());
      emit(r + d, r + d, v.real());
    } else {
      emit(r, c, v.real());
      emit(r + d, c + d, v.real());
      emit(r, c + d, -v.imag());
      emit(c, r + d, v.imag());
    }
  }

  int num_vars_;
  RVector objective_;
  std::vector<Block> blocks_;
  std::vector<Equality> equalities_;

  friend SolveReport solve(const ConicProgram&, const SolveOptions&);
};

namespace detail::ipm {

using SpMat = Eigen::SparseMatrix<double>;
using GMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BlockData {
  int dim = 0;
  RMatrix f0;
  std::vector<SpMat> fi;  // one (possibly empty) coefficient per variable
};

struct IterState {
  RVector x;
  std::vector<RMatrix> s;
  std::vector<RMatrix> z;
  double relgap = std::numeric_limits<double>::infinity();
  double pinf = std::numeric_limits<double>::infinity();
  double dinf = std::numeric_limits<double>::infinity();
  double pobj = 0.0;
  double dobj = 0.0;
};

struct IpmResult {
  IterState best;
  bool converged = false;
  int iterations = 0;
  std::string note;
};

inline int svec_len(int n) { return n * (n + 1) / 2; }

inline void svec_into(const RMatrix& a, double* out) {
  const int n = static_cast<int>(a.rows());
  int idx = 0;
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < c; ++r) out[idx++] = a(r, c) * std::numbers::sqrt2;
    out[idx++] = a(c, c);
  }
}

inline RMatrix unsvec(const double* v, int n) {
  RMatrix a(n, n);
  int idx = 0;
  const double inv = 1.0 / std::numbers::sqrt2;
  for (int c = 0; c < n; ++c) {
    for (int r = 0; r < c; ++r) {
      a(r, c) = v[idx] * inv;
      a(c, r) = a(r, c);
      ++idx;
    }
    a(c, c) = v[idx++];
  }
  return a;
}

inline double sparse_dot(const SpMat& a, const RMatrix& b) {
  double s = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) s += it.value() * b(it.row(), it.col());
  return s;
}

/// Largest step a with lam + a*D >= 0 in the scaled metric, lam > 0 diagonal.
inline double max_step_scaled(const RVector& lam, const RMatrix& d) {
  const int n = static_cast<int>(lam.size());
  RMatrix l(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) l(r, c) = d(r, c) / std::sqrt(lam(r) * lam(c));
  Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (l + l.transpose()),
                                            Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline bool chol_ok(const RMatrix& a) {
  Eigen::LLT<RMatrix> llt(a);
  return llt.info() == Eigen::Success;
}

/// NT-scaled Mehrotra predictor-corrector on
///   min c^T x  s.t.  f0_k + sum_i x_i fi_k >= 0.
inline IpmResult run(const std::vector<BlockData>& blocks, const RVector& c,
                     const SolveOptions& opts) {
  const int m = static_cast<int>(c.size());
  const int nblocks = static_cast<int>(blocks.size());
  int ntot = 0;
  for (const auto& b : blocks) ntot += b.dim;

  std::vector<double> fi_norm(m, 0.0);
  double f0_norm_max = 0.0;
  for (const auto& b : blocks) {
    f0_norm_max = std::max(f0_norm_max, b.f0.norm());
    for (int i = 0; i < m; ++i)
      if (b.fi[i].nonZeros() > 0) fi_norm[i] = std::max(fi_norm[i], b.fi[i].norm());
  }
  double fi_norm_max = 0.0;
  double ratio_max = 0.0;
  for (int i = 0; i < m; ++i) {
    fi_norm_max = std::max(fi_norm_max, fi_norm[i]);
    ratio_max = std::max(ratio_max, (1.0 + std::fabs(c(i))) / (1.0 + fi_norm[i]));
  }
  const double eta = std::max({1.0, f0_norm_max, fi_norm_max});
  const double xi = std::max({1.0, std::sqrt(double(ntot)), double(ntot) * ratio_max});

  IterState cur;
  cur.x = RVector::Zero(m);
  for (const auto& b : blocks) {
    cur.s.push_back(RMatrix::Identity(b.dim, b.dim) * eta);
    cur.z.push_back(RMatrix::Identity(b.dim, b.dim) * xi);
  }

  IpmResult res;
  int best_it = 0;
  const double cnorm = c.norm();

  std::vector<RMatrix> rp(nblocks);
  RVector rd(m);

  auto compute_rd = [&](const std::vector<RMatrix>& z) {
    RVector out = -c;
    for (int k = 0; k < nblocks; ++k)
      for (int i = 0; i < m; ++i)
        if (blocks[k].fi[i].nonZeros() > 0) out(i) += sparse_dot(blocks[k].fi[i], z[k]);
    return out;
  };

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    for (int k = 0; k < nblocks; ++k) {
      rp[k] = blocks[k].f0 - cur.s[k];
      for (int i = 0; i < m; ++i)
        if (blocks[k].fi[i].nonZeros() > 0 && cur.x(i) != 0.0)
          rp[k] += cur.x(i) * RMatrix(blocks[k].fi[i]);
    }
    rd = compute_rd(cur.z);

    double gap = 0.0;
    cur.pobj = c.dot(cur.x);
    cur.dobj = 0.0;
    double pinf = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      gap += cur.s[k].cwiseProduct(cur.z[k]).sum();
      cur.dobj -= blocks[k].f0.cwiseProduct(cur.z[k]).sum();
      pinf = std::max(pinf, rp[k].norm() / (1.0 + blocks[k].f0.norm()));
    }
    const double mu = gap / ntot;
    cur.relgap = gap / std::max({1.0, std::fabs(cur.pobj), std::fabs(cur.dobj)});
    cur.pinf = pinf;
    cur.dinf = rd.norm() / (1.0 + cnorm);

    if (opts.verbose > 0) {
      std::fprintf(stderr,
                   "  ipm %3d  pobj % .10e  dobj % .10e  gap %.2e  pinf %.2e  dinf %.2e\n",
                   it, cur.pobj, cur.dobj, cur.relgap, cur.pinf, cur.dinf);
    }

    const double merit = std::max({cur.relgap, cur.pinf, cur.dinf});
    const double best_merit =
        std::max({res.best.relgap, res.best.pinf, res.best.dinf});
    if (it == 0 || merit < 0.9 * best_merit) {
      res.best = cur;
      best_it = it;
    }
    if (cur.relgap <= opts.tol_gap && cur.pinf <= opts.tol_feas &&
        cur.dinf <= opts.tol_feas) {
      res.best = cur;
      res.converged = true;
      return res;
    }
    if (it - best_it > 10) {
      res.note = "stalled";
      return res;
    }

    // NT scaling: R = S^{1/2} U D^{-1/4}, Ri = D^{1/4} U^T S^{-1/2},
    // lambda = D^{1/2} with D the spectrum of S^{1/2} Z S^{1/2}.
    std::vector<RMatrix> r_mat(nblocks), ri_mat(nblocks);
    std::vector<RVector> lam(nblocks);
    for (int k = 0; k < nblocks; ++k) {
      Eigen::SelfAdjointEigenSolver<RMatrix> es(cur.s[k]);
      if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
        res.note = "scaling breakdown (S)";
        return res;
      }
      RVector w = es.eigenvalues();
      RMatrix sh = es.eigenvectors() * w.cwiseSqrt().asDiagonal() *
                   es.eigenvectors().transpose();
      RMatrix shi = es.eigenvectors() * w.cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
      RMatrix m2 = sh * cur.z[k] * sh;
      Eigen::SelfAdjointEigenSolver<RMatrix> es2(0.5 * (m2 + m2.transpose()));
      if (es2.info() != Eigen::Success || es2.eigenvalues().minCoeff() <= 0.0) {
        res.note = "scaling breakdown (SZ)";
        return res;
      }
      RVector d = es2.eigenvalues();
      RVector dq = d.array().pow(0.25).matrix();
      r_mat[k] = sh * es2.eigenvectors() * dq.cwiseInverse().asDiagonal();
      ri_mat[k] = dq.asDiagonal() * es2.eigenvectors().transpose() * shi;
      lam[k] = d.cwiseSqrt();
    }

    // scaled coefficients G and Schur complement M = sum_k G_k G_k^T
    std::vector<GMatrix> g(nblocks);
    std::vector<RMatrix> rps(nblocks);
    RMatrix schur = RMatrix::Zero(m, m);
    for (int k = 0; k < nblocks; ++k) {
      const int n = blocks[k].dim;
      const int len = svec_len(n);
      g[k].resize(m, len);
      const RMatrix& ri = ri_mat[k];
      RMatrix y(n, n);
      for (int i = 0; i < m; ++i) {
        const SpMat& fi = blocks[k].fi[i];
        if (fi.nonZeros() == 0) {
          g[k].row(i).setZero();
          continue;
        }
        RMatrix xm = ri * fi;  // n x n, nonzero only on fi's column support
        std::vector<int> supp;
        for (int col = 0; col < fi.outerSize(); ++col)
          if (SpMat::InnerIterator(fi, col)) supp.push_back(col);
        if (static_cast<int>(supp.size()) * 3 < 2 * n) {
          y.setZero();
          for (int colv : supp) y.noalias() += xm.col(colv) * ri.col(colv).transpose();
        } else {
          y.noalias() = xm * ri.transpose();
        }
        y = 0.5 * (y + y.transpose()).eval();
        svec_into(y, g[k].row(i).data());
      }
      schur.noalias() += g[k] * g[k].transpose();
      rps[k] = ri * rp[k] * ri.transpose();
      rps[k] = 0.5 * (rps[k] + rps[k].transpose()).eval();
    }
    schur = 0.5 * (schur + schur.transpose()).eval();

    Eigen::LLT<RMatrix> llt;
    double ridge = schur.trace() / m * 1e-15;
    for (int attempt = 0; attempt < 4; ++attempt) {
      llt.compute(schur + ridge * RMatrix::Identity(m, m));
      if (llt.info() == Eigen::Success) break;
      ridge *= 100.0;
    }
    if (llt.info() != Eigen::Success) {
      res.note = "Schur factorization failed";
      return res;
    }
    auto msolve = [&](const RVector& r) {
      RVector d = llt.solve(r);
      d += llt.solve(r - schur * d);
      d += llt.solve(r - schur * d);
      return d;
    };

    auto linv = [&](int k, const RMatrix& v) {
      const int n = blocks[k].dim;
      RMatrix out(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) out(a, b) = 2.0 * v(a, b) / (lam[k](a) + lam[k](b));
      return out;
    };

    auto solve_dir = [&](const std::vector<RMatrix>& rc, RVector& dx,
                         std::vector<RMatrix>& dls, std::vector<RMatrix>& dlz) {
      RVector rhs = rd;
      std::vector<RMatrix> h(nblocks);
      RVector tmp(0);
      for (int k = 0; k < nblocks; ++k) {
        h[k] = linv(k, rc[k]) - rps[k];
        RVector hv(svec_len(blocks[k].dim));
        svec_into(h[k], hv.data());
        rhs.noalias() += g[k] * hv;
      }
      dx = msolve(rhs);
      dls.resize(nblocks);
      dlz.resize(nblocks);
      for (int k = 0; k < nblocks; ++k) {
        RVector gv = g[k].transpose() * dx;
        RMatrix d = unsvec(gv.data(), blocks[k].dim) + rps[k];
        dls[k] = 0.5 * (d + d.transpose());
        dlz[k] = linv(k, rc[k]) - dls[k];
        dlz[k] = 0.5 * (dlz[k] + dlz[k].transpose()).eval();
      }
    };

    // predictor
    std::vector<RMatrix> rc(nblocks);
    for (int k = 0; k < nblocks; ++k) {
      rc[k] = RMatrix::Zero(blocks[k].dim, blocks[k].dim);
      rc[k].diagonal() = -lam[k].cwiseProduct(lam[k]);
    }
    RVector dxa;
    std::vector<RMatrix> dlsa, dlza;
    solve_dir(rc, dxa, dlsa, dlza);
    double ap = 1.0, ad = 1.0;
    for (int k = 0; k < nblocks; ++k) {
      ap = std::min(ap, max_step_scaled(lam[k], dlsa[k]));
      ad = std::min(ad, max_step_scaled(lam[k], dlza[k]));
    }
    double gap_aff = 0.0;
    for (int k = 0; k < nblocks; ++k) {
      RMatrix l1 = RMatrix(lam[k].asDiagonal()) + ap * dlsa[k];
      RMatrix l2 = RMatrix(lam[k].asDiagonal()) + ad * dlza[k];
      gap_aff += l1.cwiseProduct(l2).sum();
    }
    const double mu_aff = gap_aff / ntot;
    const double sigma =
        std::min(1.0, std::max(std::pow(mu_aff / mu, 3.0), 1e-12));

    // corrector
    for (int k = 0; k < nblocks; ++k) {
      RMatrix cor = 0.5 * (dlsa[k] * dlza[k] + dlza[k] * dlsa[k]);
      rc[k] = -cor;
      rc[k].diagonal() += sigma * mu * RVector::Ones(blocks[k].dim) -
                          lam[k].cwiseProduct(lam[k]);
    }
    RVector dx;
    std::vector<RMatrix> dls, dlz;
    solve_dir(rc, dx, dls, dlz);
    ap = ad = 1.0;
    for (int k = 0; k < nblocks; ++k) {
      ap = std::min(ap, max_step_scaled(lam[k], dls[k]));
      ad = std::min(ad, max_step_scaled(lam[k], dlz[k]));
    }
    ap = std::min(opts.step_fraction * ap, 1.0);
    ad = std::min(opts.step_fraction * ad, 1.0);

    cur.x += ap * dx;
    for (int k = 0; k < nblocks; ++k) {
      RMatrix ds = r_mat[k] * dls[k] * r_mat[k].transpose();
      RMatrix dzm = ri_mat[k].transpose() * dlz[k] * ri_mat[k];
      cur.s[k] += ap * ds;
      cur.s[k] = 0.5 * (cur.s[k] + cur.s[k].transpose()).eval();
      cur.z[k] += ad * dzm;
      cur.z[k] = 0.5 * (cur.z[k] + cur.z[k].transpose()).eval();
    }

    // dual-feasibility restoration in the NT metric: the correction solves the
    // linear dual constraints exactly; a trust-region cap and a Cholesky check
    // keep Z inside the cone.
    for (int round = 0; round < 2; ++round) {
      RVector rd_new = compute_rd(cur.z);
      if (rd_new.norm() <= 1e-14 * (1.0 + cnorm)) break;
      RVector delta = msolve(-rd_new);
      std::vector<RMatrix> corr(nblocks);
      double cap = 1.0;
      for (int k = 0; k < nblocks; ++k) {
        RVector gv = g[k].transpose() * delta;
        corr[k] = unsvec(gv.data(), blocks[k].dim);
        corr[k] = 0.5 * (corr[k] + corr[k].transpose()).eval();
        const double cn = corr[k].norm();
        if (cn > 0.0) cap = std::min(cap, 0.8 * lam[k].minCoeff() / cn);
      }
      bool applied = false;
      for (int attempt = 0; attempt < 3 && !applied; ++attempt) {
        std::vector<RMatrix> trial(nblocks);
        bool ok = true;
        for (int k = 0; k < nblocks; ++k) {
          trial[k] = cur.z[k] + cap * (ri_mat[k].transpose() * corr[k] * ri_mat[k]);
          trial[k] = 0.5 * (trial[k] + trial[k].transpose()).eval();
          if (!chol_ok(trial[k])) {
            ok = false;
            break;
          }
        }
        if (ok) {
          cur.z = std::move(trial);
          applied = true;
        } else {
          cap *= 0.25;
        }
      }
      if (!applied) break;
    }
  }
  res.note = "iteration limit";
  return res;
}

}  // namespace detail::ipm

namespace detail {

struct AssembledProgram {
  std::vector<ipm::BlockData> blocks;
  RVector c;
};

/// Farkas-type infeasibility certificate check: Z >= 0 (by construction),
/// <F_i, Z> ~ 0 for all i and <F_0, Z> < 0 after trace normalization.
inline bool certifies_infeasibility(const AssembledProgram& prog,
                                    const std::vector<RMatrix>& z) {
  double tr = 0.0;
  for (const auto& zk : z) tr += zk.trace();
  if (!(tr > 0.0)) return false;
  double lin = 0.0;
  for (int i = 0; i < prog.c.size(); ++i) {
    double v = 0.0;
    for (std::size_t k = 0; k < prog.blocks.size(); ++k)
      if (prog.blocks[k].fi[i].nonZeros() > 0)
        v += ipm::sparse_dot(prog.blocks[k].fi[i], z[k]);
    lin = std::max(lin, std::fabs(v) / tr);
  }
  double v0 = 0.0;
  for (std::size_t k = 0; k < prog.blocks.size(); ++k)
    v0 += prog.blocks[k].f0.cwiseProduct(z[k]).sum();
  v0 /= tr;
  return lin <= 1e-6 && v0 <= -1e-8;
}

}  // namespace detail

/// Solves the conic program with the built-in NT-scaled interior-point method.
/// Pure feasibility problems (zero objective) run a phase-I margin
/// maximization; infeasibility is reported only with a Farkas certificate.
inline SolveReport solve(const ConicProgram& prog, const SolveOptions& opts = {}) {
  using detail::ipm::BlockData;
  using detail::ipm::SpMat;

  const int m = prog.num_vars_;
  const int nblocks = prog.num_blocks();
  if (nblocks == 0) throw Error("solve: program has no PSD blocks");

  // dense equality matrix (equality counts stay small in this library)
  const int q = prog.num_equalities();
  RMatrix a(q, m);
  RVector b(q);
  a.setZero();
  for (int r = 0; r < q; ++r) {
    for (const auto& [var, coeff] : prog.equalities_[r].terms) a(r, var) += coeff;
    b(r) = prog.equalities_[r].rhs;
  }

  RVector x_part = RVector::Zero(m);
  RMatrix null_basis;  // empty when there are no equalities
  int m_red = m;
  if (q > 0) {
    Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(a);
    x_part = cod.solve(b);
    if ((a * x_part - b).norm() > 1e-9 * (1.0 + b.norm())) {
      SolveReport rep;
      rep.status = SolveStatus::Infeasible;
      rep.message = "equality constraints are inconsistent";
      return rep;
    }
    const int rank = static_cast<int>(cod.rank());
    Eigen::HouseholderQR<RMatrix> qr(a.transpose());
    RMatrix qfull = qr.householderQ();
    null_basis = qfull.rightCols(m - rank);
    m_red = m - rank;
    if (m_red == 0) {
      // fully determined by the equalities; check cone membership
      SolveReport rep;
      rep.x = x_part;
      rep.objective_value = prog.objective_.dot(x_part);
      bool ok = true;
      for (int k = 0; k < nblocks; ++k) {
        RMatrix f = RMatrix::Zero(prog.blocks_[k].dim, prog.blocks_[k].dim);
        for (const auto& t : prog.blocks_[k].const_entries)
          f(t.row(), t.col()) += t.value();
        for (const auto& e : prog.blocks_[k].var_entries) {
          f(e.r, e.c) += x_part(e.var) * e.v;
          if (e.r != e.c) f(e.c, e.r) += x_part(e.var) * e.v;
        }
        Eigen::SelfAdjointEigenSolver<RMatrix> es(f, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -opts.tol_feas * std::max(1.0, f.norm()))
          ok = false;
      }
      rep.status = ok ? SolveStatus::Optimal : SolveStatus::Infeasible;
      if (!ok) rep.message = "equality-determined point violates the cone";
      return rep;
    }
  }

  // assemble reduced blocks: F~_0 = F_0 + sum_i xpart_i F_i,
  // F~_j = sum_i N(i,j) F_i (identity mapping without equalities)
  detail::AssembledProgram red;
  red.c = RVector::Zero(m_red);
  if (q > 0)
    red.c = null_basis.transpose() * prog.objective_;
  else
    red.c = prog.objective_;

  for (int k = 0; k < nblocks; ++k) {
    const auto& bl = prog.blocks_[k];
    BlockData bd;
    bd.dim = bl.dim;
    RMatrix f0 = RMatrix::Zero(bl.dim, bl.dim);
    for (const auto& t : bl.const_entries) f0(t.row(), t.col()) += t.value();
    if (q > 0) {
      for (const auto& e : bl.var_entries) {
        const double v = x_part(e.var) * e.v;
        f0(e.r, e.c) += v;
        if (e.r != e.c) f0(e.c, e.r) += v;
      }
    }
    bd.f0 = 0.5 * (f0 + f0.transpose()).eval();
    bd.fi.resize(m_red, SpMat(bl.dim, bl.dim));
    if (q > 0) {
      std::vector<RMatrix> dense(m_red);
      std::vector<bool> used(m_red, false);
      for (const auto& e : bl.var_entries) {
        for (int j = 0; j < m_red; ++j) {
          const double w = null_basis(e.var, j) * e.v;
          if (w == 0.0) continue;
          if (!used[j]) {
            dense[j] = RMatrix::Zero(bl.dim, bl.dim);
            used[j] = true;
          }
          dense[j](e.r, e.c) += w;
          if (e.r != e.c) dense[j](e.c, e.r) += w;
        }
      }
      for (int j = 0; j < m_red; ++j)
        if (used[j]) bd.fi[j] = dense[j].sparseView(1.0, 1e-300);
    } else {
      std::vector<std::vector<Eigen::Triplet<double>>> trip(m_red);
      for (const auto& e : bl.var_entries) {
        trip[e.var].emplace_back(e.r, e.c, e.v);
        if (e.r != e.c) trip[e.var].emplace_back(e.c, e.r, e.v);
      }
      for (int j = 0; j < m_red; ++j)
        if (!trip[j].empty())
          bd.fi[j].setFromTriplets(trip[j].begin(), trip[j].end());
    }
    red.blocks.push_back(std::move(bd));
  }

  auto lift = [&](const RVector& xr) {
    return q > 0 ? RVector(x_part + null_basis * xr) : xr;
  };

  auto finish = [&](SolveReport rep, const detail::ipm::IterState& st,
                    int iters) {
    rep.x = lift(st.x);
    rep.objective_value = prog.objective_.dot(rep.x);
    rep.block_duals = st.z;
    rep.primal_residual = st.pinf;
    rep.dual_residual = st.dinf;
    rep.gap = st.relgap;
    rep.iterations = iters;
    if (q > 0) {
      RVector adj = RVector::Zero(m);
      for (int i = 0; i < m; ++i) {
        // adjoint against the original coefficients
        double v = 0.0;
        for (int k = 0; k < nblocks; ++k) {
          for (const auto& e : prog.blocks_[k].var_entries) {
            if (e.var != i) continue;
            v += e.v * st.z[k](e.r, e.c);
            if (e.r != e.c) v += e.v * st.z[k](e.c, e.r);
          }
        }
        adj(i) = v;
      }
      rep.eq_duals = a.transpose()
                         .colPivHouseholderQr()
                         .solve(prog.objective_ - adj);
    }
    return rep;
  };

  const double cscale = red.c.cwiseAbs().maxCoeff();
  const bool feasibility_only = cscale <= 1e-14;

  if (feasibility_only) {
    // phase-I: min lambda s.t. F~(z) + lambda I >= 0, lambda >= -1
    detail::AssembledProgram ph;
    const int mp = m_red + 1;
    ph.c = RVector::Zero(mp);
    ph.c(m_red) = 1.0;
    for (const auto& bd : red.blocks) {
      BlockData nb;
      nb.dim = bd.dim;
      nb.f0 = bd.f0;
      nb.fi = bd.fi;
      nb.fi.resize(mp, SpMat(bd.dim, bd.dim));
      SpMat eye(bd.dim, bd.dim);
      eye.setIdentity();
      nb.fi[m_red] = eye;
      ph.blocks.push_back(std::move(nb));
    }
    BlockData bound;
    bound.dim = 1;
    bound.f0 = RMatrix::Ones(1, 1);
    bound.fi.resize(mp, SpMat(1, 1));
    SpMat one(1, 1);
    one.insert(0, 0) = 1.0;
    bound.fi[m_red] = one;
    ph.blocks.push_back(std::move(bound));

    auto r = detail::ipm::run(ph.blocks, ph.c, opts);
    SolveReport rep;
    rep.iterations = r.iterations;
    const double lambda = r.best.x(m_red);
    const double margin = std::max(1e-7, 10 * opts.tol_feas);
    if ((r.converged || r.best.relgap < 1e-6) && lambda < -margin) {
      detail::ipm::IterState st;
      st.x = r.best.x.head(m_red);
      st.pinf = r.best.pinf;
      st.dinf = r.best.dinf;
      st.relgap = r.best.relgap;
      std::vector<RMatrix> zs(r.best.z.begin(), r.best.z.end() - 1);
      st.z = zs;
      st.s = std::vector<RMatrix>(r.best.s.begin(), r.best.s.end() - 1);
      rep.status = SolveStatus::Optimal;
      rep.message = "feasible (phase-I margin " + std::to_string(-lambda) + ")";
      return finish(std::move(rep), st, r.iterations);
    }
    if (lambda > margin || (r.converged && lambda > 0.25 * margin)) {
      std::vector<RMatrix> zs(r.best.z.begin(), r.best.z.end() - 1);
      if (detail::certifies_infeasibility(red, zs)) {
        rep.status = SolveStatus::Infeasible;
        rep.block_duals = zs;
        rep.message = "phase-I margin " + std::to_string(lambda) +
                      "; Farkas certificate verified";
        rep.x = lift(r.best.x.head(m_red));
        return rep;
      }
    }
    rep.status = SolveStatus::Inaccurate;
    rep.x = lift(r.best.x.head(m_red));
    rep.message = "phase-I inconclusive (margin " + std::to_string(lambda) + ")";
    return rep;
  }

  auto r = detail::ipm::run(red.blocks, red.c, opts);
  SolveReport rep;
  if (r.converged) {
    rep.status = SolveStatus::Optimal;
    return finish(std::move(rep), r.best, r.iterations);
  }
  // no convergence: certified infeasibility, else graded failure
  if (detail::certifies_infeasibility(red, r.best.z)) {
    rep.status = SolveStatus::Infeasible;
    rep.block_duals = r.best.z;
    rep.message = "Farkas certificate verified";
    rep.iterations = r.iterations;
    return rep;
  }
  const double merit = std::max({r.best.relgap, r.best.pinf, r.best.dinf});
  if (r.best.pobj < -1e14 * std::max(1.0, red.c.norm()) && r.best.pinf < 1e-6) {
    rep.status = SolveStatus::Unbounded;
    rep.message = "objective diverges";
    rep.iterations = r.iterations;
    return rep;
  }
  rep = finish(std::move(rep), r.best, r.iterations);
  rep.status = (merit < 1e-4) ? SolveStatus::Inaccurate : SolveStatus::Failed;
  rep.message = r.note;
  return rep;
}

}  // namespace fsvd
