#include "specdeform/eigensolver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "specdeform/error.hpp"
#include "specdeform/random.hpp"

namespace specdeform {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Orthogonalize `w` against the first `k` columns of `q` (two classical
// Gram-Schmidt passes). Returns the accumulated projection coefficients.
VectorXd orthogonalize(const MatrixXd& q, Index k, Eigen::Ref<VectorXd> w) {
  VectorXd coeffs = VectorXd::Zero(k);
  if (k == 0) return coeffs;
  for (int pass = 0; pass < 2; ++pass) {
    const VectorXd c = q.leftCols(k).transpose() * w;
    w.noalias() -= q.leftCols(k) * c;
    coeffs += c;
  }
  return coeffs;
}

// Fills column `k` of `q` with a random unit vector orthogonal to columns
// [0, k). Returns false when no such vector exists numerically.
bool random_orthogonal_column(MatrixXd& q, Index k, Rng& rng) {
  const Index n = q.rows();
  if (k >= n) return false;
  for (int attempt = 0; attempt < 4; ++attempt) {
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) w[i] = rng.uniform(-1.0, 1.0);
    const double before = w.norm();
    orthogonalize(q, k, w);
    const double after = w.norm();
    if (after > 1e-8 * before) {
      q.col(k) = w / after;
      return true;
    }
  }
  return false;
}

}  // namespace

EigenPairs dense_smallest(const SparseSymmetricMatrix& op, Index count) {
  const Index n = op.dimension();
  if (count < 1 || count > n)
    throw Error(ErrorKind::Usage, "requested " + std::to_string(count) + " eigenpairs of a " + std::to_string(n) +
                                      "-dimensional operator");
  const MatrixXd dense = MatrixXd(op.matrix());
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(dense);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::Numerical, "dense eigensolver failed to converge");
  return {solver.eigenvalues().head(count), solver.eigenvectors().leftCols(count)};
}

Eigen::VectorXd eigen_residuals(const SparseSymmetricMatrix& op, const EigenPairs& pairs) {
  const MatrixXd av = op.matrix() * pairs.vectors;
  VectorXd res(pairs.values.size());
  for (Index i = 0; i < res.size(); ++i) res[i] = (av.col(i) - pairs.values[i] * pairs.vectors.col(i)).norm();
  return res;
}

EigenPairs lanczos_smallest(const SparseSymmetricMatrix& op, Index count, const LanczosOptions& options,
                            LanczosReport* report) {
  const Index n = op.dimension();
  if (count < 1 || count > n)
    throw Error(ErrorKind::Usage, "requested " + std::to_string(count) + " eigenpairs of a " + std::to_string(n) +
                                      "-dimensional operator");
  const Index block = std::max<Index>(1, std::min<Index>(options.block_size, n));
  const Index cap = options.max_dimension > 0 ? std::min(options.max_dimension, n)
                                              : std::min(n, std::max(4 * count, count + 400));
  if (cap < count) throw Error(ErrorKind::Usage, "Krylov dimension cap below requested eigenpair count");

  // Shift-invert around a small positive shift: L + sigma I is positive
  // definite for a positive semi-definite L.
  const VectorXd diag = op.matrix().diagonal();
  const double scale = diag.cwiseAbs().mean() > 0 ? diag.cwiseAbs().mean() : 1.0;
  const double sigma = 1e-6 * scale;
  Eigen::SparseMatrix<double> shifted = op.matrix();
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted);
  if (factor.info() != Eigen::Success)
    throw Error(ErrorKind::Numerical, "factorization of the shifted operator failed (operator not positive semi-definite?)");

  Rng rng(options.seed);
  MatrixXd q(n, cap);
  MatrixXd h = MatrixXd::Zero(cap, cap);

  Index k = 0;  // columns of q filled
  for (Index j = 0; j < block; ++j) {
    if (!random_orthogonal_column(q, k, rng)) break;
    ++k;
  }
  Index m = 0;  // columns already multiplied by the operator

  LanczosReport local;
  EigenPairs result;

  // Rayleigh-Ritz on the first `dim` basis columns. The cheap residual
  // estimate (coupling to unmultiplied columns) gates the full check.
  auto check = [&](Index dim) -> bool {
    ++local.convergence_checks;
    MatrixXd hs = h.topLeftCorner(dim, dim);
    hs = (0.5 * (hs + hs.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> small(hs);
    if (small.info() != Eigen::Success) return false;
    // Largest theta corresponds to the smallest eigenvalue of the operator.
    const MatrixXd s = small.eigenvectors().rightCols(count).rowwise().reverse();
    const VectorXd theta = small.eigenvalues().tail(count).reverse();
    if (k > dim) {
      const MatrixXd residual = h.block(dim, 0, k - dim, dim) * s;
      for (Index i = 0; i < count; ++i)
        if (residual.col(i).norm() > 1e-8 * std::abs(theta[i])) return false;
    }
    const MatrixXd v = q.leftCols(dim) * s;
    MatrixXd g = v.transpose() * (op.matrix() * v);
    g = (0.5 * (g + g.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> rr(g);
    if (rr.info() != Eigen::Success) return false;
    EigenPairs pairs{rr.eigenvalues(), v * rr.eigenvectors()};
    const VectorXd res = eigen_residuals(op, pairs);
    double worst = 0.0;
    for (Index i = 0; i < res.size(); ++i) worst = std::max(worst, res[i] / std::max(1.0, std::abs(pairs.values[i])));
    local.max_residual = worst;
    if (worst > options.tolerance) return false;
    result = std::move(pairs);
    return true;
  };

  Index next_check = std::min(cap, std::max(count + 2 * block, std::min(2 * count, count + 200)));
  bool converged = false;
  while (true) {
    // Past the cap only the full space (k == n) can still be multiplied
    // without losing coupling information.
    const bool can_expand = m < k && (k < cap || k == n);
    if (can_expand) {
      VectorXd w = factor.solve(q.col(m));
      const double before = w.norm();
      const VectorXd coeffs = orthogonalize(q, k, w);
      h.block(0, m, k, 1) = coeffs;
      const double norm = w.norm();
      if (k < cap) {
        if (norm > 1e-12 * before) {
          q.col(k) = w / norm;
          h(k, m) = norm;
          ++k;
        } else if (random_orthogonal_column(q, k, rng)) {
          // Invariant subspace found; continue from a fresh direction.
          ++k;
        }
      }
      ++m;
    }
    if (m >= count && (m >= next_check || !can_expand)) {
      if (check(m)) {
        converged = true;
        break;
      }
      next_check = std::min(cap, m + std::max<Index>(4 * block, m / 4));
    }
    if (!can_expand) break;
  }
  local.krylov_dimension = m;

  if (report) *report = local;
  if (!converged) {
    std::ostringstream msg;
    msg << "Lanczos did not converge: Krylov dimension " << local.krylov_dimension << " (cap " << cap
        << "), worst relative residual " << local.max_residual << " vs tolerance " << options.tolerance;
    throw Error(ErrorKind::Numerical, msg.str());
  }
  return result;
}

}  // namespace specdeform
