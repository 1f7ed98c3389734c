#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "specdeform/laplacian.hpp"

namespace specdeform {

/// Eigenvalues ascending with matching eigenvector columns.
struct EigenPairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

struct LanczosOptions {
  int block_size = 4;
  /// Cap on the Krylov dimension; 0 picks min(N, max(4M, M + 400)).
  Eigen::Index max_dimension = 0;
  /// Convergence target on ||L psi - lambda psi|| relative to max(1, lambda).
  double tolerance = 1e-9;
  std::uint64_t seed = 0x5eed1a2c205eedULL;
};

struct LanczosReport {
  Eigen::Index krylov_dimension = 0;
  int convergence_checks = 0;
  double max_residual = 0.0;
};

/// Smallest `count` eigenpairs of a symmetric positive semi-definite operator
/// by shift-invert block Lanczos with full reorthogonalization and a final
/// Rayleigh-Ritz step on the original operator. Throws `Error`
/// (ErrorKind::Numerical) if the Krylov cap is reached before convergence.
EigenPairs lanczos_smallest(const SparseSymmetricMatrix& op, Eigen::Index count, const LanczosOptions& options = {},
                            LanczosReport* report = nullptr);

/// Smallest `count` eigenpairs from a dense symmetric eigensolve.
EigenPairs dense_smallest(const SparseSymmetricMatrix& op, Eigen::Index count);

/// Column-wise ||A v_i - lambda_i v_i||_2.
Eigen::VectorXd eigen_residuals(const SparseSymmetricMatrix& op, const EigenPairs& pairs);

}  // namespace specdeform
