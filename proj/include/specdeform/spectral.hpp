#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specdeform/eigensolver.hpp"
#include "specdeform/laplacian.hpp"
#include "specdeform/mesh.hpp"

namespace specdeform {

/// 1-based eigenvector indices (psi_1 is the constant mode).
using IndexSet = std::vector<int>;

/// First M eigenpairs of a mesh operator. Immutable; one basis is shared by
/// every shape of a bundle so coefficients are comparable across shapes.
class SpectralBasis {
 public:
  /// Validates ordering, finiteness and orthonormality (|<psi_i, psi_j> - delta_ij| <= 1e-8).
  SpectralBasis(Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenvectors, std::uint64_t fingerprint);

  Eigen::Index num_vertices() const { return eigenvectors_.rows(); }
  Eigen::Index num_modes() const { return eigenvectors_.cols(); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  /// 1-based access to psi_i.
  auto mode(int index) const { return eigenvectors_.col(index - 1); }
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// True for modes whose eigenvalue lies within 1e-8 * lambda_max of a
  /// neighbour. Such modes may rotate inside their eigenspace between
  /// decompositions, but never between shapes sharing this basis.
  std::vector<bool> clustered() const;

  /// Largest |<psi_i, psi_j> - delta_ij|.
  double orthonormality_error() const;

 private:
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  std::uint64_t fingerprint_;
};

/// Rows are (alpha_x, alpha_y, alpha_z) for modes 1..M.
class SpectralCoefficients {
 public:
  SpectralCoefficients(Eigen::Matrix<double, Eigen::Dynamic, 3> values, std::uint64_t basis_fingerprint);

  Eigen::Index num_modes() const { return values_.rows(); }
  const Eigen::Matrix<double, Eigen::Dynamic, 3>& values() const { return values_; }
  /// 1-based row access.
  auto triple(int index) const { return values_.row(index - 1); }
  std::uint64_t basis_fingerprint() const { return basis_fingerprint_; }

  bool operator==(const SpectralCoefficients&) const = default;

 private:
  Eigen::Matrix<double, Eigen::Dynamic, 3> values_;
  std::uint64_t basis_fingerprint_;
};

enum class SolverChoice { Auto, Lanczos, Dense };

struct DecomposeOptions {
  SolverChoice solver = SolverChoice::Auto;
  /// Auto picks the dense solver up to this dimension.
  Eigen::Index dense_limit = 2000;
  LanczosOptions lanczos{};
};

/// Default number of retained modes for an N-vertex mesh: min(500, N - 1).
Eigen::Index default_mode_count(Eigen::Index num_vertices);

/// Smallest `modes` eigenpairs of `op`, ascending, with the deterministic
/// sign convention (largest-magnitude entry of each eigenvector positive).
/// Throws on M > N, non-convergence, residuals above 1e-7 * max(1, lambda),
/// or eigenvalues below -1e-9 * lambda_max.
SpectralBasis eigendecompose(const SparseSymmetricMatrix& op, Eigen::Index modes, const DecomposeOptions& options = {});

/// alpha_i = <f, psi_i> for all M modes.
Eigen::VectorXd encode(const SpectralBasis& basis, const MeshFunction& f,
                       std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

/// sum_i alpha_i psi_i over the first coeffs.size() modes.
MeshFunction decode(const SpectralBasis& basis, const Eigen::VectorXd& coeffs);

/// Column-wise encode of the x, y, z coordinate functions (E^T P). O(3MN).
SpectralCoefficients encode_geometry(const SpectralBasis& basis, const DeformedState& state);

struct Reconstruction {
  Coordinates coordinates;
  /// Set when the subset was empty and the result is the zero geometry.
  bool empty_subset = false;
};

/// Per-axis partial sums over the given 1-based mode indices.
Reconstruction reconstruct_geometry(const SpectralBasis& basis, const SpectralCoefficients& coeffs,
                                    const IndexSet& subset);

/// {1, ..., count}.
IndexSet first_modes(int count);

// Persistence: binary basis ("SPBS", little-endian f64) and CSV coefficients.
void save_basis(const SpectralBasis& basis, const std::filesystem::path& path);
SpectralBasis load_basis(const std::filesystem::path& path);

std::string coefficients_to_csv(const SpectralCoefficients& coeffs);
SpectralCoefficients coefficients_from_csv(const std::string& text);
void write_coefficients(const SpectralCoefficients& coeffs, const std::filesystem::path& path);
SpectralCoefficients read_coefficients(const std::filesystem::path& path);

std::string fingerprint_hex(std::uint64_t fingerprint);
std::uint64_t fingerprint_from_hex(const std::string& text);

}  // namespace specdeform
