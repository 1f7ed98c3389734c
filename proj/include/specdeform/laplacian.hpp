#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "specdeform/mesh.hpp"

namespace specdeform {

struct MatrixEntry {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

/// Symmetric sparse operator. Full storage is kept for products and
/// factorizations; the canonical form is the upper triangle (row <= col).
class SparseSymmetricMatrix {
 public:
  /// `full` must be exactly symmetric (checked).
  explicit SparseSymmetricMatrix(Eigen::SparseMatrix<double> full);

  Eigen::Index dimension() const { return matrix_.rows(); }
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }

  /// Upper-triangle entries in column-major order.
  std::vector<MatrixEntry> upper_entries() const;

  /// 64-bit FNV-1a over dimension and the canonical entries. Stable across
  /// runs and platforms with IEEE doubles.
  std::uint64_t fingerprint() const { return fingerprint_; }

  double max_abs_entry() const;

 private:
  Eigen::SparseMatrix<double> matrix_;
  std::uint64_t fingerprint_;
};

enum class LaplacianKind { Cotangent, Uniform };
enum class Normalization { None, Mass };

struct LaplacianOptions {
  LaplacianKind kind = LaplacianKind::Cotangent;
  /// Mass normalization yields D^{-1/2} L D^{-1/2} with D the lumped
  /// (barycentric) vertex areas. Off by default.
  Normalization normalization = Normalization::None;
};

/// L_ij = -1/2 sum of cot(opposite angles) over triangles sharing edge (i,j),
/// L_ii = -sum_j L_ij. Obtuse angles give negative weights and are kept.
SparseSymmetricMatrix cotangent_laplacian(const TriangleMesh& mesh);

/// Graph Laplacian: -1 per edge, degree on the diagonal.
SparseSymmetricMatrix uniform_laplacian(const TriangleMesh& mesh);

SparseSymmetricMatrix build_laplacian(const TriangleMesh& mesh, const LaplacianOptions& options = {});

/// Barycentric lumped area per vertex.
Eigen::VectorXd lumped_vertex_areas(const TriangleMesh& mesh);

/// "%%MatrixMarket matrix coordinate real symmetric", lower triangle, 1-based.
std::string to_matrix_market(const SparseSymmetricMatrix& m);
void write_matrix_market(const SparseSymmetricMatrix& m, const std::filesystem::path& path);

std::string to_string(LaplacianKind kind);
LaplacianKind laplacian_kind_from_string(const std::string& name);

}  // namespace specdeform
