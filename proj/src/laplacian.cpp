#include "specdeform/laplacian.hpp"

#include <Eigen/Geometry>
#include <charconv>
#include <cmath>
#include <fstream>

#include "specdeform/error.hpp"

namespace specdeform {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

template <typename T>
void fnv_mix(std::uint64_t& h, const T& value) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(&value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

using Triplet = Eigen::Triplet<double>;

// Off-diagonal triplets become a full matrix whose diagonal is minus the row sum.
Eigen::SparseMatrix<double> with_zero_row_sums(Eigen::Index n, const std::vector<Triplet>& off_diagonal) {
  Eigen::SparseMatrix<double> off(n, n);
  off.setFromTriplets(off_diagonal.begin(), off_diagonal.end());
  std::vector<Triplet> all;
  all.reserve(static_cast<std::size_t>(off.nonZeros() + n));
  Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < off.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(off, k); it; ++it) {
      all.emplace_back(it.row(), it.col(), it.value());
      row_sum[it.row()] += it.value();
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) all.emplace_back(i, i, -row_sum[i]);
  Eigen::SparseMatrix<double> full(n, n);
  full.setFromTriplets(all.begin(), all.end());
  full.makeCompressed();
  return full;
}

Eigen::Vector3d vertex(const TriangleMesh& mesh, int i) { return mesh.vertices().row(i).transpose(); }

}  // namespace

SparseSymmetricMatrix::SparseSymmetricMatrix(Eigen::SparseMatrix<double> full) : matrix_(std::move(full)) {
  if (matrix_.rows() != matrix_.cols()) throw Error(ErrorKind::Validation, "operator must be square");
  matrix_.makeCompressed();
  Eigen::SparseMatrix<double> transposed = matrix_.transpose();
  if ((matrix_ - transposed).norm() != 0.0) throw Error(ErrorKind::Validation, "operator is not exactly symmetric");

  fingerprint_ = kFnvOffset;
  fnv_mix(fingerprint_, static_cast<std::uint64_t>(matrix_.rows()));
  for (const auto& e : upper_entries()) {
    fnv_mix(fingerprint_, static_cast<std::uint64_t>(e.row));
    fnv_mix(fingerprint_, static_cast<std::uint64_t>(e.col));
    fnv_mix(fingerprint_, e.value);
  }
}

std::vector<MatrixEntry> SparseSymmetricMatrix::upper_entries() const {
  std::vector<MatrixEntry> out;
  out.reserve(static_cast<std::size_t>(matrix_.nonZeros() / 2 + matrix_.rows()));
  for (Eigen::Index k = 0; k < matrix_.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, k); it; ++it)
      if (it.row() <= it.col()) out.push_back({it.row(), it.col(), it.value()});
  return out;
}

double SparseSymmetricMatrix::max_abs_entry() const {
  double m = 0.0;
  for (Eigen::Index k = 0; k < matrix_.nonZeros(); ++k) m = std::max(m, std::abs(matrix_.valuePtr()[k]));
  return m;
}

SparseSymmetricMatrix cotangent_laplacian(const TriangleMesh& mesh) {
  const auto& tris = mesh.triangles();
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.num_vertices());

  std::vector<double> areas(static_cast<std::size_t>(tris.rows()));
  double total_area = 0.0;
  for (Eigen::Index f = 0; f < tris.rows(); ++f) {
    const Eigen::Vector3d a = vertex(mesh, tris(f, 0)), b = vertex(mesh, tris(f, 1)), c = vertex(mesh, tris(f, 2));
    areas[static_cast<std::size_t>(f)] = 0.5 * (b - a).cross(c - a).norm();
    total_area += areas[static_cast<std::size_t>(f)];
  }
  const double min_area = 1e-12 * total_area / static_cast<double>(tris.rows());
  for (Eigen::Index f = 0; f < tris.rows(); ++f)
    if (!(areas[static_cast<std::size_t>(f)] >= min_area) || areas[static_cast<std::size_t>(f)] == 0.0)
      throw Error(ErrorKind::Validation, "degenerate triangle " + std::to_string(f) + " (area " +
                                             std::to_string(areas[static_cast<std::size_t>(f)]) + ")");

  std::vector<Triplet> off;
  off.reserve(static_cast<std::size_t>(tris.rows()) * 6);
  for (Eigen::Index f = 0; f < tris.rows(); ++f) {
    for (int corner = 0; corner < 3; ++corner) {
      // Angle at `corner` is opposite the edge (i, j).
      const int k = tris(f, corner);
      const int i = tris(f, (corner + 1) % 3);
      const int j = tris(f, (corner + 2) % 3);
      const Eigen::Vector3d u = vertex(mesh, i) - vertex(mesh, k);
      const Eigen::Vector3d v = vertex(mesh, j) - vertex(mesh, k);
      const double cot = u.dot(v) / u.cross(v).norm();
      off.emplace_back(i, j, -0.5 * cot);
      off.emplace_back(j, i, -0.5 * cot);
    }
  }
  return SparseSymmetricMatrix(with_zero_row_sums(n, off));
}

SparseSymmetricMatrix uniform_laplacian(const TriangleMesh& mesh) {
  const auto& tris = mesh.triangles();
  const Eigen::Index n = static_cast<Eigen::Index>(mesh.num_vertices());
  // Collect the edge pattern first so shared edges count once.
  std::vector<Triplet> pattern;
  pattern.reserve(static_cast<std::size_t>(tris.rows()) * 6);
  for (Eigen::Index f = 0; f < tris.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int i = tris(f, c), j = tris(f, (c + 1) % 3);
      pattern.emplace_back(i, j, 1.0);
      pattern.emplace_back(j, i, 1.0);
    }
  }
  Eigen::SparseMatrix<double> adjacency(n, n);
  adjacency.setFromTriplets(pattern.begin(), pattern.end());
  std::vector<Triplet> off;
  off.reserve(static_cast<std::size_t>(adjacency.nonZeros()));
  for (Eigen::Index k = 0; k < adjacency.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(adjacency, k); it; ++it)
      off.emplace_back(it.row(), it.col(), -1.0);
  return SparseSymmetricMatrix(with_zero_row_sums(n, off));
}

Eigen::VectorXd lumped_vertex_areas(const TriangleMesh& mesh) {
  const auto& tris = mesh.triangles();
  Eigen::VectorXd area = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (Eigen::Index f = 0; f < tris.rows(); ++f) {
    const Eigen::Vector3d a = vertex(mesh, tris(f, 0)), b = vertex(mesh, tris(f, 1)), c = vertex(mesh, tris(f, 2));
    const double third = (b - a).cross(c - a).norm() / 6.0;
    for (int k = 0; k < 3; ++k) area[tris(f, k)] += third;
  }
  return area;
}

SparseSymmetricMatrix build_laplacian(const TriangleMesh& mesh, const LaplacianOptions& options) {
  SparseSymmetricMatrix base =
      options.kind == LaplacianKind::Cotangent ? cotangent_laplacian(mesh) : uniform_laplacian(mesh);
  if (options.normalization == Normalization::None) return base;

  const Eigen::VectorXd area = lumped_vertex_areas(mesh);
  const Eigen::VectorXd inv_sqrt = area.cwiseSqrt().cwiseInverse();
  Eigen::SparseMatrix<double> scaled = base.matrix();
  for (Eigen::Index k = 0; k < scaled.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(scaled, k); it; ++it)
      it.valueRef() *= inv_sqrt[it.row()] * inv_sqrt[it.col()];
  return SparseSymmetricMatrix(std::move(scaled));
}

std::string to_matrix_market(const SparseSymmetricMatrix& m) {
  std::string out = "%%MatrixMarket matrix coordinate real symmetric\n";
  const auto entries = m.upper_entries();
  out += std::to_string(m.dimension()) + ' ' + std::to_string(m.dimension()) + ' ' + std::to_string(entries.size()) +
         '\n';
  char buf[64];
  for (const auto& e : entries) {
    // Symmetric Matrix Market stores the lower triangle: swap to (col, row).
    out += std::to_string(e.col + 1) + ' ' + std::to_string(e.row + 1) + ' ';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), e.value);
    out.append(buf, ptr);
    out += '\n';
  }
  return out;
}

void write_matrix_market(const SparseSymmetricMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << to_matrix_market(m);
}

std::string to_string(LaplacianKind kind) { return kind == LaplacianKind::Cotangent ? "cotangent" : "uniform"; }

LaplacianKind laplacian_kind_from_string(const std::string& name) {
  if (name == "cotangent") return LaplacianKind::Cotangent;
  if (name == "uniform") return LaplacianKind::Uniform;
  throw Error(ErrorKind::Usage, "unknown operator '" + name + "'");
}

}  // namespace specdeform
