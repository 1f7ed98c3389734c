#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace specdeform {

using Coordinates = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3>;

enum class MeshFormat { Off, Obj };

/// Triangle mesh with a fixed vertex order. Vertex indices are the identity
/// shared by every deformed state of a bundle, so nothing here ever reorders
/// or merges vertices.
class TriangleMesh {
 public:
  /// Validates all invariants and throws `Error` on violation.
  TriangleMesh(Coordinates vertices, Triangles triangles);

  std::size_t num_vertices() const { return static_cast<std::size_t>(vertices_.rows()); }
  std::size_t num_triangles() const { return static_cast<std::size_t>(triangles_.rows()); }
  const Coordinates& vertices() const { return vertices_; }
  const Triangles& triangles() const { return triangles_; }

  bool operator==(const TriangleMesh&) const = default;

 private:
  Coordinates vertices_;
  Triangles triangles_;
};

/// One scalar per vertex.
class MeshFunction {
 public:
  explicit MeshFunction(Eigen::VectorXd values) : values_(std::move(values)) {}
  static MeshFunction zeros(std::size_t n) { return MeshFunction(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))); }

  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

 private:
  Eigen::VectorXd values_;
};

/// Vertex positions of the base mesh after deformation. Connectivity is the
/// base mesh's and is not stored here.
struct DeformedState {
  Coordinates coordinates;
  std::optional<std::string> label;
  std::optional<int> timestep;

  std::size_t num_vertices() const { return static_cast<std::size_t>(coordinates.rows()); }
  static DeformedState from_mesh(const TriangleMesh& mesh) { return {mesh.vertices(), std::nullopt, std::nullopt}; }
};

/// Number of connected components of the vertex graph induced by `triangles`.
std::size_t count_components(std::size_t num_vertices, const Triangles& triangles);

TriangleMesh parse_mesh(std::string_view content, MeshFormat format);
std::string write_mesh(const TriangleMesh& mesh, MeshFormat format);

/// Format is chosen from the extension (.off / .obj).
TriangleMesh read_mesh_file(const std::filesystem::path& path);
void write_mesh_file(const TriangleMesh& mesh, const std::filesystem::path& path);
MeshFormat format_from_path(const std::filesystem::path& path);

/// Per-vertex Euclidean distance between a state and the base geometry.
MeshFunction displacement_field(const DeformedState& state, const TriangleMesh& base);

/// Length of the axis-aligned bounding-box diagonal.
double bounding_box_diagonal(const Coordinates& coords);

}  // namespace specdeform
