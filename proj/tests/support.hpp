#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "specdeform/bundle.hpp"
#include "specdeform/laplacian.hpp"
#include "specdeform/mesh.hpp"
#include "specdeform/retrieval.hpp"
#include "specdeform/spectral.hpp"

namespace testing {

using namespace specdeform;

TriangleMesh single_triangle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c);

/// n x n vertex grid on the unit-spaced plane z = 0, each square split
/// along the same diagonal. Optional in-plane jitter keeps it non-symmetric.
TriangleMesh grid_mesh(int n, double jitter = 0.0, std::uint64_t seed = 1);

/// Triangles (i, i+1, i+2) mod n: its edge graph is the circulant graph
/// with jumps {1, 2}.
TriangleMesh circulant_strip(int n);

/// Dense reference assembly straight from triangle angles (acos of edge
/// directions), independent of the library's cotangent formula.
Eigen::MatrixXd cotangent_oracle(const TriangleMesh& mesh);

/// Dense reference eigendecomposition, ascending.
Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense_oracle(const SparseSymmetricMatrix& op);

/// Random rotation (via QR of a Gaussian matrix, det +1).
Eigen::Matrix3d random_rotation(std::uint64_t seed);

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed);

/// Small labeled bundle (N = 702, 4 + 4 + 4 states) with a dense M = 200
/// basis and encoded coefficients, built once per process.
struct SmallPipeline {
  SimulationBundle bundle;
  SpectralBasis basis;
  SpectralCoefficients base_coeffs;
  std::vector<SpectralCoefficients> coeffs;
  std::vector<Candidate> candidates() const;
};
const SmallPipeline& small_pipeline();

BeamParams small_beam();

/// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

/// Every regular file under `root`, keyed by relative path, with contents.
std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& root);

int run_cli(const std::vector<std::string>& args);

}  // namespace testing
