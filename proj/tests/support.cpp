#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "specdeform/cli.hpp"
#include "specdeform/random.hpp"

namespace testing {

TriangleMesh single_triangle(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  Coordinates v(3, 3);
  v.row(0) = a.transpose();
  v.row(1) = b.transpose();
  v.row(2) = c.transpose();
  Triangles t(1, 3);
  t << 0, 1, 2;
  return TriangleMesh(v, t);
}

TriangleMesh grid_mesh(int n, double jitter, std::uint64_t seed) {
  Rng rng(seed);
  Coordinates v(n * n, 3);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      v.row(r * n + c) << c + jitter * rng.uniform(-1.0, 1.0), r + jitter * rng.uniform(-1.0, 1.0), 0.0;
  Triangles t(2 * (n - 1) * (n - 1), 3);
  int f = 0;
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) {
      const int a = r * n + c, b = a + 1, d = a + n, e = d + 1;
      t.row(f++) << a, b, e;
      t.row(f++) << a, e, d;
    }
  return TriangleMesh(v, t);
}

TriangleMesh circulant_strip(int n) {
  Coordinates v(n, 3);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    v.row(i) << std::cos(a), std::sin(a), (i % 2) * 0.5;
  }
  Triangles t(n, 3);
  for (int i = 0; i < n; ++i) t.row(i) << i, (i + 1) % n, (i + 2) % n;
  return TriangleMesh(v, t);
}

Eigen::MatrixXd cotangent_oracle(const TriangleMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.num_vertices());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  const auto& t = mesh.triangles();
  const auto& p = mesh.vertices();
  for (Eigen::Index f = 0; f < t.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int o = t(f, k), i = t(f, (k + 1) % 3), j = t(f, (k + 2) % 3);
      const Eigen::Vector3d u = (p.row(i) - p.row(o)).normalized();
      const Eigen::Vector3d w = (p.row(j) - p.row(o)).normalized();
      const double angle = std::acos(std::clamp(u.dot(w), -1.0, 1.0));
      const double weight = 0.5 / std::tan(angle);
      l(i, j) -= weight;
      l(j, i) -= weight;
      l(i, i) += weight;
      l(j, j) += weight;
    }
  }
  return l;
}

Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> dense_oracle(const SparseSymmetricMatrix& op) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Eigen::MatrixXd(op.matrix()));
}

Eigen::Matrix3d random_rotation(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::Matrix3d g;
  for (int i = 0; i < 9; ++i) g(i / 3, i % 3) = rng.normal();
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(g);
  Eigen::Matrix3d q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

BeamParams small_beam() {
  BeamParams p;
  p.axial_segments = 12;
  return p;
}

std::vector<Candidate> SmallPipeline::candidates() const {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < coeffs.size(); ++i) out.push_back({i, *bundle.states[i].label, coeffs[i]});
  return out;
}

const SmallPipeline& small_pipeline() {
  static const SmallPipeline pipeline = [] {
    SimulationBundle bundle = generate_bundle(small_beam(), {4, 4, 4}, 11);
    const auto op = cotangent_laplacian(bundle.base);
    SpectralBasis basis = eigendecompose(op, 200);
    SpectralCoefficients base = encode_geometry(basis, DeformedState::from_mesh(bundle.base));
    std::vector<SpectralCoefficients> coeffs;
    for (const auto& s : bundle.states) coeffs.push_back(encode_geometry(basis, s));
    return SmallPipeline{std::move(bundle), std::move(basis), std::move(base), std::move(coeffs)};
  }();
  return pipeline;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("specdeform_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, std::string>> snapshot(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.emplace_back(std::filesystem::relative(e.path(), root).generic_string(), read_file(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"specdeform"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return specdeform::cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace testing
