#include "specdeform/spectral.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <bit>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "specdeform/error.hpp"
#include "text_util.hpp"

namespace specdeform {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kBasisMagic[4] = {'S', 'P', 'B', 'S'};
constexpr std::uint32_t kBasisVersion = 1;

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::Numerical, std::string(what) + " contains non-finite values");
}

void apply_sign_convention(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::Parse, "truncated basis file");
  return value;
}

}  // namespace

SpectralBasis::SpectralBasis(Eigen::VectorXd eigenvalues, Eigen::MatrixXd eigenvectors, std::uint64_t fingerprint)
    : eigenvalues_(std::move(eigenvalues)), eigenvectors_(std::move(eigenvectors)), fingerprint_(fingerprint) {
  if (eigenvalues_.size() != eigenvectors_.cols())
    throw Error(ErrorKind::DimensionMismatch, "eigenvalue count does not match eigenvector count");
  if (eigenvectors_.cols() < 1 || eigenvectors_.cols() > eigenvectors_.rows())
    throw Error(ErrorKind::Validation, "basis needs 1 <= M <= N");
  check_finite(eigenvalues_, "eigenvalues");
  check_finite(eigenvectors_, "eigenvectors");
  for (Eigen::Index i = 1; i < eigenvalues_.size(); ++i)
    if (eigenvalues_[i] < eigenvalues_[i - 1]) throw Error(ErrorKind::Validation, "eigenvalues are not ascending");
  const double err = orthonormality_error();
  if (err > 1e-8)
    throw Error(ErrorKind::Numerical, "eigenvectors are not orthonormal (max deviation " + std::to_string(err) + ")");
}

std::vector<bool> SpectralBasis::clustered() const {
  const Eigen::Index m = eigenvalues_.size();
  std::vector<bool> flags(static_cast<std::size_t>(m), false);
  const double tol = 1e-8 * std::max(std::abs(eigenvalues_[m - 1]), std::abs(eigenvalues_[0]));
  for (Eigen::Index i = 1; i < m; ++i) {
    if (eigenvalues_[i] - eigenvalues_[i - 1] < tol) {
      flags[static_cast<std::size_t>(i)] = true;
      flags[static_cast<std::size_t>(i - 1)] = true;
    }
  }
  return flags;
}

double SpectralBasis::orthonormality_error() const {
  Eigen::MatrixXd gram = eigenvectors_.transpose() * eigenvectors_;
  gram.diagonal().array() -= 1.0;
  return gram.cwiseAbs().maxCoeff();
}

SpectralCoefficients::SpectralCoefficients(Eigen::Matrix<double, Eigen::Dynamic, 3> values,
                                           std::uint64_t basis_fingerprint)
    : values_(std::move(values)), basis_fingerprint_(basis_fingerprint) {
  if (!values_.allFinite()) throw Error(ErrorKind::Validation, "spectral coefficients must be finite");
}

Eigen::Index default_mode_count(Eigen::Index num_vertices) {
  return std::max<Eigen::Index>(1, std::min<Eigen::Index>(500, num_vertices - 1));
}

SpectralBasis eigendecompose(const SparseSymmetricMatrix& op, Eigen::Index modes, const DecomposeOptions& options) {
  const Eigen::Index n = op.dimension();
  if (modes < 1 || modes > n)
    throw Error(ErrorKind::Usage, "mode count " + std::to_string(modes) + " outside [1, " + std::to_string(n) + "]");

  const bool dense = options.solver == SolverChoice::Dense ||
                     (options.solver == SolverChoice::Auto && n <= options.dense_limit);
  EigenPairs pairs = dense ? dense_smallest(op, modes) : lanczos_smallest(op, modes, options.lanczos);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(modes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return pairs.values[a] < pairs.values[b]; });
  Eigen::VectorXd values(modes);
  Eigen::MatrixXd vectors(n, modes);
  for (Eigen::Index i = 0; i < modes; ++i) {
    values[i] = pairs.values[order[static_cast<std::size_t>(i)]];
    vectors.col(i) = pairs.vectors.col(order[static_cast<std::size_t>(i)]);
  }
  apply_sign_convention(vectors);

  const double lambda_max = std::max(std::abs(values[modes - 1]), std::abs(values[0]));
  if (values[0] < -1e-9 * lambda_max)
    throw Error(ErrorKind::Numerical, "operator is not positive semi-definite: smallest eigenvalue " +
                                          std::to_string(values[0]));

  const Eigen::VectorXd res = eigen_residuals(op, {values, vectors});
  for (Eigen::Index i = 0; i < modes; ++i)
    if (res[i] > 1e-7 * std::max(1.0, std::abs(values[i])))
      throw Error(ErrorKind::Numerical, "eigenpair " + std::to_string(i + 1) + " residual " + std::to_string(res[i]) +
                                            " exceeds tolerance");
  return SpectralBasis(std::move(values), std::move(vectors), op.fingerprint());
}

Eigen::VectorXd encode(const SpectralBasis& basis, const MeshFunction& f,
                       std::optional<std::uint64_t> expected_fingerprint) {
  if (static_cast<Eigen::Index>(f.size()) != basis.num_vertices())
    throw Error(ErrorKind::DimensionMismatch, "mesh function has " + std::to_string(f.size()) + " values, basis has " +
                                                  std::to_string(basis.num_vertices()) + " vertices");
  if (expected_fingerprint && *expected_fingerprint != basis.fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "basis fingerprint " + fingerprint_hex(basis.fingerprint()) +
                                                    " does not match expected " + fingerprint_hex(*expected_fingerprint));
  return basis.eigenvectors().transpose() * f.values();
}

MeshFunction decode(const SpectralBasis& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() > basis.num_modes())
    throw Error(ErrorKind::DimensionMismatch, "coefficient vector longer than the basis");
  return MeshFunction(basis.eigenvectors().leftCols(coeffs.size()) * coeffs);
}

SpectralCoefficients encode_geometry(const SpectralBasis& basis, const DeformedState& state) {
  if (static_cast<Eigen::Index>(state.num_vertices()) != basis.num_vertices())
    throw Error(ErrorKind::DimensionMismatch, "state has " + std::to_string(state.num_vertices()) +
                                                  " vertices, basis has " + std::to_string(basis.num_vertices()));
  Eigen::Matrix<double, Eigen::Dynamic, 3> alpha = basis.eigenvectors().transpose() * state.coordinates;
  return SpectralCoefficients(std::move(alpha), basis.fingerprint());
}

Reconstruction reconstruct_geometry(const SpectralBasis& basis, const SpectralCoefficients& coeffs,
                                    const IndexSet& subset) {
  if (coeffs.basis_fingerprint() != basis.fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "coefficients were not produced with this basis");
  const Eigen::Index limit = std::min(basis.num_modes(), coeffs.num_modes());
  Reconstruction out{Coordinates::Zero(basis.num_vertices(), 3), subset.empty()};
  for (int idx : subset) {
    if (idx < 1 || idx > limit)
      throw Error(ErrorKind::Validation, "mode index " + std::to_string(idx) + " outside [1, " +
                                             std::to_string(limit) + "]");
    out.coordinates.noalias() += basis.mode(idx) * coeffs.triple(idx);
  }
  return out;
}

IndexSet first_modes(int count) {
  IndexSet out(static_cast<std::size_t>(std::max(0, count)));
  std::iota(out.begin(), out.end(), 1);
  return out;
}

void save_basis(const SpectralBasis& basis, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kBasisMagic, 4);
  write_pod(out, kBasisVersion);
  write_pod(out, static_cast<std::uint64_t>(basis.num_vertices()));
  write_pod(out, static_cast<std::uint64_t>(basis.num_modes()));
  write_pod(out, basis.fingerprint());
  out.write(reinterpret_cast<const char*>(basis.eigenvalues().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(basis.num_modes())));
  // Eigen's default storage is column-major.
  out.write(reinterpret_cast<const char*>(basis.eigenvectors().data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(basis.eigenvectors().size())));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

SpectralBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBasisMagic, 4) != 0) throw Error(ErrorKind::Parse, path.string() + ": not a basis file");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kBasisVersion)
    throw Error(ErrorKind::Parse, path.string() + ": unsupported basis version " + std::to_string(version));
  const auto n = read_pod<std::uint64_t>(in);
  const auto m = read_pod<std::uint64_t>(in);
  const auto fingerprint = read_pod<std::uint64_t>(in);
  if (m == 0 || m > n || n > (1ULL << 32)) throw Error(ErrorKind::Parse, path.string() + ": invalid basis dimensions");
  Eigen::VectorXd values(static_cast<Eigen::Index>(m));
  Eigen::MatrixXd vectors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(sizeof(double) * m));
  in.read(reinterpret_cast<char*>(vectors.data()), static_cast<std::streamsize>(sizeof(double) * m * n));
  if (!in) throw Error(ErrorKind::Parse, path.string() + ": truncated basis file");
  return SpectralBasis(std::move(values), std::move(vectors), fingerprint);
}

std::string fingerprint_hex(std::uint64_t fingerprint) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fingerprint));
  return buf;
}

std::uint64_t fingerprint_from_hex(const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, 16);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw Error(ErrorKind::Parse, "invalid fingerprint '" + text + "'");
  return v;
}

std::string coefficients_to_csv(const SpectralCoefficients& coeffs) {
  std::string out = "# basis_fingerprint=" + fingerprint_hex(coeffs.basis_fingerprint()) + "\n";
  out += "index,alpha_x,alpha_y,alpha_z\n";
  const auto& v = coeffs.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    out += std::to_string(i + 1);
    for (int c = 0; c < 3; ++c) out += ',' + detail::format_double(v(i, c));
    out += '\n';
  }
  return out;
}

SpectralCoefficients coefficients_from_csv(const std::string& text) {
  std::optional<std::uint64_t> fingerprint;
  bool header_seen = false;
  std::vector<std::array<double, 3>> rows;
  for (auto line : detail::lines(text)) {
    if (line.front() == '#') {
      constexpr std::string_view key = "# basis_fingerprint=";
      if (line.starts_with(key)) fingerprint = fingerprint_from_hex(std::string(line.substr(key.size())));
      continue;
    }
    if (!header_seen) {
      if (line != "index,alpha_x,alpha_y,alpha_z") throw Error(ErrorKind::Parse, "unexpected coefficient CSV header");
      header_seen = true;
      continue;
    }
    const auto cells = detail::split(line, ',');
    if (cells.size() != 4) throw Error(ErrorKind::Parse, "coefficient row needs 4 columns");
    const double index = detail::parse_double(cells[0]);
    if (index != static_cast<double>(rows.size() + 1))
      throw Error(ErrorKind::Parse, "coefficient rows must be listed in index order starting at 1");
    rows.push_back({detail::parse_double(cells[1]), detail::parse_double(cells[2]), detail::parse_double(cells[3])});
  }
  if (!fingerprint) throw Error(ErrorKind::Parse, "coefficient CSV lacks a basis_fingerprint line");
  if (rows.empty()) throw Error(ErrorKind::Parse, "coefficient CSV has no rows");
  Eigen::Matrix<double, Eigen::Dynamic, 3> values(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < 3; ++c) values(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return SpectralCoefficients(std::move(values), *fingerprint);
}

void write_coefficients(const SpectralCoefficients& coeffs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << coefficients_to_csv(coeffs);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

SpectralCoefficients read_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return coefficients_from_csv(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace specdeform
