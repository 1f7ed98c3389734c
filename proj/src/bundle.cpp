#include "specdeform/bundle.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "specdeform/error.hpp"
#include "specdeform/parallel.hpp"
#include "specdeform/random.hpp"

namespace specdeform {

namespace {

// Fold zone half-width and bend bump width, as fractions of the beam length.
constexpr double kFoldHalfWidth = 0.15;
constexpr double kBendWidth = 0.25;
// Axial shortening per unit fold depth, and the constant outward bulge
// added to the fold pattern (in units of the fold depth).
constexpr double kShorteningRatio = 1.5;
constexpr double kBulge = 0.3;
// Base plate sits this fraction of the hat height below the flanges.
constexpr double kPlateGap = 0.05;

struct Frame {
  double x0, length, yc, zc, half_section;
};

Frame frame_of(const Coordinates& c) {
  const Eigen::RowVector3d lo = c.colwise().minCoeff();
  const Eigen::RowVector3d hi = c.colwise().maxCoeff();
  return {lo[0], hi[0] - lo[0], 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2]),
          0.5 * std::min(hi[1] - lo[1], hi[2] - lo[2])};
}

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void check_spec(const DeformationSpec& spec) {
  if (!(spec.amplitude >= 0.0) || !std::isfinite(spec.amplitude))
    throw Error(ErrorKind::Validation, "deformation amplitude must be finite and non-negative");
  if (!(spec.location >= 0.0 && spec.location <= 1.0))
    throw Error(ErrorKind::Validation, "deformation location must lie in [0, 1]");
  if (spec.fold_count < 1) throw Error(ErrorKind::Validation, "fold_count must be at least 1");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
    throw Error(ErrorKind::Validation, "noise_sigma must be finite and non-negative");
}

void check_params(const BeamParams& p) {
  for (double v : {p.length, p.hat_width, p.hat_height, p.flange_width})
    if (!std::isfinite(v)) throw Error(ErrorKind::Validation, "beam dimensions must be finite");
  if (p.length <= 0.0 || p.hat_width <= 0.0 || p.hat_height <= 0.0 || p.flange_width <= 0.0)
    throw Error(ErrorKind::Validation, "degenerate beam geometry: every dimension must be positive (length " +
                                          std::to_string(p.length) + ", width " + std::to_string(p.hat_width) +
                                          ", height " + std::to_string(p.hat_height) + ", flange " +
                                          std::to_string(p.flange_width) + ")");
  if (p.axial_segments < 2 || p.cross_segments < 2)
    throw Error(ErrorKind::Validation, "segment counts must be at least 2");
}

std::size_t mode_slot(DeformationMode mode) { return static_cast<std::size_t>(mode); }

}  // namespace

std::string to_string(DeformationMode mode) {
  switch (mode) {
    case DeformationMode::UpwardBend: return "upward_bend";
    case DeformationMode::DownwardBend: return "downward_bend";
    case DeformationMode::AxialCrush: return "axial_crush";
  }
  return "unknown";
}

DeformationMode deformation_mode_from_string(const std::string& name) {
  if (name == "upward_bend") return DeformationMode::UpwardBend;
  if (name == "downward_bend") return DeformationMode::DownwardBend;
  if (name == "axial_crush") return DeformationMode::AxialCrush;
  throw Error(ErrorKind::Parse, "unknown deformation mode '" + name + "'");
}

double default_amplitude(DeformationMode mode) { return mode == DeformationMode::AxialCrush ? 10.0 : 40.0; }

std::vector<std::array<double, 2>> hat_profile(const BeamParams& p) {
  check_params(p);
  const double spacing = p.hat_width / p.cross_segments;
  const double w = 0.5 * p.hat_width;
  const double tip = w + p.flange_width;
  const double gap = kPlateGap * p.hat_height;

  const std::array<std::array<double, 2>, 9> corners{{
      {-tip, 0.0},
      {-w, 0.0},
      {-w, p.hat_height},
      {w, p.hat_height},
      {w, 0.0},
      {tip, 0.0},
      {tip, -gap},
      {-tip, -gap},
      {-tip, 0.0},
  }};
  std::vector<std::array<double, 2>> out;
  for (std::size_t k = 0; k + 1 < corners.size(); ++k) {
    const auto& a = corners[k];
    const auto& b = corners[k + 1];
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    const int segments = k == 2 ? p.cross_segments : std::max(1, static_cast<int>(std::lround(len / spacing)));
    for (int s = 0; s < segments; ++s) {
      const double t = static_cast<double>(s) / segments;
      out.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])});
    }
  }
  return out;
}

TriangleMesh generate_hat_beam(const BeamParams& params) {
  const auto profile = hat_profile(params);
  const auto ring = static_cast<Eigen::Index>(profile.size());
  const Eigen::Index rings = params.axial_segments + 1;
  const Eigen::Index n = rings * ring;
  if (n < 500 || n > 20000)
    throw Error(ErrorKind::Validation, "beam resolution gives " + std::to_string(n) +
                                           " vertices; supported range is [500, 20000]");

  Coordinates v(n, 3);
  for (Eigen::Index i = 0; i < rings; ++i) {
    const double x = params.length * static_cast<double>(i) / params.axial_segments;
    for (Eigen::Index j = 0; j < ring; ++j)
      v.row(i * ring + j) << x, profile[static_cast<std::size_t>(j)][0], profile[static_cast<std::size_t>(j)][1];
  }
  Triangles t(2 * params.axial_segments * ring, 3);
  Eigen::Index f = 0;
  for (Eigen::Index i = 0; i < params.axial_segments; ++i) {
    for (Eigen::Index j = 0; j < ring; ++j) {
      const int a = static_cast<int>(i * ring + j);
      const int b = static_cast<int>(i * ring + (j + 1) % ring);
      const int c = a + static_cast<int>(ring);
      const int d = b + static_cast<int>(ring);
      t.row(f++) << a, c, d;
      t.row(f++) << a, d, b;
    }
  }

  // Guard against sliver triangles from extreme aspect ratios.
  double total = 0.0;
  std::vector<double> areas(static_cast<std::size_t>(t.rows()));
  for (Eigen::Index k = 0; k < t.rows(); ++k) {
    const Eigen::RowVector3d e1 = v.row(t(k, 1)) - v.row(t(k, 0));
    const Eigen::RowVector3d e2 = v.row(t(k, 2)) - v.row(t(k, 0));
    areas[static_cast<std::size_t>(k)] = 0.5 * e1.cross(e2).norm();
    total += areas[static_cast<std::size_t>(k)];
  }
  const double floor = 1e-12 * total / static_cast<double>(t.rows());
  for (double a : areas)
    if (!(a > floor)) throw Error(ErrorKind::Validation, "beam parameters produce degenerate triangles");
  return TriangleMesh(std::move(v), std::move(t));
}

DeformedState apply_deformation(const TriangleMesh& base, const DeformationSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  const Coordinates& p = base.vertices();
  const Frame fr = frame_of(p);
  if (!(fr.length > 0.0)) throw Error(ErrorKind::Validation, "base mesh has no axial extent");
  Coordinates out = p;
  const double center = fr.x0 + spec.location * fr.length;

  switch (spec.mode) {
    case DeformationMode::UpwardBend:
    case DeformationMode::DownwardBend: {
      const double sign = spec.mode == DeformationMode::UpwardBend ? 1.0 : -1.0;
      const double width = kBendWidth * fr.length;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double u = (p(i, 0) - center) / width;
        out(i, 2) = p(i, 2) + sign * spec.amplitude * std::exp(-u * u);
      }
      break;
    }
    case DeformationMode::AxialCrush: {
      const double half = kFoldHalfWidth * fr.length;
      const double shortening = kShorteningRatio * spec.amplitude;
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double d = p(i, 0) - center;
        const double t = (d + half) / (2.0 * half);
        // Both ends move towards the fold center by half the shortening.
        out(i, 0) = p(i, 0) + 0.5 * shortening * (1.0 - 2.0 * smoothstep(t));
        if (std::abs(d) >= half) continue;
        const double window = std::pow(std::cos(0.5 * std::numbers::pi * d / half), 2);
        const double fold = std::cos(2.0 * std::numbers::pi * spec.fold_count * (t - 0.5));
        const double radial = spec.amplitude * window * (kBulge + fold);
        const double dy = p(i, 1) - fr.yc;
        const double dz = p(i, 2) - fr.zc;
        const double r = std::hypot(dy, dz);
        if (r == 0.0) continue;
        out(i, 1) = p(i, 1) + radial * dy / r;
        out(i, 2) = p(i, 2) + radial * dz / r;
      }
      break;
    }
  }

  if (spec.noise_sigma > 0.0) {
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (int c = 0; c < 3; ++c) out(i, c) += spec.noise_sigma * rng.normal();
  }
  return {std::move(out), to_string(spec.mode), std::nullopt};
}

std::vector<std::string> sanity_warnings(const TriangleMesh& base, const DeformationSpec& spec) {
  check_spec(spec);
  const Frame fr = frame_of(base.vertices());
  std::vector<std::string> out;
  if (spec.mode == DeformationMode::AxialCrush) {
    const double half = kFoldHalfWidth * fr.length;
    // Steepest smoothstep slope is 1.5 / (2 * half).
    if (0.75 * kShorteningRatio * spec.amplitude >= half)
      out.push_back("crush shortening inverts the axial order inside the fold zone");
    if (spec.amplitude * (1.0 + kBulge) >= fr.half_section)
      out.push_back("fold depth exceeds the cross-section half-size; surface self-intersects");
  } else {
    // Peak slope of a * exp(-u^2) is a * sqrt(2 / e) / width.
    const double slope = spec.amplitude * std::sqrt(2.0 / std::numbers::e) / (kBendWidth * fr.length);
    if (slope > 1.0) out.push_back("bend slope exceeds 45 degrees; cross-sections shear visibly");
  }
  return out;
}

SimulationBundle generate_bundle(const BeamParams& params, const std::array<int, 3>& counts, std::uint64_t seed,
                                 const BundleOptions& options) {
  for (int c : counts)
    if (c < 0) throw Error(ErrorKind::Validation, "per-mode counts must be non-negative");
  if (counts[0] + counts[1] + counts[2] < 3) throw Error(ErrorKind::Validation, "a bundle needs at least 3 states");

  BundleManifest m;
  m.seed = seed;
  m.params = params;
  m.counts = counts;
  const TriangleMesh base = generate_hat_beam(params);
  const double noise = options.noise_sigma.value_or(0.005 * bounding_box_diagonal(base.vertices()));
  if (!(noise >= 0.0)) throw Error(ErrorKind::Validation, "noise_sigma must be non-negative");

  const std::array modes{DeformationMode::UpwardBend, DeformationMode::DownwardBend, DeformationMode::AxialCrush};
  std::uint64_t id = 0;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    for (int c = 0; c < counts[k]; ++c, ++id) {
      Rng rng(derive_seed(seed, 2 * id));
      DeformationSpec spec;
      spec.mode = modes[k];
      spec.amplitude = default_amplitude(modes[k]) * rng.uniform(0.7, 1.3);
      spec.location = rng.uniform(0.2, 0.8);
      spec.noise_sigma = noise;
      m.specs.push_back(spec);
      m.state_seeds.push_back(derive_seed(seed, 2 * id + 1));
    }
  }
  return regenerate_bundle(m);
}

SimulationBundle regenerate_bundle(const BundleManifest& manifest) {
  if (manifest.specs.size() != manifest.state_seeds.size())
    throw Error(ErrorKind::Validation, "manifest lists " + std::to_string(manifest.specs.size()) + " specs but " +
                                           std::to_string(manifest.state_seeds.size()) + " seeds");
  TriangleMesh base = generate_hat_beam(manifest.params);
  std::vector<DeformedState> states(manifest.specs.size());
  parallel_for(states.size(),
               [&](std::size_t i) { states[i] = apply_deformation(base, manifest.specs[i], manifest.state_seeds[i]); });
  std::array<int, 3> tally{};
  for (const auto& s : manifest.specs) ++tally[mode_slot(s.mode)];
  if (tally != manifest.counts) throw Error(ErrorKind::Validation, "manifest counts disagree with its state list");
  return {std::move(base), std::move(states), manifest};
}

std::string manifest_to_json(const BundleManifest& m) {
  nlohmann::ordered_json j;
  j["schema_version"] = BundleManifest::kSchemaVersion;
  j["generator"] = "analytic_hat_beam";
  j["note"] = "beam dimensions and deformation fields are synthetic defaults, not measured data";
  j["seed"] = m.seed;
  j["beam"] = {{"length", m.params.length},
               {"hat_width", m.params.hat_width},
               {"hat_height", m.params.hat_height},
               {"flange_width", m.params.flange_width},
               {"axial_segments", m.params.axial_segments},
               {"cross_segments", m.params.cross_segments}};
  j["counts"] = {{"upward_bend", m.counts[0]}, {"downward_bend", m.counts[1]}, {"axial_crush", m.counts[2]}};
  j["states"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.specs.size(); ++i) {
    const auto& s = m.specs[i];
    j["states"].push_back({{"id", i},
                           {"file", "states/" + state_file_name(i, m.specs.size())},
                           {"label", to_string(s.mode)},
                           {"amplitude", s.amplitude},
                           {"location", s.location},
                           {"fold_count", s.fold_count},
                           {"noise_sigma", s.noise_sigma},
                           {"seed", m.state_seeds[i]}});
  }
  return j.dump(2) + "\n";
}

BundleManifest manifest_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int version = j.at("schema_version").get<int>();
    if (version != BundleManifest::kSchemaVersion)
      throw Error(ErrorKind::Parse, "unsupported manifest schema_version " + std::to_string(version));
    BundleManifest m;
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto& b = j.at("beam");
    m.params = {b.at("length").get<double>(),       b.at("hat_width").get<double>(),
                b.at("hat_height").get<double>(),   b.at("flange_width").get<double>(),
                b.at("axial_segments").get<int>(),  b.at("cross_segments").get<int>()};
    const auto& c = j.at("counts");
    m.counts = {c.at("upward_bend").get<int>(), c.at("downward_bend").get<int>(), c.at("axial_crush").get<int>()};
    for (const auto& s : j.at("states")) {
      DeformationSpec spec;
      spec.mode = deformation_mode_from_string(s.at("label").get<std::string>());
      spec.amplitude = s.at("amplitude").get<double>();
      spec.location = s.at("location").get<double>();
      spec.fold_count = s.at("fold_count").get<int>();
      spec.noise_sigma = s.at("noise_sigma").get<double>();
      m.specs.push_back(spec);
      m.state_seeds.push_back(s.at("seed").get<std::uint64_t>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("invalid manifest: ") + e.what());
  }
}

std::string state_file_name(std::size_t id, std::size_t total) {
  const std::size_t width = std::max<std::size_t>(3, std::to_string(total > 0 ? total - 1 : 0).size());
  std::string digits = std::to_string(id);
  return std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits + ".off";
}

void save_bundle(const SimulationBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "states", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + (dir / "states").string() + ": " + ec.message());
  write_mesh_file(bundle.base, dir / "base.off");
  for (std::size_t i = 0; i < bundle.states.size(); ++i)
    write_mesh_file(TriangleMesh(bundle.states[i].coordinates, bundle.base.triangles()),
                    dir / "states" / state_file_name(i, bundle.states.size()));
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / "manifest.json").string());
  out << manifest_to_json(bundle.manifest);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + (dir / "manifest.json").string());
}

SimulationBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + (dir / "manifest.json").string());
  std::stringstream ss;
  ss << in.rdbuf();
  BundleManifest manifest = manifest_from_json(ss.str());
  TriangleMesh base = read_mesh_file(dir / "base.off");
  std::vector<DeformedState> states(manifest.specs.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto path = dir / "states" / state_file_name(i, states.size());
    TriangleMesh mesh = read_mesh_file(path);
    if (mesh.triangles() != base.triangles())
      throw Error(ErrorKind::Validation, path.string() + ": connectivity differs from base.off");
    states[i] = {mesh.vertices(), to_string(manifest.specs[i].mode), std::nullopt};
  }
  return {std::move(base), std::move(states), std::move(manifest)};
}

}  // namespace specdeform
