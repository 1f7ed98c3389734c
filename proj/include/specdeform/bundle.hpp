#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specdeform/mesh.hpp"

namespace specdeform {

/// Hat-section beam extruded along x. The hat opens towards -z and sits on a
/// flat base plate slightly below the flanges, so the profile is one closed
/// loop and the surface is a single tube.
struct BeamParams {
  double length = 400.0;
  double hat_width = 60.0;
  double hat_height = 40.0;
  double flange_width = 15.0;
  int axial_segments = 60;
  /// Segments across the hat top; other profile pieces use the same spacing.
  int cross_segments = 12;
};

enum class DeformationMode { UpwardBend, DownwardBend, AxialCrush };

std::string to_string(DeformationMode mode);
DeformationMode deformation_mode_from_string(const std::string& name);

struct DeformationSpec {
  DeformationMode mode = DeformationMode::UpwardBend;
  double amplitude = 0.0;
  /// Bend apex or fold center as a fraction of the beam length.
  double location = 0.5;
  int fold_count = 3;
  double noise_sigma = 0.0;
};

/// Mode defaults used by generate_bundle before randomization.
double default_amplitude(DeformationMode mode);

/// Closed loop of (y, z) profile points, clockwise in the (y, z) plane.
std::vector<std::array<double, 2>> hat_profile(const BeamParams& params);

/// Vertex (i, j) is ring i (axial position) and profile point j, stored at
/// i * ring_size + j. Axial ends stay open.
TriangleMesh generate_hat_beam(const BeamParams& params);

/// Deforms `base` analytically. Axis conventions: x axial, z vertical; the
/// cross-section center is the bounding-box center in (y, z).
DeformedState apply_deformation(const TriangleMesh& base, const DeformationSpec& spec, std::uint64_t seed);

/// Non-fatal plausibility problems (folds deeper than the section, crush
/// longer than the fold zone). Empty when the spec looks sane.
std::vector<std::string> sanity_warnings(const TriangleMesh& base, const DeformationSpec& spec);

struct BundleManifest {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 0;
  BeamParams params;
  std::array<int, 3> counts{};  // upward, downward, crush
  std::vector<DeformationSpec> specs;
  std::vector<std::uint64_t> state_seeds;
};

struct SimulationBundle {
  TriangleMesh base;
  std::vector<DeformedState> states;
  BundleManifest manifest;
};

struct BundleOptions {
  /// Overrides the default noise of 0.5% of the bounding-box diagonal.
  std::optional<double> noise_sigma;
};

/// counts = (upward, downward, crush). States are ordered by mode in that
/// order; each gets amplitude default * U(0.7, 1.3), location U(0.2, 0.8) and
/// its own derived seed.
SimulationBundle generate_bundle(const BeamParams& params, const std::array<int, 3>& counts, std::uint64_t seed,
                                 const BundleOptions& options = {});

/// Rebuilds the states exactly from a manifest.
SimulationBundle regenerate_bundle(const BundleManifest& manifest);

std::string manifest_to_json(const BundleManifest& manifest);
BundleManifest manifest_from_json(const std::string& text);

/// File name of state `id` inside states/ (zero-padded, at least 3 digits).
std::string state_file_name(std::size_t id, std::size_t total);

/// Writes base.off, states/NNN.off and manifest.json into `dir`.
void save_bundle(const SimulationBundle& bundle, const std::filesystem::path& dir);
SimulationBundle load_bundle(const std::filesystem::path& dir);

}  // namespace specdeform
