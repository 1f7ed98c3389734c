#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "specdeform/spectral.hpp"

namespace specdeform {

enum class SelectionMode { Magnitude, BaselineDifference };

struct DescriptorEntry {
  int index;  // 1-based eigenvector index
  double alpha_x;
  double alpha_y;
  double alpha_z;

  bool operator==(const DescriptorEntry&) const = default;
};

/// The compact deformation signature: full coefficient triples for a small,
/// adaptively selected set of eigenvectors.
class DeformationDescriptor {
 public:
  /// Entries must have strictly increasing, positive indices.
  DeformationDescriptor(std::vector<DescriptorEntry> entries, double threshold, SelectionMode mode,
                        std::uint64_t basis_fingerprint, std::string label);

  const std::vector<DescriptorEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  IndexSet indices() const;
  double threshold() const { return threshold_; }
  SelectionMode selection_mode() const { return mode_; }
  std::uint64_t basis_fingerprint() const { return basis_fingerprint_; }
  const std::string& label() const { return label_; }

  /// A descriptor is expected to be much smaller than the mesh; true when
  /// it exceeds 10% of the vertex count.
  bool oversized(Eigen::Index num_vertices) const { return static_cast<double>(size()) > 0.1 * static_cast<double>(num_vertices); }

  bool operator==(const DeformationDescriptor&) const = default;

 private:
  std::vector<DescriptorEntry> entries_;
  double threshold_;
  SelectionMode mode_;
  std::uint64_t basis_fingerprint_;
  std::string label_;
};

/// mean(|alpha|) + std(|alpha|) over all 3M absolute coefficients (population std).
double statistical_threshold(const SpectralCoefficients& coeffs);

/// The same rule applied to each axis separately.
Eigen::Vector3d statistical_threshold_per_axis(const SpectralCoefficients& coeffs);

/// { j : |a_j^x| > t or |a_j^y| > t or |a_j^z| > t }. Throws EmptySelection
/// when nothing exceeds t.
IndexSet select_by_threshold(const SpectralCoefficients& coeffs, double t);
IndexSet select_by_threshold(const SpectralCoefficients& coeffs, const Eigen::Vector3d& per_axis);

/// deformed - base, both from the same basis.
SpectralCoefficients coefficient_difference(const SpectralCoefficients& deformed, const SpectralCoefficients& base);

/// Threshold rule applied to deformed - base.
IndexSet select_by_baseline_difference(const SpectralCoefficients& deformed, const SpectralCoefficients& base,
                                       double t);

struct DescriptorInfo {
  double threshold = 0.0;
  SelectionMode mode = SelectionMode::Magnitude;
  std::string label;
};

/// Stores all three axis coefficients for every selected index; with
/// `augment`, modes 1 and 2 are added as well.
DeformationDescriptor complete_descriptor(const IndexSet& indices, const SpectralCoefficients& coeffs, bool augment,
                                          const DescriptorInfo& info = {});

/// RMS over vertices of ||reconstruction_i - reference_i||.
double reconstruction_error(const SpectralBasis& basis, const SpectralCoefficients& coeffs, const IndexSet& subset,
                            const DeformedState& reference);

/// Error of a subset against the reconstruction from all M coefficients,
/// computed in coefficient space (orthonormal basis).
double truncated_reconstruction_error(const SpectralCoefficients& coeffs, const IndexSet& subset,
                                      Eigen::Index num_vertices);

struct TuneOptions {
  double target_rms = 0.0;
  int max_iters = 32;
  bool augment = true;
  std::string label;
};

struct TuneResult {
  double threshold;
  DeformationDescriptor descriptor;
  double achieved_rms;
  int iterations;
};

/// Bisection on t over [0, max|alpha|] for the largest threshold whose
/// descriptor reconstructs the M-truncated geometry within target_rms.
TuneResult tune_threshold(const SpectralCoefficients& coeffs, const SpectralBasis& basis, const DeformedState& state,
                          const TuneOptions& options);

std::string descriptor_to_json(const DeformationDescriptor& descriptor);
DeformationDescriptor descriptor_from_json(const std::string& text);
void write_descriptor(const DeformationDescriptor& descriptor, const std::filesystem::path& path);
DeformationDescriptor read_descriptor(const std::filesystem::path& path);

std::string to_string(SelectionMode mode);

}  // namespace specdeform
