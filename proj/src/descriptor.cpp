#include "specdeform/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "specdeform/error.hpp"

namespace specdeform {

namespace {

void require_same_basis(const SpectralCoefficients& a, const SpectralCoefficients& b) {
  if (a.basis_fingerprint() != b.basis_fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "coefficients come from different bases (" +
                                                    fingerprint_hex(a.basis_fingerprint()) + " vs " +
                                                    fingerprint_hex(b.basis_fingerprint()) + ")");
  if (a.num_modes() != b.num_modes())
    throw Error(ErrorKind::DimensionMismatch, "coefficient sets have different mode counts");
}

// Welford accumulation of mean and population variance.
struct RunningMoments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double delta = x - mean;
    mean += delta / count;
    m2 += delta * (x - mean);
  }
  double stddev() const { return count > 0 ? std::sqrt(m2 / count) : 0.0; }
};

IndexSet select_where(const SpectralCoefficients& coeffs, const Eigen::Vector3d& t) {
  if ((t.array() < 0.0).any() || !t.allFinite())
    throw Error(ErrorKind::Usage, "threshold must be a finite non-negative value");
  IndexSet out;
  const auto& v = coeffs.values();
  for (Eigen::Index j = 0; j < v.rows(); ++j)
    if (std::abs(v(j, 0)) > t[0] || std::abs(v(j, 1)) > t[1] || std::abs(v(j, 2)) > t[2])
      out.push_back(static_cast<int>(j + 1));
  if (out.empty())
    throw Error(ErrorKind::EmptySelection, "no coefficient exceeds the threshold; decrease t");
  return out;
}

const char* mode_name(SelectionMode mode) {
  return mode == SelectionMode::Magnitude ? "magnitude" : "baseline_difference";
}

SelectionMode mode_from_name(const std::string& name) {
  if (name == "magnitude") return SelectionMode::Magnitude;
  if (name == "baseline_difference") return SelectionMode::BaselineDifference;
  throw Error(ErrorKind::Parse, "unknown selection_mode '" + name + "'");
}

}  // namespace

DeformationDescriptor::DeformationDescriptor(std::vector<DescriptorEntry> entries, double threshold,
                                             SelectionMode mode, std::uint64_t basis_fingerprint, std::string label)
    : entries_(std::move(entries)),
      threshold_(threshold),
      mode_(mode),
      basis_fingerprint_(basis_fingerprint),
      label_(std::move(label)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].index < 1) throw Error(ErrorKind::Validation, "descriptor indices are 1-based");
    if (i > 0 && entries_[i].index <= entries_[i - 1].index)
      throw Error(ErrorKind::Validation, "descriptor indices must be strictly increasing");
  }
}

IndexSet DeformationDescriptor::indices() const {
  IndexSet out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.index);
  return out;
}

double statistical_threshold(const SpectralCoefficients& coeffs) {
  RunningMoments moments;
  const auto& v = coeffs.values();
  for (Eigen::Index j = 0; j < v.rows(); ++j)
    for (int c = 0; c < 3; ++c) moments.add(std::abs(v(j, c)));
  return moments.mean + moments.stddev();
}

Eigen::Vector3d statistical_threshold_per_axis(const SpectralCoefficients& coeffs) {
  Eigen::Vector3d out;
  const auto& v = coeffs.values();
  for (int c = 0; c < 3; ++c) {
    RunningMoments moments;
    for (Eigen::Index j = 0; j < v.rows(); ++j) moments.add(std::abs(v(j, c)));
    out[c] = moments.mean + moments.stddev();
  }
  return out;
}

IndexSet select_by_threshold(const SpectralCoefficients& coeffs, double t) {
  return select_where(coeffs, Eigen::Vector3d::Constant(t));
}

IndexSet select_by_threshold(const SpectralCoefficients& coeffs, const Eigen::Vector3d& per_axis) {
  return select_where(coeffs, per_axis);
}

SpectralCoefficients coefficient_difference(const SpectralCoefficients& deformed, const SpectralCoefficients& base) {
  require_same_basis(deformed, base);
  return SpectralCoefficients(deformed.values() - base.values(), deformed.basis_fingerprint());
}

IndexSet select_by_baseline_difference(const SpectralCoefficients& deformed, const SpectralCoefficients& base,
                                       double t) {
  return select_by_threshold(coefficient_difference(deformed, base), t);
}

DeformationDescriptor complete_descriptor(const IndexSet& indices, const SpectralCoefficients& coeffs, bool augment,
                                          const DescriptorInfo& info) {
  std::set<int> chosen(indices.begin(), indices.end());
  if (augment) {
    chosen.insert(1);
    if (coeffs.num_modes() >= 2) chosen.insert(2);
  }
  std::vector<DescriptorEntry> entries;
  entries.reserve(chosen.size());
  for (int idx : chosen) {
    if (idx < 1 || idx > coeffs.num_modes())
      throw Error(ErrorKind::Validation, "mode index " + std::to_string(idx) + " outside the basis range");
    const auto row = coeffs.triple(idx);
    entries.push_back({idx, row[0], row[1], row[2]});
  }
  return DeformationDescriptor(std::move(entries), info.threshold, info.mode, coeffs.basis_fingerprint(), info.label);
}

double reconstruction_error(const SpectralBasis& basis, const SpectralCoefficients& coeffs, const IndexSet& subset,
                            const DeformedState& reference) {
  if (static_cast<Eigen::Index>(reference.num_vertices()) != basis.num_vertices())
    throw Error(ErrorKind::DimensionMismatch, "reference state does not match the basis vertex count");
  const Reconstruction rec = reconstruct_geometry(basis, coeffs, subset);
  const Eigen::VectorXd dist2 = (rec.coordinates - reference.coordinates).rowwise().squaredNorm();
  return std::sqrt(dist2.mean());
}

double truncated_reconstruction_error(const SpectralCoefficients& coeffs, const IndexSet& subset,
                                      Eigen::Index num_vertices) {
  std::vector<bool> kept(static_cast<std::size_t>(coeffs.num_modes()), false);
  for (int idx : subset) {
    if (idx < 1 || idx > coeffs.num_modes())
      throw Error(ErrorKind::Validation, "mode index " + std::to_string(idx) + " outside the basis range");
    kept[static_cast<std::size_t>(idx - 1)] = true;
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < coeffs.num_modes(); ++j)
    if (!kept[static_cast<std::size_t>(j)]) sum += coeffs.values().row(j).squaredNorm();
  return std::sqrt(sum / static_cast<double>(num_vertices));
}

TuneResult tune_threshold(const SpectralCoefficients& coeffs, const SpectralBasis& basis, const DeformedState& state,
                          const TuneOptions& options) {
  if (!(options.target_rms >= 0.0)) throw Error(ErrorKind::Usage, "target RMS must be non-negative");
  if (options.max_iters < 1) throw Error(ErrorKind::Usage, "max_iters must be positive");
  if (static_cast<Eigen::Index>(state.num_vertices()) != basis.num_vertices())
    throw Error(ErrorKind::DimensionMismatch, "state does not match the basis vertex count");
  if (coeffs.basis_fingerprint() != basis.fingerprint())
    throw Error(ErrorKind::FingerprintMismatch, "coefficients were not produced with this basis");

  const Eigen::Index n = basis.num_vertices();
  auto attempt = [&](double t) -> std::optional<std::pair<DeformationDescriptor, double>> {
    IndexSet selected;
    try {
      selected = select_by_threshold(coeffs, t);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::EmptySelection) return std::nullopt;
      throw;
    }
    auto descriptor =
        complete_descriptor(selected, coeffs, options.augment, {t, SelectionMode::Magnitude, options.label});
    const double err = truncated_reconstruction_error(coeffs, descriptor.indices(), n);
    return std::make_pair(std::move(descriptor), err);
  };

  auto lo_result = attempt(0.0);
  if (!lo_result) throw Error(ErrorKind::EmptySelection, "all coefficients are zero; nothing to select");
  if (lo_result->second > options.target_rms)
    throw Error(ErrorKind::Numerical, "target RMS unreachable: best achieved " + std::to_string(lo_result->second) +
                                          " at t = 0");

  double lo = 0.0;
  double hi = coeffs.values().cwiseAbs().maxCoeff();
  int iterations = 0;
  for (; iterations < options.max_iters; ++iterations) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    auto r = attempt(mid);
    if (r && r->second <= options.target_rms) {
      lo = mid;
      lo_result = std::move(r);
    } else {
      hi = mid;
    }
  }
  return {lo, std::move(lo_result->first), lo_result->second, iterations};
}

std::string to_string(SelectionMode mode) { return mode_name(mode); }

std::string descriptor_to_json(const DeformationDescriptor& descriptor) {
  nlohmann::ordered_json j;
  j["label"] = descriptor.label();
  j["selection_mode"] = mode_name(descriptor.selection_mode());
  j["threshold_t"] = descriptor.threshold();
  j["basis_fingerprint"] = fingerprint_hex(descriptor.basis_fingerprint());
  j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : descriptor.entries()) {
    nlohmann::ordered_json entry;
    entry["index"] = e.index;
    entry["alpha_x"] = e.alpha_x;
    entry["alpha_y"] = e.alpha_y;
    entry["alpha_z"] = e.alpha_z;
    j["entries"].push_back(std::move(entry));
  }
  return j.dump(2) + "\n";
}

DeformationDescriptor descriptor_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<DescriptorEntry> entries;
    for (const auto& e : j.at("entries"))
      entries.push_back({e.at("index").get<int>(), e.at("alpha_x").get<double>(), e.at("alpha_y").get<double>(),
                         e.at("alpha_z").get<double>()});
    return DeformationDescriptor(std::move(entries), j.at("threshold_t").get<double>(),
                                 mode_from_name(j.at("selection_mode").get<std::string>()),
                                 fingerprint_from_hex(j.at("basis_fingerprint").get<std::string>()),
                                 j.at("label").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("invalid descriptor JSON: ") + e.what());
  }
}

void write_descriptor(const DeformationDescriptor& descriptor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << descriptor_to_json(descriptor);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

DeformationDescriptor read_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return descriptor_from_json(ss.str());
}

}  // namespace specdeform
