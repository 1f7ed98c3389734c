#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "specdeform/descriptor.hpp"
#include "specdeform/spectral.hpp"

namespace specdeform {

struct SimilarityScore {
  double score = 0.0;
  /// Set when either vector has norm below 1e-14; score is then 0.
  bool degenerate = false;
};

/// Cosine between the descriptor's coefficient triples and the candidate's
/// triples at the same indices, both flattened to length 3 * |descriptor|.
/// Signs are kept.
SimilarityScore cosine_similarity(const DeformationDescriptor& descriptor, const SpectralCoefficients& coeffs);

/// Cosine over all shared modes of two coefficient sets (comparison studies).
SimilarityScore cosine_similarity_full(const SpectralCoefficients& a, const SpectralCoefficients& b);

/// One shape of a bundle in coefficient space.
struct Candidate {
  std::size_t id;
  std::string label;
  SpectralCoefficients coefficients;
};

struct RankedShape {
  std::size_t id;
  double score;
  std::string label;
  bool degenerate;
};

struct SimilarityRanking {
  std::vector<RankedShape> entries;
  std::string descriptor_label;
  std::string tie_break = "ascending_shape_id";
};

/// Descending score, ties by ascending shape id.
SimilarityRanking rank_bundle(const DeformationDescriptor& descriptor, const std::vector<Candidate>& bundle);

/// Same ordering rules, scored with cosine_similarity_full against a
/// reference shape instead of a descriptor.
SimilarityRanking rank_bundle_full(const SpectralCoefficients& reference, const std::string& label,
                                   const std::vector<Candidate>& bundle);

struct FilterMode {
  enum class Kind { TopK, MinScore };
  Kind kind;
  std::size_t k = 0;
  double min_score = 0.0;

  static FilterMode top_k(std::size_t k) { return {Kind::TopK, k, 0.0}; }
  static FilterMode at_least(double s) { return {Kind::MinScore, 0, s}; }
};

struct FilterResult {
  std::vector<std::size_t> ids;
  /// top_k asked for more shapes than the bundle holds.
  bool clamped = false;
};

FilterResult filter_ranking(const SimilarityRanking& ranking, const FilterMode& mode);
FilterResult filter_bundle(const DeformationDescriptor& descriptor, const std::vector<Candidate>& bundle,
                           const FilterMode& mode);

struct ClusterFeature {
  enum class Kind { FirstEigenvectorXyz, FirstModes };
  Kind kind = Kind::FirstEigenvectorXyz;
  int modes = 500;  // FirstModes only; capped at the basis size

  static ClusterFeature first_eigenvector() { return {Kind::FirstEigenvectorXyz, 1}; }
  static ClusterFeature first_m(int m) { return {Kind::FirstModes, m}; }
};

/// One row per shape.
Eigen::MatrixXd cluster_features(const std::vector<Candidate>& bundle, const ClusterFeature& feature);

struct ClusterAssignment {
  std::vector<std::size_t> ids;
  std::vector<int> clusters;  // parallel to ids, values in [0, k)
  Eigen::MatrixXd centroids;  // k rows
  double inertia = 0.0;
  int iterations = 0;
};

/// k-means++ seeding from `seed`, then Lloyd iterations until the relative
/// inertia change drops below 1e-6 or 300 iterations.
ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed);

ClusterAssignment cluster_coefficients(const std::vector<Candidate>& bundle, int k, const ClusterFeature& feature,
                                       std::uint64_t seed);

/// Fraction of shapes whose label is the majority label of their cluster.
double cluster_purity(const std::vector<int>& clusters, const std::vector<std::string>& labels);

std::string ranking_to_csv(const SimilarityRanking& ranking);
std::string clusters_to_csv(const ClusterAssignment& assignment);
/// Whitespace-separated first-eigenvector coefficients per shape for gnuplot.
std::string scatter_data(const std::vector<Candidate>& bundle, const ClusterAssignment* assignment);

}  // namespace specdeform
