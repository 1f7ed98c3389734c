#include "specdeform/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "specdeform/error.hpp"
#include "specdeform/parallel.hpp"
#include "specdeform/random.hpp"
#include "text_util.hpp"

namespace specdeform {

namespace {

constexpr double kDegenerateNorm = 1e-14;

SimilarityScore cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kDegenerateNorm || nb < kDegenerateNorm) return {0.0, true};
  return {std::clamp(a.dot(b) / (na * nb), -1.0, 1.0), false};
}

void require_fingerprint(std::uint64_t expected, const SpectralCoefficients& coeffs) {
  if (coeffs.basis_fingerprint() != expected)
    throw Error(ErrorKind::FingerprintMismatch, "candidate coefficients use basis " +
                                                    fingerprint_hex(coeffs.basis_fingerprint()) +
                                                    ", descriptor expects " + fingerprint_hex(expected));
}

double squared_distance(const Eigen::MatrixXd& points, Eigen::Index row, const Eigen::MatrixXd& centers,
                        Eigen::Index c) {
  return (points.row(row) - centers.row(c)).squaredNorm();
}

}  // namespace

SimilarityScore cosine_similarity(const DeformationDescriptor& descriptor, const SpectralCoefficients& coeffs) {
  require_fingerprint(descriptor.basis_fingerprint(), coeffs);
  if (descriptor.size() == 0) throw Error(ErrorKind::Validation, "descriptor is empty");
  const auto n = static_cast<Eigen::Index>(3 * descriptor.size());
  Eigen::VectorXd d(n), c(n);
  Eigen::Index pos = 0;
  for (const auto& e : descriptor.entries()) {
    if (e.index > coeffs.num_modes())
      throw Error(ErrorKind::DimensionMismatch, "descriptor index " + std::to_string(e.index) +
                                                    " beyond candidate mode count");
    const auto row = coeffs.triple(e.index);
    d.segment<3>(pos) << e.alpha_x, e.alpha_y, e.alpha_z;
    c.segment<3>(pos) = row.transpose();
    pos += 3;
  }
  return cosine(d, c);
}

SimilarityScore cosine_similarity_full(const SpectralCoefficients& a, const SpectralCoefficients& b) {
  require_fingerprint(a.basis_fingerprint(), b);
  const Eigen::Index m = std::min(a.num_modes(), b.num_modes());
  const Eigen::MatrixXd ta = a.values().topRows(m).transpose();
  const Eigen::MatrixXd tb = b.values().topRows(m).transpose();
  return cosine(ta.reshaped(), tb.reshaped());
}

namespace {

template <typename Score>
SimilarityRanking rank_with(const std::vector<Candidate>& bundle, const std::string& label, Score score) {
  if (bundle.empty()) throw Error(ErrorKind::Validation, "cannot rank an empty bundle");
  std::vector<RankedShape> entries(bundle.size());
  parallel_for(bundle.size(), [&](std::size_t i) {
    const SimilarityScore s = score(bundle[i].coefficients);
    entries[i] = {bundle[i].id, s.score, bundle[i].label, s.degenerate};
  });
  std::sort(entries.begin(), entries.end(), [](const RankedShape& a, const RankedShape& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return {std::move(entries), label, "ascending_shape_id"};
}

}  // namespace

SimilarityRanking rank_bundle(const DeformationDescriptor& descriptor, const std::vector<Candidate>& bundle) {
  return rank_with(bundle, descriptor.label(),
                   [&](const SpectralCoefficients& c) { return cosine_similarity(descriptor, c); });
}

SimilarityRanking rank_bundle_full(const SpectralCoefficients& reference, const std::string& label,
                                   const std::vector<Candidate>& bundle) {
  return rank_with(bundle, label,
                   [&](const SpectralCoefficients& c) { return cosine_similarity_full(reference, c); });
}

FilterResult filter_ranking(const SimilarityRanking& ranking, const FilterMode& mode) {
  FilterResult out;
  if (mode.kind == FilterMode::Kind::TopK) {
    const std::size_t take = std::min(mode.k, ranking.entries.size());
    out.clamped = mode.k > ranking.entries.size();
    for (std::size_t i = 0; i < take; ++i) out.ids.push_back(ranking.entries[i].id);
  } else {
    if (!std::isfinite(mode.min_score)) throw Error(ErrorKind::Usage, "minimum score must be finite");
    for (const auto& e : ranking.entries) {
      if (e.score < mode.min_score) break;
      out.ids.push_back(e.id);
    }
  }
  return out;
}

FilterResult filter_bundle(const DeformationDescriptor& descriptor, const std::vector<Candidate>& bundle,
                           const FilterMode& mode) {
  return filter_ranking(rank_bundle(descriptor, bundle), mode);
}

Eigen::MatrixXd cluster_features(const std::vector<Candidate>& bundle, const ClusterFeature& feature) {
  if (bundle.empty()) throw Error(ErrorKind::Validation, "cannot cluster an empty bundle");
  Eigen::Index modes = 1;
  if (feature.kind == ClusterFeature::Kind::FirstModes) {
    if (feature.modes < 1) throw Error(ErrorKind::Usage, "feature mode count must be positive");
    modes = feature.modes;
    for (const auto& c : bundle) modes = std::min(modes, c.coefficients.num_modes());
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(bundle.size()), 3 * modes);
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    require_fingerprint(bundle.front().coefficients.basis_fingerprint(), bundle[i].coefficients);
    const Eigen::MatrixXd t = bundle[i].coefficients.values().topRows(modes).transpose();
    out.row(static_cast<Eigen::Index>(i)) = t.reshaped().transpose();
  }
  return out;
}

ClusterAssignment kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  const Eigen::Index n = points.rows();
  if (k < 2) throw Error(ErrorKind::Usage, "cluster count must be at least 2");
  if (k > n) throw Error(ErrorKind::Usage, "cluster count exceeds the number of shapes");
  {
    std::set<std::vector<double>> distinct;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVectorXd row = points.row(i);
      distinct.emplace(row.data(), row.data() + row.size());
    }
    if (static_cast<Eigen::Index>(distinct.size()) < k)
      throw Error(ErrorKind::Validation, "cluster count exceeds the number of distinct points (" +
                                             std::to_string(distinct.size()) + ")");
  }

  // k-means++ seeding.
  Rng rng(seed);
  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) nearest[i] = squared_distance(points, i, centers, 0);
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest[i];
        if (nearest[i] > 0.0 && r < acc) {
          pick = i;
          break;
        }
      }
      // Rounding at the tail: fall back to the last point with positive weight.
      if (nearest[pick] == 0.0)
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (nearest[i] > 0.0) {
            pick = i;
            break;
          }
    }
    centers.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], squared_distance(points, i, centers, c));
  }

  ClusterAssignment out;
  out.clusters.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist(n);
  double previous = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 300; ++iter) {
    out.iterations = iter + 1;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = squared_distance(points, i, centers, 0);
      for (int c = 1; c < k; ++c) {
        const double d = squared_distance(points, i, centers, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      out.clusters[static_cast<std::size_t>(i)] = best;
      dist[i] = best_d;
      inertia += best_d;
    }
    out.inertia = inertia;

    // Update step; an empty cluster takes the point farthest from its center.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(out.clusters[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[static_cast<std::size_t>(out.clusters[static_cast<std::size_t>(i)])];
    }
    bool reassigned = false;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) {
        Eigen::Index far = 0;
        dist.maxCoeff(&far);
        centers.row(c) = points.row(far);
        dist[far] = 0.0;
        reassigned = true;
      } else {
        centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
    if (!reassigned && (inertia == 0.0 || std::abs(previous - inertia) < 1e-6 * previous)) break;
    previous = inertia;
  }
  out.centroids = centers;
  out.ids.resize(static_cast<std::size_t>(n));
  std::iota(out.ids.begin(), out.ids.end(), 0);
  return out;
}

ClusterAssignment cluster_coefficients(const std::vector<Candidate>& bundle, int k, const ClusterFeature& feature,
                                       std::uint64_t seed) {
  ClusterAssignment out = kmeans(cluster_features(bundle, feature), k, seed);
  for (std::size_t i = 0; i < bundle.size(); ++i) out.ids[i] = bundle[i].id;
  return out;
}

double cluster_purity(const std::vector<int>& clusters, const std::vector<std::string>& labels) {
  if (clusters.size() != labels.size() || clusters.empty())
    throw Error(ErrorKind::DimensionMismatch, "cluster and label lists differ in length");
  std::map<int, std::map<std::string, int>> counts;
  for (std::size_t i = 0; i < clusters.size(); ++i) ++counts[clusters[i]][labels[i]];
  int majority = 0;
  for (const auto& [cluster, by_label] : counts) {
    int best = 0;
    for (const auto& [label, count] : by_label) best = std::max(best, count);
    majority += best;
  }
  return static_cast<double>(majority) / static_cast<double>(clusters.size());
}

std::string ranking_to_csv(const SimilarityRanking& ranking) {
  std::string out = "shape_id,score,label\n";
  for (const auto& e : ranking.entries)
    out += std::to_string(e.id) + ',' + detail::format_double(e.score) + ',' + e.label + '\n';
  return out;
}

std::string clusters_to_csv(const ClusterAssignment& assignment) {
  std::string out = "shape_id,cluster\n";
  for (std::size_t i = 0; i < assignment.ids.size(); ++i)
    out += std::to_string(assignment.ids[i]) + ',' + std::to_string(assignment.clusters[i]) + '\n';
  return out;
}

std::string scatter_data(const std::vector<Candidate>& bundle, const ClusterAssignment* assignment) {
  std::string out = "# shape_id alpha1_x alpha1_y alpha1_z cluster label\n";
  for (std::size_t i = 0; i < bundle.size(); ++i) {
    const auto row = bundle[i].coefficients.triple(1);
    out += std::to_string(bundle[i].id);
    for (int c = 0; c < 3; ++c) out += ' ' + detail::format_double(row[c]);
    out += ' ' + std::to_string(assignment ? assignment->clusters[i] : -1);
    out += ' ' + (bundle[i].label.empty() ? std::string("-") : bundle[i].label) + '\n';
  }
  return out;
}

}  // namespace specdeform
