#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "specdeform/descriptor.hpp"
#include "specdeform/error.hpp"
#include "specdeform/random.hpp"
#include "specdeform/retrieval.hpp"
#include "support.hpp"

using namespace specdeform;

namespace {

DeformationDescriptor statistical_descriptor(const SpectralCoefficients& c, const std::string& label = "d") {
  const double t = statistical_threshold(c);
  return complete_descriptor(select_by_threshold(c, t), c, true, {t, SelectionMode::Magnitude, label});
}

// Flatten descriptor and candidate triples by hand and take dot / norms.
double cosine_oracle(const DeformationDescriptor& d, const SpectralCoefficients& c) {
  double dot = 0.0, nd = 0.0, nc = 0.0;
  for (const auto& e : d.entries()) {
    const double dv[3] = {e.alpha_x, e.alpha_y, e.alpha_z};
    for (int k = 0; k < 3; ++k) {
      const double cv = c.values()(e.index - 1, k);
      dot += dv[k] * cv;
      nd += dv[k] * dv[k];
      nc += cv * cv;
    }
  }
  return dot / std::sqrt(nd * nc);
}

std::size_t first_with_label(const std::vector<Candidate>& b, const std::string& label) {
  for (const auto& c : b)
    if (c.label == label) return c.id;
  return 0;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("self similarity and antipodal candidates") {
    const auto& p = testing::small_pipeline();
    const auto& c = p.coeffs[9];
    const auto d = statistical_descriptor(c);
    CHECK(cosine_similarity(d, c).score == doctest::Approx(1.0).epsilon(1e-12));
    const SpectralCoefficients neg(-c.values(), c.basis_fingerprint());
    CHECK(cosine_similarity(d, neg).score == doctest::Approx(-1.0).epsilon(1e-12));
  }

  TEST_CASE("scores match a flatten-and-dot oracle over the bundle") {
    const auto& p = testing::small_pipeline();
    const auto d = statistical_descriptor(p.coeffs[10]);
    for (const auto& c : p.coeffs) CHECK(std::abs(cosine_similarity(d, c).score - cosine_oracle(d, c)) <= 1e-12);
  }

  TEST_CASE("cosine is invariant under positive scaling") {
    const auto& p = testing::small_pipeline();
    const auto d = statistical_descriptor(p.coeffs[1]);
    for (const auto& c : p.coeffs) {
      const SpectralCoefficients scaled(7.3 * c.values(), c.basis_fingerprint());
      CHECK(std::abs(cosine_similarity(d, scaled).score - cosine_similarity(d, c).score) <= 1e-12);
    }
  }

  TEST_CASE("degenerate and mismatched inputs") {
    const auto& p = testing::small_pipeline();
    const auto d = statistical_descriptor(p.coeffs[0]);
    const SpectralCoefficients zero(Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(p.basis.num_modes(), 3),
                                    p.basis.fingerprint());
    const SimilarityScore s = cosine_similarity(d, zero);
    CHECK(s.degenerate);
    CHECK(s.score == 0.0);
    const SpectralCoefficients other(p.coeffs[0].values(), p.basis.fingerprint() + 1);
    try {
      cosine_similarity(d, other);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::FingerprintMismatch);
    }
  }

  TEST_CASE("single-shape bundle and duplicate tie-break") {
    const auto& p = testing::small_pipeline();
    const auto d = statistical_descriptor(p.coeffs[3]);
    const auto alone = rank_bundle(d, {{3, "x", p.coeffs[3]}});
    REQUIRE(alone.entries.size() == 1);
    CHECK(alone.entries[0].score == doctest::Approx(1.0));

    auto bundle = p.candidates();
    bundle.push_back({bundle.size(), "dup", p.coeffs[3]});
    const auto r = rank_bundle(d, bundle);
    CHECK(r.entries[0].id == 3);
    CHECK(r.entries[1].id == bundle.size() - 1);
    CHECK(r.entries[0].score == r.entries[1].score);
    CHECK(r.tie_break == "ascending_shape_id");
    CHECK_THROWS_AS(rank_bundle(d, {}), Error);
  }

  TEST_CASE("ranking is a permutation with non-increasing scores") {
    const auto& p = testing::small_pipeline();
    const auto r = rank_bundle(statistical_descriptor(p.coeffs[5]), p.candidates());
    std::set<std::size_t> ids;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      ids.insert(r.entries[i].id);
      if (i > 0) CHECK(r.entries[i - 1].score >= r.entries[i].score);
    }
    CHECK(ids.size() == p.coeffs.size());
  }

  TEST_CASE("exemplar ranks first with a same-mode neighbour") {
    const auto& p = testing::small_pipeline();
    const auto bundle = p.candidates();
    for (const std::string label : {"upward_bend", "downward_bend", "axial_crush"}) {
      const std::size_t ex = first_with_label(bundle, label);
      const auto r = rank_bundle(statistical_descriptor(p.coeffs[ex], label), bundle);
      CHECK(r.entries[0].id == ex);
      CHECK(r.entries[1].label == label);
    }
  }

  TEST_CASE("crush scores beat bend scores regardless of fold location") {
    const auto& p = testing::small_pipeline();
    const auto bundle = p.candidates();
    const std::size_t ex = first_with_label(bundle, "axial_crush");
    const auto r = rank_bundle(statistical_descriptor(p.coeffs[ex]), bundle);
    double worst_crush = 1.0, best_bend = -1.0;
    for (const auto& e : r.entries) {
      if (e.label == "axial_crush")
        worst_crush = std::min(worst_crush, e.score);
      else
        best_bend = std::max(best_bend, e.score);
    }
    CHECK(worst_crush > best_bend);
  }

  TEST_CASE("filters") {
    const auto& p = testing::small_pipeline();
    const auto d = statistical_descriptor(p.coeffs[0]);
    const auto bundle = p.candidates();
    const auto r = rank_bundle(d, bundle);
    CHECK(filter_bundle(d, bundle, FilterMode::at_least(1.0 + 1e-9)).ids.empty());
    const auto all = filter_bundle(d, bundle, FilterMode::top_k(bundle.size()));
    CHECK(all.ids.size() == bundle.size());
    CHECK_FALSE(all.clamped);
    const auto more = filter_bundle(d, bundle, FilterMode::top_k(bundle.size() + 5));
    CHECK(more.clamped);
    CHECK(more.ids == all.ids);
    const auto top = filter_bundle(d, bundle, FilterMode::top_k(9));
    REQUIRE(top.ids.size() == 9);
    for (std::size_t i = 0; i < 9; ++i) CHECK(top.ids[i] == r.entries[i].id);
    const auto above = filter_ranking(r, FilterMode::at_least(r.entries[3].score));
    CHECK(above.ids.size() >= 4);
    CHECK_THROWS_AS(filter_ranking(r, FilterMode::at_least(std::nan(""))), Error);
  }

  TEST_CASE("full-vector ranking") {
    const auto& p = testing::small_pipeline();
    const auto r = rank_bundle_full(p.coeffs[2], "ref", p.candidates());
    CHECK(r.entries[0].id == 2);
    CHECK(r.entries[0].score == doctest::Approx(1.0));
    CHECK(r.descriptor_label == "ref");
  }

  TEST_CASE("k-means separates two blobs") {
    Rng rng(3);
    Eigen::MatrixXd pts(40, 2);
    for (int i = 0; i < 40; ++i) pts.row(i) << (i < 20 ? 0.0 : 50.0) + rng.normal(), rng.normal();
    const auto a = kmeans(pts, 2, 9);
    for (int i = 1; i < 20; ++i) CHECK(a.clusters[static_cast<std::size_t>(i)] == a.clusters[0]);
    for (int i = 21; i < 40; ++i) CHECK(a.clusters[static_cast<std::size_t>(i)] == a.clusters[20]);
    CHECK(a.clusters[0] != a.clusters[20]);
    CHECK(a.centroids.allFinite());
  }

  TEST_CASE("k equal to the number of points gives zero inertia") {
    Eigen::MatrixXd pts(5, 3);
    pts << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 2, 2, 2;
    const auto a = kmeans(pts, 5, 1);
    CHECK(a.inertia == 0.0);
    CHECK(std::set<int>(a.clusters.begin(), a.clusters.end()).size() == 5);
  }

  TEST_CASE("k-means argument checks") {
    Eigen::MatrixXd pts(4, 1);
    pts << 1, 1, 1, 2;
    CHECK_THROWS_AS(kmeans(pts, 1, 0), Error);
    CHECK_THROWS_AS(kmeans(pts, 5, 0), Error);
    CHECK_THROWS_AS(kmeans(pts, 3, 0), Error);
    CHECK_NOTHROW(kmeans(pts, 2, 0));
  }

  TEST_CASE("clustering the bundle recovers the modes") {
    const auto& p = testing::small_pipeline();
    const auto bundle = p.candidates();
    std::vector<std::string> labels;
    for (const auto& c : bundle) labels.push_back(c.label);
    for (const auto& feature : {ClusterFeature::first_eigenvector(), ClusterFeature::first_m(500)}) {
      const auto a = cluster_coefficients(bundle, 3, feature, 4);
      CHECK(cluster_purity(a.clusters, labels) >= 0.9);
      const auto again = cluster_coefficients(bundle, 3, feature, 4);
      CHECK(again.clusters == a.clusters);
      CHECK(again.inertia == a.inertia);
    }
    CHECK(cluster_features(bundle, ClusterFeature::first_m(500)).cols() == 3 * p.basis.num_modes());
  }

  TEST_CASE("purity arithmetic") {
    CHECK(cluster_purity({0, 0, 1, 1}, {"a", "a", "b", "a"}) == doctest::Approx(0.75));
    CHECK(cluster_purity({0, 1, 2}, {"a", "a", "a"}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(cluster_purity({0}, {"a", "b"}), Error);
  }

  TEST_CASE("CSV and scatter exports") {
    const auto& p = testing::small_pipeline();
    const auto bundle = p.candidates();
    const auto r = rank_bundle(statistical_descriptor(p.coeffs[0]), bundle);
    const std::string csv = ranking_to_csv(r);
    CHECK(csv.rfind("shape_id,score,label\n0,1,upward_bend\n", 0) == 0);
    const auto a = cluster_coefficients(bundle, 3, ClusterFeature::first_eigenvector(), 1);
    CHECK(clusters_to_csv(a).rfind("shape_id,cluster\n0,", 0) == 0);
    const std::string scatter = scatter_data(bundle, &a);
    CHECK(std::count(scatter.begin(), scatter.end(), '\n') == static_cast<long>(bundle.size()) + 1);
  }
}
