#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "lindml/datasets.hpp"
#include "lindml/evaluation.hpp"

using namespace lindml;

namespace {

std::vector<Vector> unit_points(std::size_t n, std::size_t d, SeededRng& rng) {
  std::vector<Vector> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(uniform_sphere_point(d, rng));
  return out;
}

// full sort of every neighbour list, stable so equal distances keep index order
std::map<std::size_t, double> recall_oracle(const std::vector<Vector>& x,
                                            const std::vector<std::size_t>& y,
                                            const std::vector<std::size_t>& ks) {
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    double hits = 0;
    for (std::size_t q = 0; q < x.size(); ++q) {
      std::vector<std::size_t> order;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (i != q) order.push_back(i);
      }
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return euclid_dist(x[q], x[a]) < euclid_dist(x[q], x[b]);
      });
      bool hit = false;
      for (std::size_t r = 0; r < k; ++r) hit = hit || y[order[r]] == y[q];
      hits += hit ? 1 : 0;
    }
    out[k] = hits / static_cast<double>(x.size());
  }
  return out;
}

Matrix random_orthogonal(std::size_t d, SeededRng& rng) {
  // Gram-Schmidt on a Gaussian matrix
  std::vector<Vector> basis;
  while (basis.size() < d) {
    Vector v = standard_normal_vector(d, rng);
    for (const Vector& b : basis) {
      const double p = dot(v, b);
      for (std::size_t t = 0; t < d; ++t) v[t] -= p * b[t];
    }
    basis.push_back(unit_normalize(v));
  }
  Matrix q(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) q(r, c) = basis[r][c];
  }
  return q;
}

}  // namespace

TEST(RecallAtK, SeparatedClusters) {
  SeededRng rng(1);
  const LabeledDataset data = synth_gaussian_classes(2, 10, 4, 0.01, rng);
  const std::vector<std::size_t> ks{1};
  EXPECT_EQ(recall_at_k(data.features(), data.labels(), ks).at(1), 1.0);
}

TEST(RecallAtK, SingletonClassesNeverHit) {
  SeededRng rng(2);
  const auto x = unit_points(12, 3, rng);
  std::vector<std::size_t> y(12);
  std::iota(y.begin(), y.end(), 0);
  for (const auto& [k, r] : recall_at_k(x, y, default_recall_ks())) EXPECT_EQ(r, 0.0) << k;
}

TEST(RecallAtK, MatchesExhaustiveScan) {
  SeededRng rng(3);
  for (int s = 0; s < 10; ++s) {
    const auto x = unit_points(40, 3, rng);
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < 40; ++i) y.push_back(rng.index(5));
    const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
    EXPECT_EQ(recall_at_k(x, y, ks), recall_oracle(x, y, ks));
  }
}

TEST(RecallAtK, TiesGoToLowerIndex) {
  // query 0 has neighbours 1 and 2 at equal distance; queries 1 and 2 both pick 0
  const std::vector<Vector> x{{1, 0}, {0, 1}, {0, -1}};
  const std::vector<std::size_t> wrong_first{0, 1, 0};
  const std::vector<std::size_t> right_first{0, 0, 1};
  const std::vector<std::size_t> ks{1};
  EXPECT_NEAR(recall_at_k(x, wrong_first, ks).at(1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(recall_at_k(x, right_first, ks).at(1), 2.0 / 3.0, 1e-15);
}

TEST(RecallAtK, MonotoneInK) {
  SeededRng rng(4);
  for (int s = 0; s < 20; ++s) {
    const auto x = unit_points(30, 4, rng);
    std::vector<std::size_t> y;
    for (std::size_t i = 0; i < 30; ++i) y.push_back(rng.index(6));
    const auto r = recall_at_k(x, y, default_recall_ks());
    double prev = 0.0;
    for (const auto& [k, v] : r) {
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(RecallAtK, Errors) {
  SeededRng rng(5);
  const auto x = unit_points(4, 2, rng);
  const std::vector<std::size_t> y{0, 0, 1, 1};
  const std::vector<std::size_t> too_big{4};
  EXPECT_THROW(recall_at_k(x, y, too_big), Error);
  const std::vector<std::size_t> three{0, 0, 1};
  EXPECT_THROW(recall_at_k(x, three, default_recall_ks()), Error);
}

TEST(Nmi, PerfectAgreementAndPermutation) {
  const std::vector<std::size_t> a{0, 0, 1, 1, 2, 2};
  const std::vector<std::size_t> b{2, 2, 0, 0, 1, 1};
  EXPECT_NEAR(normalized_mutual_information(a, a), 1.0, 1e-12);
  EXPECT_NEAR(normalized_mutual_information(a, b), 1.0, 1e-12);
  const std::vector<std::size_t> c{0, 1, 0, 1, 0, 1};
  EXPECT_NEAR(normalized_mutual_information(a, c), normalized_mutual_information(b, c), 1e-15);
  EXPECT_NEAR(normalized_mutual_information(a, c), normalized_mutual_information(c, a), 1e-15);
}

TEST(Nmi, ClusteringRecoversLabelGroups) {
  SeededRng rng(6);
  const LabeledDataset data = synth_gaussian_classes(4, 25, 6, 0.02, rng);
  EXPECT_NEAR(nmi_score(data.features(), data.labels(), 4), 1.0, 1e-12);
}

TEST(Nmi, NullLabelsScoreNearZero) {
  SeededRng rng(7);
  const auto x = unit_points(2000, 4, rng);
  std::vector<std::size_t> y;
  for (std::size_t i = 0; i < 2000; ++i) y.push_back(i % 4);
  rng.shuffle(y.begin(), y.end());
  EXPECT_LE(nmi_score(x, y, 4), 0.05);
}

TEST(Nmi, RelabelingInvariance) {
  SeededRng rng(8);
  const LabeledDataset data = synth_gaussian_classes(3, 20, 4, 0.4, rng);
  std::vector<std::size_t> relabeled = data.labels();
  for (std::size_t& y : relabeled) y = (y + 1) % 3;
  EXPECT_EQ(nmi_score(data.features(), data.labels(), 3),
            nmi_score(data.features(), relabeled, 3));
}

TEST(Metrics, RotationInvariance) {
  SeededRng rng(9);
  const LabeledDataset data = synth_gaussian_classes(4, 15, 5, 0.1, rng);
  const Matrix q = random_orthogonal(5, rng);
  std::vector<Vector> rotated;
  for (const Vector& f : data.features()) rotated.push_back(q * f);
  const auto r1 = recall_at_k(data.features(), data.labels(), default_recall_ks());
  const auto r2 = recall_at_k(rotated, data.labels(), default_recall_ks());
  for (const auto& [k, v] : r1) EXPECT_NEAR(v, r2.at(k), 1e-9);
  EXPECT_NEAR(nmi_score(data.features(), data.labels(), 4), nmi_score(rotated, data.labels(), 4),
              1e-9);
}

TEST(Metrics, ReportJson) {
  SeededRng rng(10);
  const LabeledDataset data = synth_gaussian_classes(3, 10, 4, 0.1, rng);
  const RetrievalReport r = evaluate_retrieval(data.features(), data.labels(), 3, 0);
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j.at("n_queries"), 30);
  for (const char* k : {"1", "2", "4", "8"}) EXPECT_TRUE(j.at("recall_at").contains(k)) << k;
  EXPECT_GE(j.at("nmi").get<double>(), 0.0);
  EXPECT_LE(j.at("nmi").get<double>(), 1.0);
}
