#pragma once

// Fixed class centroids on the unit hypersphere.
//
// Two generators approximate the max-min-distance packing (Tammes) problem:
// the standard basis (every pair exactly sqrt(2) apart) and K-means over a
// dense uniform sample of the sphere. The set is generated once and never
// touched by training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lindml/kmeans.hpp"
#include "lindml/numeric.hpp"

namespace lindml {

struct CentroidStats {
  double kappa_min = 0.0;
  double kappa_max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population std over unordered pairs
};

/// Exhaustive scan over the C(C-1)/2 unordered pairs.
inline CentroidStats centroid_stats(std::span<const Vector> set) {
  if (set.size() < 2) fail(ErrorKind::invalid_argument, "centroid_stats: need at least 2 vectors");
  std::vector<double> dists;
  dists.reserve(set.size() * (set.size() - 1) / 2);
  for (std::size_t m = 0; m < set.size(); ++m) {
    for (std::size_t n = m + 1; n < set.size(); ++n) dists.push_back(euclid_dist(set[m], set[n]));
  }
  CentroidStats s;
  s.kappa_min = *std::min_element(dists.begin(), dists.end());
  s.kappa_max = *std::max_element(dists.begin(), dists.end());
  // Shifted by the first distance: exact when all distances coincide.
  const double shift = dists.front();
  double acc = 0.0;
  for (double d : dists) acc += d - shift;
  s.mean = shift + acc / static_cast<double>(dists.size());
  double var = 0.0;
  for (double d : dists) var += (d - s.mean) * (d - s.mean);
  s.std = std::sqrt(var / static_cast<double>(dists.size()));
  return s;
}

class CentroidSet {
 public:
  /// Validates unit norm (1e-10), equal dimension, C >= 2 and pairwise distinctness.
  explicit CentroidSet(std::vector<Vector> centroids) : centroids_(std::move(centroids)) {
    if (centroids_.size() < 2) fail(ErrorKind::invalid_argument, "centroid set needs C >= 2");
    const std::size_t d = centroids_.front().size();
    for (std::size_t m = 0; m < centroids_.size(); ++m) {
      const Vector& c = centroids_[m];
      detail::require_same_dim(d, c.size(), "centroid set");
      if (!c.all_finite()) fail(ErrorKind::invalid_argument, "centroid has non-finite entries");
      if (std::abs(norm(c) - 1.0) > 1e-10) {
        fail(ErrorKind::invalid_argument, "centroid " + std::to_string(m) + " is not unit norm");
      }
    }
    stats_ = centroid_stats(centroids_);
    if (!(stats_.kappa_min > 0.0)) {
      fail(ErrorKind::degenerate, "centroid set contains coincident centroids");
    }
  }

  std::size_t count() const noexcept { return centroids_.size(); }
  std::size_t dim() const noexcept { return centroids_.front().size(); }
  const Vector& operator[](std::size_t m) const noexcept { return centroids_[m]; }
  const std::vector<Vector>& centroids() const noexcept { return centroids_; }
  const CentroidStats& stats() const noexcept { return stats_; }

  std::uint64_t content_hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const Vector& c : centroids_) h = fnv1a(c.span(), h);
    return h;
  }

 private:
  std::vector<Vector> centroids_;
  CentroidStats stats_;
};

inline CentroidSet one_hot_centroids(std::size_t classes) {
  if (classes < 2) fail(ErrorKind::invalid_argument, "one_hot_centroids: C must be >= 2");
  std::vector<Vector> cs;
  cs.reserve(classes);
  for (std::size_t m = 0; m < classes; ++m) {
    Vector e(classes, 0.0);
    e[m] = 1.0;
    cs.push_back(std::move(e));
  }
  return CentroidSet(std::move(cs));
}

inline std::size_t default_sphere_points(std::size_t classes) {
  return std::min<std::size_t>(1000 * classes, 1'000'000);
}

/// Uniform sphere sample -> Euclidean K-means -> renormalized cluster means.
inline CentroidSet kmeans_sphere_centroids(std::size_t classes, std::size_t dim,
                                           std::size_t n_points, SeededRng& rng,
                                           const KMeansOptions& opts = {}) {
  if (classes < 2) fail(ErrorKind::invalid_argument, "kmeans centroids: C must be >= 2");
  if (dim < 2) fail(ErrorKind::invalid_argument, "kmeans centroids: D must be >= 2");
  if (n_points < 10 * classes) {
    fail(ErrorKind::invalid_argument, "kmeans centroids: n_points must be >= 10*C");
  }
  Matrix points(n_points, dim);
  for (std::size_t i = 0; i < n_points; ++i) {
    const Vector p = uniform_sphere_point(dim, rng);
    std::copy(p.begin(), p.end(), points.row(i).begin());
  }
  const KMeansResult km = kmeans(points, classes, rng, opts);
  std::vector<Vector> cs;
  cs.reserve(classes);
  for (std::size_t m = 0; m < classes; ++m) {
    const auto row = km.centers.row(m);
    cs.push_back(unit_normalize(Vector(std::vector<double>(row.begin(), row.end()))));
  }
  return CentroidSet(std::move(cs));
}

/// The max-min distance that the packing problem maximizes; scoring only.
inline double tammes_objective(const CentroidSet& set) noexcept { return set.stats().kappa_min; }

inline nlohmann::json to_json(const CentroidSet& set) {
  nlohmann::json j;
  j["dim"] = set.dim();
  j["centroids"] = nlohmann::json::array();
  for (const Vector& c : set.centroids()) j["centroids"].push_back(c.values());
  const CentroidStats& s = set.stats();
  j["stats"] = {{"kappa_min", s.kappa_min}, {"kappa_max", s.kappa_max}, {"mean", s.mean},
                {"std", s.std}};
  return j;
}

inline CentroidSet centroid_set_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    std::vector<Vector> cs;
    for (const auto& row : j.at("centroids")) {
      Vector c(row.get<std::vector<double>>());
      detail::require_same_dim(dim, c.size(), "centroid file");
      cs.push_back(std::move(c));
    }
    return CentroidSet(std::move(cs));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("centroid file: ") + e.what());
  }
}

inline void save_centroids(const CentroidSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write " + path);
  out << to_json(set).dump(2) << '\n';
}

inline CentroidSet load_centroids(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_argument, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, path + ": " + e.what());
  }
  return centroid_set_from_json(j);
}

}  // namespace lindml
