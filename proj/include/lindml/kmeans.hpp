#pragma once

// Lloyd's K-means in Euclidean space with k-means++ seeding.
//
// Shared by centroid generation (clustering sphere samples) and the NMI
// evaluation pipeline (clustering embeddings). Deterministic given the rng.

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "lindml/numeric.hpp"

namespace lindml {

struct KMeansOptions {
  std::size_t max_iterations = 200;
  double relative_tolerance = 1e-6;  // on inertia change between iterations
};

struct KMeansResult {
  Matrix centers;                       // k x d, cluster means
  std::vector<std::size_t> assignment;  // per point, in [0, k)
  double inertia = 0.0;                 // sum of squared distances to assigned center
  std::size_t iterations = 0;
};

namespace detail {

// Nearest center by squared distance, |x|^2 + |c|^2 - 2 x.c; ties go to the lower index.
// Centers are transposed and padded to a multiple of kLanes so a block of
// scores stays in registers across the feature loop.
inline void assign_points(const Matrix& points, const std::vector<double>& point_sq,
                          const Matrix& centers, std::vector<std::size_t>& assignment,
                          std::vector<double>& best_sq) {
  constexpr std::size_t kLanes = 16;
  const std::size_t n = points.rows();
  const std::size_t k = centers.rows();
  const std::size_t d = points.cols();
  const std::size_t kp = (k + kLanes - 1) / kLanes * kLanes;
  std::vector<double> center_sq(kp, std::numeric_limits<double>::infinity());
  std::vector<double> centers_t(d * kp, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double* row = centers.row(c).data();
    center_sq[c] = dot(row, row, d);
    for (std::size_t j = 0; j < d; ++j) centers_t[j * kp + c] = row[j];
  }
  std::vector<double> score(kp);
  for (std::size_t i = 0; i < n; ++i) {
    const double* x = points.row(i).data();
    for (std::size_t c0 = 0; c0 < kp; c0 += kLanes) {
      double acc[kLanes];
      for (std::size_t l = 0; l < kLanes; ++l) acc[l] = center_sq[c0 + l];
      for (std::size_t j = 0; j < d; ++j) {
        const double w = -2.0 * x[j];
        const double* ct = &centers_t[j * kp + c0];
        for (std::size_t l = 0; l < kLanes; ++l) acc[l] += w * ct[l];
      }
      for (std::size_t l = 0; l < kLanes; ++l) score[c0 + l] = acc[l];
    }
    std::size_t arg = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (score[c] < score[arg]) arg = c;
    }
    assignment[i] = arg;
    best_sq[i] = std::max(0.0, score[arg] + point_sq[i]);
  }
}

inline Matrix kmeanspp_seed(const Matrix& points, std::size_t k, SeededRng& rng) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  Matrix centers(k, d);
  std::size_t first = rng.index(n);
  std::copy_n(points.row(first).data(), d, centers.row(0).data());

  std::vector<double> min_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    min_sq[i] = squared_distance(points.row(i).data(), centers.row(0).data(), d);
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : min_sq) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += min_sq[i];
        if (acc > target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);  // every point coincides with a chosen center
    }
    std::copy_n(points.row(pick).data(), d, centers.row(c).data());
    for (std::size_t i = 0; i < n; ++i) {
      const double sq = squared_distance(points.row(i).data(), centers.row(c).data(), d);
      if (sq < min_sq[i]) min_sq[i] = sq;
    }
  }
  return centers;
}

}  // namespace detail

/// Clusters the rows of `points` into k groups.
///
/// An empty cluster is repaired by moving the point of the largest cluster
/// farthest from that cluster's center into it, so every cluster stays
/// nonempty even when points repeat.
inline KMeansResult kmeans(const Matrix& points, std::size_t k, SeededRng& rng,
                           const KMeansOptions& opts = {}) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (k == 0 || k > n) {
    fail(ErrorKind::invalid_argument,
         "kmeans: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }

  std::vector<double> point_sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    point_sq[i] = detail::dot(points.row(i).data(), points.row(i).data(), d);
  }

  KMeansResult res;
  res.centers = detail::kmeanspp_seed(points, k, rng);
  res.assignment.assign(n, 0);
  std::vector<double> best_sq(n);
  double prev_inertia = std::numeric_limits<double>::infinity();

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    detail::assign_points(points, point_sq, res.centers, res.assignment, best_sq);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t a : res.assignment) ++counts[a];

    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t largest = 0;
      for (std::size_t m = 1; m < k; ++m) {
        if (counts[m] > counts[largest]) largest = m;
      }
      if (counts[largest] < 2) fail(ErrorKind::degenerate, "kmeans: cannot repair empty cluster");
      std::size_t farthest = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (res.assignment[i] == largest && (farthest == n || best_sq[i] > best_sq[farthest])) {
          farthest = i;
        }
      }
      res.assignment[farthest] = c;
      best_sq[farthest] = 0.0;
      --counts[largest];
      counts[c] = 1;
    }

    res.centers.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = res.centers.row(res.assignment[i]).data();
      const double* src = points.row(i).data();
      for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double inv = 1.0 / static_cast<double>(counts[c]);
      for (double& v : res.centers.row(c)) v *= inv;
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inertia += detail::squared_distance(points.row(i).data(),
                                          res.centers.row(res.assignment[i]).data(), d);
    }
    res.inertia = inertia;
    res.iterations = iter + 1;
    const double change = std::abs(prev_inertia - inertia);
    if (change <= opts.relative_tolerance * std::max(inertia, std::numeric_limits<double>::min())) {
      break;
    }
    prev_inertia = inertia;
  }
  return res;
}

}  // namespace lindml
