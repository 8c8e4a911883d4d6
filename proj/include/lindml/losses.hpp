#pragma once

// Triplet loss, its centroid-based upper bound, and the closed-form
// discriminative loss that equals the summed bound on balanced data.
//
// Index convention for triplets (i, j, k): y_i == y_j with j != i, and
// y_k != y_i. Ordered, no (i,j)/(j,i) deduplication, so on balanced data with
// n = N/C samples per class there are exactly H = (n-1) * N * (N-n) triplets.
//
// Labels are 0-based class indices into the centroid set.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lindml/centroids.hpp"
#include "lindml/numeric.hpp"

namespace lindml {

/// Distances below this contribute a zero (sub)gradient.
inline constexpr double kDistanceFloor = 1e-8;

class LabeledEmbeddings {
 public:
  LabeledEmbeddings(std::vector<Vector> embeddings, std::vector<std::size_t> labels,
                    std::size_t class_count)
      : embeddings_(std::move(embeddings)),
        labels_(std::move(labels)),
        per_class_(class_count, 0) {
    if (embeddings_.size() != labels_.size()) {
      fail(ErrorKind::dimension_mismatch, "embeddings and labels differ in length");
    }
    if (embeddings_.empty()) fail(ErrorKind::degenerate, "no embeddings");
    const std::size_t d = embeddings_.front().size();
    for (std::size_t i = 0; i < embeddings_.size(); ++i) {
      detail::require_same_dim(d, embeddings_[i].size(), "labeled embeddings");
      if (std::abs(norm(embeddings_[i]) - 1.0) > 1e-8) {
        fail(ErrorKind::invalid_argument, "embedding " + std::to_string(i) + " is not unit norm");
      }
      if (labels_[i] >= class_count) {
        fail(ErrorKind::invalid_argument, "label " + std::to_string(labels_[i]) +
                                              " outside [0, " + std::to_string(class_count) + ")");
      }
      ++per_class_[labels_[i]];
    }
  }

  std::size_t size() const noexcept { return embeddings_.size(); }
  std::size_t dim() const noexcept { return embeddings_.front().size(); }
  std::size_t class_count() const noexcept { return per_class_.size(); }
  const Vector& embedding(std::size_t i) const noexcept { return embeddings_[i]; }
  std::size_t label(std::size_t i) const noexcept { return labels_[i]; }
  const std::vector<Vector>& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::size_t>& labels() const noexcept { return labels_; }
  const std::vector<std::size_t>& per_class_count() const noexcept { return per_class_; }

  bool balanced() const noexcept {
    const std::size_t c = per_class_.size();
    if (size() % c != 0) return false;
    for (std::size_t n : per_class_) {
      if (n != size() / c) return false;
    }
    return true;
  }

 private:
  std::vector<Vector> embeddings_;
  std::vector<std::size_t> labels_;
  std::vector<std::size_t> per_class_;
};

/// G = 3 (C-1) (N/C - 1) (N/C).
inline double g_constant(std::size_t n_samples, std::size_t classes) {
  const double per = static_cast<double>(n_samples / classes);
  return 3.0 * static_cast<double>(classes - 1) * (per - 1.0) * per;
}

/// H = (N/C - 1) N (N - N/C), the number of valid triplets on balanced data.
inline std::uint64_t triplet_count(std::uint64_t n_samples, std::uint64_t classes) {
  const std::uint64_t per = n_samples / classes;
  if (per == 0) return 0;
  return (per - 1) * n_samples * (n_samples - per);
}

/// ||xi - xj|| - ||xi - xk||, margin-free and without hinge.
inline double triplet_term(const Vector& xi, const Vector& xj, const Vector& xk) {
  return euclid_dist(xi, xj) - euclid_dist(xi, xk);
}

/// ||xi - ci|| - ||xi - ck|| + ||xj - ci|| + ||xk - ck||, which dominates triplet_term.
inline double upper_term(const Vector& xi, const Vector& xj, const Vector& xk, const Vector& ci,
                         const Vector& ck) {
  if (ci == ck) fail(ErrorKind::invalid_argument, "upper_term: anchor and negative share a centroid");
  return euclid_dist(xi, ci) - euclid_dist(xi, ck) + euclid_dist(xj, ci) + euclid_dist(xk, ck);
}

struct TripletSum {
  double value = 0.0;
  std::uint64_t triplets = 0;
};

namespace detail {

// Θ(N^3/C) on purpose: this is both the oracle and the timing baseline.
template <class Term>
TripletSum enumerate_triplets(const LabeledEmbeddings& data, Term&& term) {
  TripletSum out;
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    double anchor_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || data.label(j) != data.label(i)) continue;
      for (std::size_t k = 0; k < n; ++k) {
        if (data.label(k) == data.label(i)) continue;
        anchor_sum += term(i, j, k);
        ++out.triplets;
      }
    }
    out.value += anchor_sum;
  }
  if (out.triplets == 0) {
    fail(ErrorKind::degenerate, "no valid triplet: need two classes and a same-class pair");
  }
  return out;
}

inline void require_centroids_match(const LabeledEmbeddings& data, const CentroidSet& cents) {
  if (cents.count() != data.class_count()) {
    fail(ErrorKind::dimension_mismatch, "centroid count " + std::to_string(cents.count()) +
                                            " != class count " +
                                            std::to_string(data.class_count()));
  }
  require_same_dim(cents.dim(), data.dim(), "embeddings vs centroids");
}

}  // namespace detail

inline TripletSum triplet_loss_bruteforce(const LabeledEmbeddings& data) {
  const auto& x = data.embeddings();
  return detail::enumerate_triplets(data, [&](std::size_t i, std::size_t j, std::size_t k) {
    return triplet_term(x[i], x[j], x[k]);
  });
}

inline TripletSum upperbound_loss_bruteforce(const LabeledEmbeddings& data,
                                             const CentroidSet& cents) {
  detail::require_centroids_match(data, cents);
  const auto& x = data.embeddings();
  return detail::enumerate_triplets(data, [&](std::size_t i, std::size_t j, std::size_t k) {
    return upper_term(x[i], x[j], x[k], cents[data.label(i)], cents[data.label(k)]);
  });
}

struct DiscriminativeLoss {
  double value = 0.0;
  double g_const = 0.0;
  std::uint64_t distance_evals = 0;  // exactly N * C
};

namespace detail {

inline void require_closed_form_preconditions(const LabeledEmbeddings& data,
                                              const CentroidSet& cents) {
  require_centroids_match(data, cents);
  if (!data.balanced()) {
    fail(ErrorKind::unbalanced,
         "discriminative loss needs equal class sizes; oversample the dataset to balance first");
  }
  if (data.size() / data.class_count() < 2) {
    fail(ErrorKind::degenerate, "discriminative loss needs at least 2 samples per class");
  }
}

}  // namespace detail

/// G * sum_i ( ||x_i - c_{y_i}|| - 1/(3(C-1)) * sum_{m != y_i} ||x_i - c_m|| ), Θ(N C).
inline DiscriminativeLoss discriminative_loss(const LabeledEmbeddings& data,
                                              const CentroidSet& cents) {
  detail::require_closed_form_preconditions(data, cents);
  const std::size_t classes = cents.count();
  const std::size_t d = data.dim();
  const double push_weight = 1.0 / (3.0 * static_cast<double>(classes - 1));

  DiscriminativeLoss out;
  out.g_const = g_constant(data.size(), classes);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* x = data.embedding(i).data();
    const std::size_t y = data.label(i);
    double push = 0.0;
    double pull = 0.0;
    for (std::size_t m = 0; m < classes; ++m) {
      const double dist = detail::distance(x, cents[m].data(), d);
      if (m == y) {
        pull = dist;
      } else {
        push += dist;
      }
    }
    total += pull - push_weight * push;
  }
  out.distance_evals = static_cast<std::uint64_t>(data.size()) * classes;
  out.value = out.g_const * total;
  return out;
}

/// Gradient of discriminative_loss with respect to each embedding.
inline std::vector<Vector> discriminative_loss_grad(const LabeledEmbeddings& data,
                                                    const CentroidSet& cents) {
  detail::require_closed_form_preconditions(data, cents);
  const std::size_t classes = cents.count();
  const std::size_t d = data.dim();
  const double g = g_constant(data.size(), classes);
  const double push_weight = 1.0 / (3.0 * static_cast<double>(classes - 1));

  std::vector<Vector> grads;
  grads.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector& x = data.embedding(i);
    Vector grad(d, 0.0);
    for (std::size_t m = 0; m < classes; ++m) {
      const double dist = detail::distance(x.data(), cents[m].data(), d);
      if (dist < kDistanceFloor) continue;
      const double w = (m == data.label(i) ? 1.0 : -push_weight) * g / dist;
      for (std::size_t t = 0; t < d; ++t) grad[t] += w * (x[t] - cents[m][t]);
    }
    grads.push_back(std::move(grad));
  }
  return grads;
}

struct TripletLossWithGrad {
  TripletSum loss;
  std::vector<Vector> grads;  // d(loss)/d(embedding), one per sample
  std::uint64_t distance_evals = 0;
};

/// Brute-force triplet loss and its gradient, recomputing both distances for
/// every triplet (no caching of the pairwise matrix).
inline TripletLossWithGrad triplet_loss_with_grad(const LabeledEmbeddings& data) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  TripletLossWithGrad out;
  out.grads.assign(n, Vector(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data.embedding(i).data();
    double anchor_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || data.label(j) != data.label(i)) continue;
      const double* xj = data.embedding(j).data();
      for (std::size_t k = 0; k < n; ++k) {
        if (data.label(k) == data.label(i)) continue;
        const double* xk = data.embedding(k).data();
        const double dij = detail::distance(xi, xj, d);
        const double dik = detail::distance(xi, xk, d);
        anchor_sum += dij - dik;
        ++out.loss.triplets;
        const double wij = dij < kDistanceFloor ? 0.0 : 1.0 / dij;
        const double wik = dik < kDistanceFloor ? 0.0 : 1.0 / dik;
        double* gi = out.grads[i].data();
        double* gj = out.grads[j].data();
        double* gk = out.grads[k].data();
        for (std::size_t t = 0; t < d; ++t) {
          const double uij = (xi[t] - xj[t]) * wij;
          const double uik = (xi[t] - xk[t]) * wik;
          gi[t] += uij - uik;
          gj[t] -= uij;
          gk[t] += uik;
        }
      }
    }
    out.loss.value += anchor_sum;
  }
  if (out.loss.triplets == 0) {
    fail(ErrorKind::degenerate, "no valid triplet: need two classes and a same-class pair");
  }
  out.distance_evals = 2 * out.loss.triplets;
  return out;
}

struct LossReport {
  double l_t = 0.0;
  double l_d = 0.0;
  double gap = 0.0;          // l_d - l_t
  double lemma_bound = 0.0;  // h_const * (kappa_max - kappa_min + 3 epsilon)
  double epsilon = 0.0;      // 2 max_i ||x_i - c_{y_i}||
  double g_const = 0.0;
  double h_const = 0.0;
};

inline nlohmann::json to_json(const LossReport& r) {
  return {{"l_t", r.l_t},         {"l_d", r.l_d},         {"gap", r.gap},
          {"lemma_bound", r.lemma_bound}, {"epsilon", r.epsilon}, {"g_const", r.g_const},
          {"h_const", r.h_const}};
}

/// Absolute slack for the sandwich checks, scaled with the loss magnitude.
inline double bound_slack(const LossReport& r) {
  return 1e-9 * std::max({1.0, std::abs(r.l_t), std::abs(r.l_d)});
}

/// Brute-force L_t, closed-form L_d and the gap bound; throws bound_violation
/// unless 0 <= gap <= lemma_bound.
inline LossReport lemma_gap_report(const LabeledEmbeddings& data, const CentroidSet& cents) {
  detail::require_closed_form_preconditions(data, cents);
  LossReport r;
  const TripletSum lt = triplet_loss_bruteforce(data);
  const DiscriminativeLoss ld = discriminative_loss(data, cents);
  r.l_t = lt.value;
  r.l_d = ld.value;
  r.gap = r.l_d - r.l_t;
  r.g_const = ld.g_const;
  r.h_const = static_cast<double>(triplet_count(data.size(), data.class_count()));
  double max_dist = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    max_dist = std::max(max_dist, euclid_dist(data.embedding(i), cents[data.label(i)]));
  }
  r.epsilon = 2.0 * max_dist;
  const CentroidStats& s = cents.stats();
  r.lemma_bound = r.h_const * (s.kappa_max - s.kappa_min + 3.0 * r.epsilon);

  const double slack = bound_slack(r);
  if (r.gap < -slack || r.gap > r.lemma_bound + slack) {
    fail(ErrorKind::bound_violation,
         "gap bound violated: 0 <= " + std::to_string(r.gap) + " <= " +
             std::to_string(r.lemma_bound) + " (l_t=" + std::to_string(r.l_t) +
             ", l_d=" + std::to_string(r.l_d) + ")");
  }
  return r;
}

struct TripletBoundCheck {
  bool upper_term_ok = false;    // upper_term <= -kappa_min + 2 epsilon
  bool triplet_term_ok = false;  // -triplet_term <= kappa_max + epsilon
};

/// The two per-triplet inequalities the gap bound is assembled from.
/// Requires every sample within epsilon/2 of its own centroid.
inline TripletBoundCheck per_triplet_bounds_check(const Vector& xi, const Vector& xj,
                                                  const Vector& xk, const Vector& ci,
                                                  const Vector& ck, double kappa_min,
                                                  double kappa_max, double epsilon) {
  const double radius = epsilon / 2.0 + 1e-12;
  if (euclid_dist(xi, ci) > radius || euclid_dist(xj, ci) > radius ||
      euclid_dist(xk, ck) > radius) {
    fail(ErrorKind::invalid_argument, "per_triplet_bounds_check: sample outside epsilon/2 ball");
  }
  TripletBoundCheck out;
  out.upper_term_ok = upper_term(xi, xj, xk, ci, ck) <= -kappa_min + 2.0 * epsilon + 1e-12;
  out.triplet_term_ok = -triplet_term(xi, xj, xk) <= kappa_max + epsilon + 1e-12;
  return out;
}

}  // namespace lindml
