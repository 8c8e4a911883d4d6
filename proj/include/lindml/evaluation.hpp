#pragma once

// Retrieval (Recall@K) and clustering (NMI) quality of an embedding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lindml/kmeans.hpp"
#include "lindml/numeric.hpp"

namespace lindml {

/// Fraction of queries with at least one same-label sample among their K
/// nearest neighbours (self excluded, ties broken by lower index).
inline std::map<std::size_t, double> recall_at_k(std::span<const Vector> embeddings,
                                                 std::span<const std::size_t> labels,
                                                 std::span<const std::size_t> ks) {
  const std::size_t n = embeddings.size();
  if (labels.size() != n) fail(ErrorKind::dimension_mismatch, "recall_at_k: labels/embeddings length");
  if (ks.empty()) fail(ErrorKind::invalid_argument, "recall_at_k: no K given");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
  if (k_max == 0 || k_max >= n) {
    fail(ErrorKind::invalid_argument, "recall_at_k: need 1 <= K < N (K=" + std::to_string(k_max) +
                                          ", N=" + std::to_string(n) + ")");
  }
  const std::size_t d = embeddings[0].size();
  for (const Vector& e : embeddings) detail::require_same_dim(d, e.size(), "recall_at_k");

  // hits[k] = number of queries whose first correct neighbour has rank k (0-based).
  std::vector<std::size_t> first_hit_rank(n, n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t q = 0; q < n; ++q) {
    cand.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (i == q) continue;
      cand.emplace_back(detail::squared_distance(embeddings[q].data(), embeddings[i].data(), d), i);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k_max), cand.end());
    for (std::size_t r = 0; r < k_max; ++r) {
      if (labels[cand[r].second] == labels[q]) {
        first_hit_rank[q] = r;
        break;
      }
    }
  }
  std::map<std::size_t, double> out;
  for (std::size_t k : ks) {
    std::size_t hits = 0;
    for (std::size_t r : first_hit_rank) hits += r < k ? 1 : 0;
    out[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

/// I(A;B) / ((H(A) + H(B)) / 2). Two single-group partitions score 1.
inline double normalized_mutual_information(std::span<const std::size_t> a,
                                            std::span<const std::size_t> b) {
  if (a.size() != b.size() || a.empty()) {
    fail(ErrorKind::dimension_mismatch, "nmi: partitions must be non-empty and equal length");
  }
  const double n = static_cast<double>(a.size());
  std::map<std::size_t, double> ca, cb;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[{a[i], b[i]}] += 1;
  }
  auto entropy = [n](const std::map<std::size_t, double>& counts) {
    double h = 0.0;
    for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double ha = entropy(ca);
  const double hb = entropy(cb);
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += (c / n) * std::log(c * n / (ca[key.first] * cb[key.second]));
  }
  const double denom = 0.5 * (ha + hb);
  if (denom <= 0.0) return 1.0;
  return std::clamp(mi / denom, 0.0, 1.0);
}

struct NmiOptions {
  std::size_t restarts = 10;
  std::uint64_t seed = 0;
};

/// K-means the embeddings into n_clusters groups (best inertia over restarts)
/// and score the assignment against the labels.
inline double nmi_score(std::span<const Vector> embeddings, std::span<const std::size_t> labels,
                        std::size_t n_clusters, const NmiOptions& opts = {}) {
  const std::size_t n = embeddings.size();
  if (labels.size() != n) fail(ErrorKind::dimension_mismatch, "nmi_score: labels/embeddings length");
  if (n_clusters < 2 || n < n_clusters) {
    fail(ErrorKind::invalid_argument, "nmi_score: need 2 <= n_clusters <= N");
  }
  const std::size_t d = embeddings[0].size();
  Matrix points(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    detail::require_same_dim(d, embeddings[i].size(), "nmi_score");
    std::copy(embeddings[i].begin(), embeddings[i].end(), points.row(i).begin());
  }
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(1, opts.restarts); ++r) {
    SeededRng rng = SeededRng::derive(opts.seed, r);
    KMeansResult km = kmeans(points, n_clusters, rng);
    if (!have || km.inertia < best.inertia) {
      best = std::move(km);
      have = true;
    }
  }
  return normalized_mutual_information(best.assignment, labels);
}

struct RetrievalReport {
  std::map<std::size_t, double> recall_at;
  double nmi = 0.0;
  std::size_t n_queries = 0;
};

inline const std::vector<std::size_t>& default_recall_ks() {
  static const std::vector<std::size_t> ks{1, 2, 4, 8};
  return ks;
}

inline RetrievalReport evaluate_retrieval(std::span<const Vector> embeddings,
                                          std::span<const std::size_t> labels,
                                          std::size_t n_classes, std::uint64_t seed = 0) {
  RetrievalReport r;
  r.recall_at = recall_at_k(embeddings, labels, default_recall_ks());
  r.nmi = nmi_score(embeddings, labels, n_classes, {.restarts = 10, .seed = seed});
  r.n_queries = embeddings.size();
  return r;
}

inline nlohmann::json to_json(const RetrievalReport& r) {
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [k, v] : r.recall_at) recall[std::to_string(k)] = v;
  return {{"recall_at", recall}, {"nmi", r.nmi}, {"n_queries", r.n_queries}};
}

}  // namespace lindml
