#pragma once

// Mini-batch SGD for the embedding network under either the closed-form
// discriminative loss or the brute-force triplet baseline.
//
// Update rule: theta <- theta - lr * (grad + weight_decay * theta), no momentum.
// Learning rate: lr_init * decay_factor ^ floor(epoch / decay_every).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lindml/centroids.hpp"
#include "lindml/datasets.hpp"
#include "lindml/embed_net.hpp"
#include "lindml/losses.hpp"

namespace lindml {

enum class LossKind { discriminative, triplet_bruteforce };

/// How a batch loss is scaled before differentiation. `per_triplet` divides by
/// the batch triplet count H, so both loss kinds optimize a mean per-triplet
/// quantity (L_d / H bounds L_t / H). `sum` uses the raw totals.
enum class LossScale { per_triplet, sum };

inline std::string to_string(LossScale s) { return s == LossScale::sum ? "sum" : "per-triplet"; }

inline LossScale loss_scale_from_string(const std::string& s) {
  if (s == "per-triplet" || s == "mean") return LossScale::per_triplet;
  if (s == "sum") return LossScale::sum;
  fail(ErrorKind::invalid_argument, "unknown loss scale '" + s + "'");
}

inline std::string to_string(LossKind k) {
  return k == LossKind::discriminative ? "discriminative" : "triplet";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "discriminative") return LossKind::discriminative;
  if (s == "triplet" || s == "triplet_bruteforce") return LossKind::triplet_bruteforce;
  fail(ErrorKind::invalid_argument, "unknown loss kind '" + s + "'");
}

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 128;
  double lr_init = 0.1;
  double lr_decay_factor = 0.5;
  std::size_t lr_decay_every = 5;
  double weight_decay = 0.0005;
  std::uint64_t seed = 0;
  LossKind loss_kind = LossKind::discriminative;
  LossScale loss_scale = LossScale::per_triplet;

  void validate(std::size_t train_classes) const {
    if (epochs < 1) fail(ErrorKind::invalid_argument, "epochs must be >= 1");
    if (batch_size == 0) fail(ErrorKind::invalid_argument, "batch size must be positive");
    if (!(lr_init >= 0.0) || !(lr_decay_factor > 0.0) || lr_decay_every == 0) {
      fail(ErrorKind::invalid_argument, "learning-rate schedule parameters must be positive");
    }
    if (!(weight_decay >= 0.0)) fail(ErrorKind::invalid_argument, "weight decay must be >= 0");
    if (batch_size % train_classes != 0) {
      fail(ErrorKind::invalid_argument, "batch size " + std::to_string(batch_size) +
                                            " is not divisible by the number of classes " +
                                            std::to_string(train_classes));
    }
  }
};

inline double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.lr_init *
         std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // mean over batches of the (scaled) batch loss
  double seconds = 0.0;
  std::uint64_t distance_evals = 0;
  std::uint64_t triplets = 0;
  std::size_t batches = 0;
  double lr = 0.0;
};

/// NDJSON record; `with_timing = false` drops wall-clock so logs can be compared.
inline nlohmann::json to_json(const EpochStats& s, bool with_timing = true) {
  nlohmann::json j = {{"epoch", s.epoch},
                      {"mean_loss", s.mean_loss},
                      {"distance_evals", s.distance_evals},
                      {"triplets", s.triplets},
                      {"batches", s.batches},
                      {"lr", s.lr}};
  if (with_timing) j["seconds"] = s.seconds;
  return j;
}

/// Batches with exactly batch_size / C samples of every class.
///
/// Each class is shuffled and consumed without replacement; once a class is
/// exhausted its remaining slots are filled with replacement. An epoch has
/// ceil(largest class / per-class quota) batches.
inline std::vector<std::vector<std::size_t>> balanced_batch_sampler(
    std::span<const std::size_t> labels, std::size_t classes, std::size_t batch_size,
    SeededRng& rng) {
  if (classes == 0 || batch_size == 0 || batch_size % classes != 0) {
    fail(ErrorKind::invalid_argument, "batch size must be a positive multiple of the class count");
  }
  const std::size_t quota = batch_size / classes;
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) fail(ErrorKind::invalid_argument, "sampler: label out of range");
    members[labels[i]].push_back(i);
  }
  std::size_t largest = 0;
  for (auto& m : members) {
    if (m.size() < quota) {
      fail(ErrorKind::invalid_argument,
           "sampler: every class needs >= batch_size/C samples; oversample first");
    }
    rng.shuffle(m.begin(), m.end());
    largest = std::max(largest, m.size());
  }
  const std::size_t n_batches = (largest + quota - 1) / quota;
  std::vector<std::vector<std::size_t>> batches(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    batches[b].reserve(batch_size);
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t q = 0; q < quota; ++q) {
        const std::size_t pos = b * quota + q;
        batches[b].push_back(pos < members[c].size() ? members[c][pos]
                                                     : members[c][rng.index(members[c].size())]);
      }
    }
  }
  return batches;
}

inline std::vector<std::vector<std::size_t>> balanced_batch_sampler(const LabeledDataset& data,
                                                                    std::size_t batch_size,
                                                                    SeededRng& rng) {
  return balanced_batch_sampler(data.labels(), data.class_count(), batch_size, rng);
}

namespace detail {

inline void sgd_step(EmbedNet& net, double lr, double weight_decay) {
  auto params = net.parameters();
  const auto grads = net.gradients();
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      params[b][i] -= lr * (grads[b][i] + weight_decay * params[b][i]);
    }
  }
}

inline void forward_batch(const EmbedNet& net, const LabeledDataset& data,
                          const std::vector<std::size_t>& batch, std::size_t b,
                          BatchWorkspace& ws) {
  ws.input.reshape(batch.size(), data.feature_dim());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Vector& x = data.feature(batch[r]);
    std::copy(x.begin(), x.end(), ws.input.row(r).begin());
  }
  try {
    net.forward_batch(ws);
  } catch (const Error& e) {
    throw Error(e.kind(), "batch " + std::to_string(b) + ": " + e.what());
  }
}

inline void require_train_shapes(const EmbedNet& net, const LabeledDataset& data) {
  require_same_dim(net.input_dim(), data.feature_dim(), "network input vs dataset features");
  if (net.output_dim() != data.class_count()) {
    fail(ErrorKind::dimension_mismatch, "network output dim " + std::to_string(net.output_dim()) +
                                            " != training classes " +
                                            std::to_string(data.class_count()));
  }
}

template <class BatchLoss>
EpochStats run_epoch(EmbedNet& net, const LabeledDataset& data, const TrainConfig& cfg,
                     std::size_t epoch, BatchLoss&& batch_loss) {
  cfg.validate(data.class_count());
  require_train_shapes(net, data);
  const auto start = std::chrono::steady_clock::now();
  SeededRng rng = SeededRng::derive(cfg.seed, epoch);
  const auto batches = balanced_batch_sampler(data, cfg.batch_size, rng);

  EpochStats st;
  st.epoch = epoch;
  st.lr = lr_at(epoch, cfg);
  double loss_sum = 0.0;
  BatchWorkspace ws;
  Matrix upstream;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    forward_batch(net, data, batches[b], b, ws);
    const std::size_t n = batches[b].size();
    std::vector<Vector> emb;
    std::vector<std::size_t> labels;
    emb.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
      const auto row = ws.embedding.row(s);
      emb.emplace_back(std::vector<double>(row.begin(), row.end()));
      labels.push_back(data.label(batches[b][s]));
    }
    const LabeledEmbeddings batch_data(std::move(emb), std::move(labels), data.class_count());
    std::vector<Vector> grads;
    const double scale =
        cfg.loss_scale == LossScale::per_triplet
            ? 1.0 / static_cast<double>(triplet_count(n, batch_data.class_count()))
            : 1.0;
    loss_sum += scale * batch_loss(batch_data, grads, st);

    upstream.reshape(n, net.output_dim());
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t i = 0; i < net.output_dim(); ++i) upstream(s, i) = scale * grads[s][i];
    }
    net.zero_grad();
    net.backward_batch(ws, upstream);
    sgd_step(net, st.lr, cfg.weight_decay);
    net.set_step(net.step() + 1);
  }
  st.batches = batches.size();
  st.mean_loss = loss_sum / static_cast<double>(batches.size());
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return st;
}

}  // namespace detail

/// One epoch of the closed-form loss, recomputed per batch with N := batch size.
/// `cents` is read-only for the whole run.
inline EpochStats train_epoch(EmbedNet& net, const LabeledDataset& data, const CentroidSet& cents,
                              const TrainConfig& cfg, std::size_t epoch) {
  if (cents.count() != data.class_count() || cents.dim() != net.output_dim()) {
    fail(ErrorKind::dimension_mismatch, "centroid set does not match the training classes");
  }
  return detail::run_epoch(
      net, data, cfg, epoch,
      [&](const LabeledEmbeddings& batch, std::vector<Vector>& grads, EpochStats& st) {
        const DiscriminativeLoss loss = discriminative_loss(batch, cents);
        grads = discriminative_loss_grad(batch, cents);
        st.distance_evals += loss.distance_evals;
        return loss.value;
      });
}

/// One epoch of the margin-free triplet loss over every valid in-batch triplet.
inline EpochStats train_epoch_triplet_baseline(EmbedNet& net, const LabeledDataset& data,
                                               const TrainConfig& cfg, std::size_t epoch) {
  return detail::run_epoch(
      net, data, cfg, epoch,
      [&](const LabeledEmbeddings& batch, std::vector<Vector>& grads, EpochStats& st) {
        TripletLossWithGrad res = triplet_loss_with_grad(batch);
        grads = std::move(res.grads);
        st.distance_evals += res.distance_evals;
        st.triplets += res.loss.triplets;
        return res.loss.value;
      });
}

/// Runs cfg.epochs epochs, reporting each one to `on_epoch`.
inline std::vector<EpochStats> train(EmbedNet& net, const LabeledDataset& data,
                                     const CentroidSet& cents, const TrainConfig& cfg,
                                     const std::function<void(const EpochStats&)>& on_epoch = {}) {
  std::vector<EpochStats> history;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochStats st = cfg.loss_kind == LossKind::discriminative
                        ? train_epoch(net, data, cents, cfg, e)
                        : train_epoch_triplet_baseline(net, data, cfg, e);
    if (on_epoch) on_epoch(st);
    history.push_back(st);
  }
  return history;
}

}  // namespace lindml
