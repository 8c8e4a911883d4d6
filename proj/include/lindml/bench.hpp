#pragma once

// Scaling benchmark: one training epoch of each loss on synthetic data,
// swept over dataset size N, class count C and batch size B.
//
// Operation counts are exact and machine-independent; wall times are the
// minimum over `repeats` runs, each from identical initial parameters, after
// one untimed warm-up run.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "lindml/centroids.hpp"
#include "lindml/datasets.hpp"
#include "lindml/embed_net.hpp"
#include "lindml/trainer.hpp"

namespace lindml {

struct BenchConfig {
  std::size_t classes = 8;
  std::size_t batch_size = 128;
  std::vector<std::size_t> sizes{512, 1024, 2048};          // N ladder, discriminative
  std::vector<std::size_t> class_ladder{4, 8, 16};          // C ladder at N = sizes[1]
  std::vector<std::size_t> triplet_batches{128, 256, 512};  // B ladder, triplet baseline
  std::size_t feat_dim = 16;
  std::size_t hidden_dim = 256;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string sweep;  // "N", "C" or "B"
  LossKind kind = LossKind::discriminative;
  std::size_t n = 0;
  std::size_t classes = 0;
  std::size_t batch = 0;
  std::size_t batches = 0;
  double seconds = 0.0;  // one epoch
  std::uint64_t distance_evals = 0;
  std::uint64_t triplets = 0;

  double seconds_per_batch() const { return seconds / static_cast<double>(batches); }
};

struct BenchReport {
  std::vector<BenchRow> rows;
  double exponent_discriminative_vs_n = 0.0;
  double exponent_discriminative_vs_c = 0.0;
  double exponent_triplet_batch_vs_b = 0.0;
  double triplet_over_discriminative = 0.0;  // epoch time ratio at sizes[0]
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    fail(ErrorKind::invalid_argument, "loglog_slope: need >= 2 paired points");
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace detail {

inline BenchRow bench_cell(const BenchConfig& cfg, LossKind kind, std::size_t n,
                           std::size_t classes, std::size_t batch) {
  if (n % classes != 0 || batch % classes != 0) {
    fail(ErrorKind::invalid_argument, "bench: N and B must be multiples of C");
  }
  SeededRng data_rng = SeededRng::derive(cfg.seed, n * 1000 + classes);
  const LabeledDataset data =
      synth_gaussian_classes(classes, n / classes, cfg.feat_dim, 0.15, data_rng);
  const CentroidSet cents = one_hot_centroids(classes);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = batch;
  tc.seed = cfg.seed;
  tc.loss_kind = kind;

  BenchRow row;
  row.kind = kind;
  row.n = n;
  row.classes = classes;
  row.batch = batch;
  row.seconds = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r <= std::max<std::size_t>(1, cfg.repeats); ++r) {
    EmbedNet net = EmbedNet::init_params({cfg.feat_dim, cfg.hidden_dim, classes}, cfg.seed);
    const EpochStats st = kind == LossKind::discriminative
                              ? train_epoch(net, data, cents, tc, 0)
                              : train_epoch_triplet_baseline(net, data, tc, 0);
    if (r > 0) row.seconds = std::min(row.seconds, st.seconds);
    row.batches = st.batches;
    row.distance_evals = st.distance_evals;
    row.triplets = st.triplets;
  }
  return row;
}

}  // namespace detail

inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.sizes.size() < 2 || cfg.triplet_batches.size() < 2) {
    fail(ErrorKind::invalid_argument, "bench: each ladder needs at least 2 points");
  }
  BenchReport rep;
  std::vector<double> xs, ys;

  for (std::size_t n : cfg.sizes) {
    BenchRow row = detail::bench_cell(cfg, LossKind::discriminative, n, cfg.classes, cfg.batch_size);
    row.sweep = "N";
    xs.push_back(static_cast<double>(n));
    ys.push_back(row.seconds);
    rep.rows.push_back(row);
  }
  rep.exponent_discriminative_vs_n = loglog_slope(xs, ys);
  const double disc_smallest = rep.rows.front().seconds;

  BenchRow trip = detail::bench_cell(cfg, LossKind::triplet_bruteforce, cfg.sizes.front(),
                                     cfg.classes, cfg.batch_size);
  trip.sweep = "N";
  rep.triplet_over_discriminative = trip.seconds / disc_smallest;
  rep.rows.push_back(trip);

  if (cfg.class_ladder.size() >= 2) {
    xs.clear();
    ys.clear();
    const std::size_t n = cfg.sizes[cfg.sizes.size() / 2];
    for (std::size_t c : cfg.class_ladder) {
      BenchRow row = detail::bench_cell(cfg, LossKind::discriminative, n, c, cfg.batch_size);
      row.sweep = "C";
      xs.push_back(static_cast<double>(c));
      ys.push_back(row.seconds);
      rep.rows.push_back(row);
    }
    rep.exponent_discriminative_vs_c = loglog_slope(xs, ys);
  }

  xs.clear();
  ys.clear();
  for (std::size_t b : cfg.triplet_batches) {
    BenchRow row = detail::bench_cell(cfg, LossKind::triplet_bruteforce, b, cfg.classes, b);
    row.sweep = "B";
    xs.push_back(static_cast<double>(b));
    ys.push_back(row.seconds_per_batch());
    rep.rows.push_back(row);
  }
  rep.exponent_triplet_batch_vs_b = loglog_slope(xs, ys);
  return rep;
}

inline void write_bench_csv(const BenchReport& rep, std::ostream& out) {
  out << "sweep,loss,n,classes,batch,batches,seconds,seconds_per_batch,distance_evals,triplets\n";
  for (const BenchRow& r : rep.rows) {
    out << r.sweep << ',' << to_string(r.kind) << ',' << r.n << ',' << r.classes << ','
        << r.batch << ',' << r.batches << ',' << r.seconds << ',' << r.seconds_per_batch() << ','
        << r.distance_evals << ',' << r.triplets << '\n';
  }
}

}  // namespace lindml
