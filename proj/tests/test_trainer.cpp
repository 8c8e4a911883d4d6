#include <gtest/gtest.h>

#include <set>

#include "lindml/datasets.hpp"
#include "lindml/trainer.hpp"

using namespace lindml;

namespace {

LabeledDataset toy_data(std::size_t classes, std::size_t per, std::uint64_t seed,
                        double spread = 0.15) {
  SeededRng rng(seed);
  return synth_gaussian_classes(classes, per, 6, spread, rng);
}

std::vector<double> flat_params(const EmbedNet& net) {
  std::vector<double> out;
  for (auto block : net.parameters()) out.insert(out.end(), block.begin(), block.end());
  return out;
}

}  // namespace

TEST(LearningRate, StepSchedule) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(4, cfg), 0.1);
  EXPECT_DOUBLE_EQ(lr_at(5, cfg), 0.05);
  EXPECT_DOUBLE_EQ(lr_at(12, cfg), 0.025);
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg;
  cfg.batch_size = 10;
  EXPECT_THROW(cfg.validate(4), Error);
  EXPECT_NO_THROW(cfg.validate(5));
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(5), Error);
  EXPECT_THROW(loss_kind_from_string("hinge"), Error);
  EXPECT_EQ(loss_scale_from_string("sum"), LossScale::sum);
}

TEST(BatchSampler, BalancedBatches) {
  const LabeledDataset data = toy_data(4, 20, 1);
  SeededRng rng(5);
  const auto batches = balanced_batch_sampler(data, 8, rng);
  EXPECT_EQ(batches.size(), 10u);
  for (const auto& b : batches) {
    ASSERT_EQ(b.size(), 8u);
    std::vector<int> per(4, 0);
    for (std::size_t i : b) ++per[data.label(i)];
    for (int p : per) EXPECT_EQ(p, 2);
  }
  SeededRng bad(5);
  EXPECT_THROW(balanced_batch_sampler(data, 6, bad), Error);
}

TEST(BatchSampler, DeterministicAndCovering) {
  const LabeledDataset data = toy_data(4, 20, 2);
  SeededRng a(11), b(11);
  const auto first = balanced_batch_sampler(data, 8, a);
  EXPECT_EQ(first, balanced_batch_sampler(data, 8, b));
  std::set<std::size_t> seen;
  for (const auto& batch : first) seen.insert(batch.begin(), batch.end());
  EXPECT_EQ(seen.size(), 80u);
}

TEST(BatchSampler, SmallClassesRefillWithReplacement) {
  std::vector<std::size_t> labels{0, 0, 0, 0, 0, 0, 1, 1};
  SeededRng rng(3);
  const auto batches = balanced_batch_sampler(labels, 2, 4, rng);
  EXPECT_EQ(batches.size(), 3u);
  for (const auto& b : batches) {
    std::size_t ones = 0;
    for (std::size_t i : b) ones += labels[i];
    EXPECT_EQ(ones, 2u);
  }
}

TEST(TrainEpoch, ZeroLearningRateFreezesParameters) {
  const LabeledDataset data = toy_data(4, 8, 3);
  EmbedNet net = EmbedNet::init_params({6, 16, 4}, 1);
  const std::vector<double> before = flat_params(net);
  TrainConfig cfg;
  cfg.lr_init = 0.0;
  cfg.batch_size = 8;
  train_epoch(net, data, one_hot_centroids(4), cfg, 0);
  EXPECT_EQ(flat_params(net), before);
}

TEST(TrainEpoch, DistanceCountTelemetry) {
  const CentroidSet cents = one_hot_centroids(4);
  TrainConfig cfg;
  cfg.batch_size = 8;
  for (std::size_t per : {8u, 16u, 32u}) {
    const LabeledDataset data = toy_data(4, per, 4);
    EmbedNet net = EmbedNet::init_params({6, 16, 4}, 1);
    const EpochStats st = train_epoch(net, data, cents, cfg, 0);
    EXPECT_EQ(st.batches, per / 2);
    EXPECT_EQ(st.distance_evals, st.batches * 8 * 4);
    EXPECT_EQ(st.triplets, 0u);
    EXPECT_GT(st.seconds, 0.0);
  }
}

TEST(TrainEpoch, TripletBaselineCounts) {
  const LabeledDataset data = toy_data(4, 8, 5);
  EmbedNet net = EmbedNet::init_params({6, 16, 4}, 1);
  TrainConfig cfg;
  cfg.batch_size = 8;
  const EpochStats st = train_epoch_triplet_baseline(net, data, cfg, 0);
  EXPECT_EQ(st.batches, 4u);
  EXPECT_EQ(st.triplets, 4u * 48u);
  EXPECT_EQ(st.triplets, st.batches * triplet_count(8, 4));
  EXPECT_EQ(st.distance_evals, 2 * st.triplets);
}

TEST(TrainEpoch, CentroidMismatch) {
  const LabeledDataset data = toy_data(4, 8, 6);
  EmbedNet net = EmbedNet::init_params({6, 16, 4}, 1);
  TrainConfig cfg;
  cfg.batch_size = 8;
  EXPECT_THROW(train_epoch(net, data, one_hot_centroids(3), cfg, 0), Error);
  EmbedNet wrong = EmbedNet::init_params({5, 16, 4}, 1);
  EXPECT_THROW(train_epoch(wrong, data, one_hot_centroids(4), cfg, 0), Error);
}

TEST(Train, LossFallsOnSeparableData) {
  const LabeledDataset data = toy_data(4, 30, 7, 0.1);
  SeededRng crng(8);
  const CentroidSet cents = kmeans_sphere_centroids(4, 4, 400, crng);
  const std::uint64_t hash = cents.content_hash();
  EmbedNet net = EmbedNet::init_params({6, 32, 4}, 2);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 20;
  const auto history = train(net, data, cents, cfg);
  ASSERT_EQ(history.size(), 10u);
  EXPECT_LT(history[9].mean_loss, history[0].mean_loss);
  EXPECT_EQ(cents.content_hash(), hash);
  EXPECT_DOUBLE_EQ(history[5].lr, 0.05);
}

TEST(Train, BitwiseDeterministic) {
  const LabeledDataset data = toy_data(4, 12, 9);
  const CentroidSet cents = one_hot_centroids(4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 17;
  EmbedNet a = EmbedNet::init_params({6, 16, 4}, 3);
  EmbedNet b = EmbedNet::init_params({6, 16, 4}, 3);
  const auto ha = train(a, data, cents, cfg);
  const auto hb = train(b, data, cents, cfg);
  EXPECT_EQ(flat_params(a), flat_params(b));
  for (std::size_t e = 0; e < ha.size(); ++e) {
    EXPECT_EQ(to_json(ha[e], false), to_json(hb[e], false));
  }
  EXPECT_EQ(a.step(), 3u * ha[0].batches);
}

TEST(Train, EpochRecordFields) {
  EpochStats st;
  st.seconds = 1.5;
  EXPECT_TRUE(to_json(st).contains("seconds"));
  EXPECT_FALSE(to_json(st, false).contains("seconds"));
  for (const char* key : {"epoch", "mean_loss", "distance_evals", "triplets", "batches", "lr"}) {
    EXPECT_TRUE(to_json(st).contains(key)) << key;
  }
}
