// Copyright 2026 The sheaflab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <string>

#include "sheaflab/config.hpp"
#include "sheaflab/train.hpp"
#include "test_support.hpp"

namespace sheaflab {
namespace {

Dataset homophilic(std::uint64_t seed = 0) {
  SbmParams p;
  p.seed = seed;
  return synth_sbm(p);
}

TrainConfig quick(int epochs = 15) {
  TrainConfig c;
  c.epochs = epochs;
  return c;
}

TEST(Train, ZeroLearningRateLeavesParamsUnchanged) {
  const auto ds = homophilic();
  auto cfg = quick(5);
  cfg.lr = 0.0;
  for (auto opt : {Optimiser::adam, Optimiser::sgd}) {
    cfg.optimiser = opt;
    const auto r = train(ds, SheafKind::connection, cfg);
    EXPECT_TRUE(r.params == init_params(ds.graph.feature_dim(), ds.num_classes, cfg.d, cfg.f, cfg.layers,
                                        cfg.activation, cfg.tied_weights, cfg.seed));
    EXPECT_EQ(r.history.epochs.size(), 5u);
  }
}

TEST(Train, Deterministic) {
  const auto ds = homophilic(3);
  auto cfg = quick();
  cfg.dropout = 0.2;
  for (auto kind : {SheafKind::connection, SheafKind::rand_edge, SheafKind::rand_node}) {
    const auto a = train(ds, kind, cfg, 2);
    const auto b = train(ds, kind, cfg, 2);
    EXPECT_TRUE(a.params == b.params);
    ASSERT_EQ(a.history.epochs.size(), b.history.epochs.size());
    for (std::size_t k = 0; k < a.history.epochs.size(); ++k) {
      EXPECT_EQ(a.history.epochs[k].train_loss, b.history.epochs[k].train_loss);
      EXPECT_EQ(a.history.epochs[k].val_acc, b.history.epochs[k].val_acc);
    }
    EXPECT_EQ(a.history.best_epoch, b.history.best_epoch);
    EXPECT_EQ(a.history.test_acc_at_best, b.history.test_acc_at_best);
  }
}

TEST(Train, LossDecreasesOverFirstTenEpochs) {
  const auto r = train(homophilic(), SheafKind::connection, TrainConfig{});
  ASSERT_GE(r.history.epochs.size(), 10u);
  for (std::size_t k = 1; k < 10; ++k)
    EXPECT_LT(r.history.epochs[k].train_loss, r.history.epochs[k - 1].train_loss) << "epoch " << k + 1;
}

TEST(Train, RestoresBestValidationParams) {
  const auto ds = homophilic(1);
  const auto cfg = quick(40);
  const auto r = train(ds, SheafKind::connection, cfg);
  const auto prepared = prepare_sheaf(ds.graph, SheafKind::connection, cfg.d, cfg.seed, cfg.use_normalised);
  const auto& split = ds.splits[0];
  EXPECT_DOUBLE_EQ(evaluate(r.params, prepared.laplacian, ds.graph.features(), ds.labels(), split.val),
                   r.history.best_val_acc);
  EXPECT_DOUBLE_EQ(evaluate(r.params, prepared.laplacian, ds.graph.features(), ds.labels(), split.test),
                   r.history.test_acc_at_best);
  const auto& best = r.history.epochs[static_cast<std::size_t>(r.history.best_epoch - 1)];
  for (const auto& e : r.history.epochs) EXPECT_LE(e.val_acc, best.val_acc);
  EXPECT_GE(r.history.sheaf_build_seconds, 0.0);
}

TEST(Train, PatienceStopsEarly) {
  auto cfg = quick(500);
  cfg.lr = 0.0;
  cfg.patience = 7;
  const auto r = train(homophilic(), SheafKind::trivial, cfg);
  EXPECT_EQ(r.history.epochs.size(), 8u);
}

TEST(Train, SplitOutOfRange) {
  try {
    train(homophilic(), SheafKind::trivial, quick(), 11);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_STREQ(e.what(), "split out of range");
  }
}

TEST(Train, InvalidConfigRejected) {
  auto cfg = quick();
  cfg.epochs = 0;
  EXPECT_THROW(train(homophilic(), SheafKind::trivial, cfg), UsageError);
  cfg = quick();
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(Baselines, LearnHomophilicGraph) {
  const auto ds = homophilic();
  auto cfg = quick(100);
  for (auto m : {ModelKind::gcn, ModelKind::mlp}) {
    const auto h = train_baseline(ds, m, cfg);
    EXPECT_GE(h.test_acc_at_best, 0.75) << to_string(m);
  }
  EXPECT_THROW(train_baseline(ds, ModelKind::nsd, cfg), UsageError);
}

TEST(Baselines, ZeroLearningRateIsConstant) {
  auto cfg = quick(4);
  cfg.lr = 0.0;
  const auto h = train_baseline(homophilic(), ModelKind::gcn, cfg);
  for (const auto& e : h.epochs) EXPECT_EQ(e.train_loss, h.epochs[0].train_loss);
}

TEST(Bench, AtLeastTwentyEpochs) {
  auto cfg = quick(3);
  const auto b = bench(homophilic(), SheafKind::connection, cfg);
  EXPECT_EQ(b.epochs, 20);
  EXPECT_GT(b.mean_epoch_seconds, 0.0);
  EXPECT_GE(b.std_epoch_seconds, 0.0);
}

TEST(Config, OverlayAndUnknownKeys) {
  const auto cfg = apply_config(TrainConfig{}, nlohmann::json{{"d", 3}, {"lr", 0.5}, {"optimiser", "sgd"}});
  EXPECT_EQ(cfg.d, 3);
  EXPECT_EQ(cfg.lr, 0.5);
  EXPECT_EQ(cfg.optimiser, Optimiser::sgd);
  EXPECT_EQ(cfg.f, TrainConfig{}.f);
  EXPECT_THROW(apply_config(TrainConfig{}, nlohmann::json{{"learning_rate", 0.1}}), UsageError);
  EXPECT_THROW(apply_config(TrainConfig{}, nlohmann::json{{"d", "two"}}), UsageError);
  EXPECT_THROW(apply_config(TrainConfig{}, nlohmann::json{{"d", 0}}), UsageError);
}

TEST(Config, JsonRoundTrip) {
  TrainConfig c;
  c.d = 3;
  c.activation = Activation::tanh;
  c.tied_weights = true;
  c.seed = 99;
  const auto back = apply_config(TrainConfig{}, to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, Records) {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.6, 0.7, 0.8, 0.01});
  h.best_epoch = 1;
  h.best_val_acc = 0.7;
  h.test_acc_at_best = 0.8;
  EXPECT_EQ(epoch_record(h.epochs[0], 2)["record"], "epoch");
  const auto s = summary_record(h, 0);
  EXPECT_EQ(s["test_acc"], 0.8);
  EXPECT_EQ(s["best_val_epoch"], 1);
}

}  // namespace
}  // namespace sheaflab
