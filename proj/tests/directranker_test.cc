// Copyright 2026 The Prefrank Authors.
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

#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "oracles.h"
#include "prefrank/directranker.h"
#include "prefrank/eval.h"

namespace prefrank {
namespace {

RankerConfig Small(std::vector<int> dims, bool batch_norm, double dropout) {
  RankerConfig cfg;
  cfg.hidden_dims = std::move(dims);
  cfg.batch_norm = batch_norm;
  cfg.dropout = dropout;
  return cfg;
}

Eigen::MatrixXd RandomMatrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(r, c, [&] { return g(rng); });
}

// Central-difference check of PairBatchLoss against its analytic gradient.
double GradientError(RankerModel& model, const Eigen::MatrixXd& x1,
                     const Eigen::MatrixXd& x2, const Eigen::MatrixXd* f1,
                     const Eigen::MatrixXd* f2, const Eigen::VectorXd& labels) {
  std::vector<double> grads;
  PairBatchLoss(model, x1, x2, f1, f2, labels, Mode::kTrain, nullptr, &grads);
  const std::vector<double> base = model.Flatten();
  REQUIRE(grads.size() == base.size());
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(
      base.data(), static_cast<Eigen::Index>(base.size()));
  const Eigen::VectorXd fd = oracle::CentralDifference(
      [&](const Eigen::VectorXd& p) {
        model.Unflatten(std::vector<double>(p.data(), p.data() + p.size()));
        const double loss = PairBatchLoss(model, x1, x2, f1, f2, labels,
                                          Mode::kTrain, nullptr, nullptr);
        model.Unflatten(base);
        return loss;
      },
      x0, 1e-6);
  const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(
      grads.data(), static_cast<Eigen::Index>(grads.size()));
  return oracle::RelativeError(analytic, fd);
}

TEST_CASE("ranking output closed form") {
  Eigen::VectorXd w(1), u1(1), u2(1);
  w << 1.0;
  u1 << 0.6;
  u2 << 0.2;
  CHECK(RankingOutput(w, u1, u2) == doctest::Approx(std::tanh(0.2)).epsilon(1e-15));
  CHECK(RankingOutput(w, u1, u2) == doctest::Approx(0.197375320224904));
}

TEST_CASE("squared ranking loss") {
  CHECK(RankLoss(1.0, 1.0) == 0.0);
  CHECK(RankLoss(1.0, 0.0) == 1.0);
  CHECK(RankLoss(-1.0, 0.5) == 2.25);
}

TEST_CASE("outputs are reflexive and antisymmetric") {
  std::mt19937_64 rng(1);
  auto model = RankerModel::Init(6, 3, Small({8, 4}, true, 0.4));
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd a = RandomMatrix(6, 1, rng), b = RandomMatrix(6, 1, rng);
    const Eigen::VectorXd fa = RandomMatrix(3, 1, rng), fb = RandomMatrix(3, 1, rng);
    CHECK(ForwardPair(model, a, a, &fa, &fa) == 0.0);
    CHECK(std::abs(ForwardPair(model, a, b, &fa, &fb) + ForwardPair(model, b, a, &fb, &fa)) <=
          1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x1 = RandomMatrix(5, 4, rng), x2 = RandomMatrix(5, 4, rng);
  Eigen::VectorXd labels(5);
  labels << 1, -1, 1, 1, -1;

  SUBCASE("plain [4,3] net") {
    auto model = RankerModel::Init(4, 0, Small({4, 3}, false, 0.0));
    CHECK(GradientError(model, x1, x2, nullptr, nullptr, labels) < 1e-4);
  }
  SUBCASE("batch norm") {
    auto model = RankerModel::Init(4, 0, Small({4, 3}, true, 0.0));
    // Move gamma/beta off their defaults so every term is exercised.
    for (auto& layer : model.feature_net.mutable_layers()) {
      layer.gamma = Eigen::VectorXd::LinSpaced(layer.gamma.size(), 0.5, 1.5);
      layer.beta = Eigen::VectorXd::LinSpaced(layer.beta.size(), -0.2, 0.3);
    }
    CHECK(GradientError(model, x1, x2, nullptr, nullptr, labels) < 1e-4);
  }
  SUBCASE("focus network") {
    auto model = RankerModel::Init(4, 2, Small({4, 3}, true, 0.0));
    const Eigen::MatrixXd f1 = RandomMatrix(5, 2, rng), f2 = RandomMatrix(5, 2, rng);
    CHECK(GradientError(model, x1, x2, &f1, &f2, labels) < 1e-4);
  }
}

TEST_CASE("dropout gradients match for a fixed mask") {
  std::mt19937_64 rng(3);
  auto model = RankerModel::Init(3, 0, Small({5, 2}, false, 0.3));
  const Eigen::MatrixXd x1 = RandomMatrix(4, 3, rng), x2 = RandomMatrix(4, 3, rng);
  Eigen::VectorXd labels(4);
  labels << 1, -1, -1, 1;
  std::vector<double> grads;
  Rng mask_rng(7);
  PairBatchLoss(model, x1, x2, nullptr, nullptr, labels, Mode::kTrain, &mask_rng,
                &grads);
  const auto base = model.Flatten();
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(
      base.data(), static_cast<Eigen::Index>(base.size()));
  const Eigen::VectorXd fd = oracle::CentralDifference(
      [&](const Eigen::VectorXd& p) {
        model.Unflatten(std::vector<double>(p.data(), p.data() + p.size()));
        Rng same(7);
        const double loss = PairBatchLoss(model, x1, x2, nullptr, nullptr, labels,
                                          Mode::kTrain, &same, nullptr);
        model.Unflatten(base);
        return loss;
      },
      x0, 1e-6);
  const Eigen::VectorXd analytic = Eigen::Map<const Eigen::VectorXd>(
      grads.data(), static_cast<Eigen::Index>(grads.size()));
  CHECK(oracle::RelativeError(analytic, fd) < 1e-4);
}

TEST_CASE("training pairs follow the BWS order") {
  ScoreVector two;
  two.entries = {{"a", 1.0}, {"b", 0.0}};
  const auto pairs = GenerateTrainingPairs(two, 3, 1);
  CHECK(pairs.size() == 3);
  for (const auto& p : pairs) CHECK(p.label == (p.x1 == "a" ? 1.0 : -1.0));

  ScoreVector five;
  five.entries = {{"a", 0.1}, {"b", -0.4}, {"c", 0.9}, {"d", 0.1}, {"e", -1.0}};
  for (const auto& p : GenerateTrainingPairs(five, 10000, 2)) {
    CHECK(p.x1 != p.x2);
    CHECK(five.at(p.x1) != five.at(p.x2));
    CHECK(p.label == (five.at(p.x1) > five.at(p.x2) ? 1.0 : -1.0));
  }

  ScoreVector tied;
  tied.entries = {{"a", 0.5}, {"b", 0.5}};
  CHECK_THROWS_AS(GenerateTrainingPairs(tied, 3, 1), ValidationError);
}

TEST_CASE("scores induce the same order as pairwise outputs") {
  std::mt19937_64 rng(4);
  auto model = RankerModel::Init(5, 0, Small({6, 3}, true, 0.4));
  std::vector<DocId> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("d" + std::to_string(i));
  const FeatureMatrix fm(ids, RandomMatrix(20, 5, rng));
  const auto scores = PredictScores(model, fm);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 20; ++j) {
      if (i == j) continue;
      const double o = ForwardPair(model, fm.rows().row(i).transpose(),
                                   fm.rows().row(j).transpose());
      const double diff = scores.at(ids[i]) - scores.at(ids[j]);
      if (std::abs(diff) > 1e-12) CHECK((o > 0) == (diff > 0));
    }
  }
}

TEST_CASE("degenerate and duplicated inputs") {
  std::mt19937_64 rng(5);
  auto model = RankerModel::Init(3, 0, Small({4}, false, 0.0));
  Eigen::MatrixXd rows = RandomMatrix(3, 3, rng);
  rows.row(2) = rows.row(0);
  const FeatureMatrix fm({"a", "b", "c"}, rows);
  const auto s = PredictScores(model, fm);
  CHECK(s.at("a") == s.at("c"));
  for (const auto& [id, v] : s.entries) CHECK(std::abs(v) < 1.0);
  model.output_weight.setZero();
  for (const auto& [id, v] : PredictScores(model, fm).entries) CHECK(v == 0.0);
}

TEST_CASE("evaluation mode does not depend on batch composition") {
  std::mt19937_64 rng(6);
  auto model = RankerModel::Init(4, 0, Small({6, 3}, true, 0.5));
  const Eigen::MatrixXd x = RandomMatrix(10, 4, rng);
  const Eigen::MatrixXd all = model.Utilities(x, nullptr);
  const Eigen::MatrixXd part = model.Utilities(x.topRows(3), nullptr);
  CHECK(all.topRows(3) == part);
  CHECK(model.Utilities(x, nullptr) == all);
}

TEST_CASE("config validation") {
  RankerConfig cfg;
  cfg.pairs_per_epoch = 0;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
  cfg = RankerConfig{};
  cfg.hidden_dims.clear();
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
  cfg = RankerConfig{};
  cfg.dropout = 1.0;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
}

FeatureMatrix Line(int n, std::mt19937_64& rng, ScoreVector* scores) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<DocId> ids;
  Eigen::MatrixXd rows(n, 1);
  for (int i = 0; i < n; ++i) {
    ids.push_back("d" + std::to_string(i));
    rows(i, 0) = u(rng);
    scores->entries[ids.back()] = rows(i, 0);
  }
  return FeatureMatrix(ids, rows);
}

TEST_CASE("a separable one-dimensional ranking is learned") {
  std::mt19937_64 rng(7);
  ScoreVector scores;
  const auto fm = Line(60, rng, &scores);
  RankerConfig cfg = Small({16, 4}, true, 0.0);
  cfg.max_epochs = 50;
  cfg.seed = 3;
  const auto model = TrainRanker(fm, scores, cfg);
  CHECK(Spearman(PredictScores(model, fm), scores) >= 0.99);
}

TEST_CASE("training is deterministic and models round-trip") {
  std::mt19937_64 rng(8);
  ScoreVector scores;
  const auto fm = Line(30, rng, &scores);
  RankerConfig cfg = Small({8, 3}, true, 0.4);
  cfg.max_epochs = 5;
  cfg.seed = 11;
  const auto a = TrainRanker(fm, scores, cfg);
  const auto b = TrainRanker(fm, scores, cfg);
  CHECK(a.Flatten() == b.Flatten());

  const auto path = std::filesystem::temp_directory_path() / "prefrank_dr_test.drnk";
  SaveRanker(path.string(), a);
  const auto back = LoadRanker(path.string());
  CHECK(back.Flatten() == a.Flatten());
  CHECK(PredictScores(back, fm).entries == PredictScores(a, fm).entries);
}

TEST_CASE("early stopping restores the best validation epoch") {
  std::mt19937_64 rng(9);
  ScoreVector scores;
  const auto fm = Line(40, rng, &scores);
  ScoreVector noisy = scores;
  std::normal_distribution<double> g(0.0, 2.0);
  for (auto& [id, v] : noisy.entries) v += g(rng);
  RankerConfig cfg = Small({8, 3}, true, 0.0);
  cfg.max_epochs = 40;
  cfg.patience = 3;
  const auto model = TrainRanker(fm, noisy, cfg, RankerValidation{fm, scores});
  CHECK(model.best_epoch >= 1);
  CHECK(model.epochs_trained <= cfg.max_epochs);
  CHECK(model.best_epoch + cfg.patience >= model.epochs_trained);
  CHECK(Spearman(PredictScores(model, fm), scores) ==
        doctest::Approx(model.best_validation).epsilon(1e-12));
}

TEST_CASE("training needs features for every scored id") {
  std::mt19937_64 rng(10);
  ScoreVector scores;
  const auto fm = Line(5, rng, &scores);
  scores.entries["ghost"] = 0.3;
  CHECK_THROWS_AS(TrainRanker(fm, scores, Small({4}, false, 0.0)), ValidationError);
}

}  // namespace
}  // namespace prefrank
