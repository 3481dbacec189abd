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

#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "prefrank/bws.h"
#include "prefrank/eval.h"
#include "prefrank/stacking.h"
#include "prefrank/synth.h"

namespace prefrank {
namespace {

std::vector<DocId> Ids(int n) {
  std::vector<DocId> ids;
  for (int i = 0; i < n; ++i) ids.push_back("x" + std::to_string(i));
  return ids;
}

TEST_CASE("folds partition the ids evenly") {
  const auto folds = MakeFolds(Ids(8), 4, 1);
  REQUIRE(folds.size() == 4);
  std::multiset<DocId> seen;
  for (const auto& [train, val] : folds) {
    CHECK(val.size() == 2);
    CHECK(train.size() == 6);
    seen.insert(val.begin(), val.end());
    for (const auto& id : val) CHECK_FALSE(std::binary_search(train.begin(), train.end(), id));
  }
  const auto all = Ids(8);
  CHECK(seen == std::multiset<DocId>(all.begin(), all.end()));

  for (const auto& [train, val] : MakeFolds(Ids(11), 4, 2))
    CHECK((val.size() == 2 || val.size() == 3));

  CHECK(MakeFolds(Ids(9), 3, 5) == MakeFolds(Ids(9), 3, 5));
  CHECK_THROWS_AS(MakeFolds(Ids(3), 4, 1), ValidationError);
}

TEST_CASE("a meta-model on an exact copy of the target is the identity") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(30, 1);
  for (int i = 0; i < 30; ++i) x(i, 0) = g(rng);
  const MetaModel meta = FitMetaModel(x, x.col(0));
  CHECK_FALSE(meta.fallback);
  CHECK(meta.RawWeights()[0] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(meta.RawIntercept()) < 1e-10);
  CHECK(meta.Apply(Eigen::VectorXd::Constant(1, 0.37)) == doctest::Approx(0.37));
}

TEST_CASE("a constant level-0 column falls back to uniform weights") {
  Eigen::MatrixXd x(10, 2);
  x.col(0).setLinSpaced(0.0, 1.0);
  x.col(1).setConstant(0.5);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(10, -1.0, 1.0);
  const MetaModel meta = FitMetaModel(x, y);
  CHECK(meta.fallback);
  CHECK(meta.weights[0] == doctest::Approx(0.5));
  CHECK(meta.weights[1] == doctest::Approx(0.5));
  CHECK(meta.intercept == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("positive affine transforms of a column do not change predictions") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(25, 2, [&] { return g(rng); });
  const Eigen::VectorXd y = x.col(0) - 0.3 * x.col(1) +
                            0.1 * Eigen::VectorXd::NullaryExpr(25, [&] { return g(rng); });
  Eigen::MatrixXd t = x;
  t.col(1) = 4.0 * t.col(1).array() + 7.0;
  const MetaModel a = FitMetaModel(x, y), b = FitMetaModel(t, y);
  for (int i = 0; i < 25; ++i) {
    CHECK(a.Apply(x.row(i).transpose()) ==
          doctest::Approx(b.Apply(t.row(i).transpose())).epsilon(1e-10));
  }
}

struct Fixture {
  SynthData data;
  std::shared_ptr<const FeatureMatrix> features;
  StackConfig cfg;

  Fixture() {
    SynthConfig sc;
    sc.n_docs = 40;
    sc.pairs_total = 200;
    sc.seed = 3;
    data = Generate(sc);
    features = std::make_shared<const FeatureMatrix>(data.features);
    Level0Spec gp;
    gp.kind = ModelKind::kGppl;
    gp.features = features;
    gp.feature_name = "f";
    gp.gppl.max_iters = 100;
    Level0Spec dr;
    dr.kind = ModelKind::kDirectRanker;
    dr.features = features;
    dr.feature_name = "f";
    dr.ranker.hidden_dims = {8, 3};
    dr.ranker.max_epochs = 5;
    cfg.level0 = {gp, dr};
    cfg.seed = 9;
  }
};

TEST_CASE("stack structure and absence of leakage") {
  Fixture f;
  const auto bws = ComputeBws(f.data.features.doc_ids(), f.data.pairs);
  const StackModel model = FitStack(f.data.pairs, bws, f.cfg);
  REQUIRE(model.folds.size() == 4);
  for (const auto& fold : model.folds) {
    CHECK(fold.models.size() == 2);
    CHECK(fold.meta.weights.size() == 2);
    CHECK(fold.meta.input_mean.size() == 2);
    const std::set<DocId> val(fold.val_ids.begin(), fold.val_ids.end());
    for (const auto& p : fold.train_pairs) {
      CHECK(val.count(p.winner_id) == 0);
      CHECK(val.count(p.loser_id) == 0);
    }
  }

  const auto ids = f.data.features.doc_ids();
  const auto pred = PredictStacked(model, {f.features.get(), f.features.get()}, ids);
  CHECK(pred.size() == ids.size());
  CHECK(pred.provenance == Provenance::kStacked);

  SUBCASE("final score is the mean of fold predictions") {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ids.size()));
    for (const auto& fold : model.folds) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        Eigen::VectorXd s(2);
        for (int j = 0; j < 2; ++j)
          s[j] = ScoreLevel0(fold.models[j], f.features->Select({ids[i]})).at(ids[i]);
        sum[static_cast<Eigen::Index>(i)] += fold.meta.Apply(s);
      }
    }
    for (std::size_t i = 0; i < ids.size(); ++i)
      CHECK(pred.at(ids[i]) == doctest::Approx(sum[static_cast<Eigen::Index>(i)] / 4.0));
  }

  SUBCASE("identical folds give that fold's prediction") {
    StackModel same = model;
    for (auto& fold : same.folds) fold = model.folds[0];
    StackModel one = model;
    one.folds.resize(1);
    const auto a = PredictStacked(same, {f.features.get(), f.features.get()}, ids);
    const auto b = PredictStacked(one, {f.features.get(), f.features.get()}, ids);
    for (const auto& id : ids) CHECK(a.at(id) == doctest::Approx(b.at(id)).epsilon(1e-14));
  }

  SUBCASE("serialization round-trip") {
    const auto path = std::filesystem::temp_directory_path() / "prefrank_stack_test.stack";
    SaveStack(path.string(), model);
    const auto back = LoadStack(path.string());
    CHECK(back.folds.size() == 4);
    CHECK(PredictStacked(back, {f.features.get(), f.features.get()}, ids).entries ==
          pred.entries);
  }

  SUBCASE("missing features are rejected") {
    const FeatureMatrix partial = f.features->Select({ids[0], ids[1]});
    CHECK_THROWS_AS(PredictStacked(model, {&partial, f.features.get()}, ids),
                    ValidationError);
    CHECK_THROWS_AS(PredictStacked(model, {f.features.get()}, ids), ValidationError);
  }
}

TEST_CASE("single level-0 stack preserves that model's ranking") {
  Fixture f;
  f.cfg.level0.resize(1);
  const auto bws = ComputeBws(f.data.features.doc_ids(), f.data.pairs);
  StackModel model = FitStack(f.data.pairs, bws, f.cfg);
  for (auto& fold : model.folds) {
    fold.meta.weights = Eigen::VectorXd::Ones(1);
    fold.meta.intercept = 0.0;
    fold.meta.input_mean = Eigen::VectorXd::Zero(1);
    fold.meta.input_scale = Eigen::VectorXd::Ones(1);
  }
  const auto ids = f.data.features.doc_ids();
  const auto stacked = PredictStacked(model, {f.features.get()}, ids);
  const auto ensemble = PredictFoldEnsemble(model, 0, *f.features, ids);
  CHECK(Spearman(stacked, ensemble) == doctest::Approx(1.0));
}

TEST_CASE("rank-mean aggregation stays in the unit interval") {
  Fixture f;
  f.cfg.rank_mean = true;
  f.cfg.level0.resize(1);
  const auto bws = ComputeBws(f.data.features.doc_ids(), f.data.pairs);
  const StackModel model = FitStack(f.data.pairs, bws, f.cfg);
  for (const auto& [id, v] :
       PredictStacked(model, {f.features.get()}, f.data.features.doc_ids()).entries) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("stack config validation") {
  StackConfig cfg;
  CHECK_THROWS_AS(cfg.Validate(), ValidationError);
  Fixture f;
  f.cfg.n_folds = 1;
  CHECK_THROWS_AS(f.cfg.Validate(), ValidationError);
  CHECK_THROWS_AS(ParseModelKind("svm"), ValidationError);
}

}  // namespace
}  // namespace prefrank
