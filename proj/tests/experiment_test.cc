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
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "prefrank/corpus.h"
#include "prefrank/experiment.h"
#include "prefrank/synth.h"

namespace prefrank {
namespace {

TEST_CASE("model specs round-trip through text") {
  for (const std::string s :
       {"gppl@emb", "directranker@ling", "gppl-cv@emb",
        "stack(gppl@emb,directranker@ling,gppl@ling)"}) {
    CHECK(ParseModelSpec(s).ToString() == s);
  }
  const auto spaced = ParseModelSpec(" stack( gppl@a , directranker@b ) ");
  CHECK(spaced.type == ModelSpec::Type::kStack);
  CHECK(spaced.members.size() == 2);
  CHECK(spaced.ToString() == "stack(gppl@a,directranker@b)");
  CHECK_THROWS_AS(ParseModelSpec("svm@a"), ValidationError);
  CHECK_THROWS_AS(ParseModelSpec("gppl"), ValidationError);
  CHECK_THROWS_AS(ParseModelSpec("stack()"), ValidationError);
  CHECK_THROWS_AS(ParseModelSpec("stack(gppl@a"), ValidationError);
}

TEST_CASE("config files set every section") {
  std::istringstream in(R"([data]
pairs = p.tsv
pairs_format = tuples
[features]
emb = e.tsv
[experiment]
fractions = 0.5, 0.25
repeats = 2
models = gppl@emb, stack(gppl@emb,directranker@emb)
seed = 17
[gppl]
n_inducing = 33
lengthscale = 0.5, 2
[directranker]
hidden_dims = 16, 4
dropout = 0.1
[stacking]
n_folds = 3
rank_mean = true
[synth]
n_docs = 50
utility_fn = gp_sample
)");
  const Config c = ParseConfig(in, "/tmp/cfgdir/exp.ini");
  const auto& e = c.experiment;
  CHECK(e.pairs_path == "/tmp/cfgdir/p.tsv");
  CHECK(e.pairs_format == PairFormat::kTuples);
  CHECK(e.feature_paths.at("emb") == "/tmp/cfgdir/e.tsv");
  CHECK(e.fractions == std::vector<double>{0.5, 0.25});
  CHECK(e.n_repeats == 2);
  REQUIRE(e.models.size() == 2);
  CHECK(e.models[1] == "stack(gppl@emb,directranker@emb)");
  CHECK(e.seed == 17);
  CHECK(e.gppl.n_inducing == 33);
  CHECK(e.gppl.lengthscales.size() == 2);
  CHECK(e.ranker.hidden_dims == std::vector<int>{16, 4});
  CHECK(e.ranker.dropout == 0.1);
  CHECK(e.n_folds == 3);
  CHECK(e.rank_mean);
  CHECK(c.synth.n_docs == 50);
  CHECK(c.synth.utility_fn == UtilityFn::kGpSample);
}

TEST_CASE("config errors name the problem") {
  std::istringstream unknown_key("[gppl]\nsigma = 1\n");
  CHECK_THROWS_AS(ParseConfig(unknown_key, "x.ini"), ValidationError);
  std::istringstream unknown_section("[svm]\nc = 1\n");
  CHECK_THROWS_AS(ParseConfig(unknown_section, "x.ini"), ValidationError);
  std::istringstream bad_number("[experiment]\nrepeats = many\n");
  CHECK_THROWS_AS(ParseConfig(bad_number, "x.ini"), ValidationError);
  CHECK_THROWS_AS(LoadConfig("/nonexistent/prefrank.ini"), Error);
}

struct Small {
  ExperimentInputs inputs;
  ExperimentConfig cfg;

  Small() {
    SynthConfig sc;
    sc.n_docs = 30;
    sc.pairs_total = 150;
    sc.seed = 2;
    const auto d = Generate(sc);
    inputs.pairs = d.pairs;
    inputs.features["f"] = std::make_shared<const FeatureMatrix>(d.features);
    cfg.gppl.max_iters = 50;
    cfg.ranker.hidden_dims = {4};
    cfg.ranker.max_epochs = 3;
    cfg.seed = 5;
  }
};

TEST_CASE("full fraction runs in-sample and yields one cell") {
  Small s;
  s.cfg.fractions = {1.0};
  s.cfg.n_repeats = 1;
  s.cfg.models = {"gppl@f"};
  const auto summary = RunExperiment(s.cfg, s.inputs);
  REQUIRE(summary.rho.size() == 1);
  REQUIRE(summary.rho[0].size() == 1);
  CHECK(summary.rho[0][0].size() == 1);
  REQUIRE(summary.reports.size() == 1);
  CHECK(summary.reports[0].metadata.at("in_sample") == "true");
  CHECK(summary.reports[0].n_test == 30);
}

TEST_CASE("repeats, determinism and summary output") {
  Small s;
  s.cfg.fractions = {0.6, 0.3};
  s.cfg.n_repeats = 3;
  s.cfg.models = {"gppl@f", "directranker@f"};
  const auto dir = std::filesystem::temp_directory_path() / "prefrank_experiment_test";
  std::filesystem::remove_all(dir);
  s.cfg.output_dir = dir.string();
  const auto a = RunExperiment(s.cfg, s.inputs);
  for (const auto& per_model : a.rho)
    for (const auto& cell : per_model) CHECK(cell.size() == 3);
  CHECK(a.reports.size() == 12);

  s.cfg.output_dir.clear();
  const auto b = RunExperiment(s.cfg, s.inputs);
  CHECK(a.rho == b.rho);

  std::ifstream in(dir / "summary.tsv");
  REQUIRE(in);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
  int reports = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / "runs")) {
    CHECK(entry.path().extension() == ".report");
    ++reports;
  }
  CHECK(reports == 12);

  std::ostringstream text;
  WriteSummary(text, a);
  CHECK(text.str().find("+-") != std::string::npos);
}

TEST_CASE("unknown feature sets are rejected before training") {
  Small s;
  s.cfg.models = {"gppl@missing"};
  CHECK_THROWS_AS(RunExperiment(s.cfg, s.inputs), ValidationError);
}

}  // namespace
}  // namespace prefrank
