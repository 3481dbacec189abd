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
#include <vector>

#include "doctest.h"
#include "prefrank/bws.h"
#include "prefrank/corpus.h"
#include "prefrank/eval.h"
#include "prefrank/probit.h"
#include "prefrank/synth.h"

namespace prefrank {
namespace {

TEST_CASE("generation is deterministic in the seed") {
  SynthConfig cfg;
  cfg.n_docs = 30;
  cfg.pairs_total = 80;
  cfg.seed = 4;
  const auto a = Generate(cfg), b = Generate(cfg);
  CHECK(a.pairs == b.pairs);
  CHECK(a.true_utilities.entries == b.true_utilities.entries);
  CHECK(a.features.rows() == b.features.rows());
  cfg.seed = 5;
  CHECK_FALSE(Generate(cfg).pairs == a.pairs);
}

TEST_CASE("shapes, ids and vote totals") {
  SynthConfig cfg;
  cfg.n_docs = 12;
  cfg.dim = 3;
  cfg.pairs_total = 20;
  cfg.annotators_per_pair = 3;
  cfg.utility_fn = UtilityFn::kGpSample;
  const auto d = Generate(cfg);
  CHECK(d.features.size() == 12);
  CHECK(d.features.dim() == 3);
  CHECK(d.features.doc_ids().front() == "d0000");
  CHECK(d.features.doc_ids().back() == "d0011");
  CHECK(d.true_utilities.size() == 12);
  CHECK(TotalCount(d.pairs) == 60);
  CHECK(((d.features.rows().array() >= -1.0) && (d.features.rows().array() <= 1.0))
            .all());
}

TEST_CASE("noiseless votes always favour the higher utility") {
  SynthConfig cfg;
  cfg.n_docs = 25;
  cfg.pairs_total = 150;
  cfg.sigma2 = 1e-9;
  const auto d = Generate(cfg);
  for (const auto& p : d.pairs)
    CHECK(d.true_utilities.at(p.winner_id) > d.true_utilities.at(p.loser_id));
}

TEST_CASE("vote frequencies follow the probit link") {
  SynthConfig cfg;
  cfg.n_docs = 2;
  cfg.pairs_total = 1;
  cfg.annotators_per_pair = 10000;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    cfg.seed = seed;
    const auto d = Generate(cfg);
    const double u0 = d.true_utilities.at("d0000"), u1 = d.true_utilities.at("d0001");
    const double p = PairProbability(u0, u1, cfg.sigma2);
    std::int64_t wins = 0;
    for (const auto& pl : d.pairs)
      if (pl.winner_id == "d0000") wins += pl.count;
    const double freq = static_cast<double>(wins) / 10000.0;
    const double se = std::sqrt(p * (1.0 - p) / 10000.0);
    CHECK(std::abs(freq - p) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("noisy BWS correlates with the true utilities") {
  std::vector<double> rho;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig cfg;
    cfg.n_docs = 100;
    cfg.pairs_total = 500;
    cfg.seed = seed;
    const auto d = Generate(cfg);
    const auto bws = ComputeBws(d.features.doc_ids(), d.pairs);
    rho.push_back(Spearman(bws, d.true_utilities));
  }
  const double mean = MeanStd(rho).first;
  CHECK(mean > 0.5);
  CHECK(mean < 0.95);
}

TEST_CASE("invalid configurations are rejected") {
  SynthConfig cfg;
  cfg.n_docs = 1;
  CHECK_THROWS_AS(Generate(cfg), ValidationError);
  cfg = {};
  cfg.sigma2 = 0.0;
  CHECK_THROWS_AS(Generate(cfg), ValidationError);
  cfg = {};
  cfg.annotators_per_pair = 0;
  CHECK_THROWS_AS(Generate(cfg), ValidationError);
}

}  // namespace
}  // namespace prefrank
