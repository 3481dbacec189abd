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

#include "prefrank/synth.h"

#include <cstdio>
#include <set>
#include <string>

#include "Eigen/Cholesky"
#include "prefrank/corpus.h"
#include "prefrank/kernel.h"
#include "prefrank/probit.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

std::string DocName(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%04d", i);
  return buf;
}

}  // namespace

void SynthConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw ValidationError("synth", "invalid config: " + what);
  };
  if (n_docs < 2) fail("n_docs must be >= 2");
  if (dim < 1) fail("dim must be positive");
  if (pairs_total < 1) fail("pairs_total must be positive");
  if (annotators_per_pair < 1) fail("annotators_per_pair must be >= 1");
  if (!(sigma2 > 0.0)) fail("sigma2 must be positive");
}

SynthData Generate(const SynthConfig& cfg) {
  cfg.Validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(
      cfg.n_docs, cfg.dim, [&]() { return unit(rng); });
  Eigen::VectorXd u(cfg.n_docs);
  if (cfg.utility_fn == UtilityFn::kLinear) {
    Eigen::VectorXd beta =
        Eigen::VectorXd::NullaryExpr(cfg.dim, [&]() { return normal(rng); });
    if (beta.norm() == 0.0) beta.setOnes();
    u = x * beta.normalized();
  } else {
    Matern32Params unit_kernel;
    const Eigen::MatrixXd k = Matern32Gram(x, x, unit_kernel);
    double jitter = 0.0;
    const auto llt = FactorWithJitter(k, unit_kernel.signal_var, &jitter);
    const Eigen::VectorXd z =
        Eigen::VectorXd::NullaryExpr(cfg.n_docs, [&]() { return normal(rng); });
    u = llt.matrixL() * z;
  }

  std::vector<DocId> ids;
  for (int i = 0; i < cfg.n_docs; ++i) ids.push_back(DocName(i));

  SynthData data{FeatureMatrix(ids, x), {}, {}};
  data.true_utilities.provenance = Provenance::kOther;
  for (int i = 0; i < cfg.n_docs; ++i) data.true_utilities.entries[ids[i]] = u[i];

  const long long possible =
      static_cast<long long>(cfg.n_docs) * (cfg.n_docs - 1) / 2;
  std::uniform_int_distribution<int> pick(0, cfg.n_docs - 1);
  std::set<std::pair<int, int>> used;
  std::vector<PairLabel> votes;
  for (int k = 0; k < cfg.pairs_total; ++k) {
    int a, b;
    do {
      a = pick(rng);
      b = pick(rng);
      if (a > b) std::swap(a, b);
    } while (a == b ||
             (static_cast<long long>(used.size()) < possible && used.count({a, b})));
    used.insert({a, b});
    const double p = PairProbability(u[a], u[b], cfg.sigma2);
    std::bernoulli_distribution vote(p);
    for (int v = 0; v < cfg.annotators_per_pair; ++v) {
      if (vote(rng)) {
        votes.push_back({ids[a], ids[b], 1});
      } else {
        votes.push_back({ids[b], ids[a], 1});
      }
    }
  }
  data.pairs = MergePairs(votes);
  return data;
}

}  // namespace prefrank
