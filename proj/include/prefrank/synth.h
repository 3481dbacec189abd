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

#ifndef PREFRANK_SYNTH_H_
#define PREFRANK_SYNTH_H_

#include <cstdint>
#include <vector>

#include "prefrank/types.h"

namespace prefrank {

enum class UtilityFn { kLinear, kGpSample };

struct SynthConfig {
  int n_docs = 100;
  int dim = 2;
  UtilityFn utility_fn = UtilityFn::kLinear;
  int pairs_total = 500;
  int annotators_per_pair = 1;
  double sigma2 = 1.0;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct SynthData {
  FeatureMatrix features;
  ScoreVector true_utilities;
  std::vector<PairLabel> pairs;  // Merged; both directions may appear.
};

// Features ~ U[-1, 1]^dim. Linear utilities use a random unit direction;
// kGpSample draws from a Matern 3/2 GP with unit signal variance and
// lengthscale. Each sampled document pair (distinct pairs while possible) gets
// `annotators_per_pair` independent probit votes. Ids are "d0000", "d0001", ...
SynthData Generate(const SynthConfig& cfg);

}  // namespace prefrank

#endif  // PREFRANK_SYNTH_H_
