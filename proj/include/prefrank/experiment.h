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

#ifndef PREFRANK_EXPERIMENT_H_
#define PREFRANK_EXPERIMENT_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "prefrank/corpus.h"
#include "prefrank/directranker.h"
#include "prefrank/eval.h"
#include "prefrank/gppl.h"
#include "prefrank/stacking.h"
#include "prefrank/synth.h"
#include "prefrank/types.h"

namespace prefrank {

// A model request in an experiment, written as
//   gppl@F | directranker@F          single model trained on all training pairs
//   gppl-cv@F | directranker-cv@F    mean of the n cross-validation fold models
//   stack(kind@F, kind@F, ...)       stacked combination
// where F names a feature set.
struct ModelSpec {
  enum class Type { kSingle, kFoldEnsemble, kStack };
  Type type = Type::kSingle;
  // One entry for single and fold-ensemble models, one per level-0 for stacks.
  std::vector<std::pair<ModelKind, std::string>> members;

  std::string ToString() const;
};

ModelSpec ParseModelSpec(std::string_view text);

struct ExperimentConfig {
  std::string pairs_path;
  PairFormat pairs_format = PairFormat::kPairs;
  std::map<std::string, std::string> feature_paths;  // Name -> feature file.
  std::vector<double> fractions = {0.6, 0.33, 0.2, 0.1};
  int n_repeats = 3;
  std::vector<std::string> models;
  std::string output_dir;  // Empty: nothing is written.
  std::uint64_t seed = 0;
  GpplConfig gppl;
  RankerConfig ranker;
  int n_folds = 4;
  bool rank_mean = false;

  void Validate() const;
};

// Everything the config file can set. Sections: [data], [features],
// [experiment], [gppl], [directranker], [stacking], [synth].
struct Config {
  ExperimentConfig experiment;
  SynthConfig synth;
};

Config ParseConfig(std::istream& in, const std::string& source);
Config LoadConfig(const std::string& path);

struct ExperimentInputs {
  std::vector<PairLabel> pairs;
  std::map<std::string, std::shared_ptr<const FeatureMatrix>> features;
};

ExperimentInputs LoadExperimentInputs(const ExperimentConfig& cfg);

// Spearman results per (model, fraction) over the repeats.
struct ExperimentSummary {
  std::vector<std::string> models;
  std::vector<double> fractions;
  // rho[m][f] holds one value per repeat.
  std::vector<std::vector<std::vector<double>>> rho;
  std::vector<EvalReport> reports;

  std::pair<double, double> Cell(std::size_t model, std::size_t fraction) const;
};

// Trains and scores one model on a split. `train_pairs` only touch train ids;
// `bws_train` covers every training id. Returns scores on `test_ids`.
ScoreVector TrainAndPredict(const ModelSpec& spec, const ExperimentInputs& inputs,
                            const std::vector<PairLabel>& train_pairs,
                            const ScoreVector& bws_train,
                            const std::vector<DocId>& test_ids,
                            const ExperimentConfig& cfg, std::uint64_t seed);

// For each fraction x repeat: subsample, score the training pairs with BWS,
// train every model, and evaluate on the held-out ids against BWS gold computed
// from all pairs touching them. A fraction of 1 leaves no held-out ids; those
// runs are evaluated in-sample against the full-data BWS.
ExperimentSummary RunExperiment(const ExperimentConfig& cfg,
                                const ExperimentInputs& inputs);
ExperimentSummary RunExperiment(const ExperimentConfig& cfg);

// Model x fraction table of "mean +- std" Spearman values, tab separated.
void WriteSummary(std::ostream& out, const ExperimentSummary& summary);

}  // namespace prefrank

#endif  // PREFRANK_EXPERIMENT_H_
