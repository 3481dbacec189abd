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

#ifndef PREFRANK_STACKING_H_
#define PREFRANK_STACKING_H_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "prefrank/directranker.h"
#include "prefrank/gppl.h"
#include "prefrank/types.h"

namespace prefrank {

enum class ModelKind { kGppl, kDirectRanker };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

// One level-0 learner: its family, the feature matrix it reads, and its
// hyperparameters (only the block matching `kind` is used).
struct Level0Spec {
  ModelKind kind = ModelKind::kGppl;
  std::string feature_name;  // Label only; used in reports and model files.
  std::shared_ptr<const FeatureMatrix> features;
  GpplConfig gppl;
  RankerConfig ranker;
};

struct StackConfig {
  int n_folds = 4;
  std::vector<Level0Spec> level0;
  std::uint64_t seed = 0;
  // Average fold rank positions instead of fold scores.
  bool rank_mean = false;

  void Validate() const;
};

using Level0Model = std::variant<GpplPosterior, RankerModel>;

// Scores a level-0 model on every row of `features`: GPPL predictive means or
// DirectRanker tanh scores.
ScoreVector ScoreLevel0(const Level0Model& model, const FeatureMatrix& features);

// Linear level-1 model on standardized level-0 scores.
struct MetaModel {
  Eigen::VectorXd weights;     // On standardized inputs.
  double intercept = 0.0;
  Eigen::VectorXd input_mean;  // Validation-fold statistics.
  Eigen::VectorXd input_scale;  // Standard deviations (1 where degenerate).
  bool fallback = false;       // Uniform weights after a degenerate fit.

  double Apply(const Eigen::VectorXd& level0_scores) const;
  // Weights and intercept on the raw (unstandardized) level-0 scores.
  Eigen::VectorXd RawWeights() const;
  double RawIntercept() const;
};

// Least squares of `target` on standardized columns of `inputs` plus an
// intercept. A constant column or rank-deficient design falls back to uniform
// weights and intercept mean(target).
MetaModel FitMetaModel(const Eigen::MatrixXd& inputs,
                       const Eigen::VectorXd& target);

struct StackFold {
  std::vector<DocId> train_ids;
  std::vector<DocId> val_ids;
  std::vector<PairLabel> train_pairs;  // Level-0 training pairs (not saved).
  std::vector<Level0Model> models;     // One per level-0 spec.
  MetaModel meta;
};

struct StackModel {
  std::vector<ModelKind> kinds;
  std::vector<std::string> feature_names;
  std::vector<StackFold> folds;
  bool rank_mean = false;
  std::vector<std::string> warnings;
};

// Partition of `ids` into `n` validation folds of near-equal size (sizes
// differ by at most one) after a seeded shuffle. Returns (train, val) pairs.
std::vector<std::pair<std::vector<DocId>, std::vector<DocId>>> MakeFolds(
    const std::vector<DocId>& ids, int n, std::uint64_t seed);

// Trains every level-0 spec on each fold's training ids (pairs crossing into
// the validation fold are dropped), then fits the fold's meta-model mapping
// validation-fold level-0 scores to `bws_train` on those ids.
StackModel FitStack(const std::vector<PairLabel>& pairs,
                    const ScoreVector& bws_train, const StackConfig& cfg);

// Mean over folds of each fold meta-model's prediction. `features[j]` feeds
// level-0 model j and must cover `ids`.
ScoreVector PredictStacked(const StackModel& model,
                           const std::vector<const FeatureMatrix*>& features,
                           const std::vector<DocId>& ids);

// Cross-validation ensemble of one level-0 family: the mean over folds of that
// model's raw scores on `ids`.
ScoreVector PredictFoldEnsemble(const StackModel& model, std::size_t level0,
                                const FeatureMatrix& features,
                                const std::vector<DocId>& ids);

void SaveStack(const std::string& path, const StackModel& model);
StackModel LoadStack(const std::string& path);

}  // namespace prefrank

#endif  // PREFRANK_STACKING_H_
