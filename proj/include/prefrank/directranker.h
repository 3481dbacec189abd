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

#ifndef PREFRANK_DIRECTRANKER_H_
#define PREFRANK_DIRECTRANKER_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "prefrank/mlp.h"
#include "prefrank/types.h"

namespace prefrank {

struct RankerConfig {
  std::vector<int> hidden_dims = {2000, 500, 64, 7};
  // Empty: reuse hidden_dims for the focus-word network.
  std::vector<int> focus_hidden_dims;
  double learning_rate = 0.001;
  double dropout = 0.4;
  bool batch_norm = true;
  // Unset: 10 x number of training documents.
  std::optional<int> pairs_per_epoch;
  int batch_size = 64;
  int max_epochs = 50;
  int patience = 10;
  bool standardize_inputs = true;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct TrainPair {
  DocId x1;
  DocId x2;
  double label = 0.0;  // +1 if x1 ranks above x2, else -1.
};

// Shared feature network (and optional shared focus network) feeding a
// bias-free tanh output on the difference of latent utilities.
struct RankerModel {
  RankerConfig config;
  Eigen::RowVectorXd input_mean;   // Standardization of raw features.
  Eigen::RowVectorXd input_scale;
  Eigen::RowVectorXd focus_mean;
  Eigen::RowVectorXd focus_scale;
  FeatureNet feature_net;
  std::optional<FeatureNet> focus_net;
  Eigen::VectorXd output_weight;  // No bias.
  int epochs_trained = 0;
  int best_epoch = 0;
  double best_validation = 0.0;

  bool has_focus() const { return focus_net.has_value(); }
  int input_dim() const { return feature_net.input_dim(); }
  int focus_dim() const { return focus_net ? focus_net->input_dim() : 0; }

  // Randomly initialised model for the given input sizes (focus_dim 0: none).
  static RankerModel Init(int input_dim, int focus_dim, const RankerConfig& cfg);

  // Eval-mode latent utilities (u, u_focus) concatenated, one row per input.
  Eigen::MatrixXd Utilities(const Eigen::MatrixXd& features,
                            const Eigen::MatrixXd* focus) const;

  std::size_t ParamCount() const;
  std::vector<double> Flatten() const;
  void Unflatten(const std::vector<double>& params);
};

// tau(w . (u1 - u2) / 2) with tau = tanh.
double RankingOutput(const Eigen::VectorXd& w, const Eigen::VectorXd& u1,
                     const Eigen::VectorXd& u2);

// Evaluation-mode pair output o1 in (-1, 1). Focus vectors must be given
// exactly when the model has a focus network.
double ForwardPair(const RankerModel& model, const Eigen::VectorXd& f1,
                   const Eigen::VectorXd& f2,
                   const Eigen::VectorXd* focus1 = nullptr,
                   const Eigen::VectorXd* focus2 = nullptr);

// (label - o1)^2.
double RankLoss(double label, double o1);

// `n` pairs drawn uniformly with replacement among document pairs whose scores
// differ; label +1 iff score(x1) > score(x2).
std::vector<TrainPair> GenerateTrainingPairs(const ScoreVector& scores, int n,
                                             std::uint64_t seed);

// Mean RankLoss of a batch of pairs and its gradient in Flatten() order. Rows
// of x1/x2 (and focus1/focus2) are already-standardized inputs. Uses training
// mode (batch statistics, dropout from `rng`) unless `mode` is kEval, which
// only supports the loss.
double PairBatchLoss(RankerModel& model, const Eigen::MatrixXd& x1,
                     const Eigen::MatrixXd& x2, const Eigen::MatrixXd* focus1,
                     const Eigen::MatrixXd* focus2,
                     const Eigen::VectorXd& labels, Mode mode, Rng* rng,
                     std::vector<double>* grads, bool update_stats = false);

struct RankerValidation {
  FeatureMatrix features;
  ScoreVector gold;
};

// Adam on generated BWS pairs. With `validation`, training stops once the
// validation Spearman has not improved for `patience` epochs and the best
// epoch's weights are restored.
RankerModel TrainRanker(const FeatureMatrix& features,
                        const ScoreVector& bws_scores, const RankerConfig& cfg,
                        const std::optional<RankerValidation>& validation =
                            std::nullopt);

// tanh(w . u_d) per document.
ScoreVector PredictScores(const RankerModel& model,
                          const FeatureMatrix& features);

void WriteRanker(std::ostream& out, const RankerModel& model);
RankerModel ReadRanker(std::istream& in, const std::string& source);
void SaveRanker(const std::string& path, const RankerModel& model);
RankerModel LoadRanker(const std::string& path);

}  // namespace prefrank

#endif  // PREFRANK_DIRECTRANKER_H_
