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

#ifndef PREFRANK_MLP_H_
#define PREFRANK_MLP_H_

#include <iosfwd>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "prefrank/seeds.h"

namespace prefrank {

enum class Mode { kTrain, kEval };

// Fully connected tanh network. Each layer is affine -> tanh, optionally
// followed by batch normalization and (inverted) dropout. Inputs are batches
// with one example per row.
class FeatureNet {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in.
    Eigen::VectorXd bias;
    Eigen::VectorXd gamma;  // Batch-norm scale and shift.
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
  };

  // Per-layer activations kept by a training forward pass for Backward().
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> activations;  // tanh outputs.
    std::vector<Eigen::MatrixXd> normalized;   // x-hat of batch norm.
    std::vector<Eigen::VectorXd> inv_std;
    std::vector<Eigen::MatrixXd> masks;        // Dropout keep mask / (1 - p).
  };

  FeatureNet() = default;
  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); gamma = 1, beta = 0.
  FeatureNet(int input_dim, const std::vector<int>& hidden_dims,
             bool batch_norm, double dropout, Rng& rng);

  int input_dim() const { return input_dim_; }
  int output_dim() const;
  bool batch_norm() const { return batch_norm_; }
  double dropout() const { return dropout_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  // In kTrain mode batch statistics are used (and folded into the running
  // statistics when `update_stats`), dropout draws from `rng`, and `cache` is
  // filled if non-null. kEval is a pure function of `x`.
  Eigen::MatrixXd Forward(const Eigen::MatrixXd& x, Mode mode, Rng* rng,
                          Cache* cache, bool update_stats = true);

  // Eval-mode forward; const.
  Eigen::MatrixXd Infer(const Eigen::MatrixXd& x) const;

  // Backpropagates `grad_out` through a cached training pass. Parameter
  // gradients are appended to `grads` in Flatten() order; returns d/d input.
  Eigen::MatrixXd Backward(const Cache& cache, const Eigen::MatrixXd& grad_out,
                           std::vector<double>& grads) const;

  std::size_t ParamCount() const;
  void Flatten(std::vector<double>& out) const;
  // Reads ParamCount() values starting at `offset`; returns the new offset.
  std::size_t Unflatten(const std::vector<double>& in, std::size_t offset);

  void Write(std::ostream& out) const;
  static FeatureNet Read(std::istream& in, const std::string& source);

 private:
  int input_dim_ = 0;
  bool batch_norm_ = false;
  double dropout_ = 0.0;
  std::vector<Layer> layers_;
};

}  // namespace prefrank

#endif  // PREFRANK_MLP_H_
