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

#include "prefrank/mlp.h"

#include <cmath>
#include <istream>
#include <ostream>

#include "prefrank/binary_io.h"
#include "prefrank/types.h"

namespace prefrank {

namespace {
constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

template <typename Vec>
void Append(std::vector<double>& out, const Vec& v) {
  out.insert(out.end(), v.data(), v.data() + v.size());
}

template <typename Vec>
std::size_t Take(const std::vector<double>& in, std::size_t offset, Vec& v) {
  std::copy(in.begin() + offset, in.begin() + offset + v.size(), v.data());
  return offset + v.size();
}
}  // namespace

FeatureNet::FeatureNet(int input_dim, const std::vector<int>& hidden_dims,
                       bool batch_norm, double dropout, Rng& rng)
    : input_dim_(input_dim), batch_norm_(batch_norm), dropout_(dropout) {
  int fan_in = input_dim;
  for (int width : hidden_dims) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> init(-bound, bound);
    Layer layer;
    layer.weight = Eigen::MatrixXd::NullaryExpr(
        width, fan_in, [&]() { return init(rng); });
    layer.bias = Eigen::VectorXd::NullaryExpr(width, [&]() { return init(rng); });
    layer.gamma = Eigen::VectorXd::Ones(width);
    layer.beta = Eigen::VectorXd::Zero(width);
    layer.running_mean = Eigen::VectorXd::Zero(width);
    layer.running_var = Eigen::VectorXd::Ones(width);
    layers_.push_back(std::move(layer));
    fan_in = width;
  }
}

int FeatureNet::output_dim() const {
  return layers_.empty() ? input_dim_
                         : static_cast<int>(layers_.back().weight.rows());
}

Eigen::MatrixXd FeatureNet::Forward(const Eigen::MatrixXd& x, Mode mode,
                                    Rng* rng, Cache* cache,
                                    bool update_stats) {
  if (x.cols() != input_dim_) {
    throw ValidationError("directranker",
                          "network input has " + std::to_string(x.cols()) +
                              " columns, expected " +
                              std::to_string(input_dim_));
  }
  if (mode == Mode::kEval) return Infer(x);
  if (cache) *cache = Cache{};

  Eigen::MatrixXd h = x;
  const double batch = static_cast<double>(x.rows());
  std::bernoulli_distribution keep(1.0 - dropout_);
  for (auto& layer : layers_) {
    if (cache) cache->inputs.push_back(h);
    Eigen::MatrixXd a = (h * layer.weight.transpose()).rowwise() +
                        layer.bias.transpose();
    a = a.array().tanh();
    if (cache) cache->activations.push_back(a);
    if (batch_norm_) {
      const Eigen::RowVectorXd mean = a.colwise().mean();
      const Eigen::MatrixXd centered = a.rowwise() - mean;
      const Eigen::RowVectorXd var = centered.array().square().colwise().mean();
      const Eigen::VectorXd inv_std =
          (var.array() + kBnEps).rsqrt().transpose();
      Eigen::MatrixXd xhat = centered * inv_std.asDiagonal();
      if (cache) {
        cache->normalized.push_back(xhat);
        cache->inv_std.push_back(inv_std);
      }
      if (update_stats) {
        const double unbias = batch > 1.0 ? batch / (batch - 1.0) : 1.0;
        layer.running_mean = (1.0 - kBnMomentum) * layer.running_mean +
                             kBnMomentum * mean.transpose();
        layer.running_var = (1.0 - kBnMomentum) * layer.running_var +
                            kBnMomentum * unbias * var.transpose();
      }
      a = (xhat * layer.gamma.asDiagonal()).rowwise() + layer.beta.transpose();
    }
    if (dropout_ > 0.0) {
      if (!rng) throw Error("directranker", "dropout needs a random source");
      Eigen::MatrixXd mask = Eigen::MatrixXd::NullaryExpr(
          a.rows(), a.cols(),
          [&]() { return keep(*rng) ? 1.0 / (1.0 - dropout_) : 0.0; });
      a = a.cwiseProduct(mask);
      if (cache) cache->masks.push_back(std::move(mask));
    }
    h = std::move(a);
  }
  return h;
}

Eigen::MatrixXd FeatureNet::Infer(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim_) {
    throw ValidationError("directranker",
                          "network input has " + std::to_string(x.cols()) +
                              " columns, expected " +
                              std::to_string(input_dim_));
  }
  Eigen::MatrixXd h = x;
  for (const auto& layer : layers_) {
    Eigen::MatrixXd a = (h * layer.weight.transpose()).rowwise() +
                        layer.bias.transpose();
    a = a.array().tanh();
    if (batch_norm_) {
      const Eigen::VectorXd scale =
          layer.gamma.cwiseProduct(
              (layer.running_var.array() + kBnEps).rsqrt().matrix());
      a = ((a.rowwise() - layer.running_mean.transpose()) * scale.asDiagonal())
              .rowwise() +
          layer.beta.transpose();
    }
    h = std::move(a);
  }
  return h;
}

Eigen::MatrixXd FeatureNet::Backward(const Cache& cache,
                                     const Eigen::MatrixXd& grad_out,
                                     std::vector<double>& grads) const {
  const std::size_t n_layers = layers_.size();
  std::vector<Eigen::MatrixXd> d_weight(n_layers);
  std::vector<Eigen::VectorXd> d_bias(n_layers), d_gamma(n_layers),
      d_beta(n_layers);
  const double batch = static_cast<double>(grad_out.rows());

  Eigen::MatrixXd g = grad_out;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = layers_[k];
    if (dropout_ > 0.0) g = g.cwiseProduct(cache.masks[k]);
    if (batch_norm_) {
      const auto& xhat = cache.normalized[k];
      d_gamma[k] = g.cwiseProduct(xhat).colwise().sum().transpose();
      d_beta[k] = g.colwise().sum().transpose();
      const Eigen::MatrixXd dxhat = g * layer.gamma.asDiagonal();
      const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
      const Eigen::RowVectorXd sum_dxhat_xhat =
          dxhat.cwiseProduct(xhat).colwise().sum();
      Eigen::MatrixXd centered = batch * dxhat;
      centered.rowwise() -= sum_dxhat;
      centered -= xhat * sum_dxhat_xhat.asDiagonal();
      g = centered * (cache.inv_std[k] / batch).asDiagonal();
    } else {
      d_gamma[k] = Eigen::VectorXd::Zero(layer.gamma.size());
      d_beta[k] = Eigen::VectorXd::Zero(layer.beta.size());
    }
    const auto& a = cache.activations[k];
    g = g.cwiseProduct((1.0 - a.array().square()).matrix());
    d_weight[k] = g.transpose() * cache.inputs[k];
    d_bias[k] = g.colwise().sum().transpose();
    g = g * layer.weight;
  }
  for (std::size_t k = 0; k < n_layers; ++k) {
    Append(grads, d_weight[k]);
    Append(grads, d_bias[k]);
    Append(grads, d_gamma[k]);
    Append(grads, d_beta[k]);
  }
  return g;
}

std::size_t FeatureNet::ParamCount() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += layer.weight.size() + layer.bias.size() + layer.gamma.size() +
         layer.beta.size();
  }
  return n;
}

void FeatureNet::Flatten(std::vector<double>& out) const {
  for (const auto& layer : layers_) {
    Append(out, layer.weight);
    Append(out, layer.bias);
    Append(out, layer.gamma);
    Append(out, layer.beta);
  }
}

std::size_t FeatureNet::Unflatten(const std::vector<double>& in,
                                  std::size_t offset) {
  for (auto& layer : layers_) {
    offset = Take(in, offset, layer.weight);
    offset = Take(in, offset, layer.bias);
    offset = Take(in, offset, layer.gamma);
    offset = Take(in, offset, layer.beta);
  }
  return offset;
}

void FeatureNet::Write(std::ostream& out) const {
  BinaryWriter w(out);
  w.WriteU64(static_cast<std::uint64_t>(input_dim_));
  w.WriteBool(batch_norm_);
  w.WriteF64(dropout_);
  w.WriteU64(layers_.size());
  for (const auto& layer : layers_) {
    w.WriteMatrix(layer.weight);
    w.WriteVector(layer.bias);
    w.WriteVector(layer.gamma);
    w.WriteVector(layer.beta);
    w.WriteVector(layer.running_mean);
    w.WriteVector(layer.running_var);
  }
}

FeatureNet FeatureNet::Read(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  FeatureNet net;
  net.input_dim_ = static_cast<int>(r.ReadU64());
  net.batch_norm_ = r.ReadBool();
  net.dropout_ = r.ReadF64();
  const std::uint64_t n = r.ReadU64();
  Eigen::Index fan_in = net.input_dim_;
  for (std::uint64_t k = 0; k < n; ++k) {
    Layer layer;
    layer.weight = r.ReadMatrix();
    layer.bias = r.ReadVector();
    layer.gamma = r.ReadVector();
    layer.beta = r.ReadVector();
    layer.running_mean = r.ReadVector();
    layer.running_var = r.ReadVector();
    const Eigen::Index width = layer.weight.rows();
    if (layer.weight.cols() != fan_in || layer.bias.size() != width ||
        layer.gamma.size() != width || layer.beta.size() != width ||
        layer.running_mean.size() != width ||
        layer.running_var.size() != width) {
      throw Error("io", source + ": inconsistent layer shapes");
    }
    fan_in = width;
    net.layers_.push_back(std::move(layer));
  }
  return net;
}

}  // namespace prefrank
