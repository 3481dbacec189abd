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
#include <string>
#include <unordered_map>

#include "prefrank/corpus.h"
#include "prefrank/gppl.h"

namespace prefrank {

namespace {

struct PairIndex {
  Eigen::Index winner;
  Eigen::Index loser;
  double count;
};

double LogJoint(const Eigen::VectorXd& f, const Eigen::MatrixXd& k_inv,
                const std::vector<PairIndex>& pairs, double scale) {
  double ll = 0.0;
  for (const auto& p : pairs)
    ll += p.count * LogNormalCdf((f[p.winner] - f[p.loser]) / scale);
  return ll - 0.5 * f.dot(k_inv * f);
}

}  // namespace

// Laplace approximation: Newton ascent to the mode of
//   sum_p c_p log Phi((f_w - f_l) / s) - f^T K^-1 f / 2,
// then N(mode, (K^-1 + W)^-1) with W the negative likelihood Hessian.
UtilityPrediction FitExactReference(const FeatureMatrix& features,
                                    const std::vector<PairLabel>& pairs,
                                    const GpplConfig& cfg) {
  cfg.Validate();
  if (pairs.empty()) {
    throw ValidationError("gppl", "cannot fit GPPL without pairwise labels");
  }
  const auto merged = MergePairs(pairs);
  RequireFeatureCoverage(merged, features);
  const auto ids = PairDocIds(merged);
  if (ids.size() > kExactMaxDocs) {
    throw ValidationError("gppl", "exact reference is limited to " +
                                      std::to_string(kExactMaxDocs) +
                                      " documents, got " +
                                      std::to_string(ids.size()));
  }
  const Eigen::MatrixXd x = features.Select(ids).rows();
  const Matern32Params kernel = ResolveKernel(features, merged, cfg);
  const double scale = ProbitScale(cfg.sigma2);

  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i)
    row_of.emplace(ids[i], static_cast<Eigen::Index>(i));
  std::vector<PairIndex> index;
  for (const auto& p : merged) {
    index.push_back({row_of.at(p.winner_id), row_of.at(p.loser_id),
                     static_cast<double>(p.count)});
  }

  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k = Matern32Gram(x, x, kernel);
  double jitter = 0.0;
  const auto k_llt = FactorWithJitter(k, kernel.signal_var, &jitter);
  k.diagonal().array() += jitter;
  Eigen::MatrixXd k_inv = k_llt.solve(Eigen::MatrixXd::Identity(n, n));
  k_inv = 0.5 * (k_inv + k_inv.transpose());

  auto gradient_and_w = [&](const Eigen::VectorXd& f, Eigen::VectorXd& grad,
                            Eigen::MatrixXd& w) {
    grad.setZero(n);
    w.setZero(n, n);
    for (const auto& p : index) {
      const double z = (f[p.winner] - f[p.loser]) / scale;
      const double lambda = InverseMillsRatio(z);
      const double g = p.count * lambda / scale;
      // -d2/dz2 log Phi = lambda (z + lambda) >= 0.
      const double h = p.count * lambda * (z + lambda) / (scale * scale);
      grad[p.winner] += g;
      grad[p.loser] -= g;
      w(p.winner, p.winner) += h;
      w(p.loser, p.loser) += h;
      w(p.winner, p.loser) -= h;
      w(p.loser, p.winner) -= h;
    }
  };

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad;
  Eigen::MatrixXd w;
  double objective = LogJoint(f, k_inv, index, scale);
  for (int iter = 0; iter < 200; ++iter) {
    gradient_and_w(f, grad, w);
    const Eigen::LLT<Eigen::MatrixXd> h_llt(k_inv + w);
    if (h_llt.info() != Eigen::Success) {
      throw Error("gppl", "Laplace Hessian is not positive definite");
    }
    const Eigen::VectorXd target = h_llt.solve(w * f + grad);
    const Eigen::VectorXd delta = target - f;
    double step = 1.0;
    double next = objective;
    Eigen::VectorXd candidate = f;
    for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
      candidate = f + step * delta;
      next = LogJoint(candidate, k_inv, index, scale);
      if (next >= objective) break;
    }
    if (next < objective) break;
    const double change = next - objective;
    f = candidate;
    objective = next;
    if (change < 1e-13 * std::max(1.0, std::abs(objective)) &&
        delta.lpNorm<Eigen::Infinity>() < 1e-10) {
      break;
    }
  }

  gradient_and_w(f, grad, w);
  Eigen::MatrixXd post_cov = (k_inv + w).llt().solve(
      Eigen::MatrixXd::Identity(n, n));
  post_cov = 0.5 * (post_cov + post_cov.transpose());
  const Eigen::VectorXd alpha = k_inv * f;

  const Eigen::MatrixXd ks = Matern32Gram(features.rows(), x, kernel);
  const Eigen::MatrixXd a = ks * k_inv;
  const Eigen::VectorXd mean = ks * alpha;
  const Eigen::VectorXd explained = a.cwiseProduct(ks).rowwise().sum();
  const Eigen::VectorXd spread = (a * post_cov).cwiseProduct(a).rowwise().sum();

  UtilityPrediction out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double var = kernel.signal_var - explained[i] + spread[i];
    out.entries[features.doc_ids()[i]] = {mean[i], std::max(var, 0.0)};
  }
  return out;
}

}  // namespace prefrank
