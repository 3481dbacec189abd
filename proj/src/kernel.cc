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

#include "prefrank/kernel.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "prefrank/types.h"

namespace prefrank {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

Eigen::VectorXd InverseScales(const Matern32Params& params, Eigen::Index dim) {
  const auto& ls = params.lengthscales;
  if (ls.size() != 1 && ls.size() != dim) {
    throw ValidationError("gppl", "lengthscale count " +
                                      std::to_string(ls.size()) +
                                      " does not match feature dim " +
                                      std::to_string(dim));
  }
  if ((ls.array() <= 0.0).any() || params.signal_var <= 0.0) {
    throw ValidationError("gppl", "kernel parameters must be positive");
  }
  if (ls.size() == 1) return Eigen::VectorXd::Constant(dim, 1.0 / ls[0]);
  return ls.cwiseInverse();
}

double Median(std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + mid));
  }
  return m;
}

}  // namespace

double Matern32(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Matern32Params& params) {
  if (x.size() != y.size()) {
    throw ValidationError("gppl", "kernel inputs differ in dimension (" +
                                      std::to_string(x.size()) + " vs " +
                                      std::to_string(y.size()) + ")");
  }
  const Eigen::VectorXd inv = InverseScales(params, x.size());
  const double r = (x - y).cwiseProduct(inv).norm();
  return params.signal_var * (1.0 + kSqrt3 * r) * std::exp(-kSqrt3 * r);
}

Eigen::MatrixXd Matern32Gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const Matern32Params& params) {
  if (a.cols() != b.cols()) {
    throw ValidationError("gppl", "kernel inputs differ in dimension (" +
                                      std::to_string(a.cols()) + " vs " +
                                      std::to_string(b.cols()) + ")");
  }
  const Eigen::VectorXd inv = InverseScales(params, a.cols());
  const Eigen::MatrixXd sa = a * inv.asDiagonal();
  const Eigen::MatrixXd sb = b * inv.asDiagonal();
  const Eigen::VectorXd na = sa.rowwise().squaredNorm();
  const Eigen::VectorXd nb = sb.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * sa * sb.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  if (&a == &b || (a.data() == b.data() && a.rows() == b.rows())) {
    d2 = 0.5 * (d2 + d2.transpose()).eval();
    d2.diagonal().setZero();
  }
  return d2.unaryExpr([&](double v) {
    const double r = kSqrt3 * std::sqrt(std::max(v, 0.0));
    return params.signal_var * (1.0 + r) * std::exp(-r);
  });
}

void AddNugget(Eigen::MatrixXd& k, const Eigen::MatrixXd& a,
               const Eigen::MatrixXd& b, double jitter) {
  if (jitter == 0.0) return;
  const Eigen::Index dim = a.cols();
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      Eigen::Index d = 0;
      while (d < dim && a(i, d) == b(j, d)) ++d;
      if (d == dim) k(i, j) += jitter;
    }
  }
}

Eigen::VectorXd MedianHeuristicLengthscales(const Eigen::MatrixXd& x,
                                            Eigen::Index max_rows) {
  const Eigen::Index n = std::min(x.rows(), max_rows);
  const Eigen::Index dim = x.cols();
  if (n < 2) return Eigen::VectorXd::Ones(dim);

  std::vector<double> euclid;
  euclid.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      euclid.push_back((x.row(i) - x.row(j)).norm());
  double fallback = Median(euclid);
  if (fallback <= 0.0) fallback = 1.0;

  Eigen::VectorXd ls(dim);
  std::vector<double> diffs;
  diffs.reserve(n * (n - 1) / 2);
  for (Eigen::Index d = 0; d < dim; ++d) {
    diffs.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        diffs.push_back(std::abs(x(i, d) - x(j, d)));
    const double m = Median(diffs);
    ls[d] = m > 0.0 ? m * std::sqrt(static_cast<double>(dim)) : fallback;
  }
  return ls;
}

Eigen::LLT<Eigen::MatrixXd> FactorWithJitter(const Eigen::MatrixXd& k,
                                             double signal_var,
                                             double* jitter) {
  double j = 1e-6 * signal_var;
  for (int attempt = 0; attempt <= 3; ++attempt, j *= 10.0) {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() == Eigen::Success) {
      *jitter = j;
      return llt;
    }
  }
  throw Error("gppl", "kernel matrix is numerically singular after jitter "
                      "escalation");
}

}  // namespace prefrank
