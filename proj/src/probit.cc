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

#include "prefrank/probit.h"

#include <cmath>
#include <numbers>

#include "Eigen/Eigenvalues"
#include "prefrank/types.h"

namespace prefrank {

namespace {
// Below this z, erfc-based Phi loses relative precision; switch to the
// asymptotic Mills-ratio series.
constexpr double kTailCutoff = -20.0;

// Phi(z) / phi(z) for z << 0, from the asymptotic series in 1/z^2.
double MillsTail(double z) {
  const double x = -z;
  const double inv2 = 1.0 / (x * x);
  return (1.0 / x) *
         (1.0 - inv2 * (1.0 - 3.0 * inv2 * (1.0 - 5.0 * inv2 *
                                                     (1.0 - 7.0 * inv2))));
}
}  // namespace

double NormalPdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double NormalCdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double LogNormalCdf(double z) {
  if (z > kTailCutoff) return std::log(NormalCdf(z));
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(MillsTail(z));
}

double InverseMillsRatio(double z) {
  if (z > kTailCutoff) return NormalPdf(z) / NormalCdf(z);
  return 1.0 / MillsTail(z);
}

double ProbitScale(double sigma2) { return std::numbers::sqrt2 * sigma2; }

double PairProbability(double u1, double u2, double sigma2) {
  return NormalCdf((u1 - u2) / ProbitScale(sigma2));
}

GaussHermite MakeGaussHermite(int n_points) {
  if (n_points < 1) throw Error("gppl", "Gauss-Hermite needs >= 1 node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
  // polynomials: off-diagonal sqrt(k).
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n_points, n_points);
  for (int k = 1; k < n_points; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermite rule;
  for (int i = 0; i < n_points; ++i) {
    rule.nodes.push_back(eig.eigenvalues()[i]);
    const double v0 = eig.eigenvectors()(0, i);
    rule.weights.push_back(v0 * v0);
  }
  // Exact mirror symmetry of nodes and weights.
  for (int i = 0; i < n_points / 2; ++i) {
    const int j = n_points - 1 - i;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n_points % 2 == 1) rule.nodes[n_points / 2] = 0.0;
  return rule;
}

}  // namespace prefrank
