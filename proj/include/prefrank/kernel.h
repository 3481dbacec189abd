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

#ifndef PREFRANK_KERNEL_H_
#define PREFRANK_KERNEL_H_

#include "Eigen/Cholesky"
#include "Eigen/Core"

namespace prefrank {

// Matern 3/2 covariance with per-dimension (ARD) or scalar lengthscales.
// A single-element lengthscale vector is broadcast to every dimension.
struct Matern32Params {
  double signal_var = 1.0;
  Eigen::VectorXd lengthscales = Eigen::VectorXd::Ones(1);
};

// k = signal_var * (1 + sqrt(3) r) * exp(-sqrt(3) r), with r the
// lengthscale-scaled Euclidean distance.
double Matern32(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Matern32Params& params);

// Gram matrix between the rows of `a` and the rows of `b`.
Eigen::MatrixXd Matern32Gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const Matern32Params& params);

// White-noise term: adds `jitter` to k(i, j) wherever row i of `a` equals
// row j of `b`.
void AddNugget(Eigen::MatrixXd& k, const Eigen::MatrixXd& a,
               const Eigen::MatrixXd& b, double jitter);

// Median heuristic: per-feature median absolute pairwise difference, scaled by
// sqrt(dim) so the typical scaled distance is ~1. Zero medians fall back to the
// median Euclidean distance. At most `max_rows` rows are inspected.
Eigen::VectorXd MedianHeuristicLengthscales(const Eigen::MatrixXd& x,
                                            Eigen::Index max_rows = 500);

// Cholesky of `k + jitter * I`. Jitter starts at 1e-6 * signal_var and grows
// x10 at most three times; throws Error("gppl", ...) if every attempt fails.
// The jitter actually added is stored in `*jitter`.
Eigen::LLT<Eigen::MatrixXd> FactorWithJitter(const Eigen::MatrixXd& k,
                                             double signal_var, double* jitter);

}  // namespace prefrank

#endif  // PREFRANK_KERNEL_H_
