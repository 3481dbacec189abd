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

#ifndef PREFRANK_PROBIT_H_
#define PREFRANK_PROBIT_H_

#include <vector>

namespace prefrank {

double NormalPdf(double z);
double NormalCdf(double z);
// log Phi(z), accurate far into the lower tail.
double LogNormalCdf(double z);
// d/dz log Phi(z) = phi(z) / Phi(z).
double InverseMillsRatio(double z);

// Probability that an item with utility `u1` is preferred to one with `u2`
// under the probit random-utility model: Phi((u1 - u2) / (sqrt(2) * sigma2)).
double PairProbability(double u1, double u2, double sigma2);

// Scale of the probit argument for a given likelihood variance.
double ProbitScale(double sigma2);

// Probabilists' Gauss-Hermite rule: sum_i w_i f(x_i) ~ E[f(X)], X ~ N(0, 1).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite MakeGaussHermite(int n_points);

}  // namespace prefrank

#endif  // PREFRANK_PROBIT_H_
