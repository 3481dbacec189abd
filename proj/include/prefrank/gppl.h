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

#ifndef PREFRANK_GPPL_H_
#define PREFRANK_GPPL_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "Eigen/Cholesky"
#include "Eigen/Core"
#include "prefrank/kernel.h"
#include "prefrank/probit.h"
#include "prefrank/types.h"

namespace prefrank {

struct GpplConfig {
  double sigma2 = 1.0;  // Likelihood variance of the probit link.
  double signal_var = 1.0;
  // Empty: median heuristic on the training features. One element: scalar.
  Eigen::VectorXd lengthscales;
  int n_inducing = 500;
  int batch_size = 200;
  int max_iters = 1000;
  double tol = 1e-6;
  double step_size = 0.1;  // Natural-gradient step.
  bool optimize_hyperparameters = false;
  int hyper_every = 25;
  int quadrature_points = 24;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct GpplPosterior {
  Eigen::MatrixXd inducing_inputs;  // M x dim.
  Eigen::VectorXd mean;             // Variational mean of inducing utilities.
  Eigen::MatrixXd cov;              // Variational covariance, M x M.
  Matern32Params kernel;
  double sigma2 = 1.0;
  double jitter = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> bound_trace;  // Full-data bound at each check.

  std::size_t dim() const {
    return static_cast<std::size_t>(inducing_inputs.cols());
  }
};

struct UtilityPrediction {
  struct Entry {
    double mean = 0.0;
    double variance = 0.0;
  };
  std::map<DocId, Entry> entries;

  ScoreVector Means() const;
};

// Sparse variational GP preference model: Matern 3/2 prior on utilities,
// probit pairwise likelihood, inducing-point posterior q(u) = N(mean, cov)
// fitted by natural-gradient stochastic variational inference.
// Throws ValidationError for missing features or empty `pairs`, and Error when
// the inducing kernel matrix stays singular after jitter escalation.
GpplPosterior FitGppl(const FeatureMatrix& features,
                      const std::vector<PairLabel>& pairs,
                      const GpplConfig& cfg);

// Predictive mean and variance of the utility at every row of `features`.
UtilityPrediction PredictGppl(const GpplPosterior& posterior,
                              const FeatureMatrix& features);

// Non-sparse Laplace-approximation reference over all training documents,
// predicting at every row of `features`. Limited to kExactMaxDocs documents.
inline constexpr std::size_t kExactMaxDocs = 200;
UtilityPrediction FitExactReference(const FeatureMatrix& features,
                                    const std::vector<PairLabel>& pairs,
                                    const GpplConfig& cfg);

// Kernel hyperparameters GPPL would use for the documents named in `pairs`.
Matern32Params ResolveKernel(const FeatureMatrix& features,
                             const std::vector<PairLabel>& pairs,
                             const GpplConfig& cfg);

// k-means++ seeding followed by Lloyd refinement. Returns at most `k` centers
// (fewer when `x` has fewer distinct rows).
Eigen::MatrixXd KMeansCenters(const Eigen::MatrixXd& x, int k,
                              std::uint64_t seed, int lloyd_iters = 10);

// Evidence lower bound of the sparse model for fixed inducing inputs and
// kernel, with its analytic gradients. Exposed for optimisation and checks.
class VariationalBound {
 public:
  VariationalBound(const FeatureMatrix& features,
                   const std::vector<PairLabel>& pairs,
                   Eigen::MatrixXd inducing_inputs, Matern32Params kernel,
                   double sigma2, int quadrature_points);

  Eigen::Index num_inducing() const { return kmm_.rows(); }
  std::size_t num_pairs() const { return pair_rows_.size(); }
  const Eigen::MatrixXd& kmm() const { return kmm_; }
  double jitter() const { return jitter_; }

  // Expected log-likelihood over all pairs minus KL(q(u) || p(u)).
  double Evaluate(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) const;
  Eigen::VectorXd GradientMean(const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov) const;
  // Gradient w.r.t. the entries of a symmetric `cov`, as dL = tr(G dS).
  Eigen::MatrixXd GradientCov(const Eigen::VectorXd& mean,
                              const Eigen::MatrixXd& cov) const;

  // One natural-gradient step on the pairs indexed by `batch` (rows of the
  // merged pair list), rescaled to the full data. Updates mean/cov in place.
  void NaturalStep(const std::vector<std::size_t>& batch, double step,
                   Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const;

 private:
  struct PairRow {
    Eigen::Index winner;
    Eigen::Index loser;
    double count;
    double cond_var;  // Variance of f_w - f_l left over given u.
  };
  struct Moments {
    double d_mean = 0.0;  // d ELL / d mu.
    double d_var = 0.0;   // d ELL / d v.
    double ell = 0.0;
  };

  Eigen::RowVectorXd Diff(const PairRow& p) const {
    return a_.row(p.winner) - a_.row(p.loser);
  }
  Moments ExpectedLogLik(double mu, double var) const;
  double Kl(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) const;

  Eigen::MatrixXd kmm_;  // Jittered.
  Eigen::LLT<Eigen::MatrixXd> kmm_llt_;
  Eigen::MatrixXd kmm_inv_;
  Eigen::MatrixXd a_;  // K_nm K_mm^-1, one row per training doc.
  std::vector<PairRow> pair_rows_;
  double scale_;
  double jitter_ = 0.0;
  GaussHermite quad_;
};

void SaveGppl(const std::string& path, const GpplPosterior& posterior);
GpplPosterior LoadGppl(const std::string& path);
void WriteGppl(std::ostream& out, const GpplPosterior& posterior);
GpplPosterior ReadGppl(std::istream& in, const std::string& source);

}  // namespace prefrank

#endif  // PREFRANK_GPPL_H_
