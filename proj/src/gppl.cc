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

#include "prefrank/gppl.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "prefrank/binary_io.h"
#include "prefrank/corpus.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

constexpr char kGpplMagic[] = "PRFKGPPL";
constexpr std::uint32_t kGpplVersion = 1;

// Below this standard deviation the v-derivative of the quadrature is taken
// from the second derivative at the mean.
constexpr double kTinySd = 1e-7;

Eigen::MatrixXd Symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

// Natural-parameter form of q(u): precision and precision-times-mean.
struct NaturalState {
  Eigen::MatrixXd precision;
  Eigen::VectorXd shift;
};

Eigen::LLT<Eigen::MatrixXd> FactorPd(const Eigen::MatrixXd& m,
                                     const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw Error("gppl", std::string(what) + " is not positive definite");
  }
  return llt;
}

}  // namespace

void GpplConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw ValidationError("gppl", "invalid config: " + what);
  };
  if (!(sigma2 > 0.0)) fail("sigma2 must be positive");
  if (!(signal_var > 0.0)) fail("signal_var must be positive");
  if (lengthscales.size() > 0 && (lengthscales.array() <= 0.0).any())
    fail("lengthscales must be positive");
  if (n_inducing < 1) fail("n_inducing must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (max_iters < 1) fail("max_iters must be positive");
  if (!(tol > 0.0)) fail("tol must be positive");
  if (!(step_size > 0.0 && step_size <= 1.0)) fail("step_size must be in (0, 1]");
  if (hyper_every < 1) fail("hyper_every must be positive");
  if (quadrature_points < 2) fail("quadrature_points must be >= 2");
}

ScoreVector UtilityPrediction::Means() const {
  ScoreVector out;
  out.provenance = Provenance::kGppl;
  for (const auto& [id, e] : entries) out.entries.emplace(id, e.mean);
  return out;
}

Eigen::MatrixXd KMeansCenters(const Eigen::MatrixXd& x, int k,
                              std::uint64_t seed, int lloyd_iters) {
  const Eigen::Index n = x.rows();
  if (n == 0 || k < 1) return Eigen::MatrixXd(0, x.cols());
  Rng rng(seed);
  std::vector<Eigen::Index> chosen;
  chosen.push_back(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  Eigen::VectorXd d2 = (x.rowwise() - x.row(chosen[0])).rowwise().squaredNorm();
  while (static_cast<int>(chosen.size()) < k) {
    const double total = d2.sum();
    if (!(total > 0.0)) break;  // Every remaining row duplicates a center.
    double target = std::uniform_real_distribution<double>(0.0, total)(rng);
    Eigen::Index next = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0.0 && d2[i] > 0.0) {
        next = i;
        break;
      }
    }
    if (d2[next] <= 0.0) {
      // Rounding at the tail; take the farthest row instead.
      d2.maxCoeff(&next);
    }
    chosen.push_back(next);
    d2 = d2.cwiseMin((x.rowwise() - x.row(next)).rowwise().squaredNorm());
  }

  const Eigen::Index m = static_cast<Eigen::Index>(chosen.size());
  Eigen::MatrixXd centers(m, x.cols());
  for (Eigen::Index c = 0; c < m; ++c) centers.row(c) = x.row(chosen[c]);
  if (m == n) return centers;

  std::vector<Eigen::Index> assign(n, -1);
  for (int iter = 0; iter < lloyd_iters; ++iter) {
    bool changed = false;
    const Eigen::VectorXd cn = centers.rowwise().squaredNorm();
    const Eigen::MatrixXd cross = x * centers.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      (cn.transpose() - 2.0 * cross.row(i)).minCoeff(&best);
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(m, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += x.row(i);
      counts[assign[i]] += 1.0;
    }
    for (Eigen::Index c = 0; c < m; ++c) {
      if (counts[c] > 0.0) centers.row(c) = sums.row(c) / counts[c];
    }
  }
  return centers;
}

Matern32Params ResolveKernel(const FeatureMatrix& features,
                             const std::vector<PairLabel>& pairs,
                             const GpplConfig& cfg) {
  Matern32Params params;
  params.signal_var = cfg.signal_var;
  if (cfg.lengthscales.size() > 0) {
    params.lengthscales = cfg.lengthscales;
  } else {
    const auto ids = PairDocIds(pairs);
    params.lengthscales =
        MedianHeuristicLengthscales(features.Select(ids).rows());
  }
  return params;
}

VariationalBound::VariationalBound(const FeatureMatrix& features,
                                   const std::vector<PairLabel>& pairs,
                                   Eigen::MatrixXd inducing_inputs,
                                   Matern32Params kernel, double sigma2,
                                   int quadrature_points)
    : scale_(ProbitScale(sigma2)),
      quad_(MakeGaussHermite(quadrature_points)) {
  const auto merged = MergePairs(pairs);
  const auto ids = PairDocIds(merged);
  const Eigen::MatrixXd x = features.Select(ids).rows();
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i)
    row_of.emplace(ids[i], static_cast<Eigen::Index>(i));

  kmm_ = Matern32Gram(inducing_inputs, inducing_inputs, kernel);
  kmm_llt_ = FactorWithJitter(kmm_, kernel.signal_var, &jitter_);
  kmm_.diagonal().array() += jitter_;
  kmm_inv_ = kmm_llt_.solve(
      Eigen::MatrixXd::Identity(kmm_.rows(), kmm_.cols()));
  kmm_inv_ = Symmetrize(kmm_inv_);

  Eigen::MatrixXd knm = Matern32Gram(x, inducing_inputs, kernel);
  AddNugget(knm, x, inducing_inputs, jitter_);
  a_ = kmm_llt_.solve(knm.transpose()).transpose();

  pair_rows_.reserve(merged.size());
  for (const auto& p : merged) {
    PairRow row;
    row.winner = row_of.at(p.winner_id);
    row.loser = row_of.at(p.loser_id);
    row.count = static_cast<double>(p.count);
    const double k_ww = kernel.signal_var + jitter_;
    const double k_ll = kernel.signal_var + jitter_;
    double k_wl = Matern32(x.row(row.winner).transpose(),
                           x.row(row.loser).transpose(), kernel);
    if (x.row(row.winner) == x.row(row.loser)) k_wl += jitter_;
    const double q_ww = knm.row(row.winner).dot(a_.row(row.winner));
    const double q_ll = knm.row(row.loser).dot(a_.row(row.loser));
    const double q_wl = knm.row(row.winner).dot(a_.row(row.loser));
    row.cond_var =
        std::max(0.0, (k_ww + k_ll - 2.0 * k_wl) - (q_ww + q_ll - 2.0 * q_wl));
    pair_rows_.push_back(row);
  }
}

VariationalBound::Moments VariationalBound::ExpectedLogLik(double mu,
                                                           double var) const {
  Moments out;
  const double sd = std::sqrt(std::max(var, 0.0));
  const bool tiny = sd < kTinySd;
  for (std::size_t i = 0; i < quad_.nodes.size(); ++i) {
    const double xi = quad_.nodes[i];
    const double w = quad_.weights[i];
    const double z = (mu + sd * xi) / scale_;
    const double lambda = InverseMillsRatio(z);
    out.ell += w * LogNormalCdf(z);
    out.d_mean += w * lambda / scale_;
    if (tiny) {
      // 0.5 * d2/dmu2 log Phi(mu / s).
      out.d_var += w * -0.5 * lambda * (z + lambda) / (scale_ * scale_);
    } else {
      out.d_var += w * lambda / scale_ * xi / (2.0 * sd);
    }
  }
  return out;
}

double VariationalBound::Kl(const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) const {
  const auto cov_llt = FactorPd(cov, "variational covariance");
  const double logdet_cov =
      2.0 * cov_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet_k =
      2.0 * kmm_llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double trace = (kmm_inv_.cwiseProduct(cov)).sum();
  const double quad = mean.dot(kmm_inv_ * mean);
  return 0.5 * (trace + quad - static_cast<double>(mean.size()) + logdet_k -
                logdet_cov);
}

double VariationalBound::Evaluate(const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& cov) const {
  const auto cov_llt = FactorPd(cov, "variational covariance");
  // Row n of c holds L_S^T a_n, so d S d^T = ||c_w - c_l||^2.
  const Eigen::MatrixXd c = a_ * cov_llt.matrixL().toDenseMatrix();
  const Eigen::VectorXd mu_doc = a_ * mean;
  double ell = 0.0;
  for (const auto& p : pair_rows_) {
    const double mu = mu_doc[p.winner] - mu_doc[p.loser];
    const double var = (c.row(p.winner) - c.row(p.loser)).squaredNorm() +
                       p.cond_var;
    ell += p.count * ExpectedLogLik(mu, var).ell;
  }
  return ell - Kl(mean, cov);
}

Eigen::VectorXd VariationalBound::GradientMean(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) const {
  Eigen::VectorXd grad = -kmm_inv_ * mean;
  for (const auto& p : pair_rows_) {
    const Eigen::RowVectorXd d = Diff(p);
    const double mu = d.dot(mean);
    const double var = d * cov * d.transpose() + p.cond_var;
    grad += p.count * ExpectedLogLik(mu, var).d_mean * d.transpose();
  }
  return grad;
}

Eigen::MatrixXd VariationalBound::GradientCov(
    const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) const {
  const auto cov_llt = FactorPd(cov, "variational covariance");
  const Eigen::MatrixXd cov_inv =
      cov_llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  Eigen::MatrixXd grad = 0.5 * (Symmetrize(cov_inv) - kmm_inv_);
  for (const auto& p : pair_rows_) {
    const Eigen::RowVectorXd d = Diff(p);
    const double mu = d.dot(mean);
    const double var = d * cov * d.transpose() + p.cond_var;
    grad += p.count * ExpectedLogLik(mu, var).d_var * d.transpose() * d;
  }
  return grad;
}

namespace {

// One natural-gradient update in precision form. `batch` indexes `rows`;
// sums are rescaled by |rows| / |batch|. The mean must be consistent with
// `state` and is refreshed on return along with the factor of the precision.
template <typename RowFn, typename MomentFn>
void NaturalUpdate(const std::vector<std::size_t>& batch, double step,
                   std::size_t n_rows, const Eigen::MatrixXd& kmm_inv,
                   RowFn&& row_of, MomentFn&& moments,
                   const Eigen::LLT<Eigen::MatrixXd>& precision_llt,
                   const Eigen::VectorXd& mean, NaturalState& state) {
  const Eigen::Index m = kmm_inv.rows();
  const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
  const double rescale =
      static_cast<double>(n_rows) / static_cast<double>(batch.size());

  Eigen::MatrixXd d(b, m);
  Eigen::VectorXd counts(b), cond(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto [row, count, cond_var] = row_of(batch[i]);
    d.row(i) = row;
    counts[i] = count;
    cond[i] = cond_var;
  }
  // Columns of solved are L^-1 d^T, so d S d^T = ||column||^2 with S = P^-1.
  const Eigen::MatrixXd solved =
      precision_llt.matrixL().solve(d.transpose());
  const Eigen::VectorXd mu = d * mean;

  Eigen::VectorXd w_var(b);
  Eigen::VectorXd shift_grad = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < b; ++i) {
    const double var = solved.col(i).squaredNorm() + cond[i];
    const auto mom = moments(mu[i], var);
    const double w = counts[i] * rescale;
    w_var[i] = w * mom.d_var;
    shift_grad += w * (mom.d_mean - 2.0 * mom.d_var * mu[i]) *
                  d.row(i).transpose();
  }
  // -2 * sum w g_v d d^T is positive semi-definite (g_v <= 0).
  const Eigen::MatrixXd curvature =
      -2.0 * d.transpose() * w_var.asDiagonal() * d;
  state.precision = Symmetrize((1.0 - step) * state.precision +
                               step * (kmm_inv + curvature));
  state.shift = (1.0 - step) * state.shift + step * shift_grad;
}

}  // namespace

void VariationalBound::NaturalStep(const std::vector<std::size_t>& batch,
                                   double step, Eigen::VectorXd& mean,
                                   Eigen::MatrixXd& cov) const {
  const auto cov_llt = FactorPd(cov, "variational covariance");
  NaturalState state;
  state.precision = Symmetrize(cov_llt.solve(
      Eigen::MatrixXd::Identity(cov.rows(), cov.cols())));
  state.shift = state.precision * mean;
  const auto precision_llt = FactorPd(state.precision, "precision");
  NaturalUpdate(
      batch, step, pair_rows_.size(), kmm_inv_,
      [&](std::size_t i) {
        const auto& p = pair_rows_[i];
        return std::make_tuple(Eigen::RowVectorXd(Diff(p)), p.count,
                               p.cond_var);
      },
      [&](double mu, double var) { return ExpectedLogLik(mu, var); },
      precision_llt, mean, state);
  const auto next = FactorPd(state.precision, "precision");
  cov = Symmetrize(
      next.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols())));
  mean = next.solve(state.shift);
}

namespace {

struct FitState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Coordinate pattern search on log signal variance and a global lengthscale
// multiplier, holding q(u) fixed. Accepts only moves that raise the bound.
bool TuneKernel(const FeatureMatrix& features,
                const std::vector<PairLabel>& pairs, const Eigen::MatrixXd& z,
                const GpplConfig& cfg, const FitState& q, Matern32Params& kernel,
                double& bound_value) {
  bool moved = false;
  constexpr double kFactor = 1.1;
  for (int param = 0; param < 2; ++param) {
    for (double f : {kFactor, 1.0 / kFactor}) {
      Matern32Params trial = kernel;
      if (param == 0) {
        trial.signal_var *= f;
      } else {
        trial.lengthscales *= f;
      }
      double value;
      try {
        VariationalBound candidate(features, pairs, z, trial, cfg.sigma2,
                                   cfg.quadrature_points);
        value = candidate.Evaluate(q.mean, q.cov);
      } catch (const Error&) {
        continue;
      }
      if (value > bound_value) {
        kernel = trial;
        bound_value = value;
        moved = true;
        break;
      }
    }
  }
  return moved;
}

}  // namespace

GpplPosterior FitGppl(const FeatureMatrix& features,
                      const std::vector<PairLabel>& pairs,
                      const GpplConfig& cfg) {
  cfg.Validate();
  if (pairs.empty()) {
    throw ValidationError("gppl", "cannot fit GPPL without pairwise labels");
  }
  const auto merged = MergePairs(pairs);
  RequireFeatureCoverage(merged, features);
  const auto ids = PairDocIds(merged);
  const Eigen::MatrixXd x = features.Select(ids).rows();

  Matern32Params kernel = ResolveKernel(features, merged, cfg);
  const int m = std::min<int>(cfg.n_inducing, static_cast<int>(ids.size()));
  const Eigen::MatrixXd z =
      m == static_cast<int>(ids.size())
          ? x
          : KMeansCenters(x, m, DeriveSeed(cfg.seed, "gppl/inducing"));

  auto bound = std::make_unique<VariationalBound>(
      features, merged, z, kernel, cfg.sigma2, cfg.quadrature_points);
  const std::size_t n_rows = bound->num_pairs();
  const bool full_batch = static_cast<std::size_t>(cfg.batch_size) >= n_rows;
  const int check_every =
      full_batch ? 1
                 : static_cast<int>((n_rows + cfg.batch_size - 1) /
                                    cfg.batch_size);

  FitState q{Eigen::VectorXd::Zero(z.rows()), bound->kmm()};
  GpplPosterior post;
  double previous = bound->Evaluate(q.mean, q.cov);
  post.bound_trace.push_back(previous);

  Rng rng(DeriveSeed(cfg.seed, "gppl/svi"));
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = n_rows;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    std::vector<std::size_t> batch;
    if (full_batch) {
      batch = order;
    } else {
      batch.reserve(cfg.batch_size);
      while (static_cast<int>(batch.size()) < cfg.batch_size) {
        if (cursor == n_rows) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        batch.push_back(order[cursor++]);
      }
    }
    bound->NaturalStep(batch, cfg.step_size, q.mean, q.cov);
    post.iterations = iter;
    if (!q.mean.allFinite()) {
      throw Error("gppl", "variational mean became non-finite at iteration " +
                              std::to_string(iter));
    }

    if (cfg.optimize_hyperparameters && iter % cfg.hyper_every == 0) {
      double value = bound->Evaluate(q.mean, q.cov);
      if (TuneKernel(features, merged, z, cfg, q, kernel, value)) {
        bound = std::make_unique<VariationalBound>(
            features, merged, z, kernel, cfg.sigma2, cfg.quadrature_points);
        previous = value;
        post.bound_trace.push_back(value);
        continue;
      }
    }

    if (iter % check_every == 0) {
      const double current = bound->Evaluate(q.mean, q.cov);
      post.bound_trace.push_back(current);
      const double rel = std::abs(current - previous) /
                         std::max(std::abs(previous), 1e-12);
      previous = current;
      if (rel < cfg.tol) {
        post.converged = true;
        break;
      }
    }
  }

  post.inducing_inputs = z;
  post.mean = q.mean;
  post.cov = q.cov;
  post.kernel = kernel;
  post.sigma2 = cfg.sigma2;
  post.jitter = bound->jitter();
  return post;
}

UtilityPrediction PredictGppl(const GpplPosterior& posterior,
                              const FeatureMatrix& features) {
  if (features.dim() != posterior.dim()) {
    throw ValidationError("gppl", "feature dim " +
                                      std::to_string(features.dim()) +
                                      " does not match model dim " +
                                      std::to_string(posterior.dim()));
  }
  const auto& z = posterior.inducing_inputs;
  Eigen::MatrixXd kmm = Matern32Gram(z, z, posterior.kernel);
  kmm.diagonal().array() += posterior.jitter;
  const auto kmm_llt = FactorPd(kmm, "inducing kernel matrix");
  Eigen::MatrixXd ksm = Matern32Gram(features.rows(), z, posterior.kernel);
  AddNugget(ksm, features.rows(), z, posterior.jitter);
  const Eigen::MatrixXd a = kmm_llt.solve(ksm.transpose()).transpose();
  const Eigen::VectorXd mean = a * posterior.mean;
  const Eigen::VectorXd explained = a.cwiseProduct(ksm).rowwise().sum();
  const Eigen::VectorXd spread = (a * posterior.cov).cwiseProduct(a).rowwise().sum();

  UtilityPrediction out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double var =
        posterior.kernel.signal_var + posterior.jitter - explained[i] + spread[i];
    out.entries[features.doc_ids()[i]] = {mean[i], std::max(var, 0.0)};
  }
  return out;
}

void WriteGppl(std::ostream& out, const GpplPosterior& posterior) {
  BinaryWriter w(out);
  w.WriteHeader(kGpplMagic, kGpplVersion);
  w.WriteMatrix(posterior.inducing_inputs);
  w.WriteVector(posterior.mean);
  w.WriteMatrix(posterior.cov);
  w.WriteF64(posterior.kernel.signal_var);
  w.WriteVector(posterior.kernel.lengthscales);
  w.WriteF64(posterior.sigma2);
  w.WriteF64(posterior.jitter);
  w.WriteI64(posterior.iterations);
  w.WriteBool(posterior.converged);
  w.WriteVector(Eigen::Map<const Eigen::VectorXd>(
      posterior.bound_trace.data(),
      static_cast<Eigen::Index>(posterior.bound_trace.size())));
}

GpplPosterior ReadGppl(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.ReadHeader(kGpplMagic, kGpplVersion);
  GpplPosterior post;
  post.inducing_inputs = r.ReadMatrix();
  post.mean = r.ReadVector();
  post.cov = r.ReadMatrix();
  post.kernel.signal_var = r.ReadF64();
  post.kernel.lengthscales = r.ReadVector();
  post.sigma2 = r.ReadF64();
  post.jitter = r.ReadF64();
  post.iterations = static_cast<int>(r.ReadI64());
  post.converged = r.ReadBool();
  const Eigen::VectorXd trace = r.ReadVector();
  post.bound_trace.assign(trace.data(), trace.data() + trace.size());
  const Eigen::Index m = post.inducing_inputs.rows();
  if (post.mean.size() != m || post.cov.rows() != m || post.cov.cols() != m) {
    throw Error("io", source + ": inconsistent GPPL posterior shapes");
  }
  return post;
}

void SaveGppl(const std::string& path, const GpplPosterior& posterior) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("gppl", "cannot write '" + path + "'");
  WriteGppl(out, posterior);
  if (!out) throw Error("gppl", "write failed for '" + path + "'");
}

GpplPosterior LoadGppl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("gppl", "cannot open '" + path + "'");
  return ReadGppl(in, path);
}

}  // namespace prefrank
