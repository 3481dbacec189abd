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
#include <filesystem>
#include <random>

#include "Eigen/Eigenvalues"
#include "doctest.h"
#include "oracles.h"
#include "prefrank/corpus.h"
#include "prefrank/eval.h"
#include "prefrank/gppl.h"

namespace prefrank {
namespace {

FeatureMatrix UniformFeatures(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<DocId> ids;
  for (int i = 0; i < n; ++i) ids.push_back("d" + std::to_string(100 + i));
  return FeatureMatrix(ids, Eigen::MatrixXd::NullaryExpr(n, dim, [&] { return u(rng); }));
}

std::vector<PairLabel> RandomPairs(const FeatureMatrix& fm, int n,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, fm.size() - 1);
  std::vector<PairLabel> pairs;
  while (static_cast<int>(pairs.size()) < n) {
    const auto a = pick(rng), b = pick(rng);
    if (a != b) pairs.push_back({fm.doc_ids()[a], fm.doc_ids()[b], 1});
  }
  return pairs;
}

GpplConfig FullBatch(std::uint64_t seed = 0) {
  GpplConfig cfg;
  cfg.batch_size = 100000;
  cfg.max_iters = 2000;
  cfg.tol = 1e-10;
  cfg.step_size = 0.5;
  cfg.seed = seed;
  return cfg;
}

double Gap(const GpplPosterior& post, const FeatureMatrix& fm, const DocId& a,
           const DocId& b) {
  const auto p = PredictGppl(post, fm);
  return p.entries.at(a).mean - p.entries.at(b).mean;
}

TEST_CASE("a single preference orders the pair") {
  const auto fm = UniformFeatures(2, 2, 1);
  const auto& ids = fm.doc_ids();
  const auto post = FitGppl(fm, {{ids[0], ids[1], 1}}, GpplConfig{});
  CHECK(Gap(post, fm, ids[0], ids[1]) > 0.0);
}

TEST_CASE("exhaustive noise-free pairs recover a monotone utility") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fm = UniformFeatures(30, 2, 10 + seed);
    std::vector<PairLabel> pairs;
    ScoreVector truth;
    for (std::size_t i = 0; i < fm.size(); ++i) {
      truth.entries[fm.doc_ids()[i]] = fm.rows()(i, 0);
      for (std::size_t j = 0; j < fm.size(); ++j) {
        if (fm.rows()(i, 0) > fm.rows()(j, 0))
          pairs.push_back({fm.doc_ids()[i], fm.doc_ids()[j], 1});
      }
    }
    GpplConfig cfg;
    cfg.seed = seed;
    cfg.sigma2 = 0.05;
    const auto pred = PredictGppl(FitGppl(fm, pairs, cfg), fm).Means();
    CHECK(Spearman(pred, truth) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("doubling every count does not shrink the utility gap") {
  const auto fm = UniformFeatures(6, 2, 3);
  const auto& ids = fm.doc_ids();
  std::vector<PairLabel> pairs = {{ids[0], ids[1], 1}, {ids[1], ids[2], 1},
                                  {ids[3], ids[4], 1}, {ids[5], ids[0], 1}};
  auto doubled = pairs;
  for (auto& p : doubled) p.count *= 2;
  const double single = Gap(FitGppl(fm, pairs, FullBatch()), fm, ids[0], ids[1]);
  const double twice = Gap(FitGppl(fm, doubled, FullBatch()), fm, ids[0], ids[1]);
  CHECK(std::abs(twice) >= std::abs(single) - 1e-9);
}

TEST_CASE("prediction at an inducing input returns the variational mean") {
  const auto fm = UniformFeatures(40, 2, 4);
  GpplConfig cfg;
  cfg.n_inducing = 10;
  const auto post = FitGppl(fm, RandomPairs(fm, 80, 5), cfg);
  REQUIRE(post.inducing_inputs.rows() == 10);
  std::vector<DocId> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("z" + std::to_string(i));
  const auto pred = PredictGppl(post, FeatureMatrix(ids, post.inducing_inputs));
  for (int i = 0; i < 10; ++i)
    CHECK(std::abs(pred.entries.at(ids[i]).mean - post.mean[i]) < 1e-6);
}

TEST_CASE("far from the data the prediction reverts to the prior") {
  const auto fm = UniformFeatures(20, 2, 6);
  GpplConfig cfg;
  cfg.signal_var = 1.7;
  const auto post = FitGppl(fm, RandomPairs(fm, 40, 7), cfg);
  const double ls = post.kernel.lengthscales.maxCoeff();
  const FeatureMatrix far({"far"}, Eigen::RowVector2d(30.0 * ls + 2.0, 0.0));
  const auto p = PredictGppl(post, far).entries.at("far");
  CHECK(std::abs(p.mean) < 1e-3);
  CHECK(std::abs(p.variance - 1.7) < 1e-3);
}

TEST_CASE("posterior covariance is symmetric and PSD with finite mean") {
  const auto fm = UniformFeatures(25, 3, 8);
  const auto post = FitGppl(fm, RandomPairs(fm, 60, 9), GpplConfig{});
  CHECK(post.mean.allFinite());
  CHECK((post.cov - post.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(post.cov);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  for (const auto& [id, e] : PredictGppl(post, fm).entries) CHECK(e.variance >= 0.0);
}

TEST_CASE("reversing every label negates the posterior means") {
  const auto fm = UniformFeatures(12, 2, 10);
  const auto pairs = RandomPairs(fm, 30, 11);
  auto flipped = pairs;
  for (auto& p : flipped) std::swap(p.winner_id, p.loser_id);
  GpplConfig cfg = FullBatch();
  cfg.lengthscales = Eigen::VectorXd::Constant(1, 0.8);
  const auto a = PredictGppl(FitGppl(fm, pairs, cfg), fm);
  const auto b = PredictGppl(FitGppl(fm, flipped, cfg), fm);
  for (const auto& [id, e] : a.entries)
    CHECK(std::abs(e.mean + b.entries.at(id).mean) < 1e-6);
}

TEST_CASE("an extra consistent label never lowers the gap") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const auto fm = UniformFeatures(8, 2, 100 + trial);
    auto pairs = RandomPairs(fm, 12, 200 + trial);
    const DocId a = pairs[0].winner_id, b = pairs[0].loser_id;
    GpplConfig cfg = FullBatch(trial);
    cfg.lengthscales = Eigen::VectorXd::Constant(1, 0.7);
    const double before = Gap(FitGppl(fm, pairs, cfg), fm, a, b);
    pairs.push_back({a, b, 1});
    const double after = Gap(FitGppl(fm, pairs, cfg), fm, a, b);
    CHECK(after >= before - 1e-9);
  }
}

TEST_CASE("the full-batch bound does not decrease") {
  const auto fm = UniformFeatures(30, 2, 12);
  const auto post = FitGppl(fm, RandomPairs(fm, 90, 13), FullBatch());
  CHECK(post.converged);
  for (std::size_t i = 1; i < post.bound_trace.size(); ++i) {
    CHECK(post.bound_trace[i] >=
          post.bound_trace[i - 1] - 1e-9 * std::abs(post.bound_trace[i - 1]));
  }
}

TEST_CASE("bound gradients match central differences") {
  const auto fm = UniformFeatures(10, 2, 14);
  const auto pairs = MergePairs(RandomPairs(fm, 25, 15));
  Matern32Params kernel;
  kernel.lengthscales = Eigen::VectorXd::Constant(1, 0.6);
  const Eigen::MatrixXd z = fm.rows().topRows(6);
  const VariationalBound bound(fm, pairs, z, kernel, 0.8, 40);

  std::mt19937_64 rng(16);
  std::normal_distribution<double> g(0.0, 0.5);
  const Eigen::VectorXd mean = Eigen::VectorXd::NullaryExpr(6, [&] { return g(rng); });
  const Eigen::MatrixXd l = Eigen::MatrixXd::NullaryExpr(6, 6, [&] { return 0.3 * g(rng); });
  const Eigen::MatrixXd cov = l * l.transpose() + 0.2 * Eigen::MatrixXd::Identity(6, 6);

  const Eigen::VectorXd analytic_mean = bound.GradientMean(mean, cov);
  const Eigen::VectorXd fd_mean = oracle::CentralDifference(
      [&](const Eigen::VectorXd& m) { return bound.Evaluate(m, cov); }, mean, 1e-5);
  CHECK(oracle::RelativeError(analytic_mean, fd_mean) < 1e-4);

  const Eigen::MatrixXd g_cov = bound.GradientCov(mean, cov);
  CHECK((g_cov - g_cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::VectorXd analytic_cov(21), fd_cov(21);
  int k = 0;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      Eigen::MatrixXd e = Eigen::MatrixXd::Zero(6, 6);
      e(i, j) += 1.0;
      if (i != j) e(j, i) += 1.0;
      const double h = 1e-5;
      fd_cov[k] = (bound.Evaluate(mean, cov + h * e) - bound.Evaluate(mean, cov - h * e)) /
                  (2 * h);
      analytic_cov[k] = (g_cov.cwiseProduct(e)).sum();
    }
  }
  CHECK(oracle::RelativeError(analytic_cov, fd_cov) < 1e-4);
}

TEST_CASE("sparse and exact posteriors rank documents alike") {
  const auto fm = UniformFeatures(30, 2, 17);
  const auto pairs = RandomPairs(fm, 120, 18);
  GpplConfig cfg;
  cfg.n_inducing = 20;
  const auto sparse = PredictGppl(FitGppl(fm, pairs, cfg), fm).Means();
  const auto exact = FitExactReference(fm, pairs, cfg).Means();
  CHECK(Spearman(sparse, exact) >= 0.95);
}

TEST_CASE("exact reference: symmetry, guards and ordering") {
  const auto fm = UniformFeatures(3, 2, 19);
  const auto& ids = fm.doc_ids();
  const auto sym = FitExactReference(fm, {{ids[0], ids[1], 3}, {ids[1], ids[0], 3}},
                                     GpplConfig{});
  CHECK(std::abs(sym.entries.at(ids[0]).mean - sym.entries.at(ids[1]).mean) < 1e-6);

  const auto one = FitExactReference(fm, {{ids[0], ids[1], 1}}, GpplConfig{});
  CHECK(one.entries.at(ids[0]).mean > one.entries.at(ids[1]).mean);

  CHECK_THROWS_AS(FitExactReference(fm, {}, GpplConfig{}), ValidationError);
  const auto big = UniformFeatures(205, 1, 20);
  CHECK_THROWS_AS(FitExactReference(big, RandomPairs(big, 600, 21), GpplConfig{}),
                  ValidationError);
}

TEST_CASE("fit rejects bad inputs") {
  const auto fm = UniformFeatures(5, 2, 22);
  CHECK_THROWS_AS(FitGppl(fm, {}, GpplConfig{}), ValidationError);
  CHECK_THROWS_AS(FitGppl(fm, {{"d100", "ghost", 1}}, GpplConfig{}), ValidationError);
  GpplConfig bad;
  bad.sigma2 = 0.0;
  CHECK_THROWS_AS(FitGppl(fm, {{"d100", "d101", 1}}, bad), ValidationError);
  const auto post = FitGppl(fm, {{"d100", "d101", 1}}, GpplConfig{});
  CHECK_THROWS_AS(PredictGppl(post, UniformFeatures(3, 4, 1)), ValidationError);
}

TEST_CASE("fits are deterministic and survive serialization") {
  const auto fm = UniformFeatures(60, 2, 23);
  const auto pairs = RandomPairs(fm, 300, 24);
  GpplConfig cfg;
  cfg.n_inducing = 15;
  cfg.batch_size = 50;
  cfg.max_iters = 100;
  cfg.seed = 99;
  const auto a = FitGppl(fm, pairs, cfg);
  const auto b = FitGppl(fm, pairs, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.cov == b.cov);

  const auto path = std::filesystem::temp_directory_path() / "prefrank_gppl_test.gppl";
  SaveGppl(path.string(), a);
  const auto back = LoadGppl(path.string());
  CHECK(back.mean == a.mean);
  CHECK(back.cov == a.cov);
  CHECK(back.inducing_inputs == a.inducing_inputs);
  CHECK(back.bound_trace == a.bound_trace);
  const auto pa = PredictGppl(a, fm), pb = PredictGppl(back, fm);
  for (const auto& [id, e] : pa.entries) CHECK(e.mean == pb.entries.at(id).mean);
}

TEST_CASE("hyperparameter search does not lower the bound") {
  const auto fm = UniformFeatures(30, 2, 25);
  const auto pairs = RandomPairs(fm, 100, 26);
  GpplConfig cfg = FullBatch();
  cfg.max_iters = 200;
  cfg.optimize_hyperparameters = true;
  const auto tuned = FitGppl(fm, pairs, cfg);
  cfg.optimize_hyperparameters = false;
  const auto plain = FitGppl(fm, pairs, cfg);
  CHECK(tuned.bound_trace.back() >= plain.bound_trace.back() - 1e-6);
}

TEST_CASE("k-means returns at most k distinct centers") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 0, 0, 1, 1, 1;
  const auto c = KMeansCenters(x, 4, 1);
  CHECK(c.rows() <= 2);
  const auto fm = UniformFeatures(50, 2, 27);
  CHECK(KMeansCenters(fm.rows(), 7, 2).rows() == 7);
}

}  // namespace
}  // namespace prefrank
