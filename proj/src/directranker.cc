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

#include "prefrank/directranker.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "prefrank/binary_io.h"
#include "prefrank/eval.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

constexpr char kRankerMagic[] = "PRFKDRNK";
constexpr std::uint32_t kRankerVersion = 1;

void StandardizationStats(const Eigen::MatrixXd& x, bool enabled,
                          Eigen::RowVectorXd& mean, Eigen::RowVectorXd& scale) {
  if (!enabled || x.rows() < 2) {
    mean = Eigen::RowVectorXd::Zero(x.cols());
    scale = Eigen::RowVectorXd::Ones(x.cols());
    return;
  }
  mean = x.colwise().mean();
  const Eigen::RowVectorXd sd =
      ((x.rowwise() - mean).array().square().colwise().mean()).sqrt();
  scale = sd.unaryExpr([](double s) { return s > 1e-12 ? 1.0 / s : 1.0; });
}

Eigen::MatrixXd Standardize(const Eigen::MatrixXd& x,
                            const Eigen::RowVectorXd& mean,
                            const Eigen::RowVectorXd& scale) {
  return (x.rowwise() - mean).array().rowwise() * scale.array();
}

struct Adam {
  explicit Adam(std::size_t n, double lr) : m(n, 0.0), v(n, 0.0), lr(lr) {}

  void Step(std::vector<double>& params, const std::vector<double>& grads) {
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, t);
    const double c2 = 1.0 - std::pow(kBeta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * grads[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<double> m;
  std::vector<double> v;
  double lr;
  int t = 0;
};

}  // namespace

void RankerConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw ValidationError("directranker", "invalid config: " + what);
  };
  if (hidden_dims.empty()) fail("hidden_dims must not be empty");
  for (int d : hidden_dims)
    if (d < 1) fail("hidden dims must be positive");
  for (int d : focus_hidden_dims)
    if (d < 1) fail("focus hidden dims must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (pairs_per_epoch && *pairs_per_epoch < 1)
    fail("pairs_per_epoch must be positive");
  if (batch_size < 1) fail("batch_size must be positive");
  if (max_epochs < 1) fail("max_epochs must be positive");
  if (patience < 1) fail("patience must be positive");
}

RankerModel RankerModel::Init(int input_dim, int focus_dim,
                              const RankerConfig& cfg) {
  cfg.Validate();
  RankerModel model;
  model.config = cfg;
  Rng rng(DeriveSeed(cfg.seed, "directranker/init"));
  model.feature_net =
      FeatureNet(input_dim, cfg.hidden_dims, cfg.batch_norm, cfg.dropout, rng);
  int out_dim = model.feature_net.output_dim();
  if (focus_dim > 0) {
    const auto& dims =
        cfg.focus_hidden_dims.empty() ? cfg.hidden_dims : cfg.focus_hidden_dims;
    model.focus_net.emplace(focus_dim, dims, cfg.batch_norm, cfg.dropout, rng);
    out_dim += model.focus_net->output_dim();
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(out_dim));
  std::uniform_real_distribution<double> init(-bound, bound);
  model.output_weight =
      Eigen::VectorXd::NullaryExpr(out_dim, [&]() { return init(rng); });
  model.input_mean = Eigen::RowVectorXd::Zero(input_dim);
  model.input_scale = Eigen::RowVectorXd::Ones(input_dim);
  model.focus_mean = Eigen::RowVectorXd::Zero(focus_dim);
  model.focus_scale = Eigen::RowVectorXd::Ones(focus_dim);
  return model;
}

Eigen::MatrixXd RankerModel::Utilities(const Eigen::MatrixXd& features,
                                       const Eigen::MatrixXd* focus) const {
  if (features.cols() != input_dim()) {
    throw ValidationError("directranker",
                          "feature dim " + std::to_string(features.cols()) +
                              " does not match model dim " +
                              std::to_string(input_dim()));
  }
  if ((focus != nullptr) != has_focus()) {
    throw ValidationError("directranker",
                          has_focus() ? "model needs focus-word features"
                                      : "model has no focus-word network");
  }
  const Eigen::MatrixXd u =
      feature_net.Infer(Standardize(features, input_mean, input_scale));
  if (!focus) return u;
  if (focus->cols() != focus_dim() || focus->rows() != features.rows()) {
    throw ValidationError("directranker", "focus feature shape mismatch");
  }
  const Eigen::MatrixXd uf =
      focus_net->Infer(Standardize(*focus, focus_mean, focus_scale));
  Eigen::MatrixXd out(u.rows(), u.cols() + uf.cols());
  out << u, uf;
  return out;
}

std::size_t RankerModel::ParamCount() const {
  return feature_net.ParamCount() + (focus_net ? focus_net->ParamCount() : 0) +
         static_cast<std::size_t>(output_weight.size());
}

std::vector<double> RankerModel::Flatten() const {
  std::vector<double> out;
  out.reserve(ParamCount());
  feature_net.Flatten(out);
  if (focus_net) focus_net->Flatten(out);
  out.insert(out.end(), output_weight.data(),
             output_weight.data() + output_weight.size());
  return out;
}

void RankerModel::Unflatten(const std::vector<double>& params) {
  if (params.size() != ParamCount()) {
    throw ValidationError("directranker", "parameter vector size mismatch");
  }
  std::size_t offset = feature_net.Unflatten(params, 0);
  if (focus_net) offset = focus_net->Unflatten(params, offset);
  std::copy(params.begin() + offset, params.end(), output_weight.data());
}

double RankingOutput(const Eigen::VectorXd& w, const Eigen::VectorXd& u1,
                     const Eigen::VectorXd& u2) {
  return std::tanh(w.dot((u1 - u2) / 2.0));
}

double ForwardPair(const RankerModel& model, const Eigen::VectorXd& f1,
                   const Eigen::VectorXd& f2, const Eigen::VectorXd* focus1,
                   const Eigen::VectorXd* focus2) {
  if ((focus1 != nullptr) != (focus2 != nullptr)) {
    throw ValidationError("directranker",
                          "focus vectors must be given for both documents");
  }
  if (f1.size() != f2.size()) {
    throw ValidationError("directranker", "pair feature dims differ");
  }
  Eigen::MatrixXd x(2, f1.size());
  x.row(0) = f1.transpose();
  x.row(1) = f2.transpose();
  Eigen::MatrixXd fx;
  if (focus1) {
    if (focus1->size() != focus2->size()) {
      throw ValidationError("directranker", "pair focus dims differ");
    }
    fx.resize(2, focus1->size());
    fx.row(0) = focus1->transpose();
    fx.row(1) = focus2->transpose();
  }
  const Eigen::MatrixXd u = model.Utilities(x, focus1 ? &fx : nullptr);
  return RankingOutput(model.output_weight, u.row(0).transpose(),
                       u.row(1).transpose());
}

double RankLoss(double label, double o1) {
  const double r = label - o1;
  return r * r;
}

std::vector<TrainPair> GenerateTrainingPairs(const ScoreVector& scores, int n,
                                             std::uint64_t seed) {
  if (n < 1) throw ValidationError("directranker", "pair count must be >= 1");
  std::vector<std::pair<DocId, double>> docs(scores.entries.begin(),
                                             scores.entries.end());
  const bool has_distinct =
      docs.size() >= 2 &&
      std::any_of(docs.begin(), docs.end(), [&](const auto& d) {
        return d.second != docs.front().second;
      });
  if (!has_distinct) {
    throw ValidationError("directranker",
                          "need at least two documents with distinct scores");
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, docs.size() - 1);
  std::vector<TrainPair> out;
  out.reserve(n);
  while (static_cast<int>(out.size()) < n) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    if (i == j || docs[i].second == docs[j].second) continue;
    out.push_back({docs[i].first, docs[j].first,
                   docs[i].second > docs[j].second ? 1.0 : -1.0});
  }
  return out;
}

double PairBatchLoss(RankerModel& model, const Eigen::MatrixXd& x1,
                     const Eigen::MatrixXd& x2, const Eigen::MatrixXd* focus1,
                     const Eigen::MatrixXd* focus2,
                     const Eigen::VectorXd& labels, Mode mode, Rng* rng,
                     std::vector<double>* grads, bool update_stats) {
  const Eigen::Index b = x1.rows();
  if (x2.rows() != b || labels.size() != b || b == 0) {
    throw ValidationError("directranker", "inconsistent pair batch");
  }
  if ((focus1 != nullptr) != model.has_focus() ||
      (focus2 != nullptr) != model.has_focus()) {
    throw ValidationError("directranker", "focus inputs do not match model");
  }
  Eigen::MatrixXd x(2 * b, x1.cols());
  x << x1, x2;
  Eigen::MatrixXd fx;
  if (focus1) {
    fx.resize(2 * b, focus1->cols());
    fx << *focus1, *focus2;
  }

  FeatureNet::Cache cache, focus_cache;
  Eigen::MatrixXd u, uf;
  if (mode == Mode::kTrain) {
    u = model.feature_net.Forward(x, Mode::kTrain, rng, &cache, update_stats);
    if (focus1) {
      uf = model.focus_net->Forward(fx, Mode::kTrain, rng, &focus_cache,
                                    update_stats);
    }
  } else {
    if (grads) {
      throw ValidationError("directranker",
                            "gradients need a training-mode pass");
    }
    u = model.feature_net.Infer(x);
    if (focus1) uf = model.focus_net->Infer(fx);
  }
  Eigen::MatrixXd v(2 * b, u.cols() + uf.cols());
  if (focus1) {
    v << u, uf;
  } else {
    v = u;
  }
  const Eigen::MatrixXd diff = v.topRows(b) - v.bottomRows(b);
  const Eigen::VectorXd o =
      (0.5 * (diff * model.output_weight)).array().tanh().matrix();
  const Eigen::VectorXd resid = labels - o;
  const double loss = resid.squaredNorm() / static_cast<double>(b);
  if (!grads) return loss;

  // dL/ds with s = w . diff / 2.
  const Eigen::VectorXd ds = (-2.0 / static_cast<double>(b)) *
                             resid.cwiseProduct(
                                 (1.0 - o.array().square()).matrix());
  const Eigen::VectorXd d_out = 0.5 * diff.transpose() * ds;
  const Eigen::MatrixXd d_diff = 0.5 * ds * model.output_weight.transpose();
  Eigen::MatrixXd dv(2 * b, v.cols());
  dv << d_diff, -d_diff;

  grads->clear();
  grads->reserve(model.ParamCount());
  const Eigen::Index width = u.cols();
  model.feature_net.Backward(cache, dv.leftCols(width), *grads);
  if (focus1) {
    model.focus_net->Backward(focus_cache, dv.rightCols(v.cols() - width),
                              *grads);
  }
  grads->insert(grads->end(), d_out.data(), d_out.data() + d_out.size());
  return loss;
}

RankerModel TrainRanker(const FeatureMatrix& features,
                        const ScoreVector& bws_scores, const RankerConfig& cfg,
                        const std::optional<RankerValidation>& validation) {
  cfg.Validate();
  const auto ids = bws_scores.ids();
  for (const auto& id : ids) {
    if (!features.Contains(id)) {
      throw ValidationError("directranker",
                            "no feature row for scored id '" + id + "'");
    }
  }
  const FeatureMatrix train = features.Select(ids);
  RankerModel model = RankerModel::Init(
      static_cast<int>(train.dim()), static_cast<int>(train.focus_dim()), cfg);
  StandardizationStats(train.rows(), cfg.standardize_inputs, model.input_mean,
                       model.input_scale);
  const Eigen::MatrixXd xs =
      Standardize(train.rows(), model.input_mean, model.input_scale);
  Eigen::MatrixXd fs;
  if (train.has_focus()) {
    StandardizationStats(*train.focus_rows(), cfg.standardize_inputs,
                         model.focus_mean, model.focus_scale);
    fs = Standardize(*train.focus_rows(), model.focus_mean, model.focus_scale);
  }
  std::unordered_map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ids.size(); ++i)
    row_of.emplace(ids[i], static_cast<Eigen::Index>(i));

  std::optional<FeatureMatrix> val_features;
  if (validation) {
    val_features = validation->features.Select(validation->gold.ids());
  }

  const int n_pairs =
      cfg.pairs_per_epoch.value_or(10 * static_cast<int>(ids.size()));
  Adam adam(model.ParamCount(), cfg.learning_rate);
  std::vector<double> params = model.Flatten();
  std::vector<double> grads;
  Rng dropout_rng(DeriveSeed(cfg.seed, "directranker/dropout"));

  std::optional<RankerModel> best;
  double best_rho = -std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto pairs = GenerateTrainingPairs(
        bws_scores, n_pairs,
        DeriveSeed(cfg.seed, "directranker/epoch/" + std::to_string(epoch)));
    for (std::size_t start = 0; start < pairs.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(pairs.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::Index b = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x1(b, xs.cols()), x2(b, xs.cols());
      Eigen::MatrixXd f1, f2;
      if (train.has_focus()) {
        f1.resize(b, fs.cols());
        f2.resize(b, fs.cols());
      }
      Eigen::VectorXd labels(b);
      for (Eigen::Index k = 0; k < b; ++k) {
        const auto& p = pairs[start + k];
        const Eigen::Index r1 = row_of.at(p.x1);
        const Eigen::Index r2 = row_of.at(p.x2);
        x1.row(k) = xs.row(r1);
        x2.row(k) = xs.row(r2);
        if (train.has_focus()) {
          f1.row(k) = fs.row(r1);
          f2.row(k) = fs.row(r2);
        }
        labels[k] = p.label;
      }
      const bool focus = train.has_focus();
      const double loss = PairBatchLoss(
          model, x1, x2, focus ? &f1 : nullptr, focus ? &f2 : nullptr, labels,
          Mode::kTrain, &dropout_rng, &grads, /*update_stats=*/true);
      if (!std::isfinite(loss)) {
        throw Error("directranker",
                    "non-finite training loss at epoch " +
                        std::to_string(epoch) + ", batch starting at pair " +
                        std::to_string(start) + " (learning rate " +
                        std::to_string(cfg.learning_rate) + ")");
      }
      adam.Step(params, grads);
      model.Unflatten(params);
    }
    model.epochs_trained = epoch;

    if (validation) {
      double rho = Spearman(PredictScores(model, *val_features),
                            validation->gold);
      if (std::isnan(rho)) rho = -std::numeric_limits<double>::infinity();
      if (rho > best_rho || !best) {
        best_rho = rho;
        model.best_epoch = epoch;
        model.best_validation = rho;
        best = model;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (best) {
    const int trained = model.epochs_trained;
    model = std::move(*best);
    model.epochs_trained = trained;
  } else {
    model.best_epoch = model.epochs_trained;
  }
  return model;
}

ScoreVector PredictScores(const RankerModel& model,
                          const FeatureMatrix& features) {
  const Eigen::MatrixXd* focus = nullptr;
  if (model.has_focus()) {
    if (!features.has_focus()) {
      throw ValidationError("directranker", "model needs focus-word features");
    }
    focus = &*features.focus_rows();
  }
  const Eigen::MatrixXd u = model.Utilities(features.rows(), focus);
  const Eigen::VectorXd s = (u * model.output_weight).array().tanh().matrix();
  ScoreVector out;
  out.provenance = Provenance::kDirectRanker;
  for (std::size_t i = 0; i < features.size(); ++i)
    out.entries.emplace(features.doc_ids()[i], s[i]);
  return out;
}

namespace {
void WriteConfig(BinaryWriter& w, const RankerConfig& cfg) {
  auto sizes = [](const std::vector<int>& v) {
    return std::vector<std::size_t>(v.begin(), v.end());
  };
  w.WriteSizes(sizes(cfg.hidden_dims));
  w.WriteSizes(sizes(cfg.focus_hidden_dims));
  w.WriteF64(cfg.learning_rate);
  w.WriteF64(cfg.dropout);
  w.WriteBool(cfg.batch_norm);
  w.WriteI64(cfg.pairs_per_epoch.value_or(-1));
  w.WriteI64(cfg.batch_size);
  w.WriteI64(cfg.max_epochs);
  w.WriteI64(cfg.patience);
  w.WriteBool(cfg.standardize_inputs);
  w.WriteU64(cfg.seed);
}

RankerConfig ReadConfig(BinaryReader& r) {
  auto ints = [](const std::vector<std::size_t>& v) {
    return std::vector<int>(v.begin(), v.end());
  };
  RankerConfig cfg;
  cfg.hidden_dims = ints(r.ReadSizes());
  cfg.focus_hidden_dims = ints(r.ReadSizes());
  cfg.learning_rate = r.ReadF64();
  cfg.dropout = r.ReadF64();
  cfg.batch_norm = r.ReadBool();
  const std::int64_t ppe = r.ReadI64();
  if (ppe > 0) cfg.pairs_per_epoch = static_cast<int>(ppe);
  cfg.batch_size = static_cast<int>(r.ReadI64());
  cfg.max_epochs = static_cast<int>(r.ReadI64());
  cfg.patience = static_cast<int>(r.ReadI64());
  cfg.standardize_inputs = r.ReadBool();
  cfg.seed = r.ReadU64();
  return cfg;
}
}  // namespace

void WriteRanker(std::ostream& out, const RankerModel& model) {
  BinaryWriter w(out);
  w.WriteHeader(kRankerMagic, kRankerVersion);
  WriteConfig(w, model.config);
  w.WriteVector(model.input_mean.transpose());
  w.WriteVector(model.input_scale.transpose());
  w.WriteVector(model.focus_mean.transpose());
  w.WriteVector(model.focus_scale.transpose());
  model.feature_net.Write(out);
  w.WriteBool(model.has_focus());
  if (model.focus_net) model.focus_net->Write(out);
  w.WriteVector(model.output_weight);
  w.WriteI64(model.epochs_trained);
  w.WriteI64(model.best_epoch);
  w.WriteF64(model.best_validation);
}

RankerModel ReadRanker(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.ReadHeader(kRankerMagic, kRankerVersion);
  RankerModel model;
  model.config = ReadConfig(r);
  model.input_mean = r.ReadVector().transpose();
  model.input_scale = r.ReadVector().transpose();
  model.focus_mean = r.ReadVector().transpose();
  model.focus_scale = r.ReadVector().transpose();
  model.feature_net = FeatureNet::Read(in, source);
  if (r.ReadBool()) model.focus_net = FeatureNet::Read(in, source);
  model.output_weight = r.ReadVector();
  model.epochs_trained = static_cast<int>(r.ReadI64());
  model.best_epoch = static_cast<int>(r.ReadI64());
  model.best_validation = r.ReadF64();
  const int expected = model.feature_net.output_dim() +
                       (model.focus_net ? model.focus_net->output_dim() : 0);
  if (model.output_weight.size() != expected ||
      model.input_mean.size() != model.input_dim()) {
    throw Error("io", source + ": inconsistent DirectRanker shapes");
  }
  return model;
}

void SaveRanker(const std::string& path, const RankerModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("directranker", "cannot write '" + path + "'");
  WriteRanker(out, model);
  if (!out) throw Error("directranker", "write failed for '" + path + "'");
}

RankerModel LoadRanker(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("directranker", "cannot open '" + path + "'");
  return ReadRanker(in, path);
}

}  // namespace prefrank
