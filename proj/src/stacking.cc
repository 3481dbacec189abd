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

#include "prefrank/stacking.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "Eigen/QR"
#include "prefrank/binary_io.h"
#include "prefrank/bws.h"
#include "prefrank/corpus.h"
#include "prefrank/eval.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

constexpr char kStackMagic[] = "PRFKSTCK";
constexpr std::uint32_t kStackVersion = 1;

void WriteStrings(BinaryWriter& w, const std::vector<std::string>& v) {
  w.WriteU64(v.size());
  for (const auto& s : v) w.WriteString(s);
}

std::vector<std::string> ReadStrings(BinaryReader& r) {
  const std::uint64_t n = r.ReadU64();
  std::vector<std::string> out;
  for (std::uint64_t i = 0; i < n; ++i) out.push_back(r.ReadString());
  return out;
}

// Level-0 score columns on `ids`, one column per model.
Eigen::MatrixXd Level0Columns(const std::vector<Level0Model>& models,
                              const std::vector<const FeatureMatrix*>& features,
                              const std::vector<DocId>& ids) {
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(ids.size()),
                       static_cast<Eigen::Index>(models.size()));
  for (std::size_t j = 0; j < models.size(); ++j) {
    const ScoreVector s = ScoreLevel0(models[j], features[j]->Select(ids));
    for (std::size_t i = 0; i < ids.size(); ++i)
      cols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          s.at(ids[i]);
  }
  return cols;
}

void RequireCoverage(const FeatureMatrix& features,
                     const std::vector<DocId>& ids, std::size_t level0) {
  for (const auto& id : ids) {
    if (!features.Contains(id)) {
      throw ValidationError("stacking", "level-0 model " +
                                            std::to_string(level0) +
                                            " has no features for '" + id + "'");
    }
  }
}

// Fractional ranks scaled into [0, 1].
Eigen::VectorXd NormalizedRanks(const Eigen::VectorXd& v) {
  const std::vector<double> ranks =
      FractionalRanks(std::vector<double>(v.data(), v.data() + v.size()));
  Eigen::VectorXd out(v.size());
  const double denom = std::max<double>(1.0, static_cast<double>(v.size()) - 1.0);
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = (ranks[i] - 1.0) / denom;
  return out;
}

}  // namespace

std::string_view ModelKindName(ModelKind kind) {
  return kind == ModelKind::kGppl ? "gppl" : "directranker";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "gppl") return ModelKind::kGppl;
  if (name == "directranker") return ModelKind::kDirectRanker;
  throw ValidationError("stacking",
                        "unknown model kind '" + std::string(name) + "'");
}

void StackConfig::Validate() const {
  if (n_folds < 2) throw ValidationError("stacking", "n_folds must be >= 2");
  if (level0.empty()) {
    throw ValidationError("stacking", "at least one level-0 spec is required");
  }
  for (std::size_t j = 0; j < level0.size(); ++j) {
    if (!level0[j].features) {
      throw ValidationError("stacking", "level-0 spec " + std::to_string(j) +
                                            " has no feature matrix");
    }
    if (level0[j].kind == ModelKind::kGppl) {
      level0[j].gppl.Validate();
    } else {
      level0[j].ranker.Validate();
    }
  }
}

ScoreVector ScoreLevel0(const Level0Model& model, const FeatureMatrix& features) {
  if (const auto* gp = std::get_if<GpplPosterior>(&model)) {
    return PredictGppl(*gp, features).Means();
  }
  return PredictScores(std::get<RankerModel>(model), features);
}

double MetaModel::Apply(const Eigen::VectorXd& level0_scores) const {
  const Eigen::VectorXd z =
      (level0_scores - input_mean).cwiseQuotient(input_scale);
  return intercept + weights.dot(z);
}

Eigen::VectorXd MetaModel::RawWeights() const {
  return weights.cwiseQuotient(input_scale);
}

double MetaModel::RawIntercept() const {
  return intercept - RawWeights().dot(input_mean);
}

MetaModel FitMetaModel(const Eigen::MatrixXd& inputs,
                       const Eigen::VectorXd& target) {
  const Eigen::Index n = inputs.rows();
  const Eigen::Index k = inputs.cols();
  if (n == 0 || n != target.size()) {
    throw ValidationError("stacking", "meta-model needs matching, non-empty "
                                      "inputs and targets");
  }
  MetaModel meta;
  meta.input_mean = inputs.colwise().mean().transpose();
  const Eigen::MatrixXd centered = inputs.rowwise() - meta.input_mean.transpose();
  meta.input_scale =
      (centered.colwise().squaredNorm() / static_cast<double>(n))
          .cwiseSqrt()
          .transpose();
  bool degenerate = false;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (!(meta.input_scale[j] > 1e-12 * std::max(1.0, std::abs(meta.input_mean[j])))) {
      meta.input_scale[j] = 1.0;
      degenerate = true;
    }
  }
  if (!degenerate && n > k) {
    Eigen::MatrixXd design(n, k + 1);
    design.col(0).setOnes();
    design.rightCols(k) = centered * meta.input_scale.cwiseInverse().asDiagonal();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == k + 1) {
      const Eigen::VectorXd beta = qr.solve(target);
      meta.intercept = beta[0];
      meta.weights = beta.tail(k);
      return meta;
    }
  }
  meta.fallback = true;
  meta.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  meta.intercept = target.mean();
  return meta;
}

std::vector<std::pair<std::vector<DocId>, std::vector<DocId>>> MakeFolds(
    const std::vector<DocId>& ids, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("stacking", "fold count must be positive");
  std::vector<DocId> order = ids;
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  if (order.size() < static_cast<std::size_t>(n)) {
    throw ValidationError("stacking", "cannot split " +
                                          std::to_string(order.size()) +
                                          " ids into " + std::to_string(n) +
                                          " folds");
  }
  Rng rng(DeriveSeed(seed, "stacking/folds"));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::pair<std::vector<DocId>, std::vector<DocId>>> folds(n);
  const std::size_t base = order.size() / n;
  const std::size_t extra = order.size() % n;
  std::size_t start = 0;
  for (int f = 0; f < n; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    auto& [train, val] = folds[f];
    val.assign(order.begin() + start, order.begin() + start + size);
    train.assign(order.begin(), order.begin() + start);
    train.insert(train.end(), order.begin() + start + size, order.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    start += size;
  }
  return folds;
}

StackModel FitStack(const std::vector<PairLabel>& pairs,
                    const ScoreVector& bws_train, const StackConfig& cfg) {
  cfg.Validate();
  const std::vector<DocId> ids = bws_train.ids();
  for (std::size_t j = 0; j < cfg.level0.size(); ++j)
    RequireCoverage(*cfg.level0[j].features, ids, j);

  StackModel model;
  model.rank_mean = cfg.rank_mean;
  for (const auto& spec : cfg.level0) {
    model.kinds.push_back(spec.kind);
    model.feature_names.push_back(spec.feature_name);
  }
  std::vector<const FeatureMatrix*> features;
  for (const auto& spec : cfg.level0) features.push_back(spec.features.get());

  const auto folds = MakeFolds(ids, cfg.n_folds, cfg.seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    StackFold fold;
    fold.train_ids = folds[f].first;
    fold.val_ids = folds[f].second;
    fold.train_pairs = PairsWithin(pairs, fold.train_ids);
    const std::string tag = "stacking/fold" + std::to_string(f);

    for (std::size_t j = 0; j < cfg.level0.size(); ++j) {
      const auto& spec = cfg.level0[j];
      const std::uint64_t seed =
          DeriveSeed(cfg.seed, tag + "/level0/" + std::to_string(j));
      if (spec.kind == ModelKind::kGppl) {
        GpplConfig gc = spec.gppl;
        gc.seed = seed;
        fold.models.emplace_back(FitGppl(*spec.features, fold.train_pairs, gc));
      } else {
        RankerConfig rc = spec.ranker;
        rc.seed = seed;
        const ScoreVector fold_bws = ComputeBws(fold.train_ids, fold.train_pairs);
        RankerValidation val{spec.features->Select(fold.val_ids),
                             bws_train.Restrict(fold.val_ids)};
        fold.models.emplace_back(
            TrainRanker(*spec.features, fold_bws, rc, std::move(val)));
      }
    }

    const Eigen::MatrixXd cols = Level0Columns(fold.models, features, fold.val_ids);
    Eigen::VectorXd target(static_cast<Eigen::Index>(fold.val_ids.size()));
    for (std::size_t i = 0; i < fold.val_ids.size(); ++i)
      target[static_cast<Eigen::Index>(i)] = bws_train.at(fold.val_ids[i]);
    fold.meta = FitMetaModel(cols, target);
    if (fold.meta.fallback) {
      const std::string msg =
          "fold " + std::to_string(f) +
          ": degenerate level-0 scores, using uniform meta weights";
      model.warnings.push_back(msg);
      std::cerr << "warning: [stacking] " << msg << '\n';
    }
    model.folds.push_back(std::move(fold));
  }
  return model;
}

ScoreVector PredictStacked(const StackModel& model,
                           const std::vector<const FeatureMatrix*>& features,
                           const std::vector<DocId>& ids) {
  if (features.size() != model.kinds.size()) {
    throw ValidationError("stacking", "expected " +
                                          std::to_string(model.kinds.size()) +
                                          " feature matrices, got " +
                                          std::to_string(features.size()));
  }
  if (model.folds.empty()) throw ValidationError("stacking", "empty stack model");
  for (std::size_t j = 0; j < features.size(); ++j)
    RequireCoverage(*features[j], ids, j);

  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (const auto& fold : model.folds) {
    const Eigen::MatrixXd cols = Level0Columns(fold.models, features, ids);
    Eigen::VectorXd pred(n);
    for (Eigen::Index i = 0; i < n; ++i)
      pred[i] = fold.meta.Apply(cols.row(i).transpose());
    total += model.rank_mean ? NormalizedRanks(pred) : pred;
  }
  total /= static_cast<double>(model.folds.size());

  ScoreVector out;
  out.provenance = Provenance::kStacked;
  for (Eigen::Index i = 0; i < n; ++i) out.entries[ids[i]] = total[i];
  return out;
}

ScoreVector PredictFoldEnsemble(const StackModel& model, std::size_t level0,
                                const FeatureMatrix& features,
                                const std::vector<DocId>& ids) {
  if (level0 >= model.kinds.size()) {
    throw ValidationError("stacking", "no level-0 model " + std::to_string(level0));
  }
  RequireCoverage(features, ids, level0);
  const FeatureMatrix selected = features.Select(ids);
  std::map<DocId, double> sum;
  for (const auto& fold : model.folds) {
    for (const auto& [id, v] : ScoreLevel0(fold.models[level0], selected).entries)
      sum[id] += v;
  }
  ScoreVector out;
  out.provenance = model.kinds[level0] == ModelKind::kGppl
                       ? Provenance::kGppl
                       : Provenance::kDirectRanker;
  for (auto& [id, v] : sum)
    out.entries[id] = v / static_cast<double>(model.folds.size());
  return out;
}

void SaveStack(const std::string& path, const StackModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  BinaryWriter w(out);
  w.WriteHeader(kStackMagic, kStackVersion);
  w.WriteU64(model.kinds.size());
  for (std::size_t j = 0; j < model.kinds.size(); ++j) {
    w.WriteString(ModelKindName(model.kinds[j]));
    w.WriteString(model.feature_names[j]);
  }
  w.WriteBool(model.rank_mean);
  WriteStrings(w, model.warnings);
  w.WriteU64(model.folds.size());
  for (const auto& fold : model.folds) {
    WriteStrings(w, fold.train_ids);
    WriteStrings(w, fold.val_ids);
    for (const auto& m : fold.models) {
      if (const auto* gp = std::get_if<GpplPosterior>(&m)) {
        WriteGppl(out, *gp);
      } else {
        WriteRanker(out, std::get<RankerModel>(m));
      }
    }
    w.WriteVector(fold.meta.weights);
    w.WriteF64(fold.meta.intercept);
    w.WriteVector(fold.meta.input_mean);
    w.WriteVector(fold.meta.input_scale);
    w.WriteBool(fold.meta.fallback);
  }
  if (!out) throw Error("io", "write failed for '" + path + "'");
}

StackModel LoadStack(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  BinaryReader r(in, path);
  r.ReadHeader(kStackMagic, kStackVersion);
  StackModel model;
  const std::uint64_t n_level0 = r.ReadU64();
  for (std::uint64_t j = 0; j < n_level0; ++j) {
    model.kinds.push_back(ParseModelKind(r.ReadString()));
    model.feature_names.push_back(r.ReadString());
  }
  model.rank_mean = r.ReadBool();
  model.warnings = ReadStrings(r);
  const std::uint64_t n_folds = r.ReadU64();
  for (std::uint64_t f = 0; f < n_folds; ++f) {
    StackFold fold;
    fold.train_ids = ReadStrings(r);
    fold.val_ids = ReadStrings(r);
    for (ModelKind kind : model.kinds) {
      if (kind == ModelKind::kGppl) {
        fold.models.emplace_back(ReadGppl(in, path));
      } else {
        fold.models.emplace_back(ReadRanker(in, path));
      }
    }
    fold.meta.weights = r.ReadVector();
    fold.meta.intercept = r.ReadF64();
    fold.meta.input_mean = r.ReadVector();
    fold.meta.input_scale = r.ReadVector();
    fold.meta.fallback = r.ReadBool();
    const auto k = static_cast<Eigen::Index>(model.kinds.size());
    if (fold.meta.weights.size() != k || fold.meta.input_mean.size() != k ||
        fold.meta.input_scale.size() != k) {
      throw Error("io", path + ": meta-model width does not match level-0 count");
    }
    model.folds.push_back(std::move(fold));
  }
  return model;
}

}  // namespace prefrank
