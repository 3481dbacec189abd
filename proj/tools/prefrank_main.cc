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

// Command-line front end: BWS scoring, synthetic data, splits, model training
// and prediction, stacking, evaluation and the sparse-data experiment.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "prefrank/bws.h"
#include "prefrank/binary_io.h"
#include "prefrank/corpus.h"
#include "prefrank/directranker.h"
#include "prefrank/eval.h"
#include "prefrank/experiment.h"
#include "prefrank/gppl.h"
#include "prefrank/stacking.h"
#include "prefrank/synth.h"

namespace {

using namespace prefrank;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void AddCommon(CLI::App* cmd, Common& c, bool out_required = true,
               bool out_is_dir = false) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--config", c.config, "INI configuration file")
      ->check(CLI::ExistingFile);
  auto* out = cmd->add_option(out_is_dir ? "--out,--out-dir" : "--out", c.out,
                              "Output path");
  if (out_required) out->required();
}

Config ConfigFor(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : LoadConfig(c.config);
  if (c.seed) {
    cfg.experiment.seed = *c.seed;
    cfg.synth.seed = *c.seed;
  }
  return cfg;
}

PairFormat ParsePairFormat(const std::string& s) {
  if (s == "tuples") return PairFormat::kTuples;
  return PairFormat::kPairs;
}

std::vector<PairLabel> ReadPairs(const std::string& path,
                                 const std::string& format) {
  return MergePairs(LoadPairs(path, ParsePairFormat(format)));
}

std::string OutPath(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / name).string();
}

void WriteSplit(const std::string& path, const SplitSpec& split) {
  std::ofstream out(path);
  if (!out) throw Error("corpus", "cannot write '" + path + "'");
  out << "# split v1 fraction=" << split.fraction << " seed=" << split.seed
      << '\n';
  for (const auto& id : split.train_ids) out << "train\t" << id << '\n';
  for (const auto& id : split.test_ids) out << "test\t" << id << '\n';
}

int Run(int argc, char** argv) {
  CLI::App app{"Preference learning from pairwise comparisons"};
  app.require_subcommand(1);
  std::string pairs_format = "pairs";
  app.add_option("--pairs-format", pairs_format, "pairs | tuples")
      ->check(CLI::IsMember({"pairs", "tuples"}));

  // bws
  Common bws_c;
  std::string bws_pairs;
  auto* bws = app.add_subcommand("bws", "Best-worst scores from pairwise labels");
  AddCommon(bws, bws_c);
  bws->add_option("--pairs", bws_pairs, "Pair or tuple file")->required();

  // synth
  Common synth_c;
  std::optional<int> n_docs, dim, pairs_total, annotators;
  std::optional<double> synth_sigma2;
  std::string utility;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  AddCommon(synth, synth_c, true, true);
  synth->add_option("--n-docs", n_docs);
  synth->add_option("--dim", dim);
  synth->add_option("--utility", utility)
      ->check(CLI::IsMember({"linear", "gp_sample"}));
  synth->add_option("--pairs-total", pairs_total);
  synth->add_option("--annotators", annotators);
  synth->add_option("--sigma2", synth_sigma2);

  // subsample
  Common sub_c;
  std::string sub_pairs;
  double fraction = 0.6;
  auto* sub = app.add_subcommand("subsample", "Seeded train/test document split");
  AddCommon(sub, sub_c, true, true);
  sub->add_option("--pairs", sub_pairs)->required();
  sub->add_option("--fraction", fraction)->check(CLI::Range(0.0, 1.0));

  // train
  Common train_c;
  std::string train_kind, train_features, train_pairs;
  auto* train = app.add_subcommand("train", "Train a GPPL or DirectRanker model");
  AddCommon(train, train_c);
  train->add_option("--model", train_kind)
      ->required()
      ->check(CLI::IsMember({"gppl", "directranker"}));
  train->add_option("--features", train_features)->required();
  train->add_option("--pairs", train_pairs)->required();

  // predict
  Common pred_c;
  std::string pred_model;
  std::vector<std::string> pred_features;
  auto* pred = app.add_subcommand("predict", "Score documents with a saved model");
  AddCommon(pred, pred_c);
  pred->add_option("--model", pred_model)->required()->check(CLI::ExistingFile);
  pred->add_option("--features", pred_features,
                   "Feature file (one per level-0 model for stacks)")
      ->required();

  // stack
  Common stack_c;
  std::vector<std::string> level0;
  std::string stack_pairs;
  std::optional<int> folds;
  bool rank_mean = false;
  auto* stack = app.add_subcommand("stack", "Fit a stacked ensemble");
  AddCommon(stack, stack_c);
  stack->add_option("--level0", level0, "kind:feature_file, repeatable")
      ->required();
  stack->add_option("--pairs", stack_pairs)->required();
  stack->add_option("--folds", folds);
  stack->add_flag("--rank-mean", rank_mean, "Average fold ranks, not scores");

  // eval
  Common eval_c;
  std::string eval_pred, eval_gold, eval_gold_pairs;
  auto* ev = app.add_subcommand("eval", "Evaluate predicted scores against gold");
  AddCommon(ev, eval_c);
  ev->add_option("--pred", eval_pred)->required();
  auto* gold_opt = ev->add_option("--gold", eval_gold, "Gold score file");
  ev->add_option("--gold-pairs", eval_gold_pairs,
                 "Pairs to derive BWS gold for the predicted ids")
      ->excludes(gold_opt);

  // experiment
  Common exp_c;
  auto* exp = app.add_subcommand("experiment", "Run the sparse-data experiment");
  AddCommon(exp, exp_c, false, true);

  CLI11_PARSE(app, argc, argv);

  if (bws->parsed()) {
    const auto pairs = ReadPairs(bws_pairs, pairs_format);
    SaveScores(bws_c.out, ComputeBws(PairDocIds(pairs), pairs));
  } else if (synth->parsed()) {
    Config cfg = ConfigFor(synth_c);
    SynthConfig& s = cfg.synth;
    if (n_docs) s.n_docs = *n_docs;
    if (dim) s.dim = *dim;
    if (!utility.empty())
      s.utility_fn = utility == "linear" ? UtilityFn::kLinear : UtilityFn::kGpSample;
    if (pairs_total) s.pairs_total = *pairs_total;
    if (annotators) s.annotators_per_pair = *annotators;
    if (synth_sigma2) s.sigma2 = *synth_sigma2;
    const SynthData data = Generate(s);
    SaveFeatures(OutPath(synth_c.out, "features.tsv"), data.features);
    SavePairs(OutPath(synth_c.out, "pairs.tsv"), data.pairs);
    SaveScores(OutPath(synth_c.out, "utilities.tsv"), data.true_utilities);
  } else if (sub->parsed()) {
    const Config cfg = ConfigFor(sub_c);
    const auto pairs = ReadPairs(sub_pairs, pairs_format);
    const SplitResult split =
        SubsampleSplit(PairDocIds(pairs), pairs, fraction, cfg.experiment.seed);
    WriteSplit(OutPath(sub_c.out, "split.tsv"), split.split);
    SavePairs(OutPath(sub_c.out, "train_pairs.tsv"), split.train_pairs);
    SaveScores(OutPath(sub_c.out, "train_bws.tsv"),
               ComputeBws(split.split.train_ids, split.train_pairs));
  } else if (train->parsed()) {
    const Config cfg = ConfigFor(train_c);
    const FeatureMatrix features = LoadFeatures(train_features);
    const auto pairs = ReadPairs(train_pairs, pairs_format);
    if (train_kind == "gppl") {
      GpplConfig gc = cfg.experiment.gppl;
      gc.seed = cfg.experiment.seed;
      SaveGppl(train_c.out, FitGppl(features, pairs, gc));
    } else {
      RankerConfig rc = cfg.experiment.ranker;
      rc.seed = cfg.experiment.seed;
      SaveRanker(train_c.out,
                 TrainRanker(features, ComputeBws(PairDocIds(pairs), pairs), rc));
    }
  } else if (pred->parsed()) {
    const std::string magic = PeekMagic(pred_model);
    std::vector<FeatureMatrix> features;
    for (const auto& path : pred_features) features.push_back(LoadFeatures(path));
    ScoreVector scores;
    if (magic == "PRFKGPPL") {
      scores = PredictGppl(LoadGppl(pred_model), features.at(0)).Means();
    } else if (magic == "PRFKDRNK") {
      scores = PredictScores(LoadRanker(pred_model), features.at(0));
    } else if (magic == "PRFKSTCK") {
      const StackModel model = LoadStack(pred_model);
      std::vector<const FeatureMatrix*> ptrs;
      for (const auto& f : features) ptrs.push_back(&f);
      scores = PredictStacked(model, ptrs, features.at(0).doc_ids());
    } else {
      throw Error("io", pred_model + ": unrecognised model file");
    }
    SaveScores(pred_c.out, scores);
  } else if (stack->parsed()) {
    const Config cfg = ConfigFor(stack_c);
    StackConfig sc;
    sc.n_folds = folds.value_or(cfg.experiment.n_folds);
    sc.seed = cfg.experiment.seed;
    sc.rank_mean = rank_mean || cfg.experiment.rank_mean;
    for (const auto& spec : level0) {
      const auto colon = spec.find(':');
      if (colon == std::string::npos) {
        throw ValidationError("cli", "--level0 expects kind:feature_file, got '" +
                                         spec + "'");
      }
      Level0Spec l0;
      l0.kind = ParseModelKind(spec.substr(0, colon));
      l0.feature_name = spec.substr(colon + 1);
      l0.features =
          std::make_shared<const FeatureMatrix>(LoadFeatures(l0.feature_name));
      l0.gppl = cfg.experiment.gppl;
      l0.ranker = cfg.experiment.ranker;
      sc.level0.push_back(std::move(l0));
    }
    const auto pairs = ReadPairs(stack_pairs, pairs_format);
    const StackModel model =
        FitStack(pairs, ComputeBws(PairDocIds(pairs), pairs), sc);
    SaveStack(stack_c.out, model);
  } else if (ev->parsed()) {
    const ScoreVector predicted = LoadScores(eval_pred);
    ScoreVector gold;
    if (!eval_gold.empty()) {
      gold = LoadScores(eval_gold);
    } else if (!eval_gold_pairs.empty()) {
      const auto pairs = ReadPairs(eval_gold_pairs, pairs_format);
      const auto test_ids = predicted.ids();
      gold = ComputeBws(PairDocIds(pairs), PairsTouching(pairs, test_ids))
                 .Restrict(test_ids);
    } else {
      throw ValidationError("cli", "eval needs --gold or --gold-pairs");
    }
    EmitReport(Evaluate(predicted, gold, {{"pred", eval_pred}}), eval_c.out);
  } else if (exp->parsed()) {
    if (exp_c.config.empty()) {
      throw ValidationError("cli", "experiment needs --config");
    }
    Config cfg = ConfigFor(exp_c);
    if (!exp_c.out.empty()) cfg.experiment.output_dir = exp_c.out;
    const ExperimentSummary summary = RunExperiment(cfg.experiment);
    WriteSummary(std::cout, summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const prefrank::Error& e) {
    std::cerr << "error: [" << e.stage() << "] " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: [cli] " << e.what() << '\n';
  }
  return 1;
}
