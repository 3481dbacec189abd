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

#include "prefrank/experiment.h"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "boost/algorithm/string/trim.hpp"
#include "boost/property_tree/ini_parser.hpp"
#include "boost/property_tree/ptree.hpp"
#include "prefrank/bws.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

namespace pt = boost::property_tree;

std::string Num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Splits on commas outside parentheses.
std::vector<std::string> SplitTopLevel(std::string_view text) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(boost::algorithm::trim_copy(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(boost::algorithm::trim_copy(cur));
  return out;
}

std::pair<ModelKind, std::string> ParseMember(std::string_view text) {
  const auto at = text.find('@');
  if (at == std::string_view::npos || at + 1 == text.size()) {
    throw ValidationError("config", "model '" + std::string(text) +
                                        "' must be written kind@features");
  }
  return {ParseModelKind(text.substr(0, at)), std::string(text.substr(at + 1))};
}

template <typename T>
T ParseNumber(const std::string& value, const std::string& key,
              const std::string& source) {
  const std::string s = boost::algorithm::trim_copy(value);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError("config", source + ": bad value '" + value +
                                        "' for " + key);
  }
  return v;
}

bool ParseBool(const std::string& value, const std::string& key,
               const std::string& source) {
  const std::string s = boost::algorithm::trim_copy(value);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ValidationError("config", source + ": bad boolean '" + value +
                                      "' for " + key);
}

template <typename T>
std::vector<T> ParseList(const std::string& value, const std::string& key,
                         const std::string& source) {
  std::vector<T> out;
  if (boost::algorithm::trim_copy(value).empty()) return out;
  for (const auto& item : SplitTopLevel(value))
    out.push_back(ParseNumber<T>(item, key, source));
  return out;
}

class Section {
 public:
  Section(const pt::ptree& tree, std::string name, std::string source,
          std::set<std::string> known)
      : name_(std::move(name)), source_(std::move(source)) {
    if (const auto child = tree.get_child_optional(name_)) {
      for (const auto& [key, node] : *child) {
        if (!known.count(key)) {
          throw ValidationError("config", source_ + ": unknown key '" + key +
                                              "' in [" + name_ + "]");
        }
        values_[key] = node.data();
      }
    }
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  template <typename F>
  void With(const std::string& key, F&& apply) const {
    const auto it = values_.find(key);
    if (it != values_.end()) apply(it->second, name_ + "." + key);
  }
  void Get(const std::string& key, double& out) const {
    With(key, [&](const auto& v, const auto& k) {
      out = ParseNumber<double>(v, k, source_);
    });
  }
  void Get(const std::string& key, int& out) const {
    With(key, [&](const auto& v, const auto& k) {
      out = ParseNumber<int>(v, k, source_);
    });
  }
  void Get(const std::string& key, std::uint64_t& out) const {
    With(key, [&](const auto& v, const auto& k) {
      out = ParseNumber<std::uint64_t>(v, k, source_);
    });
  }
  void Get(const std::string& key, bool& out) const {
    With(key, [&](const auto& v, const auto& k) {
      out = ParseBool(v, k, source_);
    });
  }
  void Get(const std::string& key, std::string& out) const {
    With(key, [&](const auto& v, const auto&) {
      out = boost::algorithm::trim_copy(v);
    });
  }
  const std::string& source() const { return source_; }

 private:
  std::string name_;
  std::string source_;
  std::map<std::string, std::string> values_;
};

std::string Sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '.'
                      ? c
                      : '_');
  }
  return out;
}

const FeatureMatrix& FeaturesFor(const ExperimentInputs& inputs,
                                 const std::string& name) {
  const auto it = inputs.features.find(name);
  if (it == inputs.features.end() || !it->second) {
    throw ValidationError("experiment", "unknown feature set '" + name + "'");
  }
  return *it->second;
}

}  // namespace

std::string ModelSpec::ToString() const {
  auto member = [](const std::pair<ModelKind, std::string>& m) {
    return std::string(ModelKindName(m.first)) + "@" + m.second;
  };
  switch (type) {
    case Type::kSingle:
      return member(members.at(0));
    case Type::kFoldEnsemble:
      return std::string(ModelKindName(members.at(0).first)) + "-cv@" +
             members.at(0).second;
    case Type::kStack: {
      std::string out = "stack(";
      for (std::size_t j = 0; j < members.size(); ++j) {
        if (j) out += ",";
        out += member(members[j]);
      }
      return out + ")";
    }
  }
  return {};
}

ModelSpec ParseModelSpec(std::string_view text) {
  const std::string t = boost::algorithm::trim_copy(std::string(text));
  ModelSpec spec;
  if (t.rfind("stack(", 0) == 0) {
    if (t.back() != ')') {
      throw ValidationError("config", "unterminated stack spec '" + t + "'");
    }
    spec.type = ModelSpec::Type::kStack;
    for (const auto& m : SplitTopLevel(std::string_view(t).substr(6, t.size() - 7)))
      spec.members.push_back(ParseMember(m));
    return spec;
  }
  const auto at = t.find('@');
  std::string kind = t.substr(0, at);
  if (kind.size() > 3 && kind.compare(kind.size() - 3, 3, "-cv") == 0) {
    spec.type = ModelSpec::Type::kFoldEnsemble;
    kind.resize(kind.size() - 3);
  }
  spec.members.push_back(
      ParseMember(kind + (at == std::string::npos ? "" : t.substr(at))));
  return spec;
}

void ExperimentConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw ValidationError("experiment", "invalid config: " + what);
  };
  if (fractions.empty()) fail("no fractions");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) fail("fractions must lie in (0, 1]");
  if (n_repeats < 1) fail("n_repeats must be >= 1");
  if (models.empty()) fail("no models requested");
  for (const auto& m : models) ParseModelSpec(m);
  if (n_folds < 2) fail("n_folds must be >= 2");
  gppl.Validate();
  ranker.Validate();
}

Config ParseConfig(std::istream& in, const std::string& source) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(source, e.line(), e.message());
  }
  const std::set<std::string> sections = {"data",   "features", "experiment",
                                          "gppl",   "directranker",
                                          "stacking", "synth"};
  for (const auto& [name, node] : tree) {
    if (!sections.count(name)) {
      throw ValidationError("config",
                            source + ": unknown section [" + name + "]");
    }
  }

  Config cfg;
  auto& e = cfg.experiment;

  const Section data(tree, "data", source, {"pairs", "pairs_format"});
  data.Get("pairs", e.pairs_path);
  data.With("pairs_format", [&](const std::string& v, const std::string& k) {
    const std::string s = boost::algorithm::trim_copy(v);
    if (s == "pairs") {
      e.pairs_format = PairFormat::kPairs;
    } else if (s == "tuples") {
      e.pairs_format = PairFormat::kTuples;
    } else {
      throw ValidationError("config", source + ": bad value '" + v + "' for " + k);
    }
  });

  if (const auto features = tree.get_child_optional("features")) {
    for (const auto& [name, node] : *features)
      e.feature_paths[name] = boost::algorithm::trim_copy(node.data());
  }

  const Section exp(tree, "experiment", source,
                    {"fractions", "repeats", "models", "output_dir", "seed"});
  exp.With("fractions", [&](const std::string& v, const std::string& k) {
    e.fractions = ParseList<double>(v, k, source);
  });
  exp.Get("repeats", e.n_repeats);
  exp.With("models", [&](const std::string& v, const std::string&) {
    e.models = SplitTopLevel(v);
  });
  exp.Get("output_dir", e.output_dir);
  exp.Get("seed", e.seed);

  const Section gp(tree, "gppl", source,
                   {"sigma2", "signal_var", "lengthscale", "n_inducing",
                    "batch_size", "max_iters", "tol", "step_size",
                    "optimize_hyperparameters", "hyper_every",
                    "quadrature_points"});
  gp.Get("sigma2", e.gppl.sigma2);
  gp.Get("signal_var", e.gppl.signal_var);
  gp.With("lengthscale", [&](const std::string& v, const std::string& k) {
    const auto ls = ParseList<double>(v, k, source);
    e.gppl.lengthscales = Eigen::Map<const Eigen::VectorXd>(
        ls.data(), static_cast<Eigen::Index>(ls.size()));
  });
  gp.Get("n_inducing", e.gppl.n_inducing);
  gp.Get("batch_size", e.gppl.batch_size);
  gp.Get("max_iters", e.gppl.max_iters);
  gp.Get("tol", e.gppl.tol);
  gp.Get("step_size", e.gppl.step_size);
  gp.Get("optimize_hyperparameters", e.gppl.optimize_hyperparameters);
  gp.Get("hyper_every", e.gppl.hyper_every);
  gp.Get("quadrature_points", e.gppl.quadrature_points);

  const Section dr(tree, "directranker", source,
                   {"hidden_dims", "focus_hidden_dims", "learning_rate",
                    "dropout", "batch_norm", "pairs_per_epoch", "batch_size",
                    "max_epochs", "patience", "standardize_inputs"});
  dr.With("hidden_dims", [&](const std::string& v, const std::string& k) {
    e.ranker.hidden_dims = ParseList<int>(v, k, source);
  });
  dr.With("focus_hidden_dims", [&](const std::string& v, const std::string& k) {
    e.ranker.focus_hidden_dims = ParseList<int>(v, k, source);
  });
  dr.Get("learning_rate", e.ranker.learning_rate);
  dr.Get("dropout", e.ranker.dropout);
  dr.Get("batch_norm", e.ranker.batch_norm);
  dr.With("pairs_per_epoch", [&](const std::string& v, const std::string& k) {
    e.ranker.pairs_per_epoch = ParseNumber<int>(v, k, source);
  });
  dr.Get("batch_size", e.ranker.batch_size);
  dr.Get("max_epochs", e.ranker.max_epochs);
  dr.Get("patience", e.ranker.patience);
  dr.Get("standardize_inputs", e.ranker.standardize_inputs);

  const Section st(tree, "stacking", source, {"n_folds", "rank_mean"});
  st.Get("n_folds", e.n_folds);
  st.Get("rank_mean", e.rank_mean);

  const Section sy(tree, "synth", source,
                   {"n_docs", "dim", "utility_fn", "pairs_total",
                    "annotators_per_pair", "sigma2", "seed"});
  sy.Get("n_docs", cfg.synth.n_docs);
  sy.Get("dim", cfg.synth.dim);
  sy.With("utility_fn", [&](const std::string& v, const std::string& k) {
    const std::string s = boost::algorithm::trim_copy(v);
    if (s == "linear") {
      cfg.synth.utility_fn = UtilityFn::kLinear;
    } else if (s == "gp_sample") {
      cfg.synth.utility_fn = UtilityFn::kGpSample;
    } else {
      throw ValidationError("config", source + ": bad value '" + v + "' for " + k);
    }
  });
  sy.Get("pairs_total", cfg.synth.pairs_total);
  sy.Get("annotators_per_pair", cfg.synth.annotators_per_pair);
  sy.Get("sigma2", cfg.synth.sigma2);
  sy.Get("seed", cfg.synth.seed);

  // Relative data paths resolve against the config file's directory.
  const std::filesystem::path base = std::filesystem::path(source).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative() && !base.empty())
      p = (base / p).string();
  };
  resolve(e.pairs_path);
  for (auto& [name, path] : e.feature_paths) resolve(path);
  return cfg;
}

Config LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open '" + path + "'");
  return ParseConfig(in, path);
}

ExperimentInputs LoadExperimentInputs(const ExperimentConfig& cfg) {
  if (cfg.pairs_path.empty()) {
    throw ValidationError("experiment", "no pairs file configured");
  }
  ExperimentInputs inputs;
  inputs.pairs = MergePairs(LoadPairs(cfg.pairs_path, cfg.pairs_format));
  for (const auto& [name, path] : cfg.feature_paths) {
    inputs.features[name] =
        std::make_shared<const FeatureMatrix>(LoadFeatures(path));
  }
  return inputs;
}

std::pair<double, double> ExperimentSummary::Cell(std::size_t model,
                                                  std::size_t fraction) const {
  return MeanStd(rho.at(model).at(fraction));
}

ScoreVector TrainAndPredict(const ModelSpec& spec, const ExperimentInputs& inputs,
                            const std::vector<PairLabel>& train_pairs,
                            const ScoreVector& bws_train,
                            const std::vector<DocId>& test_ids,
                            const ExperimentConfig& cfg, std::uint64_t seed) {
  if (spec.type == ModelSpec::Type::kSingle) {
    const auto& [kind, name] = spec.members.at(0);
    const FeatureMatrix& features = FeaturesFor(inputs, name);
    const FeatureMatrix test = features.Select(test_ids);
    if (kind == ModelKind::kGppl) {
      GpplConfig gc = cfg.gppl;
      gc.seed = seed;
      return PredictGppl(FitGppl(features, train_pairs, gc), test).Means();
    }
    RankerConfig rc = cfg.ranker;
    rc.seed = seed;
    return PredictScores(TrainRanker(features, bws_train, rc), test);
  }

  StackConfig sc;
  sc.n_folds = cfg.n_folds;
  sc.seed = seed;
  sc.rank_mean = cfg.rank_mean;
  for (const auto& [kind, name] : spec.members) {
    Level0Spec l0;
    l0.kind = kind;
    l0.feature_name = name;
    l0.features = inputs.features.count(name) ? inputs.features.at(name) : nullptr;
    if (!l0.features) FeaturesFor(inputs, name);
    l0.gppl = cfg.gppl;
    l0.ranker = cfg.ranker;
    sc.level0.push_back(std::move(l0));
  }
  const StackModel model = FitStack(train_pairs, bws_train, sc);
  if (spec.type == ModelSpec::Type::kFoldEnsemble) {
    return PredictFoldEnsemble(model, 0, *sc.level0[0].features, test_ids);
  }
  std::vector<const FeatureMatrix*> features;
  for (const auto& l0 : sc.level0) features.push_back(l0.features.get());
  return PredictStacked(model, features, test_ids);
}

ExperimentSummary RunExperiment(const ExperimentConfig& cfg,
                                const ExperimentInputs& inputs) {
  cfg.Validate();
  std::vector<ModelSpec> specs;
  for (const auto& m : cfg.models) {
    specs.push_back(ParseModelSpec(m));
    for (const auto& [kind, name] : specs.back().members) FeaturesFor(inputs, name);
  }
  const std::vector<PairLabel> pairs = MergePairs(inputs.pairs);
  const std::vector<DocId> ids = PairDocIds(pairs);

  ExperimentSummary summary;
  for (const auto& s : specs) summary.models.push_back(s.ToString());
  summary.fractions = cfg.fractions;
  summary.rho.assign(specs.size(),
                     std::vector<std::vector<double>>(cfg.fractions.size()));

  std::filesystem::path runs_dir;
  if (!cfg.output_dir.empty()) {
    runs_dir = std::filesystem::path(cfg.output_dir) / "runs";
    std::filesystem::create_directories(runs_dir);
  }

  for (std::size_t fi = 0; fi < cfg.fractions.size(); ++fi) {
    const double fraction = cfg.fractions[fi];
    for (int rep = 0; rep < cfg.n_repeats; ++rep) {
      const std::string run_tag =
          "experiment/fraction/" + Num(fraction) + "/repeat/" + std::to_string(rep);
      const std::uint64_t run_seed = DeriveSeed(cfg.seed, run_tag);
      const SplitResult split =
          SubsampleSplit(ids, pairs, fraction, DeriveSeed(run_seed, "split"));
      const bool in_sample = split.split.test_ids.empty();
      const std::vector<DocId>& train_ids = split.split.train_ids;
      const std::vector<DocId>& test_ids =
          in_sample ? split.split.train_ids : split.split.test_ids;
      const ScoreVector bws_train = ComputeBws(train_ids, split.train_pairs);
      const ScoreVector gold =
          ComputeBws(ids, PairsTouching(pairs, test_ids)).Restrict(test_ids);

      for (std::size_t mi = 0; mi < specs.size(); ++mi) {
        const std::string& name = summary.models[mi];
        const ScoreVector pred = TrainAndPredict(
            specs[mi], inputs, split.train_pairs, bws_train, test_ids, cfg,
            DeriveSeed(run_seed, "model/" + name));
        EvalReport report =
            Evaluate(pred, gold,
                     {{"model", name},
                      {"fraction", Num(fraction)},
                      {"repeat", std::to_string(rep)},
                      {"seed", std::to_string(cfg.seed)},
                      {"n_train", std::to_string(train_ids.size())},
                      {"in_sample", in_sample ? "true" : "false"}});
        summary.rho[mi][fi].push_back(report.spearman);
        if (!runs_dir.empty()) {
          EmitReport(report, (runs_dir / (Sanitize(name) + "__f" + Num(fraction) +
                                          "__r" + std::to_string(rep) + ".report"))
                                 .string());
        }
        summary.reports.push_back(std::move(report));
      }
    }
  }

  if (!cfg.output_dir.empty()) {
    const auto path = std::filesystem::path(cfg.output_dir) / "summary.tsv";
    std::ofstream out(path);
    if (!out) throw Error("experiment", "cannot write '" + path.string() + "'");
    WriteSummary(out, summary);
  }
  return summary;
}

ExperimentSummary RunExperiment(const ExperimentConfig& cfg) {
  return RunExperiment(cfg, LoadExperimentInputs(cfg));
}

void WriteSummary(std::ostream& out, const ExperimentSummary& summary) {
  out << "model";
  for (double f : summary.fractions) out << '\t' << Num(f);
  out << '\n';
  std::ostringstream cell;
  cell << std::fixed << std::setprecision(3);
  for (std::size_t m = 0; m < summary.models.size(); ++m) {
    out << summary.models[m];
    for (std::size_t f = 0; f < summary.fractions.size(); ++f) {
      const auto [mean, sd] = summary.Cell(m, f);
      cell.str("");
      cell << mean << " +- " << sd;
      out << '\t' << cell.str();
    }
    out << '\n';
  }
}

}  // namespace prefrank
