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

#ifndef PREFRANK_EVAL_H_
#define PREFRANK_EVAL_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "prefrank/types.h"

namespace prefrank {

// Spearman's rho with average ranks for ties. Both vectors must cover the same
// ids (at least two). A constant input has no defined correlation; NaN is
// returned in that case.
double Spearman(const ScoreVector& pred, const ScoreVector& gold);

// Average (fractional) 1-based ranks of `values`, ascending.
std::vector<double> FractionalRanks(const std::vector<double>& values);

// r -> (r + 1) / 2; every score must lie in [-1, 1].
ScoreVector ShiftScores(const ScoreVector& scores);

// Scores divided by their largest magnitude when any exceeds 1; the result lies
// in [-1, 1] and can be shifted. Bounded inputs pass through.
ScoreVector BoundScores(const ScoreVector& scores);

// Mean ranking distance per gold segment. Documents are ordered by gold score
// (descending, ties by id) and cut into `n_segments` contiguous segments, the
// first |N| mod n_segments segments taking one extra document. For segment S:
//   MRD(S) = sum_{d in S} |pos_pred(d) - pos_gold(d)| / (N * |S|)
// with 0-based global positions and N test documents.
std::vector<double> MrdSegments(const ScoreVector& pred,
                                const ScoreVector& gold, int n_segments = 10);

inline constexpr int kHistogramBins = 20;

// Counts of BoundScores -> ShiftScores values in kHistogramBins equal bins
// over [0, 1]; the value 1 falls into the last bin.
std::vector<std::int64_t> ScoreHistogram(const ScoreVector& scores);

struct EvalReport {
  double spearman = 0.0;
  std::vector<double> mrd_per_segment;
  std::int64_t n_test = 0;
  std::vector<std::int64_t> histogram;
  std::map<std::string, std::string> metadata;  // model, fraction, seed, ...
  // (id, predicted, gold) per test document, in id order.
  std::vector<std::tuple<DocId, double, double>> scatter;

  bool operator==(const EvalReport&) const = default;
};

EvalReport Evaluate(const ScoreVector& pred, const ScoreVector& gold,
                    std::map<std::string, std::string> metadata = {});

// Versioned text report: "# eval-report v1", key/value fields, then TSV
// blocks "[histogram]", "[scatter]", "[mrd]" terminated by "[end]".
void WriteReport(std::ostream& out, const EvalReport& report);
EvalReport ParseReport(std::istream& in, const std::string& source);
void EmitReport(const EvalReport& report, const std::string& path);
EvalReport LoadReport(const std::string& path);

// Sample mean and (n - 1) standard deviation; std is 0 for one value.
std::pair<double, double> MeanStd(const std::vector<double>& values);

}  // namespace prefrank

#endif  // PREFRANK_EVAL_H_
