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

#ifndef PREFRANK_CORPUS_H_
#define PREFRANK_CORPUS_H_

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "prefrank/types.h"

namespace prefrank {

// Pair files:   "# pairs v1" header, then winner<TAB>loser[<TAB>count].
// Tuple files:  optional "# tuples v1" header, then m1..m4<TAB>best<TAB>worst.
// Blank lines and further '#' lines are ignored.
enum class PairFormat { kPairs, kTuples };

enum class FeatureFormat { kText, kBinary };

std::vector<PairLabel> LoadPairs(const std::string& path, PairFormat format);
std::vector<PairLabel> ParsePairs(std::istream& in, const std::string& source,
                                  PairFormat format);
void SavePairs(const std::string& path, const std::vector<PairLabel>& pairs);

// Sums the counts of identical (winner, loser) rows; first-seen order is kept.
std::vector<PairLabel> MergePairs(const std::vector<PairLabel>& pairs);

// Best-worst tuple to its single pairwise outcome, best preferred to worst.
PairLabel TupleToPair(const TupleLabel& tuple);

std::int64_t TotalCount(const std::vector<PairLabel>& pairs);

// Sorted, de-duplicated ids of every pair endpoint.
std::vector<DocId> PairDocIds(const std::vector<PairLabel>& pairs);

// Throws ValidationError naming the first pair endpoint without a feature row.
void RequireFeatureCoverage(const std::vector<PairLabel>& pairs,
                            const FeatureMatrix& features);

// Text features: header "# features v1 dim=D focus_dim=F", then one row per
// document: id, D feature values, F focus values, tab separated.
// Binary twin: detected by its magic; written with FeatureFormat::kBinary.
FeatureMatrix LoadFeatures(const std::string& path);
FeatureMatrix ParseFeatures(std::istream& in, const std::string& source);
void SaveFeatures(const std::string& path, const FeatureMatrix& features,
                  FeatureFormat format = FeatureFormat::kText);
void WriteFeaturesText(std::ostream& out, const FeatureMatrix& features);

// Auxiliary per-document columns (e.g. precomputed token frequencies).
struct AuxTable {
  std::size_t width = 0;
  std::map<DocId, Eigen::VectorXd> rows;
};

// TSV, one row per id: id<TAB>v1..vW. No header.
AuxTable LoadAuxTable(const std::string& path);

// Appends aux columns to every feature row. Focus rows are left untouched.
FeatureMatrix AppendFeatureColumns(const FeatureMatrix& features,
                                   const AuxTable& aux);

struct SplitResult {
  SplitSpec split;
  std::vector<PairLabel> train_pairs;
};

// Seeded doc-id subsampling: a shuffle prefix of round(fraction * |ids|) ids
// becomes the training set; only pairs with both endpoints inside it are kept
// for training.
SplitResult SubsampleSplit(const std::vector<DocId>& ids,
                           const std::vector<PairLabel>& pairs,
                           double fraction, std::uint64_t seed);

// Pairs with both endpoints in `ids`.
std::vector<PairLabel> PairsWithin(const std::vector<PairLabel>& pairs,
                                   const std::vector<DocId>& ids);
// Pairs with at least one endpoint in `ids`.
std::vector<PairLabel> PairsTouching(const std::vector<PairLabel>& pairs,
                                     const std::vector<DocId>& ids);

// Document corpus TSV: id<TAB>text[<TAB>focus_index].
std::vector<Document> LoadDocuments(const std::string& path);

// Score TSV: id<TAB>score, optional "# scores v1 <provenance>" header.
ScoreVector LoadScores(const std::string& path);
void SaveScores(const std::string& path, const ScoreVector& scores);

}  // namespace prefrank

#endif  // PREFRANK_CORPUS_H_
