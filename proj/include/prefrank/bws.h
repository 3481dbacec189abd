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

#ifndef PREFRANK_BWS_H_
#define PREFRANK_BWS_H_

#include <vector>

#include "prefrank/types.h"

namespace prefrank {

// Best-Worst score of each id: (wins - losses) / (wins + losses), counting
// pair multiplicities. Ids that never appear in a pair score 0. Throws
// ValidationError if a pair names an id outside `ids`.
ScoreVector ComputeBws(const std::vector<DocId>& ids,
                       const std::vector<PairLabel>& pairs);

// Ids by descending score, ties by ascending id.
std::vector<DocId> RankOf(const ScoreVector& scores);

}  // namespace prefrank

#endif  // PREFRANK_BWS_H_
