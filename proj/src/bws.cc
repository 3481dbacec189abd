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

#include "prefrank/bws.h"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

namespace prefrank {

ScoreVector ComputeBws(const std::vector<DocId>& ids,
                       const std::vector<PairLabel>& pairs) {
  struct Tally {
    std::int64_t wins = 0;
    std::int64_t losses = 0;
  };
  std::unordered_map<std::string, Tally> tally;
  tally.reserve(ids.size());
  for (const auto& id : ids) tally.emplace(id, Tally{});
  for (const auto& p : pairs) {
    auto w = tally.find(p.winner_id);
    auto l = tally.find(p.loser_id);
    if (w == tally.end() || l == tally.end()) {
      const auto& missing = w == tally.end() ? p.winner_id : p.loser_id;
      throw ValidationError("bws", "pair references unknown id '" + missing +
                                       "'");
    }
    w->second.wins += p.count;
    l->second.losses += p.count;
  }
  ScoreVector out;
  out.provenance = Provenance::kBws;
  for (const auto& [id, t] : tally) {
    const std::int64_t appearances = t.wins + t.losses;
    out.entries[id] =
        appearances == 0
            ? 0.0
            : static_cast<double>(t.wins - t.losses) /
                  static_cast<double>(appearances);
  }
  return out;
}

std::vector<DocId> RankOf(const ScoreVector& scores) {
  std::vector<std::pair<DocId, double>> items(scores.entries.begin(),
                                              scores.entries.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<DocId> out;
  out.reserve(items.size());
  for (auto& [id, _] : items) out.push_back(std::move(id));
  return out;
}

}  // namespace prefrank
