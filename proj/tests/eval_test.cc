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
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.h"
#include "prefrank/eval.h"

namespace prefrank {
namespace {

ScoreVector FromValues(const std::vector<double>& v) {
  ScoreVector s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "d%03zu", i);
    s.entries[id] = v[i];
  }
  return s;
}

ScoreVector Random(int n, std::mt19937_64& rng, int levels = 0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> q(0, std::max(levels - 1, 0));
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(levels ? q(rng) * 0.1 : u(rng));
  return FromValues(v);
}

TEST_CASE("Spearman on identical, reversed and closed-form inputs") {
  const auto gold = FromValues({1, 2, 3, 4, 5});
  CHECK(Spearman(gold, gold) == doctest::Approx(1.0));
  CHECK(Spearman(FromValues({-1, -2, -3, -4, -5}), gold) == doctest::Approx(-1.0));
  CHECK(Spearman(FromValues({1, 2, 3, 5, 4}), gold) == doctest::Approx(0.9));
}

TEST_CASE("Spearman matches a counting-rank oracle with ties") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = Random(3 + trial, rng, 5);
    const auto b = Random(3 + trial, rng, trial % 2 ? 0 : 4);
    const double fast = Spearman(a, b);
    const double slow = oracle::NaiveSpearman(a, b);
    if (std::isnan(slow)) {
      CHECK(std::isnan(fast));
    } else {
      CHECK(std::abs(fast - slow) < 1e-12);
    }
  }
}

TEST_CASE("Spearman is invariant under increasing transforms") {
  std::mt19937_64 rng(2);
  const auto a = Random(30, rng), b = Random(30, rng);
  auto t = a;
  for (auto& [id, v] : t.entries) v = std::exp(3.0 * v) + 10.0;
  CHECK(Spearman(t, b) == doctest::Approx(Spearman(a, b)).epsilon(1e-14));
}

TEST_CASE("Spearman rejects mismatched coverage and degenerate input") {
  ScoreVector a = FromValues({1, 2, 3});
  ScoreVector b = FromValues({1, 2});
  CHECK_THROWS_AS(Spearman(a, b), ValidationError);
  b = a;
  b.entries.erase("d002");
  b.entries["zzz"] = 1.0;
  CHECK_THROWS_AS(Spearman(a, b), ValidationError);
  CHECK_THROWS_AS(Spearman(FromValues({1}), FromValues({1})), ValidationError);
  CHECK(std::isnan(Spearman(FromValues({1, 1, 1}), a)));
}

TEST_CASE("shift maps [-1, 1] onto [0, 1] preserving order") {
  const auto s = ShiftScores(FromValues({-1, 0, 0.2, 1}));
  CHECK(s.at("d000") == 0.0);
  CHECK(s.at("d001") == 0.5);
  CHECK(s.at("d002") == doctest::Approx(0.6));
  CHECK(s.at("d003") == 1.0);
  CHECK_THROWS_AS(ShiftScores(FromValues({1.5})), ValidationError);
  std::mt19937_64 rng(3);
  const auto r = Random(40, rng);
  CHECK(Spearman(ShiftScores(r), r) == doctest::Approx(1.0));
}

TEST_CASE("unbounded scores are scaled into range before shifting") {
  const auto b = BoundScores(FromValues({-4, 2}));
  CHECK(b.at("d000") == -1.0);
  CHECK(b.at("d001") == 0.5);
  const auto same = FromValues({0.3, -0.9});
  CHECK(BoundScores(same).entries == same.entries);
}

TEST_CASE("MRD of a perfect ranking is zero") {
  std::mt19937_64 rng(4);
  const auto g = Random(37, rng);
  for (double v : MrdSegments(g, g)) CHECK(v == 0.0);
}

TEST_CASE("MRD of a full reversal in one segment is one half") {
  std::vector<double> up, down;
  for (int i = 0; i < 10; ++i) {
    up.push_back(i);
    down.push_back(-i);
  }
  const auto m = MrdSegments(FromValues(down), FromValues(up), 1);
  REQUIRE(m.size() == 1);
  CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("MRD matches a brute-force position oracle") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 10 + trial;
    const auto gold = Random(n, rng, trial % 3 ? 0 : 6);
    const auto pred = Random(n, rng, trial % 4 ? 0 : 5);
    const auto fast = MrdSegments(pred, gold, 10);
    const auto slow = oracle::BruteMrd(pred, gold, 10);
    REQUIRE(fast.size() == 10);
    for (int s = 0; s < 10; ++s) {
      CHECK(std::abs(fast[s] - slow[s]) < 1e-12);
      CHECK(fast[s] >= 0.0);
    }
  }
}

TEST_CASE("MRD is invariant to a constant offset") {
  std::mt19937_64 rng(6);
  const auto gold = Random(25, rng), pred = Random(25, rng);
  auto moved = pred;
  for (auto& [id, v] : moved.entries) v += 0.25;
  CHECK(MrdSegments(moved, gold) == MrdSegments(pred, gold));
}

TEST_CASE("MRD needs enough documents and equal coverage") {
  CHECK_THROWS_AS(MrdSegments(FromValues({1, 2}), FromValues({1, 2}), 10),
                  ValidationError);
  CHECK_THROWS_AS(MrdSegments(FromValues({1, 2, 3}), FromValues({1, 2}), 1),
                  ValidationError);
}

TEST_CASE("reports round-trip and are internally consistent") {
  std::mt19937_64 rng(7);
  const auto gold = Random(33, rng), pred = Random(33, rng);
  const auto report = Evaluate(pred, gold, {{"model", "gppl@se"}, {"seed", "3"}});
  CHECK(report.n_test == 33);
  CHECK(report.mrd_per_segment.size() == 10);
  CHECK(report.scatter.size() == 33);
  std::int64_t total = 0;
  for (auto c : report.histogram) total += c;
  CHECK(total == report.n_test);
  CHECK(report.histogram.size() == static_cast<std::size_t>(kHistogramBins));

  std::stringstream buf;
  WriteReport(buf, report);
  CHECK(ParseReport(buf, "mem") == report);

  std::stringstream truncated(buf.str().substr(0, buf.str().size() / 2));
  CHECK_THROWS_AS(ParseReport(truncated, "mem"), ParseError);
}

TEST_CASE("histogram places the value one in the last bin") {
  const auto h = ScoreHistogram(FromValues({1.0, -1.0, 0.0}));
  CHECK(h.front() == 1);
  CHECK(h[kHistogramBins / 2] == 1);
  CHECK(h.back() == 1);
}

TEST_CASE("MeanStd uses the sample standard deviation") {
  const auto [m, s] = MeanStd({1.0, 2.0, 3.0});
  CHECK(m == 2.0);
  CHECK(s == 1.0);
  CHECK(MeanStd({4.0}).second == 0.0);
}

}  // namespace
}  // namespace prefrank
