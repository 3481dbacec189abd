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

#include "prefrank/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "prefrank/bws.h"

namespace prefrank {

namespace {

void RequireSameCoverage(const ScoreVector& pred, const ScoreVector& gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("eval", "prediction covers " +
                                      std::to_string(pred.size()) +
                                      " ids but gold covers " +
                                      std::to_string(gold.size()));
  }
  auto p = pred.entries.begin();
  for (auto g = gold.entries.begin(); g != gold.entries.end(); ++g, ++p) {
    if (p->first != g->first) {
      throw ValidationError("eval", "id coverage mismatch at '" + g->first +
                                        "' vs '" + p->first + "'");
    }
  }
}

std::string Num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double ToDouble(const std::string& s, const std::string& source,
                std::size_t line) {
  double v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line, "bad number '" + s + "'");
  }
  return v;
}

std::int64_t ToInt(const std::string& s, const std::string& source,
                   std::size_t line) {
  std::int64_t v;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(source, line, "bad integer '" + s + "'");
  }
  return v;
}

std::vector<std::string> Tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

}  // namespace

std::vector<double> FractionalRanks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double Spearman(const ScoreVector& pred, const ScoreVector& gold) {
  RequireSameCoverage(pred, gold);
  if (gold.size() < 2) {
    throw ValidationError("eval", "Spearman needs at least two documents");
  }
  std::vector<double> p, g;
  p.reserve(pred.size());
  g.reserve(gold.size());
  for (const auto& [id, v] : pred.entries) p.push_back(v);
  for (const auto& [id, v] : gold.entries) g.push_back(v);
  const auto rp = FractionalRanks(p);
  const auto rg = FractionalRanks(g);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vg = 0.0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    cov += (rp[i] - mp) * (rg[i] - mg);
    vp += (rp[i] - mp) * (rp[i] - mp);
    vg += (rg[i] - mg) * (rg[i] - mg);
  }
  if (vp == 0.0 || vg == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(vp * vg);
}

ScoreVector ShiftScores(const ScoreVector& scores) {
  ScoreVector out;
  out.provenance = scores.provenance;
  for (const auto& [id, r] : scores.entries) {
    if (!(r >= -1.0 && r <= 1.0)) {
      throw ValidationError("eval", "score " + Num(r) + " of '" + id +
                                        "' lies outside [-1, 1]");
    }
    out.entries.emplace(id, (r + 1.0) * 0.5);
  }
  return out;
}

ScoreVector BoundScores(const ScoreVector& scores) {
  double max_abs = 0.0;
  for (const auto& [id, v] : scores.entries) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs <= 1.0) return scores;
  ScoreVector out = scores;
  for (auto& [id, v] : out.entries) v /= max_abs;
  return out;
}

std::vector<double> MrdSegments(const ScoreVector& pred,
                                const ScoreVector& gold, int n_segments) {
  RequireSameCoverage(pred, gold);
  if (n_segments < 1) throw ValidationError("eval", "n_segments must be >= 1");
  const std::size_t n = gold.size();
  if (n < static_cast<std::size_t>(n_segments)) {
    throw ValidationError("eval", "need at least " + std::to_string(n_segments) +
                                      " test documents, got " +
                                      std::to_string(n));
  }
  const auto gold_order = RankOf(gold);
  const auto pred_order = RankOf(pred);
  std::unordered_map<std::string, std::size_t> pred_pos;
  for (std::size_t i = 0; i < n; ++i) pred_pos.emplace(pred_order[i], i);

  std::vector<double> out(n_segments, 0.0);
  const std::size_t base = n / n_segments;
  const std::size_t extra = n % n_segments;
  std::size_t pos = 0;
  for (int s = 0; s < n_segments; ++s) {
    const std::size_t size = base + (static_cast<std::size_t>(s) < extra ? 1 : 0);
    double total = 0.0;
    for (std::size_t k = 0; k < size; ++k, ++pos) {
      const double moved = static_cast<double>(pred_pos.at(gold_order[pos])) -
                           static_cast<double>(pos);
      total += std::abs(moved);
    }
    out[s] = total / (static_cast<double>(n) * static_cast<double>(size));
  }
  return out;
}

std::vector<std::int64_t> ScoreHistogram(const ScoreVector& scores) {
  std::vector<std::int64_t> bins(kHistogramBins, 0);
  for (const auto& [id, v] : ShiftScores(BoundScores(scores)).entries) {
    const int b = std::min(kHistogramBins - 1,
                           static_cast<int>(std::floor(v * kHistogramBins)));
    ++bins[std::max(b, 0)];
  }
  return bins;
}

EvalReport Evaluate(const ScoreVector& pred, const ScoreVector& gold,
                    std::map<std::string, std::string> metadata) {
  EvalReport report;
  report.spearman = Spearman(pred, gold);
  report.mrd_per_segment = MrdSegments(pred, gold, 10);
  report.n_test = static_cast<std::int64_t>(gold.size());
  report.histogram = ScoreHistogram(pred);
  report.metadata = std::move(metadata);
  for (const auto& [id, g] : gold.entries) {
    report.scatter.emplace_back(id, pred.at(id), g);
  }
  return report;
}

void WriteReport(std::ostream& out, const EvalReport& report) {
  out << "# eval-report v1\n";
  for (const auto& [k, v] : report.metadata) {
    if (k.find_first_of("\t\n") != std::string::npos ||
        v.find_first_of("\t\n") != std::string::npos) {
      throw ValidationError("eval", "metadata may not contain tabs or newlines");
    }
    out << "meta\t" << k << '\t' << v << '\n';
  }
  out << "spearman\t" << Num(report.spearman) << '\n';
  out << "n_test\t" << report.n_test << '\n';
  out << "[histogram]\nbin_low\tbin_high\tcount\n";
  const double width = 1.0 / static_cast<double>(report.histogram.size());
  for (std::size_t b = 0; b < report.histogram.size(); ++b) {
    out << Num(width * b) << '\t' << Num(width * (b + 1)) << '\t'
        << report.histogram[b] << '\n';
  }
  out << "[scatter]\nid\tpred\tgold\n";
  for (const auto& [id, p, g] : report.scatter) {
    out << id << '\t' << Num(p) << '\t' << Num(g) << '\n';
  }
  out << "[mrd]\nsegment\tmrd\n";
  for (std::size_t s = 0; s < report.mrd_per_segment.size(); ++s) {
    out << s << '\t' << Num(report.mrd_per_segment[s]) << '\n';
  }
  out << "[end]\n";
}

EvalReport ParseReport(std::istream& in, const std::string& source) {
  EvalReport report;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line != "# eval-report v1") {
    throw ParseError(source, 1, "expected '# eval-report v1' header");
  }
  ++line_no;
  std::string block;
  bool skip_columns = false;
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '[') {
      block = line;
      skip_columns = block != "[end]";
      if (block == "[end]") ended = true;
      continue;
    }
    if (skip_columns) {
      skip_columns = false;
      continue;
    }
    const auto f = Tabs(line);
    if (block.empty()) {
      if (f[0] == "meta" && f.size() == 3) {
        report.metadata[f[1]] = f[2];
      } else if (f[0] == "spearman" && f.size() == 2) {
        report.spearman = ToDouble(f[1], source, line_no);
      } else if (f[0] == "n_test" && f.size() == 2) {
        report.n_test = ToInt(f[1], source, line_no);
      } else {
        throw ParseError(source, line_no, "unknown field '" + f[0] + "'");
      }
    } else if (block == "[histogram]" && f.size() == 3) {
      report.histogram.push_back(ToInt(f[2], source, line_no));
    } else if (block == "[scatter]" && f.size() == 3) {
      report.scatter.emplace_back(f[0], ToDouble(f[1], source, line_no),
                                  ToDouble(f[2], source, line_no));
    } else if (block == "[mrd]" && f.size() == 2) {
      report.mrd_per_segment.push_back(ToDouble(f[1], source, line_no));
    } else {
      throw ParseError(source, line_no, "malformed row in " + block);
    }
  }
  if (!ended) throw ParseError(source, line_no, "truncated report");
  return report;
}

void EmitReport(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("eval", "cannot write '" + path + "'");
  WriteReport(out, report);
  if (!out) throw Error("eval", "write failed for '" + path + "'");
}

EvalReport LoadReport(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("eval", "cannot open '" + path + "'");
  return ParseReport(in, path);
}

std::pair<double, double> MeanStd(const std::vector<double>& values) {
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace prefrank
