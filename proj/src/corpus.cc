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

#include "prefrank/corpus.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "prefrank/binary_io.h"
#include "prefrank/seeds.h"

namespace prefrank {

namespace {

constexpr char kFeatureMagic[] = "PRFKFEAT";
constexpr std::uint32_t kFeatureVersion = 1;

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

std::string_view StripCr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool ParseDouble(std::string_view s, double* out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

template <typename Int>
bool ParseInt(std::string_view s, Int* out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, *out);
  return ec == std::errc() && ptr == end;
}

std::ifstream OpenOrThrow(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("corpus", "cannot open '" + path + "'");
  return in;
}

std::string FormatDouble(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Parses "key=value" tokens of a header line.
std::map<std::string, std::string> HeaderFields(std::string_view line) {
  std::map<std::string, std::string> out;
  std::istringstream ss{std::string(line)};
  std::string token;
  while (ss >> token) {
    const auto eq = token.find('=');
    if (eq != std::string::npos)
      out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

FeatureMatrix ReadFeaturesBinary(std::istream& in, const std::string& source) {
  BinaryReader r(in, source);
  r.ReadHeader(kFeatureMagic, kFeatureVersion);
  const std::uint64_t n = r.ReadU64();
  const std::uint64_t dim = r.ReadU64();
  const std::uint64_t focus_dim = r.ReadU64();
  const bool has_focus = r.ReadBool();
  std::vector<DocId> ids(n);
  for (auto& id : ids) id = r.ReadString();
  Eigen::MatrixXd rows = r.ReadMatrix();
  std::optional<Eigen::MatrixXd> focus;
  if (has_focus) focus = r.ReadMatrix();
  if (static_cast<std::uint64_t>(rows.cols()) != dim ||
      (focus && static_cast<std::uint64_t>(focus->cols()) != focus_dim)) {
    throw Error("corpus", source + ": binary feature header disagrees with "
                                   "stored matrix shape");
  }
  return FeatureMatrix(std::move(ids), std::move(rows), std::move(focus));
}

}  // namespace

std::vector<PairLabel> ParsePairs(std::istream& in, const std::string& source,
                                  PairFormat format) {
  std::vector<PairLabel> raw;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (!saw_header && line_no == 1) {
        saw_header = true;
        const bool pairs_header = view.starts_with("# pairs v1");
        const bool tuples_header = view.starts_with("# tuples v1");
        if (format == PairFormat::kPairs && !pairs_header) {
          throw ParseError(source, line_no, "expected '# pairs v1' header");
        }
        if (format == PairFormat::kTuples && pairs_header) {
          throw ParseError(source, line_no,
                           "pair file given where tuples were expected");
        }
        (void)tuples_header;
      }
      continue;
    }
    if (format == PairFormat::kPairs && !saw_header) {
      throw ParseError(source, line_no, "missing '# pairs v1' header");
    }
    const auto fields = SplitTabs(view);
    if (format == PairFormat::kPairs) {
      if (fields.size() != 2 && fields.size() != 3) {
        throw ParseError(source, line_no,
                         "expected winner<TAB>loser[<TAB>count], got " +
                             std::to_string(fields.size()) + " fields");
      }
      PairLabel p{std::string(fields[0]), std::string(fields[1]), 1};
      if (p.winner_id.empty() || p.loser_id.empty()) {
        throw ParseError(source, line_no, "empty document id");
      }
      if (fields.size() == 3 && (!ParseInt(fields[2], &p.count) || p.count < 1)) {
        throw ParseError(source, line_no,
                         "count must be a positive integer, got '" +
                             std::string(fields[2]) + "'");
      }
      if (p.winner_id == p.loser_id) {
        throw ParseError(source, line_no,
                         "winner and loser are the same document '" +
                             p.winner_id + "'");
      }
      raw.push_back(std::move(p));
    } else {
      if (fields.size() != 6) {
        throw ParseError(source, line_no,
                         "expected m1..m4<TAB>best<TAB>worst, got " +
                             std::to_string(fields.size()) + " fields");
      }
      TupleLabel t;
      for (int i = 0; i < 4; ++i) t.member_ids.emplace_back(fields[i]);
      t.best_id = std::string(fields[4]);
      t.worst_id = std::string(fields[5]);
      try {
        raw.push_back(TupleToPair(t));
      } catch (const ValidationError& e) {
        throw ValidationError("corpus", source + ":" + std::to_string(line_no) +
                                            ": " + e.what());
      }
    }
  }
  return MergePairs(raw);
}

std::vector<PairLabel> LoadPairs(const std::string& path, PairFormat format) {
  std::ifstream in = OpenOrThrow(path);
  return ParsePairs(in, path, format);
}

void SavePairs(const std::string& path, const std::vector<PairLabel>& pairs) {
  std::ofstream out(path);
  if (!out) throw Error("corpus", "cannot write '" + path + "'");
  out << "# pairs v1\n";
  for (const auto& p : pairs) {
    out << p.winner_id << '\t' << p.loser_id << '\t' << p.count << '\n';
  }
  if (!out) throw Error("corpus", "write failed for '" + path + "'");
}

std::vector<PairLabel> MergePairs(const std::vector<PairLabel>& pairs) {
  std::vector<PairLabel> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& p : pairs) {
    auto [it, inserted] =
        slot.emplace(std::make_pair(p.winner_id, p.loser_id), out.size());
    if (inserted) {
      out.push_back(p);
    } else {
      out[it->second].count += p.count;
    }
  }
  return out;
}

PairLabel TupleToPair(const TupleLabel& tuple) {
  auto is_member = [&](const DocId& id) {
    return std::find(tuple.member_ids.begin(), tuple.member_ids.end(), id) !=
           tuple.member_ids.end();
  };
  if (tuple.best_id == tuple.worst_id) {
    throw ValidationError("corpus", "tuple best and worst are both '" +
                                        tuple.best_id + "'");
  }
  if (!is_member(tuple.best_id) || !is_member(tuple.worst_id)) {
    throw ValidationError("corpus", "tuple best/worst must be tuple members");
  }
  return PairLabel{tuple.best_id, tuple.worst_id, 1};
}

std::int64_t TotalCount(const std::vector<PairLabel>& pairs) {
  std::int64_t total = 0;
  for (const auto& p : pairs) total += p.count;
  return total;
}

std::vector<DocId> PairDocIds(const std::vector<PairLabel>& pairs) {
  std::set<DocId> ids;
  for (const auto& p : pairs) {
    ids.insert(p.winner_id);
    ids.insert(p.loser_id);
  }
  return {ids.begin(), ids.end()};
}

void RequireFeatureCoverage(const std::vector<PairLabel>& pairs,
                            const FeatureMatrix& features) {
  for (const auto& p : pairs) {
    for (const DocId* id : {&p.winner_id, &p.loser_id}) {
      if (!features.Contains(*id)) {
        throw ValidationError("corpus", "document '" + *id +
                                            "' appears in pairs but has no "
                                            "feature row");
      }
    }
  }
}

FeatureMatrix ParseFeatures(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) {
    throw ParseError(source, 1, "empty feature file");
  }
  ++line_no;
  const std::string_view header = StripCr(line);
  if (!header.starts_with("# features v1")) {
    throw ParseError(source, line_no, "expected '# features v1' header");
  }
  const auto fields = HeaderFields(header);
  std::size_t dim = 0;
  std::size_t focus_dim = 0;
  bool has_focus = false;
  if (auto it = fields.find("dim");
      it == fields.end() || !ParseInt(std::string_view(it->second), &dim) ||
      dim == 0) {
    throw ParseError(source, line_no, "header must declare dim=<positive>");
  }
  if (auto it = fields.find("focus_dim"); it != fields.end()) {
    if (!ParseInt(std::string_view(it->second), &focus_dim)) {
      throw ParseError(source, line_no, "bad focus_dim");
    }
    has_focus = focus_dim > 0;
  }

  std::vector<DocId> ids;
  std::vector<double> values;
  const std::size_t width = dim + focus_dim;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cols = SplitTabs(view);
    const std::string id(cols[0]);
    if (cols.size() - 1 != width) {
      throw ParseError(source, line_no,
                       "row for id '" + id + "' has " +
                           std::to_string(cols.size() - 1) +
                           " values, expected " + std::to_string(width));
    }
    for (std::size_t j = 1; j < cols.size(); ++j) {
      double v;
      if (!ParseDouble(cols[j], &v)) {
        throw ParseError(source, line_no,
                         "bad number '" + std::string(cols[j]) +
                             "' for id '" + id + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(source, line_no,
                         "non-finite value for id '" + id + "'");
      }
      values.push_back(v);
    }
    ids.push_back(id);
  }

  const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd rows(n, dim);
  std::optional<Eigen::MatrixXd> focus;
  if (has_focus) focus.emplace(n, focus_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* row = values.data() + i * width;
    for (std::size_t j = 0; j < dim; ++j) rows(i, j) = row[j];
    for (std::size_t j = 0; j < focus_dim; ++j) (*focus)(i, j) = row[dim + j];
  }
  return FeatureMatrix(std::move(ids), std::move(rows), std::move(focus));
}

FeatureMatrix LoadFeatures(const std::string& path) {
  if (PeekMagic(path) == kFeatureMagic) {
    std::ifstream in = OpenOrThrow(path, /*binary=*/true);
    return ReadFeaturesBinary(in, path);
  }
  std::ifstream in = OpenOrThrow(path);
  return ParseFeatures(in, path);
}

void WriteFeaturesText(std::ostream& out, const FeatureMatrix& features) {
  out << "# features v1 dim=" << features.dim()
      << " focus_dim=" << features.focus_dim() << '\n';
  const auto& rows = features.rows();
  for (std::size_t i = 0; i < features.size(); ++i) {
    out << features.doc_ids()[i];
    for (Eigen::Index j = 0; j < rows.cols(); ++j)
      out << '\t' << FormatDouble(rows(i, j));
    if (features.has_focus()) {
      const auto& focus = *features.focus_rows();
      for (Eigen::Index j = 0; j < focus.cols(); ++j)
        out << '\t' << FormatDouble(focus(i, j));
    }
    out << '\n';
  }
}

void SaveFeatures(const std::string& path, const FeatureMatrix& features,
                  FeatureFormat format) {
  std::ofstream out(path, format == FeatureFormat::kBinary ? std::ios::binary
                                                           : std::ios::out);
  if (!out) throw Error("corpus", "cannot write '" + path + "'");
  if (format == FeatureFormat::kText) {
    WriteFeaturesText(out, features);
  } else {
    BinaryWriter w(out);
    w.WriteHeader(kFeatureMagic, kFeatureVersion);
    w.WriteU64(features.size());
    w.WriteU64(features.dim());
    w.WriteU64(features.focus_dim());
    w.WriteBool(features.has_focus());
    for (const auto& id : features.doc_ids()) w.WriteString(id);
    w.WriteMatrix(features.rows());
    if (features.has_focus()) w.WriteMatrix(*features.focus_rows());
  }
  if (!out) throw Error("corpus", "write failed for '" + path + "'");
}

AuxTable LoadAuxTable(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  AuxTable aux;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cols = SplitTabs(view);
    if (first) {
      aux.width = cols.size() - 1;
      first = false;
    } else if (cols.size() - 1 != aux.width) {
      throw ParseError(path, line_no, "inconsistent aux row width");
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(aux.width));
    for (std::size_t j = 0; j < aux.width; ++j) {
      if (!ParseDouble(cols[j + 1], &v[j]) || !std::isfinite(v[j])) {
        throw ParseError(path, line_no, "bad aux value");
      }
    }
    aux.rows[std::string(cols[0])] = std::move(v);
  }
  return aux;
}

FeatureMatrix AppendFeatureColumns(const FeatureMatrix& features,
                                   const AuxTable& aux) {
  if (aux.width == 0) return features;
  std::vector<DocId> missing;
  for (const auto& id : features.doc_ids()) {
    if (!aux.rows.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ValidationError("corpus", "aux table missing ids: " + list);
  }
  const Eigen::Index dim = features.rows().cols();
  Eigen::MatrixXd rows(features.rows().rows(),
                       dim + static_cast<Eigen::Index>(aux.width));
  rows.leftCols(dim) = features.rows();
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& extra = aux.rows.at(features.doc_ids()[i]);
    if (static_cast<std::size_t>(extra.size()) != aux.width) {
      throw ValidationError("corpus", "aux row width mismatch for id '" +
                                          features.doc_ids()[i] + "'");
    }
    rows.row(i).tail(aux.width) = extra.transpose();
  }
  return FeatureMatrix(features.doc_ids(), std::move(rows),
                       features.focus_rows());
}

SplitResult SubsampleSplit(const std::vector<DocId>& ids,
                           const std::vector<PairLabel>& pairs,
                           double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError("corpus", "split fraction must be in (0, 1], got " +
                                        std::to_string(fraction));
  }
  std::vector<DocId> pool(ids);
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  Rng rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(pool.size())));

  SplitResult result;
  result.split.fraction = fraction;
  result.split.seed = seed;
  result.split.train_ids.assign(pool.begin(), pool.begin() + n_train);
  result.split.test_ids.assign(pool.begin() + n_train, pool.end());
  std::sort(result.split.train_ids.begin(), result.split.train_ids.end());
  std::sort(result.split.test_ids.begin(), result.split.test_ids.end());
  result.train_pairs = PairsWithin(pairs, result.split.train_ids);
  return result;
}

std::vector<PairLabel> PairsWithin(const std::vector<PairLabel>& pairs,
                                   const std::vector<DocId>& ids) {
  const std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<PairLabel> out;
  for (const auto& p : pairs) {
    if (keep.count(p.winner_id) && keep.count(p.loser_id)) out.push_back(p);
  }
  return out;
}

std::vector<PairLabel> PairsTouching(const std::vector<PairLabel>& pairs,
                                     const std::vector<DocId>& ids) {
  const std::unordered_set<std::string> keep(ids.begin(), ids.end());
  std::vector<PairLabel> out;
  for (const auto& p : pairs) {
    if (keep.count(p.winner_id) || keep.count(p.loser_id)) out.push_back(p);
  }
  return out;
}

std::vector<Document> LoadDocuments(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty() || view.front() == '#') continue;
    const auto cols = SplitTabs(view);
    if (cols.size() < 1 || cols.size() > 3 || cols[0].empty()) {
      throw ParseError(path, line_no, "expected id<TAB>text[<TAB>focus]");
    }
    Document doc{std::string(cols[0]), std::nullopt, std::nullopt};
    if (cols.size() >= 2) doc.text = std::string(cols[1]);
    if (cols.size() == 3 && !cols[2].empty()) {
      std::size_t focus;
      if (!ParseInt(cols[2], &focus)) {
        throw ParseError(path, line_no, "bad focus index");
      }
      if (doc.text) {
        std::istringstream tokens(*doc.text);
        std::size_t n_tokens = 0;
        std::string tok;
        while (tokens >> tok) ++n_tokens;
        if (focus >= n_tokens) {
          throw ParseError(path, line_no,
                           "focus index " + std::to_string(focus) +
                               " outside a " + std::to_string(n_tokens) +
                               "-token text");
        }
      }
      doc.focus_index = focus;
    }
    if (!seen.insert(doc.id).second) {
      throw ParseError(path, line_no, "duplicate document id '" + doc.id + "'");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

ScoreVector LoadScores(const std::string& path) {
  std::ifstream in = OpenOrThrow(path);
  ScoreVector scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = StripCr(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (view.starts_with("# scores v1 ")) {
        const std::string_view name = view.substr(12);
        for (auto p : {Provenance::kBws, Provenance::kGppl,
                       Provenance::kDirectRanker, Provenance::kStacked}) {
          if (name == ProvenanceName(p)) scores.provenance = p;
        }
      }
      continue;
    }
    const auto cols = SplitTabs(view);
    double v;
    if (cols.size() != 2 || !ParseDouble(cols[1], &v)) {
      throw ParseError(path, line_no, "expected id<TAB>score");
    }
    if (!scores.entries.emplace(std::string(cols[0]), v).second) {
      throw ParseError(path, line_no,
                       "duplicate id '" + std::string(cols[0]) + "'");
    }
  }
  return scores;
}

void SaveScores(const std::string& path, const ScoreVector& scores) {
  std::ofstream out(path);
  if (!out) throw Error("corpus", "cannot write '" + path + "'");
  out << "# scores v1 " << ProvenanceName(scores.provenance) << '\n';
  for (const auto& [id, v] : scores.entries) {
    out << id << '\t' << FormatDouble(v) << '\n';
  }
  if (!out) throw Error("corpus", "write failed for '" + path + "'");
}

}  // namespace prefrank
