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

#ifndef PREFRANK_TYPES_H_
#define PREFRANK_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "Eigen/Core"

namespace prefrank {

using DocId = std::string;

// Base class for every error raised by the library. The stage tag names the
// pipeline step that failed ("corpus", "gppl", ...) and is prefixed to the
// message by the CLI.
class Error : public std::runtime_error {
 public:
  Error(std::string stage, const std::string& message)
      : std::runtime_error(message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& message);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

struct Document {
  DocId id;
  std::optional<std::string> text;
  std::optional<std::size_t> focus_index;
};

// One pairwise outcome: `winner_id` was preferred to `loser_id`, `count` times.
struct PairLabel {
  DocId winner_id;
  DocId loser_id;
  std::int64_t count = 1;

  bool operator==(const PairLabel&) const = default;
};

struct TupleLabel {
  std::vector<DocId> member_ids;  // Four members.
  DocId best_id;
  DocId worst_id;
};

// Dense per-document features. Row i of `rows` (and `focus_rows`, if present)
// belongs to doc_ids[i].
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  // Validates shapes, finiteness and id uniqueness; throws ValidationError.
  FeatureMatrix(std::vector<DocId> doc_ids, Eigen::MatrixXd rows,
                std::optional<Eigen::MatrixXd> focus_rows = std::nullopt);

  const std::vector<DocId>& doc_ids() const { return doc_ids_; }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const std::optional<Eigen::MatrixXd>& focus_rows() const {
    return focus_rows_;
  }
  std::size_t size() const { return doc_ids_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(rows_.cols()); }
  std::size_t focus_dim() const {
    return focus_rows_ ? static_cast<std::size_t>(focus_rows_->cols()) : 0;
  }
  bool has_focus() const { return focus_rows_.has_value(); }

  bool Contains(std::string_view id) const;
  // Row index of `id`; throws ValidationError when absent.
  std::size_t IndexOf(std::string_view id) const;
  // New matrix restricted to `ids`, in the given order.
  FeatureMatrix Select(const std::vector<DocId>& ids) const;

  bool operator==(const FeatureMatrix& other) const;

 private:
  std::vector<DocId> doc_ids_;
  Eigen::MatrixXd rows_;
  std::optional<Eigen::MatrixXd> focus_rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class Provenance { kBws, kGppl, kDirectRanker, kStacked, kOther };

std::string_view ProvenanceName(Provenance p);

// Real-valued score per document. Ordered by id so iteration is deterministic.
struct ScoreVector {
  std::map<DocId, double> entries;
  Provenance provenance = Provenance::kOther;

  double at(const DocId& id) const;
  std::size_t size() const { return entries.size(); }
  std::vector<DocId> ids() const;
  ScoreVector Restrict(const std::vector<DocId>& ids) const;
};

struct SplitSpec {
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::vector<DocId> train_ids;  // Sorted.
  std::vector<DocId> test_ids;   // Sorted.

  bool operator==(const SplitSpec&) const = default;
};

}  // namespace prefrank

#endif  // PREFRANK_TYPES_H_
