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

#include "prefrank/types.h"

#include <cmath>
#include <utility>

namespace prefrank {

ParseError::ParseError(const std::string& source, std::size_t line,
                       const std::string& message)
    : Error("corpus",
            source + ":" + std::to_string(line) + ": " + message),
      line_(line) {}

FeatureMatrix::FeatureMatrix(std::vector<DocId> doc_ids, Eigen::MatrixXd rows,
                             std::optional<Eigen::MatrixXd> focus_rows)
    : doc_ids_(std::move(doc_ids)),
      rows_(std::move(rows)),
      focus_rows_(std::move(focus_rows)) {
  if (static_cast<std::size_t>(rows_.rows()) != doc_ids_.size()) {
    throw ValidationError("corpus", "feature matrix has " +
                                        std::to_string(rows_.rows()) +
                                        " rows for " +
                                        std::to_string(doc_ids_.size()) +
                                        " ids");
  }
  if (!rows_.allFinite()) {
    for (Eigen::Index i = 0; i < rows_.rows(); ++i) {
      if (!rows_.row(i).allFinite()) {
        throw ValidationError("corpus", "non-finite feature value for id '" +
                                            doc_ids_[i] + "'");
      }
    }
  }
  if (focus_rows_) {
    if (static_cast<std::size_t>(focus_rows_->rows()) != doc_ids_.size()) {
      throw ValidationError("corpus",
                            "focus rows do not cover the same ids as rows");
    }
    for (Eigen::Index i = 0; i < focus_rows_->rows(); ++i) {
      if (!focus_rows_->row(i).allFinite()) {
        throw ValidationError("corpus", "non-finite focus value for id '" +
                                            doc_ids_[i] + "'");
      }
    }
  }
  index_.reserve(doc_ids_.size());
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    if (!index_.emplace(doc_ids_[i], i).second) {
      throw ValidationError("corpus", "duplicate document id '" +
                                          doc_ids_[i] + "'");
    }
  }
}

bool FeatureMatrix::Contains(std::string_view id) const {
  return index_.count(std::string(id)) > 0;
}

std::size_t FeatureMatrix::IndexOf(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw ValidationError("corpus",
                          "no feature row for id '" + std::string(id) + "'");
  }
  return it->second;
}

FeatureMatrix FeatureMatrix::Select(const std::vector<DocId>& ids) const {
  Eigen::MatrixXd rows(ids.size(), rows_.cols());
  std::optional<Eigen::MatrixXd> focus;
  if (focus_rows_) focus.emplace(ids.size(), focus_rows_->cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t src = IndexOf(ids[i]);
    rows.row(i) = rows_.row(src);
    if (focus) focus->row(i) = focus_rows_->row(src);
  }
  return FeatureMatrix(ids, std::move(rows), std::move(focus));
}

bool FeatureMatrix::operator==(const FeatureMatrix& other) const {
  if (doc_ids_ != other.doc_ids_) return false;
  if (rows_.rows() != other.rows_.rows() || rows_.cols() != other.rows_.cols())
    return false;
  if (rows_ != other.rows_) return false;
  if (focus_rows_.has_value() != other.focus_rows_.has_value()) return false;
  if (focus_rows_) {
    if (focus_rows_->cols() != other.focus_rows_->cols()) return false;
    if (*focus_rows_ != *other.focus_rows_) return false;
  }
  return true;
}

std::string_view ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kBws:
      return "bws";
    case Provenance::kGppl:
      return "gppl";
    case Provenance::kDirectRanker:
      return "directranker";
    case Provenance::kStacked:
      return "stacked";
    case Provenance::kOther:
      break;
  }
  return "other";
}

double ScoreVector::at(const DocId& id) const {
  auto it = entries.find(id);
  if (it == entries.end()) {
    throw ValidationError("scores", "no score for id '" + id + "'");
  }
  return it->second;
}

std::vector<DocId> ScoreVector::ids() const {
  std::vector<DocId> out;
  out.reserve(entries.size());
  for (const auto& [id, _] : entries) out.push_back(id);
  return out;
}

ScoreVector ScoreVector::Restrict(const std::vector<DocId>& ids) const {
  ScoreVector out;
  out.provenance = provenance;
  for (const auto& id : ids) out.entries.emplace(id, at(id));
  return out;
}

}  // namespace prefrank
