// Dataset-construction math: averaging per-modality class probabilities into
// a fused label, confidence filtering against per-class maxima, and the
// extended-label remapping.

#ifndef KAAP_LABELFUSE_HPP
#define KAAP_LABELFUSE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/types.hpp"

namespace kaap {

/// One row of per-modality prediction probabilities. Entries are validated
/// to lie in [0,1]; sums are not forced to one so display-rounded sources
/// remain usable.
struct ModalityProbRecord {
  std::string id;
  ClassProbs image;
  ClassProbs speech;
  ClassProbs text;

  void validate() const {
    for (const ClassProbs* p : {&image, &speech, &text}) {
      for (double v : p->values) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
          throw ParseError("record " + id + ": probability outside [0,1]");
        }
      }
    }
  }
};

struct FusedLabel {
  std::string id;
  ClassProbs averaged;
  int label = 0;          // argmax of averaged, ties to the lowest index
  double confidence = 0;  // averaged[label]
};

/// Element-wise mean of the three modality probabilities; the label is the
/// argmax with lowest-index tie-break.
inline FusedLabel fuse_label(const ModalityProbRecord& rec) {
  rec.validate();
  FusedLabel out;
  out.id = rec.id;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out.averaged[c] = (rec.image[c] + rec.speech[c] + rec.text[c]) / 3.0;
  }
  out.label = out.averaged.argmax();
  out.confidence = out.averaged[out.label];
  return out;
}

struct ClassFilterStats {
  std::size_t total = 0;
  std::size_t kept = 0;
  double max_confidence = 0.0;
  bool empty = true;  // class absent from the set; skipped with a note
};

struct FilterResult {
  std::vector<FusedLabel> kept;
  std::vector<bool> kept_flags;  // aligned with the input order
  std::array<ClassFilterStats, kNumClasses> per_class;
};

/// Keeps a record iff its confidence reaches tau times the maximum confidence
/// seen for its class across the whole set. Two passes: class maxima first,
/// then the filter.
inline FilterResult threshold_filter(const std::vector<FusedLabel>& records, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("threshold tau must be in [0, 1]");

  FilterResult result;
  result.kept_flags.assign(records.size(), false);

  for (const FusedLabel& rec : records) {
    ClassFilterStats& stats = result.per_class[rec.label];
    stats.empty = false;
    stats.total += 1;
    stats.max_confidence = std::max(stats.max_confidence, rec.confidence);
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    const FusedLabel& rec = records[i];
    const ClassFilterStats& stats = result.per_class[rec.label];
    if (rec.confidence >= tau * stats.max_confidence) {
      result.kept_flags[i] = true;
      result.kept.push_back(rec);
      result.per_class[rec.label].kept += 1;
    }
  }
  return result;
}

/// One sweep row: share of each class among the records kept at a threshold.
struct SweepRow {
  double tau = 0.0;
  int cls = 0;
  double kept_ratio = 0.0;  // kept in class / total kept at this tau
};

inline std::vector<SweepRow> threshold_sweep(const std::vector<FusedLabel>& records,
                                             const std::vector<double>& taus) {
  std::vector<SweepRow> rows;
  rows.reserve(taus.size() * kNumClasses);
  for (double tau : taus) {
    const FilterResult fr = threshold_filter(records, tau);
    std::size_t total_kept = 0;
    for (const auto& stats : fr.per_class) total_kept += stats.kept;
    for (int c = 0; c < static_cast<int>(kNumClasses); ++c) {
      SweepRow row;
      row.tau = tau;
      row.cls = c;
      row.kept_ratio = total_kept == 0 ? 0.0
                                       : static_cast<double>(fr.per_class[c].kept) /
                                             static_cast<double>(total_kept);
      rows.push_back(row);
    }
  }
  return rows;
}

/// Extended-label remapping: excitement folds into happy, disgust into hate,
/// the four core labels map to themselves.
inline int relabel(const std::string& label) {
  if (label == "angry") return 0;
  if (label == "happy") return 1;
  if (label == "hate") return 2;
  if (label == "sad") return 3;
  if (label == "excitement") return 1;
  if (label == "disgust") return 2;
  throw ConfigError("unknown emotion label: " + label);
}

// ---------------------------------------------------------------------------
// CSV ingestion: id,img_p0..img_p3,sp_p0..sp_p3,txt_p0..txt_p3
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline double parse_prob_cell(const std::string& cell, std::size_t line_no) {
  if (cell.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": missing probability cell");
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad probability '" + cell + "'");
  }
  if (used != cell.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": bad probability '" + cell + "'");
  }
  return v;
}

}  // namespace detail

inline const char* prob_csv_header() {
  return "id,img_p0,img_p1,img_p2,img_p3,sp_p0,sp_p1,sp_p2,sp_p3,txt_p0,txt_p1,txt_p2,txt_p3";
}

/// Strict reader: header must match, every row needs all 13 cells, missing or
/// malformed probabilities are hard errors.
inline std::vector<ModalityProbRecord> read_prob_records_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty probability CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != prob_csv_header()) {
    throw ParseError("probability CSV header mismatch, expected '" +
                     std::string(prob_csv_header()) + "'");
  }

  std::vector<ModalityProbRecord> records;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (cells.size() != 13) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 13 cells, got " +
                       std::to_string(cells.size()));
    }
    ModalityProbRecord rec;
    rec.id = cells[0];
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      rec.image[c] = detail::parse_prob_cell(cells[1 + c], line_no);
      rec.speech[c] = detail::parse_prob_cell(cells[5 + c], line_no);
      rec.text[c] = detail::parse_prob_cell(cells[9 + c], line_no);
    }
    rec.validate();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace kaap

#endif  // KAAP_LABELFUSE_HPP
