// Deterministic file emitters. Every float is printed with %.17g (exact
// round-trip), keys are written in a fixed order, and line endings are LF,
// so identical configurations produce byte-identical files regardless of
// thread count or platform.

#ifndef KAAP_SERIALIZE_HPP
#define KAAP_SERIALIZE_HPP

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "kaap/engine.hpp"
#include "kaap/errors.hpp"
#include "kaap/fusion.hpp"
#include "kaap/kselect.hpp"
#include "kaap/labelfuse.hpp"
#include "kaap/tensor.hpp"

namespace kaap {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Streaming JSON writer with explicit structure control; commas and key
/// order are fully caller-determined, which keeps output stable.
class JsonWriter {
 public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    separate();
    write_string(k);
    os_ << ":";
    pending_value_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return primitive(fmt_double(v)); }
  JsonWriter& value(int v) { return primitive(std::to_string(v)); }
  JsonWriter& value(std::size_t v) { return primitive(std::to_string(v)); }
  JsonWriter& value(bool v) { return primitive(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) {
    separate();
    write_string(v);
    return *this;
  }
  JsonWriter& value(const char* v) { return value(std::string(v)); }

  template <typename T>
  JsonWriter& number_array(const std::vector<T>& values) {
    begin_array();
    for (const T& v : values) value(v);
    return end_array();
  }

 private:
  JsonWriter& open(char c) {
    separate();
    os_ << c;
    needs_comma_.push_back(false);
    return *this;
  }

  JsonWriter& close(char c) {
    os_ << c;
    needs_comma_.pop_back();
    mark_written();
    return *this;
  }

  JsonWriter& primitive(const std::string& text) {
    separate();
    os_ << text;
    return *this;
  }

  void separate() {
    if (pending_value_) {
      pending_value_ = false;
      return;
    }
    if (!needs_comma_.empty() && needs_comma_.back()) os_ << ",";
    if (!needs_comma_.empty()) needs_comma_.back() = true;
  }

  void mark_written() {
    if (pending_value_) pending_value_ = false;
  }

  void write_string(const std::string& s) {
    os_ << '"';
    for (char c : s) {
      switch (c) {
        case '"': os_ << "\\\""; break;
        case '\\': os_ << "\\\\"; break;
        case '\n': os_ << "\\n"; break;
        case '\t': os_ << "\\t"; break;
        case '\r': os_ << "\\r"; break;
        default: os_ << c;
      }
    }
    os_ << '"';
    mark_written();
  }

  std::ostream& os_;
  std::vector<bool> needs_comma_;
  bool pending_value_ = false;
};

inline void write_tensor_record(JsonWriter& w, const Tensor& t) {
  w.begin_object();
  w.key("shape").number_array(t.shape);
  w.key("data").number_array(t.data);
  w.end_object();
}

// ---------------------------------------------------------------------------
// Attribution report
// ---------------------------------------------------------------------------

struct AttributionReport {
  int target_class = 0;
  ModalityImportance importance;
  AttributionMap image_map;
  AttributionMap speech_map;
  AttributionMap text_map;
};

inline void write_attribution_report(std::ostream& os, const AttributionReport& report) {
  JsonWriter w(os);
  w.begin_object();
  w.key("target_class").value(report.target_class);
  w.key("modality_importance").begin_object();
  w.key("image").value(report.importance.image);
  w.key("speech").value(report.importance.speech);
  w.key("text").value(report.importance.text);
  w.end_object();
  w.key("image_map");
  write_tensor_record(w, Tensor(report.image_map.shape, report.image_map.values));
  w.key("speech_map").number_array(report.speech_map.values);
  w.key("text_map").number_array(report.text_map.values);
  w.key("k").begin_object();
  w.key("image").value(report.image_map.k_used);
  w.key("speech").value(report.speech_map.k_used);
  w.key("text").value(report.text_map.k_used);
  w.end_object();
  w.key("normalized").begin_object();
  w.key("image").value(report.image_map.normalized);
  w.key("speech").value(report.speech_map.normalized);
  w.key("text").value(report.text_map.normalized);
  w.end_object();
  w.end_object();
  os << "\n";
}

// ---------------------------------------------------------------------------
// PGM heatmaps (binary P5, maxval 255, min-max scaled)
// ---------------------------------------------------------------------------

inline void write_pgm(std::ostream& os, std::size_t width, std::size_t height,
                      const std::vector<double>& values) {
  if (values.size() != width * height) throw ShapeError("pgm size mismatch");
  double lo = values.empty() ? 0.0 : values[0];
  double hi = lo;
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  os << "P5\n" << width << " " << height << "\n255\n";
  const double range = hi - lo;
  for (double v : values) {
    unsigned char byte = 0;
    if (range > 0.0) {
      const double scaled = 255.0 * (v - lo) / range;
      byte = static_cast<unsigned char>(scaled < 0.0 ? 0.0 : (scaled > 255.0 ? 255.0 : scaled + 0.5));
    }
    os.put(static_cast<char>(byte));
  }
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

inline void write_dice_curve_csv(std::ostream& os, const DiceCurve& curve) {
  os << "modality,k,dice,selected\n";
  for (const auto& [k, value] : curve.points) {
    os << modality_name(curve.modality) << "," << k << "," << fmt_double(value) << ","
       << (k == curve.selected_k ? 1 : 0) << "\n";
  }
}

inline void write_fused_labels_csv(std::ostream& os, const std::vector<ModalityProbRecord>& records,
                                   const std::vector<FusedLabel>& fused,
                                   const std::vector<bool>& kept_flags) {
  os << prob_csv_header() << ",label,confidence,kept\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const ModalityProbRecord& r = records[i];
    os << r.id;
    for (const ClassProbs* p : {&r.image, &r.speech, &r.text}) {
      for (double v : p->values) os << "," << fmt_double(v);
    }
    os << "," << emotion_name(fused[i].label) << "," << fmt_double(fused[i].confidence) << ","
       << (kept_flags[i] ? 1 : 0) << "\n";
  }
}

inline void write_threshold_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "tau,class,kept_ratio\n";
  for (const SweepRow& row : rows) {
    os << fmt_double(row.tau) << "," << emotion_name(row.cls) << "," << fmt_double(row.kept_ratio)
       << "\n";
  }
}

inline void write_text_map_csv(std::ostream& os, const TokenSeq& tokens,
                               const AttributionMap& map) {
  os << "position,token,value\n";
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    os << i << "," << tokens[i] << "," << fmt_double(map.values[i]) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Training report (JSON lines, one record per epoch)
// ---------------------------------------------------------------------------

inline void write_train_report_jsonl(std::ostream& os, const TrainReport& report) {
  for (const EpochRecord& rec : report.epochs) {
    JsonWriter w(os);
    w.begin_object();
    w.key("epoch").value(rec.epoch);
    w.key("loss").value(rec.train_loss);
    w.key("accuracy").value(rec.train_accuracy);
    w.key("val_loss").value(rec.val_loss);
    w.key("val_accuracy").value(rec.val_accuracy);
    w.key("effective_weights").begin_object();
    for (const auto& [name, weights] : rec.effective_weights) {
      w.key(name).number_array(weights);
    }
    w.end_object();
    w.end_object();
    os << "\n";
  }
}

}  // namespace kaap

#endif  // KAAP_SERIALIZE_HPP
