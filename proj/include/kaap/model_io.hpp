// Model and sample documents. A model file is a JSON object
//   {"kind": ..., "config": {...}, "weights": [tensor records]}
// with tensor record {"shape":[...], "data":[row-major doubles]}. Samples are
// {"image": record, "speech": record, "text": [token ids], "label": int?}.
// Reading goes through nlohmann::json; writing uses the deterministic writer.

#ifndef KAAP_MODEL_IO_HPP
#define KAAP_MODEL_IO_HPP

#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kaap/errors.hpp"
#include "kaap/fusion.hpp"
#include "kaap/predictor.hpp"
#include "kaap/serialize.hpp"

namespace kaap {

namespace io_detail {

using nlohmann::json;

inline json parse_stream(std::istream& is, const char* what) {
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

inline Tensor tensor_from_json(const json& j, const char* what) {
  try {
    std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return Tensor(std::move(shape), std::move(data));
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": bad tensor record: " + e.what());
  } catch (const ShapeError& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

inline ClassProbs class_probs_from_tensor(const Tensor& t, const char* what) {
  if (t.size() != kNumClasses) {
    throw ParseError(std::string(what) + ": expected 4 entries, got " + std::to_string(t.size()));
  }
  ClassProbs p;
  for (std::size_t c = 0; c < kNumClasses; ++c) p[c] = t.data[c];
  return p;
}

inline std::vector<std::size_t> shape_from_json(const json& j, const char* what) {
  try {
    return j.get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

inline MultimodalSample read_sample_json(std::istream& is) {
  using io_detail::json;
  const json doc = io_detail::parse_stream(is, "sample");
  MultimodalSample s;
  try {
    s.image = io_detail::tensor_from_json(doc.at("image"), "sample image");
    s.speech = io_detail::tensor_from_json(doc.at("speech"), "sample speech");
    s.text = doc.at("text").get<TokenSeq>();
    if (doc.contains("label") && !doc.at("label").is_null()) {
      s.label = doc.at("label").get<int>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("sample: ") + e.what());
  }
  s.validate();
  return s;
}

inline void write_sample_json(std::ostream& os, const MultimodalSample& s) {
  JsonWriter w(os);
  w.begin_object();
  w.key("image");
  write_tensor_record(w, s.image);
  w.key("speech");
  write_tensor_record(w, s.speech);
  w.key("text").begin_array();
  for (std::uint32_t t : s.text) w.value(static_cast<std::size_t>(t));
  w.end_array();
  if (s.label) w.key("label").value(*s.label);
  w.end_object();
  os << "\n";
}

// ---------------------------------------------------------------------------
// Fusion checkpoints
// ---------------------------------------------------------------------------

inline void write_fusion_config(JsonWriter& w, const FusionConfig& cfg) {
  w.begin_object();
  w.key("variant").value(variant_name(cfg.variant));
  w.key("seed").value(static_cast<std::uint64_t>(cfg.seed));
  w.key("embed_dim").value(cfg.embed_dim);
  w.key("image").begin_array().value(cfg.image_h).value(cfg.image_w).value(cfg.image_c).end_array();
  w.key("speech").begin_array().value(cfg.speech_f).value(cfg.speech_t).end_array();
  w.key("text_len").value(cfg.text_len);
  w.key("vocab").value(cfg.vocab);
  w.end_object();
}

inline FusionConfig fusion_config_from_json(const io_detail::json& j) {
  using io_detail::json;
  FusionConfig cfg;
  try {
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    const auto image = io_detail::shape_from_json(j.at("image"), "fusion config image");
    const auto speech = io_detail::shape_from_json(j.at("speech"), "fusion config speech");
    if (image.size() != 3 || speech.size() != 2) {
      throw ParseError("fusion config: image needs 3 dims, speech needs 2");
    }
    cfg.image_h = image[0];
    cfg.image_w = image[1];
    cfg.image_c = image[2];
    cfg.speech_f = speech[0];
    cfg.speech_t = speech[1];
    cfg.text_len = j.at("text_len").get<std::size_t>();
    cfg.vocab = j.at("vocab").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("fusion config: ") + e.what());
  }
  return cfg;
}

inline void save_fusion_topology(std::ostream& os, const FusionTopology& net) {
  JsonWriter w(os);
  w.begin_object();
  w.key("kind").value("fusion");
  w.key("config");
  write_fusion_config(w, net.config());
  w.key("weights").begin_array();
  for (const Param* p : net.parameters()) {
    write_tensor_record(w, Tensor(p->shape, p->value));
  }
  w.end_array();
  w.end_object();
  os << "\n";
}

inline FusionTopology fusion_topology_from_doc(const io_detail::json& doc) {
  using io_detail::json;
  FusionTopology net(fusion_config_from_json(doc.at("config")));
  const json& weights = doc.at("weights");
  std::vector<Param*> params = net.parameters();
  if (!weights.is_array() || weights.size() != params.size()) {
    throw ParseError("fusion checkpoint: expected " + std::to_string(params.size()) +
                     " weight records");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor t = io_detail::tensor_from_json(weights[i], "fusion checkpoint");
    if (t.shape != params[i]->shape) {
      throw ParseError("fusion checkpoint: weight " + std::to_string(i) + " (" +
                       params[i]->name + ") has the wrong shape");
    }
    params[i]->value = t.data;
  }
  return net;
}

// ---------------------------------------------------------------------------
// Toy-model factory and generic load/save
// ---------------------------------------------------------------------------

/// Builds a predictor from a (kind, config, weights) triple. Unknown kinds
/// are configuration errors. Weight order per kind:
///   constant:   none (output vector lives in the config)
///   additive:   bias, image W, image dir, speech W, speech dir, text W, text dir
///   table-game: the 8-entry value table
///   fusion:     every parameter in the topology's canonical order
inline std::unique_ptr<Predictor> make_toy_model(const std::string& kind,
                                                 const io_detail::json& config,
                                                 const std::vector<Tensor>& weights) {
  using io_detail::json;
  try {
    if (kind == "constant") {
      InputSpec spec;
      spec.image_shape = io_detail::shape_from_json(config.at("image"), "constant image shape");
      spec.speech_shape = io_detail::shape_from_json(config.at("speech"), "constant speech shape");
      spec.text_len = config.at("text_len").get<std::size_t>();
      const std::vector<double> values = config.at("values").get<std::vector<double>>();
      if (values.size() != kNumClasses) throw ParseError("constant model needs 4 values");
      ClassProbs out;
      for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = values[c];
      return std::make_unique<ConstantModel>(out, std::move(spec));
    }
    if (kind == "additive") {
      if (weights.size() != 7) throw ParseError("additive model needs 7 weight records");
      AdditiveModel::Config cfg;
      cfg.bias = io_detail::class_probs_from_tensor(weights[0], "additive bias");
      cfg.image_weights = weights[1];
      cfg.image_dir = io_detail::class_probs_from_tensor(weights[2], "additive image dir");
      cfg.speech_weights = weights[3];
      cfg.speech_dir = io_detail::class_probs_from_tensor(weights[4], "additive speech dir");
      cfg.text_weights = weights[5];
      cfg.text_dir = io_detail::class_probs_from_tensor(weights[6], "additive text dir");
      cfg.softmax = config.value("softmax", false);
      return std::make_unique<AdditiveModel>(std::move(cfg));
    }
    if (kind == "table-game") {
      if (weights.size() != 1 || weights[0].size() != 8) {
        throw ParseError("table-game model needs one 8-entry value table");
      }
      InputSpec spec;
      spec.image_shape = io_detail::shape_from_json(config.at("image"), "table-game image shape");
      spec.speech_shape = io_detail::shape_from_json(config.at("speech"), "table-game speech shape");
      spec.text_len = config.at("text_len").get<std::size_t>();
      return std::make_unique<TableGameModel>(ValueFunction(3, weights[0].data), std::move(spec));
    }
    if (kind == "fusion") {
      json doc;
      doc["config"] = config;
      doc["weights"] = json::array();
      for (const Tensor& t : weights) {
        json rec;
        rec["shape"] = t.shape;
        rec["data"] = t.data;
        doc["weights"].push_back(rec);
      }
      auto net = std::make_shared<FusionTopology>(fusion_topology_from_doc(doc));
      return std::make_unique<FusionPredictor>(std::move(net));
    }
  } catch (const json::exception& e) {
    throw ParseError(kind + " model config: " + e.what());
  }
  throw ConfigError("unknown model kind: " + kind);
}

inline std::unique_ptr<Predictor> load_model(std::istream& is) {
  using io_detail::json;
  const json doc = io_detail::parse_stream(is, "model");
  std::string kind;
  try {
    kind = doc.at("kind").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  std::vector<Tensor> weights;
  if (doc.contains("weights")) {
    for (const json& rec : doc.at("weights")) {
      weights.push_back(io_detail::tensor_from_json(rec, "model weights"));
    }
  }
  const json config = doc.contains("config") ? doc.at("config") : json::object();
  return make_toy_model(kind, config, weights);
}

inline void save_model(std::ostream& os, const Predictor& model) {
  JsonWriter w(os);
  if (const auto* constant = dynamic_cast<const ConstantModel*>(&model)) {
    const InputSpec spec = constant->input_spec();
    w.begin_object();
    w.key("kind").value("constant");
    w.key("config").begin_object();
    w.key("values").begin_array();
    for (double v : constant->output().values) w.value(v);
    w.end_array();
    w.key("image").number_array(spec.image_shape);
    w.key("speech").number_array(spec.speech_shape);
    w.key("text_len").value(spec.text_len);
    w.end_object();
    w.key("weights").begin_array().end_array();
    w.end_object();
  } else if (const auto* additive = dynamic_cast<const AdditiveModel*>(&model)) {
    const AdditiveModel::Config& cfg = additive->config();
    w.begin_object();
    w.key("kind").value("additive");
    w.key("config").begin_object();
    w.key("softmax").value(cfg.softmax);
    w.end_object();
    w.key("weights").begin_array();
    auto probs_tensor = [](const ClassProbs& p) {
      return Tensor({kNumClasses}, {p[0], p[1], p[2], p[3]});
    };
    write_tensor_record(w, probs_tensor(cfg.bias));
    write_tensor_record(w, cfg.image_weights);
    write_tensor_record(w, probs_tensor(cfg.image_dir));
    write_tensor_record(w, cfg.speech_weights);
    write_tensor_record(w, probs_tensor(cfg.speech_dir));
    write_tensor_record(w, cfg.text_weights);
    write_tensor_record(w, probs_tensor(cfg.text_dir));
    w.end_array();
    w.end_object();
  } else if (const auto* game = dynamic_cast<const TableGameModel*>(&model)) {
    const InputSpec spec = game->input_spec();
    w.begin_object();
    w.key("kind").value("table-game");
    w.key("config").begin_object();
    w.key("image").number_array(spec.image_shape);
    w.key("speech").number_array(spec.speech_shape);
    w.key("text_len").value(spec.text_len);
    w.end_object();
    w.key("weights").begin_array();
    write_tensor_record(w, Tensor({8}, game->game().table));
    w.end_array();
    w.end_object();
  } else if (const auto* fused = dynamic_cast<const FusionPredictor*>(&model)) {
    save_fusion_topology(os, fused->topology());
    return;
  } else {
    throw ConfigError("cannot serialize this predictor kind");
  }
  os << "\n";
}

/// Dispatch on the "kind" field: fusion checkpoints rebuild a topology,
/// everything else goes through the toy-model factory.
inline FusionTopology load_fusion_topology(std::istream& is) {
  using io_detail::json;
  const json doc = io_detail::parse_stream(is, "fusion checkpoint");
  try {
    if (doc.at("kind").get<std::string>() != "fusion") {
      throw ParseError("expected a fusion checkpoint");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("fusion checkpoint: ") + e.what());
  }
  return fusion_topology_from_doc(doc);
}

}  // namespace kaap

#endif  // KAAP_MODEL_IO_HPP
