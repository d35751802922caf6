// Desk-scale hybrid fusion classifier. Per modality there is a deeper
// "pre-trained-like" dense stack P_m and a shallower "simpler" stack S_m,
// both emitting width-D embeddings. Cross-modality (P,S) pairs are combined
// by learnable softmax-weighted additions, each pair feeds its own two-layer
// classification head, the head outputs are fused by a final weighted
// addition, and one last dense layer produces the four class logits.
//
// Gradients are exact reverse-mode, hand-written over the recorded forward
// activations. Training is plain mini-batch gradient descent with optional
// early stopping on a validation split.

#ifndef KAAP_FUSION_HPP
#define KAAP_FUSION_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/predictor.hpp"
#include "kaap/rng.hpp"
#include "kaap/tensor.hpp"
#include "kaap/types.hpp"

namespace kaap {

inline constexpr double kFocalGamma = 2.0;
inline constexpr double kLossEpsilon = 1e-12;

/// One named parameter block with its gradient accumulator.
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;

  void init(std::string n, std::vector<std::size_t> s) {
    name = std::move(n);
    shape = std::move(s);
    const std::size_t count = Tensor::element_count(shape);
    value.assign(count, 0.0);
    grad.assign(count, 0.0);
  }
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  Param weights;  // row-major (out, in)
  Param bias;     // (out)

  void init(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
    in = fan_in;
    out = fan_out;
    weights.init(name + ".weights", {fan_out, fan_in});
    bias.init(name + ".bias", {fan_out});
  }
};

namespace detail {

inline std::vector<double> softmax(const std::vector<double>& raw) {
  double mx = raw[0];
  for (double v : raw) mx = std::max(mx, v);
  std::vector<double> out(raw.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out[i] = std::exp(raw[i] - mx);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

inline void check_finite(const std::vector<double>& v, const std::string& where) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite value in " + where);
  }
}

}  // namespace detail

/// Convex combination of equal-shape inputs with weights softmax(raw).
struct WeightedAddLayer {
  Param raw;  // (m)

  void init(const std::string& name, std::size_t summands) {
    raw.init(name + ".raw", {summands});
  }

  std::size_t summands() const { return raw.value.size(); }

  /// softmax of the raw weights: strictly positive, sums to one.
  std::vector<double> effective() const { return detail::softmax(raw.value); }
};

/// output = sum_j softmax(raw)_j * input_j. Inputs must agree in shape and
/// count must match the layer's raw-weight count.
inline std::vector<double> weighted_add(const std::vector<std::vector<double>>& inputs,
                                        const WeightedAddLayer& layer) {
  if (inputs.empty()) throw ShapeError("weighted_add requires at least one input");
  if (inputs.size() != layer.summands()) {
    throw ShapeError("weighted_add got " + std::to_string(inputs.size()) + " inputs for " +
                     std::to_string(layer.summands()) + " weights");
  }
  const std::size_t n = inputs[0].size();
  for (const auto& x : inputs) {
    if (x.size() != n) throw ShapeError("weighted_add inputs must have equal shape");
  }
  const std::vector<double> w = layer.effective();
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) out[i] += w[j] * inputs[j][i];
  }
  return out;
}

inline Tensor weighted_add(const std::vector<Tensor>& inputs, const WeightedAddLayer& layer) {
  if (inputs.empty()) throw ShapeError("weighted_add requires at least one input");
  for (const Tensor& t : inputs) {
    if (!t.same_shape(inputs[0])) throw ShapeError("weighted_add inputs must have equal shape");
  }
  std::vector<std::vector<double>> flat;
  flat.reserve(inputs.size());
  for (const Tensor& t : inputs) flat.push_back(t.data);
  return Tensor(inputs[0].shape, weighted_add(flat, layer));
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

enum class Variant {
  baseline1,  // always rejected: no pair crosses modalities
  baseline2,
  baseline3,
  baseline4,
  baseline5,
  baseline6,
  vista,
};

inline Variant parse_variant(const std::string& s) {
  if (s == "vista") return Variant::vista;
  if (s == "baseline#1") return Variant::baseline1;
  if (s == "baseline#2") return Variant::baseline2;
  if (s == "baseline#3") return Variant::baseline3;
  if (s == "baseline#4") return Variant::baseline4;
  if (s == "baseline#5") return Variant::baseline5;
  if (s == "baseline#6") return Variant::baseline6;
  throw ConfigError("unknown topology variant: " + s);
}

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline1: return "baseline#1";
    case Variant::baseline2: return "baseline#2";
    case Variant::baseline3: return "baseline#3";
    case Variant::baseline4: return "baseline#4";
    case Variant::baseline5: return "baseline#5";
    case Variant::baseline6: return "baseline#6";
    case Variant::vista: return "vista";
  }
  return "?";
}

/// (P modality, S modality) wiring per variant.
inline std::vector<std::pair<Modality, Modality>> pair_wiring(Variant v) {
  using M = Modality;
  switch (v) {
    case Variant::baseline1:
      throw ConfigError(
          "configuration #1 is rejected: every pair combines a modality with itself");
    case Variant::baseline2: return {{M::image, M::image}, {M::speech, M::text}, {M::text, M::speech}};
    case Variant::baseline3: return {{M::image, M::speech}, {M::speech, M::image}, {M::text, M::text}};
    case Variant::baseline4: return {{M::image, M::speech}, {M::speech, M::text}, {M::text, M::image}};
    case Variant::baseline5: return {{M::image, M::text}, {M::speech, M::image}, {M::text, M::speech}};
    case Variant::baseline6: return {{M::image, M::text}, {M::speech, M::speech}, {M::text, M::image}};
    case Variant::vista:
      return {{M::image, M::speech}, {M::image, M::text},  {M::speech, M::image},
              {M::speech, M::text},  {M::text, M::image},  {M::text, M::speech}};
  }
  throw ConfigError("unknown variant");
}

struct FusionConfig {
  std::uint64_t seed = 0;
  std::size_t embed_dim = 32;  // D; hidden widths are 2D, head widths 4D
  Variant variant = Variant::vista;
  std::size_t image_h = 16, image_w = 16, image_c = 3;
  std::size_t speech_f = 16, speech_t = 16;
  std::size_t text_len = 8;
  std::size_t vocab = 32;  // token indices are scaled by 1/vocab at the input

  std::size_t modality_input_size(Modality m) const {
    switch (m) {
      case Modality::image: return image_h * image_w * image_c;
      case Modality::speech: return speech_f * speech_t;
      case Modality::text: return text_len;
    }
    return 0;
  }

  InputSpec input_spec() const {
    return {{image_h, image_w, image_c}, {speech_f, speech_t}, text_len};
  }
};

/// Dense stack; ReLU between layers, linear final output.
struct BranchStack {
  std::vector<DenseLayer> layers;
};

/// One (P_a, S_b) pair: softmax-weighted mix of the two embeddings followed
/// by its own classification head.
struct PairUnit {
  Modality p_modality = Modality::image;
  Modality s_modality = Modality::image;
  WeightedAddLayer mix;
  DenseLayer head_hidden;  // D -> 4D, ReLU
  DenseLayer head_out;     // 4D -> 4D, linear
};

struct StackTrace {
  std::vector<std::vector<double>> inputs;   // input to each dense layer
  std::vector<std::vector<double>> preacts;  // z per layer
  std::vector<double> out;
};

struct PairTrace {
  std::vector<double> fused;       // mix output, width D
  std::vector<double> hidden_pre;  // head_hidden z
  std::vector<double> hidden;      // relu(z)
  std::vector<double> out;         // pair output, width 4D
};

struct ForwardTrace {
  std::array<StackTrace, 3> pretrained;  // indexed by Modality
  std::array<StackTrace, 3> simpler;
  std::vector<PairTrace> pairs;
  std::vector<double> fused_late;  // width 4D
  std::vector<double> logits;      // width 4
  ClassProbs probs;
};

class FusionTopology {
 public:
  explicit FusionTopology(const FusionConfig& config) : config_(config) {
    if (config.variant == Variant::baseline1) {
      pair_wiring(config.variant);  // throws the rejected-configuration error
    }
    if (config.embed_dim < 1) throw ConfigError("embed_dim must be positive");
    if (config.vocab < 1) throw ConfigError("vocab must be positive");

    const std::size_t d = config.embed_dim;
    for (Modality m : {Modality::image, Modality::speech, Modality::text}) {
      const std::size_t idx = static_cast<std::size_t>(m);
      const std::size_t in = config.modality_input_size(m);
      const std::string pname = std::string("P_") + modality_name(m);
      BranchStack& p = pretrained_[idx];
      p.layers.resize(3);
      p.layers[0].init(pname + ".dense0", in, 2 * d);
      p.layers[1].init(pname + ".dense1", 2 * d, 2 * d);
      p.layers[2].init(pname + ".dense2", 2 * d, d);

      const std::string sname = std::string("S_") + modality_name(m);
      BranchStack& s = simpler_[idx];
      s.layers.resize(2);
      s.layers[0].init(sname + ".dense0", in, 2 * d);
      s.layers[1].init(sname + ".dense1", 2 * d, d);
    }

    const auto wiring = pair_wiring(config.variant);
    pairs_.resize(wiring.size());
    for (std::size_t i = 0; i < wiring.size(); ++i) {
      PairUnit& pair = pairs_[i];
      pair.p_modality = wiring[i].first;
      pair.s_modality = wiring[i].second;
      const std::string name = "pair" + std::to_string(i);
      pair.mix.init(name + ".mix", 2);
      pair.head_hidden.init(name + ".head0", d, 4 * d);
      pair.head_out.init(name + ".head1", 4 * d, 4 * d);
    }

    late_.init("late", pairs_.size());
    output_.init("output", 4 * d, kNumClasses);

    initialize_weights();
  }

  const FusionConfig& config() const { return config_; }
  const std::vector<PairUnit>& pairs() const { return pairs_; }
  std::vector<PairUnit>& pairs() { return pairs_; }
  const WeightedAddLayer& late_fusion() const { return late_; }
  WeightedAddLayer& late_fusion() { return late_; }
  DenseLayer& output_layer() { return output_; }
  BranchStack& pretrained(Modality m) { return pretrained_[static_cast<std::size_t>(m)]; }
  BranchStack& simpler(Modality m) { return simpler_[static_cast<std::size_t>(m)]; }
  const BranchStack& pretrained(Modality m) const { return pretrained_[static_cast<std::size_t>(m)]; }
  const BranchStack& simpler(Modality m) const { return simpler_[static_cast<std::size_t>(m)]; }

  /// Every parameter in canonical order: branch stacks (P then S per
  /// modality), pair units, late fusion, output layer. Serialization and the
  /// seeded initialization both follow this order.
  std::vector<Param*> parameters() {
    std::vector<Param*> out;
    for (std::size_t m = 0; m < 3; ++m) {
      for (DenseLayer& l : pretrained_[m].layers) {
        out.push_back(&l.weights);
        out.push_back(&l.bias);
      }
      for (DenseLayer& l : simpler_[m].layers) {
        out.push_back(&l.weights);
        out.push_back(&l.bias);
      }
    }
    for (PairUnit& p : pairs_) {
      out.push_back(&p.mix.raw);
      out.push_back(&p.head_hidden.weights);
      out.push_back(&p.head_hidden.bias);
      out.push_back(&p.head_out.weights);
      out.push_back(&p.head_out.bias);
    }
    out.push_back(&late_.raw);
    out.push_back(&output_.weights);
    out.push_back(&output_.bias);
    return out;
  }

  std::vector<const Param*> parameters() const {
    auto mutable_this = const_cast<FusionTopology*>(this);
    std::vector<Param*> params = mutable_this->parameters();
    return {params.begin(), params.end()};
  }

  /// All weighted-addition layers with their names, pair mixes first.
  std::vector<std::pair<std::string, const WeightedAddLayer*>> weighted_add_layers() const {
    std::vector<std::pair<std::string, const WeightedAddLayer*>> out;
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      out.emplace_back("pair" + std::to_string(i) + ".mix", &pairs_[i].mix);
    }
    out.emplace_back("late", &late_);
    return out;
  }

  void zero_grads() {
    for (Param* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }

  ClassProbs forward(const MultimodalSample& sample, ForwardTrace* trace = nullptr) const {
    config_.input_spec().check(sample);
    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;

    const std::array<std::vector<double>, 3> inputs = {
        sample.image.data, sample.speech.data, flatten_tokens(sample.text)};

    std::array<std::vector<double>, 3> p_emb, s_emb;
    for (std::size_t m = 0; m < 3; ++m) {
      p_emb[m] = stack_forward(pretrained_[m], inputs[m], tr.pretrained[m]);
      s_emb[m] = stack_forward(simpler_[m], inputs[m], tr.simpler[m]);
    }

    tr.pairs.assign(pairs_.size(), PairTrace{});
    std::vector<std::vector<double>> pair_outputs;
    pair_outputs.reserve(pairs_.size());
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const PairUnit& pair = pairs_[i];
      PairTrace& pt = tr.pairs[i];
      pt.fused = weighted_add({p_emb[static_cast<std::size_t>(pair.p_modality)],
                               s_emb[static_cast<std::size_t>(pair.s_modality)]},
                              pair.mix);
      pt.hidden_pre = dense_forward(pair.head_hidden, pt.fused);
      pt.hidden = relu(pt.hidden_pre);
      pt.out = dense_forward(pair.head_out, pt.hidden);
      detail::check_finite(pt.out, "pair" + std::to_string(i));
      pair_outputs.push_back(pt.out);
    }

    tr.fused_late = weighted_add(pair_outputs, late_);
    tr.logits = dense_forward(output_, tr.fused_late);
    detail::check_finite(tr.logits, "output layer");

    ClassProbs scores;
    for (std::size_t c = 0; c < kNumClasses; ++c) scores[c] = tr.logits[c];
    tr.probs = detail::softmax4(scores);
    return tr.probs;
  }

  /// Backpropagates the loss of one traced forward pass, scaling every
  /// parameter gradient by `scale` (1/batch for mean loss).
  void backward(const ForwardTrace& tr, const MultimodalSample& sample, int target,
                double scale) {
    const std::array<std::vector<double>, 3> inputs = {
        sample.image.data, sample.speech.data, flatten_tokens(sample.text)};

    // d(loss)/d(logits) through the focal + cross-entropy average.
    const double p = tr.probs[target];
    const double dl_dp = loss_grad_wrt_prob(p) * scale;
    std::vector<double> g_logits(kNumClasses);
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      const double indicator = static_cast<int>(j) == target ? 1.0 : 0.0;
      g_logits[j] = tr.probs[j] * dl_dp * (indicator - tr.probs[target]);
    }

    std::vector<double> g_fused_late(output_.in, 0.0);
    dense_backward(output_, tr.fused_late, g_logits, g_fused_late);

    // Late fusion over pair outputs.
    std::vector<const std::vector<double>*> pair_outputs(pairs_.size());
    for (std::size_t i = 0; i < pairs_.size(); ++i) pair_outputs[i] = &tr.pairs[i].out;
    std::vector<std::vector<double>> g_pair_out(pairs_.size());
    weighted_add_backward(late_, pair_outputs, g_fused_late, g_pair_out);

    std::array<std::vector<double>, 3> g_p_emb, g_s_emb;
    const std::size_t d = config_.embed_dim;
    for (std::size_t m = 0; m < 3; ++m) {
      g_p_emb[m].assign(d, 0.0);
      g_s_emb[m].assign(d, 0.0);
    }

    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      PairUnit& pair = pairs_[i];
      const PairTrace& pt = tr.pairs[i];

      std::vector<double> g_hidden(pair.head_out.in, 0.0);
      dense_backward(pair.head_out, pt.hidden, g_pair_out[i], g_hidden);
      relu_backward_inplace(pt.hidden_pre, g_hidden);

      std::vector<double> g_fused(pair.head_hidden.in, 0.0);
      dense_backward(pair.head_hidden, pt.fused, g_hidden, g_fused);

      const std::size_t pm = static_cast<std::size_t>(pair.p_modality);
      const std::size_t sm = static_cast<std::size_t>(pair.s_modality);
      std::vector<const std::vector<double>*> mix_inputs = {&tr.pretrained[pm].out,
                                                            &tr.simpler[sm].out};
      std::vector<std::vector<double>> g_mix(2);
      weighted_add_backward(pair.mix, mix_inputs, g_fused, g_mix);
      for (std::size_t e = 0; e < d; ++e) {
        g_p_emb[pm][e] += g_mix[0][e];
        g_s_emb[sm][e] += g_mix[1][e];
      }
    }

    for (std::size_t m = 0; m < 3; ++m) {
      stack_backward(pretrained_[m], tr.pretrained[m], inputs[m], g_p_emb[m]);
      stack_backward(simpler_[m], tr.simpler[m], inputs[m], g_s_emb[m]);
    }
  }

  /// Token indices scaled into [0,1) so text shares the numeric range of the
  /// other modality inputs; padding stays exactly zero.
  std::vector<double> flatten_tokens(const TokenSeq& tokens) const {
    std::vector<double> out(tokens.size());
    const double scale = 1.0 / static_cast<double>(config_.vocab);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      out[i] = static_cast<double>(tokens[i]) * scale;
    }
    return out;
  }

 private:
  void initialize_weights() {
    Rng rng(config_.seed);
    for (Param* p : parameters()) {
      const bool is_raw = p->name.find(".raw") != std::string::npos ||
                          p->name == "late.raw";
      const bool is_bias = p->name.find(".bias") != std::string::npos;
      if (is_raw) {
        for (double& v : p->value) v = rng.uniform(-0.05, 0.05);
      } else if (is_bias) {
        // biases start at zero
      } else {
        // dense weights: uniform with fan-based scale
        const std::size_t fan_out = p->shape[0];
        const std::size_t fan_in = p->shape[1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : p->value) v = rng.uniform(-bound, bound);
      }
    }
  }

  static std::vector<double> relu(const std::vector<double>& z) {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
    return out;
  }

  static void relu_backward_inplace(const std::vector<double>& preact, std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (preact[i] <= 0.0) g[i] = 0.0;
    }
  }

  static std::vector<double> dense_forward(const DenseLayer& layer, const std::vector<double>& x) {
    if (x.size() != layer.in) {
      throw ShapeError("dense layer " + layer.weights.name + " expected input of " +
                       std::to_string(layer.in) + ", got " + std::to_string(x.size()));
    }
    std::vector<double> z(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = layer.bias.value[o];
      const double* row = layer.weights.value.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
    return z;
  }

  static void dense_backward(DenseLayer& layer, const std::vector<double>& x,
                             const std::vector<double>& g_out, std::vector<double>& g_in) {
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double g = g_out[o];
      layer.bias.grad[o] += g;
      double* wrow = layer.weights.grad.data() + o * layer.in;
      const double* vrow = layer.weights.value.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        wrow[i] += g * x[i];
        g_in[i] += vrow[i] * g;
      }
    }
  }

  std::vector<double> stack_forward(const BranchStack& stack, const std::vector<double>& x,
                                    StackTrace& tr) const {
    tr.inputs.clear();
    tr.preacts.clear();
    std::vector<double> cur = x;
    for (std::size_t li = 0; li < stack.layers.size(); ++li) {
      tr.inputs.push_back(cur);
      std::vector<double> z = dense_forward(stack.layers[li], cur);
      detail::check_finite(z, stack.layers[li].weights.name);
      tr.preacts.push_back(z);
      cur = (li + 1 < stack.layers.size()) ? relu(z) : std::move(z);
    }
    tr.out = cur;
    return cur;
  }

  static void stack_backward(BranchStack& stack, const StackTrace& tr,
                             const std::vector<double>& input, std::vector<double> g_out) {
    (void)input;  // tr.inputs[0] already holds it
    for (std::size_t li = stack.layers.size(); li-- > 0;) {
      DenseLayer& layer = stack.layers[li];
      std::vector<double> g_in(layer.in, 0.0);
      dense_backward(layer, tr.inputs[li], g_out, g_in);
      if (li > 0) relu_backward_inplace(tr.preacts[li - 1], g_in);
      g_out = std::move(g_in);
    }
  }

  static void weighted_add_backward(WeightedAddLayer& layer,
                                    const std::vector<const std::vector<double>*>& inputs,
                                    const std::vector<double>& g_out,
                                    std::vector<std::vector<double>>& g_inputs) {
    const std::vector<double> w = layer.effective();
    std::vector<double> per_input_dot(inputs.size(), 0.0);
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      const std::vector<double>& x = *inputs[j];
      g_inputs[j].assign(x.size(), 0.0);
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        g_inputs[j][i] = w[j] * g_out[i];
        dot += g_out[i] * x[i];
      }
      per_input_dot[j] = dot;
    }
    double weighted_dot = 0.0;
    for (std::size_t j = 0; j < inputs.size(); ++j) weighted_dot += w[j] * per_input_dot[j];
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      layer.raw.grad[j] += w[j] * (per_input_dot[j] - weighted_dot);
    }
  }

  static double loss_grad_wrt_prob(double p) {
    // L(p) = 0.5*CE + 0.5*(1-p)^gamma*CE with CE = -ln(max(p, eps)).
    if (p <= kLossEpsilon) {
      const double ce = -std::log(kLossEpsilon);
      return 0.5 * (-kFocalGamma) * std::pow(1.0 - p, kFocalGamma - 1.0) * ce;
    }
    const double om = 1.0 - p;
    const double ce = -std::log(p);
    const double d_ce = -1.0 / p;
    const double d_plain = d_ce;
    const double d_focal = -kFocalGamma * std::pow(om, kFocalGamma - 1.0) * ce +
                           std::pow(om, kFocalGamma) * d_ce;
    return 0.5 * d_plain + 0.5 * d_focal;
  }

  FusionConfig config_;
  std::array<BranchStack, 3> pretrained_;
  std::array<BranchStack, 3> simpler_;
  std::vector<PairUnit> pairs_;
  WeightedAddLayer late_;
  DenseLayer output_;
};

inline FusionTopology build_topology(const FusionConfig& config) {
  return FusionTopology(config);
}

/// Average of categorical focal loss (gamma = 2) and categorical
/// cross-entropy; the target probability is clamped at 1e-12 before the log.
inline double fusion_loss(const ClassProbs& pred, int target) {
  if (target < 0 || target >= static_cast<int>(kNumClasses)) {
    throw ConfigError("loss target class out of range");
  }
  const double p = std::max(pred[target], kLossEpsilon);
  const double ce = -std::log(p);
  const double focal = std::pow(1.0 - pred[target], kFocalGamma) * ce;
  return 0.5 * ce + 0.5 * focal;
}

/// Mean loss over a labeled batch with exact gradients accumulated into the
/// topology's parameters (on top of whatever is already there).
inline double accumulate_gradients(FusionTopology& net,
                                   const std::vector<const MultimodalSample*>& batch) {
  if (batch.empty()) throw ConfigError("gradient batch must be non-empty");
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const MultimodalSample* sample : batch) {
    if (!sample->label) throw ConfigError("gradient batch requires labeled samples");
    ForwardTrace trace;
    const ClassProbs probs = net.forward(*sample, &trace);
    total += fusion_loss(probs, *sample->label) * scale;
    net.backward(trace, *sample, *sample->label, scale);
  }
  if (!std::isfinite(total)) throw NumericError("non-finite loss in gradient batch");
  return total;
}

/// Convenience wrapper: zeroed gradients, one batch.
inline double compute_gradients(FusionTopology& net, const std::vector<MultimodalSample>& batch) {
  std::vector<const MultimodalSample*> ptrs;
  ptrs.reserve(batch.size());
  for (const MultimodalSample& s : batch) ptrs.push_back(&s);
  net.zero_grads();
  return accumulate_gradients(net, ptrs);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::size_t epochs = 50;
  double lr = 1e-4;  // negative rejected; zero is a valid no-op run
  std::size_t batch_size = 64;
  std::size_t patience = 5;          // early stop after this many stalled epochs
  double validation_fraction = 0.2;  // 0 disables validation and early stopping
  std::uint64_t shuffle_seed = 0;
  // Invoked after every parameter update; used by invariant checks.
  std::function<void(const FusionTopology&, std::size_t step)> step_observer;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  std::vector<std::pair<std::string, std::vector<double>>> effective_weights;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  bool early_stopped = false;
  std::size_t steps = 0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline EvalResult evaluate(const FusionTopology& net,
                           const std::vector<const MultimodalSample*>& samples) {
  if (samples.empty()) return {};
  double loss = 0.0;
  std::size_t correct = 0;
  for (const MultimodalSample* s : samples) {
    if (!s->label) throw ConfigError("evaluation requires labeled samples");
    const ClassProbs probs = net.forward(*s);
    loss += fusion_loss(probs, *s->label);
    if (probs.argmax() == *s->label) ++correct;
  }
  return {loss / static_cast<double>(samples.size()),
          static_cast<double>(correct) / static_cast<double>(samples.size())};
}

inline EvalResult evaluate(const FusionTopology& net, const std::vector<MultimodalSample>& samples) {
  std::vector<const MultimodalSample*> ptrs;
  ptrs.reserve(samples.size());
  for (const MultimodalSample& s : samples) ptrs.push_back(&s);
  return evaluate(net, ptrs);
}

/// Mini-batch gradient descent. Records one report line per epoch (loss,
/// accuracy, effective weights of every weighted addition) and stops early
/// when the validation loss has not improved for `patience` epochs.
inline TrainReport train(FusionTopology& net, const std::vector<MultimodalSample>& dataset,
                         const TrainOptions& options) {
  if (options.epochs < 1) throw ConfigError("epochs must be positive");
  if (options.lr < 0.0) throw ConfigError("learning rate must be non-negative");
  if (options.batch_size < 1) throw ConfigError("batch size must be positive");
  if (dataset.empty()) throw ConfigError("training dataset must be non-empty");
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must be in [0, 1)");
  }

  Rng rng(options.shuffle_seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }

  const std::size_t val_count =
      static_cast<std::size_t>(options.validation_fraction * static_cast<double>(dataset.size()));
  std::vector<const MultimodalSample*> train_set, val_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < order.size() - val_count ? train_set : val_set).push_back(&dataset[order[i]]);
  }
  if (train_set.empty()) throw ConfigError("validation split left no training samples");

  TrainReport report;
  double best_val_loss = 0.0;
  std::size_t stalled = 0;

  std::vector<std::size_t> train_order(train_set.size());
  std::iota(train_order.begin(), train_order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = train_order.size(); i > 1; --i) {
      std::swap(train_order[i - 1], train_order[rng.below(i)]);
    }

    for (std::size_t start = 0; start < train_order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(start + options.batch_size, train_order.size());
      std::vector<const MultimodalSample*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[train_order[i]]);

      net.zero_grads();
      accumulate_gradients(net, batch);
      for (Param* p : net.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
          p->value[i] -= options.lr * p->grad[i];
        }
      }
      ++report.steps;
      if (options.step_observer) options.step_observer(net, report.steps);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const EvalResult train_eval = evaluate(net, train_set);
    rec.train_loss = train_eval.loss;
    rec.train_accuracy = train_eval.accuracy;
    if (!val_set.empty()) {
      const EvalResult val_eval = evaluate(net, val_set);
      rec.val_loss = val_eval.loss;
      rec.val_accuracy = val_eval.accuracy;
    }
    for (const auto& [name, layer] : net.weighted_add_layers()) {
      rec.effective_weights.emplace_back(name, layer->effective());
    }
    report.epochs.push_back(std::move(rec));

    if (!std::isfinite(train_eval.loss)) throw NumericError("training loss diverged");

    if (!val_set.empty() && options.patience > 0) {
      const double val_loss = report.epochs.back().val_loss;
      if (report.epochs.size() == 1 || val_loss < best_val_loss) {
        best_val_loss = val_loss;
        stalled = 0;
      } else if (++stalled >= options.patience) {
        report.early_stopped = true;
        break;
      }
    }
  }
  return report;
}

/// Predictor adapter over an immutable trained topology.
class FusionPredictor : public Predictor {
 public:
  explicit FusionPredictor(std::shared_ptr<const FusionTopology> net) : net_(std::move(net)) {
    if (!net_) throw ConfigError("fusion predictor requires a topology");
  }

  ClassProbs predict(const MultimodalSample& sample) const override {
    return net_->forward(sample);
  }

  bool probability_output() const override { return true; }
  InputSpec input_spec() const override { return net_->config().input_spec(); }

  const FusionTopology& topology() const { return *net_; }

 private:
  std::shared_ptr<const FusionTopology> net_;
};

}  // namespace kaap

#endif  // KAAP_FUSION_HPP
