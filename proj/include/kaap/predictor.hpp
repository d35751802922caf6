// Black-box prediction abstraction consumed by the attribution engine, plus
// the built-in toy models used by oracles and tests.
//
// Predictors are immutable after construction and evaluation is pure, so
// predict/predict_masked are safe to call from multiple threads.

#ifndef KAAP_PREDICTOR_HPP
#define KAAP_PREDICTOR_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/rng.hpp"
#include "kaap/tensor.hpp"
#include "kaap/types.hpp"

namespace kaap {

/// Declared input shapes of a model.
struct InputSpec {
  std::vector<std::size_t> image_shape;   // (H,W,C)
  std::vector<std::size_t> speech_shape;  // (F,T)
  std::size_t text_len = 0;

  void check(const MultimodalSample& s) const {
    s.validate();
    if (s.image.shape != image_shape) {
      throw ShapeError("image shape " + s.image.shape_string() + " does not match model input");
    }
    if (s.speech.shape != speech_shape) {
      throw ShapeError("speech shape " + s.speech.shape_string() + " does not match model input");
    }
    if (s.text.size() != text_len) {
      throw ShapeError("text length " + std::to_string(s.text.size()) +
                       " does not match model input length " + std::to_string(text_len));
    }
  }
};

/// Deterministic per-class scorer. Probability output (non-negative, summing
/// to one) is the default special case; oracle games return raw scores.
class Predictor {
 public:
  virtual ~Predictor() = default;

  /// Deterministic evaluation; repeated calls with identical input are
  /// bit-identical. Throws ShapeError on mismatched input, NumericError if
  /// the model emits a non-finite score.
  virtual ClassProbs predict(const MultimodalSample& sample) const = 0;

  /// Whether predict() outputs a probability vector.
  virtual bool probability_output() const { return true; }

  virtual InputSpec input_spec() const = 0;
};

/// Excluded modalities are replaced by their zero content before predicting;
/// an all-include mask reproduces predict() exactly.
inline ClassProbs predict_masked(const Predictor& model, const MultimodalSample& sample,
                                 const ModalityMask& mask) {
  return model.predict(apply_mask(sample, mask));
}

/// A deterministic coalition game: a real value for every subset of n
/// abstract players, indexed by bitmask.
struct ValueFunction {
  std::size_t players = 0;
  std::vector<double> table;  // size 1 << players

  ValueFunction() = default;
  ValueFunction(std::size_t n, std::vector<double> values)
      : players(n), table(std::move(values)) {
    if (n > 16) throw ConfigError("value function limited to 16 players");
    if (table.size() != (std::size_t{1} << n)) {
      throw ConfigError("value table must have 2^n entries");
    }
    for (double v : table) {
      if (!std::isfinite(v)) throw NumericError("value function contains non-finite entry");
    }
  }

  double value(std::uint32_t coalition_mask) const { return table[coalition_mask]; }
  double empty_value() const { return table[0]; }
  double grand_value() const { return table[table.size() - 1]; }

  /// v(S) = base + sum of per-player weights in S.
  static ValueFunction additive(const std::vector<double>& weights, double base = 0.0) {
    const std::size_t n = weights.size();
    std::vector<double> t(std::size_t{1} << n);
    for (std::size_t mask = 0; mask < t.size(); ++mask) {
      double v = base;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (std::size_t{1} << i)) v += weights[i];
      }
      t[mask] = v;
    }
    return ValueFunction(n, std::move(t));
  }

  /// 3-player majority game: v(S) = 1 iff |S| >= 2.
  static ValueFunction majority3() {
    std::vector<double> t(8, 0.0);
    for (std::uint32_t mask = 0; mask < 8; ++mask) {
      int count = __builtin_popcount(mask);
      t[mask] = count >= 2 ? 1.0 : 0.0;
    }
    return ValueFunction(3, std::move(t));
  }

  static ValueFunction random(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> t(std::size_t{1} << n);
    for (double& v : t) v = rng.uniform(lo, hi);
    return ValueFunction(n, std::move(t));
  }
};

// ---------------------------------------------------------------------------
// Built-in toy models
// ---------------------------------------------------------------------------

namespace detail {

inline ClassProbs softmax4(const ClassProbs& scores) {
  double mx = scores[0];
  for (std::size_t c = 1; c < kNumClasses; ++c) mx = std::max(mx, scores[c]);
  ClassProbs out;
  double denom = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    out[c] = std::exp(scores[c] - mx);
    denom += out[c];
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) out[c] /= denom;
  return out;
}

inline void check_finite_output(const ClassProbs& p, const char* model) {
  if (!p.all_finite()) {
    throw NumericError(std::string(model) + " produced a non-finite score");
  }
}

}  // namespace detail

/// Returns the same score vector for every input.
class ConstantModel : public Predictor {
 public:
  ConstantModel(ClassProbs output, InputSpec spec)
      : output_(output), spec_(std::move(spec)) {
    if (!output_.all_finite()) throw ConfigError("constant model output must be finite");
  }

  ClassProbs predict(const MultimodalSample& sample) const override {
    spec_.check(sample);
    return output_;
  }

  bool probability_output() const override { return output_.is_probability(); }
  InputSpec input_spec() const override { return spec_; }

  const ClassProbs& output() const { return output_; }

 private:
  ClassProbs output_;
  InputSpec spec_;
};

/// Exactly additive across modalities and across elements within a modality:
///
///   score = bias + <W_img, image> * a_img + <W_sp, speech> * a_sp
///                + <W_txt, tokens> * a_txt
///
/// where <,> is the flat inner product (token indices cast to reals) and each
/// a_m is a per-class direction. With softmax disabled the per-modality
/// contributions add up exactly, which is what makes this the efficiency
/// oracle for modality importance.
class AdditiveModel : public Predictor {
 public:
  struct Config {
    ClassProbs bias{};
    Tensor image_weights;   // same shape as the image input
    Tensor speech_weights;  // same shape as the speech input
    Tensor text_weights;    // rank 1, length = text_len
    ClassProbs image_dir{};
    ClassProbs speech_dir{};
    ClassProbs text_dir{};
    bool softmax = false;  // probability mode when true
  };

  explicit AdditiveModel(Config cfg) : cfg_(std::move(cfg)) {
    if (cfg_.image_weights.rank() != 3) throw ConfigError("image weights must be rank 3");
    if (cfg_.speech_weights.rank() != 2) throw ConfigError("speech weights must be rank 2");
    if (cfg_.text_weights.rank() != 1) throw ConfigError("text weights must be rank 1");
  }

  ClassProbs predict(const MultimodalSample& sample) const override {
    input_spec().check(sample);
    ClassProbs scores = cfg_.bias;
    accumulate(scores, inner(cfg_.image_weights.data, sample.image.data), cfg_.image_dir);
    accumulate(scores, inner(cfg_.speech_weights.data, sample.speech.data), cfg_.speech_dir);
    accumulate(scores, inner_tokens(cfg_.text_weights.data, sample.text), cfg_.text_dir);
    ClassProbs out = cfg_.softmax ? detail::softmax4(scores) : scores;
    detail::check_finite_output(out, "additive model");
    return out;
  }

  bool probability_output() const override { return cfg_.softmax; }

  InputSpec input_spec() const override {
    return {cfg_.image_weights.shape, cfg_.speech_weights.shape, cfg_.text_weights.size()};
  }

  /// True contribution of one modality for a given sample, per class.
  ClassProbs contribution(Modality m, const MultimodalSample& sample) const {
    double activation = 0.0;
    const ClassProbs* dir = nullptr;
    switch (m) {
      case Modality::image:
        activation = inner(cfg_.image_weights.data, sample.image.data);
        dir = &cfg_.image_dir;
        break;
      case Modality::speech:
        activation = inner(cfg_.speech_weights.data, sample.speech.data);
        dir = &cfg_.speech_dir;
        break;
      case Modality::text:
        activation = inner_tokens(cfg_.text_weights.data, sample.text);
        dir = &cfg_.text_dir;
        break;
    }
    ClassProbs out;
    for (std::size_t c = 0; c < kNumClasses; ++c) out[c] = activation * (*dir)[c];
    return out;
  }

  const Config& config() const { return cfg_; }

 private:
  static double inner(const std::vector<double>& w, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
  }

  static double inner_tokens(const std::vector<double>& w, const TokenSeq& tokens) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * static_cast<double>(tokens[i]);
    return s;
  }

  static void accumulate(ClassProbs& scores, double activation, const ClassProbs& dir) {
    for (std::size_t c = 0; c < kNumClasses; ++c) scores[c] += activation * dir[c];
  }

  Config cfg_;
};

/// Maps the three modalities onto the players of a coalition game. A player
/// is present iff its modality content is non-zero (non-padding for text);
/// the output replicates v(S) across all four classes so any target class
/// reads the game value directly. Raw scores, not probabilities.
class TableGameModel : public Predictor {
 public:
  TableGameModel(ValueFunction game, InputSpec spec)
      : game_(std::move(game)), spec_(std::move(spec)) {
    if (game_.players != 3) {
      throw ConfigError("table-game model needs a 3-player game, got " +
                        std::to_string(game_.players));
    }
  }

  ClassProbs predict(const MultimodalSample& sample) const override {
    spec_.check(sample);
    std::uint32_t coalition = 0;
    if (!sample.image.all_zero()) coalition |= 1u;   // player 0 = image
    if (!sample.speech.all_zero()) coalition |= 2u;  // player 1 = speech
    for (std::uint32_t t : sample.text) {
      if (t != 0) {
        coalition |= 4u;  // player 2 = text
        break;
      }
    }
    const double v = game_.value(coalition);
    ClassProbs out{{v, v, v, v}};
    detail::check_finite_output(out, "table-game model");
    return out;
  }

  bool probability_output() const override { return false; }
  InputSpec input_spec() const override { return spec_; }

  const ValueFunction& game() const { return game_; }

 private:
  ValueFunction game_;
  InputSpec spec_;
};

/// Smallest sample matching a spec with every modality present.
inline MultimodalSample ones_sample(const InputSpec& spec) {
  MultimodalSample s;
  s.image = Tensor::full(spec.image_shape, 1.0);
  s.speech = Tensor::full(spec.speech_shape, 1.0);
  s.text = TokenSeq(spec.text_len, 1);
  return s;
}

inline InputSpec desk_input_spec(std::size_t image_side = 8, std::size_t channels = 1,
                                 std::size_t speech_side = 8, std::size_t text_len = 6) {
  return {{image_side, image_side, channels}, {speech_side, speech_side}, text_len};
}

}  // namespace kaap

#endif  // KAAP_PREDICTOR_HPP
