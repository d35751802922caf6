// Ground-truth engines used to validate the attribution engine: exact
// Shapley values by exhaustive subset enumeration, and deliberately slow
// straight-line reference implementations of the map and importance
// computations. The references share no code with the engine beyond the
// partition primitives, so agreement is a meaningful differential check.

#ifndef KAAP_ORACLE_HPP
#define KAAP_ORACLE_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kaap/engine.hpp"
#include "kaap/errors.hpp"
#include "kaap/partition.hpp"
#include "kaap/predictor.hpp"

namespace kaap {

struct ShapleyResult {
  std::vector<double> per_player;
  double grand_value = 0.0;
  double empty_value = 0.0;
};

/// Exact Shapley values over all 2^n coalitions:
///   phi_i = sum over S not containing i of |S|! (n-|S|-1)! / n! * (v(S+i) - v(S))
/// Subsets are enumerated in ascending bitmask order so floating-point sums
/// are reproducible.
inline ShapleyResult exact_shapley(const ValueFunction& game) {
  const std::size_t n = game.players;
  if (n > 16) throw ConfigError("exact Shapley enumeration limited to 16 players");
  if (n == 0) throw ConfigError("game must have at least one player");

  std::vector<double> factorial(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  ShapleyResult result;
  result.per_player.assign(n, 0.0);
  result.grand_value = game.grand_value();
  result.empty_value = game.empty_value();

  const std::uint32_t full = static_cast<std::uint32_t>((std::size_t{1} << n) - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t bit = std::uint32_t{1} << i;
    double phi = 0.0;
    for (std::uint32_t mask = 0; mask <= full; ++mask) {
      if (mask & bit) continue;
      const int s = __builtin_popcount(mask);
      const double weight = factorial[s] * factorial[n - s - 1] / factorial[n];
      phi += weight * (game.value(mask | bit) - game.value(mask));
    }
    result.per_player[i] = phi;
  }
  return result;
}

namespace oracle_detail {

// Predict with only one modality's content visible; everything else zero.
inline double predict_with_type(const Predictor& model, const MultimodalSample& shape_ref,
                                Modality type, const Tensor* grid_content,
                                const TokenSeq* token_content, int target) {
  MultimodalSample probe = zeroed_like(shape_ref);
  if (type == Modality::image && grid_content) probe.image = *grid_content;
  if (type == Modality::speech && grid_content) probe.speech = *grid_content;
  if (type == Modality::text && token_content) probe.text = *token_content;
  return model.predict(probe)[target];
}

}  // namespace oracle_detail

/// Straight-line reference map computation: no batching, no caching, no
/// reordering, one thread. Deliberately slow; domains are capped at 32 per
/// axis. Output is the differential-test reference for kaap_map.
inline AttributionMap reference_kaap(const Predictor& model, const MultimodalSample& sample,
                                     Modality modality, const EngineOptions& options) {
  if (options.k_max < 2) throw ConfigError("k_max must be at least 2");
  model.input_spec().check(sample);

  const int target = options.target ? select_target(ClassProbs{}, options.target)
                                    : select_target(model.predict(sample));

  AttributionMap map;
  map.target_class = target;

  if (modality == Modality::text) {
    const TokenSeq& input = sample.text;
    if (input.empty()) throw ShapeError("text attribution requires at least one token");
    const std::size_t len = input.size();
    if (len > 32) throw ConfigError("reference path limited to domains of 32 per axis");

    const double p_f =
        oracle_detail::predict_with_type(model, sample, modality, nullptr, &input, target);
    const TokenSeq zero_tokens(len, 0);
    const double p_b =
        oracle_detail::predict_with_type(model, sample, modality, nullptr, &zero_tokens, target);

    map.domain = AttributionMap::Domain::text;
    map.shape = {len};
    map.values.assign(len, 0.0);
    map.k_used = std::min(options.k_max, len);
    map.k_clamped = map.k_used < options.k_max;

    for (std::size_t i = 2; i <= map.k_used; ++i) {
      const PartitionScheme parts = make_parts_1d(len, i);
      for (const Span1D& part : parts.spans) {
        TokenSeq data_1(len, 0);
        for (std::size_t e = part.begin; e < part.end; ++e) data_1[e] = input[e];
        TokenSeq data_2 = input;
        for (std::size_t e = part.begin; e < part.end; ++e) data_2[e] = 0;
        const double p_1 =
            oracle_detail::predict_with_type(model, sample, modality, nullptr, &data_1, target);
        const double p_2 =
            oracle_detail::predict_with_type(model, sample, modality, nullptr, &data_2, target);
        const double inv = 1.0 / static_cast<double>(i);
        const double kp = inv * (p_1 - p_b) + (1.0 - inv) * (p_f - p_2);
        const double weight = static_cast<double>(i) / static_cast<double>(len);
        for (std::size_t e = part.begin; e < part.end; ++e) map.values[e] += weight * kp;
      }
    }
  } else {
    const Tensor& input = modality == Modality::image ? sample.image : sample.speech;
    if (input.dim(0) != input.dim(1)) {
      throw ShapeError("reference path requires square 2-D domains, got " + input.shape_string());
    }
    const std::size_t w = input.dim(0);
    if (w > 32) throw ConfigError("reference path limited to domains of 32 per axis");

    const double p_f =
        oracle_detail::predict_with_type(model, sample, modality, &input, nullptr, target);
    const Tensor zero_grid = Tensor::zeros(input.shape);
    const double p_b =
        oracle_detail::predict_with_type(model, sample, modality, &zero_grid, nullptr, target);

    std::vector<double> grid(w * w, 0.0);
    const std::size_t k_used = std::min(options.k_max, w);

    for (std::size_t i = 2; i <= k_used; ++i) {
      const PartitionScheme parts = make_parts_2d(w, i);
      for (const Block2D& part : parts.blocks) {
        const Tensor data_1 = perturb(input, part, PerturbMode::keep_only);
        const Tensor data_2 = perturb(input, part, PerturbMode::drop);
        const double p_1 =
            oracle_detail::predict_with_type(model, sample, modality, &data_1, nullptr, target);
        const double p_2 =
            oracle_detail::predict_with_type(model, sample, modality, &data_2, nullptr, target);
        const double inv = 1.0 / static_cast<double>(i);
        const double kp = inv * (p_1 - p_b) + (1.0 - inv) * (p_f - p_2);
        const double side = static_cast<double>(w);
        const double weight =
            (static_cast<double>(i) / side) * (static_cast<double>(i) / side);
        for (std::size_t r = part.rows.begin; r < part.rows.end; ++r) {
          for (std::size_t c = part.cols.begin; c < part.cols.end; ++c) {
            grid[r * w + c] += weight * kp;
          }
        }
      }
    }

    if (modality == Modality::speech) {
      const std::size_t frames = sample.speech.dim(1);
      map.domain = AttributionMap::Domain::speech_time;
      map.shape = {frames};
      map.values.assign(frames, 0.0);
      for (std::size_t t = 0; t < frames; ++t) {
        double s = 0.0;
        for (std::size_t f = 0; f < w; ++f) s += grid[f * frames + t];
        map.values[t] = s / static_cast<double>(w);
      }
    } else {
      map.domain = AttributionMap::Domain::image;
      map.shape = {w, w};
      map.values = std::move(grid);
    }
    map.k_used = k_used;
    map.k_clamped = k_used < options.k_max;
  }

  double total = 0.0;
  for (double v : map.values) total += v;
  if (total > 0.0) {
    for (double& v : map.values) v /= total;
    map.normalized = true;
  }
  return map;
}

/// Literal transliteration of the importance procedure: eight prediction
/// calls and the three 1/3 + 2/3 weighted differences.
inline ModalityImportance reference_modality_importance(const Predictor& model,
                                                        const MultimodalSample& sample,
                                                        std::optional<int> target_override = {}) {
  model.input_spec().check(sample);
  const ClassProbs p_f_vec = model.predict(sample);
  const int target = select_target(p_f_vec, target_override);

  const MultimodalSample zero = zeroed_like(sample);

  MultimodalSample only_image = zero, only_speech = zero, only_text = zero;
  only_image.image = sample.image;
  only_speech.speech = sample.speech;
  only_text.text = sample.text;

  MultimodalSample no_image = sample, no_speech = sample, no_text = sample;
  no_image.image = Tensor::zeros(sample.image.shape);
  no_speech.speech = Tensor::zeros(sample.speech.shape);
  no_text.text = TokenSeq(sample.text.size(), 0);

  const double p_f = p_f_vec[target];
  const double p_b = model.predict(zero)[target];

  const double p_i1 = model.predict(only_image)[target];
  const double p_i2 = model.predict(no_image)[target];
  const double s_i = (1.0 / 3.0) * (p_i1 - p_b) + (2.0 / 3.0) * (p_f - p_i2);

  const double p_t1 = model.predict(only_text)[target];
  const double p_t2 = model.predict(no_text)[target];
  const double s_t = (1.0 / 3.0) * (p_t1 - p_b) + (2.0 / 3.0) * (p_f - p_t2);

  const double p_s1 = model.predict(only_speech)[target];
  const double p_s2 = model.predict(no_speech)[target];
  const double s_s = (1.0 / 3.0) * (p_s1 - p_b) + (2.0 / 3.0) * (p_f - p_s2);

  ModalityImportance result;
  result.image = s_i;
  result.speech = s_s;
  result.text = s_t;
  result.target_class = target;
  return result;
}

}  // namespace kaap

#endif  // KAAP_ORACLE_HPP
