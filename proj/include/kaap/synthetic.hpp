// Seeded synthetic multimodal dataset. Each class plants a distinct pattern
// in every modality (bright image quadrant, spectrogram frequency band,
// class-specific token range) over a noise floor, so the classes are
// separable from any single modality and trivially separable from all three.

#ifndef KAAP_SYNTHETIC_HPP
#define KAAP_SYNTHETIC_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kaap/rng.hpp"
#include "kaap/tensor.hpp"
#include "kaap/types.hpp"

namespace kaap {

struct SyntheticConfig {
  std::uint64_t seed = 7;
  std::size_t count = 500;
  std::size_t image_h = 8, image_w = 8, image_c = 1;
  std::size_t speech_f = 8, speech_t = 8;
  std::size_t text_len = 6;
  std::size_t vocab = 32;
  double noise = 0.15;  // background level; signal regions sit well above it
};

inline MultimodalSample make_synthetic_sample(const SyntheticConfig& cfg, int cls, Rng& rng) {
  MultimodalSample s;
  s.label = cls;

  // Image: noisy background with a bright quadrant per class.
  s.image = Tensor::zeros({cfg.image_h, cfg.image_w, cfg.image_c});
  const std::size_t half_h = cfg.image_h / 2;
  const std::size_t half_w = cfg.image_w / 2;
  const std::size_t r0 = (cls / 2) * half_h;
  const std::size_t c0 = (cls % 2) * half_w;
  for (std::size_t r = 0; r < cfg.image_h; ++r) {
    for (std::size_t c = 0; c < cfg.image_w; ++c) {
      const bool hot = r >= r0 && r < r0 + half_h && c >= c0 && c < c0 + half_w;
      for (std::size_t ch = 0; ch < cfg.image_c; ++ch) {
        s.image.at(r, c, ch) = hot ? rng.uniform(0.75, 1.0) : rng.uniform(0.0, cfg.noise);
      }
    }
  }

  // Spectrogram: one hot frequency band per class.
  s.speech = Tensor::zeros({cfg.speech_f, cfg.speech_t});
  const std::size_t band = cfg.speech_f / kNumClasses;
  const std::size_t f0 = static_cast<std::size_t>(cls) * band;
  for (std::size_t f = 0; f < cfg.speech_f; ++f) {
    for (std::size_t t = 0; t < cfg.speech_t; ++t) {
      const bool hot = f >= f0 && f < f0 + band;
      s.speech.at(f, t) = hot ? rng.uniform(0.75, 1.0) : rng.uniform(0.0, cfg.noise);
    }
  }

  // Tokens: drawn from a class-specific range with occasional noise tokens.
  s.text.resize(cfg.text_len);
  const std::uint32_t base = 1 + static_cast<std::uint32_t>(cls) *
                                     static_cast<std::uint32_t>((cfg.vocab - 1) / kNumClasses);
  const std::uint32_t span = static_cast<std::uint32_t>((cfg.vocab - 1) / kNumClasses);
  for (std::size_t i = 0; i < cfg.text_len; ++i) {
    if (rng.uniform() < 0.85) {
      s.text[i] = base + static_cast<std::uint32_t>(rng.below(span > 0 ? span : 1));
    } else {
      s.text[i] = 1 + static_cast<std::uint32_t>(rng.below(cfg.vocab - 1));
    }
  }
  return s;
}

/// Round-robin class labels, all randomness from the config seed.
inline std::vector<MultimodalSample> make_synthetic_dataset(const SyntheticConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<MultimodalSample> out;
  out.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) {
    out.push_back(make_synthetic_sample(cfg, static_cast<int>(i % kNumClasses), rng));
  }
  return out;
}

}  // namespace kaap

#endif  // KAAP_SYNTHETIC_HPP
