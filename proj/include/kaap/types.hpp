// Core domain types: the four emotion classes, per-class score vectors,
// multimodal samples and modality masks.

#ifndef KAAP_TYPES_HPP
#define KAAP_TYPES_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/tensor.hpp"

namespace kaap {

inline constexpr std::size_t kNumClasses = 4;

// Class indices: angry=0, happy=1, hate=2, sad=3.
enum class Emotion : int { angry = 0, happy = 1, hate = 2, sad = 3 };

inline const char* emotion_name(int cls) {
  switch (cls) {
    case 0: return "angry";
    case 1: return "happy";
    case 2: return "hate";
    case 3: return "sad";
    default: throw ConfigError("class index out of range: " + std::to_string(cls));
  }
}

enum class Modality { image, speech, text };

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::speech: return "speech";
    case Modality::text: return "text";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "image") return Modality::image;
  if (s == "speech") return Modality::speech;
  if (s == "text") return Modality::text;
  throw ConfigError("unknown modality: " + s);
}

/// Per-class score vector. In probability mode all entries lie in [0,1] and
/// sum to 1; attribution only ever takes differences, so raw real-valued
/// scores are also allowed (oracle games, score-mode toy models).
struct ClassProbs {
  std::array<double, kNumClasses> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  double sum() const {
    return values[0] + values[1] + values[2] + values[3];
  }

  /// Argmax with ties broken by lowest class index.
  int argmax() const {
    int best = 0;
    for (int c = 1; c < static_cast<int>(kNumClasses); ++c) {
      if (values[c] > values[best]) best = c;
    }
    return best;
  }

  bool all_finite() const {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool is_probability(double tol = 1e-9) const {
    for (double v : values) {
      if (!(v >= 0.0 && v <= 1.0)) return false;
    }
    return std::fabs(sum() - 1.0) <= tol;
  }

  static ClassProbs uniform() {
    return ClassProbs{{0.25, 0.25, 0.25, 0.25}};
  }
};

using TokenSeq = std::vector<std::uint32_t>;  // padding token is 0

/// One (image, speech spectrogram, token sequence) triple.
/// image: (H,W,C) reals in [0,1]; speech: (F,T) log-mel magnitudes;
/// text: token indices, padding = 0.
struct MultimodalSample {
  Tensor image;
  Tensor speech;
  TokenSeq text;
  std::optional<int> label;

  void validate() const {
    if (image.rank() != 3 || image.dim(0) < 1 || image.dim(1) < 1 || image.dim(2) < 1) {
      throw ShapeError("image must have shape (H,W,C) with positive dims, got " +
                       image.shape_string());
    }
    if (speech.rank() != 2 || speech.dim(0) < 1 || speech.dim(1) < 1) {
      throw ShapeError("speech must have shape (F,T) with positive dims, got " +
                       speech.shape_string());
    }
    if (!image.all_finite() || !speech.all_finite()) {
      throw NumericError("sample contains non-finite entries");
    }
    if (label && (*label < 0 || *label >= static_cast<int>(kNumClasses))) {
      throw ConfigError("sample label out of range");
    }
  }
};

/// Which modalities a prediction may see. Excluded modalities are replaced by
/// their zero content: black image, silent spectrogram, all-padding tokens.
struct ModalityMask {
  bool image = true;
  bool speech = true;
  bool text = true;

  static ModalityMask all_included() { return {true, true, true}; }
  static ModalityMask all_excluded() { return {false, false, false}; }
  static ModalityMask only(Modality m) {
    ModalityMask mask = all_excluded();
    mask.set(m, true);
    return mask;
  }
  static ModalityMask all_but(Modality m) {
    ModalityMask mask = all_included();
    mask.set(m, false);
    return mask;
  }

  void set(Modality m, bool keep) {
    switch (m) {
      case Modality::image: image = keep; break;
      case Modality::speech: speech = keep; break;
      case Modality::text: text = keep; break;
    }
  }

  bool includes(Modality m) const {
    switch (m) {
      case Modality::image: return image;
      case Modality::speech: return speech;
      case Modality::text: return text;
    }
    return false;
  }
};

/// Zero content for each modality: all-zero tensors, all-padding tokens of
/// the original length.
inline MultimodalSample zeroed_like(const MultimodalSample& s) {
  MultimodalSample z;
  z.image = Tensor::zeros(s.image.shape);
  z.speech = Tensor::zeros(s.speech.shape);
  z.text = TokenSeq(s.text.size(), 0);
  return z;
}

inline MultimodalSample apply_mask(const MultimodalSample& s, const ModalityMask& mask) {
  MultimodalSample out;
  out.image = mask.image ? s.image : Tensor::zeros(s.image.shape);
  out.speech = mask.speech ? s.speech : Tensor::zeros(s.speech.shape);
  out.text = mask.text ? s.text : TokenSeq(s.text.size(), 0);
  out.label = s.label;
  return out;
}

}  // namespace kaap

#endif  // KAAP_TYPES_HPP
