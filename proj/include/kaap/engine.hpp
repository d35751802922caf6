// Attribution engine: KP values, multi-scale per-modality attribution maps,
// and modality importance scores.
//
// A KP value approximates a feature group's Shapley value from two marginal
// contributions: adding the group to the empty coalition and adding it to the
// coalition of all other groups. For k groups the weights are 1/k and 1-1/k,
// the unique pair that sums to one with the second (k-1) times the first.
// Maps accumulate KP values over every granularity j = 2..k, each scaled by
// the granularity's share of the domain (j/l per element in 1-D, j^2/w^2 in
// 2-D), and are finally normalized by their sum.

#ifndef KAAP_ENGINE_HPP
#define KAAP_ENGINE_HPP

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/partition.hpp"
#include "kaap/predictor.hpp"
#include "kaap/types.hpp"

namespace kaap {

inline double marginal_contribution(double v_with, double v_without) {
  return v_with - v_without;
}

/// KP value of a feature group among k groups.
inline double kp_value(double mc_single, double mc_full, std::size_t k) {
  if (k < 2) throw ConfigError("kp_value requires k >= 2, got " + std::to_string(k));
  const double w_single = 1.0 / static_cast<double>(k);
  return w_single * mc_single + (1.0 - w_single) * mc_full;
}

/// Weights of the two marginal contributions for group count k.
struct KPWeights {
  std::size_t k;
  double single() const { return 1.0 / static_cast<double>(k); }
  double full() const { return 1.0 - 1.0 / static_cast<double>(k); }
};

/// Target class: the override when given, otherwise the argmax of the
/// prediction with ties broken by lowest class index.
inline int select_target(const ClassProbs& probs, std::optional<int> override = {}) {
  if (override) {
    if (*override < 0 || *override >= static_cast<int>(kNumClasses)) {
      throw ConfigError("target class override out of range: " + std::to_string(*override));
    }
    return *override;
  }
  return probs.argmax();
}

/// Per-element attribution for one modality at one target class.
struct AttributionMap {
  enum class Domain { image, speech_time, text };

  Domain domain = Domain::text;
  std::vector<std::size_t> shape;  // image: {w,w}; speech_time/text: {n}
  std::vector<double> values;
  bool normalized = false;  // set iff the raw sum was positive
  int target_class = 0;
  std::size_t k_used = 0;   // granularity ceiling after clamping
  bool k_clamped = false;   // k_max exceeded the domain size

  std::size_t size() const { return values.size(); }
};

/// KP values at k=3 treating image, speech and text as three players.
struct ModalityImportance {
  double image = 0.0;   // visual
  double speech = 0.0;  // spoken
  double text = 0.0;    // textual
  int target_class = 0;

  double get(Modality m) const {
    switch (m) {
      case Modality::image: return image;
      case Modality::speech: return speech;
      case Modality::text: return text;
    }
    return 0.0;
  }
};

struct EngineOptions {
  std::size_t k_max = 2;
  std::optional<int> target;   // defaults to the full-sample predicted class
  std::size_t threads = 1;
};

namespace detail {

/// Runs fn(0..count) across `threads` workers. Callers that need a
/// deterministic reduction store per-index results and fold them in order
/// afterwards. The first exception thrown by any worker is rethrown on the
/// calling thread after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&]() {
    try {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        if (failed.load(std::memory_order_relaxed)) return;
        fn(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      failed.store(true, std::memory_order_relaxed);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(threads, count);
  pool.reserve(n - 1);
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline void check_square(const Tensor& t, const char* what) {
  if (t.dim(0) != t.dim(1)) {
    throw ShapeError(std::string(what) + " attribution requires a square domain, got " +
                     t.shape_string());
  }
}

/// Score of the target class when only the probed modality carries content.
template <typename Content>
double probe_score(const Predictor& model, const MultimodalSample& sample, Modality modality,
                   const Content& content, int target) {
  MultimodalSample probe = zeroed_like(sample);
  switch (modality) {
    case Modality::image:
      if constexpr (std::is_same_v<Content, Tensor>) probe.image = content;
      break;
    case Modality::speech:
      if constexpr (std::is_same_v<Content, Tensor>) probe.speech = content;
      break;
    case Modality::text:
      if constexpr (std::is_same_v<Content, TokenSeq>) probe.text = content;
      break;
  }
  return model.predict(probe)[target];
}

struct GridTask {
  std::size_t granularity;
  Block2D block;
};

struct SpanTask {
  std::size_t granularity;
  Span1D span;
};

inline void finalize(AttributionMap& map) {
  double total = 0.0;
  for (double v : map.values) total += v;
  if (total > 0.0) {
    for (double& v : map.values) v /= total;
    map.normalized = true;
  }
}

inline int resolve_target(const Predictor& model, const MultimodalSample& sample,
                          const EngineOptions& options) {
  if (options.target) return select_target(ClassProbs{}, options.target);
  return select_target(model.predict(sample));
}

/// Shared 2-D path for image and speech. Produces the per-pixel w x w map.
inline AttributionMap grid_map(const Predictor& model, const MultimodalSample& sample,
                               Modality modality, const EngineOptions& options, int target) {
  const Tensor& content = modality == Modality::image ? sample.image : sample.speech;
  check_square(content, modality_name(modality));
  const std::size_t w = content.dim(0);

  AttributionMap map;
  map.domain = AttributionMap::Domain::image;
  map.shape = {w, w};
  map.values.assign(w * w, 0.0);
  map.target_class = target;
  map.k_used = std::min(options.k_max, w);
  map.k_clamped = map.k_used < options.k_max;

  const double p_full = probe_score(model, sample, modality, content, target);
  const double p_base = probe_score(model, sample, modality, Tensor::zeros(content.shape), target);

  std::vector<GridTask> tasks;
  for (std::size_t j = 2; j <= map.k_used; ++j) {
    for (const Block2D& block : make_parts_2d(w, j).blocks) tasks.push_back({j, block});
  }

  std::vector<double> kp(tasks.size());
  parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
    const GridTask& t = tasks[i];
    const double p_keep =
        probe_score(model, sample, modality, perturb(content, t.block, PerturbMode::keep_only), target);
    const double p_drop =
        probe_score(model, sample, modality, perturb(content, t.block, PerturbMode::drop), target);
    kp[i] = kp_value(p_keep - p_base, p_full - p_drop, t.granularity);
  });

  // Fixed-order accumulation keeps emitted files bit-reproducible regardless
  // of thread count.
  const double side = static_cast<double>(w);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const GridTask& t = tasks[i];
    const double j = static_cast<double>(t.granularity);
    const double weight = (j * j) / (side * side);
    for (std::size_t r = t.block.rows.begin; r < t.block.rows.end; ++r) {
      for (std::size_t c = t.block.cols.begin; c < t.block.cols.end; ++c) {
        map.values[r * w + c] += weight * kp[i];
      }
    }
  }
  return map;
}

inline AttributionMap text_map(const Predictor& model, const MultimodalSample& sample,
                               const EngineOptions& options, int target) {
  const TokenSeq& content = sample.text;
  if (content.empty()) throw ShapeError("text attribution requires at least one token");
  const std::size_t len = content.size();

  AttributionMap map;
  map.domain = AttributionMap::Domain::text;
  map.shape = {len};
  map.values.assign(len, 0.0);
  map.target_class = target;
  map.k_used = std::min(options.k_max, len);
  map.k_clamped = map.k_used < options.k_max;

  const double p_full = probe_score(model, sample, Modality::text, content, target);
  const double p_base =
      probe_score(model, sample, Modality::text, TokenSeq(content.size(), 0), target);

  std::vector<SpanTask> tasks;
  for (std::size_t j = 2; j <= map.k_used; ++j) {
    for (const Span1D& span : make_parts_1d(len, j).spans) tasks.push_back({j, span});
  }

  std::vector<double> kp(tasks.size());
  parallel_for(tasks.size(), options.threads, [&](std::size_t i) {
    const SpanTask& t = tasks[i];
    const double p_keep = probe_score(model, sample, Modality::text,
                                      perturb(content, t.span, PerturbMode::keep_only), target);
    const double p_drop = probe_score(model, sample, Modality::text,
                                      perturb(content, t.span, PerturbMode::drop), target);
    kp[i] = kp_value(p_keep - p_base, p_full - p_drop, t.granularity);
  });

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const SpanTask& t = tasks[i];
    const double weight = static_cast<double>(t.granularity) / static_cast<double>(len);
    for (std::size_t e = t.span.begin; e < t.span.end; ++e) map.values[e] += weight * kp[i];
  }
  return map;
}

/// Collapse a (F,T) grid map to the time axis by averaging over frequency.
inline AttributionMap average_frequency_axis(const AttributionMap& grid, std::size_t frames) {
  AttributionMap out;
  out.domain = AttributionMap::Domain::speech_time;
  out.shape = {frames};
  out.values.assign(frames, 0.0);
  out.target_class = grid.target_class;
  out.k_used = grid.k_used;
  out.k_clamped = grid.k_clamped;
  const std::size_t bands = grid.shape[0];
  for (std::size_t t = 0; t < frames; ++t) {
    double s = 0.0;
    for (std::size_t f = 0; f < bands; ++f) s += grid.values[f * frames + t];
    out.values[t] = s / static_cast<double>(bands);
  }
  return out;
}

}  // namespace detail

/// Attribution map for one modality of one sample. While a modality is being
/// probed all other modalities are zeroed, including for the full and
/// baseline reference predictions. k_max larger than the domain is clamped
/// (flagged on the result); a raw map with non-positive sum is returned
/// unnormalized.
inline AttributionMap kaap_map(const Predictor& model, const MultimodalSample& sample,
                               Modality modality, const EngineOptions& options) {
  if (options.k_max < 2) throw ConfigError("k_max must be at least 2");
  model.input_spec().check(sample);
  const int target = detail::resolve_target(model, sample, options);

  AttributionMap map;
  switch (modality) {
    case Modality::image:
      map = detail::grid_map(model, sample, Modality::image, options, target);
      break;
    case Modality::speech:
      map = detail::average_frequency_axis(
          detail::grid_map(model, sample, Modality::speech, options, target),
          sample.speech.dim(1));
      break;
    case Modality::text:
      map = detail::text_map(model, sample, options, target);
      break;
  }
  detail::finalize(map);
  return map;
}

/// Modality importance: KP values at k=3 over the three modalities. Uses the
/// full sample for p_f, the all-zero sample for p_b, and for each modality m
/// the only-m and all-but-m predictions.
inline ModalityImportance modality_importance(const Predictor& model,
                                              const MultimodalSample& sample,
                                              std::optional<int> target_override = {}) {
  model.input_spec().check(sample);
  const ClassProbs p_full_vec = model.predict(sample);
  const int target = select_target(p_full_vec, target_override);
  const double p_full = p_full_vec[target];
  const double p_base = predict_masked(model, sample, ModalityMask::all_excluded())[target];

  ModalityImportance result;
  result.target_class = target;
  for (Modality m : {Modality::image, Modality::speech, Modality::text}) {
    const double p_only = predict_masked(model, sample, ModalityMask::only(m))[target];
    const double p_rest = predict_masked(model, sample, ModalityMask::all_but(m))[target];
    const double s = kp_value(p_only - p_base, p_full - p_rest, 3);
    switch (m) {
      case Modality::image: result.image = s; break;
      case Modality::speech: result.speech = s; break;
      case Modality::text: result.text = s; break;
    }
  }
  return result;
}

/// Documented default granularity ceilings per modality.
inline std::size_t default_k(Modality m) {
  switch (m) {
    case Modality::image: return 7;
    case Modality::speech: return 7;
    case Modality::text: return 5;
  }
  return 2;
}

}  // namespace kaap

#endif  // KAAP_ENGINE_HPP
