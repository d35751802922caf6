// Dice-coefficient similarity between attribution maps and the granularity
// selection procedure: compute maps at k = 2..k_max, compare adjacent k by
// dice over top-fraction masks, pick the first k where the curve crosses the
// convergence threshold.

#ifndef KAAP_KSELECT_HPP
#define KAAP_KSELECT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <vector>

#include "kaap/engine.hpp"
#include "kaap/errors.hpp"

namespace kaap {

namespace detail {

/// Indices of the top floor(q*n) values; ties broken by lowest index.
inline std::vector<std::size_t> top_fraction_mask(const std::vector<double>& values, double q) {
  const std::size_t n = values.size();
  const std::size_t count =
      std::min(n, static_cast<std::size_t>(std::floor(q * static_cast<double>(n) + 1e-12)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace detail

/// Dice coefficient of two maps: binarize each to its top-q-fraction
/// elements, return 2|A n B| / (|A| + |B|). Two empty masks count as
/// completely similar.
inline double dice(const AttributionMap& a, const AttributionMap& b, double q = 0.25) {
  if (a.domain != b.domain || a.shape != b.shape) {
    throw ShapeError("dice requires maps over the same domain");
  }
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("dice fraction must be in (0, 1]");

  const std::vector<std::size_t> mask_a = detail::top_fraction_mask(a.values, q);
  const std::vector<std::size_t> mask_b = detail::top_fraction_mask(b.values, q);
  if (mask_a.empty() && mask_b.empty()) return 1.0;

  std::size_t overlap = 0;
  std::size_t ia = 0, ib = 0;
  while (ia < mask_a.size() && ib < mask_b.size()) {
    if (mask_a[ia] == mask_b[ib]) {
      ++overlap;
      ++ia;
      ++ib;
    } else if (mask_a[ia] < mask_b[ib]) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return 2.0 * static_cast<double>(overlap) /
         static_cast<double>(mask_a.size() + mask_b.size());
}

/// Mean dice between maps at adjacent granularities, recorded at the larger
/// k, plus the selected granularity.
struct DiceCurve {
  Modality modality = Modality::image;
  std::vector<std::pair<std::size_t, double>> points;  // (k, dice(k-1 vs k)) for k in 3..k_max
  std::size_t selected_k = 0;
  bool converged = false;  // false when every point stayed below the threshold
};

struct SelectKOptions {
  std::size_t k_max = 10;
  double threshold = 0.95;  // convergence: first adjacent pair at least this similar
  double q = 0.25;          // top fraction used for binarization
  std::optional<int> target;
  std::size_t threads = 1;
};

/// Granularity selection over a sample set. Maps are computed per sample for
/// every k in 2..k_max; the curve holds the mean dice of adjacent-k maps, and
/// selected_k is the smallest k meeting the threshold (k_max when none does).
inline DiceCurve select_k(const Predictor& model, const std::vector<MultimodalSample>& samples,
                          Modality modality, const SelectKOptions& options = {}) {
  if (samples.empty()) throw ConfigError("select_k requires a non-empty sample set");
  if (options.k_max < 3) throw ConfigError("select_k needs k_max >= 3 to compare adjacent k");

  DiceCurve curve;
  curve.modality = modality;

  std::vector<std::vector<AttributionMap>> maps(samples.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    maps[s].reserve(options.k_max - 1);
    for (std::size_t k = 2; k <= options.k_max; ++k) {
      EngineOptions eo;
      eo.k_max = k;
      eo.target = options.target;
      eo.threads = options.threads;
      maps[s].push_back(kaap_map(model, samples[s], modality, eo));
    }
  }

  for (std::size_t k = 3; k <= options.k_max; ++k) {
    double total = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      total += dice(maps[s][k - 3], maps[s][k - 2], options.q);
    }
    curve.points.emplace_back(k, total / static_cast<double>(samples.size()));
  }

  curve.selected_k = options.k_max;
  for (const auto& [k, value] : curve.points) {
    if (value >= options.threshold) {
      curve.selected_k = k;
      curve.converged = true;
      break;
    }
  }
  return curve;
}

}  // namespace kaap

#endif  // KAAP_KSELECT_HPP
