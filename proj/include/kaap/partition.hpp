// Deterministic division of 1-D ranges and square 2-D grids into balanced
// contiguous parts, plus construction of keep-only / drop perturbed inputs.

#ifndef KAAP_PARTITION_HPP
#define KAAP_PARTITION_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "kaap/errors.hpp"
#include "kaap/tensor.hpp"
#include "kaap/types.hpp"

namespace kaap {

/// Half-open contiguous index range [begin, end).
struct Span1D {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

/// Rectangular block: row span x column span. Blocks span all channels.
struct Block2D {
  Span1D rows;
  Span1D cols;
};

/// Deterministic division of [0,l) into j ranges, or of a w x w grid into
/// j x j blocks. Parts are pairwise disjoint, cover the domain, and sizes
/// along an axis differ by at most one: the first (l mod j) parts get
/// ceil(l/j) elements, the rest floor(l/j).
struct PartitionScheme {
  enum class Kind { linear, grid };

  Kind kind = Kind::linear;
  std::size_t domain = 0;  // l for linear, side w for grid

  std::vector<Span1D> spans;    // linear: j parts
  std::vector<Block2D> blocks;  // grid: j*j blocks, row-major over the grid

  std::size_t part_count() const {
    return kind == Kind::linear ? spans.size() : blocks.size();
  }
};

namespace detail {

inline std::vector<Span1D> balanced_spans(std::size_t length, std::size_t parts) {
  std::vector<Span1D> spans;
  spans.reserve(parts);
  const std::size_t base = length / parts;
  const std::size_t extra = length % parts;  // first `extra` parts get one more
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t len = base + (p < extra ? 1 : 0);
    spans.push_back({cursor, cursor + len});
    cursor += len;
  }
  return spans;
}

inline void check_part_count(std::size_t length, std::size_t parts) {
  if (parts < 2) {
    throw ConfigError("part count must be at least 2, got " + std::to_string(parts));
  }
  if (length < 1) {
    throw ConfigError("domain length must be at least 1");
  }
  if (parts > length) {
    throw ConfigError("part count " + std::to_string(parts) +
                      " exceeds domain length " + std::to_string(length));
  }
}

}  // namespace detail

inline PartitionScheme make_parts_1d(std::size_t length, std::size_t parts) {
  detail::check_part_count(length, parts);
  PartitionScheme scheme;
  scheme.kind = PartitionScheme::Kind::linear;
  scheme.domain = length;
  scheme.spans = detail::balanced_spans(length, parts);
  return scheme;
}

inline PartitionScheme make_parts_2d(std::size_t side, std::size_t parts_per_axis) {
  detail::check_part_count(side, parts_per_axis);
  PartitionScheme scheme;
  scheme.kind = PartitionScheme::Kind::grid;
  scheme.domain = side;
  const std::vector<Span1D> axis = detail::balanced_spans(side, parts_per_axis);
  scheme.blocks.reserve(parts_per_axis * parts_per_axis);
  for (const Span1D& r : axis) {
    for (const Span1D& c : axis) {
      scheme.blocks.push_back({r, c});
    }
  }
  return scheme;
}

enum class PerturbMode {
  keep_only,  // zeros everywhere except the part
  drop        // copy of the input with the part zeroed
};

namespace detail {

inline void check_block_bounds(const Tensor& t, const Block2D& part) {
  if (t.rank() < 2) throw ShapeError("2-D perturbation needs rank >= 2, got " + t.shape_string());
  if (part.rows.end > t.dim(0) || part.cols.end > t.dim(1) ||
      part.rows.begin > part.rows.end || part.cols.begin > part.cols.end) {
    throw ShapeError("block out of bounds for tensor " + t.shape_string());
  }
}

}  // namespace detail

/// 2-D perturbation over the leading (row, col) axes; any trailing channel
/// axis is zeroed or kept wholesale with its pixel.
inline Tensor perturb(const Tensor& input, const Block2D& part, PerturbMode mode) {
  detail::check_block_bounds(input, part);
  const std::size_t channels = input.rank() >= 3 ? input.stride(1) : 1;
  const std::size_t row_stride = input.stride(0);
  Tensor out = (mode == PerturbMode::keep_only) ? Tensor::zeros(input.shape) : input;
  for (std::size_t r = part.rows.begin; r < part.rows.end; ++r) {
    for (std::size_t c = part.cols.begin; c < part.cols.end; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const std::size_t idx = r * row_stride + c * channels + ch;
        out.data[idx] = (mode == PerturbMode::keep_only) ? input.data[idx] : 0.0;
      }
    }
  }
  return out;
}

/// 1-D perturbation of a flat tensor (rank 1).
inline Tensor perturb(const Tensor& input, const Span1D& part, PerturbMode mode) {
  if (input.rank() != 1) {
    throw ShapeError("1-D perturbation needs rank 1, got " + input.shape_string());
  }
  if (part.end > input.size() || part.begin > part.end) {
    throw ShapeError("span out of bounds for tensor " + input.shape_string());
  }
  Tensor out = (mode == PerturbMode::keep_only) ? Tensor::zeros(input.shape) : input;
  for (std::size_t i = part.begin; i < part.end; ++i) {
    out.data[i] = (mode == PerturbMode::keep_only) ? input.data[i] : 0.0;
  }
  return out;
}

/// Token-sequence perturbation; "zero" is the padding token.
inline TokenSeq perturb(const TokenSeq& input, const Span1D& part, PerturbMode mode) {
  if (part.end > input.size() || part.begin > part.end) {
    throw ShapeError("span out of bounds for token sequence of length " +
                     std::to_string(input.size()));
  }
  TokenSeq out = (mode == PerturbMode::keep_only) ? TokenSeq(input.size(), 0) : input;
  for (std::size_t i = part.begin; i < part.end; ++i) {
    out[i] = (mode == PerturbMode::keep_only) ? input[i] : 0;
  }
  return out;
}

}  // namespace kaap

#endif  // KAAP_PARTITION_HPP
