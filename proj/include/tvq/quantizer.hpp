#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tvq/bitpack.hpp"
#include "tvq/error.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

/// Per-tensor asymmetric affine quantization parameters.
///
/// A tensor whose values are all equal cannot be scaled (zero range). It is
/// stored as the constant sentinel: scale == 0, zero_point == 0, every code 0,
/// and `constant` holds the value that dequantization reproduces exactly.
struct QParams {
  float scale = 0.0f;
  std::int32_t zero_point = 0;
  int bits = 8;
  float constant = 0.0f;

  [[nodiscard]] bool is_constant() const noexcept { return scale == 0.0f; }
  [[nodiscard]] std::uint32_t max_code() const noexcept { return (1u << bits) - 1u; }

  friend bool operator==(const QParams& a, const QParams& b) {
    return std::bit_cast<std::uint32_t>(a.scale) == std::bit_cast<std::uint32_t>(b.scale) &&
           a.zero_point == b.zero_point && a.bits == b.bits &&
           std::bit_cast<std::uint32_t>(a.constant) == std::bit_cast<std::uint32_t>(b.constant);
  }
};

struct ErrorReport {
  double l2 = 0.0;
  double max_abs = 0.0;
  double normalized_l2 = 0.0;  // l2 / element count
};

/// Round half away from zero (std::round semantics).
inline double round_half_away(double x) noexcept { return std::round(x); }

inline QParams make_constant_params(float value, int bits) {
  QParams qp;
  qp.bits = bits;
  qp.constant = value;
  return qp;
}

/// scale = (max - min) / (2^b - 1), zero_point = -round(min / scale).
/// Both are derived in double from the exact extrema; the scale is then
/// stored as float32 and used as-is by quantize/dequantize.
inline QParams compute_qparams(std::span<const float> data, int bits) {
  require_supported_bits(bits);
  if (data.empty()) fail("cannot quantize empty data");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (float v : data) {
    if (!std::isfinite(v)) fail("non-finite value in quantizer input");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  if (hi == lo) return make_constant_params(data.front(), bits);

  const double levels = static_cast<double>((1u << bits) - 1u);
  const double step = (hi - lo) / levels;
  const auto scale = static_cast<float>(step);
  if (scale == 0.0f || !std::isfinite(scale)) {
    // Range below float32 resolution of the step; keep the midpoint.
    return make_constant_params(static_cast<float>(lo + (hi - lo) / 2), bits);
  }
  const double zp = -round_half_away(lo / step);
  if (zp > std::numeric_limits<std::int32_t>::max() || zp < std::numeric_limits<std::int32_t>::min()) {
    fail("zero-point out of int32 range");
  }
  QParams qp;
  qp.scale = scale;
  qp.zero_point = static_cast<std::int32_t>(zp);
  qp.bits = bits;
  return qp;
}

/// Unclamped code round(x / scale) + zero_point; exposed for bound analysis.
inline double raw_code(float x, const QParams& qp) noexcept {
  return round_half_away(static_cast<double>(x) / static_cast<double>(qp.scale)) + qp.zero_point;
}

inline std::vector<std::uint8_t> quantize(std::span<const float> data, const QParams& qp) {
  require_supported_bits(qp.bits);
  std::vector<std::uint8_t> codes(data.size(), 0);
  if (qp.is_constant()) return codes;
  const double top = qp.max_code();
  for (std::size_t i = 0; i < data.size(); ++i) {
    codes[i] = static_cast<std::uint8_t>(std::clamp(raw_code(data[i], qp), 0.0, top));
  }
  return codes;
}

inline float dequantize_code(std::uint32_t code, const QParams& qp) noexcept {
  if (qp.is_constant()) return qp.constant;
  return static_cast<float>(static_cast<double>(qp.scale) *
                            (static_cast<double>(code) - static_cast<double>(qp.zero_point)));
}

inline std::vector<float> dequantize(std::span<const std::uint8_t> codes, const QParams& qp) {
  require_supported_bits(qp.bits);
  std::vector<float> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] > qp.max_code()) fail("code " + std::to_string(codes[i]) + " out of range");
    out[i] = dequantize_code(codes[i], qp);
  }
  return out;
}

inline ErrorReport quant_error(std::span<const float> original, std::span<const float> reconstructed) {
  if (original.size() != reconstructed.size()) {
    fail("length mismatch: " + std::to_string(original.size()) + " vs " + std::to_string(reconstructed.size()));
  }
  double sq = 0.0;
  double mx = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double d = static_cast<double>(original[i]) - static_cast<double>(reconstructed[i]);
    sq += d * d;
    mx = std::max(mx, std::abs(d));
  }
  ErrorReport r;
  r.l2 = std::sqrt(sq);
  r.max_abs = mx;
  r.normalized_l2 = original.empty() ? 0.0 : r.l2 / static_cast<double>(original.size());
  return r;
}

/// Flattened error over every tensor, in `original`'s name order.
inline ErrorReport quant_error(const TensorMap& original, const TensorMap& reconstructed) {
  require_same_layout(original, reconstructed);
  double sq = 0.0;
  double mx = 0.0;
  std::size_t n = 0;
  for (const auto& [name, t] : original) {
    const auto e = quant_error(t.data(), reconstructed.at(name).data());
    sq += e.l2 * e.l2;
    mx = std::max(mx, e.max_abs);
    n += t.size();
  }
  ErrorReport r;
  r.l2 = std::sqrt(sq);
  r.max_abs = mx;
  r.normalized_l2 = n == 0 ? 0.0 : r.l2 / static_cast<double>(n);
  return r;
}

/// One quantized tensor: shape, parameters and the packed code bitstream.
struct QuantizedTensor {
  Shape shape;
  QParams params;
  std::vector<std::uint8_t> codes;  // packed, packed_size(count, bits) bytes

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(element_count(shape)); }
  [[nodiscard]] std::vector<std::uint8_t> unpacked_codes() const { return unpack(codes, size(), params.bits); }
  [[nodiscard]] Tensor dequantized() const {
    return Tensor(shape, dequantize(unpacked_codes(), params));
  }

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

inline QuantizedTensor quantize_tensor(const Tensor& t, int bits) {
  QuantizedTensor q;
  q.shape = t.shape();
  if (t.size() == 0) {
    require_supported_bits(bits);
    q.params = make_constant_params(0.0f, bits);
    return q;
  }
  q.params = compute_qparams(t.data(), bits);
  q.codes = pack(quantize(t.data(), q.params), bits);
  return q;
}

}  // namespace tvq
