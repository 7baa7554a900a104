#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvq/error.hpp"
#include "tvq/named_map.hpp"

namespace tvq {

using Shape = std::vector<std::uint64_t>;

/// Product of the dimensions; an empty shape is a scalar (one element).
inline std::uint64_t element_count(const Shape& shape) {
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) fail("shape element count overflows");
    n *= d;
  }
  return n;
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major float32 tensor. The element count always matches the shape.
class Tensor {
 public:
  Tensor() : shape_{0} {}
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(checked_count(shape_), 0.0f) {}
  Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_count(shape_) != data_.size()) {
      fail("shape/length mismatch: shape " + shape_string(shape_) + " vs " + std::to_string(data_.size()) +
           " values");
    }
  }

  [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::span<const float> data() const noexcept { return data_; }
  [[nodiscard]] std::span<float> data() noexcept { return data_; }

  // Bit-level equality: -0.0 != +0.0 and identical NaN payloads compare equal.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.shape_ != b.shape_ || a.data_.size() != b.data_.size()) return false;
    for (std::size_t i = 0; i < a.data_.size(); ++i) {
      if (std::bit_cast<std::uint32_t>(a.data_[i]) != std::bit_cast<std::uint32_t>(b.data_[i])) return false;
    }
    return true;
  }

 private:
  static std::size_t checked_count(const Shape& shape) {
    const auto n = element_count(shape);
    if (n > std::numeric_limits<std::size_t>::max() / sizeof(float)) fail("tensor too large");
    return static_cast<std::size_t>(n);
  }

  Shape shape_;
  std::vector<float> data_;
};

using TensorMap = NamedMap<Tensor>;

inline std::size_t parameter_count(const TensorMap& map) {
  std::size_t n = 0;
  for (const auto& [_, t] : map) n += t.size();
  return n;
}

/// Throws unless both maps carry the same names with the same shapes.
/// Order may differ; results of binary operations follow `a`'s order.
inline void require_same_layout(const TensorMap& a, const TensorMap& b, const char* what = "layout mismatch") {
  if (a.size() != b.size()) {
    fail(std::string(what) + ": " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " tensors");
  }
  for (const auto& [name, t] : a) {
    const Tensor* other = b.find(name);
    if (!other) fail(std::string(what) + ": tensor '" + name + "' missing");
    if (other->shape() != t.shape()) {
      fail(std::string(what) + ": tensor '" + name + "' shape " + shape_string(t.shape()) + " vs " +
           shape_string(other->shape()));
    }
  }
}

/// out[i] = op(a[i], b[i]) per tensor, in `a`'s order.
template <typename Op>
TensorMap zip_maps(const TensorMap& a, const TensorMap& b, Op op) {
  require_same_layout(a, b);
  TensorMap out;
  for (const auto& [name, ta] : a) {
    const Tensor& tb = b.at(name);
    Tensor r(ta.shape());
    auto x = ta.data();
    auto y = tb.data();
    auto z = r.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = op(x[i], y[i]);
    out.insert(name, std::move(r));
  }
  return out;
}

/// Copy of `src` with tensors arranged in `order`'s name order.
inline TensorMap reordered(const TensorMap& src, const TensorMap& order) {
  require_same_layout(order, src);
  TensorMap out;
  for (const auto& [name, _] : order) out.insert(name, src.at(name));
  return out;
}

inline TensorMap add_maps(const TensorMap& a, const TensorMap& b) {
  return zip_maps(a, b, [](float x, float y) { return x + y; });
}

inline TensorMap subtract_maps(const TensorMap& a, const TensorMap& b) {
  return zip_maps(a, b, [](float x, float y) { return x - y; });
}

}  // namespace tvq
