#pragma once

// Deterministic synthetic checkpoint families.
//
//   pre        ~ N(0, pre_scale^2)       elementwise
//   c          ~ N(0, cluster_scale^2)   shared by every task
//   delta_t    ~ N(0, delta_scale^2)     per task
//   ft_t       = pre + (c + delta_t)
//
// Random numbers come from xoshiro256** seeded through splitmix64, with
// normals drawn by the Box-Muller transform. Draw order: all of pre (tensor
// order, row-major), then all of c, then delta_0, delta_1, ...

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "tvq/error.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

/// splitmix64 step (Steele, Lea, Flood); used to expand a 64-bit seed.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman, Vigna).
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SynthSpec {
  std::size_t n_tasks = 1;
  std::vector<Shape> tensor_shapes;
  double pre_scale = 0.05;
  double delta_scale = 0.005;
  double cluster_scale = 0.0;
  std::uint64_t seed = 0;
};

struct SynthFamily {
  TensorMap pre;
  std::vector<TensorMap> fts;
  std::vector<std::string> tasks;
};

inline std::string synth_tensor_name(std::size_t i) { return "layers." + std::to_string(i) + ".weight"; }

inline SynthFamily generate(const SynthSpec& spec) {
  if (spec.n_tasks < 1) fail("synth needs at least one task");
  for (double s : {spec.pre_scale, spec.delta_scale, spec.cluster_scale}) {
    if (!(s >= 0.0) || !std::isfinite(s)) fail("synth scales must be finite and non-negative");
  }
  Xoshiro256 rng(spec.seed);
  auto draw = [&](double scale) {
    TensorMap m;
    for (std::size_t i = 0; i < spec.tensor_shapes.size(); ++i) {
      Tensor t(spec.tensor_shapes[i]);
      for (float& v : t.data()) v = static_cast<float>(scale * rng.normal());
      m.insert(synth_tensor_name(i), std::move(t));
    }
    return m;
  };
  SynthFamily fam;
  fam.pre = draw(spec.pre_scale);
  const TensorMap shared = draw(spec.cluster_scale);
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    const TensorMap delta = draw(spec.delta_scale);
    fam.fts.push_back(zip_maps(fam.pre, zip_maps(shared, delta, [](float c, float d) { return c + d; }),
                               [](float p, float d) { return p + d; }));
    fam.tasks.push_back("task" + std::to_string(t));
  }
  return fam;
}

}  // namespace tvq
