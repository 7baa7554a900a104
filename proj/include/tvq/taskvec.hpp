#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tvq/artifact.hpp"
#include "tvq/digest.hpp"
#include "tvq/error.hpp"
#include "tvq/parallel.hpp"
#include "tvq/quantizer.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

/// Elementwise difference between a fine-tuned checkpoint and the
/// pre-trained checkpoint it was tuned from.
struct TaskVector {
  TensorMap tensors;
  std::string source_task;
};

inline TaskVector task_vector(const TensorMap& ft, const TensorMap& pre, std::string task = {}) {
  return TaskVector{zip_maps(pre, ft, [](float p, float f) { return f - p; }), std::move(task)};
}

inline TensorMap reconstruct(const TensorMap& pre, const TaskVector& tv) {
  return add_maps(pre, tv.tensors);
}

/// Quantizes every tensor of `map` independently (one QParams per tensor).
inline QuantizedArtifact quantize_map(const TensorMap& map, int bits, Role role, ArtifactMeta meta,
                                      unsigned threads = 1) {
  require_supported_bits(bits);
  std::vector<QuantizedTensor> slots(map.size());
  parallel_for(map.size(), threads, [&](std::size_t i) { slots[i] = quantize_tensor(map.value_at(i), bits); });
  QuantizedArtifact a;
  a.role = role;
  a.meta = std::move(meta);
  a.meta.bits = bits;
  for (std::size_t i = 0; i < slots.size(); ++i) a.tensors.insert(map.name_at(i), std::move(slots[i]));
  return a;
}

/// Raw dequantized values: a checkpoint for FQ, a delta for every other role.
inline TensorMap dequantize_artifact(const QuantizedArtifact& a, unsigned threads = 1) {
  std::vector<Tensor> slots(a.tensors.size());
  parallel_for(slots.size(), threads, [&](std::size_t i) { slots[i] = a.tensors.value_at(i).dequantized(); });
  TensorMap out;
  for (std::size_t i = 0; i < slots.size(); ++i) out.insert(a.tensors.name_at(i), std::move(slots[i]));
  return out;
}

/// Fine-tuned checkpoint quantization: the checkpoint itself is quantized.
inline QuantizedArtifact quantize_fq(const TensorMap& ft, int bits, std::string task = {}, unsigned threads = 1) {
  return quantize_map(ft, bits, Role::fq, ArtifactMeta{std::move(task), Digest{}, bits}, threads);
}

/// Task vector quantization: ft - pre is quantized; the artifact records the
/// digest of `pre` so reconstruction can detect a mismatched base.
inline QuantizedArtifact quantize_tvq(const TensorMap& ft, const TensorMap& pre, int bits, std::string task = {},
                                      unsigned threads = 1) {
  const auto tv = task_vector(ft, pre);
  return quantize_map(tv.tensors, bits, Role::tvq, ArtifactMeta{std::move(task), digest_tensor_map(pre), bits},
                      threads);
}

/// Reconstructed fine-tuned checkpoint for an FQ or TVQ artifact.
inline TensorMap reconstruct_checkpoint(const QuantizedArtifact& a, const TensorMap& pre, unsigned threads = 1) {
  auto values = dequantize_artifact(a, threads);
  if (a.role == Role::fq) {
    require_same_layout(pre, values);
    return values;
  }
  if (a.role != Role::tvq) fail("artifact role " + std::string(to_string(a.role)) + " needs its bundle to reconstruct");
  return add_maps(pre, values);
}

/// Task vector as seen through an FQ or TVQ artifact: dequantized delta, or
/// dequantized checkpoint minus pre.
inline TaskVector reconstructed_task_vector(const QuantizedArtifact& a, const TensorMap& pre, unsigned threads = 1) {
  auto values = dequantize_artifact(a, threads);
  if (a.role == Role::fq) return task_vector(values, pre, a.meta.task);
  if (a.role != Role::tvq) fail("artifact role " + std::string(to_string(a.role)) + " needs its bundle to reconstruct");
  require_same_layout(pre, values);
  return TaskVector{std::move(values), a.meta.task};
}

inline constexpr std::size_t kHistogramBins = 64;

struct TensorRange {
  std::string name;
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double range = 0.0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct RangeStats {
  std::vector<TensorRange> tensors;
  double global_min = 0.0;
  double global_max = 0.0;
  std::size_t count = 0;
  std::array<std::size_t, kHistogramBins> histogram{};  // equal-width bins over [global_min, global_max]

  [[nodiscard]] double global_range() const { return global_max - global_min; }
};

/// Per-tensor and global extrema, moments and a 64-bin histogram.
/// Zero-element tensors are reported with count 0 and excluded from the
/// global figures.
inline RangeStats range_stats(const TensorMap& map) {
  if (map.empty()) fail("range_stats of an empty map");
  RangeStats s;
  s.global_min = std::numeric_limits<double>::infinity();
  s.global_max = -s.global_min;
  for (const auto& [name, t] : map) {
    TensorRange r;
    r.name = name;
    r.count = t.size();
    if (r.count > 0) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double sum = 0.0;
      for (float v : t.data()) {
        if (!std::isfinite(v)) fail("non-finite value in tensor '" + name + "'");
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
        sum += v;
      }
      r.min = lo;
      r.max = hi;
      r.range = hi - lo;
      r.mean = sum / static_cast<double>(r.count);
      double sq = 0.0;
      for (float v : t.data()) sq += (v - r.mean) * (v - r.mean);
      r.stddev = std::sqrt(sq / static_cast<double>(r.count));
      s.global_min = std::min(s.global_min, lo);
      s.global_max = std::max(s.global_max, hi);
      s.count += r.count;
    }
    s.tensors.push_back(std::move(r));
  }
  if (s.count == 0) {
    s.global_min = s.global_max = 0.0;
    return s;
  }
  const double width = s.global_range();
  for (const auto& [_, t] : map) {
    for (float v : t.data()) {
      std::size_t bin = 0;
      if (width > 0.0) {
        const double pos = (v - s.global_min) / width * static_cast<double>(kHistogramBins);
        bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(pos));
      }
      ++s.histogram[bin];
    }
  }
  return s;
}

}  // namespace tvq
