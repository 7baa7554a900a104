#pragma once

// Residual task vector quantization.
//
// Each task vector ft_t - pre is split into a shared base (mean(ft) - pre),
// stored once at b_base bits, and a per-task offset stored at b_offset bits.
// With error correction the offsets are taken against the dequantized base,
// so the base's rounding error is carried by the offsets instead of being
// added on top of theirs.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tvq/artifact.hpp"
#include "tvq/digest.hpp"
#include "tvq/error.hpp"
#include "tvq/parallel.hpp"
#include "tvq/taskvec.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

struct RtvqConfig {
  int b_base = 3;
  int b_offset = 2;
  bool error_correction = true;
};

/// b_offset + b_base / n_tasks: storage per task once the base is amortized.
inline double effective_bits(int b_offset, int b_base, std::size_t n_tasks) {
  if (n_tasks == 0) fail("effective_bits needs at least one task");
  return static_cast<double>(b_offset) + static_cast<double>(b_base) / static_cast<double>(n_tasks);
}

/// Elementwise mean of the fine-tuned checkpoints, accumulated in double and
/// divided once so the result does not depend on task order.
inline TensorMap average_checkpoint(std::span<const TensorMap> fts, unsigned threads = 1) {
  if (fts.empty()) fail("need at least one fine-tuned checkpoint");
  const TensorMap& first = fts.front();
  for (const auto& ft : fts) require_same_layout(first, ft);
  std::vector<Tensor> slots(first.size());
  const double n = static_cast<double>(fts.size());
  parallel_for(first.size(), threads, [&](std::size_t i) {
    const auto& name = first.name_at(i);
    Tensor avg(first.value_at(i).shape());
    std::vector<double> acc(avg.size(), 0.0);
    for (const auto& ft : fts) {
      auto src = ft.at(name).data();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
    }
    auto dst = avg.data();
    for (std::size_t k = 0; k < acc.size(); ++k) dst[k] = static_cast<float>(acc[k] / n);
    slots[i] = std::move(avg);
  });
  TensorMap out;
  for (std::size_t i = 0; i < slots.size(); ++i) out.insert(first.name_at(i), std::move(slots[i]));
  return out;
}

/// Shared base vector: mean(fts) - pre.
inline TaskVector compute_base(std::span<const TensorMap> fts, const TensorMap& pre, unsigned threads = 1) {
  return task_vector(reordered(average_checkpoint(fts, threads), pre), pre, "base");
}

/// Averaged checkpoint rebuilt from the quantized base: dequantize(quantize(base)) + pre.
inline TensorMap error_corrected_avg(const TaskVector& base, const TensorMap& pre, int b_base, unsigned threads = 1) {
  const auto q = quantize_map(base.tensors, b_base, Role::rtvq_base, ArtifactMeta{}, threads);
  return add_maps(dequantize_artifact(q, threads), pre);
}

/// Default task names "task0", "task1", ... when none are supplied.
inline std::vector<std::string> default_task_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back("task" + std::to_string(i));
  return names;
}

inline RtvqBundle rtvq_quantize(std::span<const TensorMap> fts, const TensorMap& pre, const RtvqConfig& cfg,
                                std::vector<std::string> tasks = {}, unsigned threads = 1) {
  require_supported_bits(cfg.b_base);
  require_supported_bits(cfg.b_offset);
  if (fts.empty()) fail("need at least one fine-tuned checkpoint");
  if (tasks.empty()) tasks = default_task_names(fts.size());
  if (tasks.size() != fts.size()) fail("task name count does not match checkpoint count");
  for (const auto& ft : fts) require_same_layout(pre, ft);

  const Digest pre_digest = digest_tensor_map(pre);
  const auto avg = reordered(average_checkpoint(fts, threads), pre);
  const auto base = task_vector(avg, pre, "base");

  RtvqBundle bundle;
  bundle.base = quantize_map(base.tensors, cfg.b_base, Role::rtvq_base, ArtifactMeta{"base", pre_digest, cfg.b_base},
                             threads);
  const TensorMap anchor = cfg.error_correction ? add_maps(dequantize_artifact(bundle.base, threads), pre) : avg;

  bundle.offsets.resize(fts.size());
  parallel_for(fts.size(), threads, [&](std::size_t t) {
    const auto offset = zip_maps(anchor, fts[t], [](float a, float f) { return f - a; });
    bundle.offsets[t] =
        quantize_map(offset, cfg.b_offset, Role::rtvq_offset, ArtifactMeta{tasks[t], pre_digest, cfg.b_offset});
  });
  bundle.manifest = BundleManifest{std::move(tasks), cfg.b_base, cfg.b_offset, fts.size(), pre_digest};
  validate_bundle(bundle);
  return bundle;
}

/// dequantize(offset_t) + dequantize(base).
inline TaskVector rtvq_reconstruct(const RtvqBundle& bundle, std::string_view task, unsigned threads = 1) {
  validate_bundle(bundle);
  const auto& names = bundle.manifest.tasks;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != task) continue;
    auto delta = add_maps(dequantize_artifact(bundle.offsets[i], threads), dequantize_artifact(bundle.base, threads));
    return TaskVector{std::move(delta), std::string(task)};
  }
  fail("unknown task '" + std::string(task) + "'");
}

}  // namespace tvq
