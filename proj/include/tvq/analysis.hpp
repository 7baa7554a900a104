#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tvq/artifact.hpp"
#include "tvq/container.hpp"
#include "tvq/error.hpp"
#include "tvq/parallel.hpp"
#include "tvq/quantizer.hpp"
#include "tvq/rtvq.hpp"
#include "tvq/taskvec.hpp"

namespace tvq {

/// Mean reconstruction error of one quantization path over all tasks.
struct PathError {
  std::string path;  // "FQ", "TVQ" or "RTVQ"
  int bits = 0;      // FQ/TVQ bit-width; 0 for RTVQ
  int b_base = 0;
  int b_offset = 0;
  double effective_bits = 0.0;
  double normalized_l2 = 0.0;  // arithmetic mean over tasks of l2 / parameter count
  double l2 = 0.0;             // arithmetic mean over tasks
  double max_abs = 0.0;        // worst over tasks
};

namespace detail {

inline PathError summarize(std::string path, std::span<const ErrorReport> per_task) {
  PathError e;
  e.path = std::move(path);
  for (const auto& r : per_task) {
    e.normalized_l2 += r.normalized_l2;
    e.l2 += r.l2;
    e.max_abs = std::max(e.max_abs, r.max_abs);
  }
  const auto n = static_cast<double>(per_task.size());
  e.normalized_l2 /= n;
  e.l2 /= n;
  return e;
}

}  // namespace detail

/// Distance between each true task vector and its reconstruction through the
/// FQ and TVQ paths at every bit-width in `bits_grid`, and through RTVQ for
/// every (b_base, b_offset) pair in `rtvq_grid`.
inline std::vector<PathError> compare_paths(const TensorMap& pre, std::span<const TensorMap> fts,
                                            std::span<const int> bits_grid,
                                            std::span<const std::pair<int, int>> rtvq_grid,
                                            bool error_correction = true, unsigned threads = 1) {
  if (fts.empty()) fail("compare needs at least one task");
  std::vector<TaskVector> truth;
  for (const auto& ft : fts) truth.push_back(task_vector(ft, pre));
  std::vector<PathError> rows;
  std::vector<ErrorReport> errs(fts.size());
  for (int bits : bits_grid) {
    require_supported_bits(bits);
    parallel_for(fts.size(), threads, [&](std::size_t t) {
      const auto q = quantize_fq(fts[t], bits);
      errs[t] = quant_error(truth[t].tensors, reconstructed_task_vector(q, pre).tensors);
    });
    rows.push_back(detail::summarize("FQ", errs));
    rows.back().bits = bits;
    rows.back().effective_bits = bits;
    parallel_for(fts.size(), threads, [&](std::size_t t) {
      const auto q = quantize_tvq(fts[t], pre, bits);
      errs[t] = quant_error(truth[t].tensors, reconstructed_task_vector(q, pre).tensors);
    });
    rows.push_back(detail::summarize("TVQ", errs));
    rows.back().bits = bits;
    rows.back().effective_bits = bits;
  }
  for (const auto& [bb, bo] : rtvq_grid) {
    const auto bundle = rtvq_quantize(fts, pre, RtvqConfig{bb, bo, error_correction}, {}, threads);
    parallel_for(fts.size(), threads, [&](std::size_t t) {
      errs[t] = quant_error(truth[t].tensors, rtvq_reconstruct(bundle, bundle.manifest.tasks[t]).tensors);
    });
    rows.push_back(detail::summarize("RTVQ", errs));
    rows.back().b_base = bb;
    rows.back().b_offset = bo;
    rows.back().effective_bits = effective_bits(bo, bb, fts.size());
  }
  return rows;
}

/// Fraction of elements that dequantize to exactly zero: codes equal to the
/// zero-point, or every element of a constant-zero sentinel tensor.
inline double sparsity(const QuantizedArtifact& a) {
  if (a.role == Role::fq) fail("sparsity is defined for task-vector artifacts, not FQ checkpoints");
  std::size_t zeros = 0;
  std::size_t total = 0;
  for (const auto& [_, q] : a.tensors) {
    const std::size_t n = q.size();
    total += n;
    if (q.params.is_constant()) {
      if (q.params.constant == 0.0f) zeros += n;
      continue;
    }
    if (q.params.zero_point < 0 || static_cast<std::uint32_t>(q.params.zero_point) > q.params.max_code()) continue;
    for (auto c : q.unpacked_codes()) zeros += (c == static_cast<std::uint32_t>(q.params.zero_point));
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

using Matrix = std::vector<std::vector<double>>;

/// Pairwise cosine similarity of flattened task vectors (flattened in the
/// first vector's tensor order). Symmetric with an exact unit diagonal.
inline Matrix cosine_matrix(std::span<const TaskVector> tvs) {
  if (tvs.size() < 2) fail("cosine matrix needs at least two task vectors");
  const TensorMap& ref = tvs.front().tensors;
  for (const auto& tv : tvs) require_same_layout(ref, tv.tensors);
  const std::size_t n = tvs.size();
  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (const auto& [name, _] : ref) {
      auto a = tvs[i].tensors.at(name).data();
      auto b = tvs[j].tensors.at(name).data();
      for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<double>(a[k]) * static_cast<double>(b[k]);
    }
    return s;
  };
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    norm[i] = std::sqrt(dot(i, i));
    if (norm[i] == 0.0) fail("zero-norm task vector '" + tvs[i].source_task + "' in cosine matrix");
  }
  Matrix m(n, std::vector<double>(n, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) m[i][j] = m[j][i] = dot(i, j) / (norm[i] * norm[j]);
  }
  return m;
}

struct FileUsage {
  std::string name;
  std::uint64_t payload_bytes = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t total_bytes = 0;
};

struct StorageReport {
  std::vector<FileUsage> artifacts;
  std::uint64_t payload_bytes = 0;
  std::uint64_t header_bytes = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t baseline_fp32_bytes = 0;  // 4 * params * n_tasks
  double ratio = 0.0;                     // total / baseline
  double per_task_effective_bits = 0.0;
};

/// Measures the on-disk size of QTV files and bundle directories against the
/// FP32 cost of storing `n_tasks` checkpoints of `fp32_param_count` values.
/// Effective bits are the sum of artifact bit-widths divided by n_tasks,
/// which reduces to b_offset + b_base / n_tasks for a bundle.
inline StorageReport storage_report(std::span<const std::filesystem::path> inputs, std::size_t n_tasks,
                                    std::uint64_t fp32_param_count) {
  if (inputs.empty()) fail("storage report needs at least one artifact");
  if (n_tasks == 0 || fp32_param_count == 0) fail("storage report needs positive task and parameter counts");
  StorageReport r;
  double bit_sum = 0.0;
  std::size_t artifact_count = 0;
  auto add_qtv = [&](const std::filesystem::path& p) {
    if (!std::filesystem::is_regular_file(p)) fail("missing file '" + p.string() + "'");
    const auto l = inspect_qtv(p);
    r.artifacts.push_back(FileUsage{p.filename().string(), l.payload_bytes, l.header_bytes, l.total_bytes});
    bit_sum += l.bits;
    if (l.role != Role::rtvq_base) ++artifact_count;
  };
  for (const auto& in : inputs) {
    if (std::filesystem::is_directory(in)) {
      const auto m = read_manifest(in);
      add_qtv(in / kBaseFile);
      for (const auto& task : m.tasks) add_qtv(in / offset_file_name(task));
      const auto mbytes = std::filesystem::file_size(in / kManifestFile);
      r.artifacts.push_back(FileUsage{std::string(kManifestFile), 0, mbytes, mbytes});
    } else {
      add_qtv(in);
    }
  }
  if (artifact_count != n_tasks) {
    fail("storage report: " + std::to_string(artifact_count) + " per-task artifacts for " + std::to_string(n_tasks) +
         " tasks");
  }
  for (const auto& a : r.artifacts) {
    r.payload_bytes += a.payload_bytes;
    r.header_bytes += a.header_bytes;
    r.total_bytes += a.total_bytes;
  }
  r.baseline_fp32_bytes = 4 * fp32_param_count * n_tasks;
  r.ratio = static_cast<double>(r.total_bytes) / static_cast<double>(r.baseline_fp32_bytes);
  r.per_task_effective_bits = bit_sum / static_cast<double>(n_tasks);
  return r;
}

}  // namespace tvq
