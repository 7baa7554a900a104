#pragma once

// Task-vector merging: Task Arithmetic, Ties-Merging, MagMax, Breadcrumbs,
// and LiNeS layer-wise scaling.
//
// All methods produce merged = pre + lambda * delta, where delta is computed
// per tensor position from the task values at that position. Sums over tasks
// are taken in double over the values sorted ascending, so the result does
// not depend on task order. Merging never looks at how a task vector was
// obtained (full precision or any dequantized path).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tvq/error.hpp"
#include "tvq/parallel.hpp"
#include "tvq/taskvec.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

enum class MergeMethod { task_arithmetic, ties, magmax, breadcrumbs };

inline std::string_view to_string(MergeMethod m) {
  switch (m) {
    case MergeMethod::task_arithmetic: return "task-arithmetic";
    case MergeMethod::ties: return "ties";
    case MergeMethod::magmax: return "magmax";
    case MergeMethod::breadcrumbs: return "breadcrumbs";
  }
  return "?";
}

inline MergeMethod merge_method_from_string(std::string_view s) {
  if (s == "task-arithmetic") return MergeMethod::task_arithmetic;
  if (s == "ties") return MergeMethod::ties;
  if (s == "magmax") return MergeMethod::magmax;
  if (s == "breadcrumbs") return MergeMethod::breadcrumbs;
  fail("unknown merge method '" + std::string(s) + "'");
}

struct LinesConfig {
  double alpha = 0.0;
  double beta = 1.0;
};

struct MergeConfig {
  MergeMethod method = MergeMethod::task_arithmetic;
  double lambda = 1.0;
  double ties_density = 1.0;
  double crumb_low = 0.0;
  double crumb_high = 1.0;
  std::optional<LinesConfig> lines;
};

/// Tensor name -> layer index, used to assign LiNeS coefficients.
using LayerMap = std::unordered_map<std::string, std::size_t>;

namespace detail {

inline double ordered_sum(std::span<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

inline void require_tasks(const TensorMap& pre, std::span<const TaskVector> tvs) {
  if (tvs.empty()) fail("merge needs at least one task vector");
  for (const auto& tv : tvs) require_same_layout(pre, tv.tensors);
}

inline void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) fail(std::string(what) + " must be finite");
}

/// Runs kernel(task_values, delta) for every tensor of `pre` and returns
/// pre + lambda * delta. `task_values[t]` is task t's tensor data.
template <typename Kernel>
TensorMap merge_tensors(const TensorMap& pre, std::span<const TaskVector> tvs, double lambda, unsigned threads,
                        Kernel kernel) {
  require_tasks(pre, tvs);
  require_finite(lambda, "lambda");
  std::vector<Tensor> slots(pre.size());
  parallel_for(pre.size(), threads, [&](std::size_t i) {
    const auto& name = pre.name_at(i);
    const Tensor& base = pre.value_at(i);
    std::vector<std::span<const float>> values;
    values.reserve(tvs.size());
    for (const auto& tv : tvs) values.push_back(tv.tensors.at(name).data());
    std::vector<double> delta(base.size(), 0.0);
    kernel(std::span<const std::span<const float>>(values), std::span<double>(delta));
    Tensor merged(base.shape());
    auto src = base.data();
    auto dst = merged.data();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = static_cast<float>(static_cast<double>(src[k]) + lambda * delta[k]);
    }
    slots[i] = std::move(merged);
  });
  TensorMap out;
  for (std::size_t i = 0; i < slots.size(); ++i) out.insert(pre.name_at(i), std::move(slots[i]));
  return out;
}

/// Indices sorted by |value| ascending, ties by position.
inline std::vector<std::size_t> magnitude_order(std::span<const float> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(v[a]) < std::abs(v[b]); });
  return idx;
}

}  // namespace detail

/// Number of entries Ties-Merging keeps per tensor: ceil(density * n).
inline std::size_t ties_keep_count(double density, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::ceil(density * static_cast<double>(n))));
}

/// Keeps the k entries of largest magnitude (ties: lower position wins), zeroes the rest.
inline std::vector<float> trim_top_k(std::span<const float> v, std::size_t k) {
  std::vector<float> out(v.size(), 0.0f);
  std::vector<std::size_t> by_rank(v.size());
  std::iota(by_rank.begin(), by_rank.end(), std::size_t{0});
  std::stable_sort(by_rank.begin(), by_rank.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  for (std::size_t r = 0; r < std::min(k, by_rank.size()); ++r) out[by_rank[r]] = v[by_rank[r]];
  return out;
}

/// Breadcrumbs mask for one tensor. Entries are ranked by |value| ascending
/// (ties by position); ranks in [ceil(low*n), ceil(high*n)) survive.
inline std::vector<float> crumb_filter(std::span<const float> v, double low, double high) {
  const std::size_t n = v.size();
  const auto order = detail::magnitude_order(v);
  const auto lo = static_cast<std::size_t>(std::ceil(low * static_cast<double>(n)));
  const auto hi = std::min(n, static_cast<std::size_t>(std::ceil(high * static_cast<double>(n))));
  std::vector<float> out(n, 0.0f);
  for (std::size_t r = lo; r < hi; ++r) out[order[r]] = v[order[r]];
  return out;
}

/// pre + lambda * sum_t tau_t.
inline TensorMap task_arithmetic(const TensorMap& pre, std::span<const TaskVector> tvs, double lambda,
                                 unsigned threads = 1) {
  return detail::merge_tensors(pre, tvs, lambda, threads, [](auto values, std::span<double> delta) {
    std::vector<double> col(values.size());
    for (std::size_t k = 0; k < delta.size(); ++k) {
      for (std::size_t t = 0; t < values.size(); ++t) col[t] = values[t][k];
      delta[k] = detail::ordered_sum(col);
    }
  });
}

/// Trim to the top ceil(density*n) magnitudes per task and tensor, elect the
/// sign of the summed trimmed values, then average the non-zero entries that
/// agree with the elected sign.
inline TensorMap ties_merge(const TensorMap& pre, std::span<const TaskVector> tvs, double lambda, double density,
                            unsigned threads = 1) {
  if (!(density > 0.0 && density <= 1.0)) fail("ties density must lie in (0, 1]");
  return detail::merge_tensors(pre, tvs, lambda, threads, [density](auto values, std::span<double> delta) {
    std::vector<std::vector<float>> trimmed;
    trimmed.reserve(values.size());
    for (auto v : values) trimmed.push_back(trim_top_k(v, ties_keep_count(density, v.size())));
    std::vector<double> col;
    std::vector<double> agree;
    for (std::size_t k = 0; k < delta.size(); ++k) {
      col.clear();
      for (const auto& t : trimmed) col.push_back(t[k]);
      const double total = detail::ordered_sum(col);
      if (total == 0.0) {
        delta[k] = 0.0;
        continue;
      }
      agree.clear();
      for (const auto& t : trimmed) {
        if (t[k] != 0.0f && ((t[k] > 0.0f) == (total > 0.0))) agree.push_back(t[k]);
      }
      delta[k] = detail::ordered_sum(agree) / static_cast<double>(agree.size());
    }
  });
}

/// Per position, the task value of largest magnitude (ties: lowest task index).
inline TensorMap magmax_merge(const TensorMap& pre, std::span<const TaskVector> tvs, double lambda,
                              unsigned threads = 1) {
  return detail::merge_tensors(pre, tvs, lambda, threads, [](auto values, std::span<double> delta) {
    for (std::size_t k = 0; k < delta.size(); ++k) {
      float best = values[0][k];
      for (std::size_t t = 1; t < values.size(); ++t) {
        if (std::abs(values[t][k]) > std::abs(best)) best = values[t][k];
      }
      delta[k] = best;
    }
  });
}

/// Drops the smallest and largest magnitudes of every task tensor (see
/// crumb_filter) and sums what remains.
inline TensorMap breadcrumbs_merge(const TensorMap& pre, std::span<const TaskVector> tvs, double lambda,
                                   double crumb_low, double crumb_high, unsigned threads = 1) {
  if (!(crumb_low >= 0.0 && crumb_low < crumb_high && crumb_high <= 1.0)) {
    fail("breadcrumbs quantiles must satisfy 0 <= low < high <= 1");
  }
  return detail::merge_tensors(pre, tvs, lambda, threads, [=](auto values, std::span<double> delta) {
    std::vector<std::vector<float>> masked;
    masked.reserve(values.size());
    for (auto v : values) masked.push_back(crumb_filter(v, crumb_low, crumb_high));
    std::vector<double> col(values.size());
    for (std::size_t k = 0; k < delta.size(); ++k) {
      for (std::size_t t = 0; t < masked.size(); ++t) col[t] = masked[t][k];
      delta[k] = detail::ordered_sum(col);
    }
  });
}

/// Linear ramp alpha + beta * l / max(n_layers - 1, 1) for l = 0..n_layers-1.
inline std::vector<double> lines_coefficients(std::size_t n_layers, double alpha, double beta) {
  if (n_layers < 1) fail("LiNeS needs at least one layer");
  const double denom = static_cast<double>(std::max<std::size_t>(n_layers - 1, 1));
  std::vector<double> c(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) c[l] = alpha + beta * (static_cast<double>(l) / denom);
  return c;
}

/// Parses "tensor-name<TAB>layer-index" lines; blank lines are skipped.
inline LayerMap parse_layer_map(std::istream& in) {
  LayerMap m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) fail("layer map line " + std::to_string(lineno) + ": expected name<TAB>index");
    const std::string name = line.substr(0, tab);
    const std::string idx = line.substr(tab + 1);
    std::size_t pos = 0;
    unsigned long long layer = 0;
    try {
      layer = std::stoull(idx, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != idx.size() || idx.front() == '-') {
      fail("layer map line " + std::to_string(lineno) + ": bad layer index '" + idx + "'");
    }
    if (!m.emplace(name, static_cast<std::size_t>(layer)).second) fail("layer map: duplicate tensor '" + name + "'");
  }
  return m;
}

inline LayerMap read_layer_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail("I/O error: cannot open '" + path.string() + "'");
  return parse_layer_map(in);
}

/// Layer index per tensor of `pre` (in its order) and the layer count. Without
/// an explicit map the i-th tensor is layer i.
inline std::pair<std::vector<std::size_t>, std::size_t> assign_layers(const TensorMap& pre,
                                                                      const LayerMap* layers = nullptr) {
  std::vector<std::size_t> idx(pre.size());
  if (!layers) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return {idx, std::max<std::size_t>(pre.size(), 1)};
  }
  std::size_t n = 1;
  for (std::size_t i = 0; i < pre.size(); ++i) {
    auto it = layers->find(pre.name_at(i));
    if (it == layers->end()) fail("layer map has no entry for tensor '" + pre.name_at(i) + "'");
    idx[i] = it->second;
    n = std::max(n, it->second + 1);
  }
  return {idx, n};
}

/// Scales every task-vector tensor by the LiNeS coefficient of its layer.
inline std::vector<TaskVector> apply_lines(const TensorMap& pre, std::span<const TaskVector> tvs, LinesConfig cfg,
                                           const LayerMap* layers = nullptr) {
  detail::require_finite(cfg.alpha, "LiNeS alpha");
  detail::require_finite(cfg.beta, "LiNeS beta");
  detail::require_tasks(pre, tvs);
  const auto [idx, n_layers] = assign_layers(pre, layers);
  const auto coef = lines_coefficients(n_layers, cfg.alpha, cfg.beta);
  std::vector<TaskVector> out;
  out.reserve(tvs.size());
  for (const auto& tv : tvs) {
    TaskVector scaled{TensorMap{}, tv.source_task};
    for (std::size_t i = 0; i < pre.size(); ++i) {
      const auto& name = pre.name_at(i);
      Tensor t = tv.tensors.at(name);
      for (float& v : t.data()) v = static_cast<float>(coef[idx[i]] * static_cast<double>(v));
      scaled.tensors.insert(name, std::move(t));
    }
    out.push_back(std::move(scaled));
  }
  return out;
}

/// Dispatches on cfg.method, applying LiNeS scaling first when configured.
inline TensorMap merge(const TensorMap& pre, std::span<const TaskVector> tvs, const MergeConfig& cfg,
                       const LayerMap* layers = nullptr, unsigned threads = 1) {
  std::vector<TaskVector> scaled;
  if (cfg.lines) {
    scaled = apply_lines(pre, tvs, *cfg.lines, layers);
    tvs = scaled;
  }
  switch (cfg.method) {
    case MergeMethod::task_arithmetic: return task_arithmetic(pre, tvs, cfg.lambda, threads);
    case MergeMethod::ties: return ties_merge(pre, tvs, cfg.lambda, cfg.ties_density, threads);
    case MergeMethod::magmax: return magmax_merge(pre, tvs, cfg.lambda, threads);
    case MergeMethod::breadcrumbs:
      return breadcrumbs_merge(pre, tvs, cfg.lambda, cfg.crumb_low, cfg.crumb_high, threads);
  }
  fail("unknown merge method");
}

}  // namespace tvq
