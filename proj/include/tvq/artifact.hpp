#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tvq/digest.hpp"
#include "tvq/error.hpp"
#include "tvq/named_map.hpp"
#include "tvq/quantizer.hpp"

namespace tvq {

/// What a quantized artifact dequantizes to. FQ yields a checkpoint, all
/// other roles yield a delta relative to the pre-trained checkpoint.
enum class Role { fq, tvq, rtvq_base, rtvq_offset };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::fq: return "FQ";
    case Role::tvq: return "TVQ";
    case Role::rtvq_base: return "RTVQ_BASE";
    case Role::rtvq_offset: return "RTVQ_OFFSET";
  }
  return "?";
}

inline Role role_from_string(std::string_view s) {
  if (s == "FQ") return Role::fq;
  if (s == "TVQ") return Role::tvq;
  if (s == "RTVQ_BASE") return Role::rtvq_base;
  if (s == "RTVQ_OFFSET") return Role::rtvq_offset;
  fail("unknown artifact role '" + std::string(s) + "'");
}

struct ArtifactMeta {
  std::string task;
  Digest pre_digest{};  // all zero when not tied to a pre-trained checkpoint (FQ)
  int bits = 0;

  friend bool operator==(const ArtifactMeta&, const ArtifactMeta&) = default;
};

struct QuantizedArtifact {
  Role role = Role::tvq;
  NamedMap<QuantizedTensor> tensors;
  ArtifactMeta meta;

  friend bool operator==(const QuantizedArtifact&, const QuantizedArtifact&) = default;
};

struct BundleManifest {
  std::vector<std::string> tasks;
  int b_base = 0;
  int b_offset = 0;
  std::size_t n_tasks = 0;
  Digest pre_digest{};

  friend bool operator==(const BundleManifest&, const BundleManifest&) = default;
};

/// One shared base artifact plus one offset artifact per task.
struct RtvqBundle {
  QuantizedArtifact base;
  std::vector<QuantizedArtifact> offsets;
  BundleManifest manifest;

  friend bool operator==(const RtvqBundle&, const RtvqBundle&) = default;
};

/// Task names become file names inside a bundle directory.
inline void require_valid_task_name(std::string_view name) {
  if (name.empty()) fail("empty task name");
  if (name == "." || name == "..") fail("invalid task name '" + std::string(name) + "'");
  for (char c : name) {
    if (c == '/' || c == '\\' || c == '\0') fail("invalid character in task name '" + std::string(name) + "'");
  }
}

inline void require_same_tensors(const QuantizedArtifact& a, const QuantizedArtifact& b) {
  if (a.tensors.size() != b.tensors.size()) fail("shape mismatch: tensor count differs");
  for (const auto& [name, t] : a.tensors) {
    const QuantizedTensor* other = b.tensors.find(name);
    if (!other) fail("shape mismatch: tensor '" + name + "' missing");
    if (other->shape != t.shape) fail("shape mismatch: tensor '" + name + "'");
  }
}

inline void validate_bundle(const RtvqBundle& b) {
  const auto& m = b.manifest;
  if (m.n_tasks == 0 || m.n_tasks != m.tasks.size() || m.n_tasks != b.offsets.size()) {
    fail("bundle task count mismatch");
  }
  require_supported_bits(m.b_base);
  require_supported_bits(m.b_offset);
  if (b.base.role != Role::rtvq_base) fail("bundle base has role " + std::string(to_string(b.base.role)));
  for (std::size_t i = 0; i < b.offsets.size(); ++i) {
    require_valid_task_name(m.tasks[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (m.tasks[j] == m.tasks[i]) fail("duplicate task name '" + m.tasks[i] + "'");
    }
    const auto& off = b.offsets[i];
    if (off.role != Role::rtvq_offset) fail("bundle offset has role " + std::string(to_string(off.role)));
    require_same_tensors(b.base, off);
  }
}

}  // namespace tvq
