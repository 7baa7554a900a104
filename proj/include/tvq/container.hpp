#pragma once

// On-disk formats.
//
// TMAP (full-precision checkpoint):
//   "TMAP" | u8 version = 1 | u32 header_len | header JSON | pad | data
// QTV (quantized artifact):
//   "QTV1" | u32 header_len | header JSON | pad | data
//
// All integers and floats are little-endian. The header is UTF-8 JSON. When
// at least one tensor is present the data section starts at the next 8-byte
// file offset after the header (zero padding), and each payload starts at a
// data-relative offset that is a multiple of 8. Header offsets are relative
// to the start of the data section.
//
// A bundle directory holds base.qtv, offset_<task>.qtv per task and
// manifest.json.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvq/artifact.hpp"
#include "tvq/bitpack.hpp"
#include "tvq/digest.hpp"
#include "tvq/error.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

inline constexpr std::string_view kTmapMagic = "TMAP";
inline constexpr std::uint8_t kTmapVersion = 1;
inline constexpr std::string_view kQtvMagic = "QTV1";
inline constexpr std::string_view kManifestFile = "manifest.json";
inline constexpr std::string_view kBaseFile = "base.qtv";

inline std::string offset_file_name(std::string_view task) { return "offset_" + std::string(task) + ".qtv"; }

namespace detail {

using Json = nlohmann::ordered_json;

inline std::uint64_t align8(std::uint64_t x) { return (x + 7) & ~std::uint64_t{7}; }

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("I/O error: cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail("I/O error: cannot read '" + path.string() + "'");
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("I/O error: cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail("I/O error: cannot write '" + path.string() + "'");
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> floats_to_le(std::span<const float> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

/// Assigns aligned data-relative offsets to payloads of the given lengths.
inline std::vector<std::uint64_t> layout_offsets(std::span<const std::size_t> lengths) {
  std::vector<std::uint64_t> offsets;
  std::uint64_t cursor = 0;
  for (auto len : lengths) {
    cursor = align8(cursor);
    offsets.push_back(cursor);
    cursor += len;
  }
  return offsets;
}

inline std::vector<std::uint8_t> frame(std::string_view prefix, const Json& header,
                                       std::span<const std::vector<std::uint8_t>> payloads,
                                       std::span<const std::uint64_t> offsets) {
  const std::string text = header.dump();
  if (text.size() > std::numeric_limits<std::uint32_t>::max()) fail("header exceeds 2^32 - 1 bytes");
  std::vector<std::uint8_t> out(prefix.begin(), prefix.end());
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  if (payloads.empty()) return out;
  const std::size_t data_start = align8(out.size());
  out.resize(data_start, 0);
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    out.resize(data_start + offsets[i], 0);
    out.insert(out.end(), payloads[i].begin(), payloads[i].end());
  }
  return out;
}

struct Frame {
  Json header;
  std::vector<std::uint8_t> bytes;
  std::size_t header_end = 0;

  [[nodiscard]] std::size_t data_start() const { return align8(header_end); }

  /// Payload slice at a data-relative offset; throws "truncated" if it runs
  /// past the end of the file.
  [[nodiscard]] std::span<const std::uint8_t> payload(std::uint64_t offset, std::uint64_t length) const {
    const std::uint64_t start = data_start();
    if (start > bytes.size() || offset > bytes.size() - start || length > bytes.size() - start - offset) {
      fail("truncated payload");
    }
    return std::span<const std::uint8_t>(bytes).subspan(static_cast<std::size_t>(start + offset),
                                                        static_cast<std::size_t>(length));
  }
};

inline Frame unframe(std::vector<std::uint8_t> bytes, std::string_view magic, const std::filesystem::path& path) {
  const std::string where = " in '" + path.string() + "'";
  if (bytes.size() < magic.size() || !std::equal(magic.begin(), magic.end(), bytes.begin())) {
    fail("bad magic" + where);
  }
  std::size_t at = magic.size();
  if (magic == kTmapMagic) {
    if (bytes.size() < at + 1) fail("truncated header" + where);
    if (bytes[at] != kTmapVersion) fail("unsupported version " + std::to_string(bytes[at]) + where);
    at += 1;
  }
  if (bytes.size() < at + 4) fail("truncated header" + where);
  const std::uint32_t len = get_u32(bytes, at);
  at += 4;
  if (bytes.size() - at < len) fail("truncated header" + where);
  Frame f;
  try {
    f.header = Json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                           bytes.begin() + static_cast<std::ptrdiff_t>(at + len));
  } catch (const nlohmann::json::exception& e) {
    fail("malformed header" + where + ": " + e.what());
  }
  f.header_end = at + len;
  f.bytes = std::move(bytes);
  return f;
}

template <typename Fn>
auto json_field(const Json& j, const char* key, Fn&& get) {
  try {
    return get(j.at(key));
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed header field '") + key + "': " + e.what());
  }
}

inline Shape json_shape(const Json& j) {
  return json_field(j, "shape", [](const Json& v) { return v.get<Shape>(); });
}

inline std::uint64_t json_u64(const Json& j, const char* key) {
  return json_field(j, key, [](const Json& v) { return v.get<std::uint64_t>(); });
}

inline std::string json_string(const Json& j, const char* key) {
  return json_field(j, key, [](const Json& v) { return v.get<std::string>(); });
}

inline int json_int(const Json& j, const char* key) {
  return json_field(j, key, [](const Json& v) { return v.get<int>(); });
}

inline float json_float(const Json& j, const char* key) {
  return json_field(j, key, [](const Json& v) { return static_cast<float>(v.get<double>()); });
}

inline std::vector<std::uint8_t> encode_tmap(const TensorMap& map) {
  std::vector<std::vector<std::uint8_t>> payloads;
  std::vector<std::size_t> lengths;
  for (const auto& [_, t] : map) {
    payloads.push_back(floats_to_le(t.data()));
    lengths.push_back(payloads.back().size());
  }
  const auto offsets = layout_offsets(lengths);
  Json header = Json::array();
  std::size_t i = 0;
  for (const auto& [name, t] : map) {
    header.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offsets[i]}, {"length", lengths[i]}});
    ++i;
  }
  return frame(std::string(kTmapMagic) + static_cast<char>(kTmapVersion), header, payloads, offsets);
}

inline Json qtv_header(const QuantizedArtifact& a, std::span<const std::uint64_t> offsets) {
  Json tensors = Json::array();
  std::size_t i = 0;
  for (const auto& [name, q] : a.tensors) {
    tensors.push_back({{"name", name},
                       {"shape", q.shape},
                       {"bits", q.params.bits},
                       {"scale", q.params.scale},
                       {"zero_point", q.params.zero_point},
                       {"constant", q.params.constant},
                       {"offset", offsets[i]},
                       {"length", q.codes.size()}});
    ++i;
  }
  return Json{{"role", to_string(a.role)},
              {"meta", {{"task", a.meta.task}, {"pre_digest", to_hex(a.meta.pre_digest)}, {"bits", a.meta.bits}}},
              {"tensors", std::move(tensors)}};
}

inline std::vector<std::uint8_t> encode_qtv(const QuantizedArtifact& a) {
  std::vector<std::vector<std::uint8_t>> payloads;
  std::vector<std::size_t> lengths;
  for (const auto& [name, q] : a.tensors) {
    require_supported_bits(q.params.bits);
    if (q.codes.size() != packed_size(q.size(), q.params.bits)) fail("shape/length mismatch in tensor '" + name + "'");
    payloads.push_back(q.codes);
    lengths.push_back(q.codes.size());
  }
  const auto offsets = layout_offsets(lengths);
  return frame(kQtvMagic, qtv_header(a, offsets), payloads, offsets);
}

inline std::string encode_manifest(const BundleManifest& m) {
  const Json j{{"tasks", m.tasks},
               {"b_base", m.b_base},
               {"b_offset", m.b_offset},
               {"n_tasks", m.n_tasks},
               {"pre_digest", to_hex(m.pre_digest)}};
  return j.dump(2) + "\n";
}

}  // namespace detail

inline void write_tmap(const TensorMap& map, const std::filesystem::path& path) {
  detail::write_file(path, detail::encode_tmap(map));
}

inline TensorMap read_tmap(const std::filesystem::path& path) {
  using detail::Json;
  const auto f = detail::unframe(detail::read_file(path), kTmapMagic, path);
  if (!f.header.is_array()) fail("malformed header: expected a tensor list");
  TensorMap map;
  for (const Json& entry : f.header) {
    const auto name = detail::json_string(entry, "name");
    const auto shape = detail::json_shape(entry);
    const auto length = detail::json_u64(entry, "length");
    const auto count = element_count(shape);
    if (count > std::numeric_limits<std::uint64_t>::max() / 4 || length != count * 4) {
      fail("shape/length mismatch in tensor '" + name + "'");
    }
    const auto bytes = f.payload(detail::json_u64(entry, "offset"), length);
    std::vector<float> data(static_cast<std::size_t>(count));
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = std::bit_cast<float>(detail::get_u32(bytes, 4 * i));
    map.insert(name, Tensor(shape, std::move(data)));
  }
  return map;
}

inline void write_qtv(const QuantizedArtifact& artifact, const std::filesystem::path& path) {
  detail::write_file(path, detail::encode_qtv(artifact));
}

inline QuantizedArtifact read_qtv(const std::filesystem::path& path) {
  using detail::Json;
  const auto f = detail::unframe(detail::read_file(path), kQtvMagic, path);
  QuantizedArtifact a;
  a.role = role_from_string(detail::json_string(f.header, "role"));
  const Json meta = detail::json_field(f.header, "meta", [](const Json& v) { return v; });
  a.meta.task = detail::json_string(meta, "task");
  a.meta.pre_digest = digest_from_hex(detail::json_string(meta, "pre_digest"));
  a.meta.bits = detail::json_int(meta, "bits");
  const Json tensors = detail::json_field(f.header, "tensors", [](const Json& v) { return v; });
  if (!tensors.is_array()) fail("malformed header: 'tensors' is not a list");
  for (const Json& entry : tensors) {
    const auto name = detail::json_string(entry, "name");
    QuantizedTensor q;
    q.shape = detail::json_shape(entry);
    q.params.bits = detail::json_int(entry, "bits");
    require_supported_bits(q.params.bits);
    q.params.scale = detail::json_float(entry, "scale");
    q.params.zero_point = detail::json_field(entry, "zero_point", [](const Json& v) { return v.get<std::int32_t>(); });
    q.params.constant = detail::json_float(entry, "constant");
    if (!std::isfinite(q.params.scale) || q.params.scale < 0.0f) fail("invalid scale in tensor '" + name + "'");
    if (q.params.is_constant() && q.params.zero_point != 0) fail("invalid constant sentinel in tensor '" + name + "'");
    const auto length = detail::json_u64(entry, "length");
    if (length != packed_size(static_cast<std::size_t>(element_count(q.shape)), q.params.bits)) {
      fail("shape/length mismatch in tensor '" + name + "'");
    }
    const auto bytes = f.payload(detail::json_u64(entry, "offset"), length);
    q.codes.assign(bytes.begin(), bytes.end());
    (void)q.unpacked_codes();  // rejects non-zero padding bits
    a.tensors.insert(name, std::move(q));
  }
  return a;
}

/// Byte accounting of one QTV file, read from its header.
struct QtvLayout {
  std::uint64_t total_bytes = 0;
  std::uint64_t payload_bytes = 0;
  std::uint64_t header_bytes = 0;  // everything that is not code payload, padding included
  Role role = Role::tvq;
  int bits = 0;
};

inline QtvLayout inspect_qtv(const std::filesystem::path& path) {
  const auto a = read_qtv(path);
  QtvLayout l;
  l.total_bytes = std::filesystem::file_size(path);
  for (const auto& [_, q] : a.tensors) l.payload_bytes += q.codes.size();
  l.header_bytes = l.total_bytes - l.payload_bytes;
  l.role = a.role;
  l.bits = a.meta.bits;
  return l;
}

inline void write_bundle(const RtvqBundle& bundle, const std::filesystem::path& dir) {
  validate_bundle(bundle);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail("I/O error: cannot create '" + dir.string() + "': " + ec.message());
  write_qtv(bundle.base, dir / kBaseFile);
  for (std::size_t i = 0; i < bundle.offsets.size(); ++i) {
    write_qtv(bundle.offsets[i], dir / offset_file_name(bundle.manifest.tasks[i]));
  }
  const auto text = detail::encode_manifest(bundle.manifest);
  detail::write_file(dir / kManifestFile,
                     std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline BundleManifest read_manifest(const std::filesystem::path& dir) {
  using detail::Json;
  const auto path = dir / kManifestFile;
  if (!std::filesystem::exists(path)) fail("missing manifest in '" + dir.string() + "'");
  const auto bytes = detail::read_file(path);
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed manifest: ") + e.what());
  }
  BundleManifest m;
  m.tasks = detail::json_field(j, "tasks", [](const Json& v) { return v.get<std::vector<std::string>>(); });
  m.b_base = detail::json_int(j, "b_base");
  m.b_offset = detail::json_int(j, "b_offset");
  m.n_tasks = detail::json_u64(j, "n_tasks");
  m.pre_digest = digest_from_hex(detail::json_string(j, "pre_digest"));
  for (const auto& t : m.tasks) require_valid_task_name(t);
  return m;
}

/// Reads a bundle directory. When `expected_pre` is given, the recorded
/// pre-checkpoint digest must match it.
inline RtvqBundle read_bundle(const std::filesystem::path& dir, std::optional<Digest> expected_pre = std::nullopt) {
  RtvqBundle b;
  b.manifest = read_manifest(dir);
  if (b.manifest.n_tasks != b.manifest.tasks.size()) fail("manifest n_tasks does not match task list");
  if (expected_pre && *expected_pre != b.manifest.pre_digest) fail("digest mismatch: bundle built from another pre-trained checkpoint");
  b.base = read_qtv(dir / kBaseFile);
  for (const auto& task : b.manifest.tasks) b.offsets.push_back(read_qtv(dir / offset_file_name(task)));
  validate_bundle(b);
  return b;
}

}  // namespace tvq
