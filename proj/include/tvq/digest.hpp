#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "tvq/error.hpp"
#include "tvq/tensor_map.hpp"

namespace tvq {

using Digest = std::array<std::uint8_t, 32>;

namespace detail {

inline void append_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

}  // namespace detail

/// SHA-256 over the concatenated little-endian float32 payloads of every
/// tensor, in map order (exactly the TMAP payload bytes without padding).
inline Digest digest_tensor_map(const TensorMap& map) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) fail("sha256 init failed");
  std::string chunk;
  for (const auto& [_, t] : map) {
    chunk.clear();
    chunk.reserve(t.size() * 4);
    for (float v : t.data()) detail::append_le32(chunk, std::bit_cast<std::uint32_t>(v));
    if (EVP_DigestUpdate(ctx.get(), chunk.data(), chunk.size()) != 1) fail("sha256 update failed");
  }
  Digest d{};
  unsigned len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), d.data(), &len) != 1 || len != d.size()) fail("sha256 final failed");
  return d;
}

inline std::string to_hex(const Digest& d) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xF]);
  }
  return s;
}

inline Digest digest_from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() != 64) fail("malformed digest: expected 64 hex characters");
  Digest d{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail("malformed digest: non-hex character");
    d[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return d;
}

}  // namespace tvq
