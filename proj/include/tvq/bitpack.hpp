#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tvq/error.hpp"

namespace tvq {

inline constexpr bool is_supported_bits(int bits) noexcept {
  return bits == 2 || bits == 3 || bits == 4 || bits == 8;
}

inline void require_supported_bits(int bits) {
  if (!is_supported_bits(bits)) fail("unsupported bit-width " + std::to_string(bits) + " (expected 2, 3, 4 or 8)");
}

inline constexpr std::size_t packed_size(std::size_t n, int bits) noexcept {
  return (n * static_cast<std::size_t>(bits) + 7) / 8;
}

// Codes are written as one LSB-first bitstream: code i occupies bits
// [i*b, (i+1)*b) where bit k lives in byte k/8 at position k%8. Codes may
// straddle byte boundaries (b = 3). Unused high bits of the last byte are 0.

inline std::vector<std::uint8_t> pack(std::span<const std::uint8_t> codes, int bits) {
  require_supported_bits(bits);
  const unsigned limit = 1u << bits;
  std::vector<std::uint8_t> out(packed_size(codes.size(), bits), 0);
  std::size_t bitpos = 0;
  for (std::uint8_t code : codes) {
    if (code >= limit) fail("code " + std::to_string(code) + " overflows " + std::to_string(bits) + "-bit range");
    const std::size_t byte = bitpos / 8;
    const unsigned shift = bitpos % 8;
    const unsigned wide = static_cast<unsigned>(code) << shift;
    out[byte] |= static_cast<std::uint8_t>(wide & 0xFFu);
    if (shift + static_cast<unsigned>(bits) > 8) out[byte + 1] |= static_cast<std::uint8_t>(wide >> 8);
    bitpos += static_cast<std::size_t>(bits);
  }
  return out;
}

inline std::vector<std::uint8_t> unpack(std::span<const std::uint8_t> bytes, std::size_t n, int bits) {
  require_supported_bits(bits);
  if (bytes.size() != packed_size(n, bits)) {
    fail("packed length mismatch: " + std::to_string(bytes.size()) + " bytes for " + std::to_string(n) + " codes at " +
         std::to_string(bits) + " bits");
  }
  const unsigned mask = (1u << bits) - 1u;
  std::vector<std::uint8_t> out(n);
  std::size_t bitpos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t byte = bitpos / 8;
    const unsigned shift = bitpos % 8;
    unsigned wide = bytes[byte];
    if (shift + static_cast<unsigned>(bits) > 8) wide |= static_cast<unsigned>(bytes[byte + 1]) << 8;
    out[i] = static_cast<std::uint8_t>((wide >> shift) & mask);
    bitpos += static_cast<std::size_t>(bits);
  }
  const unsigned tail = bitpos % 8;
  if (tail != 0 && (bytes.back() >> tail) != 0) fail("non-zero padding bits in packed codes");
  return out;
}

}  // namespace tvq
