#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace phifno::binio {

// Little-endian 64-bit reals, spelled out byte by byte so the on-disk
// format does not depend on the host.

inline void append_f64le(std::vector<unsigned char>& buf, double v) {
  uint64_t bits = std::bit_cast<uint64_t>(v);
  for (int k = 0; k < 8; ++k) buf.push_back(static_cast<unsigned char>(bits >> (8 * k)));
}

inline void append_u64le(std::vector<unsigned char>& buf, uint64_t bits) {
  for (int k = 0; k < 8; ++k) buf.push_back(static_cast<unsigned char>(bits >> (8 * k)));
}

inline double read_f64le(const unsigned char* p) {
  uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(p[k]) << (8 * k);
  return std::bit_cast<double>(bits);
}

inline uint64_t read_u64le(const unsigned char* p) {
  uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<uint64_t>(p[k]) << (8 * k);
  return bits;
}

}  // namespace phifno::binio
