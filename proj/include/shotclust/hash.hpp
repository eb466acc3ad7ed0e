#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace shotclust {

// 64-bit FNV-1a. Used for seed derivation and journal payload digests,
// not for anything adversarial.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex_digest(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

}  // namespace shotclust
