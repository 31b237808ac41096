#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mfc {

// 64-bit FNV-1a; stable across platforms, used for artifact fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t value);

}  // namespace mfc
