#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace graph_ceps {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; used only to turn stream names into seed tags.
inline constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Sub-seed derivation: every random stream in the pipeline is keyed by the
// master seed, a stream name and a tuple of indices.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                           std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t s = splitmix64(master ^ hash_tag(stream));
  for (auto i : indices) s = splitmix64(s ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace graph_ceps
