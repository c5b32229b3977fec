#include "fedm/random.hpp"

namespace fedm {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t key) noexcept {
  return mix64(mix64(base) ^ mix64(key + 0x632be59bd9b4e019ULL));
}

std::uint64_t stream_seed(std::uint64_t base, std::string_view key) noexcept {
  return stream_seed(base, hash_label(key));
}

std::uint64_t stream_seed(std::uint64_t base, std::string_view key,
                          std::uint64_t index) noexcept {
  return stream_seed(stream_seed(base, key), index);
}

Rng make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Rng(seq);
}

}  // namespace fedm
