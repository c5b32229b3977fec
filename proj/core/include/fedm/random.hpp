#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedm {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// FNV-1a over the bytes of `text`.
std::uint64_t hash_label(std::string_view text) noexcept;

/// Independent stream seeds: every (base, key...) tuple maps to its own seed,
/// so results never depend on how work is scheduled across threads.
std::uint64_t stream_seed(std::uint64_t base, std::uint64_t key) noexcept;
std::uint64_t stream_seed(std::uint64_t base, std::string_view key) noexcept;
std::uint64_t stream_seed(std::uint64_t base, std::string_view key, std::uint64_t index) noexcept;

Rng make_rng(std::uint64_t seed);

}  // namespace fedm
