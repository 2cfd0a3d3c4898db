#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rear {

/// Lowercases ASCII letters and splits on non-alphanumeric bytes.
/// Bytes >= 0x80 count as token characters so UTF-8 sequences stay intact.
/// No stemming, no stop-word removal.
std::vector<std::string> tokenize(std::string_view text);

std::string to_lower_ascii(std::string_view text);

std::string_view trim(std::string_view text);

/// splitmix64 step: advances the state and returns the next value.
std::uint64_t splitmix64(std::uint64_t& state);

/// FNV-1a over the bytes, mixed with the seed through a splitmix64 round.
/// Stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view text, std::uint64_t seed = 0);

/// Hex digest of stable_hash64 with seed 0, prefixed "fnv1a64:".
std::string content_digest(std::string_view bytes);

} // namespace rear
