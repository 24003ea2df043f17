#include "epp/rng.hpp"

namespace epp {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index)
    : engine_(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(purpose)) ^ index)) {}

RandomStream::RandomStream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index, std::uint64_t sub_index)
    : engine_(mix64(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(purpose)) ^ index) ^ sub_index)) {}

double RandomStream::uniform() {
  // 53 random bits, shifted by half a step so 0 and 1 are never returned.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() { return normal_(engine_); }

}  // namespace epp
