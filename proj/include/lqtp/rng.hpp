#pragma once

// Counter-based random numbers (Philox4x32-10). Every draw is a pure
// function of (seed, stream, counter), so results do not depend on how work
// is scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace lqtp::rng {

using Block = std::array<std::uint32_t, 4>;

inline Block philox4x32(Block ctr, std::uint64_t seed) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  std::uint32_t k0 = static_cast<std::uint32_t>(seed);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0,
           static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1,
           static_cast<std::uint32_t>(p0)};
    k0 += kW0;
    k1 += kW1;
  }
  return ctr;
}

/// Uniform in the open interval (0, 1) from 64 random bits.
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

/// Independent streams keyed on the same seed.
enum class Stream : std::uint32_t { kNoise = 1, kDirections = 2, kSubsample = 3 };

/// Two standard normals (Box-Muller) for counter (index, item) in a stream.
inline std::array<double, 2> normal_pair(std::uint64_t seed, Stream stream,
                                         std::uint64_t item, std::uint32_t index) {
  const Block out = philox4x32({index, static_cast<std::uint32_t>(item),
                                static_cast<std::uint32_t>(item >> 32),
                                static_cast<std::uint32_t>(stream)},
                               seed);
  const double u1 = open_unit(out[0], out[1]);
  const double u2 = open_unit(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

inline double uniform(std::uint64_t seed, Stream stream, std::uint64_t item,
                      std::uint32_t index) {
  const Block out = philox4x32({index, static_cast<std::uint32_t>(item),
                                static_cast<std::uint32_t>(item >> 32),
                                static_cast<std::uint32_t>(stream)},
                               seed);
  return open_unit(out[0], out[1]);
}

}  // namespace lqtp::rng
