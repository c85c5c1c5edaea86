#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ambival {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
//
// A draw is a pure function of (seed, stream, index), so any subset of a
// sample can be regenerated in any order and on any thread.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit constexpr Philox4x32(std::uint64_t seed) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  constexpr Block operator()(std::uint64_t stream, std::uint64_t index) const noexcept {
    Block ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
              static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::array<std::uint32_t, 2> key = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static constexpr Block single_round(const Block& c,
                                      const std::array<std::uint32_t, 2>& k) noexcept {
    const std::uint64_t p0 = std::uint64_t{kMul0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }

  std::array<std::uint32_t, 2> key_;
};

// FNV-1a; used to derive stable substream ids from column names.
constexpr std::uint64_t stream_id(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t stream_id(std::string_view name, std::uint64_t salt) noexcept {
  std::uint64_t h = stream_id(name) ^ (salt + 0x9E3779B97F4A7C15ull + (salt << 6) + (salt >> 2));
  // splitmix64 finaliser
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
  return h ^ (h >> 31);
}

// Uniform on the open interval (0, 1) from the top 52 of 64 random bits.
inline double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

// Standard normal variates addressed by (stream, index). Each Philox block
// feeds one Box-Muller pair; even/odd indices share a block.
class NormalStream {
 public:
  constexpr NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : gen_(seed), stream_(stream) {}

  double operator()(std::uint64_t index) const noexcept {
    const auto b = gen_(stream_, index >> 1);
    const double u1 = to_open_unit((std::uint64_t{b[0]} << 32) | b[1]);
    const double u2 = to_open_unit((std::uint64_t{b[2]} << 32) | b[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
  }

  double uniform(std::uint64_t index) const noexcept {
    const auto b = gen_(stream_, index);
    return to_open_unit((std::uint64_t{b[0]} << 32) | b[1]);
  }

 private:
  Philox4x32 gen_;
  std::uint64_t stream_;
};

}  // namespace ambival
