#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace copestop {

/// Identifier of the random algorithm, recorded in every report so traces can
/// be tied to the exact generator that produced them.
inline constexpr std::string_view kRngAlgorithm = "xoshiro256++/splitmix64-derive/v1";

/// One step of the splitmix64 sequence; also the seed expander for xoshiro.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from (master, stream tag, index).
/// The chain is three splitmix64 steps, each absorbing one word.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_tag,
                                 std::uint64_t index = 0) {
  std::uint64_t s = master;
  std::uint64_t a = splitmix64(s);
  s ^= stream_tag;
  std::uint64_t b = splitmix64(s);
  s ^= index;
  std::uint64_t c = splitmix64(s);
  return a ^ (b << 1 | b >> 63) ^ c;
}

/// xoshiro256++: small, fast and bit-stable across platforms, unlike the
/// distributions in <random>. All simulation randomness flows through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in (0, 1]; 53 significant bits.
  double uniform01() { return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Exponential interval by inversion: -ln(u)/rate with u in (0, 1].
  double exponential(double rate) {
    if (!(rate > 0)) throw std::invalid_argument("exponential interval requires rate > 0");
    return -std::log(uniform01()) / rate;
  }

  /// Uniform integer in [0, bound) by rejection-free multiply-shift.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4];
};

}  // namespace copestop
