#pragma once

#include <cstdint>
#include <cstddef>
#include <initializer_list>
#include <string_view>

namespace mcplan {

/// splitmix64 finalizer. Used both as a seed mixer and to expand a single
/// 64-bit seed into generator state.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a over a byte string; used to turn agent names and stream labels
/// into seed tokens.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Chains a root seed with a sequence of tokens: h <- mix64(h ^ token).
/// This is the sub-seed derivation rule used by the experiment harness
/// (root seed, instance id, trial id, agent-name hash, budget).
constexpr std::uint64_t derive_seed(std::uint64_t root,
                                    std::initializer_list<std::uint64_t> tokens) noexcept {
  std::uint64_t h = mix64(root);
  for (std::uint64_t t : tokens) h = mix64(h ^ t);
  return h;
}

/// xoshiro256++ with hand-rolled uniform sampling. std::* distributions are
/// implementation-defined, so everything that must reproduce across
/// machines goes through this type.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x = mix64(x);
      w = x;
    }
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 bits of randomness.
  double uniform01() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be > 0. Multiply-shift map;
  /// the bias is below 2^-32 for every bound used here.
  std::uint64_t uniform_int(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<__uint128_t>(next_u64()) * bound) >> 64);
  }

  /// Derives an independent child stream. Advances this generator once.
  Rng split() noexcept { return Rng(mix64(next_u64() ^ 0xA0761D6478BD642Full)); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t s_[4];
};

}  // namespace mcplan
