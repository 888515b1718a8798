#pragma once

#include <cstdint>
#include <string_view>

namespace emocap::rng {

// 64-bit FNV-1a over raw bytes.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= static_cast<std::uint64_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

constexpr std::uint64_t fnv1a64_u64(std::uint64_t value,
                                    std::uint64_t state = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffULL;
    state *= kFnvPrime;
  }
  return state;
}

// splitmix64 (Steele, Lea, Flood). Tiny state, platform-independent output.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [-1, 1].
  double next_symmetric() { return 2.0 * next_unit() - 1.0; }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    // Modulo bias is irrelevant at the corpus sizes involved, but rejection
    // sampling keeps streams identical regardless of n's bit width.
    const std::uint64_t threshold = n == 0 ? 0 : (0 - n) % n;
    for (;;) {
      std::uint64_t v = next_u64();
      if (v >= threshold) return v % n;
    }
  }

 private:
  std::uint64_t state_;
};

// Derives an independent child seed from (master, tag, index). Every random
// stream in the project is obtained through this single derivation rule.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = fnv1a64(tag);
  h = fnv1a64_u64(master, h);
  h = fnv1a64_u64(index, h);
  return SplitMix64(h).next_u64();
}

}  // namespace emocap::rng
