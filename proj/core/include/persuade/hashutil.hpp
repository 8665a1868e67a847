#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace persuade {

// 64-bit FNV-1a. Used everywhere a stable, platform-independent hash is
// needed (fixture keys, seed derivation). Never std::hash, which is
// implementation-defined.
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t state = kFnvOffset) {
  for (unsigned char c : data) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// Accumulates heterogeneous parts into one digest. Each part is length-
// prefixed so ("ab","c") and ("a","bc") hash differently.
class HashSeq {
 public:
  HashSeq& add(std::string_view part);
  HashSeq& add(std::uint64_t value);
  HashSeq& add(std::int64_t value) { return add(static_cast<std::uint64_t>(value)); }
  HashSeq& add(int value) { return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(value))); }
  // Doubles are hashed through a canonical "%.9g" rendering so that the key
  // is stable no matter how the value was computed.
  HashSeq& add(double value);

  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kFnvOffset;
};

template <typename... Parts>
std::uint64_t stable_hash(const Parts&... parts) {
  HashSeq seq;
  (seq.add(parts), ...);
  return seq.digest();
}

std::string hex64(std::uint64_t value);

// splitmix64: tiny, fully specified PRNG. All seeded randomness in the
// library flows through this so results are reproducible across
// platforms and standard library versions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n) via 128-bit multiply-shift.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double next_double() {  // [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

// Deterministic Fisher-Yates (avoids std::shuffle, whose output is
// implementation-defined).
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace persuade
