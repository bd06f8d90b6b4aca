#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace cjscore {

// Counter-based generator: draw i of stream `key` is mix64(key + (i+1)*golden).
// The whole sequence is a pure function of (key, i), so any implementation of
// the two primitives below reproduces it exactly.
//
//   mix64(z): z ^= z >> 30; z *= 0xbf58476d1ce4e5b9;
//             z ^= z >> 27; z *= 0x94d049bb133111eb; z ^= z >> 31
//   golden  = 0x9e3779b97f4a7c15
std::uint64_t mix64(std::uint64_t z);

// FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Combines several parts into one stream key. String parts are hashed with
// FNV-1a and folded in order.
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::string_view> parts);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform();
  // Unbiased integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// First `k` entries of a seeded Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, CounterRng& rng);

// Full seeded Fisher-Yates shuffle in place.
template <typename T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace cjscore
