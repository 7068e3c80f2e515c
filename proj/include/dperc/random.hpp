#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace dperc {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a of a purpose tag.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Node in a tree of reproducible random substreams.
///
/// A substream is named by the path of (purpose tag, index) pairs leading to
/// it from the master seed:
///
///     key(child) = mix64(key(parent) ^ mix64(hash_tag(tag) + mix64(index)))
///
/// The draws consumed by a task therefore depend only on what the task is,
/// never on which worker executes it or in what order.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

  [[nodiscard]] constexpr Stream child(std::string_view tag,
                                       std::uint64_t index = 0) const noexcept {
    return Stream(Key{}, mix64(key_ ^ mix64(hash_tag(tag) + mix64(index))));
  }

  [[nodiscard]] constexpr std::uint64_t key() const noexcept { return key_; }
  [[nodiscard]] Engine engine() const { return Engine(key_); }

 private:
  struct Key {};
  constexpr Stream(Key, std::uint64_t key) noexcept : key_(key) {}
  std::uint64_t key_;
};

/// Engine plus the handful of distributions every sampler needs.
class RandomSource {
 public:
  explicit RandomSource(const Stream& stream) : engine_(stream.engine()) {}
  explicit RandomSource(std::uint64_t seed) : RandomSource(Stream(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  bool bernoulli(double p) { return uniform_(engine_) < p; }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  int poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    return std::poisson_distribution<int>(mean)(engine_);
  }

  Engine& engine() noexcept { return engine_; }

 private:
  Engine engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace dperc
