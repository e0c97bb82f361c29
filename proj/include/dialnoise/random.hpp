#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace dialnoise {

/// splitmix64 finalizer. All derived seeds in the toolkit go through this.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of `s`.
std::uint64_t hash_string(std::string_view s);

/// Seed for one example: mix64(master ^ mix64(hash(dialogue_id) + turn_id + 1)),
/// further mixed with `stream` so separate draws on the same example are
/// decorrelated. Independent of iteration order and worker count.
std::uint64_t example_seed(std::uint64_t master, std::string_view dialogue_id,
                           std::int64_t turn_id, std::uint64_t stream = 0);

/// Thin wrapper over std::mt19937_64. The standard pins the engine output but
/// not the distributions, so bounded integers and reals are derived here to
/// keep results identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  /// Uniform double in [0, 1).
  double unit();

  template <typename T>
  const T& pick(std::span<const T> items) {
    return items[below(items.size())];
  }
  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[below(items.size())];
  }

  /// Index drawn from unnormalized non-negative weights.
  std::size_t weighted(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dialnoise
