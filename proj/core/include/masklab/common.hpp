#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace masklab {

/// Bad configuration (sizes, keys, values). Message names the offending field.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad runtime input (unknown token, malformed file, id mismatch).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Generation could not satisfy its contract (e.g. not enough distractors).
struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- seeding & hashing ------------------------------------------------

uint64_t splitmix64(uint64_t& state);

/// Stable 64-bit FNV-1a over bytes; used for config/checkpoint/vocab ids.
uint64_t fnv1a64(std::string_view bytes);
uint64_t fnv1a64(const void* data, size_t len);

std::string hex64(uint64_t v);

/// Derives an independent stream seed from a base seed and salt words.
/// Same inputs always yield the same seed, regardless of call order.
uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts);
uint64_t mix_seed(uint64_t base, std::string_view tag);

// ---- deterministic random stream ---------------------------------------
//
// Wraps mt19937_64 but implements all distributions by hand so the byte
// stream of every generated artifact is identical across platforms and
// standard libraries.
class RandomStream {
 public:
  explicit RandomStream(uint64_t seed) : engine_(seed) {}

  uint64_t bits() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Requires n > 0.
  int uniform_int(int n);

  /// Standard normal via Box-Muller (no cached spare, stateless per call pair).
  double normal();

  /// Index sampled from an unnormalized nonnegative weight vector.
  int categorical(std::span<const double> weights);

  /// Fisher-Yates shuffle, in place.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// k distinct values from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace masklab
