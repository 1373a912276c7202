#include "masklab/common.hpp"

#include <cmath>
#include <cstdio>

namespace masklab {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(std::string_view bytes) { return fnv1a64(bytes.data(), bytes.size()); }

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t mix_seed(uint64_t base, std::initializer_list<uint64_t> salts) {
  uint64_t state = base ^ 0xa0761d6478bd642fULL;
  uint64_t out = splitmix64(state);
  for (uint64_t s : salts) {
    state ^= s;
    out = splitmix64(state);
  }
  return out;
}

uint64_t mix_seed(uint64_t base, std::string_view tag) {
  return mix_seed(base, {fnv1a64(tag)});
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int RandomStream::uniform_int(int n) {
  // rejection sampling keeps the draw exactly uniform
  const uint64_t un = static_cast<uint64_t>(n);
  const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<int>(x % un);
}

double RandomStream::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RandomStream::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double r = uniform() * total;
  double acc = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;  // r landed on rounding slack
}

std::vector<int> RandomStream::sample_without_replacement(int n, int k) {
  std::vector<int> pool(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) pool[static_cast<size_t>(i)] = i;
  std::vector<int> out;
  out.reserve(static_cast<size_t>(k));
  for (int i = 0; i < k && !pool.empty(); ++i) {
    int j = uniform_int(static_cast<int>(pool.size()));
    out.push_back(pool[static_cast<size_t>(j)]);
    pool.erase(pool.begin() + j);
  }
  return out;
}

}  // namespace masklab
