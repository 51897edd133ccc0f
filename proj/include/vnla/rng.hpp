#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace vnla {

// splitmix64 finalizer; also used as the generic integer mixer for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// FNV-1a, fixed across platforms (std::hash is not).
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t part, Rest... rest);
template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::string_view part, Rest... rest);

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t part, Rest... rest) {
  return derive_seed(mix64(seed ^ mix64(part)), rest...);
}

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::string_view part, Rest... rest) {
  return derive_seed(mix64(seed ^ hash_str(part)), rest...);
}

// Deterministic platform-independent PRNG (splitmix64 stream). std::
// distributions are implementation-defined, so sampling lives here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0,n); n > 0
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(next_u64()) *
                             static_cast<unsigned __int128>(n)) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
    }
  }

  // k distinct values from [0,n) in random order.
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    shuffle(pool);
    if (k < n) pool.resize(static_cast<std::size_t>(k));
    return pool;
  }

 private:
  std::uint64_t state_;
};

}  // namespace vnla
