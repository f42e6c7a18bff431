#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgt {

// Error taxonomy mirrored by the CLI exit codes: config/usage -> 1,
// malformed or inconsistent data -> 2, numeric failures -> 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic RNG wrapper. std::mt19937_64 is pinned by the standard, but
// the distribution classes are not, so index/real draws are derived from raw
// 64-bit output directly. Seed derivation uses splitmix64 so independent
// streams (corpus, init, shuffle, ...) never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double real01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased uniform index in [0, n).
  std::size_t index(std::size_t n) {
    if (n == 0) throw NumericError("Rng::index: n must be positive");
    std::uint64_t threshold = (0ULL - n) % n;
    for (;;) {
      std::uint64_t r = next();
      if (r >= threshold) return static_cast<std::size_t>(r % n);
    }
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real01(); }

  Rng derive(std::uint64_t tag) {
    std::uint64_t s = gen_() ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
    return Rng(splitmix64(s));
  }

 private:
  std::mt19937_64 gen_;
};

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (tag + 1));
  return splitmix64(s);
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.index(i);
    std::swap(v[i - 1], v[j]);
  }
}

// Index permutation 0..n-1, shuffled.
inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  fisher_yates(idx, rng);
  return idx;
}

// FNV-1a 64-bit, used for artifact checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v);
std::uint64_t checksum_file(const std::string& path);

std::vector<std::string> split(const std::string& s, char delim);
std::string trim(const std::string& s);

}  // namespace kgt
