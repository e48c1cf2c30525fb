#ifndef SECLR_COMMON_HPP
#define SECLR_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace seclr {

inline constexpr const char* kVersion = "0.1.0";

// Bad configuration or unusable input the caller can fix (missing file,
// unknown key, invalid flag value). CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents; message carries the position (line/byte).
// CLI maps this to exit code 1 as well.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric or runtime failure discovered mid-computation (divergence,
// degenerate input). CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// FNV-1a, 64 bit. Used for vocab hashes, config hashes and artifact
// checksums; stable across platforms.
inline constexpr uint64_t kFnvBasis = 0xcbf29ce484222325ull;
inline constexpr uint64_t kFnvPrime = 0x00000100000001b3ull;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = kFnvBasis) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = kFnvBasis) {
  return fnv1a64(s.data(), s.size(), h);
}

// Literal overload; without it a string literal would decay to the
// (data, n) form with the chaining hash consumed as the byte count.
inline uint64_t fnv1a64(const char* s, uint64_t h = kFnvBasis) {
  return fnv1a64(s, std::char_traits<char>::length(s), h);
}

uint64_t hash_file(const std::string& path);
std::string hex64(uint64_t v);

// Deterministic RNG (splitmix64-seeded xoshiro256**). Every stochastic
// stage draws from this so identical seeds give identical artifacts on
// any platform; std:: distributions are implementation-defined and are
// not used anywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) { seed_state(seed); }

  // Derived substream: mixes (seed, stream) so per-unit streams (e.g.
  // one per sentence pair) are independent of processing order.
  Rng(uint64_t seed, uint64_t stream) {
    seed_state(splitmix(seed ^ (splitmix(stream) + 0x9e3779b97f4a7c15ull)));
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, n). Lemire's multiply-shift with rejection.
  uint64_t bounded(uint64_t n) {
    if (n == 0) throw RuntimeFailure("Rng::bounded: n must be positive");
    unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
    auto lo = static_cast<uint64_t>(m);
    if (lo < n) {
      const uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t splitmix(uint64_t&& x) {
    uint64_t v = x;
    return splitmix(v);
  }

  void seed_state(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : s_) s = splitmix(x);
  }

  uint64_t s_[4];
};

}  // namespace seclr

#endif  // SECLR_COMMON_HPP
