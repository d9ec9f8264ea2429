#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rptm {

// Error taxonomy shared by all modules. Everything derives from
// std::runtime_error so callers can catch coarsely or precisely.
struct IoError : std::runtime_error { using std::runtime_error::runtime_error; };
struct FormatError : std::runtime_error { using std::runtime_error::runtime_error; };
struct DimensionError : std::runtime_error { using std::runtime_error::runtime_error; };
struct ConfigError : std::runtime_error { using std::runtime_error::runtime_error; };
struct CorruptError : std::runtime_error { using std::runtime_error::runtime_error; };
struct IndexError : std::runtime_error { using std::runtime_error::runtime_error; };
struct NoNegativeError : std::runtime_error { using std::runtime_error::runtime_error; };
struct HashMismatchError : std::runtime_error { using std::runtime_error::runtime_error; };

/// FNV-1a over a byte string; used for manifest content hashes.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from (seed, salt); used so that
/// per-image / per-batch RNGs never depend on scheduling order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

// Deterministic draws on top of mt19937_64. The standard specifies the
// engine's output sequence but not the distributions, so we never use
// std::uniform_*_distribution anywhere results must be reproducible.
inline std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(rng() % n);
}

inline double uniform_real01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Box-Muller; always consumes exactly two engine draws.
inline double normal_draw(std::mt19937_64& rng, double mean = 0.0, double sigma = 1.0) {
  double u1 = uniform_real01(rng);
  double u2 = uniform_real01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Worker cap: explicit value if > 0, else RPTM_THREADS, else hardware.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n). Results must go to disjoint slots; the
/// schedule is unspecified but output must not depend on it.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace rptm
