#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

// Seed derivation and sampling helpers. Everything here is engine-explicit and
// avoids std::shuffle / std::uniform_int_distribution, whose algorithms are
// implementation-defined; runs must replay identically from a master seed.

namespace primelearn::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from (master, stream).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master + 0x9e3779b97f4a7c15ull * (stream + 1);
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b >> 1);
}

using Engine = std::mt19937_64;

// Uniform draw in [0, n) by rejection; exact and portable.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = eng();
  while (x >= limit) x = eng();
  return x % n;
}

inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

// Marsaglia polar method; explicit so draws do not depend on the standard
// library's distribution internals.
inline double normal01(Engine& eng) {
  while (true) {
    double u = 2.0 * uniform01(eng) - 1.0;
    double v = 2.0 * uniform01(eng) - 1.0;
    double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

template <class T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[uniform_below(eng, i)]);
}

// k distinct indices from [0, population), uniform without replacement
// (partial Fisher-Yates). Result order is the draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t k,
                                                           Engine& eng) {
  if (k > population)
    throw std::invalid_argument("sample_without_replacement: k exceeds population");
  std::vector<std::size_t> pool(population);
  for (std::size_t i = 0; i < population; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + uniform_below(eng, population - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace primelearn::rng
