#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

// Ground-truth primality, segmented sieving, and factor counting. These are
// the label and analysis oracles; everything is deterministic.

namespace primelearn::numtheory {

inline constexpr std::uint64_t kPrimalityLimit = 1ull << 63;
// Spans are sieved in segments; this caps a single sieve_range call.
inline constexpr std::uint64_t kMaxSieveSpan = 1ull << 30;

// --------------------------------------------------------------------------
// PrimeBitmap: one bit per integer in [lo, hi), set iff prime.

class PrimeBitmap {
 public:
  PrimeBitmap() = default;
  PrimeBitmap(std::uint64_t lo, std::uint64_t hi) : lo_(lo), hi_(hi) {
    if (lo >= hi) throw std::invalid_argument("PrimeBitmap: lo must be < hi");
    words_.assign(((hi - lo) + 63) / 64, 0);
  }

  std::uint64_t lo() const { return lo_; }
  std::uint64_t hi() const { return hi_; }
  std::uint64_t size() const { return hi_ - lo_; }

  bool test(std::uint64_t n) const {
    check_range(n);
    const std::uint64_t i = n - lo_;
    return (words_[i >> 6] >> (i & 63)) & 1u;
  }

  void set(std::uint64_t n, bool value) {
    check_range(n);
    const std::uint64_t i = n - lo_;
    const std::uint64_t mask = 1ull << (i & 63);
    if (value)
      words_[i >> 6] |= mask;
    else
      words_[i >> 6] &= ~mask;
  }

  std::uint64_t count() const {
    std::uint64_t total = 0;
    for (std::uint64_t w : words_) total += static_cast<std::uint64_t>(std::popcount(w));
    return total;
  }

  const std::vector<std::uint64_t>& words() const { return words_; }
  std::vector<std::uint64_t>& words() { return words_; }

 private:
  void check_range(std::uint64_t n) const {
    if (n < lo_ || n >= hi_) throw std::out_of_range("PrimeBitmap: value outside [lo, hi)");
  }

  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
  std::vector<std::uint64_t> words_;
};

// --------------------------------------------------------------------------
// Deterministic primality.

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<__uint128_t>(a) * b) % m);
}

inline std::uint64_t powmod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mulmod(result, base, m);
    base = mulmod(base, base, m);
    exp >>= 1;
  }
  return result;
}

inline constexpr std::uint32_t kTrialPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                                 23, 29, 31, 37, 41, 43, 47};

// Sinclair's seven-base set; strong-pseudoprime-free for all 64-bit inputs.
inline constexpr std::uint64_t kMillerRabinBases[] = {2,      325,     9375,      28178,
                                                      450775, 9780504, 1795265022};

inline std::uint64_t isqrt(std::uint64_t n) {
  if (n == 0) return 0;
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
  while (r > 0 && r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

}  // namespace detail

// Deterministic Miller-Rabin after small-prime trial division.
inline bool is_prime(std::uint64_t n) {
  if (n >= kPrimalityLimit) throw std::out_of_range("is_prime: input must be < 2^63");
  if (n < 2) return false;
  for (std::uint32_t p : detail::kTrialPrimes) {
    if (n % p == 0) return n == p;
  }
  if (n < 53ull * 53ull) return true;

  const int twos = std::countr_zero(n - 1);
  const std::uint64_t d = (n - 1) >> twos;
  for (std::uint64_t base : detail::kMillerRabinBases) {
    const std::uint64_t a = base % n;
    if (a == 0) continue;
    std::uint64_t x = detail::powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < twos; ++i) {
      x = detail::mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

// Primes <= limit by plain sieve of Eratosthenes.
inline std::vector<std::uint32_t> small_primes(std::uint32_t limit) {
  std::vector<std::uint8_t> mark(static_cast<std::size_t>(limit) + 1, 1);
  mark[0] = 0;
  if (limit >= 1) mark[1] = 0;
  for (std::uint64_t i = 2; i * i <= limit; ++i)
    if (mark[i])
      for (std::uint64_t j = i * i; j <= limit; j += i) mark[j] = 0;
  std::vector<std::uint32_t> primes;
  for (std::uint64_t i = 2; i <= limit; ++i)
    if (mark[i]) primes.push_back(static_cast<std::uint32_t>(i));
  return primes;
}

// Segmented sieve over [lo, hi). Memory stays O(segment + sqrt(hi)).
inline PrimeBitmap sieve_range(std::uint64_t lo, std::uint64_t hi) {
  if (lo >= hi) throw std::invalid_argument("sieve_range: lo must be < hi");
  if (hi - lo > kMaxSieveSpan) throw std::invalid_argument("sieve_range: span exceeds cap");
  if (hi > kPrimalityLimit) throw std::out_of_range("sieve_range: hi must be <= 2^63");

  const std::uint64_t root = detail::isqrt(hi - 1);
  const auto base = small_primes(static_cast<std::uint32_t>(std::min<std::uint64_t>(root, 0xffffffffull)));

  PrimeBitmap bitmap(lo, hi);
  constexpr std::uint64_t kSegment = 1ull << 18;
  std::vector<std::uint8_t> seg(kSegment);

  for (std::uint64_t seg_lo = lo; seg_lo < hi; seg_lo += kSegment) {
    const std::uint64_t seg_hi = std::min(hi, seg_lo + kSegment);
    const std::uint64_t len = seg_hi - seg_lo;
    std::fill_n(seg.begin(), len, 1);

    for (std::uint32_t p : base) {
      const std::uint64_t p64 = p;
      // Marking starts at p*p, so base primes inside the range survive.
      std::uint64_t start = std::max(p64 * p64, ((seg_lo + p64 - 1) / p64) * p64);
      for (std::uint64_t j = start; j < seg_hi; j += p64) seg[j - seg_lo] = 0;
    }
    if (seg_lo == 0) seg[0] = 0;
    if (seg_lo <= 1 && seg_hi > 1) seg[1 - seg_lo] = 0;

    for (std::uint64_t i = 0; i < len; ++i)
      if (seg[i]) bitmap.set(seg_lo + i, true);
  }
  return bitmap;
}

// --------------------------------------------------------------------------
// Factor counting (Omega: prime factors with multiplicity).

namespace detail {

inline const std::vector<std::uint32_t>& trial_primes_64k() {
  static const std::vector<std::uint32_t> primes = small_primes(1u << 16);
  return primes;
}

inline std::uint64_t pollard_f(std::uint64_t x, std::uint64_t c, std::uint64_t n) {
  return (mulmod(x, x, n) + c) % n;
}

// Brent-cycle Pollard rho with batched gcd. Deterministic: the (x0, c) pairs
// are tried in a fixed order.
inline std::uint64_t pollard_brent(std::uint64_t n) {
  if (n % 2 == 0) return 2;
  for (std::uint64_t attempt = 0;; ++attempt) {
    const std::uint64_t c = 1 + attempt;
    const std::uint64_t x0 = 2 + attempt;
    std::uint64_t y = x0, r = 1, q = 1, g = 1, x = 0, ys = y;
    const std::uint64_t m = 128;
    while (g == 1) {
      x = y;
      for (std::uint64_t i = 0; i < r; ++i) y = pollard_f(y, c, n);
      std::uint64_t k = 0;
      while (k < r && g == 1) {
        ys = y;
        const std::uint64_t chunk = std::min(m, r - k);
        for (std::uint64_t i = 0; i < chunk; ++i) {
          y = pollard_f(y, c, n);
          q = mulmod(q, x > y ? x - y : y - x, n);
        }
        g = std::gcd(q, n);
        k += m;
      }
      r *= 2;
    }
    if (g == n) {
      // Back-track one step at a time.
      do {
        ys = pollard_f(ys, c, n);
        g = std::gcd(x > ys ? x - ys : ys - x, n);
      } while (g == 1);
    }
    if (g != n) return g;
    // Cycle degenerated for this (x0, c); try the next pair.
  }
}

inline int omega_recursive(std::uint64_t n) {
  if (n == 1) return 0;
  if (is_prime(n)) return 1;
  const std::uint64_t d = pollard_brent(n);
  return omega_recursive(d) + omega_recursive(n / d);
}

}  // namespace detail

// Omega(n): prime factors counted with multiplicity. Omega(1) = 0.
inline int count_prime_factors(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("count_prime_factors: n must be >= 1");
  int omega = 0;
  for (std::uint32_t p : detail::trial_primes_64k()) {
    const std::uint64_t p64 = p;
    if (p64 * p64 > n) break;
    while (n % p64 == 0) {
      n /= p64;
      ++omega;
    }
  }
  if (n > 1) omega += detail::omega_recursive(n);
  return omega;
}

// --------------------------------------------------------------------------
// Block counts and the PNT density curve.

struct BlockCounts {
  std::uint64_t lo = 0;
  std::uint64_t block_size = 1000;
  std::vector<std::uint32_t> counts;
};

inline BlockCounts prime_block_counts(std::uint64_t lo, std::uint64_t hi,
                                      std::uint64_t block_size) {
  if (lo >= hi) throw std::invalid_argument("prime_block_counts: lo must be < hi");
  if (block_size == 0 || (hi - lo) % block_size != 0)
    throw std::invalid_argument("prime_block_counts: block_size must divide the span");
  const PrimeBitmap bitmap = sieve_range(lo, hi);
  BlockCounts result;
  result.lo = lo;
  result.block_size = block_size;
  result.counts.resize((hi - lo) / block_size, 0);
  for (std::uint64_t n = lo; n < hi; ++n)
    if (bitmap.test(n)) ++result.counts[(n - lo) / block_size];
  return result;
}

// Expected primes in a block of `block_size` integers near n: block_size/ln(n).
inline double pnt_expected_count(std::uint64_t n, std::uint64_t block_size) {
  if (n < 2) throw std::invalid_argument("pnt_expected_count: n must be >= 2");
  return static_cast<double>(block_size) / std::log(static_cast<double>(n));
}

// --------------------------------------------------------------------------
// Bitmap cache files: header (version, offset, start, end) then a
// length-prefixed little-endian bit array. The bitmap itself covers the
// absolute range [offset+start, offset+end).

namespace detail {

inline void put_u64_le(std::ofstream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

inline std::uint64_t get_u64_le(std::ifstream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  if (!in) throw std::runtime_error("bitmap file: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline constexpr std::uint64_t kBitmapFormatVersion = 1;

inline void save_bitmap(const std::filesystem::path& path, const PrimeBitmap& bitmap,
                        std::uint64_t offset) {
  if (bitmap.lo() < offset) throw std::invalid_argument("save_bitmap: offset exceeds bitmap lo");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_bitmap: cannot open " + path.string());
  detail::put_u64_le(out, kBitmapFormatVersion);
  detail::put_u64_le(out, offset);
  detail::put_u64_le(out, bitmap.lo() - offset);
  detail::put_u64_le(out, bitmap.hi() - offset);
  detail::put_u64_le(out, bitmap.size());  // length prefix in bits
  for (std::uint64_t w : bitmap.words()) detail::put_u64_le(out, w);
  if (!out) throw std::runtime_error("save_bitmap: write failed");
}

struct LoadedBitmap {
  std::uint64_t offset = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  PrimeBitmap bitmap;
};

inline LoadedBitmap load_bitmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_bitmap: cannot open " + path.string());
  const std::uint64_t version = detail::get_u64_le(in);
  if (version != kBitmapFormatVersion)
    throw std::runtime_error("load_bitmap: unsupported version");
  LoadedBitmap result;
  result.offset = detail::get_u64_le(in);
  result.start = detail::get_u64_le(in);
  result.end = detail::get_u64_le(in);
  const std::uint64_t bits = detail::get_u64_le(in);
  if (result.start >= result.end || bits != result.end - result.start)
    throw std::runtime_error("load_bitmap: inconsistent header");
  result.bitmap = PrimeBitmap(result.offset + result.start, result.offset + result.end);
  for (auto& w : result.bitmap.words()) w = detail::get_u64_le(in);
  return result;
}

}  // namespace primelearn::numtheory
