#pragma once

#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "primelearn/numtheory.hpp"

// Sparse one-hot coordinates. An integer at range-relative index s occupies a
// single unit cell of an M x N x O volume; only the index tuple is stored,
// the dense volume is never materialized outside of tests.

namespace primelearn::encoding {

// Raised when an index would fall outside the M*N*O volume, i.e. the span is
// larger than the encoding can address.
struct capacity_error : std::length_error {
  using std::length_error::length_error;
};

struct EncodingShape {
  std::size_t m = 150;
  std::size_t n = 150;
  std::size_t o = 150;
  std::size_t l = 15;  // sequence length

  std::uint64_t capacity() const {
    return static_cast<std::uint64_t>(m) * n * o;
  }

  void validate() const {
    if (m == 0 || n == 0 || o == 0 || l == 0)
      throw std::invalid_argument("EncodingShape: all dimensions must be >= 1");
  }

  bool operator==(const EncodingShape&) const = default;
};

struct SparseCode {
  std::uint64_t s = 0;  // range-relative index
  std::uint32_t m = 0;
  std::uint32_t n = 0;
  std::uint32_t o = 0;

  bool operator==(const SparseCode&) const = default;
};

inline SparseCode encode_index(std::uint64_t s, const EncodingShape& shape) {
  shape.validate();
  if (s >= shape.capacity())
    throw capacity_error("encode_index: s exceeds M*N*O volume");
  const std::uint64_t no = static_cast<std::uint64_t>(shape.n) * shape.o;
  SparseCode code;
  code.s = s;
  code.m = static_cast<std::uint32_t>(s / no);
  code.n = static_cast<std::uint32_t>((s % no) / shape.o);
  code.o = static_cast<std::uint32_t>(s % shape.o);
  return code;
}

inline std::uint64_t decode_index(std::uint32_t m, std::uint32_t n, std::uint32_t o,
                                  const EncodingShape& shape) {
  shape.validate();
  if (m >= shape.m || n >= shape.n || o >= shape.o)
    throw std::invalid_argument("decode_index: coordinate out of range");
  return (static_cast<std::uint64_t>(m) * shape.n + n) * shape.o + o;
}

// A window of L consecutive encoded integers with primality labels.
struct SequenceSample {
  std::vector<SparseCode> codes;
  std::vector<std::uint64_t> values;  // absolute integers, offset + s
  std::vector<std::uint8_t> labels;   // 1 iff prime
};

// Encodes [start_s, start_s + L) against `primality`, which must cover the
// absolute values offset+start_s .. offset+start_s+L-1.
inline SequenceSample encode_window(std::uint64_t start_s, const EncodingShape& shape,
                                    std::uint64_t offset,
                                    const numtheory::PrimeBitmap& primality) {
  shape.validate();
  if (start_s + shape.l > shape.capacity())
    throw capacity_error("encode_window: window exceeds M*N*O volume");
  const std::uint64_t abs_lo = offset + start_s;
  if (abs_lo < primality.lo() || abs_lo + shape.l > primality.hi())
    throw std::invalid_argument("encode_window: primality bitmap does not cover window");

  SequenceSample sample;
  sample.codes.reserve(shape.l);
  sample.values.reserve(shape.l);
  sample.labels.reserve(shape.l);
  for (std::uint64_t s = start_s; s < start_s + shape.l; ++s) {
    sample.codes.push_back(encode_index(s, shape));
    sample.values.push_back(offset + s);
    sample.labels.push_back(primality.test(offset + s) ? 1 : 0);
  }
  return sample;
}

}  // namespace primelearn::encoding
