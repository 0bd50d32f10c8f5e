#pragma once

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "primelearn/encoding.hpp"
#include "primelearn/numtheory.hpp"
#include "primelearn/rng.hpp"

// Range configuration, non-overlapping window enumeration, per-epoch
// resampling, and lazy batch production. Nothing is pre-materialized: labels
// are sieved per segment at consumption time and cached with a bounded
// footprint.

namespace primelearn::dataset {

using encoding::EncodingShape;
using encoding::SequenceSample;

// start/end are range-relative; absolute integers are offset+start .. offset+end.
struct RangeSpec {
  std::uint64_t offset = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  std::uint64_t span() const { return end - start; }
  std::uint64_t abs_lo() const { return offset + start; }
  std::uint64_t abs_hi() const { return offset + end; }

  void validate() const {
    if (start >= end) throw std::invalid_argument("RangeSpec: start must be < end");
  }

  bool operator==(const RangeSpec&) const = default;
};

struct SplitConfig {
  RangeSpec train;
  RangeSpec test;
  EncodingShape shape;
  double sample_fraction = 0.05;

  void validate() const {
    train.validate();
    test.validate();
    shape.validate();
    if (train.end > shape.capacity() || test.end > shape.capacity())
      throw encoding::capacity_error("SplitConfig: range end exceeds M*N*O volume");
    if (!(sample_fraction > 0.0) || sample_fraction > 1.0)
      throw std::invalid_argument("SplitConfig: sample_fraction must be in (0, 1]");
    const bool disjoint =
        train.abs_hi() <= test.abs_lo() || test.abs_hi() <= train.abs_lo();
    if (!disjoint) throw std::invalid_argument("SplitConfig: train/test ranges overlap");
  }
};

// Number of non-overlapping length-L windows tiling the range; the remainder
// integers at the top are dropped.
inline std::size_t enumerate_windows(const RangeSpec& range, std::size_t l) {
  range.validate();
  if (l == 0) throw std::invalid_argument("enumerate_windows: L must be >= 1");
  if (range.span() < l)
    throw std::invalid_argument("enumerate_windows: range shorter than one window");
  return static_cast<std::size_t>(range.span() / l);
}

struct EpochSample {
  std::size_t epoch_index = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> window_ids;
};

// Uniform draw without replacement of round(fraction * total) window ids
// (round half to even, minimum 1), deterministic in (master_seed, epoch).
inline EpochSample sample_epoch(const SplitConfig& split, std::size_t epoch,
                                std::uint64_t master_seed) {
  split.validate();
  const std::size_t total = enumerate_windows(split.train, split.shape.l);
  const int prev_mode = std::fegetround();
  std::fesetround(FE_TONEAREST);
  double rounded = std::nearbyint(split.sample_fraction * static_cast<double>(total));
  std::fesetround(prev_mode);
  std::size_t k = static_cast<std::size_t>(rounded);
  k = std::min(std::max<std::size_t>(k, 1), total);

  EpochSample sample;
  sample.epoch_index = epoch;
  sample.seed = rng::mix_seed(master_seed, 0xE90C0000ull + epoch);
  rng::Engine eng(sample.seed);
  sample.window_ids = rng::sample_without_replacement(total, k, eng);
  std::sort(sample.window_ids.begin(), sample.window_ids.end());
  return sample;
}

// --------------------------------------------------------------------------
// Lazily sieved primality labels over absolute values [offset, offset+rel_end),
// cached per segment with FIFO eviction so residency stays O(segments).

class LabelSource {
 public:
  static constexpr std::uint64_t kSegmentSpan = 1ull << 16;

  LabelSource(std::uint64_t offset, std::uint64_t rel_end, std::size_t max_segments = 64)
      : offset_(offset), abs_end_(offset + rel_end), max_segments_(max_segments) {
    if (max_segments_ == 0) throw std::invalid_argument("LabelSource: capacity must be >= 1");
  }

  std::uint64_t offset() const { return offset_; }

  bool is_prime_at(std::uint64_t abs_value) {
    return segment_for(abs_value).test(abs_value);
  }

  // Assembled copy of labels for [abs_lo, abs_hi); spans segment boundaries.
  numtheory::PrimeBitmap window_bitmap(std::uint64_t abs_lo, std::uint64_t abs_hi) {
    if (abs_lo >= abs_hi) throw std::invalid_argument("window_bitmap: empty range");
    numtheory::PrimeBitmap out(abs_lo, abs_hi);
    for (std::uint64_t v = abs_lo; v < abs_hi; ++v)
      if (is_prime_at(v)) out.set(v, true);
    return out;
  }

  std::size_t resident_segments() const { return cache_.size(); }

 private:
  const numtheory::PrimeBitmap& segment_for(std::uint64_t abs_value) {
    if (abs_value < offset_ || abs_value >= abs_end_)
      throw std::out_of_range("LabelSource: value outside configured domain");
    const std::uint64_t seg = (abs_value - offset_) / kSegmentSpan;
    auto it = cache_.find(seg);
    if (it != cache_.end()) return it->second;
    const std::uint64_t lo = offset_ + seg * kSegmentSpan;
    const std::uint64_t hi = std::min(abs_end_, lo + kSegmentSpan);
    auto [pos, inserted] = cache_.emplace(seg, numtheory::sieve_range(lo, hi));
    order_.push_back(seg);
    if (cache_.size() > max_segments_) {
      cache_.erase(order_.front());
      order_.pop_front();
    }
    return pos->second;
  }

  std::uint64_t offset_;
  std::uint64_t abs_end_;
  std::size_t max_segments_;
  std::map<std::uint64_t, numtheory::PrimeBitmap> cache_;
  std::deque<std::uint64_t> order_;
};

// --------------------------------------------------------------------------
// Batch stream: shuffles the epoch's window ids by the epoch seed, then
// encodes windows on demand. The final partial batch is emitted.

class BatchStream {
 public:
  BatchStream(const SplitConfig& split, const EpochSample& epoch_sample,
              std::size_t batch_size, LabelSource& labels)
      : split_(split), batch_size_(batch_size), labels_(labels) {
    if (batch_size_ == 0) throw std::invalid_argument("BatchStream: batch_size must be >= 1");
    if (labels.offset() != split.train.offset)
      throw std::invalid_argument("BatchStream: label source offset mismatch");
    order_ = epoch_sample.window_ids;
    rng::Engine eng(rng::mix_seed(epoch_sample.seed, 0xBA7C4));
    rng::shuffle(order_, eng);
  }

  std::size_t n_batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
  std::size_t n_windows() const { return order_.size(); }

  std::optional<std::vector<SequenceSample>> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
    std::vector<SequenceSample> batch;
    batch.reserve(count);
    const std::size_t l = split_.shape.l;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t window_id = order_[cursor_ + i];
      const std::uint64_t start_s = split_.train.start + window_id * l;
      const std::uint64_t abs_lo = split_.train.offset + start_s;
      const auto bitmap = labels_.window_bitmap(abs_lo, abs_lo + l);
      batch.push_back(encoding::encode_window(start_s, split_.shape, split_.train.offset, bitmap));
    }
    cursor_ += count;
    return batch;
  }

 private:
  SplitConfig split_;
  std::size_t batch_size_;
  LabelSource& labels_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace primelearn::dataset
