#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>

namespace survbench {

/// Seedable pseudo-random stream. Identical (seed, stream_id) pairs replay
/// identical draw sequences on every platform: the engine is mt19937_64
/// seeded through std::seed_seq, and every derived draw below is computed
/// by this class rather than by the implementation-defined std distributions.
///
/// A stream is single-owner. Concurrent tasks each take their own stream,
/// typically via substream().
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);
  /// Standard normal (Marsaglia polar method).
  double normal();

  /// Child stream with the same seed and a stream id mixed from this
  /// stream's id and `key`. Does not advance this stream.
  RandomStream substream(std::uint64_t key) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, used for deriving stream ids.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace survbench
