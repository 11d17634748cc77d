#pragma once

#include <cstdint>

namespace dssync {

// Deterministic pseudo-random generator built on SplitMix64
// (Steele, Lea and Flood, "Fast splittable pseudorandom number generators").
// Chosen over std::mt19937 + std::*_distribution because the standard
// distributions are implementation-defined: the same seed can produce
// different streams on different standard libraries.  Every draw here is
// specified bit-for-bit, so runs replay exactly on any platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Independent stream for a (seed, purpose, rank, iteration) tuple.
  // Purpose tags live in dssync::streams.  Mixing happens through the
  // SplitMix64 finalizer, so neighbouring tuples give unrelated streams.
  static Rng for_stream(uint64_t seed, uint64_t purpose, uint64_t rank, uint64_t iteration);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform01();

  // Uniform integer in [0, n).  Rejection sampling, no modulo bias.
  uint64_t uniform_below(uint64_t n);

  // Standard normal via Box-Muller.  Always consumes exactly two uniform
  // draws and discards the second variate, so the stream position after a
  // call never depends on call history.
  double gaussian();

 private:
  uint64_t state_;
};

namespace streams {
// Purpose tags for Rng::for_stream.  Arbitrary odd constants; they only
// need to be distinct.
inline constexpr uint64_t kDataGen = 0x9e3779b97f4a7c15ULL;
inline constexpr uint64_t kInitParams = 0xbf58476d1ce4e5b9ULL;
inline constexpr uint64_t kShard = 0x94d049bb133111ebULL;
inline constexpr uint64_t kBatch = 0xd6e8feb86659fd93ULL;
inline constexpr uint64_t kGradientNoise = 0xa0761d6478bd642fULL;
inline constexpr uint64_t kEpochOrder = 0xe7037ed1a0b428dbULL;
}  // namespace streams

}  // namespace dssync
