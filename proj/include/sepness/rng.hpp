#pragma once

#include <cstdint>
#include <string>

namespace sepness {

// Counter-based splittable generator. Each (seed, stream) pair owns an
// independent sequence: the 64-bit counter advances by the golden-ratio
// increment and every output is the finalizer of the counter, so identical
// (seed, stream) reproduce identical draws bit for bit and distinct streams
// are decorrelated by the double mix.
class RngStream {
 public:
  static constexpr const char* kAlgorithm = "splitmix64-stream/v1";

  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on [0,1) with 53 random bits.
  double next_uniform();
  double next_exponential(double rate);
  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Independent stream for replica i, stable across thread counts.
  RngStream substream(std::uint64_t i) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t counter_ = 0;
  std::uint64_t key_ = 0;
};

}  // namespace sepness
