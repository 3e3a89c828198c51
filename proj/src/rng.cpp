#include "sepness/rng.hpp"

#include <cmath>

#include "sepness/errors.hpp"

namespace sepness {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Stafford mix13).
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), counter_(0) {
  key_ = mix64(mix64(seed + kGolden) ^ mix64(stream * 0xD1342543DE82EF95ull + 1));
}

std::uint64_t RngStream::next_u64() {
  counter_ += kGolden;
  return mix64(counter_ + key_);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_exponential(double rate) {
  if (!(rate > 0.0)) throw parameter_error("exponential rate must be positive");
  return -std::log1p(-next_uniform()) / rate;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  // Rejection to avoid modulo bias.
  const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

RngStream RngStream::substream(std::uint64_t i) const {
  return RngStream(seed_, mix64(stream_ * kGolden + 0x632BE59BD9B4E019ull) ^ mix64(i + 1));
}

}  // namespace sepness
