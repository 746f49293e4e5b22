#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace mjp {

/// Counter-based, splittable random source.
///
/// Output k of a generator with key K is mix64(K + (k+1) * golden_gamma), the
/// SplitMix64 construction. `split(i)` derives an independent child key by
/// hashing the parent key with the stream index, so every chain, replicate
/// and particle system can own its stream without sharing state. Streams are
/// bit-reproducible for a given (seed, split path) on one platform.
///
/// Satisfies UniformRandomBitGenerator, so std distributions accept it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Independent child stream; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  /// Uniform on the open interval (0, 1).
  double uniform();
  double exponential(double rate);
  double normal();
  /// Gamma with (shape, rate) parameterization.
  double gamma(double shape, double rate);
  std::uint64_t poisson(double mean);
  /// Index drawn proportionally to nonnegative, not necessarily normalized,
  /// weights. Requires a positive total.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mjp
