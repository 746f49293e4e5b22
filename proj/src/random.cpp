#include "mjp/random.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mjp {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

Rng::result_type Rng::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGoldenGamma);
}

Rng Rng::split(std::uint64_t stream) const {
  Rng child(0);
  child.key_ = mix64(key_ ^ mix64(stream + kGoldenGamma) ^ 0xd1b54a32d192ed03ULL);
  return child;
}

double Rng::uniform() {
  // 53 random bits, shifted by half an ulp so the result is never 0 or 1.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::exponential(double rate) { return -std::log(uniform()) / rate; }

double Rng::normal() {
  std::normal_distribution<double> dist;
  return dist(*this);
}

double Rng::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(*this);
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(*this);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights must have positive total");
  double u = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  // Rounding left u marginally nonnegative; return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

}  // namespace mjp
