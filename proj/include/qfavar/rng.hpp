#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace qfavar {

// Single RNG stream. Every stochastic routine takes one of these by
// reference so that chains/workers can own independent, reproducible
// streams (derive them with Rng::split).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), gen_(seed) {}

  // Deterministic child stream for parallel workers.
  Rng split(std::uint64_t stream_id) const {
    // SplitMix64-style mixing of (seed, stream_id)
    std::uint64_t x = seed_ + 0x9e3779b97f4a7c15ull * (stream_id + 1);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27; x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return Rng(x);
  }

  double uniform() { return unif_(gen_); }
  double normal() { return norm_(gen_); }
  double normal(double mean, double sd) { return mean + sd * norm_(gen_); }
  double exponential(double mean) {
    if (mean <= 0.0) throw std::invalid_argument("exponential: mean must be > 0");
    return -mean * std::log1p(-unif_(gen_));
  }
  // shape/rate parameterization
  double gamma(double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(gen_);
  }
  // Inverse gamma, rate parameterization: x ~ IG(a, b) iff 1/x ~ Gamma(a, b).
  double inverse_gamma(double shape, double rate) {
    return 1.0 / gamma(shape, rate);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

}  // namespace qfavar
