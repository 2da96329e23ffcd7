#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dphmm {

using Rng = std::mt19937_64;

// Stream splitting: the seed for stream `stream` of master seed `master` is
// splitmix64(master ^ splitmix64(stream + 1)). Chains use stream = chain index,
// simulation replicates use stream = 1000 + replicate.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);
Rng make_stream(std::uint64_t master, std::uint64_t stream);

// Uniform on the open interval (0,1); 53 random bits.
inline double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double sample_normal(Rng& rng);

// log of a Gamma(shape, 1) variate. Stable for shape << 1 where the variate
// itself underflows.
double sample_log_gamma(Rng& rng, double shape);

// Gamma(shape, rate) variate, floored at the smallest positive normal double.
double sample_gamma(Rng& rng, double shape, double rate);

// Beta(a, b) variate kept inside [kProbFloor, 1 - kProbFloor].
double sample_beta(Rng& rng, double a, double b);

inline constexpr double kProbFloor = 1e-15;

inline double clamp_prob(double p) {
  return p < kProbFloor ? kProbFloor : (p > 1.0 - kProbFloor ? 1.0 - kProbFloor : p);
}

inline double logistic(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// log B(a, b)
inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

}  // namespace dphmm
