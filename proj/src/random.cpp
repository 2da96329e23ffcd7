#include "dphmm/random.hpp"

#include <cfloat>
#include <limits>

namespace dphmm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 1));
}

Rng make_stream(std::uint64_t master, std::uint64_t stream) { return Rng(split_seed(master, stream)); }

double sample_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

double sample_log_gamma(Rng& rng, double shape) {
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(rng));
  }
  // G(shape) = G(shape + 1) * U^(1/shape)
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  return std::log(dist(rng)) + std::log(uniform01(rng)) / shape;
}

double sample_gamma(Rng& rng, double shape, double rate) {
  const double x = std::exp(sample_log_gamma(rng, shape) - std::log(rate));
  return x < DBL_MIN ? DBL_MIN : x;
}

double sample_beta(Rng& rng, double a, double b) {
  const double la = sample_log_gamma(rng, a);
  const double lb = sample_log_gamma(rng, b);
  // a / (a + b) = logistic(la - lb)
  return clamp_prob(logistic(la - lb));
}

}  // namespace dphmm
