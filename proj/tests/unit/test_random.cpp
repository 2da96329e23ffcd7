#include <cmath>
#include <set>

#include "doctest.h"
#include "dphmm/binomial.hpp"
#include "dphmm/random.hpp"

using namespace dphmm;

namespace {

struct Moments {
  double mean, var;
};

template <class F>
Moments moments(F draw, int n) {
  double s = 0, ss = 0;
  for (int i = 0; i < n; ++i) {
    const double x = draw();
    s += x;
    ss += x * x;
  }
  const double m = s / n;
  return {m, ss / n - m * m};
}

}  // namespace

TEST_CASE("seed splitting is deterministic and separates streams") {
  CHECK(split_seed(42, 0) == split_seed(42, 0));
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 1000; ++s) seeds.insert(split_seed(42, s));
  CHECK(seeds.size() == 1000);
  CHECK(split_seed(1, 0) != split_seed(2, 0));
  Rng a = make_stream(7, 3), b = make_stream(7, 3);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
}

TEST_CASE("uniform draws stay inside the open unit interval") {
  Rng rng(1);
  double lo = 1, hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
}

TEST_CASE("Gamma draws have the right moments") {
  Rng rng(2);
  for (auto [shape, rate] : {std::pair{0.3, 2.0}, {2.5, 0.5}, {40.0, 4.0}}) {
    CAPTURE(shape);
    const int n = 200000;
    const auto m = moments([&] { return sample_gamma(rng, shape, rate); }, n);
    const double mean = shape / rate, var = shape / (rate * rate);
    CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var / n));
    CHECK(m.var == doctest::Approx(var).epsilon(0.05));
  }
  CHECK(sample_gamma(rng, 1e-3, 1.0) > 0.0);
}

TEST_CASE("Beta draws have the right moments, including tiny shapes") {
  Rng rng(3);
  for (auto [a, b] : {std::pair{2.0, 3.0}, {0.05, 0.05}, {8.0, 4.0}, {0.5, 20.0}}) {
    CAPTURE(a);
    CAPTURE(b);
    const int n = 200000;
    double lo = 1, hi = 0;
    const auto m = moments(
        [&] {
          const double x = sample_beta(rng, a, b);
          lo = std::min(lo, x);
          hi = std::max(hi, x);
          return x;
        },
        n);
    const double mean = a / (a + b), var = a * b / ((a + b) * (a + b) * (a + b + 1));
    CHECK(std::abs(m.mean - mean) < 4 * std::sqrt(var / n));
    CHECK(lo >= kProbFloor);
    CHECK(hi <= 1 - kProbFloor);
  }
}

TEST_CASE("normal draws") {
  Rng rng(4);
  const auto m = moments([&] { return sample_normal(rng); }, 200000);
  CHECK(std::abs(m.mean) < 0.01);
  CHECK(m.var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("logistic helpers") {
  CHECK(logistic(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  CHECK(logistic(2.0) == doctest::Approx(0.8808).epsilon(1e-4));
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) == 1.0);
  for (double p : {1e-9, 0.1, 0.5, 0.9, 1 - 1e-9}) CHECK(logistic(logit(p)) == doctest::Approx(p).epsilon(1e-9));
  CHECK(clamp_prob(0.0) == kProbFloor);
  CHECK(clamp_prob(1.0) == 1 - kProbFloor);
  CHECK(log_beta_fn(1.0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("binomial kernel") {
  const BinomialCount c{3, 5};
  CHECK(c.failures() == 2);
  CHECK(binomial_log_kernel(c, 0.4) == doctest::Approx(3 * std::log(0.4) + 2 * std::log(0.6)));
  CHECK(binomial_log_kernel(BinomialCount{0, 0}, 0.4) == 0.0);
  BinomialCount sum;
  sum += c;
  sum += BinomialCount{1, 1};
  CHECK(sum == BinomialCount{4, 6});
}
