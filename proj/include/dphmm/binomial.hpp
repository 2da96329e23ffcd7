#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace dphmm {

// Success/trial pair for one Binomial likelihood factor.
struct BinomialCount {
  std::uint32_t successes = 0;
  std::uint32_t trials = 0;

  std::uint32_t failures() const { return trials - successes; }

  BinomialCount& operator+=(const BinomialCount& o) {
    successes += o.successes;
    trials += o.trials;
    return *this;
  }
  friend bool operator==(const BinomialCount&, const BinomialCount&) = default;
};

// log of p^s (1-p)^f. The binomial coefficient is omitted: it never depends
// on p and cancels in every ratio the samplers form.
inline double binomial_log_kernel(const BinomialCount& c, double p) {
  double out = 0.0;
  if (c.successes > 0) out += c.successes * std::log(p);
  if (c.failures() > 0) out += c.failures() * std::log1p(-p);
  return out;
}

}  // namespace dphmm
