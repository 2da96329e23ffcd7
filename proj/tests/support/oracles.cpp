#include "oracles.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace oracle {

double transition(const ChainSpec& spec, bool boundary, std::size_t season, State from, State to) {
  const int f = static_cast<int>(from), t = static_cast<int>(to);
  if (spec.n_states == 2) {
    const double hh = spec.gamma_hh.at(0);
    const double stay = f == 0 ? hh : spec.gamma_aa;
    return f == t ? stay : 1.0 - stay;
  }
  if (f == 2) return t == 2 ? 1.0 : 0.0;
  if (boundary) {
    double surv = 1.0;
    for (int w = 0; w < 26; ++w) surv *= 1.0 - spec.gamma_d;
    if (t == 0) return spec.q * surv;
    if (t == 1) return (1.0 - spec.q) * surv;
    return 1.0 - surv;
  }
  if (t == 2) return spec.gamma_d;
  const double hh = spec.gamma_hh.at(season);
  const double stay = f == 0 ? hh : spec.gamma_aa;
  return (1.0 - spec.gamma_d) * (f == t ? stay : 1.0 - stay);
}

namespace {

double emission(const ChainSpec& spec, State s, int x) {
  if (s == State::Here) return x ? spec.pi : 1.0 - spec.pi;
  return x ? 0.0 : 1.0;
}

}  // namespace

std::vector<PathWeight> enumerate_paths(const dphmm::hmm::CaptureHistory& h, const ChainSpec& spec) {
  const std::size_t T = h.size();
  std::vector<PathWeight> out;
  std::size_t total = 1;
  for (std::size_t t = 1; t < T; ++t) total *= static_cast<std::size_t>(spec.n_states);
  std::vector<State> path(T, State::Here);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t t = 1; t < T; ++t) {
      path[t] = static_cast<State>(c % spec.n_states);
      c /= spec.n_states;
    }
    double p = emission(spec, State::Here, h.observations[0]);
    for (std::size_t t = 1; t < T && p > 0.0; ++t) {
      const bool boundary = h.season[t] != h.season[t - 1];
      p *= transition(spec, boundary, h.season[t - 1], path[t - 1], path[t]);
      p *= emission(spec, path[t], h.observations[t]);
    }
    if (p > 0.0) out.push_back({path, p});
  }
  return out;
}

double likelihood(const std::vector<PathWeight>& paths) {
  double total = 0.0;
  for (const auto& p : paths) total += p.joint;
  return total;
}

std::string path_key(const std::vector<State>& path) {
  std::string key;
  for (auto s : path) key += s == State::Here ? 'H' : (s == State::Away ? 'A' : 'D');
  return key;
}

std::map<std::string, double> path_posterior(const std::vector<PathWeight>& paths) {
  const double z = likelihood(paths);
  std::map<std::string, double> out;
  for (const auto& p : paths) out[path_key(p.path)] = p.joint / z;
  return out;
}

double total_variation(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  double tv = 0.0;
  for (const auto& [k, v] : p) {
    const auto it = q.find(k);
    tv += std::abs(v - (it == q.end() ? 0.0 : it->second));
  }
  for (const auto& [k, v] : q) {
    if (!p.count(k)) tv += std::abs(v);
  }
  return 0.5 * tv;
}

double log_beta_binomial(double s, double f, double a, double b) {
  auto lbeta = [](double x, double y) { return std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y); };
  return lbeta(a + s, b + f) - lbeta(a, b);
}

std::vector<std::vector<std::size_t>> set_partitions(std::size_t n) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> labels(n, 0);
  // Restricted growth strings.
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t max_label) {
    if (i == n) {
      out.push_back(labels);
      return;
    }
    for (std::size_t l = 0; l <= max_label + 1; ++l) {
      labels[i] = l;
      rec(i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return out;
  labels[0] = 0;
  rec(1, 0);
  return out;
}

double ewens_log_prob(const std::vector<std::size_t>& labels, double alpha) {
  std::map<std::size_t, std::size_t> sizes;
  for (auto l : labels) sizes[l]++;
  double out = 0.0;
  for (const auto& [l, nc] : sizes) out += std::log(alpha) + std::lgamma(static_cast<double>(nc));
  for (std::size_t i = 0; i < labels.size(); ++i) out -= std::log(alpha + static_cast<double>(i));
  return out;
}

std::vector<std::size_t> canonical(const std::vector<std::size_t>& labels) {
  std::map<std::size_t, std::size_t> relabel;
  std::vector<std::size_t> out;
  for (auto l : labels) {
    auto it = relabel.find(l);
    if (it == relabel.end()) it = relabel.emplace(l, relabel.size()).first;
    out.push_back(it->second);
  }
  return out;
}

std::string partition_key(const std::vector<std::size_t>& labels) {
  std::string key;
  for (auto l : canonical(labels)) key += static_cast<char>('0' + l);
  return key;
}

double integrate(const std::function<double(double)>& f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-12);
}

dphmm::hmm::CaptureHistory Gen::two_state_history(std::size_t length) {
  std::vector<std::uint8_t> obs(length);
  obs[0] = 1;
  for (std::size_t t = 1; t < length; ++t) obs[t] = coin() ? 1 : 0;
  return dphmm::hmm::make_history("g", obs);
}

dphmm::hmm::CaptureHistory Gen::three_state_history(std::size_t length, int first_week) {
  dphmm::hmm::CaptureHistory h;
  h.id = "g";
  int week = first_week;
  std::uint32_t season = 0;
  for (std::size_t t = 0; t < length; ++t) {
    h.observations.push_back(t == 0 ? 1 : (coin(0.4) ? 1 : 0));
    h.season.push_back(season);
    h.occasion.push_back(week);
    if (++week > dphmm::hmm::kLastWeek) {
      week = dphmm::hmm::kFirstWeek;
      ++season;
    }
  }
  return h;
}

}  // namespace oracle
