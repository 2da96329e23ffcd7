#include "dphmm/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dphmm/error.hpp"

namespace dphmm::dp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sigmoid(double x) { return x < 0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x)); }

// Removes cluster `label` (which must be empty) by moving the last cluster into
// its slot.
void erase_cluster(DpState& s, std::vector<std::size_t>& sizes, std::size_t label) {
  const std::size_t last = s.cluster_values.size() - 1;
  if (label != last) {
    s.cluster_values[label] = s.cluster_values[last];
    sizes[label] = sizes[last];
    for (auto& c : s.assignments) {
      if (c == last) c = label;
    }
  }
  s.cluster_values.pop_back();
  sizes.pop_back();
}

}  // namespace

std::vector<std::size_t> DpState::cluster_sizes() const {
  std::vector<std::size_t> sizes(cluster_values.size(), 0);
  for (auto c : assignments) sizes.at(c)++;
  return sizes;
}

DpState single_cluster(std::size_t n, double value) {
  DpState s;
  s.assignments.assign(n, 0);
  s.cluster_values = {value};
  return s;
}

void validate(const DpState& s) {
  if (s.assignments.empty()) throw DomainError("DP state has no individuals");
  if (s.cluster_values.empty() || s.cluster_values.size() > s.assignments.size()) {
    throw DomainError("DP state cluster count outside [1, n]");
  }
  std::vector<std::size_t> sizes(s.cluster_values.size(), 0);
  for (auto c : s.assignments) {
    if (c >= sizes.size()) throw DomainError("DP assignment refers to a missing cluster");
    sizes[c]++;
  }
  if (std::find(sizes.begin(), sizes.end(), 0u) != sizes.end()) throw DomainError("DP state has an empty cluster");
  for (double v : s.cluster_values) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError("DP cluster value outside (0,1)");
  }
  if (!(s.alpha > 0.0)) throw DomainError("DP concentration must be positive");
  if (!(s.base_a > 0.0 && s.base_b > 0.0)) throw DomainError("base distribution parameters must be positive");
  if (!(s.gamma_prior_a > 0.0 && s.gamma_prior_b > 0.0)) throw DomainError("Gamma prior parameters must be positive");
}

CrpDraw crp_draw(std::size_t n, double alpha, const BaseSampler& base, Rng& rng) {
  if (n == 0) throw DomainError("CRP draw needs at least one customer");
  if (!(alpha > 0.0)) throw DomainError("CRP concentration must be positive");
  CrpDraw out;
  out.assignments.resize(n);
  out.assignments[0] = 0;
  out.values.push_back(base(rng));
  for (std::size_t i = 1; i < n; ++i) {
    // i customers seated: a new table with weight alpha, otherwise copy the
    // table of a uniformly chosen earlier customer (weight n_c per table).
    const double u = uniform01(rng) * (static_cast<double>(i) + alpha);
    if (u < alpha) {
      out.assignments[i] = out.values.size();
      out.values.push_back(base(rng));
    } else {
      const auto j = std::min(static_cast<std::size_t>(u - alpha), i - 1);
      out.assignments[i] = out.assignments[j];
    }
  }
  return out;
}

void neal8_update(DpState& s, const LogLikelihood& log_f, std::size_t m, Rng& rng) {
  if (m == 0) throw DomainError("algorithm 8 needs at least one auxiliary component");
  const std::size_t n = s.n();
  std::vector<std::size_t> sizes = s.cluster_sizes();
  std::vector<double> aux(m);
  std::vector<double> logw;
  const double log_aux_weight = std::log(s.alpha / static_cast<double>(m));

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t current = s.assignments[i];
    sizes[current]--;
    std::size_t fresh_from = 0;
    if (sizes[current] == 0) {
      // i was alone: its value becomes the first auxiliary component.
      aux[0] = s.cluster_values[current];
      fresh_from = 1;
      s.assignments[i] = std::numeric_limits<std::size_t>::max();
      erase_cluster(s, sizes, current);
    }
    for (std::size_t j = fresh_from; j < m; ++j) aux[j] = sample_beta(rng, s.base_a, s.base_b);

    const std::size_t k = s.cluster_values.size();
    logw.resize(k + m);
    double top = kNegInf;
    for (std::size_t c = 0; c < k; ++c) {
      logw[c] = std::log(static_cast<double>(sizes[c])) + log_f(i, s.cluster_values[c]);
      top = std::max(top, logw[c]);
    }
    for (std::size_t j = 0; j < m; ++j) {
      logw[k + j] = log_aux_weight + log_f(i, aux[j]);
      top = std::max(top, logw[k + j]);
    }
    if (!std::isfinite(top)) {
      throw NumericalError("algorithm 8: every candidate cluster has zero probability for individual " +
                           std::to_string(i));
    }
    double total = 0.0;
    for (auto& w : logw) {
      w = std::exp(w - top);
      total += w;
    }
    const double u = uniform01(rng) * total;
    std::size_t pick = logw.size() - 1;
    double acc = 0.0;
    for (std::size_t c = 0; c < logw.size(); ++c) {
      acc += logw[c];
      if (u < acc) {
        pick = c;
        break;
      }
    }
    if (pick < k) {
      s.assignments[i] = pick;
      sizes[pick]++;
    } else {
      s.assignments[i] = k;
      s.cluster_values.push_back(aux[pick - k]);
      sizes.push_back(1);
    }
  }
}

void update_cluster_params_conjugate(DpState& s, std::span<const BinomialCount> stats, Rng& rng) {
  if (stats.size() != s.n()) throw DomainError("one set of counts per individual is required");
  std::vector<BinomialCount> pooled(s.k());
  for (std::size_t i = 0; i < s.n(); ++i) pooled[s.assignments[i]] += stats[i];
  for (std::size_t c = 0; c < s.k(); ++c) {
    s.cluster_values[c] = sample_beta(rng, s.base_a + pooled[c].successes, s.base_b + pooled[c].failures());
  }
}

double seasonal_log_likelihood(std::span<const BinomialCount> by_season, std::span<const double> beta,
                               double phi) {
  if (beta.size() < by_season.size()) throw DomainError("one year effect per season is required");
  const double offset = logit(phi);
  double out = 0.0;
  for (std::size_t y = 0; y < by_season.size(); ++y) {
    const auto& c = by_season[y];
    if (c.trials == 0) continue;
    const double x = beta[y] + offset;
    if (c.successes > 0) out += c.successes * log_sigmoid(x);
    if (c.failures() > 0) out += c.failures() * log_sigmoid(-x);
  }
  return out;
}

double update_cluster_params_mh(DpState& s, std::span<const std::vector<BinomialCount>> stats_by_season,
                                std::span<const double> beta, Rng& rng, int steps) {
  if (stats_by_season.size() != s.n()) throw DomainError("one set of seasonal counts per individual is required");
  const std::size_t n_seasons = beta.size();
  std::vector<std::vector<BinomialCount>> pooled(s.k(), std::vector<BinomialCount>(n_seasons));
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto& mine = stats_by_season[i];
    if (mine.size() > n_seasons) throw DomainError("seasonal counts exceed the number of year effects");
    auto& dst = pooled[s.assignments[i]];
    for (std::size_t y = 0; y < mine.size(); ++y) dst[y] += mine[y];
  }

  std::size_t accepted = 0, attempted = 0;
  for (std::size_t c = 0; c < s.k(); ++c) {
    const auto& counts = pooled[c];
    // log target on u = logit(phi), Jacobian phi (1 - phi) folded into the Beta exponents.
    auto log_target = [&](double u) {
      const double phi = clamp_prob(logistic(u));
      return s.base_a * std::log(phi) + s.base_b * std::log1p(-phi) +
             seasonal_log_likelihood(counts, beta, phi);
    };
    BinomialCount total;
    for (const auto& y : counts) total += y;
    const double p_hat = (total.successes + 0.5) / (total.trials + 1.0);
    const double step_sd = 2.4 / std::sqrt(total.trials * p_hat * (1.0 - p_hat) + 1.0);

    double u = logit(s.cluster_values[c]);
    double lt = log_target(u);
    for (int k = 0; k < steps; ++k) {
      const double prop = u + step_sd * sample_normal(rng);
      const double lp = log_target(prop);
      ++attempted;
      if (std::isfinite(lp) && std::log(uniform01(rng)) < lp - lt) {
        u = prop;
        lt = lp;
        ++accepted;
      }
    }
    s.cluster_values[c] = clamp_prob(logistic(u));
  }
  return attempted ? static_cast<double>(accepted) / attempted : 0.0;
}

double sample_eta(double alpha, std::size_t n, Rng& rng) {
  if (!(alpha > 0.0) || n == 0) throw DomainError("sample_eta needs alpha > 0 and n >= 1");
  return sample_beta(rng, alpha + 1.0, static_cast<double>(n));
}

double escobar_west_weight(std::size_t k, std::size_t n, double eta, double prior_a, double prior_b) {
  const double shape = prior_a + static_cast<double>(k) - 1.0;
  return shape / (static_cast<double>(n) * (prior_b - std::log(eta)) + shape);
}

double update_alpha(std::size_t k, std::size_t n, double eta, double prior_a, double prior_b, Rng& rng) {
  if (k < 1 || k > n) throw DomainError("cluster count must lie in [1, n]");
  if (!(eta > 0.0 && eta < 1.0)) throw DomainError("eta must lie in (0,1)");
  if (!(prior_a > 0.0 && prior_b > 0.0)) throw DomainError("Gamma prior parameters must be positive");
  const double rate = prior_b - std::log(eta);
  const double weight = escobar_west_weight(k, n, eta, prior_a, prior_b);
  const double shape = uniform01(rng) < weight ? prior_a + k : prior_a + k - 1.0;
  return sample_gamma(rng, shape, rate);
}

GammaHyperparams murugiah_hyperparams(std::size_t n) {
  if (n == 0) throw DomainError("murugiah_hyperparams needs n >= 1");
  const double v = std::exp(-0.033 * static_cast<double>(n));
  return {v, v};
}

double log_joint_density(const DpState& s, const LogLikelihood& log_f) {
  const auto sizes = s.cluster_sizes();
  double out = static_cast<double>(s.k()) * std::log(s.alpha);
  for (auto nc : sizes) out += std::lgamma(static_cast<double>(nc));
  for (std::size_t i = 0; i < s.n(); ++i) out -= std::log(s.alpha + static_cast<double>(i));
  for (double v : s.cluster_values) {
    out += (s.base_a - 1.0) * std::log(v) + (s.base_b - 1.0) * std::log1p(-v) - log_beta_fn(s.base_a, s.base_b);
  }
  for (std::size_t i = 0; i < s.n(); ++i) out += log_f(i, s.value_of(i));
  return out;
}

}  // namespace dphmm::dp
