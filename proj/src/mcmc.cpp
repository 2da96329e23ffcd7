#include "dphmm/mcmc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>

#include "dphmm/error.hpp"

namespace dphmm::mcmc {

namespace {

constexpr double kProposalDf = 4.0;

std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void emit(const TraceSink& trace, const ChainState& s, std::string_view step, std::string detail = {}) {
  if (trace) trace({s.chain, s.iteration + 1, step, std::move(detail)});
}

}  // namespace

void validate(const FixedEffects& f, std::size_t n_seasons) {
  if (f.beta_yr.size() != n_seasons) {
    throw DomainError("expected " + std::to_string(n_seasons) + " year effects, got " +
                      std::to_string(f.beta_yr.size()));
  }
  for (double b : f.beta_yr) {
    if (!std::isfinite(b)) throw DomainError("year effects must be finite");
  }
  if (!(f.gamma_d >= 0.0 && f.gamma_d < 1.0)) throw DomainError("gamma_d must lie in [0,1)");
  if (!(f.q > 0.0 && f.q < 1.0)) throw DomainError("q must lie in (0,1)");
}

void McmcConfig::validate() const {
  if (iterations == 0) throw DomainError("iterations must be at least 1");
  if (burn_in >= iterations) throw DomainError("burn_in must be smaller than iterations");
  if (thin == 0) throw DomainError("thin must be at least 1");
  if (chains == 0) throw DomainError("chains must be at least 1");
  if (m == 0) throw DomainError("m must be at least 1");
  for (double p : {initial_pi, initial_gamma_hh, initial_gamma_aa}) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("initial probabilities must lie in (0,1)");
  }
  if (!(initial_alpha > 0.0 && initial_base_a > 0.0 && initial_base_b > 0.0)) {
    throw DomainError("initial alpha and base parameters must be positive");
  }
  if (!(fixed_priors.beta_sd > 0.0)) throw DomainError("beta_sd must be positive");
  if (!(base_hyperprior.log_sd > 0.0)) throw DomainError("base hyperprior log_sd must be positive");
}

std::size_t McmcConfig::adaptation_end() const {
  return adaptation_window == 0 ? burn_in : std::min(adaptation_window, burn_in);
}

ConfigSignature signature(const McmcConfig& c) { return {c.iterations, c.burn_in, c.thin, c.m, c.model}; }

std::size_t retained_count(std::size_t iterations, std::size_t burn_in, std::size_t thin) {
  if (thin == 0) throw DomainError("thin must be at least 1");
  if (burn_in >= iterations) return 0;
  return (iterations - burn_in + thin - 1) / thin;
}

// ---------------------------------------------------------------------------
// Multivariate t

MultivariateT::MultivariateT(std::vector<double> location, std::vector<double> scale_row_major, double df)
    : location_(std::move(location)), scale_(std::move(scale_row_major)), df_(df) {
  const auto d = static_cast<Eigen::Index>(location_.size());
  if (d == 0 || scale_.size() != location_.size() * location_.size()) {
    throw DomainError("multivariate t: scale matrix does not match the location");
  }
  if (!(df_ > 0.0)) throw DomainError("multivariate t: degrees of freedom must be positive");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> s(scale_.data(), d, d);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw DomainError("multivariate t: scale matrix is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  chol_.resize(scale_.size());
  log_det_ = 0.0;
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) chol_[r * d + c] = l(r, c);
    log_det_ += 2.0 * std::log(l(r, r));
  }
}

std::vector<double> MultivariateT::sample(Rng& rng) const {
  const std::size_t d = dim();
  std::vector<double> z(d);
  for (auto& v : z) v = sample_normal(rng);
  const double w = std::sqrt(df_ / (2.0 * sample_gamma(rng, df_ / 2.0, 1.0)));
  std::vector<double> x(location_);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c <= r; ++c) acc += chol_[r * d + c] * z[c];
    x[r] += w * acc;
  }
  return x;
}

double MultivariateT::log_density(std::span<const double> x) const {
  const std::size_t d = dim();
  if (x.size() != d) throw DomainError("multivariate t: point has the wrong dimension");
  // Solve L y = x - mu.
  std::vector<double> y(d);
  double maha = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    double acc = x[r] - location_[r];
    for (std::size_t c = 0; c < r; ++c) acc -= chol_[r * d + c] * y[c];
    y[r] = acc / chol_[r * d + r];
    maha += y[r] * y[r];
  }
  const double dd = static_cast<double>(d);
  return std::lgamma((df_ + dd) / 2.0) - std::lgamma(df_ / 2.0) - 0.5 * dd * std::log(df_ * std::numbers::pi) -
         0.5 * log_det_ - 0.5 * (df_ + dd) * std::log1p(maha / df_);
}

bool independence_mh_step(std::vector<double>& current, const MultivariateT& proposal, const LogTarget& log_target,
                          Rng& rng) {
  std::vector<double> cand = proposal.sample(rng);
  const double lt_new = log_target(cand);
  if (!std::isfinite(lt_new)) return false;
  const double lt_old = log_target(current);
  const double log_ratio = (lt_new - proposal.log_density(cand)) - (lt_old - proposal.log_density(current));
  if (!std::isfinite(lt_old) || std::log(uniform01(rng)) < log_ratio) {
    current = std::move(cand);
    return true;
  }
  return false;
}

bool random_walk_mh_step(std::vector<double>& current, const MultivariateT& increment, const LogTarget& log_target,
                         Rng& rng) {
  std::vector<double> cand = increment.sample(rng);
  for (std::size_t i = 0; i < cand.size(); ++i) cand[i] += current[i];
  const double lt_new = log_target(cand);
  if (!std::isfinite(lt_new)) return false;
  const double lt_old = log_target(current);
  if (!std::isfinite(lt_old) || std::log(uniform01(rng)) < lt_new - lt_old) {
    current = std::move(cand);
    return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Base hyperparameters

double log_base_hyper_target(double log_a, double log_b, std::span<const double> values, const BaseHyperprior& prior) {
  const double a = std::exp(log_a), b = std::exp(log_b);
  if (!std::isfinite(a) || !std::isfinite(b) || a <= 0.0 || b <= 0.0) return -INFINITY;
  double out = -static_cast<double>(values.size()) * log_beta_fn(a, b);
  for (double phi : values) out += (a - 1.0) * std::log(phi) + (b - 1.0) * std::log1p(-phi);
  const double s2 = prior.log_sd * prior.log_sd;
  out -= ((log_a - prior.log_mean) * (log_a - prior.log_mean) + (log_b - prior.log_mean) * (log_b - prior.log_mean)) /
         (2.0 * s2);
  return out;
}

MultivariateT base_hyper_proposal(std::span<const double> values, const BaseHyperprior& prior) {
  using boost::math::digamma;
  using boost::math::trigamma;
  const double k = static_cast<double>(values.size());
  double s1 = 0.0, s2 = 0.0, mean = 0.0;
  for (double phi : values) {
    s1 += std::log(phi);
    s2 += std::log1p(-phi);
    mean += phi;
  }
  mean /= k;
  const double inv_var = 1.0 / (prior.log_sd * prior.log_sd);

  // Start from the method-of-moments fit of the cluster values when it exists.
  double u = prior.log_mean, v = prior.log_mean;
  if (values.size() >= 2) {
    double var = 0.0;
    for (double phi : values) var += (phi - mean) * (phi - mean);
    var /= k - 1.0;
    if (var > 0.0 && var < mean * (1.0 - mean)) {
      const double total = mean * (1.0 - mean) / var - 1.0;
      u = std::clamp(std::log(mean * total), -6.0, 6.0);
      v = std::clamp(std::log((1.0 - mean) * total), -6.0, 6.0);
    }
  }

  struct Local {
    double g[2];
    double h[3];  // uu, uv, vv
  };
  auto local = [&](double lu, double lv) {
    const double a = std::exp(lu), b = std::exp(lv);
    const double dab = digamma(a + b), tab = trigamma(a + b);
    const double ga = s1 - k * digamma(a) + k * dab;
    const double gb = s2 - k * digamma(b) + k * dab;
    Local l;
    l.g[0] = a * ga - (lu - prior.log_mean) * inv_var;
    l.g[1] = b * gb - (lv - prior.log_mean) * inv_var;
    l.h[0] = a * ga - a * a * k * (trigamma(a) - tab) - inv_var;
    l.h[1] = a * b * k * tab;
    l.h[2] = b * gb - b * b * k * (trigamma(b) - tab) - inv_var;
    return l;
  };
  auto negative_definite = [](const Local& l) { return l.h[0] < 0.0 && l.h[0] * l.h[2] - l.h[1] * l.h[1] > 0.0; };

  double f = log_base_hyper_target(u, v, values, prior);
  for (int it = 0; it < 100; ++it) {
    const Local l = local(u, v);
    if (std::hypot(l.g[0], l.g[1]) < 1e-9) break;
    double du, dv;
    if (negative_definite(l)) {
      const double det = l.h[0] * l.h[2] - l.h[1] * l.h[1];
      du = -(l.h[2] * l.g[0] - l.h[1] * l.g[1]) / det;
      dv = -(-l.h[1] * l.g[0] + l.h[0] * l.g[1]) / det;
    } else {
      du = 0.1 * l.g[0];
      dv = 0.1 * l.g[1];
    }
    const double len = std::hypot(du, dv);
    if (len > 2.0) {
      du *= 2.0 / len;
      dv *= 2.0 / len;
    }
    double step = 1.0;
    bool moved = false;
    for (int half = 0; half < 40; ++half, step *= 0.5) {
      const double fn = log_base_hyper_target(u + step * du, v + step * dv, values, prior);
      if (fn >= f) {
        u += step * du;
        v += step * dv;
        f = fn;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  const Local l = local(u, v);
  if (!negative_definite(l) || !std::isfinite(f)) {
    const double s = prior.log_sd * prior.log_sd;
    return MultivariateT({prior.log_mean, prior.log_mean}, {s, 0.0, 0.0, s}, kProposalDf);
  }
  const double det = l.h[0] * l.h[2] - l.h[1] * l.h[1];
  // scale = (-H)^{-1}
  return MultivariateT({u, v}, {-l.h[2] / det, l.h[1] / det, l.h[1] / det, -l.h[0] / det}, kProposalDf);
}

bool mh_update_base_hyperparams(dp::DpState& dp, const BaseHyperprior& prior, Rng& rng) {
  if (dp.k() == 0) throw DomainError("base hyperparameter update needs at least one cluster");
  const std::span<const double> values(dp.cluster_values);
  const MultivariateT proposal = base_hyper_proposal(values, prior);
  std::vector<double> x{std::log(dp.base_a), std::log(dp.base_b)};
  const bool accepted = independence_mh_step(
      x, proposal, [&](std::span<const double> p) { return log_base_hyper_target(p[0], p[1], values, prior); }, rng);
  if (accepted) {
    dp.base_a = std::exp(x[0]);
    dp.base_b = std::exp(x[1]);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Fixed effects

std::vector<double> to_unconstrained(const FixedEffects& f) {
  std::vector<double> theta(f.beta_yr);
  theta.push_back(logit(clamp_prob(f.gamma_d)));
  theta.push_back(logit(f.q));
  return theta;
}

FixedEffects from_unconstrained(std::span<const double> theta) {
  if (theta.size() < 2) throw DomainError("fixed-effect vector needs gamma_d and q");
  FixedEffects f;
  f.beta_yr.assign(theta.begin(), theta.end() - 2);
  f.gamma_d = logistic(theta[theta.size() - 2]);
  f.q = logistic(theta[theta.size() - 1]);
  return f;
}

double log_fixed_effect_target(std::span<const double> theta, const Dataset& data, const ChainState& state,
                               const FixedEffectPriors& priors) {
  const std::size_t n_seasons = data.n_seasons();
  if (theta.size() != n_seasons + 2) throw DomainError("fixed-effect vector has the wrong length");
  const std::span<const double> beta = theta.first(n_seasons);
  const double td = theta[n_seasons], tq = theta[n_seasons + 1];
  // log sigmoid forms keep gamma_d near 0 accurate.
  auto log_sig = [](double x) { return x < 0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x)); };
  const double log_d = log_sig(td), log_live = log_sig(-td);
  const double log_q = log_sig(tq), log_not_q = log_sig(-tq);
  const double log_surv = hmm::kOffSeasonWeeks * log_live;
  const double log_off_death = std::log(-std::expm1(log_surv));

  double out = 0.0;
  std::uint64_t live = 0, die = 0, here = 0, away = 0, off_dead = 0;
  for (std::size_t i = 0; i < state.stats.size(); ++i) {
    const auto& st = state.stats[i];
    out += dp::seasonal_log_likelihood(st.hh_by_season, beta, state.dp_hh.value_of(i));
    live += st.weekly_survival.successes;
    die += st.weekly_survival.failures();
    here += st.starts_here;
    away += st.starts_away;
    off_dead += st.starts_dead;
  }
  out += live * log_live;
  if (die) out += die * log_d;
  out += here * (log_q + log_surv) + away * (log_not_q + log_surv);
  if (off_dead) out += off_dead * log_off_death;

  for (double b : beta) out -= b * b / (2.0 * priors.beta_sd * priors.beta_sd);
  // Beta priors with the logit Jacobian p (1 - p).
  out += priors.gamma_d_a * log_d + priors.gamma_d_b * log_live;
  out += priors.q_a * log_q + priors.q_b * log_not_q;
  return out;
}

namespace {

std::vector<double> running_covariance(const FixedEffectProposal& p) {
  const std::size_t d = p.dim;
  std::vector<double> cov(d * d);
  for (std::size_t i = 0; i < d * d; ++i) cov[i] = p.comoment[i] / static_cast<double>(p.n_draws - 1);
  for (std::size_t i = 0; i < d; ++i) cov[i * d + i] += 1e-8;
  return cov;
}

void accumulate(FixedEffectProposal& p, std::span<const double> x) {
  const std::size_t d = p.dim;
  p.n_draws++;
  std::vector<double> delta(d);
  for (std::size_t i = 0; i < d; ++i) {
    delta[i] = x[i] - p.mean[i];
    p.mean[i] += delta[i] / static_cast<double>(p.n_draws);
  }
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) p.comoment[r * d + c] += delta[r] * (x[c] - p.mean[c]);
  }
}

constexpr double kInitialStepSd = 0.2;
constexpr double kTargetCoordinateAcceptance = 0.44;

// One random-walk MH step per coordinate. With a gain, the step sizes are
// nudged toward the target acceptance rate after each step.
std::size_t coordinate_sweep(std::vector<double>& theta, std::vector<double>& log_step, const LogTarget& target,
                             Rng& rng, std::optional<double> gain) {
  std::size_t accepted = 0;
  double current = target(theta);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    const double old = theta[j];
    theta[j] = old + std::exp(log_step[j]) * sample_normal(rng);
    const double proposed = target(theta);
    const bool ok = std::isfinite(proposed) && (!std::isfinite(current) || std::log(uniform01(rng)) < proposed - current);
    if (ok) {
      current = proposed;
      ++accepted;
    } else {
      theta[j] = old;
    }
    if (gain) log_step[j] += *gain * ((ok ? 1.0 : 0.0) - kTargetCoordinateAcceptance);
  }
  return accepted;
}

}  // namespace

bool mh_update_fixed_effects(ChainState& state, const Dataset& data, const McmcConfig& config,
                             const TraceSink& trace) {
  if (config.model != ModelKind::ThreeState || !state.fixed) {
    throw DomainError("fixed effects exist only in the three-state model");
  }
  validate(*state.fixed, data.n_seasons());
  auto& prop = state.fixed_proposal;
  std::vector<double> theta = to_unconstrained(*state.fixed);
  const LogTarget target = [&](std::span<const double> t) {
    return log_fixed_effect_target(t, data, state, config.fixed_priors);
  };

  const bool adapting = state.iteration < config.adaptation_end();
  if (prop.log_step.size() != prop.dim) prop.log_step.assign(prop.dim, std::log(kInitialStepSd));
  bool accepted;
  if (adapting) {
    const double gain = 1.0 / std::sqrt(static_cast<double>(prop.n_draws) + 1.0);
    accepted = coordinate_sweep(theta, prop.log_step, target, state.rng, gain) > 0;
    accumulate(prop, theta);
    prop.version++;
    emit(trace, state, "adapt", "version=" + std::to_string(prop.version));
    if (state.iteration + 1 == config.adaptation_end() && prop.n_draws > prop.dim + 1) {
      try {
        prop.frozen.emplace(prop.mean, running_covariance(prop), kProposalDf);
        prop.version++;
        emit(trace, state, "adapt", "frozen version=" + std::to_string(prop.version));
      } catch (const DomainError&) {
        prop.frozen.reset();
      }
    }
  } else {
    accepted = false;
    if (prop.frozen) {
      prop.attempts++;
      accepted = independence_mh_step(theta, *prop.frozen, target, state.rng);
      if (accepted) prop.accepts++;
    }
    // Without an adaptation window the sweep runs at the initial step sizes.
    const std::size_t moved = coordinate_sweep(theta, prop.log_step, target, state.rng, std::nullopt);
    prop.walk_attempts += prop.dim;
    prop.walk_accepts += moved;
    accepted = accepted || moved > 0;
  }
  if (accepted) *state.fixed = from_unconstrained(theta);
  return accepted;
}

// ---------------------------------------------------------------------------
// Chain

namespace {

void sample_paths(ChainState& s, const Dataset& data) {
  const std::size_t n = data.n_individuals();
  s.paths.resize(n);
  s.stats.resize(n);
  double loglik = 0.0;
  std::vector<hmm::TransitionMatrix> weekly;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& h = data.histories[i];
    hmm::HmmParams params;
    params.pi = s.dp_pi.value_of(i);
    if (data.model == ModelKind::TwoState) {
      weekly.assign(1, hmm::build_transition_2state({s.dp_hh.value_of(i), s.dp_aa.value_of(i), 0.0}));
    } else {
      const auto& f = *s.fixed;
      const double base = logit(s.dp_hh.value_of(i));
      weekly.resize(data.n_seasons());
      for (std::size_t y = 0; y < weekly.size(); ++y) {
        weekly[y] = hmm::build_transition_3state({logistic(f.beta_yr[y] + base), s.dp_aa.value_of(i), f.gamma_d});
      }
      params.boundary = hmm::YearBoundary{f.q, f.gamma_d};
    }
    params.weekly = weekly;
    const auto fwd = hmm::forward_pass(h, params);
    loglik += fwd.log_likelihood;
    s.paths[i] = hmm::backward_sample(fwd, h, params, s.rng);
    s.stats[i] = hmm::sufficient_stats(s.paths[i], h, data.n_seasons());
  }
  s.log_likelihood = loglik;
}

template <class Member>
std::vector<BinomialCount> gather(const std::vector<hmm::SufficientStats>& stats, Member member) {
  std::vector<BinomialCount> out;
  out.reserve(stats.size());
  for (const auto& st : stats) out.push_back(st.*member);
  return out;
}

void init_dp(dp::DpState& dp, std::size_t n, double value, const McmcConfig& c) {
  dp = dp::single_cluster(n, value);
  dp.alpha = c.initial_alpha;
  dp.base_a = c.initial_base_a;
  dp.base_b = c.initial_base_b;
  const auto g = dp::murugiah_hyperparams(n);
  dp.gamma_prior_a = g.a;
  dp.gamma_prior_b = g.b;
}

std::string with_context(const ChainState& s, const char* what) {
  return "chain " + std::to_string(s.chain) + ", iteration " + std::to_string(s.iteration + 1) + ": " + what;
}

}  // namespace

ChainState initial_state(const Dataset& data, const McmcConfig& config, std::size_t chain) {
  config.validate();
  if (data.n_individuals() == 0) throw DomainError("dataset has no individuals");
  if (data.model != config.model) throw DomainError("dataset and configuration disagree on the model");
  for (const auto& h : data.histories) hmm::validate(h, data.model);

  ChainState s;
  s.chain = chain;
  s.rng = make_stream(config.seed, chain);
  const std::size_t n = data.n_individuals();
  init_dp(s.dp_pi, n, config.initial_pi, config);
  init_dp(s.dp_hh, n, config.initial_gamma_hh, config);
  init_dp(s.dp_aa, n, config.initial_gamma_aa, config);
  if (config.model == ModelKind::ThreeState) {
    FixedEffects f = config.initial_fixed;
    if (f.beta_yr.empty()) f.beta_yr.assign(data.n_seasons(), 0.0);
    validate(f, data.n_seasons());
    if (f.gamma_d <= 0.0) f.gamma_d = 0.01;
    s.fixed = f;
    s.fixed_proposal.dim = data.n_seasons() + 2;
    s.fixed_proposal.mean.assign(s.fixed_proposal.dim, 0.0);
    s.fixed_proposal.comoment.assign(s.fixed_proposal.dim * s.fixed_proposal.dim, 0.0);
  }
  sample_paths(s, data);
  return s;
}

void mcmc_iteration(ChainState& s, const Dataset& data, const McmcConfig& config, const TraceSink& trace) {
  try {
    // 1. latent paths
    sample_paths(s, data);
    emit(trace, s, "ffbs", "loglik=" + fmt_num(s.log_likelihood));
    // 2. counts (filled by sample_paths from the fresh paths)
    emit(trace, s, "sufficient_stats");

    // 3. assignments and cluster values
    const auto obs = gather(s.stats, &hmm::SufficientStats::obs);
    dp::neal8_update(s.dp_pi, [&](std::size_t i, double phi) { return binomial_log_kernel(obs[i], phi); }, config.m,
                     s.rng);
    dp::update_cluster_params_conjugate(s.dp_pi, obs, s.rng);
    emit(trace, s, "dp_pi", "K=" + std::to_string(s.dp_pi.k()));

    if (config.model == ModelKind::TwoState) {
      const auto hh = gather(s.stats, &hmm::SufficientStats::hh);
      dp::neal8_update(s.dp_hh, [&](std::size_t i, double phi) { return binomial_log_kernel(hh[i], phi); }, config.m,
                       s.rng);
      dp::update_cluster_params_conjugate(s.dp_hh, hh, s.rng);
    } else {
      std::vector<std::vector<BinomialCount>> by_season;
      by_season.reserve(s.stats.size());
      for (const auto& st : s.stats) by_season.push_back(st.hh_by_season);
      const std::span<const double> beta(s.fixed->beta_yr);
      dp::neal8_update(
          s.dp_hh, [&](std::size_t i, double phi) { return dp::seasonal_log_likelihood(by_season[i], beta, phi); },
          config.m, s.rng);
      dp::update_cluster_params_mh(s.dp_hh, by_season, beta, s.rng);
    }
    emit(trace, s, "dp_hh", "K=" + std::to_string(s.dp_hh.k()));

    const auto aa = gather(s.stats, &hmm::SufficientStats::aa);
    dp::neal8_update(s.dp_aa, [&](std::size_t i, double phi) { return binomial_log_kernel(aa[i], phi); }, config.m,
                     s.rng);
    dp::update_cluster_params_conjugate(s.dp_aa, aa, s.rng);
    emit(trace, s, "dp_aa", "K=" + std::to_string(s.dp_aa.k()));

    // 4a. base hyperparameters
    if (config.update_base) {
      int accepted = 0;
      for (auto* dp : {&s.dp_pi, &s.dp_hh, &s.dp_aa}) accepted += mh_update_base_hyperparams(*dp, config.base_hyperprior, s.rng);
      emit(trace, s, "base_hyper", "accepted=" + std::to_string(accepted));
    }

    // 4b. concentration
    if (config.update_alpha) {
      const std::size_t n = data.n_individuals();
      for (auto* dp : {&s.dp_pi, &s.dp_hh, &s.dp_aa}) {
        const double eta = dp::sample_eta(dp->alpha, n, s.rng);
        dp->alpha = dp::update_alpha(dp->k(), n, eta, dp->gamma_prior_a, dp->gamma_prior_b, s.rng);
      }
      emit(trace, s, "alpha",
           "pi=" + fmt_num(s.dp_pi.alpha) + " hh=" + fmt_num(s.dp_hh.alpha) + " aa=" + fmt_num(s.dp_aa.alpha));
    }

    // 5. fixed effects
    if (config.model == ModelKind::ThreeState) {
      const bool accepted = mh_update_fixed_effects(s, data, config, trace);
      emit(trace, s, "fixed_effects", accepted ? "accepted" : "rejected");
    }
  } catch (const NumericalError& e) {
    throw NumericalError(with_context(s, e.what()));
  } catch (const DomainError& e) {
    throw DomainError(with_context(s, e.what()));
  }
  s.iteration++;
}

PosteriorSample record(const ChainState& s) {
  PosteriorSample out;
  out.iteration = s.iteration;
  out.chain = s.chain;
  const std::size_t n = s.dp_pi.n();
  out.pi.resize(n);
  out.gamma_hh.resize(n);
  out.gamma_aa.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.pi[i] = s.dp_pi.value_of(i);
    out.gamma_hh[i] = s.dp_hh.value_of(i);
    out.gamma_aa[i] = s.dp_aa.value_of(i);
  }
  auto summarize = [](const dp::DpState& dp) { return DpSummary{dp.alpha, dp.k(), dp.base_a, dp.base_b}; };
  out.dp_pi = summarize(s.dp_pi);
  out.dp_hh = summarize(s.dp_hh);
  out.dp_aa = summarize(s.dp_aa);
  out.fixed = s.fixed;
  out.log_likelihood = s.log_likelihood;
  return out;
}

ChainRun run_chain(const Dataset& data, const McmcConfig& config, std::size_t chain, const TraceSink& trace) {
  ChainState state = initial_state(data, config, chain);
  ChainRun run;
  run.chain = chain;
  run.seed = split_seed(config.seed, chain);
  run.config = signature(config);
  run.samples.reserve(retained_count(config.iterations, config.burn_in, config.thin));
  for (std::size_t j = 1; j <= config.iterations; ++j) {
    mcmc_iteration(state, data, config, trace);
    if (j > config.burn_in && (j - config.burn_in - 1) % config.thin == 0) run.samples.push_back(record(state));
    if (trace) trace({chain, j, "iteration", {}});
  }
  const auto& p = state.fixed_proposal;
  run.fixed_acceptance = p.attempts ? static_cast<double>(p.accepts) / p.attempts : 0.0;
  run.fixed_walk_acceptance = p.walk_attempts ? static_cast<double>(p.walk_accepts) / p.walk_attempts : 0.0;
  return run;
}

std::vector<ChainRun> run_chains(const Dataset& data, const McmcConfig& config, const TraceSink& trace) {
  config.validate();
  std::vector<ChainRun> runs(config.chains);
  std::vector<std::exception_ptr> errors(config.chains);
  std::mutex trace_mutex;
  TraceSink guarded;
  if (trace) {
    guarded = [&](const TraceEvent& e) {
      std::lock_guard lock(trace_mutex);
      trace(e);
    };
  }
  {
    std::vector<std::jthread> workers;
    for (std::size_t c = 0; c < config.chains; ++c) {
      workers.emplace_back([&, c] {
        try {
          runs[c] = run_chain(data, config, c, guarded);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

CombinedSamples combine_chains(std::span<const ChainRun> chains) {
  CombinedSamples out;
  if (chains.empty()) return out;
  std::size_t total = 0;
  for (const auto& c : chains) {
    if (!(c.config == chains.front().config)) {
      throw DomainError("cannot combine chains run with different configurations (chain " + std::to_string(c.chain) +
                        ")");
    }
    total += c.samples.size();
  }
  out.samples.reserve(total);
  for (const auto& c : chains) {
    out.provenance.push_back({c.chain, c.seed, out.samples.size(), c.samples.size()});
    out.samples.insert(out.samples.end(), c.samples.begin(), c.samples.end());
  }
  return out;
}

}  // namespace dphmm::mcmc
