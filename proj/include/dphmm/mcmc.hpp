#pragma once

// MCMC engine. One iteration runs, in order:
//   1. forward filtering / backward sampling of every individual's path
//   2. sufficient statistics per individual
//   3. algorithm-8 assignment sweep and cluster refresh for pi, gamma_hh, gamma_aa
//   4a. independence MH on each DP's base hyperparameters (a, b)
//   4b. Escobar-West update of each DP's alpha
//   5. independence MH on the fixed effects (three-state model only)

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dphmm/dp.hpp"
#include "dphmm/hmm.hpp"
#include "dphmm/random.hpp"

namespace dphmm::mcmc {

struct FixedEffects {
  std::vector<double> beta_yr;  // logit-scale offset on gamma_hh, one per season
  double gamma_d = 0.01;
  double q = 0.5;

  friend bool operator==(const FixedEffects&, const FixedEffects&) = default;
};

void validate(const FixedEffects& fixed, std::size_t n_seasons);

struct FixedEffectPriors {
  double beta_sd = 1.0;  // beta_yr ~ Normal(0, beta_sd^2)
  double gamma_d_a = 1.0, gamma_d_b = 1.0;
  double q_a = 1.0, q_b = 1.0;
};

// log a and log b of every base distribution ~ Normal(log_mean, log_sd^2).
struct BaseHyperprior {
  double log_mean = 0.0;
  double log_sd = 1.5;
};

struct McmcConfig {
  std::size_t iterations = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::size_t chains = 1;
  std::size_t m = 3;
  std::uint64_t seed = 1;
  ModelKind model = ModelKind::TwoState;
  FixedEffectPriors fixed_priors;
  BaseHyperprior base_hyperprior;
  std::size_t adaptation_window = 0;  // 0 = the whole burn-in

  // Starting values; every DP starts as one cluster.
  double initial_pi = 0.7;
  double initial_gamma_hh = 0.7;
  double initial_gamma_aa = 0.7;
  double initial_alpha = 1.0;
  FixedEffects initial_fixed;

  // Test hooks: hold alpha / (a, b) at their initial values.
  bool update_alpha = true;
  bool update_base = true;
  double initial_base_a = 1.0;
  double initial_base_b = 1.0;

  void validate() const;
  std::size_t adaptation_end() const;
};

// Identity of a chain's output for combine_chains: everything that changes the
// meaning or count of the retained samples.
struct ConfigSignature {
  std::size_t iterations, burn_in, thin, m;
  ModelKind model;
  friend bool operator==(const ConfigSignature&, const ConfigSignature&) = default;
};
ConfigSignature signature(const McmcConfig& config);

// ceil((iterations - burn_in) / thin)
std::size_t retained_count(std::size_t iterations, std::size_t burn_in, std::size_t thin);

// Multivariate Student-t with location mu, scale matrix Sigma, df nu.
class MultivariateT {
 public:
  MultivariateT(std::vector<double> location, std::vector<double> scale_row_major, double df);

  std::size_t dim() const { return location_.size(); }
  const std::vector<double>& location() const { return location_; }
  const std::vector<double>& scale() const { return scale_; }
  double df() const { return df_; }

  std::vector<double> sample(Rng& rng) const;
  double log_density(std::span<const double> x) const;

 private:
  std::vector<double> location_;
  std::vector<double> scale_;
  std::vector<double> chol_;  // lower Cholesky factor, row major
  double log_det_ = 0.0;
  double df_;
};

using LogTarget = std::function<double(std::span<const double>)>;

// Independence MH: propose y ~ q, accept with
// min(1, pi(y) q(x) / (pi(x) q(y))). Non-finite target at y is a rejection.
bool independence_mh_step(std::vector<double>& current, const MultivariateT& proposal,
                          const LogTarget& log_target, Rng& rng);

// Random-walk MH with a zero-centred increment distribution.
bool random_walk_mh_step(std::vector<double>& current, const MultivariateT& increment,
                         const LogTarget& log_target, Rng& rng);

// Conditional target of (log a, log b) given the active cluster values.
double log_base_hyper_target(double log_a, double log_b, std::span<const double> values,
                             const BaseHyperprior& prior);

// Bivariate t (df 4) proposal on (log a, log b) centred at the mode of the
// conditional target with scale from its curvature. Depends only on the
// cluster values, so the resulting step is a valid independence sampler.
MultivariateT base_hyper_proposal(std::span<const double> values, const BaseHyperprior& prior);

bool mh_update_base_hyperparams(dp::DpState& dp, const BaseHyperprior& prior, Rng& rng);

// Proposal state for the fixed-effect update. While adapting, each update is a
// sweep of single-coordinate random-walk steps whose scales follow a
// Robbins-Monro rule, and the visited points feed running moment estimates.
// Once frozen, each update is an independence step from a t proposal (df 4)
// built from those moments, followed by a coordinate sweep at the learned
// scales. The sweep keeps the chain moving when the conditional target is much
// narrower than the marginal moments behind the independence proposal.
struct FixedEffectProposal {
  std::size_t dim = 0;
  std::size_t n_draws = 0;
  std::vector<double> mean;
  std::vector<double> comoment;   // row-major sum of outer products of deviations
  std::vector<double> log_step;   // per-coordinate random-walk sd, log scale
  std::optional<MultivariateT> frozen;
  std::size_t attempts = 0;  // independence steps after freezing
  std::size_t accepts = 0;
  std::size_t walk_attempts = 0;  // single-coordinate steps after freezing
  std::size_t walk_accepts = 0;
  std::size_t version = 0;  // bumped whenever proposal parameters change
};

struct ChainState {
  dp::DpState dp_pi, dp_hh, dp_aa;
  std::optional<FixedEffects> fixed;  // three-state only
  std::vector<hmm::StatePath> paths;
  std::vector<hmm::SufficientStats> stats;
  std::size_t iteration = 0;
  double log_likelihood = 0.0;
  Rng rng;
  FixedEffectProposal fixed_proposal;
  std::size_t chain = 0;
};

struct TraceEvent {
  std::size_t chain;
  std::size_t iteration;
  std::string_view step;
  std::string detail;
};

using TraceSink = std::function<void(const TraceEvent&)>;

// Logistic-scale parameter vector (beta..., logit gamma_d, logit q).
std::vector<double> to_unconstrained(const FixedEffects& fixed);
FixedEffects from_unconstrained(std::span<const double> theta);

// log p(fixed effects | paths, gamma_hh cluster values) up to a constant, on
// the unconstrained scale (Jacobian included).
double log_fixed_effect_target(std::span<const double> theta, const Dataset& data,
                               const ChainState& state, const FixedEffectPriors& priors);

ChainState initial_state(const Dataset& data, const McmcConfig& config, std::size_t chain);

void mcmc_iteration(ChainState& state, const Dataset& data, const McmcConfig& config,
                    const TraceSink& trace = {});

bool mh_update_fixed_effects(ChainState& state, const Dataset& data, const McmcConfig& config,
                             const TraceSink& trace = {});

struct DpSummary {
  double alpha = 0.0;
  std::size_t k = 0;
  double base_a = 0.0;
  double base_b = 0.0;
  friend bool operator==(const DpSummary&, const DpSummary&) = default;
};

struct PosteriorSample {
  std::size_t iteration = 0;
  std::size_t chain = 0;
  std::vector<double> pi, gamma_hh, gamma_aa;  // per individual
  DpSummary dp_pi, dp_hh, dp_aa;
  std::optional<FixedEffects> fixed;
  double log_likelihood = 0.0;

  friend bool operator==(const PosteriorSample&, const PosteriorSample&) = default;
};

PosteriorSample record(const ChainState& state);

struct ChainRun {
  std::size_t chain = 0;
  std::uint64_t seed = 0;
  ConfigSignature config;
  std::vector<PosteriorSample> samples;
  double fixed_acceptance = 0.0;       // independence steps
  double fixed_walk_acceptance = 0.0;  // coordinate random-walk steps after freezing
};

// Runs chain `chain` of `config`; its RNG stream is split_seed(config.seed, chain).
ChainRun run_chain(const Dataset& data, const McmcConfig& config, std::size_t chain,
                   const TraceSink& trace = {});

// Runs config.chains chains on separate threads.
std::vector<ChainRun> run_chains(const Dataset& data, const McmcConfig& config,
                                 const TraceSink& trace = {});

struct ChainProvenance {
  std::size_t chain;
  std::uint64_t seed;
  std::size_t first;  // index into the combined sequence
  std::size_t count;
};

struct CombinedSamples {
  std::vector<PosteriorSample> samples;
  std::vector<ChainProvenance> provenance;
};

CombinedSamples combine_chains(std::span<const ChainRun> chains);

}  // namespace dphmm::mcmc
