#pragma once

// Dirichlet-process prior machinery: CRP simulation, the auxiliary-component
// Gibbs sampler for cluster assignments (Neal 2000, algorithm 8), cluster value
// refreshes and the Escobar-West update of the concentration parameter.
//
// The base distribution is always Beta(base_a, base_b) on the probability
// scale. Likelihood factors are passed in as callables so the same sampler
// serves the conjugate Binomial parameters and the year-effect model.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dphmm/binomial.hpp"
#include "dphmm/random.hpp"

namespace dphmm::dp {

struct DpState {
  std::vector<std::size_t> assignments;  // individual -> cluster label
  std::vector<double> cluster_values;    // label -> phi; every label 0..K-1 is occupied
  double alpha = 1.0;
  double base_a = 1.0;
  double base_b = 1.0;
  double gamma_prior_a = 1.0;
  double gamma_prior_b = 1.0;

  std::size_t n() const { return assignments.size(); }
  std::size_t k() const { return cluster_values.size(); }
  double value_of(std::size_t individual) const { return cluster_values[assignments[individual]]; }
  std::vector<std::size_t> cluster_sizes() const;
};

// Every individual placed in one cluster holding `value`.
DpState single_cluster(std::size_t n, double value);

// Throws DomainError unless assignments and cluster values are in bijection
// with the non-empty clusters and all scalars are in range.
void validate(const DpState& state);

struct CrpDraw {
  std::vector<std::size_t> assignments;  // canonical arrival order: label k first appears after 0..k-1
  std::vector<double> values;

  std::size_t k() const { return values.size(); }
};

using BaseSampler = std::function<double(Rng&)>;

CrpDraw crp_draw(std::size_t n, double alpha, const BaseSampler& base, Rng& rng);

// log F(y_i, phi) for individual i.
using LogLikelihood = std::function<double(std::size_t individual, double phi)>;

// One sweep of algorithm 8 over all individuals with m auxiliary components.
void neal8_update(DpState& state, const LogLikelihood& log_f, std::size_t m, Rng& rng);

// Draws every phi_c from Beta(base_a + successes, base_b + failures) pooled
// over the cluster's members.
void update_cluster_params_conjugate(DpState& state, std::span<const BinomialCount> stats, Rng& rng);

// log F for the year-effect model: per-season Binomial with success
// probability logistic(beta[s] + logit(phi)).
double seasonal_log_likelihood(std::span<const BinomialCount> by_season,
                               std::span<const double> beta, double phi);

// Random-walk Metropolis on logit(phi_c) targeting
// Beta(phi; a, b) * prod_members seasonal_log_likelihood. `steps` updates per
// cluster. Returns the acceptance rate.
double update_cluster_params_mh(DpState& state,
                                std::span<const std::vector<BinomialCount>> stats_by_season,
                                std::span<const double> beta, Rng& rng, int steps = 5);

// Escobar-West auxiliary variable, eta ~ Beta(alpha + 1, n).
double sample_eta(double alpha, std::size_t n, Rng& rng);

// Mixing weight of the Gamma(a + k, b - log eta) component.
double escobar_west_weight(std::size_t k, std::size_t n, double eta, double prior_a, double prior_b);

double update_alpha(std::size_t k, std::size_t n, double eta, double prior_a, double prior_b, Rng& rng);

struct GammaHyperparams {
  double a;
  double b;
};

// a = b = exp(-0.033 n): Gamma prior on alpha with mean one.
GammaHyperparams murugiah_hyperparams(std::size_t n);

// log of the DP joint density of a clustering: Ewens partition probability,
// base density of each cluster value, and the likelihood of every individual.
// Depends on the partition and values only, never on how clusters are labeled.
double log_joint_density(const DpState& state, const LogLikelihood& log_f);

}  // namespace dphmm::dp
