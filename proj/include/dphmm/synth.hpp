#pragma once

// Synthetic capture histories with known ground truth.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dphmm/hmm.hpp"
#include "dphmm/mcmc.hpp"
#include "dphmm/random.hpp"

namespace dphmm::synth {

// Individual values logistic(Normal(mean, spread)). `spread` is a variance
// unless spread_is_variance is false, in which case it is a standard deviation.
struct LogitNormal {
  double mean = 2.0;
  double spread = 0.1;
  bool spread_is_variance = true;

  double sd() const;
};

// Either discrete groups (each individual picks one uniformly at random) or a
// continuous logit-Normal.
struct ParameterSpec {
  std::vector<double> groups;
  std::optional<LogitNormal> continuous;
};

struct SimDesign {
  ModelKind model = ModelKind::TwoState;
  std::size_t n_individuals = 30;
  std::size_t history_length = 1000;  // two-state occasions
  std::size_t n_seasons = 0;          // three-state seasons of 26 weeks
  ParameterSpec pi, gamma_hh, gamma_aa;
  mcmc::FixedEffects fixed;           // three-state only
  std::uint64_t seed = 1;

  void validate() const;
};

struct TruthRecord {
  std::string individual_id;
  std::string parameter;  // pi | gamma_hh | gamma_aa
  double true_value = 0.0;
  std::string group_label;  // index into the design's group list; empty for continuous specs

  friend bool operator==(const TruthRecord&, const TruthRecord&) = default;
};

struct Simulation {
  Dataset data;
  std::vector<TruthRecord> truth;
  std::vector<hmm::StatePath> paths;
};

Simulation simulate(const SimDesign& design, Rng& rng);

// Same as simulate, but every parameter must carry a continuous spec.
Simulation simulate_unimodal(const SimDesign& design, Rng& rng);

// Replicate r of a design draws from make_stream(design.seed, 1000 + r).
Simulation simulate_replicate(const SimDesign& design, std::size_t replicate);

// Stock designs from the simulation study.
SimDesign two_group_design();    // pi {0.82,0.96}, gamma_hh {0.88,0.98}, gamma_aa {0.8,0.95}
SimDesign three_group_design();  // pi {0.6,0.85,0.96}, gamma_hh {0.5,0.8,0.95}, gamma_aa {0.89,0.97}
SimDesign unimodal_design();     // logit-Normal(2, variance 0.1) for all three

}  // namespace dphmm::synth
