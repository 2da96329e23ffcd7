#include "dphmm/synth.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "dphmm/error.hpp"

namespace dphmm::synth {

namespace {

void validate_spec(const ParameterSpec& spec, const char* name) {
  const bool has_groups = !spec.groups.empty();
  if (has_groups == spec.continuous.has_value()) {
    throw DomainError(std::string(name) + ": give either a list of group values or a continuous spec");
  }
  for (double g : spec.groups) {
    if (!(g >= 0.0 && g <= 1.0)) throw DomainError(std::string(name) + ": group values must lie in [0,1]");
  }
  if (spec.continuous && !(spec.continuous->spread >= 0.0 && std::isfinite(spec.continuous->mean))) {
    throw DomainError(std::string(name) + ": logit-Normal spread must be non-negative");
  }
}

struct Draw {
  double value;
  std::string label;
};

Draw draw_parameter(const ParameterSpec& spec, Rng& rng) {
  if (spec.continuous) {
    const auto& c = *spec.continuous;
    return {logistic(c.mean + c.sd() * sample_normal(rng)), {}};
  }
  const auto g = std::min(static_cast<std::size_t>(uniform01(rng) * spec.groups.size()), spec.groups.size() - 1);
  return {spec.groups[g], std::to_string(g)};
}

hmm::State draw_next(const hmm::TransitionMatrix& m, hmm::State from, Rng& rng) {
  const auto& row = m.p[static_cast<int>(from)];
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int s = 0; s < m.n_states - 1; ++s) {
    acc += row[s];
    if (u < acc) return static_cast<hmm::State>(s);
  }
  return static_cast<hmm::State>(m.n_states - 1);
}

std::string individual_id(std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "ind%0*zu", width, i + 1);
  return buf;
}

}  // namespace

double LogitNormal::sd() const { return spread_is_variance ? std::sqrt(spread) : spread; }

void SimDesign::validate() const {
  if (n_individuals == 0) throw DomainError("design needs at least one individual");
  validate_spec(pi, "pi");
  validate_spec(gamma_hh, "gamma_hh");
  validate_spec(gamma_aa, "gamma_aa");
  if (model == ModelKind::TwoState) {
    if (history_length < 2) throw DomainError("history_length must be at least 2");
    return;
  }
  if (n_seasons == 0) throw DomainError("three-state designs need n_seasons >= 1");
  if (!fixed.beta_yr.empty() && fixed.beta_yr.size() != n_seasons) {
    throw DomainError("design needs one beta_yr per season");
  }
  if (!(fixed.gamma_d >= 0.0 && fixed.gamma_d < 1.0)) throw DomainError("gamma_d must lie in [0,1)");
  if (!(fixed.q > 0.0 && fixed.q < 1.0)) throw DomainError("q must lie in (0,1)");
}

Simulation simulate(const SimDesign& design, Rng& rng) {
  design.validate();
  const bool three = design.model == ModelKind::ThreeState;
  const std::size_t n = design.n_individuals;
  const std::size_t length = three ? design.n_seasons * hmm::kSeasonWeeks : design.history_length;
  std::vector<double> beta = design.fixed.beta_yr;
  if (three && beta.empty()) beta.assign(design.n_seasons, 0.0);

  Simulation out;
  out.data.model = design.model;
  if (three) {
    for (std::size_t y = 0; y < design.n_seasons; ++y) out.data.season_labels.push_back(static_cast<std::int32_t>(y + 1));
  }

  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = individual_id(i, n);
    const Draw pi = draw_parameter(design.pi, rng);
    const Draw hh = draw_parameter(design.gamma_hh, rng);
    const Draw aa = draw_parameter(design.gamma_aa, rng);
    out.truth.push_back({id, "pi", pi.value, pi.label});
    out.truth.push_back({id, "gamma_hh", hh.value, hh.label});
    out.truth.push_back({id, "gamma_aa", aa.value, aa.label});

    std::vector<hmm::TransitionMatrix> weekly;
    hmm::TransitionMatrix boundary;
    if (three) {
      for (double b : beta) {
        weekly.push_back(hmm::build_transition_3state({logistic(b + logit(hh.value)), aa.value, design.fixed.gamma_d}));
      }
      boundary = hmm::year_boundary_matrix({design.fixed.q, design.fixed.gamma_d});
    } else {
      weekly.push_back(hmm::build_transition_2state({hh.value, aa.value, 0.0}));
    }

    hmm::CaptureHistory h;
    h.id = id;
    h.observations.resize(length);
    h.season.resize(length);
    h.occasion.resize(length);
    hmm::StatePath path;
    path.states.resize(length);
    for (std::size_t t = 0; t < length; ++t) {
      h.season[t] = three ? static_cast<std::uint32_t>(t / hmm::kSeasonWeeks) : 0u;
      h.occasion[t] = three ? static_cast<std::int32_t>(hmm::kFirstWeek + t % hmm::kSeasonWeeks)
                            : static_cast<std::int32_t>(t + 1);
      if (t == 0) {
        path.states[0] = hmm::State::Here;
        h.observations[0] = 1;
        continue;
      }
      const auto& m = h.season_starts_at(t) ? boundary : weekly[h.season[t - 1]];
      path.states[t] = draw_next(m, path.states[t - 1], rng);
      h.observations[t] = uniform01(rng) < hmm::emission_prob(path.states[t], 1, pi.value) ? 1 : 0;
    }
    out.data.histories.push_back(std::move(h));
    out.paths.push_back(std::move(path));
  }
  return out;
}

Simulation simulate_unimodal(const SimDesign& design, Rng& rng) {
  for (const auto* spec : {&design.pi, &design.gamma_hh, &design.gamma_aa}) {
    if (!spec->continuous) throw DomainError("unimodal simulation needs a continuous spec for every parameter");
  }
  return simulate(design, rng);
}

Simulation simulate_replicate(const SimDesign& design, std::size_t replicate) {
  Rng rng = make_stream(design.seed, 1000 + replicate);
  return simulate(design, rng);
}

SimDesign two_group_design() {
  SimDesign d;
  d.n_individuals = 30;
  d.history_length = 1000;
  d.pi.groups = {0.82, 0.96};
  d.gamma_hh.groups = {0.88, 0.98};
  d.gamma_aa.groups = {0.8, 0.95};
  return d;
}

SimDesign three_group_design() {
  SimDesign d;
  d.n_individuals = 30;
  d.history_length = 1000;
  d.pi.groups = {0.6, 0.85, 0.96};
  d.gamma_hh.groups = {0.5, 0.8, 0.95};
  d.gamma_aa.groups = {0.89, 0.97};
  return d;
}

SimDesign unimodal_design() {
  SimDesign d;
  d.n_individuals = 30;
  d.history_length = 1000;
  d.pi.continuous = LogitNormal{};
  d.gamma_hh.continuous = LogitNormal{};
  d.gamma_aa.continuous = LogitNormal{};
  return d;
}

}  // namespace dphmm::synth
