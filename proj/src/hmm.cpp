#include "dphmm/hmm.hpp"

#include <cmath>
#include <string>

#include "dphmm/error.hpp"

namespace dphmm {

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::TwoState ? "two-state" : "three-state";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "two-state" || text == "two_state" || text == "2") return ModelKind::TwoState;
  if (text == "three-state" || text == "three_state" || text == "3") return ModelKind::ThreeState;
  throw DomainError("unknown model '" + std::string(text) + "' (expected two-state or three-state)");
}

namespace hmm {

namespace {

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError(std::string(name) + " must lie in [0,1], got " + std::to_string(p));
  }
}

int index(State s) { return static_cast<int>(s); }

// Transition used to move from occasion t-1 to occasion t.
const TransitionMatrix& step_matrix(const CaptureHistory& history, const HmmParams& params,
                                    const TransitionMatrix& boundary, std::size_t t) {
  if (history.season_starts_at(t)) return boundary;
  return params.weekly_for(history.season[t - 1]);
}

TransitionMatrix boundary_for(const HmmParams& params, const CaptureHistory& history) {
  if (params.boundary) return year_boundary_matrix(*params.boundary);
  for (std::size_t t = 1; t < history.size(); ++t) {
    if (history.season_starts_at(t)) {
      throw DomainError("history '" + history.id + "' crosses a season boundary but no q/gamma_d were given");
    }
  }
  return {};
}

}  // namespace

void validate(const CaptureHistory& h, ModelKind model) {
  const std::string who = "history '" + h.id + "'";
  if (h.observations.empty()) throw DomainError(who + " is empty");
  if (h.season.size() != h.size() || h.occasion.size() != h.size()) {
    throw DomainError(who + ": observation, season and occasion lengths differ");
  }
  for (auto x : h.observations) {
    if (x > 1) throw DomainError(who + ": observations must be 0 or 1");
  }
  if (h.observations.front() != 1) throw DomainError(who + " does not start at a sighting");
  for (std::size_t t = 0; t < h.size(); ++t) {
    if (model == ModelKind::TwoState) {
      if (h.season[t] != 0) throw DomainError(who + ": two-state histories have a single season");
      continue;
    }
    if (h.occasion[t] < kFirstWeek || h.occasion[t] > kLastWeek) {
      throw DomainError(who + ": week " + std::to_string(h.occasion[t]) + " outside [18,43]");
    }
    if (t == 0) continue;
    if (h.season[t] == h.season[t - 1]) {
      if (h.occasion[t] != h.occasion[t - 1] + 1) throw DomainError(who + ": weeks within a season must be consecutive");
    } else if (h.season[t] != h.season[t - 1] + 1 || h.occasion[t - 1] != kLastWeek ||
               h.occasion[t] != kFirstWeek) {
      throw DomainError(who + ": seasons must follow each other, each ending at week 43 and the next starting at week 18");
    }
  }
}

CaptureHistory make_history(std::string id, std::vector<std::uint8_t> observations) {
  CaptureHistory h;
  h.id = std::move(id);
  h.season.assign(observations.size(), 0);
  h.occasion.resize(observations.size());
  for (std::size_t t = 0; t < observations.size(); ++t) h.occasion[t] = static_cast<std::int32_t>(t + 1);
  h.observations = std::move(observations);
  return h;
}

TransitionMatrix build_transition_2state(const TransitionParams& params) {
  require_probability(params.gamma_hh, "gamma_hh");
  require_probability(params.gamma_aa, "gamma_aa");
  if (params.gamma_d != 0.0) throw DomainError("the two-state model has no death probability");
  TransitionMatrix m;
  m.n_states = 2;
  m.p[0] = {params.gamma_hh, 1.0 - params.gamma_hh, 0.0};
  m.p[1] = {1.0 - params.gamma_aa, params.gamma_aa, 0.0};
  return m;
}

TransitionMatrix build_transition_3state(const TransitionParams& params) {
  require_probability(params.gamma_hh, "gamma_hh");
  require_probability(params.gamma_aa, "gamma_aa");
  if (!(params.gamma_d >= 0.0 && params.gamma_d < 1.0)) {
    throw DomainError("gamma_d must lie in [0,1), got " + std::to_string(params.gamma_d));
  }
  const double live = 1.0 - params.gamma_d;
  TransitionMatrix m;
  m.n_states = 3;
  m.p[0] = {params.gamma_hh * live, (1.0 - params.gamma_hh) * live, params.gamma_d};
  m.p[1] = {(1.0 - params.gamma_aa) * live, params.gamma_aa * live, params.gamma_d};
  m.p[2] = {0.0, 0.0, 1.0};
  return m;
}

double emission_prob(State state, int observed, double pi) {
  if (state == State::Here) return observed ? pi : 1.0 - pi;
  return observed ? 0.0 : 1.0;
}

double off_season_survival(double gamma_d) { return std::pow(1.0 - gamma_d, kOffSeasonWeeks); }

TransitionMatrix year_boundary_matrix(const YearBoundary& b) {
  if (!(b.q > 0.0 && b.q < 1.0)) throw DomainError("q must lie in (0,1), got " + std::to_string(b.q));
  if (!(b.gamma_d >= 0.0 && b.gamma_d < 1.0)) {
    throw DomainError("gamma_d must lie in [0,1), got " + std::to_string(b.gamma_d));
  }
  const double surv = off_season_survival(b.gamma_d);
  TransitionMatrix m;
  m.n_states = 3;
  m.p[0] = {b.q * surv, (1.0 - b.q) * surv, 1.0 - surv};
  m.p[1] = m.p[0];
  m.p[2] = {0.0, 0.0, 1.0};
  return m;
}

StateVector year_boundary_distribution(const StateVector& prev, double q, double gamma_d) {
  double total = 0.0;
  for (double p : prev) {
    if (!(p >= 0.0)) throw DomainError("state probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("state distribution does not sum to 1");
  const TransitionMatrix m = year_boundary_matrix({q, gamma_d});
  StateVector out{};
  for (int from = 0; from < kMaxStates; ++from) {
    for (int to = 0; to < kMaxStates; ++to) out[to] += prev[from] * m.p[from][to];
  }
  return out;
}

ForwardResult forward_pass(const CaptureHistory& history, const HmmParams& params) {
  if (history.observations.empty()) throw DomainError("forward pass on an empty history");
  if (params.weekly.empty()) throw DomainError("forward pass needs at least one transition matrix");
  if (history.observations.front() != 1) {
    throw DomainError("history '" + history.id + "' does not start at a sighting");
  }
  const TransitionMatrix boundary = boundary_for(params, history);
  const int n = params.n_states();
  const std::size_t T = history.size();

  ForwardResult out;
  out.n_states = n;
  out.alpha.resize(T);
  out.log_normalizer.resize(T);

  out.alpha[0] = {1.0, 0.0, 0.0};
  out.log_normalizer[0] = std::log(emission_prob(State::Here, 1, params.pi));
  double loglik = out.log_normalizer[0];

  for (std::size_t t = 1; t < T; ++t) {
    const TransitionMatrix& m = step_matrix(history, params, boundary, t);
    const StateVector& prev = out.alpha[t - 1];
    const int x = history.observations[t];
    StateVector& cur = out.alpha[t];
    double norm = 0.0;
    for (int s = 0; s < n; ++s) {
      double pred = 0.0;
      for (int r = 0; r < n; ++r) pred += prev[r] * m.p[r][s];
      cur[s] = pred * emission_prob(static_cast<State>(s), x, params.pi);
      norm += cur[s];
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw NumericalError("all-zero forward vector for history '" + history.id + "' at occasion " +
                           std::to_string(t) + " (observation " + std::to_string(x) +
                           "): data impossible under the current parameters");
    }
    for (int s = 0; s < n; ++s) cur[s] /= norm;
    for (int s = n; s < kMaxStates; ++s) cur[s] = 0.0;
    out.log_normalizer[t] = std::log(norm);
    loglik += out.log_normalizer[t];
  }
  out.log_likelihood = loglik;
  return out;
}

namespace {

State draw_state(const double* weights, int n, Rng& rng) {
  double total = 0.0;
  for (int s = 0; s < n; ++s) total += weights[s];
  if (!(total > 0.0)) throw NumericalError("backward sampling met a zero-probability state");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (int s = 0; s < n - 1; ++s) {
    acc += weights[s];
    if (u < acc) return static_cast<State>(s);
  }
  // Guard against landing on a zero-weight trailing state through rounding.
  for (int s = n - 1; s >= 0; --s) {
    if (weights[s] > 0.0) return static_cast<State>(s);
  }
  return State::Here;
}

}  // namespace

StatePath backward_sample(const ForwardResult& forward, const CaptureHistory& history,
                          const HmmParams& params, Rng& rng) {
  const std::size_t T = history.size();
  if (forward.alpha.size() != T || T == 0) {
    throw DomainError("backward sampling: forward vectors do not match the history length");
  }
  if (forward.n_states != params.n_states()) {
    throw DomainError("backward sampling: state count differs from the forward pass");
  }
  const TransitionMatrix boundary = boundary_for(params, history);
  const int n = forward.n_states;

  StatePath path;
  path.states.resize(T);
  path.states[T - 1] = draw_state(forward.alpha[T - 1].data(), n, rng);
  double w[kMaxStates];
  for (std::size_t t = T - 1; t-- > 0;) {
    const TransitionMatrix& m = step_matrix(history, params, boundary, t + 1);
    const int next = index(path.states[t + 1]);
    for (int s = 0; s < n; ++s) w[s] = forward.alpha[t][s] * m.p[s][next];
    path.states[t] = draw_state(w, n, rng);
  }
  return path;
}

SufficientStats sufficient_stats(const StatePath& path, const CaptureHistory& history,
                                 std::size_t n_seasons) {
  const std::size_t T = history.size();
  if (path.states.size() != T) throw DomainError("state path and history lengths differ");
  if (T == 0) return {};
  if (path.states[0] != State::Here) throw DomainError("state path must start Here at the first sighting");

  SufficientStats out;
  out.hh_by_season.resize(n_seasons);
  for (std::size_t t = 0; t < T; ++t) {
    const State s = path.states[t];
    const int x = history.observations[t];
    if (x == 1 && s != State::Here) {
      throw DomainError("history '" + history.id + "' is seen at occasion " + std::to_string(t) +
                        " but the path is not Here");
    }
    if (s == State::Here) {
      out.obs.trials++;
      out.obs.successes += x;
    }
    if (t + 1 == T) break;
    const State next = path.states[t + 1];
    if (s == State::Dead) {
      if (next != State::Dead) throw DomainError("state path leaves the Dead state");
      continue;
    }
    if (history.season_starts_at(t + 1)) {
      if (next == State::Here) out.starts_here++;
      else if (next == State::Away) out.starts_away++;
      else out.starts_dead++;
      continue;
    }
    out.weekly_survival.trials++;
    if (next == State::Dead) continue;
    out.weekly_survival.successes++;
    const std::uint32_t stay = next == s ? 1u : 0u;
    if (s == State::Here) {
      out.hh.trials++;
      out.hh.successes += stay;
      if (n_seasons > 0) {
        const auto season = history.season[t];
        if (season >= n_seasons) throw DomainError("season index out of range in history '" + history.id + "'");
        out.hh_by_season[season].trials++;
        out.hh_by_season[season].successes += stay;
      }
    } else {
      out.aa.trials++;
      out.aa.successes += stay;
    }
  }
  return out;
}

}  // namespace hmm
}  // namespace dphmm
