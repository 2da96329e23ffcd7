#pragma once

// Hidden Markov model for capture histories.
//
// Two models share this code. The two-state model has states Here/Away and a
// single transition matrix for the whole history. The three-state model adds an
// absorbing Dead state, splits the history into in-season blocks (weeks 18..43)
// and crosses each off-season gap with a start-of-season distribution governed
// by q and the 26-week survival (1 - gamma_d)^26.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dphmm/binomial.hpp"
#include "dphmm/random.hpp"

namespace dphmm {

enum class ModelKind { TwoState, ThreeState };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // "two-state" | "three-state"

namespace hmm {

enum class State : std::uint8_t { Here = 0, Away = 1, Dead = 2 };

inline constexpr int kMaxStates = 3;
inline constexpr int kFirstWeek = 18;
inline constexpr int kLastWeek = 43;
inline constexpr int kSeasonWeeks = kLastWeek - kFirstWeek + 1;  // 26
inline constexpr int kOffSeasonWeeks = 26;

using StateVector = std::array<double, kMaxStates>;

// One individual's sighting series, starting at its first sighting.
//
// `season` holds the dataset-wide season index of every occasion (all zero in
// the two-state model); a change of season between t-1 and t marks a year
// boundary. `occasion` keeps the original week (three-state) or occasion
// number (two-state) for reporting.
struct CaptureHistory {
  std::string id;
  std::vector<std::uint8_t> observations;
  std::vector<std::uint32_t> season;
  std::vector<std::int32_t> occasion;

  std::size_t size() const { return observations.size(); }
  bool season_starts_at(std::size_t t) const { return t > 0 && season[t] != season[t - 1]; }
};

// Throws DomainError if the history breaks the CaptureHistory invariants for
// the given model.
void validate(const CaptureHistory& history, ModelKind model);

// A CaptureHistory for the two-state model from a plain 0/1 sequence.
CaptureHistory make_history(std::string id, std::vector<std::uint8_t> observations);

struct TransitionParams {
  double gamma_hh = 0.5;
  double gamma_aa = 0.5;
  double gamma_d = 0.0;
};

// Row-stochastic matrix; row = current state, column = next state. Only the
// leading n_states x n_states block is meaningful.
struct TransitionMatrix {
  int n_states = 2;
  std::array<std::array<double, kMaxStates>, kMaxStates> p{};

  double operator()(State from, State to) const {
    return p[static_cast<int>(from)][static_cast<int>(to)];
  }
};

TransitionMatrix build_transition_2state(const TransitionParams& params);
TransitionMatrix build_transition_3state(const TransitionParams& params);

double emission_prob(State state, int observed, double pi);

struct YearBoundary {
  double q = 0.5;
  double gamma_d = 0.0;
};

// (1 - gamma_d)^26
double off_season_survival(double gamma_d);

// Matrix form of the start-of-season step: every alive row is
// (q Psurv, (1-q) Psurv, 1 - Psurv); Dead stays Dead.
TransitionMatrix year_boundary_matrix(const YearBoundary& boundary);

// State distribution at the first week of a season given the distribution at
// the last week of the previous season.
StateVector year_boundary_distribution(const StateVector& prev, double q, double gamma_d);

// Everything the forward pass needs for one individual. `weekly` is indexed by
// dataset season index; the two-state model passes one matrix.
struct HmmParams {
  std::span<const TransitionMatrix> weekly;
  double pi = 0.5;
  std::optional<YearBoundary> boundary;

  int n_states() const { return weekly.front().n_states; }
  const TransitionMatrix& weekly_for(std::uint32_t season) const {
    return weekly.size() == 1 ? weekly.front() : weekly[season];
  }
};

struct ForwardResult {
  int n_states = 2;
  std::vector<StateVector> alpha;       // filtered P(S_t | X_1..t), normalized
  std::vector<double> log_normalizer;   // log P(X_t | X_1..t-1); entry 0 is log P(X_1 | Here)
  double log_likelihood = 0.0;          // sum of log_normalizer
};

// Forward filtering from the first sighting, where the state is Here.
ForwardResult forward_pass(const CaptureHistory& history, const HmmParams& params);

struct StatePath {
  std::vector<State> states;
  friend bool operator==(const StatePath&, const StatePath&) = default;
};

// Draws S_T from alpha_T, then S_t proportional to alpha_t(S_t) P(S_t+1 | S_t).
StatePath backward_sample(const ForwardResult& forward, const CaptureHistory& history,
                          const HmmParams& params, Rng& rng);

// Success/trial counts extracted from one sampled path.
//
// hh/aa count weekly transitions between alive states inside a season block.
// A transition into Dead is not a stay/leave trial; it is counted under the
// survival fields instead. Season starts are governed by q and survival, never
// by gamma_hh or gamma_aa.
struct SufficientStats {
  BinomialCount obs;
  BinomialCount hh;
  BinomialCount aa;
  std::vector<BinomialCount> hh_by_season;  // three-state only, dataset season index

  BinomialCount weekly_survival;  // alive -> alive (success) out of alive weekly steps
  std::uint32_t starts_here = 0;  // alive at season start and Here
  std::uint32_t starts_away = 0;
  std::uint32_t starts_dead = 0;  // alive at end of season, dead at next start
};

SufficientStats sufficient_stats(const StatePath& path, const CaptureHistory& history,
                                 std::size_t n_seasons = 0);

}  // namespace hmm

// Parsed capture data shared by the engine, the simulator and the CLI.
struct Dataset {
  ModelKind model = ModelKind::TwoState;
  std::vector<hmm::CaptureHistory> histories;
  std::vector<std::int32_t> season_labels;  // season index -> season number as written in the data

  std::size_t n_individuals() const { return histories.size(); }
  std::size_t n_seasons() const { return model == ModelKind::ThreeState ? season_labels.size() : 0; }
};

}  // namespace dphmm
