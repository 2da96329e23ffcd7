#include <cmath>
#include <map>

#include "doctest.h"
#include "dphmm/error.hpp"
#include "dphmm/mcmc.hpp"
#include "oracles.hpp"

using namespace dphmm;
using namespace dphmm::mcmc;

namespace {

Dataset tiny_two_state() {
  Dataset d;
  d.model = ModelKind::TwoState;
  d.histories = {hmm::make_history("a", {1, 0, 1, 1, 0}), hmm::make_history("b", {1, 1, 0, 0, 1})};
  return d;
}

Dataset tiny_three_state(std::size_t seasons, std::size_t n) {
  Dataset d;
  d.model = ModelKind::ThreeState;
  for (std::size_t y = 0; y < seasons; ++y) d.season_labels.push_back(static_cast<std::int32_t>(2001 + y));
  oracle::Gen gen(77);
  for (std::size_t i = 0; i < n; ++i) {
    auto h = gen.three_state_history(seasons * hmm::kSeasonWeeks, hmm::kFirstWeek);
    h.id = "w" + std::to_string(i);
    d.histories.push_back(std::move(h));
  }
  return d;
}

McmcConfig quick(std::size_t iterations, std::size_t burn_in = 0, std::size_t thin = 1) {
  McmcConfig c;
  c.iterations = iterations;
  c.burn_in = burn_in;
  c.thin = thin;
  c.seed = 99;
  return c;
}

// Counts for one enumerated path: obs, hh, aa as (successes, failures).
struct PathCounts {
  double obs_s = 0, obs_f = 0, hh_s = 0, hh_f = 0, aa_s = 0, aa_f = 0;
};

std::vector<PathCounts> compatible_paths(const std::vector<std::uint8_t>& obs) {
  std::vector<PathCounts> out;
  const std::size_t T = obs.size();
  for (std::size_t code = 0; code < (1u << (T - 1)); ++code) {
    std::vector<int> here(T, 1);
    for (std::size_t t = 1; t < T; ++t) here[t] = ((code >> (t - 1)) & 1) ? 0 : 1;
    bool ok = true;
    for (std::size_t t = 0; t < T; ++t) ok = ok && !(obs[t] == 1 && !here[t]);
    if (!ok) continue;
    PathCounts c;
    for (std::size_t t = 0; t < T; ++t) {
      if (here[t]) (obs[t] ? c.obs_s : c.obs_f) += 1;
      if (t + 1 == T) break;
      if (here[t]) (here[t + 1] ? c.hh_s : c.hh_f) += 1;
      else (here[t + 1] ? c.aa_f : c.aa_s) += 1;
    }
    out.push_back(c);
  }
  return out;
}

struct PairMarginal {
  double weight;       // marginal likelihood of the two individuals' counts
  double mean_first;   // posterior mean of individual 0's parameter
};

// Two individuals sharing a DP(alpha, Beta(a, b)): sum over {together, apart}.
PairMarginal pair_marginal(double s0, double f0, double s1, double f1, double alpha, double a, double b) {
  const double together = std::exp(oracle::log_beta_binomial(s0 + s1, f0 + f1, a, b)) / (1 + alpha);
  const double apart = std::exp(oracle::log_beta_binomial(s0, f0, a, b) + oracle::log_beta_binomial(s1, f1, a, b)) *
                       alpha / (1 + alpha);
  const double m_together = (a + s0 + s1) / (a + b + s0 + s1 + f0 + f1);
  const double m_apart = (a + s0) / (a + b + s0 + f0);
  return {together + apart, (together * m_together + apart * m_apart) / (together + apart)};
}

}  // namespace

TEST_CASE("retained sample counts") {
  CHECK(retained_count(15000, 5000, 1) == 10000);
  CHECK(retained_count(15000, 0, 2) == 7500);
  CHECK(retained_count(10, 0, 3) == 4);
  CHECK(retained_count(10, 1, 3) == 3);
  CHECK(retained_count(10, 10, 1) == 0);
  CHECK_THROWS_AS(retained_count(10, 0, 0), DomainError);
  for (std::size_t it = 1; it < 40; ++it) {
    for (std::size_t burn = 0; burn < it; ++burn) {
      for (std::size_t thin = 1; thin < 6; ++thin) {
        std::size_t kept = 0;
        for (std::size_t j = 1; j <= it; ++j) kept += j > burn && (j - burn - 1) % thin == 0;
        CHECK(retained_count(it, burn, thin) == kept);
      }
    }
  }
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    McmcConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), DomainError);
  };
  bad([](McmcConfig& c) { c.iterations = 0; });
  bad([](McmcConfig& c) { c.burn_in = c.iterations; });
  bad([](McmcConfig& c) { c.thin = 0; });
  bad([](McmcConfig& c) { c.chains = 0; });
  bad([](McmcConfig& c) { c.m = 0; });
  bad([](McmcConfig& c) { c.initial_pi = 1.0; });
  bad([](McmcConfig& c) { c.initial_alpha = 0.0; });
  bad([](McmcConfig& c) { c.base_hyperprior.log_sd = 0.0; });
  CHECK_NOTHROW(McmcConfig{}.validate());
  McmcConfig c;
  c.burn_in = 400;
  CHECK(c.adaptation_end() == 400);
  c.adaptation_window = 100;
  CHECK(c.adaptation_end() == 100);
  c.adaptation_window = 1000;
  CHECK(c.adaptation_end() == 400);
}

TEST_CASE("initial state rejects a model mismatch") {
  auto c = quick(10);
  c.model = ModelKind::ThreeState;
  CHECK_THROWS_AS(initial_state(tiny_two_state(), c, 0), DomainError);
  CHECK_THROWS_AS(initial_state(Dataset{}, quick(10), 0), DomainError);
}

TEST_CASE("one iteration preserves the chain invariants") {
  const auto data = tiny_two_state();
  const auto c = quick(50);
  auto s = initial_state(data, c, 0);
  for (int r = 0; r < 50; ++r) {
    mcmc_iteration(s, data, c);
    for (const auto* dp : {&s.dp_pi, &s.dp_hh, &s.dp_aa}) CHECK_NOTHROW(dp::validate(*dp));
    for (std::size_t i = 0; i < data.n_individuals(); ++i) {
      const auto& h = data.histories[i];
      for (std::size_t t = 0; t < h.size(); ++t) {
        if (h.observations[t]) CHECK(s.paths[i].states[t] == hmm::State::Here);
      }
    }
    CHECK_FALSE(s.fixed.has_value());
    CHECK(std::isfinite(s.log_likelihood));
  }
  CHECK(s.iteration == 50);
}

TEST_CASE("full sampler matches the two-individual enumeration oracle") {
  const auto data = tiny_two_state();
  const double alpha = 1.0, a = 1.0, b = 1.0;
  const auto p0 = compatible_paths(data.histories[0].observations);
  const auto p1 = compatible_paths(data.histories[1].observations);
  double z = 0, pi_mean = 0, hh_mean = 0, aa_mean = 0;
  for (const auto& x : p0) {
    for (const auto& y : p1) {
      const auto pi = pair_marginal(x.obs_s, x.obs_f, y.obs_s, y.obs_f, alpha, a, b);
      const auto hh = pair_marginal(x.hh_s, x.hh_f, y.hh_s, y.hh_f, alpha, a, b);
      const auto aa = pair_marginal(x.aa_s, x.aa_f, y.aa_s, y.aa_f, alpha, a, b);
      const double w = pi.weight * hh.weight * aa.weight;
      z += w;
      pi_mean += w * pi.mean_first;
      hh_mean += w * hh.mean_first;
      aa_mean += w * aa.mean_first;
    }
  }
  pi_mean /= z;
  hh_mean /= z;
  aa_mean /= z;

  auto c = quick(60000, 1000);
  c.update_alpha = false;
  c.update_base = false;
  c.initial_alpha = alpha;
  c.initial_base_a = a;
  c.initial_base_b = b;
  const auto run = run_chain(data, c, 0);
  double pi = 0, hh = 0, aa = 0;
  for (const auto& s : run.samples) {
    pi += s.pi[0];
    hh += s.gamma_hh[0];
    aa += s.gamma_aa[0];
  }
  const double n = static_cast<double>(run.samples.size());
  CHECK(std::abs(pi / n - pi_mean) < 0.02);
  CHECK(std::abs(hh / n - hh_mean) < 0.02);
  CHECK(std::abs(aa / n - aa_mean) < 0.02);
  for (const auto& s : run.samples) {
    CHECK(s.dp_pi.alpha == alpha);
    CHECK(s.dp_pi.base_a == a);
  }
}

TEST_CASE("same seed gives bit-identical samples") {
  const auto data = tiny_two_state();
  const auto c = quick(300, 50, 3);
  const auto a = run_chain(data, c, 0);
  const auto b = run_chain(data, c, 0);
  CHECK(a.samples == b.samples);
  auto other = c;
  other.seed = 100;
  CHECK_FALSE(run_chain(data, other, 0).samples == a.samples);
  CHECK_FALSE(run_chain(data, c, 1).samples == a.samples);
}

TEST_CASE("threaded chains equal chains run one by one") {
  const auto data = tiny_three_state(2, 3);
  auto c = quick(120, 40, 2);
  c.model = ModelKind::ThreeState;
  c.chains = 3;
  const auto runs = run_chains(data, c);
  REQUIRE(runs.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto single = run_chain(data, c, k);
    CHECK(runs[k].samples == single.samples);
    CHECK(runs[k].seed == split_seed(c.seed, k));
  }
}

TEST_CASE("retention and combination") {
  const auto data = tiny_two_state();
  auto c = quick(15000, 0, 2);
  c.chains = 3;
  const auto runs = run_chains(data, c);
  for (const auto& r : runs) {
    CHECK(r.samples.size() == 7500);
    CHECK(r.samples.front().iteration == 1);
    CHECK(r.samples.back().iteration == 14999);
  }
  const auto combined = combine_chains(runs);
  CHECK(combined.samples.size() == 22500);
  REQUIRE(combined.provenance.size() == 3);
  CHECK(combined.provenance[2].first == 15000);
  CHECK(combined.samples[7500].chain == 1);

  const auto one = combine_chains(std::span(runs.data(), 1));
  CHECK(one.samples == runs[0].samples);

  auto thin3 = quick(300, 0, 3);
  std::vector<ChainRun> mixed{run_chain(data, quick(300, 0, 2), 0), run_chain(data, thin3, 1)};
  CHECK_THROWS_AS(combine_chains(mixed), DomainError);

  auto burn = quick(15000, 5000, 1);
  burn.iterations = 600;
  burn.burn_in = 200;
  const auto r = run_chain(data, burn, 0);
  CHECK(r.samples.size() == 400);
  CHECK(r.samples.front().iteration == 201);
}

TEST_CASE("three-state samples carry fixed effects") {
  const auto data = tiny_three_state(3, 4);
  auto c = quick(80, 20);
  c.model = ModelKind::ThreeState;
  const auto run = run_chain(data, c, 0);
  for (const auto& s : run.samples) {
    REQUIRE(s.fixed.has_value());
    CHECK(s.fixed->beta_yr.size() == 3);
    CHECK(s.fixed->gamma_d > 0.0);
    CHECK(s.fixed->q > 0.0);
    CHECK(s.fixed->q < 1.0);
  }
  CHECK_FALSE(run_chain(tiny_two_state(), quick(20), 0).samples.front().fixed.has_value());
}

TEST_CASE("fixed-effect proposal adapts only inside the window and then freezes") {
  const auto data = tiny_three_state(2, 4);
  auto c = quick(200, 60);
  c.model = ModelKind::ThreeState;
  std::vector<TraceEvent> adapt;
  std::map<std::string, int> steps;
  const auto run = run_chain(data, c, 0, [&](const TraceEvent& e) {
    steps[std::string(e.step)]++;
    if (e.step == "adapt") adapt.push_back(e);
  });
  REQUIRE_FALSE(adapt.empty());
  for (const auto& e : adapt) CHECK(e.iteration <= 60);
  CHECK(adapt.back().detail.rfind("frozen", 0) == 0);
  CHECK(adapt.back().iteration == 60);
  CHECK(steps["iteration"] == 200);
  CHECK(steps["ffbs"] == 200);
  CHECK(steps["fixed_effects"] == 200);
  CHECK(run.samples.size() == 140);

  auto s = initial_state(data, c, 0);
  for (int r = 0; r < 60; ++r) mcmc_iteration(s, data, c);
  const auto version = s.fixed_proposal.version;
  REQUIRE(s.fixed_proposal.frozen.has_value());
  const auto location = s.fixed_proposal.frozen->location();
  for (int r = 0; r < 50; ++r) mcmc_iteration(s, data, c);
  CHECK(s.fixed_proposal.version == version);
  CHECK(s.fixed_proposal.frozen->location() == location);
}

TEST_CASE("fixed-effect update is rejected for the two-state model") {
  const auto data = tiny_two_state();
  auto s = initial_state(data, quick(10), 0);
  CHECK_THROWS_AS(mh_update_fixed_effects(s, data, quick(10)), DomainError);
}

TEST_CASE("numerical failures carry chain and iteration context") {
  Dataset data;
  data.histories = {hmm::make_history("a", {1, 0})};
  auto s = initial_state(data, quick(10), 0);
  s.dp_pi.cluster_values[0] = 1.0;
  s.dp_hh.cluster_values[0] = 1.0;
  try {
    mcmc_iteration(s, data, quick(10));
    FAIL("expected a numerical failure");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("chain 0, iteration 1") != std::string::npos);
  }
}

TEST_CASE("fixed effects map to and from the unconstrained scale") {
  FixedEffects f{{0.3, -0.2}, 0.001, 0.6};
  const auto back = from_unconstrained(to_unconstrained(f));
  CHECK(back.beta_yr == f.beta_yr);
  CHECK(back.gamma_d == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(back.q == doctest::Approx(0.6).epsilon(1e-12));
  CHECK_THROWS_AS(validate(FixedEffects{{0.1}, 0.01, 1.0}, 1), DomainError);
  CHECK_THROWS_AS(validate(FixedEffects{{0.1, 0.2}, 0.01, 0.5}, 1), DomainError);
}

TEST_CASE("multivariate t density and sampling") {
  const double nu = 4.0, scale = 2.0;
  const MultivariateT t1({1.0}, {scale * scale}, nu);
  for (double x : {-3.0, 0.0, 1.0, 2.5}) {
    const double z = (x - 1.0) / scale;
    const double expected = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * M_PI) -
                            std::log(scale) - (nu + 1) / 2 * std::log1p(z * z / nu);
    const double xs[] = {x};
    CHECK(t1.log_density(xs) == doctest::Approx(expected).epsilon(1e-12));
  }
  const double total = oracle::integrate(
      [&](double x) {
        const double xs[] = {x};
        return std::exp(t1.log_density(xs));
      },
      -400, 400);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));

  const MultivariateT t2({0.5, -1.0}, {1.0, 0.6, 0.6, 2.0}, 30.0);
  Rng rng(5);
  double m0 = 0, m1 = 0, c01 = 0;
  const int n = 100000;
  std::vector<std::array<double, 2>> xs;
  for (int i = 0; i < n; ++i) {
    const auto x = t2.sample(rng);
    xs.push_back({x[0], x[1]});
    m0 += x[0];
    m1 += x[1];
  }
  m0 /= n;
  m1 /= n;
  for (const auto& x : xs) c01 += (x[0] - m0) * (x[1] - m1);
  c01 /= n;
  CHECK(m0 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(m1 == doctest::Approx(-1.0).epsilon(0.02));
  CHECK(c01 == doctest::Approx(0.6 * 30.0 / 28.0).epsilon(0.05));
  CHECK_THROWS_AS(MultivariateT({0.0, 0.0}, {1.0, 2.0, 2.0, 1.0}, 4.0), DomainError);
}

TEST_CASE("independence sampler accepts every draw when the proposal is the target") {
  const MultivariateT q({0.2, -0.4}, {1.0, 0.3, 0.3, 0.5}, 4.0);
  const LogTarget target = [&](std::span<const double> x) { return q.log_density(x) + 12.0; };
  Rng rng(6);
  std::vector<double> x{0.0, 0.0};
  int accepted = 0;
  for (int i = 0; i < 2000; ++i) accepted += independence_mh_step(x, q, target, rng);
  CHECK(accepted == 2000);
}

TEST_CASE("base hyperparameter update matches 2-D grid quadrature") {
  const std::vector<double> phis{0.2, 0.35, 0.5, 0.6, 0.8};
  const BaseHyperprior prior;
  // Grid oracle written out from the Beta and Normal densities directly.
  double z = 0, ea = 0, eb = 0;
  const double h = 0.02;
  for (double la = -7; la <= 7; la += h) {
    for (double lb = -7; lb <= 7; lb += h) {
      const double a = std::exp(la), b = std::exp(lb);
      double lp = -0.5 * (la * la + lb * lb) / (prior.log_sd * prior.log_sd);
      for (double p : phis) {
        lp += (a - 1) * std::log(p) + (b - 1) * std::log1p(-p) - (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
      }
      const double w = std::exp(lp);
      z += w;
      ea += w * a;
      eb += w * b;
    }
  }
  ea /= z;
  eb /= z;

  dp::DpState s;
  s.assignments = {0, 1, 2, 3, 4};
  s.cluster_values = phis;
  Rng rng(7);
  double sa = 0, sb = 0;
  const int iters = 60000;
  int accepted = 0;
  for (int i = 0; i < iters; ++i) {
    accepted += mh_update_base_hyperparams(s, prior, rng);
    sa += s.base_a;
    sb += s.base_b;
  }
  CHECK(sa / iters == doctest::Approx(ea).epsilon(0.05));
  CHECK(sb / iters == doctest::Approx(eb).epsilon(0.05));
  CHECK(accepted > iters / 4);
}

TEST_CASE("base hyperparameters are symmetric for a single cluster at 0.5") {
  dp::DpState s = dp::single_cluster(4, 0.5);
  Rng rng(8);
  double sa = 0, sb = 0;
  const int iters = 60000;
  for (int i = 0; i < iters; ++i) {
    mh_update_base_hyperparams(s, BaseHyperprior{}, rng);
    sa += s.base_a;
    sb += s.base_b;
  }
  CHECK(sa / iters == doctest::Approx(sb / iters).epsilon(0.05));
  const double vals[] = {0.5};
  CHECK(log_base_hyper_target(0.3, -0.2, vals, BaseHyperprior{}) ==
        doctest::Approx(log_base_hyper_target(-0.2, 0.3, vals, BaseHyperprior{})));
}
