#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "doctest.h"
#include "dphmm/error.hpp"
#include "dphmm/random.hpp"
#include "dphmm/summary.hpp"
#include "json.hpp"

using namespace dphmm;
using namespace dphmm::summary;

namespace {

mcmc::PosteriorSample flat_sample(std::size_t it, double pi, std::size_t k) {
  mcmc::PosteriorSample s;
  s.iteration = it;
  s.pi = {pi, pi};
  s.gamma_hh = {0.9, 0.9};
  s.gamma_aa = {0.8, 0.8};
  s.dp_pi = {1.0, k, 1.0, 1.0};
  s.dp_hh = {2.0, 1, 1.0, 1.0};
  s.dp_aa = {0.5, 1, 1.0, 1.0};
  return s;
}

io::SampleSet flat_set(std::size_t n) {
  io::SampleSet set;
  set.individual_ids = {"a", "b"};
  for (std::size_t i = 0; i < n; ++i) set.samples.push_back(flat_sample(i + 1, 0.7, i % 3 == 0 ? 2 : 1));
  return set;
}

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1);
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.25) == doctest::Approx(2.0));
  CHECK(quantile({10, 20}, 0.975) == doctest::Approx(19.75));
  CHECK(quantile({7}, 0.3) == 7);
  CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
  CHECK_THROWS_AS(quantile({1}, 1.5), DomainError);
}

TEST_CASE("KDE matches a direct kernel sum") {
  Rng rng(11);
  std::vector<double> v(500);
  for (auto& x : v) x = sample_normal(rng) +(uniform01(rng) < 0.3 ? 3.0 : 0.0);
  const auto t = gaussian_kde(v, 2048);
  double peak = 0, worst = 0, area = 0;
  for (std::size_t j = 0; j < t.x.size(); ++j) {
    double direct = 0;
    for (double x : v) {
      const double z = (t.x[j] - x) / t.bandwidth;
      direct += std::exp(-0.5 * z * z);
    }
    direct /= v.size() * t.bandwidth * std::sqrt(2 * std::numbers::pi);
    peak = std::max(peak, direct);
    worst = std::max(worst, std::abs(direct - t.density[j]));
    if (j > 0) area += 0.5 * (t.density[j] + t.density[j - 1]) * (t.x[j] - t.x[j - 1]);
  }
  CHECK(worst < 2e-3 * peak);
  CHECK(area == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("KDE bandwidth and argument checks") {
  const std::vector<double> same(50, 0.4);
  CHECK(plugin_bandwidth(same) > 0);
  const auto t = gaussian_kde(same, 101, 0.0, 1.0);
  CHECK(t.x.front() == 0.0);
  CHECK(t.x.back() == 1.0);
  CHECK(local_maxima(t).size() == 1);
  CHECK(t.x[local_maxima(t)[0]] == doctest::Approx(0.4).epsilon(0.02));
  CHECK_THROWS_AS(gaussian_kde(std::vector<double>{}), DomainError);
  CHECK_THROWS_AS(gaussian_kde(same, 1), DomainError);
  CHECK_THROWS_AS(gaussian_kde(std::vector<double>{NAN}), DomainError);
  CHECK_THROWS_AS(gaussian_kde(same, 10, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(gaussian_kde(same, 10, std::nullopt, std::nullopt, -1.0), DomainError);
  CHECK_THROWS_AS(plugin_bandwidth(std::vector<double>{}), DomainError);
}

TEST_CASE("local maxima") {
  DensityTable t;
  t.density = {0, 1, 0, 2, 2, 2, 1, 3, 3};
  t.x.resize(t.density.size());
  // The trailing plateau touches the boundary and is not interior.
  CHECK(local_maxima(t) == std::vector<std::size_t>{1, 3});
  t.density = {3, 2, 1};
  CHECK(local_maxima(t).empty());
}

TEST_CASE("identical draws give zero-width intervals") {
  const auto s = summarize(flat_set(30));
  for (const auto& iv : s.intervals) {
    CHECK(iv.lower == iv.median);
    CHECK(iv.upper == iv.median);
  }
  CHECK(s.intervals.size() == 6);
  CHECK(posterior_mode_k(s, "pi") == 1);
  double freq = 0;
  for (const auto& r : s.k_table)
    if (r.parameter == "pi") freq += r.frequency;
  CHECK(freq == doctest::Approx(1.0));
  CHECK_THROWS_AS(posterior_mode_k(s, "q"), DomainError);
}

TEST_CASE("summaries need samples and complete fixed effects") {
  CHECK_THROWS_AS(summarize(io::SampleSet{}), DataError);
  auto set = flat_set(5);
  set.model = ModelKind::ThreeState;
  set.season_labels = {1, 2};
  CHECK_THROWS_AS(summarize(set), DataError);
  for (auto& s : set.samples) s.fixed = mcmc::FixedEffects{{0.1, 0.2}, 0.01, 0.5};
  const auto sum = summarize(set);
  const auto it = std::find_if(sum.intervals.begin(), sum.intervals.end(),
                               [](const Interval& iv) { return iv.parameter == "p_surv"; });
  REQUIRE(it != sum.intervals.end());
  CHECK(it->median == doctest::Approx(std::pow(0.99, 26)));
}

TEST_CASE("summary files carry the manifest digest") {
  const auto dir = std::filesystem::temp_directory_path() / "dphmm_summary_test";
  std::filesystem::remove_all(dir);
  write_summary(summarize(flat_set(12)), dir, "feedbeef");
  for (const char* f : {"k_frequencies.csv", "log_alpha_density.csv", "pooled_density.csv", "individual_intervals.csv"}) {
    CAPTURE(f);
    CHECK(first_line(dir / f) == "# manifest_digest=feedbeef");
  }
  std::ifstream in(dir / "summary.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["manifest_digest"] == "feedbeef");
  CHECK(j["posterior_mode_k"]["pi"] == 1);
  std::filesystem::remove_all(dir);
}
