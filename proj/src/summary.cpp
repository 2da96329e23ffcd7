#include "dphmm/summary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dphmm/error.hpp"
#include "json.hpp"

namespace dphmm::summary {

namespace {

constexpr const char* kDpParameters[] = {"pi", "gamma_hh", "gamma_aa"};

const mcmc::DpSummary& dp_of(const mcmc::PosteriorSample& s, std::string_view parameter) {
  if (parameter == "pi") return s.dp_pi;
  if (parameter == "gamma_hh") return s.dp_hh;
  if (parameter == "gamma_aa") return s.dp_aa;
  throw DomainError("unknown DP parameter '" + std::string(parameter) + "'");
}

const std::vector<double>& values_of(const mcmc::PosteriorSample& s, std::string_view parameter) {
  if (parameter == "pi") return s.pi;
  if (parameter == "gamma_hh") return s.gamma_hh;
  if (parameter == "gamma_aa") return s.gamma_aa;
  throw DomainError("unknown individual parameter '" + std::string(parameter) + "'");
}

Interval interval_of(std::string parameter, std::string unit, std::vector<double> draws) {
  Interval iv;
  iv.parameter = std::move(parameter);
  iv.unit_id = std::move(unit);
  iv.median = quantile(draws, 0.5);
  iv.lower = quantile(draws, 0.025);
  iv.upper = quantile(std::move(draws), 0.975);
  return iv;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

double plugin_bandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw DomainError("bandwidth of an empty sample");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  std::vector<double> copy(values.begin(), values.end());
  const double iqr = n > 1 ? quantile(copy, 0.75) - quantile(copy, 0.25) : 0.0;
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd;
  if (!(spread > 0.0)) spread = std::max(1e-3, 1e-3 * std::abs(mean));
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

DensityTable gaussian_kde(std::span<const double> values, std::size_t grid_points, std::optional<double> lower,
                          std::optional<double> upper, std::optional<double> bandwidth) {
  if (values.empty()) throw DomainError("KDE of an empty sample");
  if (grid_points < 2) throw DomainError("KDE grid needs at least two points");
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("KDE input contains a non-finite value");
  }
  DensityTable out;
  out.bandwidth = bandwidth ? *bandwidth : plugin_bandwidth(values);
  if (!(out.bandwidth > 0.0)) throw DomainError("KDE bandwidth must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = lower ? *lower : *lo_it - 3.0 * out.bandwidth;
  const double hi = upper ? *upper : *hi_it + 3.0 * out.bandwidth;
  if (!(hi > lo)) throw DomainError("KDE grid limits are empty");

  const std::size_t G = grid_points;
  const double delta = (hi - lo) / static_cast<double>(G - 1);
  std::vector<double> counts(G, 0.0);
  for (double v : values) {
    const double pos = std::clamp((v - lo) / delta, 0.0, static_cast<double>(G - 1));
    const auto left = std::min(static_cast<std::size_t>(pos), G - 2);
    const double frac = pos - static_cast<double>(left);
    counts[left] += 1.0 - frac;
    counts[left + 1] += frac;
  }

  const auto reach = std::min<std::size_t>(G - 1, static_cast<std::size_t>(6.0 * out.bandwidth / delta));
  std::vector<double> kernel(reach + 1);
  const double norm = 1.0 / (static_cast<double>(values.size()) * out.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (std::size_t l = 0; l <= reach; ++l) {
    const double z = static_cast<double>(l) * delta / out.bandwidth;
    kernel[l] = norm * std::exp(-0.5 * z * z);
  }

  out.x.resize(G);
  out.density.assign(G, 0.0);
  for (std::size_t j = 0; j < G; ++j) out.x[j] = lo + static_cast<double>(j) * delta;
  for (std::size_t k = 0; k < G; ++k) {
    if (counts[k] == 0.0) continue;
    const std::size_t from = k > reach ? k - reach : 0;
    const std::size_t to = std::min(G - 1, k + reach);
    for (std::size_t j = from; j <= to; ++j) {
      out.density[j] += counts[k] * kernel[j > k ? j - k : k - j];
    }
  }
  return out;
}

std::vector<std::size_t> local_maxima(const DensityTable& table) {
  std::vector<std::size_t> out;
  const auto& d = table.density;
  std::size_t i = 1;
  while (i + 1 < d.size()) {
    if (d[i] > d[i - 1]) {
      std::size_t j = i;
      while (j + 1 < d.size() && d[j + 1] == d[i]) ++j;
      if (j + 1 < d.size() && d[j + 1] < d[i]) out.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("quantile level must lie in [0,1]");
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size()) return a;
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + (h - static_cast<double>(lo)) * (b - a);
}

std::vector<std::vector<double>> individual_draws(const io::SampleSet& set, std::string_view parameter) {
  std::vector<std::vector<double>> out(set.individual_ids.size());
  for (auto& v : out) v.reserve(set.samples.size());
  for (const auto& s : set.samples) {
    const auto& vals = values_of(s, parameter);
    if (vals.size() != out.size()) throw DataError("sample does not cover every individual");
    for (std::size_t i = 0; i < vals.size(); ++i) out[i].push_back(vals[i]);
  }
  return out;
}

std::size_t posterior_mode_k(const Summary& summary, std::string_view parameter) {
  const KFrequency* best = nullptr;
  for (const auto& row : summary.k_table) {
    if (row.parameter != parameter) continue;
    if (!best || row.count > best->count) best = &row;
  }
  if (!best) throw DomainError("no cluster counts for '" + std::string(parameter) + "'");
  return best->k;
}

Summary summarize(const io::SampleSet& set) {
  if (set.samples.empty()) throw DataError("no posterior samples to summarize");
  Summary out;
  const double total = static_cast<double>(set.samples.size());
  for (const char* name : kDpParameters) {
    std::map<std::size_t, std::size_t> counts;
    std::vector<double> log_alpha;
    log_alpha.reserve(set.samples.size());
    for (const auto& s : set.samples) {
      const auto& dp = dp_of(s, name);
      counts[dp.k]++;
      log_alpha.push_back(std::log(dp.alpha));
    }
    for (const auto& [k, c] : counts) out.k_table.push_back({name, k, c, static_cast<double>(c) / total});
    out.log_alpha[name] = gaussian_kde(log_alpha);
  }
  for (const char* name : kIndividualParameters) {
    const auto draws = individual_draws(set, name);
    std::vector<double> pooled;
    pooled.reserve(draws.size() * set.samples.size());
    for (std::size_t i = 0; i < draws.size(); ++i) {
      pooled.insert(pooled.end(), draws[i].begin(), draws[i].end());
      out.intervals.push_back(interval_of(name, set.individual_ids[i], draws[i]));
    }
    out.pooled_density[name] = gaussian_kde(pooled, 512, 0.0, 1.0);
  }
  if (set.model == ModelKind::ThreeState) {
    const std::size_t S = set.season_labels.size();
    std::vector<std::vector<double>> beta(S);
    std::vector<double> gamma_d, q, p_surv;
    for (const auto& s : set.samples) {
      if (!s.fixed || s.fixed->beta_yr.size() != S) throw DataError("three-state sample lacks fixed effects");
      for (std::size_t y = 0; y < S; ++y) beta[y].push_back(s.fixed->beta_yr[y]);
      gamma_d.push_back(s.fixed->gamma_d);
      q.push_back(s.fixed->q);
      p_surv.push_back(hmm::off_season_survival(s.fixed->gamma_d));
    }
    for (std::size_t y = 0; y < S; ++y) {
      out.intervals.push_back(interval_of("beta_yr", std::to_string(set.season_labels[y]), std::move(beta[y])));
    }
    out.intervals.push_back(interval_of("gamma_d", "", std::move(gamma_d)));
    out.intervals.push_back(interval_of("q", "", std::move(q)));
    out.intervals.push_back(interval_of("p_surv", "", std::move(p_surv)));
  }
  return out;
}

void write_summary(const Summary& summary, const std::filesystem::path& out_dir, const std::string& manifest_digest) {
  std::filesystem::create_directories(out_dir);
  const std::string head = manifest_digest.empty() ? std::string() : "# manifest_digest=" + manifest_digest + "\n";

  std::ostringstream k;
  k << head << "parameter,k,count,frequency\n";
  for (const auto& r : summary.k_table) {
    k << r.parameter << ',' << r.k << ',' << r.count << ',' << io::format_double(r.frequency) << '\n';
  }
  write_text(out_dir / "k_frequencies.csv", k.str());

  auto density_csv = [&](const std::map<std::string, DensityTable>& tables) {
    std::ostringstream d;
    d << head << "parameter,x,density\n";
    for (const auto& [name, t] : tables) {
      for (std::size_t j = 0; j < t.x.size(); ++j) {
        d << name << ',' << io::format_double(t.x[j]) << ',' << io::format_double(t.density[j]) << '\n';
      }
    }
    return d.str();
  };
  write_text(out_dir / "log_alpha_density.csv", density_csv(summary.log_alpha));
  write_text(out_dir / "pooled_density.csv", density_csv(summary.pooled_density));

  std::ostringstream iv;
  iv << head << "parameter,unit_id,median,lower_2.5,upper_97.5\n";
  for (const auto& r : summary.intervals) {
    iv << r.parameter << ',' << r.unit_id << ',' << io::format_double(r.median) << ',' << io::format_double(r.lower)
       << ',' << io::format_double(r.upper) << '\n';
  }
  write_text(out_dir / "individual_intervals.csv", iv.str());

  nlohmann::json j;
  j["manifest_digest"] = manifest_digest;
  j["kernel"] = "gaussian";
  j["bandwidth_rule"] = "silverman";
  for (const auto& [name, t] : summary.log_alpha) {
    j["log_alpha"][name] = {{"bandwidth", t.bandwidth}, {"grid_points", t.x.size()}};
  }
  for (const auto& [name, t] : summary.pooled_density) {
    j["pooled_density"][name] = {{"bandwidth", t.bandwidth}, {"grid_points", t.x.size()}, {"lower", 0.0}, {"upper", 1.0}};
  }
  for (const char* name : kDpParameters) {
    j["posterior_mode_k"][name] = posterior_mode_k(summary, name);
  }
  write_text(out_dir / "summary.json", j.dump(2) + "\n");
}

}  // namespace dphmm::summary
