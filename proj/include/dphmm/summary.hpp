#pragma once

// Posterior summaries as plot-ready tables.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dphmm/io.hpp"

namespace dphmm::summary {

struct DensityTable {
  double bandwidth = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

// Silverman's rule: 0.9 min(sd, IQR/1.34) n^(-1/5). Falls back to a small
// positive width for degenerate samples.
double plugin_bandwidth(std::span<const double> values);

// Gaussian KDE on a regular grid, computed by linear binning onto the grid
// and convolving with the kernel truncated at 6 bandwidths. Without explicit
// limits the grid spans the data range padded by 3 bandwidths.
DensityTable gaussian_kde(std::span<const double> values, std::size_t grid_points = 512,
                          std::optional<double> lower = std::nullopt,
                          std::optional<double> upper = std::nullopt,
                          std::optional<double> bandwidth = std::nullopt);

// Indices of strict interior local maxima (plateaus count once).
std::vector<std::size_t> local_maxima(const DensityTable& table);

// Type-7 sample quantile.
double quantile(std::vector<double> values, double p);

struct KFrequency {
  std::string parameter;
  std::size_t k;
  std::size_t count;
  double frequency;
};

struct Interval {
  std::string parameter;
  std::string unit_id;
  double median, lower, upper;  // 2.5% / 97.5%
};

struct Summary {
  std::vector<KFrequency> k_table;
  std::map<std::string, DensityTable> log_alpha;       // per DP parameter
  std::map<std::string, DensityTable> pooled_density;  // per individual-level parameter
  std::vector<Interval> intervals;
};

inline constexpr const char* kIndividualParameters[] = {"pi", "gamma_hh", "gamma_aa"};

// Per-parameter draws pooled over samples, indexed [individual][sample].
std::vector<std::vector<double>> individual_draws(const io::SampleSet& set, std::string_view parameter);

std::size_t posterior_mode_k(const Summary& summary, std::string_view parameter);

Summary summarize(const io::SampleSet& set);

// k_frequencies.csv, log_alpha_density.csv, pooled_density.csv,
// individual_intervals.csv and summary.json (bandwidths and kernel).
void write_summary(const Summary& summary, const std::filesystem::path& out_dir,
                   const std::string& manifest_digest);

}  // namespace dphmm::summary
