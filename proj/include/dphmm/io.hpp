#pragma once

// File formats: capture CSV, ground-truth CSV, long-format samples CSV, JSON
// configs and designs, run manifests.
//
// Every CSV written here may start with `# key=value` metadata lines; readers
// skip and collect them.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dphmm/hmm.hpp"
#include "dphmm/mcmc.hpp"
#include "dphmm/synth.hpp"

namespace dphmm::io {

using Metadata = std::map<std::string, std::string>;

// Two-state header: individual_id,occasion,seen
// Three-state header: individual_id,season,week,seen
Dataset parse_capture_csv(const std::filesystem::path& path, ModelKind model);
Dataset parse_capture_text(std::string_view text, ModelKind model, std::string_view source = "<memory>");
void write_capture_csv(const Dataset& data, const std::filesystem::path& path, const Metadata& meta = {});

// individual_id,parameter,true_value,group_label
void write_truth_csv(std::span<const synth::TruthRecord> truth, const std::filesystem::path& path,
                     const Metadata& meta = {});
std::vector<synth::TruthRecord> read_truth_csv(const std::filesystem::path& path);

// individual_id,season,occasion,state
void write_paths_csv(const Dataset& data, std::span<const hmm::StatePath> paths,
                     const std::filesystem::path& path, const Metadata& meta = {});

// Posterior samples with the labels needed to write them out.
struct SampleSet {
  ModelKind model = ModelKind::TwoState;
  std::vector<std::string> individual_ids;
  std::vector<std::int32_t> season_labels;
  std::vector<mcmc::PosteriorSample> samples;
  std::string manifest_digest;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

SampleSet make_sample_set(const Dataset& data, std::vector<mcmc::PosteriorSample> samples,
                          std::string manifest_digest = {});

// Long format: iteration,chain,parameter,unit_id,value. Doubles are written in
// shortest round-trip form so reading gives back the identical stream.
void write_samples_csv(const SampleSet& set, std::ostream& out);
void write_samples_csv(const SampleSet& set, const std::filesystem::path& path);
SampleSet read_samples_csv(std::istream& in, std::string_view source = "<stream>");
SampleSet read_samples_csv(const std::filesystem::path& path);

mcmc::McmcConfig parse_config_json(std::string_view text);
std::string config_to_json(const mcmc::McmcConfig& config);

synth::SimDesign parse_design_json(std::string_view text);
std::string design_to_json(const synth::SimDesign& design);

std::string read_file(const std::filesystem::path& path);  // DataError if unreadable
std::string sha256_hex(std::string_view bytes);
std::string format_double(double value);  // shortest round-trip

struct RunManifest {
  std::string software_version;
  std::string config_json;  // canonical config echo
  std::vector<std::uint64_t> chain_seeds;
  std::map<std::string, std::string> input_digests;  // role -> sha256
  double wall_clock_seconds = 0.0;
  std::vector<std::size_t> retained_per_chain;
  std::vector<double> fixed_acceptance_per_chain;
  std::vector<double> fixed_walk_acceptance_per_chain;

  // sha256 over the reproducibility-relevant fields: version, config, seeds,
  // input digests. Wall-clock and counts are excluded.
  std::string digest() const;
  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
};

}  // namespace dphmm::io
