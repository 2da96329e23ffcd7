// dphmm command-line front end. Talks to the library only through its C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dphmm/dphmm.h"
#include "json.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

void log_event(const json& j) { std::cerr << j.dump() << std::endl; }

int exit_code(dphmm_status s) {
  switch (s) {
    case DPHMM_OK: return kExitOk;
    case DPHMM_ERR_USAGE: return kExitUsage;
    case DPHMM_ERR_DATA: return kExitData;
    default: return kExitNumerical;
  }
}

// Throwing this unwinds to main with the exit code already decided.
struct Exit {
  int code;
};

void check(dphmm_status s, const char* what) {
  if (s == DPHMM_OK) return;
  log_event({{"event", "error"}, {"stage", what}, {"status", static_cast<int>(s)}, {"message", dphmm_last_error()}});
  throw Exit{exit_code(s)};
}

[[noreturn]] void usage_error(const std::string& message) {
  log_event({{"event", "error"}, {"stage", "usage"}, {"status", kExitUsage}, {"message", message}});
  throw Exit{kExitUsage};
}

std::string default_out_dir() {
  if (const char* env = std::getenv("DPHMM_OUT_DIR"); env && *env) return env;
  return "dphmm_out";
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    log_event({{"event", "error"}, {"stage", "read"}, {"status", kExitData}, {"message", "cannot open " + path}});
    throw Exit{kExitData};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
};

using Config = Handle<dphmm_config, dphmm_config_free>;
using Data = Handle<dphmm_dataset, dphmm_dataset_free>;
using Sim = Handle<dphmm_simulation, dphmm_simulation_free>;
using Fit = Handle<dphmm_fit, dphmm_fit_free>;
using Samples = Handle<dphmm_samples, dphmm_samples_free>;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::string out_dir = default_out_dir();
};

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string design_path;
  std::string preset;
  std::uint64_t replicates = 1;
  std::uint64_t first_replicate = 0;
};

void run_simulate(const Common& c, const SimulateArgs& a) {
  json design = json::object();
  if (!a.design_path.empty()) {
    try {
      design = json::parse(slurp(a.design_path));
    } catch (const json::parse_error& e) {
      log_event({{"event", "error"}, {"stage", "design"}, {"status", kExitData}, {"message", e.what()}});
      throw Exit{kExitData};
    }
  }
  if (!a.preset.empty()) design["preset"] = a.preset;
  if (a.design_path.empty() && a.preset.empty()) design["preset"] = "two-group";
  if (c.seed) design["seed"] = *c.seed;
  if (c.model) design["model"] = *c.model;
  const std::string text = design.dump();
  for (std::uint64_t r = a.first_replicate; r < a.first_replicate + a.replicates; ++r) {
    Sim sim;
    check(dphmm_simulate(text.c_str(), r, sim.out()), "simulate");
    std::filesystem::path dir = c.out_dir;
    if (a.replicates > 1) dir /= "replicate_" + std::to_string(r);
    check(dphmm_simulation_write(sim.p, dir.string().c_str()), "write");
    log_event({{"event", "simulated"}, {"replicate", r}, {"out_dir", dir.string()}});
  }
}

// ---------------------------------------------------------------------------

struct FitArgs {
  std::string data_path;
  std::string config_path;
  std::string manifest_path;
  std::optional<std::uint64_t> chains, iterations, burn_in, thin, m, adaptation_window;
};

void progress_to_stderr(const char* line, void*) { std::cerr << line << std::endl; }

void run_fit(const Common& c, const FitArgs& a) {
  if (!a.config_path.empty() && !a.manifest_path.empty()) usage_error("--config and --manifest are exclusive");
  Config config;
  char* expected_digest = nullptr;
  if (!a.manifest_path.empty()) {
    check(dphmm_manifest_load(a.manifest_path.c_str(), config.out(), &expected_digest), "manifest");
  } else if (!a.config_path.empty()) {
    check(dphmm_config_load_json(a.config_path.c_str(), config.out()), "config");
  } else {
    check(dphmm_config_create(config.out()), "config");
  }
  std::string digest_expected = expected_digest ? expected_digest : "";
  dphmm_string_free(expected_digest);

  auto set = [&](const char* key, const std::optional<std::uint64_t>& v) {
    if (v) check(dphmm_config_set_uint(config.p, key, *v), "config");
  };
  set("seed", c.seed);
  set("chains", a.chains);
  set("iterations", a.iterations);
  set("burn_in", a.burn_in);
  set("thin", a.thin);
  set("m", a.m);
  set("adaptation_window", a.adaptation_window);
  if (c.model) check(dphmm_config_set_model(config.p, c.model->c_str()), "config");

  char* config_json = nullptr;
  check(dphmm_config_to_json(config.p, &config_json), "config");
  const json resolved = json::parse(config_json);
  dphmm_string_free(config_json);

  Data data;
  check(dphmm_dataset_load_csv(a.data_path.c_str(), resolved.at("model").get<std::string>().c_str(), data.out()),
        "data");
  if (!digest_expected.empty() && digest_expected != dphmm_dataset_digest(data.p)) {
    log_event({{"event", "error"},
               {"stage", "manifest"},
               {"status", kExitData},
               {"message", "capture file digest differs from the manifest"},
               {"expected", digest_expected},
               {"found", dphmm_dataset_digest(data.p)}});
    throw Exit{kExitData};
  }
  log_event({{"event", "start"},
             {"individuals", dphmm_dataset_individuals(data.p)},
             {"config", resolved},
             {"data_sha256", dphmm_dataset_digest(data.p)}});

  Fit fit;
  check(dphmm_fit_run(data.p, config.p, progress_to_stderr, nullptr, fit.out()), "fit");
  check(dphmm_fit_write(fit.p, c.out_dir.c_str()), "write");
  log_event({{"event", "written"}, {"out_dir", c.out_dir}, {"manifest_digest", dphmm_fit_digest(fit.p)}});
}

// ---------------------------------------------------------------------------

struct CrpArgs {
  std::uint64_t n = 30;
  double alpha = 1.0;
  std::uint64_t replicates = 10000;
};

void run_crp(const Common& c, const CrpArgs& a) {
  if (a.n == 0 || a.replicates == 0) usage_error("--n and --replicates must be positive");
  std::vector<std::uint64_t> counts(a.n + 1);
  check(dphmm_crp_cluster_counts(a.n, a.alpha, a.replicates, c.seed.value_or(1), counts.data()), "crp");
  std::filesystem::create_directories(c.out_dir);
  const auto path = std::filesystem::path(c.out_dir) / "crp_counts.csv";
  std::ofstream out(path);
  out << "# n=" << a.n << "\n# alpha=" << a.alpha << "\n# replicates=" << a.replicates << "\n";
  out << "k,count,frequency\n";
  double mean = 0.0;
  for (std::size_t k = 1; k <= a.n; ++k) {
    const double f = static_cast<double>(counts[k]) / static_cast<double>(a.replicates);
    mean += static_cast<double>(k) * f;
    if (counts[k]) out << k << ',' << counts[k] << ',' << f << '\n';
  }
  if (!out) {
    log_event({{"event", "error"}, {"stage", "write"}, {"status", kExitData}, {"message", "cannot write " + path.string()}});
    throw Exit{kExitData};
  }
  double expected = 0.0;
  for (std::size_t i = 1; i <= a.n; ++i) expected += a.alpha / (a.alpha + static_cast<double>(i) - 1.0);
  log_event({{"event", "crp"}, {"mean_k", mean}, {"expected_mean_k", expected}, {"out", path.string()}});
}

// ---------------------------------------------------------------------------

void run_summarize(const Common& c, const std::string& samples_path) {
  Samples samples;
  check(dphmm_samples_load_csv(samples_path.c_str(), samples.out()), "samples");
  check(dphmm_samples_summarize(samples.p, c.out_dir.c_str()), "summarize");
  log_event({{"event", "summarized"}, {"samples", dphmm_samples_count(samples.p)}, {"out_dir", c.out_dir}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dirichlet-process hidden Markov models for capture histories"};
  app.set_version_flag("--version", std::string(dphmm_version()));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Master random seed");
    sub->add_option("--model", common.model, "two-state or three-state");
    sub->add_option("--out-dir", common.out_dir, "Output directory (default $DPHMM_OUT_DIR or ./dphmm_out)");
  };

  SimulateArgs sim_args;
  auto* simulate = app.add_subcommand("simulate", "Simulate capture histories with known truth");
  add_common(simulate);
  simulate->add_option("--design", sim_args.design_path, "Design JSON file");
  simulate->add_option("--preset", sim_args.preset, "two-group, three-group or unimodal")
      ->check(CLI::IsMember({"two-group", "three-group", "unimodal"}));
  simulate->add_option("--replicates", sim_args.replicates, "Number of replicate datasets")->check(CLI::PositiveNumber);
  simulate->add_option("--first-replicate", sim_args.first_replicate, "Index of the first replicate");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Run the MCMC sampler on a capture file");
  add_common(fit);
  fit->add_option("--data", fit_args.data_path, "Capture CSV")->required();
  fit->add_option("--config", fit_args.config_path, "Sampler config JSON");
  fit->add_option("--manifest", fit_args.manifest_path, "Re-run the configuration recorded in a manifest");
  fit->add_option("--chains", fit_args.chains, "Independent chains");
  fit->add_option("--iterations", fit_args.iterations, "Iterations per chain, burn-in included");
  fit->add_option("--burn-in", fit_args.burn_in, "Leading iterations to discard");
  fit->add_option("--thin", fit_args.thin, "Keep every thin-th iteration after burn-in");
  fit->add_option("--m", fit_args.m, "Auxiliary components for algorithm 8");
  fit->add_option("--adaptation-window", fit_args.adaptation_window, "Iterations during which proposals adapt (default: burn-in)");

  CrpArgs crp_args;
  auto* crp = app.add_subcommand("crp", "Cluster-count distribution of a Chinese restaurant process");
  add_common(crp);
  crp->add_option("--n", crp_args.n, "Customers");
  crp->add_option("--alpha", crp_args.alpha, "Concentration");
  crp->add_option("--replicates", crp_args.replicates, "Number of CRP draws");

  std::string samples_path;
  auto* summarize = app.add_subcommand("summarize", "Summarize a samples CSV");
  add_common(summarize);
  summarize->add_option("--samples", samples_path, "samples.csv from fit")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) run_simulate(common, sim_args);
    else if (*fit) run_fit(common, fit_args);
    else if (*crp) run_crp(common, crp_args);
    else if (*summarize) run_summarize(common, samples_path);
  } catch (const Exit& e) {
    return e.code;
  }
  return kExitOk;
}
