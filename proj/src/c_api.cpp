#include "dphmm/dphmm.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "dphmm/dp.hpp"
#include "dphmm/error.hpp"
#include "dphmm/io.hpp"
#include "dphmm/mcmc.hpp"
#include "dphmm/summary.hpp"
#include "dphmm/synth.hpp"
#include "json.hpp"

using namespace dphmm;

struct dphmm_config {
  mcmc::McmcConfig config;
};

struct dphmm_dataset {
  Dataset data;
  std::string digest;
};

struct dphmm_simulation {
  synth::SimDesign design;
  std::uint64_t replicate = 0;
  synth::Simulation sim;
};

struct dphmm_fit {
  io::SampleSet samples;
  io::RunManifest manifest;
  std::string digest;
};

struct dphmm_samples {
  io::SampleSet samples;
};

namespace {

thread_local std::string last_error;

dphmm_status fail(dphmm_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <class F>
dphmm_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return DPHMM_OK;
  } catch (const DataError& e) {
    return fail(DPHMM_ERR_DATA, e.what());
  } catch (const NumericalError& e) {
    return fail(DPHMM_ERR_NUMERICAL, e.what());
  } catch (const DomainError& e) {
    return fail(DPHMM_ERR_USAGE, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(DPHMM_ERR_DATA, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DPHMM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DPHMM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DPHMM_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

extern "C" {

const char* dphmm_version(void) { return DPHMM_VERSION; }

const char* dphmm_last_error(void) { return last_error.c_str(); }

void dphmm_string_free(char* s) { std::free(s); }

dphmm_status dphmm_config_create(dphmm_config** out) {
  return guarded([&] {
    require(out, "null output pointer");
    *out = new dphmm_config{};
  });
}

dphmm_status dphmm_config_parse_json(const char* json, dphmm_config** out) {
  return guarded([&] {
    require(json && out, "null argument");
    auto c = std::make_unique<dphmm_config>();
    c->config = io::parse_config_json(json);
    *out = c.release();
  });
}

dphmm_status dphmm_config_load_json(const char* path, dphmm_config** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto c = std::make_unique<dphmm_config>();
    c->config = io::parse_config_json(io::read_file(path));
    *out = c.release();
  });
}

dphmm_status dphmm_config_set_uint(dphmm_config* config, const char* key, uint64_t value) {
  return guarded([&] {
    require(config && key, "null argument");
    auto& c = config->config;
    const std::string k = key;
    if (k == "iterations") c.iterations = value;
    else if (k == "burn_in") c.burn_in = value;
    else if (k == "thin") c.thin = value;
    else if (k == "chains") c.chains = value;
    else if (k == "m") c.m = value;
    else if (k == "seed") c.seed = value;
    else if (k == "adaptation_window") c.adaptation_window = value;
    else throw DomainError("unknown config key '" + k + "'");
  });
}

dphmm_status dphmm_config_set_model(dphmm_config* config, const char* model) {
  return guarded([&] {
    require(config && model, "null argument");
    config->config.model = parse_model_kind(model);
  });
}

dphmm_status dphmm_config_to_json(const dphmm_config* config, char** out) {
  return guarded([&] {
    require(config && out, "null argument");
    *out = copy_string(io::config_to_json(config->config));
  });
}

void dphmm_config_free(dphmm_config* config) { delete config; }

dphmm_status dphmm_manifest_load(const char* path, dphmm_config** config, char** data_digest) {
  return guarded([&] {
    require(path && config && data_digest, "null argument");
    const auto manifest = io::RunManifest::from_json(io::read_file(path));
    const auto it = manifest.input_digests.find("capture");
    if (it == manifest.input_digests.end()) throw DataError("manifest has no capture digest");
    auto c = std::make_unique<dphmm_config>();
    c->config = io::parse_config_json(manifest.config_json);
    *data_digest = copy_string(it->second);
    *config = c.release();
  });
}

dphmm_status dphmm_dataset_load_csv(const char* path, const char* model, dphmm_dataset** out) {
  return guarded([&] {
    require(path && model && out, "null argument");
    const ModelKind kind = parse_model_kind(model);
    auto d = std::make_unique<dphmm_dataset>();
    const std::string text = io::read_file(path);
    d->digest = io::sha256_hex(text);
    d->data = io::parse_capture_text(text, kind, path);
    *out = d.release();
  });
}

size_t dphmm_dataset_individuals(const dphmm_dataset* data) { return data ? data->data.n_individuals() : 0; }

const char* dphmm_dataset_digest(const dphmm_dataset* data) { return data ? data->digest.c_str() : ""; }

void dphmm_dataset_free(dphmm_dataset* data) { delete data; }

dphmm_status dphmm_simulate(const char* design_json, uint64_t replicate, dphmm_simulation** out) {
  return guarded([&] {
    require(design_json && out, "null argument");
    auto s = std::make_unique<dphmm_simulation>();
    s->design = io::parse_design_json(design_json);
    s->replicate = replicate;
    s->sim = synth::simulate_replicate(s->design, replicate);
    *out = s.release();
  });
}

dphmm_status dphmm_simulation_write(const dphmm_simulation* sim, const char* out_dir) {
  return guarded([&] {
    require(sim && out_dir, "null argument");
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    const io::Metadata meta{{"model", std::string(to_string(sim->design.model))},
                            {"seed", std::to_string(sim->design.seed)},
                            {"replicate", std::to_string(sim->replicate)}};
    io::write_capture_csv(sim->sim.data, dir / "capture.csv", meta);
    io::write_truth_csv(sim->sim.truth, dir / "truth.csv", meta);
    io::write_paths_csv(sim->sim.data, sim->sim.paths, dir / "paths.csv", meta);
    nlohmann::json j;
    j["software_version"] = DPHMM_VERSION;
    j["design"] = nlohmann::json::parse(io::design_to_json(sim->design));
    j["replicate"] = sim->replicate;
    j["stream"] = 1000 + sim->replicate;
    j["capture_sha256"] = io::sha256_hex(io::read_file(dir / "capture.csv"));
    std::ofstream(dir / "simulation.json") << j.dump(2) << '\n';
  });
}

void dphmm_simulation_free(dphmm_simulation* sim) { delete sim; }

dphmm_status dphmm_fit_run(const dphmm_dataset* data, const dphmm_config* config, dphmm_progress_fn progress,
                           void* user, dphmm_fit** out) {
  return guarded([&] {
    require(data && config && out, "null argument");
    const auto& cfg = config->config;
    if (cfg.model != data->data.model) {
      throw DomainError("config model " + std::string(to_string(cfg.model)) + " differs from the dataset's " +
                        std::string(to_string(data->data.model)));
    }
    cfg.validate();
    const std::size_t stride = std::max<std::size_t>(1, cfg.iterations / 100);
    mcmc::TraceSink trace;
    if (progress) {
      trace = [&](const mcmc::TraceEvent& e) {
        const bool tick = e.step == "iteration" && (e.iteration % stride == 0 || e.iteration == cfg.iterations);
        if (!tick && e.step != "adapt") return;
        nlohmann::json j{{"event", std::string(e.step)}, {"chain", e.chain}, {"iteration", e.iteration},
                         {"of", cfg.iterations}};
        if (!e.detail.empty()) j["detail"] = e.detail;
        progress(j.dump().c_str(), user);
      };
    }
    const auto start = std::chrono::steady_clock::now();
    const auto runs = mcmc::run_chains(data->data, cfg, trace);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto combined = mcmc::combine_chains(runs);

    auto f = std::make_unique<dphmm_fit>();
    auto& m = f->manifest;
    m.software_version = DPHMM_VERSION;
    m.config_json = io::config_to_json(cfg);
    m.input_digests["capture"] = data->digest;
    m.wall_clock_seconds = seconds;
    for (const auto& r : runs) {
      m.chain_seeds.push_back(r.seed);
      m.retained_per_chain.push_back(r.samples.size());
      m.fixed_acceptance_per_chain.push_back(r.fixed_acceptance);
      m.fixed_walk_acceptance_per_chain.push_back(r.fixed_walk_acceptance);
    }
    f->digest = m.digest();
    f->samples = io::make_sample_set(data->data, std::move(combined.samples), f->digest);
    if (progress) {
      nlohmann::json j{{"event", "done"}, {"samples", f->samples.samples.size()}, {"seconds", seconds}};
      progress(j.dump().c_str(), user);
    }
    *out = f.release();
  });
}

size_t dphmm_fit_sample_count(const dphmm_fit* fit) { return fit ? fit->samples.samples.size() : 0; }

const char* dphmm_fit_digest(const dphmm_fit* fit) { return fit ? fit->digest.c_str() : ""; }

dphmm_status dphmm_fit_write(const dphmm_fit* fit, const char* out_dir) {
  return guarded([&] {
    require(fit && out_dir, "null argument");
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    io::write_samples_csv(fit->samples, dir / "samples.csv");
    std::ofstream(dir / "manifest.json") << fit->manifest.to_json() << '\n';
  });
}

void dphmm_fit_free(dphmm_fit* fit) { delete fit; }

dphmm_status dphmm_samples_load_csv(const char* path, dphmm_samples** out) {
  return guarded([&] {
    require(path && out, "null argument");
    auto s = std::make_unique<dphmm_samples>();
    s->samples = io::read_samples_csv(std::filesystem::path(path));
    *out = s.release();
  });
}

size_t dphmm_samples_count(const dphmm_samples* samples) { return samples ? samples->samples.samples.size() : 0; }

dphmm_status dphmm_samples_summarize(const dphmm_samples* samples, const char* out_dir) {
  return guarded([&] {
    require(samples && out_dir, "null argument");
    const auto summary = summary::summarize(samples->samples);
    summary::write_summary(summary, out_dir, samples->samples.manifest_digest);
  });
}

void dphmm_samples_free(dphmm_samples* samples) { delete samples; }

dphmm_status dphmm_crp_cluster_counts(size_t n, double alpha, size_t replicates, uint64_t seed,
                                      uint64_t* out_counts) {
  return guarded([&] {
    require(out_counts, "null output array");
    require(n > 0 && replicates > 0, "n and replicates must be positive");
    std::fill(out_counts, out_counts + n + 1, 0);
    Rng rng = make_stream(seed, 0);
    const dp::BaseSampler base = [](Rng& r) { return uniform01(r); };
    for (std::size_t r = 0; r < replicates; ++r) {
      out_counts[dp::crp_draw(n, alpha, base, rng).values.size()]++;
    }
  });
}

}  // extern "C"
