#include "dphmm/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>
#include <type_traits>
#include <unordered_map>

#include "dphmm/error.hpp"
#include "json.hpp"

namespace dphmm::io {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Line-oriented reader that collects `# key=value` metadata and tracks line
// numbers for error messages.
class LineReader {
 public:
  LineReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

  bool next(std::string_view& out) {
    while (std::getline(in_, buffer_)) {
      ++line_;
      std::string_view s = trim(buffer_);
      if (s.empty()) continue;
      if (s.front() == '#') {
        s.remove_prefix(1);
        const auto eq = s.find('=');
        if (eq != std::string_view::npos) meta_[std::string(trim(s.substr(0, eq)))] = std::string(trim(s.substr(eq + 1)));
        continue;
      }
      out = s;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(std::string(source_) + ":" + std::to_string(line_) + ": " + what);
  }

  std::size_t line() const { return line_; }
  const Metadata& meta() const { return meta_; }

 private:
  std::istream& in_;
  std::string_view source_;
  std::string buffer_;
  std::size_t line_ = 0;
  Metadata meta_;
};

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, out);
  return res.ec == std::errc() && res.ptr == end;
}

template <class T>
T field_number(const LineReader& r, std::string_view s, const char* name) {
  T v{};
  if (!parse_number(s, v)) r.fail(std::string("cannot parse ") + name + " '" + std::string(s) + "'");
  return v;
}

void write_metadata(std::ostream& out, const Metadata& meta) {
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

void write_whole_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write " + tmp);
    out << content;
    if (!out) throw DataError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

char state_code(hmm::State s) { return s == hmm::State::Here ? 'H' : (s == hmm::State::Away ? 'A' : 'D'); }

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Capture histories

Dataset parse_capture_text(std::string_view text, ModelKind model, std::string_view source) {
  std::istringstream in{std::string(text)};
  LineReader reader(in, source);
  std::string_view line;
  if (!reader.next(line)) reader.fail("missing header");

  const auto header = split(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name(header[i]);
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    col[name] = i;
  }
  const bool three = model == ModelKind::ThreeState;
  auto need = [&](const char* name) {
    const auto it = col.find(name);
    if (it == col.end()) {
      reader.fail(std::string("header lacks column '") + name + "' required by the " + std::string(to_string(model)) +
                  " model");
    }
    return it->second;
  };
  const std::size_t c_id = need("individual_id");
  const std::size_t c_seen = need("seen");
  const std::size_t c_season = three ? need("season") : 0;
  const std::size_t c_time = three ? need("week") : need("occasion");

  struct Row {
    std::int32_t season;
    std::int32_t time;
    std::uint8_t seen;
    std::size_t line;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<Row>> rows;
  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != header.size()) {
      reader.fail("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    const std::string id(f[c_id]);
    if (id.empty()) reader.fail("empty individual_id");
    Row r{};
    r.line = reader.line();
    const int seen = field_number<int>(reader, f[c_seen], "seen");
    if (seen != 0 && seen != 1) reader.fail("seen must be 0 or 1, got " + std::string(f[c_seen]));
    r.seen = static_cast<std::uint8_t>(seen);
    r.time = field_number<std::int32_t>(reader, f[c_time], three ? "week" : "occasion");
    if (three) {
      r.season = field_number<std::int32_t>(reader, f[c_season], "season");
      if (r.time < hmm::kFirstWeek || r.time > hmm::kLastWeek) {
        reader.fail("week " + std::to_string(r.time) + " outside the sampled weeks 18..43");
      }
    }
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.push_back(r);
  }
  if (order.empty()) throw DataError(std::string(source) + ": no capture records");

  Dataset data;
  data.model = model;
  std::int32_t min_season = 0, max_season = 0;
  bool any = false;
  std::vector<std::pair<std::string, std::vector<Row>>> trimmed;
  for (const auto& id : order) {
    auto rs = rows[id];
    std::sort(rs.begin(), rs.end(), [](const Row& a, const Row& b) {
      return std::tie(a.season, a.time) < std::tie(b.season, b.time);
    });
    for (std::size_t i = 1; i < rs.size(); ++i) {
      if (rs[i].season == rs[i - 1].season && rs[i].time == rs[i - 1].time) {
        throw DataError(std::string(source) + ":" + std::to_string(rs[i].line) + ": duplicate occasion for individual '" +
                        id + "'");
      }
    }
    const auto first = std::find_if(rs.begin(), rs.end(), [](const Row& r) { return r.seen == 1; });
    if (first == rs.end()) throw DataError(std::string(source) + ": individual '" + id + "' is never sighted");
    rs.erase(rs.begin(), first);
    for (const auto& r : rs) {
      if (!any || r.season < min_season) min_season = r.season;
      if (!any || r.season > max_season) max_season = r.season;
      any = true;
    }
    trimmed.emplace_back(id, std::move(rs));
  }
  if (three) {
    for (std::int32_t s = min_season; s <= max_season; ++s) data.season_labels.push_back(s);
  }
  for (auto& [id, rs] : trimmed) {
    hmm::CaptureHistory h;
    h.id = id;
    for (const auto& r : rs) {
      h.observations.push_back(r.seen);
      h.season.push_back(three ? static_cast<std::uint32_t>(r.season - min_season) : 0u);
      h.occasion.push_back(r.time);
    }
    if (!three) {
      for (std::size_t t = 1; t < h.size(); ++t) {
        if (h.occasion[t] != h.occasion[t - 1] + 1) {
          throw DataError(std::string(source) + ":" + std::to_string(rs[t].line) + ": individual '" + id +
                          "' skips from occasion " + std::to_string(h.occasion[t - 1]) + " to " +
                          std::to_string(h.occasion[t]));
        }
      }
    }
    try {
      hmm::validate(h, model);
    } catch (const DomainError& e) {
      throw DataError(std::string(source) + ": " + e.what());
    }
    data.histories.push_back(std::move(h));
  }
  return data;
}

Dataset parse_capture_csv(const std::filesystem::path& path, ModelKind model) {
  return parse_capture_text(read_file(path), model, path.string());
}

void write_capture_csv(const Dataset& data, const std::filesystem::path& path, const Metadata& meta) {
  std::ostringstream out;
  write_metadata(out, meta);
  const bool three = data.model == ModelKind::ThreeState;
  out << (three ? "individual_id,season,week,seen\n" : "individual_id,occasion,seen\n");
  for (const auto& h : data.histories) {
    for (std::size_t t = 0; t < h.size(); ++t) {
      out << h.id << ',';
      if (three) out << data.season_labels.at(h.season[t]) << ',';
      out << h.occasion[t] << ',' << int(h.observations[t]) << '\n';
    }
  }
  write_whole_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Ground truth and paths

void write_truth_csv(std::span<const synth::TruthRecord> truth, const std::filesystem::path& path,
                     const Metadata& meta) {
  std::ostringstream out;
  write_metadata(out, meta);
  out << "individual_id,parameter,true_value,group_label\n";
  for (const auto& t : truth) {
    out << t.individual_id << ',' << t.parameter << ',' << format_double(t.true_value) << ',' << t.group_label << '\n';
  }
  write_whole_file(path, out.str());
}

std::vector<synth::TruthRecord> read_truth_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  const std::string source = path.string();
  LineReader reader(in, source);
  std::string_view line;
  if (!reader.next(line)) reader.fail("missing header");
  if (split(line) != std::vector<std::string_view>{"individual_id", "parameter", "true_value", "group_label"}) {
    reader.fail("unexpected header");
  }
  std::vector<synth::TruthRecord> out;
  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != 4) reader.fail("expected 4 fields");
    out.push_back({std::string(f[0]), std::string(f[1]), field_number<double>(reader, f[2], "true_value"),
                   std::string(f[3])});
  }
  return out;
}

void write_paths_csv(const Dataset& data, std::span<const hmm::StatePath> paths, const std::filesystem::path& path,
                     const Metadata& meta) {
  if (paths.size() != data.histories.size()) throw DomainError("one path per individual is required");
  std::ostringstream out;
  write_metadata(out, meta);
  out << "individual_id,season,occasion,state\n";
  const bool three = data.model == ModelKind::ThreeState;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& h = data.histories[i];
    for (std::size_t t = 0; t < h.size(); ++t) {
      out << h.id << ',' << (three ? data.season_labels.at(h.season[t]) : 0) << ',' << h.occasion[t] << ','
          << state_code(paths[i].states[t]) << '\n';
    }
  }
  write_whole_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Samples

SampleSet make_sample_set(const Dataset& data, std::vector<mcmc::PosteriorSample> samples,
                          std::string manifest_digest) {
  SampleSet set;
  set.model = data.model;
  for (const auto& h : data.histories) set.individual_ids.push_back(h.id);
  set.season_labels = data.season_labels;
  set.samples = std::move(samples);
  set.manifest_digest = std::move(manifest_digest);
  return set;
}

namespace {

constexpr const char* kDpNames[] = {"pi", "gamma_hh", "gamma_aa"};

}  // namespace

void write_samples_csv(const SampleSet& set, std::ostream& out) {
  Metadata meta;
  meta["model"] = std::string(to_string(set.model));
  meta["individuals"] = join(set.individual_ids, ';');
  if (!set.manifest_digest.empty()) meta["manifest_digest"] = set.manifest_digest;
  if (set.model == ModelKind::ThreeState) {
    std::vector<std::string> labels;
    for (auto s : set.season_labels) labels.push_back(std::to_string(s));
    meta["seasons"] = join(labels, ';');
  }
  write_metadata(out, meta);
  out << "iteration,chain,parameter,unit_id,value\n";
  std::string prefix;
  for (const auto& s : set.samples) {
    prefix = std::to_string(s.iteration) + ',' + std::to_string(s.chain) + ',';
    auto row = [&](std::string_view param, std::string_view unit, double value) {
      out << prefix << param << ',' << unit << ',' << format_double(value) << '\n';
    };
    row("log_likelihood", "", s.log_likelihood);
    const mcmc::DpSummary* dps[] = {&s.dp_pi, &s.dp_hh, &s.dp_aa};
    for (int d = 0; d < 3; ++d) {
      row("alpha", kDpNames[d], dps[d]->alpha);
      row("k", kDpNames[d], static_cast<double>(dps[d]->k));
      row("base_a", kDpNames[d], dps[d]->base_a);
      row("base_b", kDpNames[d], dps[d]->base_b);
    }
    const std::vector<double>* values[] = {&s.pi, &s.gamma_hh, &s.gamma_aa};
    for (int d = 0; d < 3; ++d) {
      if (values[d]->size() != set.individual_ids.size()) throw DomainError("sample does not cover every individual");
      for (std::size_t i = 0; i < values[d]->size(); ++i) row(kDpNames[d], set.individual_ids[i], (*values[d])[i]);
    }
    if (s.fixed) {
      for (std::size_t y = 0; y < s.fixed->beta_yr.size(); ++y) {
        row("beta_yr", std::to_string(set.season_labels.at(y)), s.fixed->beta_yr[y]);
      }
      row("gamma_d", "", s.fixed->gamma_d);
      row("q", "", s.fixed->q);
    }
  }
}

void write_samples_csv(const SampleSet& set, const std::filesystem::path& path) {
  std::ostringstream out;
  write_samples_csv(set, out);
  write_whole_file(path, out.str());
}

SampleSet read_samples_csv(std::istream& in, std::string_view source) {
  LineReader reader(in, source);
  std::string_view line;
  if (!reader.next(line)) reader.fail("missing header");
  if (split(line) != std::vector<std::string_view>{"iteration", "chain", "parameter", "unit_id", "value"}) {
    reader.fail("unexpected samples header");
  }
  SampleSet set;
  const auto& meta = reader.meta();
  auto meta_or = [&](const char* key) -> std::string {
    const auto it = meta.find(key);
    return it == meta.end() ? std::string() : it->second;
  };
  try {
    set.model = parse_model_kind(meta_or("model"));
  } catch (const DomainError& e) {
    reader.fail(e.what());
  }
  set.manifest_digest = meta_or("manifest_digest");
  const std::string individuals = meta_or("individuals"), seasons = meta_or("seasons");
  for (auto part : split(individuals, ';')) {
    if (!part.empty()) set.individual_ids.emplace_back(part);
  }
  std::unordered_map<std::string, std::size_t> ind_index, season_index;
  for (std::size_t i = 0; i < set.individual_ids.size(); ++i) ind_index[set.individual_ids[i]] = i;
  if (set.model == ModelKind::ThreeState) {
    for (auto part : split(seasons, ';')) {
      if (part.empty()) continue;
      season_index[std::string(part)] = set.season_labels.size();
      set.season_labels.push_back(field_number<std::int32_t>(reader, part, "season label"));
    }
  }
  const std::size_t n = set.individual_ids.size();
  const bool three = set.model == ModelKind::ThreeState;

  // Count of fields a complete sample must carry.
  const std::size_t expected = 1 + 12 + 3 * n + (three ? set.season_labels.size() + 2 : 0);
  mcmc::PosteriorSample cur;
  std::size_t filled = 0;
  bool open = false;
  auto start = [&](std::size_t iteration, std::size_t chain) {
    cur = {};
    cur.iteration = iteration;
    cur.chain = chain;
    cur.pi.assign(n, 0.0);
    cur.gamma_hh.assign(n, 0.0);
    cur.gamma_aa.assign(n, 0.0);
    if (three) {
      cur.fixed.emplace();
      cur.fixed->beta_yr.assign(set.season_labels.size(), 0.0);
    }
    filled = 0;
    open = true;
  };
  auto finish = [&] {
    if (!open) return;
    if (filled != expected) {
      reader.fail("sample at iteration " + std::to_string(cur.iteration) + " is incomplete (" + std::to_string(filled) +
                  " of " + std::to_string(expected) + " values)");
    }
    set.samples.push_back(std::move(cur));
    open = false;
  };

  while (reader.next(line)) {
    const auto f = split(line);
    if (f.size() != 5) reader.fail("expected 5 fields");
    const auto iteration = field_number<std::size_t>(reader, f[0], "iteration");
    const auto chain = field_number<std::size_t>(reader, f[1], "chain");
    const double value = field_number<double>(reader, f[4], "value");
    if (!open || iteration != cur.iteration || chain != cur.chain) {
      finish();
      start(iteration, chain);
    }
    const std::string_view param = f[2], unit = f[3];
    auto dp_of = [&]() -> mcmc::DpSummary& {
      if (unit == "pi") return cur.dp_pi;
      if (unit == "gamma_hh") return cur.dp_hh;
      if (unit == "gamma_aa") return cur.dp_aa;
      reader.fail("unknown DP '" + std::string(unit) + "'");
    };
    auto individual = [&]() {
      const auto it = ind_index.find(std::string(unit));
      if (it == ind_index.end()) reader.fail("unknown individual '" + std::string(unit) + "'");
      return it->second;
    };
    if (param == "log_likelihood") cur.log_likelihood = value;
    else if (param == "alpha") dp_of().alpha = value;
    else if (param == "k") dp_of().k = static_cast<std::size_t>(value);
    else if (param == "base_a") dp_of().base_a = value;
    else if (param == "base_b") dp_of().base_b = value;
    else if (param == "pi") cur.pi[individual()] = value;
    else if (param == "gamma_hh") cur.gamma_hh[individual()] = value;
    else if (param == "gamma_aa") cur.gamma_aa[individual()] = value;
    else if (three && param == "beta_yr") {
      const auto it = season_index.find(std::string(unit));
      if (it == season_index.end()) reader.fail("unknown season '" + std::string(unit) + "'");
      cur.fixed->beta_yr[it->second] = value;
    } else if (three && param == "gamma_d") cur.fixed->gamma_d = value;
    else if (three && param == "q") cur.fixed->q = value;
    else reader.fail("unknown parameter '" + std::string(param) + "'");
    ++filled;
  }
  finish();
  return set;
}

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_samples_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_unsigned()) throw DataError(std::string("'") + key + "' must be a non-negative integer");
  }
  out = v.get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* n) { return k == n; }) == known.end()) {
      throw DataError(std::string(what) + ": unknown key '" + k + "'");
    }
  }
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(what) + ": " + e.what());
  }
}

void read_pair(const json& j, const char* key, double& a, double& b) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw DataError(std::string(key) + " must be a two-element array");
  a = v[0].get<double>();
  b = v[1].get<double>();
}

}  // namespace

mcmc::McmcConfig parse_config_json(std::string_view text) {
  const json j = parse_json(text, "config");
  mcmc::McmcConfig c;
  try {
    reject_unknown(j,
                   {"iterations", "burn_in", "thin", "chains", "m", "seed", "model", "adaptation_window", "priors",
                    "initial", "update_alpha", "update_base"},
                   "config");
    take(j, "iterations", c.iterations);
    take(j, "burn_in", c.burn_in);
    take(j, "thin", c.thin);
    take(j, "chains", c.chains);
    take(j, "m", c.m);
    take(j, "seed", c.seed);
    take(j, "adaptation_window", c.adaptation_window);
    take(j, "update_alpha", c.update_alpha);
    take(j, "update_base", c.update_base);
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    if (j.contains("priors")) {
      const auto& p = j.at("priors");
      reject_unknown(p, {"beta_sd", "gamma_d", "q", "base_log_mean", "base_log_sd"}, "config.priors");
      take(p, "beta_sd", c.fixed_priors.beta_sd);
      read_pair(p, "gamma_d", c.fixed_priors.gamma_d_a, c.fixed_priors.gamma_d_b);
      read_pair(p, "q", c.fixed_priors.q_a, c.fixed_priors.q_b);
      take(p, "base_log_mean", c.base_hyperprior.log_mean);
      take(p, "base_log_sd", c.base_hyperprior.log_sd);
    }
    if (j.contains("initial")) {
      const auto& p = j.at("initial");
      reject_unknown(p, {"pi", "gamma_hh", "gamma_aa", "alpha", "base_a", "base_b", "beta_yr", "gamma_d", "q"},
                     "config.initial");
      take(p, "pi", c.initial_pi);
      take(p, "gamma_hh", c.initial_gamma_hh);
      take(p, "gamma_aa", c.initial_gamma_aa);
      take(p, "alpha", c.initial_alpha);
      take(p, "base_a", c.initial_base_a);
      take(p, "base_b", c.initial_base_b);
      take(p, "beta_yr", c.initial_fixed.beta_yr);
      take(p, "gamma_d", c.initial_fixed.gamma_d);
      take(p, "q", c.initial_fixed.q);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_to_json(const mcmc::McmcConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["chains"] = c.chains;
  j["m"] = c.m;
  j["seed"] = c.seed;
  j["model"] = std::string(to_string(c.model));
  j["adaptation_window"] = c.adaptation_window;
  j["update_alpha"] = c.update_alpha;
  j["update_base"] = c.update_base;
  j["priors"] = {{"beta_sd", c.fixed_priors.beta_sd},
                 {"gamma_d", {c.fixed_priors.gamma_d_a, c.fixed_priors.gamma_d_b}},
                 {"q", {c.fixed_priors.q_a, c.fixed_priors.q_b}},
                 {"base_log_mean", c.base_hyperprior.log_mean},
                 {"base_log_sd", c.base_hyperprior.log_sd}};
  j["initial"] = {{"pi", c.initial_pi},
                  {"gamma_hh", c.initial_gamma_hh},
                  {"gamma_aa", c.initial_gamma_aa},
                  {"alpha", c.initial_alpha},
                  {"base_a", c.initial_base_a},
                  {"base_b", c.initial_base_b},
                  {"beta_yr", c.initial_fixed.beta_yr},
                  {"gamma_d", c.initial_fixed.gamma_d},
                  {"q", c.initial_fixed.q}};
  return j.dump();
}

namespace {

synth::ParameterSpec parse_spec(const json& j, const char* name) {
  synth::ParameterSpec spec;
  reject_unknown(j, {"groups", "logit_normal"}, name);
  take(j, "groups", spec.groups);
  if (j.contains("logit_normal")) {
    const auto& l = j.at("logit_normal");
    reject_unknown(l, {"mean", "spread", "spread_kind"}, name);
    synth::LogitNormal ln;
    take(l, "mean", ln.mean);
    take(l, "spread", ln.spread);
    if (l.contains("spread_kind")) {
      const auto kind = l.at("spread_kind").get<std::string>();
      if (kind == "sd") ln.spread_is_variance = false;
      else if (kind != "variance") throw DataError(std::string(name) + ": spread_kind must be variance or sd");
    }
    spec.continuous = ln;
  }
  return spec;
}

json spec_json(const synth::ParameterSpec& s) {
  json j = json::object();
  if (!s.groups.empty()) j["groups"] = s.groups;
  if (s.continuous) {
    j["logit_normal"] = {{"mean", s.continuous->mean},
                         {"spread", s.continuous->spread},
                         {"spread_kind", s.continuous->spread_is_variance ? "variance" : "sd"}};
  }
  return j;
}

}  // namespace

synth::SimDesign parse_design_json(std::string_view text) {
  const json j = parse_json(text, "design");
  synth::SimDesign d;
  try {
    reject_unknown(j, {"preset", "model", "n_individuals", "history_length", "n_seasons", "seed", "parameters",
                       "fixed_effects"},
                   "design");
    if (j.contains("preset")) {
      const auto preset = j.at("preset").get<std::string>();
      if (preset == "two-group") d = synth::two_group_design();
      else if (preset == "three-group") d = synth::three_group_design();
      else if (preset == "unimodal") d = synth::unimodal_design();
      else throw DataError("design: unknown preset '" + preset + "'");
    }
    if (j.contains("model")) d.model = parse_model_kind(j.at("model").get<std::string>());
    take(j, "n_individuals", d.n_individuals);
    take(j, "history_length", d.history_length);
    take(j, "n_seasons", d.n_seasons);
    take(j, "seed", d.seed);
    if (j.contains("parameters")) {
      const auto& p = j.at("parameters");
      reject_unknown(p, {"pi", "gamma_hh", "gamma_aa"}, "design.parameters");
      if (p.contains("pi")) d.pi = parse_spec(p.at("pi"), "pi");
      if (p.contains("gamma_hh")) d.gamma_hh = parse_spec(p.at("gamma_hh"), "gamma_hh");
      if (p.contains("gamma_aa")) d.gamma_aa = parse_spec(p.at("gamma_aa"), "gamma_aa");
    }
    if (j.contains("fixed_effects")) {
      const auto& f = j.at("fixed_effects");
      reject_unknown(f, {"beta_yr", "gamma_d", "q"}, "design.fixed_effects");
      take(f, "beta_yr", d.fixed.beta_yr);
      take(f, "gamma_d", d.fixed.gamma_d);
      take(f, "q", d.fixed.q);
    }
    d.validate();
  } catch (const json::exception& e) {
    throw DataError(std::string("design: ") + e.what());
  } catch (const DomainError& e) {
    throw DataError(std::string("design: ") + e.what());
  }
  return d;
}

std::string design_to_json(const synth::SimDesign& d) {
  json j;
  j["model"] = std::string(to_string(d.model));
  j["n_individuals"] = d.n_individuals;
  j["history_length"] = d.history_length;
  j["n_seasons"] = d.n_seasons;
  j["seed"] = d.seed;
  j["parameters"] = {{"pi", spec_json(d.pi)}, {"gamma_hh", spec_json(d.gamma_hh)}, {"gamma_aa", spec_json(d.gamma_aa)}};
  if (d.model == ModelKind::ThreeState) {
    j["fixed_effects"] = {{"beta_yr", d.fixed.beta_yr}, {"gamma_d", d.fixed.gamma_d}, {"q", d.fixed.q}};
  }
  return j.dump();
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

json reproducible_part(const RunManifest& m) {
  json j;
  j["software_version"] = m.software_version;
  j["config"] = json::parse(m.config_json);
  j["chain_seeds"] = m.chain_seeds;
  j["input_digests"] = m.input_digests;
  return j;
}

}  // namespace

std::string RunManifest::digest() const { return sha256_hex(reproducible_part(*this).dump()); }

std::string RunManifest::to_json() const {
  json j = reproducible_part(*this);
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["retained_per_chain"] = retained_per_chain;
  j["fixed_acceptance_per_chain"] = fixed_acceptance_per_chain;
  j["fixed_walk_acceptance_per_chain"] = fixed_walk_acceptance_per_chain;
  j["digest"] = digest();
  return j.dump(2);
}

RunManifest RunManifest::from_json(std::string_view text) {
  const json j = parse_json(text, "manifest");
  RunManifest m;
  try {
    m.software_version = j.at("software_version").get<std::string>();
    m.config_json = j.at("config").dump();
    m.chain_seeds = j.at("chain_seeds").get<std::vector<std::uint64_t>>();
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    take(j, "wall_clock_seconds", m.wall_clock_seconds);
    take(j, "retained_per_chain", m.retained_per_chain);
    take(j, "fixed_acceptance_per_chain", m.fixed_acceptance_per_chain);
    take(j, "fixed_walk_acceptance_per_chain", m.fixed_walk_acceptance_per_chain);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (j.contains("digest") && j.at("digest").get<std::string>() != m.digest()) {
    throw DataError("manifest: digest does not match its contents");
  }
  return m;
}

}  // namespace dphmm::io
