// Drives the dphmm-cli executable end to end.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dphmm_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Result run(const std::string& args, const fs::path& dir, const std::string& env = "") {
  const auto err = dir / "stderr.txt";
  const std::string cmd =
      env + " '" + std::string(DPHMM_CLI_PATH) + "' " + args + " >/dev/null 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  const auto dir = scratch("usage");
  CHECK(run("", dir).code == 1);
  CHECK(run("frobnicate", dir).code == 1);
  CHECK(run("fit", dir).code == 1);
  CHECK(run("crp --n 10 --alpha -2", dir).code == 1);
  CHECK(run("simulate --preset four-group --out-dir " + (dir / "o").string(), dir).code == 1);
  CHECK(run("--help", dir).code == 0);
}

TEST_CASE("bad data exits with 2 and reports the line") {
  const auto dir = scratch("data");
  CHECK(run("fit --data " + (dir / "missing.csv").string(), dir).code == 2);
  std::ofstream(dir / "bad.csv") << "individual_id,occasion,seen\na,1,1\na,2,7\n";
  const auto r = run("fit --data " + (dir / "bad.csv").string() + " --out-dir " + (dir / "o").string(), dir);
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.csv:3") != std::string::npos);
  CHECK(r.err.find("\"event\":\"error\"") != std::string::npos);
}

TEST_CASE("crp with one customer always has one cluster") {
  const auto dir = scratch("crp");
  REQUIRE(run("crp --n 1 --alpha 5 --replicates 200 --out-dir " + dir.string(), dir).code == 0);
  const auto text = slurp(dir / "crp_counts.csv");
  const auto table = text.substr(text.find("k,count,frequency\n"));
  CHECK(table == "k,count,frequency\n1,200,1\n");
}

TEST_CASE("simulate, fit and summarize round trip with a reproducible manifest") {
  const auto dir = scratch("pipeline");
  std::ofstream(dir / "design.json")
      << R"({"preset": "two-group", "n_individuals": 5, "history_length": 60, "seed": 12})";
  REQUIRE(run("simulate --design " + (dir / "design.json").string() + " --out-dir " + (dir / "sim").string(), dir)
              .code == 0);
  const auto capture = (dir / "sim" / "capture.csv").string();

  const auto fit = run("fit --data " + capture + " --iterations 60 --burn-in 20 --chains 2 --seed 4 --out-dir " +
                           (dir / "fit").string(),
                       dir);
  REQUIRE(fit.code == 0);
  CHECK(fit.err.find("\"event\":\"done\"") != std::string::npos);

  const auto rerun = run("fit --data " + capture + " --manifest " + (dir / "fit" / "manifest.json").string() +
                             " --out-dir " + (dir / "rerun").string(),
                         dir);
  REQUIRE(rerun.code == 0);
  CHECK(slurp(dir / "fit" / "samples.csv") == slurp(dir / "rerun" / "samples.csv"));

  // A manifest does not apply to different data.
  std::ofstream(dir / "other.csv") << "individual_id,occasion,seen\nz,1,1\nz,2,1\n";
  CHECK(run("fit --data " + (dir / "other.csv").string() + " --manifest " + (dir / "fit" / "manifest.json").string() +
                " --out-dir " + (dir / "x").string(),
            dir)
            .code == 2);

  // The output directory defaults to the environment variable.
  REQUIRE(run("summarize --samples " + (dir / "fit" / "samples.csv").string(), dir,
              "DPHMM_OUT_DIR='" + (dir / "env_out").string() + "'")
              .code == 0);
  for (const char* f : {"k_frequencies.csv", "log_alpha_density.csv", "pooled_density.csv", "individual_intervals.csv",
                        "summary.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "env_out" / f));
  }
  CHECK(slurp(dir / "env_out" / "individual_intervals.csv").find("# manifest_digest=") == 0);
}

TEST_CASE("three-state fit from the command line") {
  const auto dir = scratch("three");
  std::ofstream(dir / "design.json") << R"({"preset": "two-group", "model": "three-state", "n_individuals": 4,
      "n_seasons": 2, "fixed_effects": {"beta_yr": [0.0, 0.2], "gamma_d": 0.01, "q": 0.5}})";
  REQUIRE(run("simulate --design " + (dir / "design.json").string() + " --out-dir " + (dir / "sim").string(), dir)
              .code == 0);
  REQUIRE(run("fit --model three-state --data " + (dir / "sim" / "capture.csv").string() +
                  " --iterations 40 --burn-in 10 --out-dir " + (dir / "fit").string(),
              dir)
              .code == 0);
  CHECK(slurp(dir / "fit" / "samples.csv").find("gamma_d") != std::string::npos);
  CHECK(run("fit --data " + (dir / "sim" / "capture.csv").string() + " --out-dir " + (dir / "f2").string(), dir).code ==
        2);
}
