#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "scorelab/csv.hpp"
#include "scorelab/error.hpp"
#include "scorelab/runner.hpp"

using namespace scorelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("scorelab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int status = -1;
  std::string output;
};

CliResult cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SCORELAB_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(log)};
}

}  // namespace

TEST_CASE("number formatting is locale free and round trips") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-2.0) == "-2");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(format_double(std::nan("")) == "nan");
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -7.25e-5}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv writer and validator") {
  CsvWriter csv(csv_schema("sweep"));
  csv.add(512).add(0.2).add(33).add(std::uint64_t{1}).add(0.1).add(2.5);
  csv.end_row();
  CHECK(csv.rows() == 1);
  CHECK(csv.str() == "d,rho,trials,seed,ln_tau,median_signal\n512,0.2,33,1,0.1,2.5\n");
  const auto ok = check_csv_text(csv.str());
  CHECK(ok.ok);
  CHECK(ok.schema == "sweep");
  CHECK(ok.rows == 1);

  CsvWriter short_row(csv_schema("sweep"));
  short_row.add(1);
  CHECK_THROWS(short_row.end_row());

  const auto empty = check_csv_text("d,rho,trials,seed,ln_tau,median_signal\n");
  CHECK_FALSE(empty.ok);
  CHECK(empty.message == "no data rows");

  const auto bad = check_csv_text("d,rho,trials,seed,ln_tau,median_signal\n512,abc,33,1,0.1,2.5\n");
  CHECK_FALSE(bad.ok);
  CHECK(bad.message.find("'rho'") != std::string::npos);

  const auto bad_int = check_csv_text("d,rho,trials,seed,ln_tau,median_signal\n51.5,0.2,33,1,0.1,2.5\n");
  CHECK_FALSE(bad_int.ok);
  CHECK(bad_int.message.find("'d'") != std::string::npos);

  CHECK_FALSE(check_csv_text("a,b\n1,2\n").ok);
  CHECK_FALSE(check_csv_text("").ok);
  CHECK_THROWS_AS(csv_schema("nope"), ConfigError);

  const auto scaling = check_csv_text(
      "row_type,d,fwhm,inv_sqrt_d,slope,intercept,r_squared\ndata,512,0.08,0.0441,,,\nfit,,,,1.8,0.001,0.999\n");
  CHECK(scaling.ok);
  CHECK(scaling.rows == 2);
}

TEST_CASE("atomic writes and hashes") {
  const auto dir = scratch_dir("atomic");
  write_file_atomic(dir / "a.txt", "hello\n");
  CHECK(slurp(dir / "a.txt") == "hello\n");
  write_file_atomic(dir / "a.txt", "bye\n");
  CHECK(slurp(dir / "a.txt") == "bye\n");
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config round trip and strict parsing") {
  ExperimentConfig c;
  c.experiment = "windows";
  c.kind = "product-circle";
  c.d = 64;
  c.gamma = 0.25;
  c.eps_err = 0.001;
  c.C_list = {1.0, 4.0, 16.0};
  c.d_list = {8, 16};
  c.seed = 0xFFFFFFFFFFFFFFFFull;
  c.tau_min = 1.0 / 3.0;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.seed == c.seed);
  CHECK(back.tau_min == c.tau_min);
  CHECK(config_from_text(to_json(c).dump(2)).C_list == c.C_list);

  const std::string unknown = "{\n  \"d\": 64,\n  \"dd\": 3\n}\n";
  try {
    config_from_text(unknown);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("dd") != std::string::npos);
  }
  const std::string wrong_type = "{\n  \"seed\": 1,\n  \"d\": \"big\"\n}\n";
  try {
    config_from_text(wrong_type);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  const std::string syntax = "{\n  \"d\": 64,\n  \"gamma\" 0.1\n}\n";
  try {
    config_from_text(syntax);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("validation") {
  ExperimentConfig c;
  c.experiment = "fig1";
  c.d_list.clear();
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.trials = 4;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.regime = "L3";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.experiment = "bogus";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("in-process runs write data, config and manifest") {
  const auto dir = scratch_dir("inproc");
  ExperimentConfig c;
  c.experiment = "sweep";
  c.d = 64;
  c.trials = 5;
  c.output_dir = dir.string();
  const auto result = run(c);
  REQUIRE(result.files.size() == 3);
  CHECK(check_csv(dir / "sweep.csv").ok);
  CHECK(check_csv(dir / "sweep.csv").rows == 641);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["files"][0]["fnv1a64"] == fnv1a_hex(slurp(dir / "sweep.csv")));
  CHECK(std::abs(manifest["extras"]["q_rho"].get<double>() - 0.1948) < 5e-4);
  CHECK(config_from_text(slurp(dir / "config.json")).d == 64);

  ExperimentConfig bad = c;
  bad.output_dir = (dir / "odd").string();
  bad.d = 63;
  CHECK_THROWS_WITH_AS(run(bad), doctest::Contains("even dimension required"), DomainError);
  CHECK_FALSE(fs::exists(dir / "odd" / "sweep.csv"));
  CHECK_FALSE(fs::exists(dir / "odd" / "manifest.json"));
}

TEST_CASE("every experiment produces schema-valid output") {
  const auto dir = scratch_dir("all");
  ExperimentConfig base;
  base.kind = "hypercube";
  base.d = 8;
  base.samples = 10000;
  base.trials = 5;
  base.tau_points = 3;
  base.threshold_samples = 20000;
  base.gate_samples = 1000;
  base.overlap_trials = 50;
  base.probes = 10;
  for (const std::string experiment : {"windows", "audit", "coupling", "separation", "infochecks", "probe"}) {
    auto c = base;
    c.experiment = experiment;
    c.output_dir = (dir / experiment).string();
    const auto result = run(c);
    CAPTURE(experiment);
    REQUIRE(result.files.size() >= 3);
    const auto check = check_csv(result.files.front());
    CHECK_MESSAGE(check.ok, check.message);
    CHECK(check.schema == experiment);
  }
  SUBCASE("fig1 scaling has one row per d plus the fit row") {
    auto c = base;
    c.experiment = "fig1";
    c.d_list = {128, 256, 512};
    c.trials = 9;
    c.output_dir = (dir / "fig1").string();
    run(c);
    const auto scaling = check_csv(dir / "fig1" / "scaling.csv");
    CHECK(scaling.ok);
    CHECK(scaling.rows == 4);
    CHECK(check_csv(dir / "fig1" / "curves.csv").rows == 3 * 641);
    const auto manifest = nlohmann::json::parse(slurp(dir / "fig1" / "manifest.json"));
    CHECK(std::abs(manifest["extras"]["q_rho"].get<double>() - 0.1948) < 5e-4);
  }
  SUBCASE("replay answers a scripted query sequence") {
    const auto script = dir / "script.json";
    std::ofstream(script) << R"({"instance": "null", "queries": [{"sigma": 0.4, "x": [0,0,0,0,0,0,0,0]},
                                                      {"sigma": 0.2, "x": [1,1,1,1,1,1,1,1]}]})";
    auto c = base;
    c.experiment = "replay";
    c.replay_path = script.string();
    c.output_dir = (dir / "replay").string();
    run(c);
    const auto transcript = nlohmann::json::parse(slurp(dir / "replay" / "transcript.json"));
    CHECK(transcript["entries"].size() == 2);
  }
}

TEST_CASE("command line") {
  const auto dir = scratch_dir("cli");
  const auto log = dir / "log.txt";
  SUBCASE("sweep reruns are byte identical") {
    const std::string args = "sweep --d 512 --rho 0.2 --trials 33 --seed 1 --out ";
    REQUIRE(cli(args + (dir / "a").string(), log).status == 0);
    REQUIRE(cli(args + (dir / "b").string(), log).status == 0);
    CHECK(slurp(dir / "a" / "sweep.csv") == slurp(dir / "b" / "sweep.csv"));
    CHECK(fs::exists(dir / "a" / "manifest.json"));
    const auto check = cli("schema-check " + (dir / "a" / "sweep.csv").string(), log);
    CHECK(check.status == 0);
    CHECK(check.output.find("schema=sweep") != std::string::npos);
  }
  SUBCASE("odd dimension is rejected") {
    const auto r = cli("sweep --d 511 --out " + (dir / "odd").string(), log);
    CHECK(r.status != 0);
    CHECK(r.output.find("even dimension required") != std::string::npos);
  }
  SUBCASE("config file with flag override") {
    std::ofstream(dir / "cfg.json") << "{\n  \"d\": 32,\n  \"trials\": 3\n}\n";
    const auto r = cli("sweep --config " + (dir / "cfg.json").string() + " --d 64 --out " + (dir / "c").string(), log);
    REQUIRE(r.status == 0);
    const auto cfg = config_from_text(slurp(dir / "c" / "config.json"));
    CHECK(cfg.d == 64);
    CHECK(cfg.trials == 3);
  }
  SUBCASE("bad config reports its line") {
    std::ofstream(dir / "bad.json") << "{\n  \"d\": 32,\n  \"colour\": 1\n}\n";
    const auto r = cli("sweep --config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string(), log);
    CHECK(r.status == 2);
    CHECK(r.output.find("line 3") != std::string::npos);
  }
  SUBCASE("empty d list is a config error") {
    std::ofstream(dir / "empty.json") << "{\"d_list\": []}";
    const auto r = cli("fig1 --config " + (dir / "empty.json").string() + " --out " + (dir / "e").string(), log);
    CHECK(r.status == 2);
    CHECK(r.output.find("d_list") != std::string::npos);
  }
  SUBCASE("schema-check names the offending column") {
    std::ofstream(dir / "broken.csv") << "d,rho,trials,seed,ln_tau,median_signal\n512,0.2,x,1,0.1,2.5\n";
    const auto r = cli("schema-check " + (dir / "broken.csv").string(), log);
    CHECK(r.status == 1);
    CHECK(r.output.find("'trials'") != std::string::npos);
  }
  SUBCASE("output directory from the environment") {
    const auto env_dir = dir / "env";
    const std::string cmd = "SCORELAB_OUT=" + env_dir.string() + " " + SCORELAB_CLI + " sweep --d 32 --trials 3 > " +
                            log.string() + " 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(env_dir / "sweep.csv"));
  }
}
