// scorelab: command-line front end to the experiment runner.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scorelab/csv.hpp"
#include "scorelab/error.hpp"
#include "scorelab/runner.hpp"

namespace {

using scorelab::ExperimentConfig;

// Flag values land in a scratch config; only flags the user actually passed
// are copied over the defaults and any --config file.
struct Binding {
  CLI::Option* option;
  std::function<void(ExperimentConfig&, const ExperimentConfig&)> apply;
};

template <typename T>
void bind_flag(CLI::App* app, std::vector<Binding>& out, ExperimentConfig& scratch, const std::string& flag,
          T ExperimentConfig::*field, const std::string& help) {
  auto* opt = app->add_option(flag, scratch.*field, help);
  out.push_back({opt, [field](ExperimentConfig& dst, const ExperimentConfig& src) { dst.*field = src.*field; }});
}

struct Subcommand {
  CLI::App* app = nullptr;
  std::string experiment;
  std::vector<Binding> bindings;
  std::string config_path;
};

void add_common(Subcommand& sub, ExperimentConfig& scratch) {
  auto* app = sub.app;
  auto& b = sub.bindings;
  app->add_option("--config", sub.config_path, "JSON config file; explicit flags override it");
  bind_flag(app, b, scratch, "--kind", &ExperimentConfig::kind, "support: hypercube | product-circle");
  bind_flag(app, b, scratch, "--d", &ExperimentConfig::d, "ambient dimension (even)");
  bind_flag(app, b, scratch, "--R", &ExperimentConfig::R, "support radius");
  bind_flag(app, b, scratch, "--gamma", &ExperimentConfig::gamma, "base smoothing level");
  bind_flag(app, b, scratch, "--regime", &ExperimentConfig::regime, "oracle profile: Lp | Psi1 | exact");
  bind_flag(app, b, scratch, "--p", &ExperimentConfig::p, "Lp exponent (>= 2)");
  bind_flag(app, b, scratch, "--eps-err", &ExperimentConfig::eps_err, "oracle accuracy level");
  bind_flag(app, b, scratch, "--rho", &ExperimentConfig::rho, "shell rate (sweep/fig1) or target error level");
  bind_flag(app, b, scratch, "--Q", &ExperimentConfig::Q, "query budget");
  bind_flag(app, b, scratch, "--trials", &ExperimentConfig::trials, "trials");
  bind_flag(app, b, scratch, "--samples", &ExperimentConfig::samples, "Monte Carlo samples");
  bind_flag(app, b, scratch, "--n", &ExperimentConfig::n, "codebook size");
  bind_flag(app, b, scratch, "--tau-min", &ExperimentConfig::tau_min, "smallest tau on the grid");
  bind_flag(app, b, scratch, "--tau-max", &ExperimentConfig::tau_max, "largest tau on the grid");
  bind_flag(app, b, scratch, "--tau-points", &ExperimentConfig::tau_points, "log-spaced tau grid size");
  bind_flag(app, b, scratch, "--C", &ExperimentConfig::C_list, "window constants");
  bind_flag(app, b, scratch, "--d-list", &ExperimentConfig::d_list, "dimensions for fig1");
  bind_flag(app, b, scratch, "--sampler", &ExperimentConfig::sampler, "reverse-sde-euler | prob-flow-euler");
  bind_flag(app, b, scratch, "--sigma-max", &ExperimentConfig::sigma_max, "largest sigma (0: 2 R sqrt(d))");
  bind_flag(app, b, scratch, "--sigma-min", &ExperimentConfig::sigma_min, "smallest sigma (0: gamma/10)");
  bind_flag(app, b, scratch, "--n-min", &ExperimentConfig::n_min, "packing lower size");
  bind_flag(app, b, scratch, "--n-max", &ExperimentConfig::n_max, "packing upper size");
  bind_flag(app, b, scratch, "--w", &ExperimentConfig::w, "packing separation");
  bind_flag(app, b, scratch, "--threshold-samples", &ExperimentConfig::threshold_samples, "budget for Lambda");
  bind_flag(app, b, scratch, "--gate-samples", &ExperimentConfig::gate_samples, "budget for the J gate");
  bind_flag(app, b, scratch, "--overlap-trials", &ExperimentConfig::overlap_trials, "fresh codebooks for overlap");
  bind_flag(app, b, scratch, "--probes", &ExperimentConfig::probes, "probe points");
  bind_flag(app, b, scratch, "--replay", &ExperimentConfig::replay_path, "JSON query script");
  bind_flag(app, b, scratch, "--seed", &ExperimentConfig::seed, "64-bit master seed");
  bind_flag(app, b, scratch, "--out", &ExperimentConfig::output_dir, "output directory (default $SCORELAB_OUT or ./out)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scorelab::ConfigError("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query lower bound simulation lab"};
  app.require_subcommand(1);

  ExperimentConfig scratch;
  std::vector<Subcommand> subs;
  const std::vector<std::pair<std::string, std::string>> experiments = {
      {"sweep", "median shell-proxy curve for one d"},
      {"fig1", "sweeps over d_list, FWHM and scaling fit"},
      {"windows", "informative rate windows over a tau grid"},
      {"audit", "oracle accuracy audit over a tau grid"},
      {"coupling", "null/planted coupled sampler runs"},
      {"separation", "separation-set coverage and overlap"},
      {"infochecks", "I, J and KL estimates over a tau grid"},
      {"probe", "planted log-density and score norms at random probes"},
      {"replay", "answer a scripted query sequence"}};
  subs.reserve(experiments.size());
  for (const auto& [name, help] : experiments) {
    Subcommand sub;
    sub.app = app.add_subcommand(name, help);
    sub.experiment = name;
    subs.push_back(std::move(sub));
    add_common(subs.back(), scratch);
  }
  std::vector<std::string> check_paths;
  auto* schema_check = app.add_subcommand("schema-check", "validate CSV files against the known schemas");
  schema_check->add_option("files", check_paths, "CSV files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (schema_check->parsed()) {
      int status = 0;
      for (const auto& path : check_paths) {
        const auto r = scorelab::check_csv(path);
        std::cout << path << ": " << (r.ok ? "ok" : "FAIL") << " schema=" << (r.schema.empty() ? "?" : r.schema)
                  << " rows=" << r.rows << (r.ok ? "" : " (" + r.message + ")") << "\n";
        if (!r.ok) status = 1;
      }
      return status;
    }
    for (auto& sub : subs) {
      if (!sub.app->parsed()) continue;
      ExperimentConfig config;
      if (const char* env = std::getenv("SCORELAB_OUT"); env && *env) config.output_dir = env;
      if (!sub.config_path.empty()) config = scorelab::config_from_text(read_file(sub.config_path), config);
      for (const auto& b : sub.bindings) {
        if (b.option->count() > 0) b.apply(config, scratch);
      }
      config.experiment = sub.experiment;
      const auto result = scorelab::run(config);
      for (const auto& f : result.files) std::cout << "wrote " << f.string() << "\n";
      return 0;
    }
  } catch (const scorelab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
