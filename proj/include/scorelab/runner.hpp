#pragma once

// Experiment orchestration: a flat configuration record, dispatch to the
// modules, CSV/JSON persistence with a content-hashed manifest.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scorelab {

struct ExperimentConfig {
  std::string experiment = "sweep";  // sweep|windows|audit|coupling|separation|infochecks|fig1|probe|replay

  // Support.
  std::string kind = "hypercube";
  int d = 512;
  double R = 1.0;
  double gamma = 0.1;

  // Oracle profile.
  std::string regime = "Lp";
  double p = 2.0;
  double eps_err = 1.0;
  double rho = 0.2;  // shell rate for sweeps, target error level for oracle experiments
  int Q = 8;

  // Experiment knobs.
  int trials = 33;
  std::uint64_t samples = 20000;
  std::uint64_t n = 16;
  double tau_min = 0.2;
  double tau_max = 2.0;
  int tau_points = 10;
  std::vector<double> C_list = {4.0};
  std::vector<int> d_list = {512, 1024, 2048, 4096};
  std::string sampler = "reverse-sde-euler";
  double sigma_max = 0.0;  // 0: 2 R sqrt(d)
  double sigma_min = 0.0;  // 0: gamma / 10
  std::uint64_t n_min = 1;
  std::uint64_t n_max = 64;
  double w = 0.01;
  std::uint64_t threshold_samples = 200000;
  std::uint64_t gate_samples = 4096;
  int overlap_trials = 1000;
  int probes = 100;
  std::string replay_path;

  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys and wrong types raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
/// Parses JSON text; errors carry the offending line number.
ExperimentConfig config_from_text(const std::string& text, ExperimentConfig base = {});

/// Checks cross-field constraints; throws ConfigError.
void validate(const ExperimentConfig& config);

struct RunResult {
  std::vector<std::filesystem::path> files;  // data files, then config.json, manifest.json
  nlohmann::json manifest;
};

/// Runs one experiment into config.output_dir. On failure every file written
/// by this run is removed and the exception is rethrown.
RunResult run(const ExperimentConfig& config);

}  // namespace scorelab
