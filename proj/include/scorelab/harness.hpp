#pragma once

// Query protocol against the masked oracle: sigma -> tau mapping, transcripts,
// two reference samplers, null/planted coupling, and the base-noise
// separation set A(S) = {x : l_max at tau = gamma reaches ln Lambda_gamma}.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorelab/adversary.hpp"
#include "scorelab/codebook.hpp"

namespace scorelab {

/// tau(sigma) = sqrt(gamma^2 + sigma^2).
inline double total_noise(double gamma, double sigma) { return std::hypot(gamma, sigma); }

struct TranscriptEntry {
  double sigma = 0.0;
  double tau = 0.0;
  std::vector<double> x;
  std::vector<double> answer;
};

struct Transcript {
  std::string tag;  // "null" or "planted:<codebook hash>"
  std::uint64_t seed = 0;
  std::vector<TranscriptEntry> entries;
};

nlohmann::json to_json(const Transcript& transcript);

/// A session that answers (sigma, x) queries and records them.
class QuerySession {
 public:
  QuerySession(std::shared_ptr<OracleSession> oracle, std::uint64_t seed);

  std::vector<double> query(double sigma, std::span<const double> x);
  const Transcript& transcript() const { return transcript_; }
  const SupportSpec& spec() const { return oracle_->spec(); }
  OracleSession& oracle() { return *oracle_; }

 private:
  std::shared_ptr<OracleSession> oracle_;
  Transcript transcript_;
};

QuerySession open_null_session(const SupportSpec& spec, const OracleProfile& profile, std::uint64_t seed);
QuerySession open_planted_session(std::shared_ptr<const Codebook> codebook, const OracleProfile& profile,
                                  std::uint64_t seed, SessionBudget budget = {},
                                  std::shared_ptr<ThresholdCache> thresholds = nullptr);

enum class SamplerKind { reverse_sde_euler, prob_flow_euler };
std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& text);

struct SamplerConfig {
  SamplerKind kind = SamplerKind::reverse_sde_euler;
  int Q = 1;
  std::vector<double> schedule;  // strictly decreasing sigma values, length Q
  double step_scale = 1.0;
};

/// Q geometrically spaced sigma values from sigma_max down to sigma_min.
SamplerConfig geometric_sampler(SamplerKind kind, int Q, double sigma_max, double sigma_min,
                                double step_scale = 1.0);

/// Geometric schedule from 2 R sqrt(d) down to gamma / 10.
SamplerConfig default_sampler(const SupportSpec& spec, SamplerKind kind, int Q);

void validate(const SamplerConfig& config);

struct SamplerRun {
  std::vector<double> output;
  Transcript transcript;
};

/// Variance-exploding Euler steps from tau_t to tau_{t+1} (tau_{Q+1} = gamma),
/// starting from x ~ N(0, (gamma^2 + sigma_1^2) I). The sampler's own noise
/// comes from streams keyed by (seed, step), never from oracle answers.
SamplerRun run_sampler(const SamplerConfig& config, QuerySession& session, std::uint64_t seed);

/// x lies in A(S) when l_max at tau = gamma is at least ln Lambda_gamma.
bool in_separation_set(const Codebook& codebook, std::span<const double> x, double log_lambda_gamma);

struct CouplingRecord {
  std::uint64_t seed = 0;
  double rate = 0.0;
  int Q = 0;
  std::optional<int> T;  // first query whose answers differ
  bool outputs_equal = false;
  bool a_set_hit_null = false;
  bool a_set_hit_planted = false;
  bool prefix_consistent = true;  // transcripts agree strictly before T and differ at T
};

/// Runs the sampler with identical internal randomness against the null and
/// the planted instance.
CouplingRecord coupled_run(std::shared_ptr<const Codebook> codebook, const OracleProfile& profile,
                           const SamplerConfig& config, std::uint64_t seed, SessionBudget budget = {},
                           std::shared_ptr<ThresholdCache> thresholds = nullptr);

struct SeparationResult {
  std::size_t n = 0;
  double rate = 0.0;
  double zeta_gamma = 0.0;
  double log_lambda = 0.0;
  double mass_coverage = 0.0;
  double coverage_std_err = 0.0;
  double overlap = 0.0;
  double overlap_std_err = 0.0;
  double overlap_bound = 0.0;  // n_max / Lambda
  std::size_t samples = 0;
  int overlap_trials = 0;
};

/// Coverage nu_{S,gamma}(A(S)) and the probability that a fixed probe lands in
/// A(S') for fresh codebooks S' with sizes drawn from the packing.
SeparationResult separation_check(const Codebook& codebook, ThresholdCache& thresholds, const RatePacking& packing,
                                  std::span<const double> probe, std::size_t samples, int overlap_trials,
                                  std::uint64_t seed);

}  // namespace scorelab
