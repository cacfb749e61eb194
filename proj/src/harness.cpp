#include "scorelab/harness.hpp"

#include <algorithm>
#include <cmath>

#include "scorelab/error.hpp"
#include "scorelab/info_metrics.hpp"
#include "scorelab/mixture_score.hpp"
#include "scorelab/numeric.hpp"
#include "scorelab/parallel.hpp"

namespace scorelab {

nlohmann::json to_json(const Transcript& transcript) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : transcript.entries) {
    entries.push_back({{"sigma", e.sigma}, {"tau", e.tau}, {"x", e.x}, {"answer", e.answer}});
  }
  return {{"tag", transcript.tag}, {"seed", transcript.seed}, {"entries", entries}};
}

QuerySession::QuerySession(std::shared_ptr<OracleSession> oracle, std::uint64_t seed) : oracle_(std::move(oracle)) {
  transcript_.seed = seed;
  transcript_.tag = oracle_->is_null() ? "null" : "planted:" + std::to_string(oracle_->codebook()->hash());
}

std::vector<double> QuerySession::query(double sigma, std::span<const double> x) {
  if (!(sigma > 0.0)) throw DomainError("query noise sigma must be positive");
  require(static_cast<int>(x.size()) == spec().d, "query point has the wrong dimension");
  const double tau = total_noise(spec().gamma, sigma);
  auto answer = oracle_->answer(tau, x);
  transcript_.entries.push_back({sigma, tau, std::vector<double>(x.begin(), x.end()), answer});
  return answer;
}

QuerySession open_null_session(const SupportSpec& spec, const OracleProfile& profile, std::uint64_t seed) {
  return QuerySession(std::make_shared<OracleSession>(spec, profile, seed), seed);
}

QuerySession open_planted_session(std::shared_ptr<const Codebook> codebook, const OracleProfile& profile,
                                  std::uint64_t seed, SessionBudget budget,
                                  std::shared_ptr<ThresholdCache> thresholds) {
  return QuerySession(
      std::make_shared<OracleSession>(std::move(codebook), profile, seed, budget, std::move(thresholds)), seed);
}

std::string to_string(SamplerKind kind) {
  return kind == SamplerKind::reverse_sde_euler ? "reverse-sde-euler" : "prob-flow-euler";
}

SamplerKind parse_sampler_kind(const std::string& text) {
  if (text == "reverse-sde-euler") return SamplerKind::reverse_sde_euler;
  if (text == "prob-flow-euler") return SamplerKind::prob_flow_euler;
  throw ConfigError("unknown sampler '" + text + "' (expected reverse-sde-euler or prob-flow-euler)");
}

SamplerConfig geometric_sampler(SamplerKind kind, int Q, double sigma_max, double sigma_min, double step_scale) {
  require(Q >= 1, "sampler needs Q >= 1");
  require(sigma_max > 0.0 && sigma_min > 0.0 && (Q == 1 || sigma_max > sigma_min),
          "sampler needs sigma_max > sigma_min > 0");
  SamplerConfig config;
  config.kind = kind;
  config.Q = Q;
  config.step_scale = step_scale;
  config.schedule.resize(static_cast<std::size_t>(Q));
  for (int t = 0; t < Q; ++t) {
    const double frac = Q == 1 ? 0.0 : static_cast<double>(t) / (Q - 1);
    config.schedule[static_cast<std::size_t>(t)] = sigma_max * std::pow(sigma_min / sigma_max, frac);
  }
  validate(config);
  return config;
}

SamplerConfig default_sampler(const SupportSpec& spec, SamplerKind kind, int Q) {
  return geometric_sampler(kind, Q, 2.0 * spec.R * std::sqrt(static_cast<double>(spec.d)), spec.gamma / 10.0);
}

void validate(const SamplerConfig& config) {
  require(config.Q >= 1, "sampler needs Q >= 1");
  require(static_cast<int>(config.schedule.size()) == config.Q, "schedule length must equal Q");
  require(config.step_scale > 0.0, "step_scale must be positive");
  for (std::size_t t = 0; t < config.schedule.size(); ++t) {
    require(config.schedule[t] > 0.0, "schedule entries must be positive");
    if (t > 0) require(config.schedule[t] < config.schedule[t - 1], "schedule must be strictly decreasing");
  }
}

SamplerRun run_sampler(const SamplerConfig& config, QuerySession& session, std::uint64_t seed) {
  validate(config);
  const auto& spec = session.spec();
  const double gamma = spec.gamma;
  std::normal_distribution<double> normal;

  std::vector<double> x(static_cast<std::size_t>(spec.d));
  {
    Rng rng(derive_seed(seed, std::uint64_t{0}));
    const double sd = total_noise(gamma, config.schedule.front());
    for (auto& v : x) v = sd * normal(rng);
  }
  for (int t = 0; t < config.Q; ++t) {
    const double sigma = config.schedule[static_cast<std::size_t>(t)];
    const double tau = total_noise(gamma, sigma);
    const double tau_next =
        t + 1 < config.Q ? total_noise(gamma, config.schedule[static_cast<std::size_t>(t + 1)]) : gamma;
    const double step = tau * tau - tau_next * tau_next;
    const auto s = session.query(sigma, x);
    if (config.kind == SamplerKind::reverse_sde_euler) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t + 1)));
      normal.reset();
      const double noise = std::sqrt(step);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += config.step_scale * step * s[i] + noise * normal(rng);
    } else {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.5 * config.step_scale * step * s[i];
    }
  }
  return {x, session.transcript()};
}

bool in_separation_set(const Codebook& codebook, std::span<const double> x, double log_lambda_gamma) {
  return ell_max(codebook, codebook.spec.gamma, x).value >= log_lambda_gamma;
}

CouplingRecord coupled_run(std::shared_ptr<const Codebook> codebook, const OracleProfile& profile,
                           const SamplerConfig& config, std::uint64_t seed, SessionBudget budget,
                           std::shared_ptr<ThresholdCache> thresholds) {
  const auto& spec = codebook->spec;
  if (!thresholds) {
    thresholds = std::make_shared<ThresholdCache>(spec, profile, budget.threshold_samples,
                                                  derive_seed(seed, std::uint64_t{0x7A}));
  }
  auto null_session = open_null_session(spec, profile, seed);
  auto planted_session = open_planted_session(codebook, profile, seed, budget, thresholds);
  const auto null_run = run_sampler(config, null_session, seed);
  const auto planted_run = run_sampler(config, planted_session, seed);

  CouplingRecord record;
  record.seed = seed;
  record.rate = codebook->rate;
  record.Q = config.Q;
  const auto& a = null_run.transcript.entries;
  const auto& b = planted_run.transcript.entries;
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].answer != b[t].answer) {
      record.T = static_cast<int>(t);
      break;
    }
  }
  const std::size_t agree = record.T ? static_cast<std::size_t>(*record.T) : a.size();
  for (std::size_t t = 0; t < agree; ++t) {
    if (a[t].x != b[t].x || a[t].answer != b[t].answer) record.prefix_consistent = false;
  }
  if (record.T && a[agree].answer == b[agree].answer) record.prefix_consistent = false;
  record.outputs_equal = null_run.output == planted_run.output;
  const double log_lambda = thresholds->at(spec.gamma).log_lambda;
  record.a_set_hit_null = in_separation_set(*codebook, null_run.output, log_lambda);
  record.a_set_hit_planted = in_separation_set(*codebook, planted_run.output, log_lambda);
  return record;
}

SeparationResult separation_check(const Codebook& codebook, ThresholdCache& thresholds, const RatePacking& packing,
                                  std::span<const double> probe, std::size_t samples, int overlap_trials,
                                  std::uint64_t seed) {
  require(samples >= 10000, "separation_check needs at least 1e4 samples");
  require(overlap_trials >= 1, "separation_check needs overlap trials");
  require(!packing.sizes.empty(), "separation_check needs a nonempty packing");
  const auto& spec = codebook.spec;
  const double gamma = spec.gamma;
  SeparationResult out;
  out.n = codebook.n;
  out.rate = codebook.rate;
  out.zeta_gamma = thresholds.profile().zeta(gamma);
  out.log_lambda = thresholds.at(gamma).log_lambda;
  out.samples = samples;
  out.overlap_trials = overlap_trials;

  std::vector<char> hits(samples, 0);
  parallel_for(chunk_count(samples), [&](std::size_t c) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::vector<double> x(static_cast<std::size_t>(spec.d));
    const std::size_t begin = c * kMcChunk;
    const std::size_t end = std::min(samples, begin + kMcChunk);
    for (std::size_t i = begin; i < end; ++i) {
      sample_planted_point(codebook, gamma, rng, x);
      hits[i] = in_separation_set(codebook, x, out.log_lambda) ? 1 : 0;
    }
  });
  out.mass_coverage =
      static_cast<double>(std::count(hits.begin(), hits.end(), 1)) / static_cast<double>(samples);
  out.coverage_std_err = binomial_std_err(out.mass_coverage, samples);

  const auto overlap_seed = derive_seed(seed, std::uint64_t{0x0E});
  std::vector<char> lands(static_cast<std::size_t>(overlap_trials), 0);
  parallel_for(lands.size(), [&](std::size_t t) {
    Rng rng(derive_seed(overlap_seed, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<std::size_t> pick(0, packing.sizes.size() - 1);
    const auto n = static_cast<std::size_t>(packing.sizes[pick(rng)]);
    const auto fresh = sample_codebook(spec, n, rng());
    lands[t] = in_separation_set(fresh, probe, out.log_lambda) ? 1 : 0;
  });
  out.overlap = static_cast<double>(std::count(lands.begin(), lands.end(), 1)) / overlap_trials;
  out.overlap_std_err = binomial_std_err(out.overlap, lands.size());
  out.overlap_bound = static_cast<double>(packing.n_max) * std::exp(-out.log_lambda);
  return out;
}

}  // namespace scorelab
