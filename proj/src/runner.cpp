#include "scorelab/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "scorelab/adversary.hpp"
#include "scorelab/codebook.hpp"
#include "scorelab/csv.hpp"
#include "scorelab/error.hpp"
#include "scorelab/harness.hpp"
#include "scorelab/info_metrics.hpp"
#include "scorelab/mixture_score.hpp"
#include "scorelab/parallel.hpp"
#include "scorelab/random.hpp"
#include "scorelab/shell_proxy.hpp"

namespace scorelab {

namespace {

/// A config error tied to one JSON key, so text parsing can report its line.
struct KeyError : ConfigError {
  KeyError(std::string key_, const std::string& what) : ConfigError(what), key(std::move(key_)) {}
  std::string key;
};

template <typename Config, typename F>
void for_each_field(Config& c, F&& f) {
  f("experiment", c.experiment);
  f("kind", c.kind);
  f("d", c.d);
  f("R", c.R);
  f("gamma", c.gamma);
  f("regime", c.regime);
  f("p", c.p);
  f("eps_err", c.eps_err);
  f("rho", c.rho);
  f("Q", c.Q);
  f("trials", c.trials);
  f("samples", c.samples);
  f("n", c.n);
  f("tau_min", c.tau_min);
  f("tau_max", c.tau_max);
  f("tau_points", c.tau_points);
  f("C_list", c.C_list);
  f("d_list", c.d_list);
  f("sampler", c.sampler);
  f("sigma_max", c.sigma_max);
  f("sigma_min", c.sigma_min);
  f("n_min", c.n_min);
  f("n_max", c.n_max);
  f("w", c.w);
  f("threshold_samples", c.threshold_samples);
  f("gate_samples", c.gate_samples);
  f("overlap_trials", c.overlap_trials);
  f("probes", c.probes);
  f("replay_path", c.replay_path);
  f("seed", c.seed);
  f("output_dir", c.output_dir);
}

std::size_t line_of(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

const std::set<std::string> kExperiments = {"sweep",      "windows",    "audit", "coupling", "separation",
                                            "infochecks", "fig1",       "probe", "replay"};

}  // namespace

nlohmann::json to_json(const ExperimentConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for_each_field(config, [&](const char* name, const auto& value) { j[name] = value; });
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::set<std::string> known;
  for_each_field(base, [&](const char* name, auto& value) {
    known.insert(name);
    if (!doc.contains(name)) return;
    try {
      doc.at(name).get_to(value);
    } catch (const nlohmann::json::exception& e) {
      throw KeyError(name, std::string("key '") + name + "': wrong type (" + e.what() + ")");
    }
  });
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw KeyError(key, "unknown key '" + key + "'");
  }
  return base;
}

ExperimentConfig config_from_text(const std::string& text, ExperimentConfig base) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config line " + std::to_string(line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                      ": JSON syntax error: " + e.what());
  }
  try {
    return config_from_json(doc, std::move(base));
  } catch (const KeyError& e) {
    const auto pos = text.find("\"" + e.key + "\"");
    throw ConfigError("config line " + std::to_string(line_of(text, pos == std::string::npos ? 0 : pos)) + ": " +
                      e.what());
  }
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!kExperiments.count(c.experiment)) fail("unknown experiment '" + c.experiment + "'");
  if (c.experiment == "fig1" && c.d_list.empty()) fail("d_list must not be empty");
  if (c.trials < 1) fail("trials must be >= 1");
  if ((c.experiment == "sweep" || c.experiment == "fig1") && c.trials % 2 == 0) fail("trials must be odd");
  if (c.tau_points < 1) fail("tau_points must be >= 1");
  if (c.tau_points > 1 && !(c.tau_max > c.tau_min)) fail("tau_max must exceed tau_min");
  if (!(c.tau_min > 0.0)) fail("tau_min must be positive");
  if (c.C_list.empty()) fail("C_list must not be empty");
  if (c.n < 1) fail("n must be >= 1");
  if (c.n_min < 1 || c.n_max < c.n_min) fail("need 1 <= n_min <= n_max");
  if (!(c.w > 0.0)) fail("w must be positive");
  if (c.Q < 1) fail("Q must be >= 1");
  if (c.experiment == "replay" && c.replay_path.empty()) fail("replay needs replay_path");
  if (c.output_dir.empty()) fail("output_dir must not be empty");
  parse_support_kind(c.kind);
  parse_regime(c.regime);
  parse_sampler_kind(c.sampler);
}

namespace {

struct Output {
  std::string name;
  std::string content;
};

struct Produced {
  std::vector<Output> files;
  nlohmann::json extras = nlohmann::json::object();
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

SupportSpec spec_of(const ExperimentConfig& c) { return build_support(parse_support_kind(c.kind), c.d, c.R, c.gamma); }

OracleProfile profile_of(const ExperimentConfig& c, const SupportSpec& spec) {
  switch (parse_regime(c.regime)) {
    case Regime::lp: return lp_profile(spec, c.p, c.eps_err, c.rho, c.Q);
    case Regime::psi1: return psi1_profile(spec, c.eps_err, c.rho, c.Q);
    case Regime::exact: return exact_profile(spec);
  }
  return exact_profile(spec);
}

std::vector<double> tau_grid(const ExperimentConfig& c) {
  std::vector<double> taus(static_cast<std::size_t>(c.tau_points));
  for (int i = 0; i < c.tau_points; ++i) {
    const double frac = c.tau_points == 1 ? 0.0 : static_cast<double>(i) / (c.tau_points - 1);
    taus[static_cast<std::size_t>(i)] = c.tau_min * std::pow(c.tau_max / c.tau_min, frac);
  }
  return taus;
}

void add_curve_rows(CsvWriter& csv, const ProxyCurve& curve) {
  for (std::size_t i = 0; i < curve.log_tau_grid.size(); ++i) {
    csv.add(curve.d).add(curve.rho).add(curve.trials).add(curve.seed);
    csv.add(curve.log_tau_grid[i]).add(curve.median_signal[i]);
    csv.end_row();
  }
}

double argmax_ln_tau(const ProxyCurve& curve) {
  const auto it = std::max_element(curve.median_signal.begin(), curve.median_signal.end());
  return curve.log_tau_grid[static_cast<std::size_t>(it - curve.median_signal.begin())];
}

Produced run_sweep_experiment(const ExperimentConfig& c) {
  const auto curve = run_sweep(c.d, c.rho, c.trials, c.seed);
  CsvWriter csv(csv_schema("sweep"));
  add_curve_rows(csv, curve);
  Produced out;
  out.files.push_back({"sweep.csv", csv.str()});
  out.extras = {{"q_rho", curve.q_rho},
                {"tau_star", curve.tau_star},
                {"argmax_ln_tau", argmax_ln_tau(curve)},
                {"clamp_events", curve.clamp_events},
                {"resample_events", curve.resample_events}};
  return out;
}

Produced run_fig1(const ExperimentConfig& c) {
  CsvWriter curves(csv_schema("sweep"));
  CsvWriter scaling(csv_schema("scaling"));
  std::vector<double> widths;
  nlohmann::json per_d = nlohmann::json::array();
  double q_rho = 0.0;
  double tau_star = 0.0;
  for (int d : c.d_list) {
    const auto curve = run_sweep(d, c.rho, c.trials, c.seed);
    q_rho = curve.q_rho;
    tau_star = curve.tau_star;
    add_curve_rows(curves, curve);
    double width = 0.0;
    try {
      width = fwhm(curve.log_tau_grid, curve.median_signal);
    } catch (const DomainError& e) {
      throw DomainError("d=" + std::to_string(d) + ": " + e.what());
    }
    widths.push_back(width);
    per_d.push_back({{"d", d}, {"fwhm", width}, {"argmax_ln_tau", argmax_ln_tau(curve)},
                     {"clamp_events", curve.clamp_events}});
  }
  std::optional<ScalingFit> fit;
  if (c.d_list.size() >= 3) fit = fit_scaling(c.d_list, widths);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    scaling.add("data").add(c.d_list[i]).add(widths[i]).add(1.0 / std::sqrt(static_cast<double>(c.d_list[i])));
    scaling.add("").add("").add("");
    scaling.end_row();
  }
  if (fit) {
    scaling.add("fit").add("").add("").add("").add(fit->slope).add(fit->intercept).add(fit->r_squared);
    scaling.end_row();
  }
  Produced out;
  out.files.push_back({"curves.csv", curves.str()});
  out.files.push_back({"scaling.csv", scaling.str()});
  out.extras = {{"q_rho", q_rho}, {"tau_star", tau_star}, {"per_d", per_d}};
  if (fit) out.extras["fit"] = {{"slope", fit->slope}, {"intercept", fit->intercept}, {"r_squared", fit->r_squared}};
  return out;
}

Produced run_windows(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto profile = profile_of(c, spec);
  const auto taus = tau_grid(c);
  CsvWriter csv(csv_schema("windows"));
  for (double C : c.C_list) {
    std::vector<RateWindow> windows(taus.size());
    parallel_for(taus.size(), [&](std::size_t i) {
      windows[i] = compute_window(spec, profile, taus[i], c.threshold_samples, c.seed, C);
    });
    for (const auto& w : windows) {
      csv.add(w.tau).add(w.kappa_minus).add(w.kappa_plus).add(w.width).add(w.I_hat).add(w.log_lambda);
      csv.add(w.delta).add(to_string(profile.regime)).add(profile.p).add(profile.eps_err).add(profile.rho);
      csv.add(profile.Q).add(w.zeta).add(w.theta).add(w.H).add(w.C).add(to_string(w.method));
      csv.end_row();
    }
  }
  Produced out;
  out.files.push_back({"windows.csv", csv.str()});
  return out;
}

Produced run_audit(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto profile = profile_of(c, spec);
  auto codebook = std::make_shared<const Codebook>(sample_codebook(spec, c.n, derive_seed(c.seed, std::uint64_t{1})));
  OracleSession session(codebook, profile, c.seed, {c.threshold_samples, c.gate_samples});
  CsvWriter csv(csv_schema("audit"));
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double tau : tau_grid(c)) {
    const auto seed = derive_seed(c.seed, tau);
    const auto a = accuracy_audit(session, tau, c.samples, seed);
    auto head = [&](const char* statistic) {
      csv.add(tau).add(to_string(a.regime)).add(to_string(a.gate.decision)).add(a.gate.J_estimate);
      csv.add(a.gate.std_err).add(a.gate.theta).add(statistic);
    };
    head("lp_moment");
    csv.add(nan).add(a.lp_moment).add(a.lp_std_err).add(a.lp_bound).add(a.samples).add(seed);
    csv.end_row();
    head("good_set_max_error");
    csv.add(nan).add(a.good_set_max_error).add(0.0).add(0.0).add(a.samples).add(seed);
    csv.end_row();
    for (std::size_t k = 0; k < a.z.size(); ++k) {
      head("survival");
      csv.add(a.z[k]).add(a.survival[k]).add(a.survival_std_err[k]).add(a.survival_bound[k]).add(a.samples).add(seed);
      csv.end_row();
    }
  }
  Produced out;
  out.files.push_back({"audit.csv", csv.str()});
  out.extras = {{"codebook_hash", hex64(codebook->hash())}, {"n", c.n}};
  return out;
}

SamplerConfig sampler_of(const ExperimentConfig& c, const SupportSpec& spec) {
  const double sigma_max = c.sigma_max > 0.0 ? c.sigma_max : 2.0 * spec.R * std::sqrt(static_cast<double>(spec.d));
  const double sigma_min = c.sigma_min > 0.0 ? c.sigma_min : spec.gamma / 10.0;
  return geometric_sampler(parse_sampler_kind(c.sampler), c.Q, sigma_max, sigma_min);
}

Produced run_coupling(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto profile = profile_of(c, spec);
  const auto sampler = sampler_of(c, spec);
  const auto packing = pack_rates(spec.d, c.n_min, c.n_max, c.w);
  const SessionBudget budget{c.threshold_samples, c.gate_samples};
  auto thresholds = std::make_shared<ThresholdCache>(spec, profile, c.threshold_samples,
                                                     derive_seed(c.seed, std::uint64_t{0x7A}));
  std::vector<CouplingRecord> records(static_cast<std::size_t>(c.trials));
  parallel_for(records.size(), [&](std::size_t t) {
    const auto trial_seed = derive_seed(c.seed, static_cast<std::uint64_t>(t));
    Rng rng(trial_seed);
    std::uniform_int_distribution<std::size_t> pick(0, packing.sizes.size() - 1);
    const auto n = static_cast<std::size_t>(packing.sizes[pick(rng)]);
    auto codebook = std::make_shared<const Codebook>(sample_codebook(spec, n, rng()));
    records[t] = coupled_run(codebook, profile, sampler, trial_seed, budget, thresholds);
  });
  CsvWriter csv(csv_schema("coupling"));
  int diverged = 0;
  for (const auto& r : records) {
    csv.add(r.seed).add(r.rate).add(r.Q).add(r.T ? std::to_string(*r.T) : std::string("inf"));
    csv.add(static_cast<int>(r.outputs_equal)).add(static_cast<int>(r.a_set_hit_null));
    csv.add(static_cast<int>(r.a_set_hit_planted));
    csv.end_row();
    diverged += r.T ? 1 : 0;
  }
  Produced out;
  out.files.push_back({"coupling.csv", csv.str()});
  out.extras = {{"divergence_rate", static_cast<double>(diverged) / c.trials},
                {"Q_delta", c.Q * profile.delta()},
                {"packing_sizes", packing.sizes}};
  return out;
}

Produced run_separation(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto profile = profile_of(c, spec);
  const auto packing = pack_rates(spec.d, c.n_min, c.n_max, c.w);
  const auto codebook = sample_codebook(spec, c.n, derive_seed(c.seed, std::uint64_t{1}));
  ThresholdCache thresholds(spec, profile, c.threshold_samples, derive_seed(c.seed, std::uint64_t{0x7A}));
  // A fixed probe drawn once from the null law at the base noise level.
  std::vector<double> probe(static_cast<std::size_t>(spec.d));
  {
    Rng rng(derive_seed(c.seed, std::uint64_t{3}));
    const auto anchor = sample_codebook(spec, 1, rng());
    sample_planted_point(anchor, spec.gamma, rng, probe);
  }
  const auto r = separation_check(codebook, thresholds, packing, probe, c.samples, c.overlap_trials,
                                  derive_seed(c.seed, std::uint64_t{2}));
  CsvWriter csv(csv_schema("separation"));
  csv.add(static_cast<std::uint64_t>(r.n)).add(r.rate).add(r.zeta_gamma).add(r.log_lambda).add(r.mass_coverage);
  csv.add(r.coverage_std_err).add(r.overlap).add(r.overlap_std_err).add(r.overlap_bound);
  csv.add(static_cast<std::uint64_t>(r.samples)).add(c.seed);
  csv.end_row();
  Produced out;
  out.files.push_back({"separation.csv", csv.str()});
  return out;
}

Produced run_infochecks(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto codebook = sample_codebook(spec, c.n, derive_seed(c.seed, std::uint64_t{1}));
  const auto taus = tau_grid(c);
  const auto seed_I = derive_seed(c.seed, std::uint64_t{10});
  const auto seed_J = derive_seed(c.seed, std::uint64_t{11});
  const auto seed_KL = derive_seed(c.seed, std::uint64_t{12});
  CsvWriter csv(csv_schema("infochecks"));
  const auto spec_hash = hex64(spec.hash());
  const auto cb_hash = hex64(codebook.hash());
  for (double tau : taus) {
    const auto rows = {std::pair{estimate_I(spec, tau, c.samples, seed_I), seed_I},
                       std::pair{estimate_J(codebook, tau, c.samples, seed_J), seed_J},
                       std::pair{estimate_KL(codebook, tau, c.samples, seed_KL), seed_KL}};
    for (const auto& [est, seed] : rows) {
      csv.add(spec_hash).add(cb_hash).add(tau).add(to_string(est.quantity)).add(est.value).add(est.std_err);
      csv.add(static_cast<std::uint64_t>(est.samples)).add(seed);
      csv.end_row();
    }
  }
  Produced out;
  out.files.push_back({"infochecks.csv", csv.str()});
  return out;
}

Produced run_probe(const ExperimentConfig& c) {
  const auto spec = spec_of(c);
  const auto codebook = sample_codebook(spec, c.n, derive_seed(c.seed, std::uint64_t{1}));
  CsvWriter csv(csv_schema("probe"));
  Rng rng(derive_seed(c.seed, std::uint64_t{4}));
  std::normal_distribution<double> normal;
  std::vector<double> x(static_cast<std::size_t>(spec.d));
  for (int i = 0; i < c.probes; ++i) {
    for (auto& v : x) v = spec.R * normal(rng);
    const auto hash = fnv1a_hex(std::string_view(reinterpret_cast<const char*>(x.data()), x.size() * sizeof(double)));
    for (double tau : tau_grid(c)) {
      const auto eval = planted_eval(codebook, tau, x);
      csv.add(hash).add(tau).add(eval.log_density).add(euclidean_norm(eval.score));
      csv.end_row();
    }
  }
  Produced out;
  out.files.push_back({"probe.csv", csv.str()});
  return out;
}

Produced run_replay(const ExperimentConfig& c) {
  std::ifstream in(c.replay_path);
  if (!in) throw ConfigError("cannot open replay file " + c.replay_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("replay file: " + std::string(e.what()));
  }
  const auto spec = spec_of(c);
  const auto profile = profile_of(c, spec);
  const std::string instance = doc.value("instance", std::string("planted"));
  if (instance != "null" && instance != "planted") throw ConfigError("replay instance must be null or planted");
  auto session = instance == "null"
                     ? open_null_session(spec, profile, c.seed)
                     : open_planted_session(std::make_shared<const Codebook>(
                                                sample_codebook(spec, c.n, derive_seed(c.seed, std::uint64_t{1}))),
                                            profile, c.seed, {c.threshold_samples, c.gate_samples});
  if (!doc.contains("queries") || !doc["queries"].is_array()) throw ConfigError("replay file needs a queries array");
  for (const auto& q : doc["queries"]) {
    const auto x = q.at("x").get<std::vector<double>>();
    session.query(q.at("sigma").get<double>(), x);
  }
  Produced out;
  out.files.push_back({"transcript.json", to_json(session.transcript()).dump(2) + "\n"});
  return out;
}

Produced dispatch(const ExperimentConfig& c) {
  if (c.experiment == "sweep") return run_sweep_experiment(c);
  if (c.experiment == "fig1") return run_fig1(c);
  if (c.experiment == "windows") return run_windows(c);
  if (c.experiment == "audit") return run_audit(c);
  if (c.experiment == "coupling") return run_coupling(c);
  if (c.experiment == "separation") return run_separation(c);
  if (c.experiment == "infochecks") return run_infochecks(c);
  if (c.experiment == "probe") return run_probe(c);
  if (c.experiment == "replay") return run_replay(c);
  throw ConfigError("unknown experiment '" + c.experiment + "'");
}

}  // namespace

RunResult run(const ExperimentConfig& config) {
  validate(config);
  const std::filesystem::path dir(config.output_dir);
  RunResult result;
  try {
    auto produced = dispatch(config);
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : produced.files) {
      const auto path = dir / f.name;
      write_file_atomic(path, f.content);
      result.files.push_back(path);
      files.push_back({{"name", f.name}, {"fnv1a64", fnv1a_hex(f.content)}, {"bytes", f.content.size()}});
    }
    const auto config_text = to_json(config).dump(2) + "\n";
    write_file_atomic(dir / "config.json", config_text);
    result.files.push_back(dir / "config.json");
    result.manifest = {{"experiment", config.experiment},
                       {"seed", config.seed},
                       {"config", to_json(config)},
                       {"config_fnv1a64", fnv1a_hex(config_text)},
                       {"files", files},
                       {"extras", produced.extras}};
    write_file_atomic(dir / "manifest.json", result.manifest.dump(2) + "\n");
    result.files.push_back(dir / "manifest.json");
  } catch (...) {
    std::error_code ec;
    for (const auto& f : result.files) std::filesystem::remove(f, ec);
    throw;
  }
  return result;
}

}  // namespace scorelab
