#pragma once

// Scenario runner: configuration, execution and persistence.
//
// A scenario is a named experiment pipeline over one configuration. Runs are
// deterministic given (config, seed): replicates use replicate-keyed streams
// and aggregation is order-fixed, so the numeric blocks of a report are
// byte-identical across repeated runs and thread counts. Wall-clock timing is
// kept outside the deterministic blocks.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisoreg/assumptions.hpp"
#include "anisoreg/estimators.hpp"
#include "anisoreg/io.hpp"
#include "anisoreg/risk.hpp"
#include "anisoreg/sampling.hpp"
#include "anisoreg/spectrum.hpp"
#include "anisoreg/theory.hpp"

namespace anisoreg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scenario {
  inflation,
  ridge_sweep,
  data_split,
  spiked,
  unbiased_divergence,
  direction_shrink,
  theory_check,
  moments_check,
};

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::inflation: return "inflation";
    case Scenario::ridge_sweep: return "ridge_sweep";
    case Scenario::data_split: return "data_split";
    case Scenario::spiked: return "spiked";
    case Scenario::unbiased_divergence: return "unbiased_divergence";
    case Scenario::direction_shrink: return "direction_shrink";
    case Scenario::theory_check: return "theory_check";
    case Scenario::moments_check: return "moments_check";
  }
  return "?";
}

inline std::vector<std::string> scenario_names() {
  return {"inflation",          "ridge_sweep",     "data_split",
          "spiked",             "unbiased_divergence", "direction_shrink",
          "theory_check",       "moments_check"};
}

inline Scenario scenario_from_string(const std::string& name) {
  const auto names = scenario_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<Scenario>(i);
  throw ConfigError("unknown scenario: " + name);
}

struct SpectrumConfig {
  std::string constructor = "block";  // block | power_law | two_regime | spiked | isotropic
  int d = 0;
  double q = 0.1;
  double a = 0.5;
  double a_min = 0.5, a0 = 1.0, a1 = 0.5, a2 = 0.5;
  double spike = 0.0;
};

struct BetaConfig {
  std::string kind = "top_k";
  int k = 0;  // 0 = use n
};

struct NoiseConfig {
  std::string kind = "none";  // none | homoscedastic | heteroscedastic | rademacher
  double sigma2 = 0.0;
  double sigma0_2 = 0.0;
  double sigma_max2 = 0.0;
};

struct GridConfig {
  int inflation_points = 101;
  int ridge_negative = 25;
  int ridge_positive = 25;
  double ridge_neg_span = 0.9;
  double ridge_pos_span = 10.0;
};

// Verdict thresholds. A NaN threshold disables the corresponding check.
struct CheckConfig {
  double c_target = std::numeric_limits<double>::quiet_NaN();
  double c_target_abs = 0.05;
  double c_target_se = 3.0;
  double a_nd_band_se = std::numeric_limits<double>::quiet_NaN();
  double c_above_one_se = std::numeric_limits<double>::quiet_NaN();
  double g_ratio_max = std::numeric_limits<double>::quiet_NaN();
  double pred_rel_band = std::numeric_limits<double>::quiet_NaN();
  double pred_se_mult = 5.0;
  double max_runtime_s = std::numeric_limits<double>::quiet_NaN();
  bool ridge_checks = false;
  double argmin_positive_frac = 0.95;
  double fd_rel_tol = 0.05;
  double cstar_rel_band = std::numeric_limits<double>::quiet_NaN();
  double gds_band_q_mult = std::numeric_limits<double>::quiet_NaN();
  double min_gds_factor = std::numeric_limits<double>::quiet_NaN();
  double unbiased_ratio_min = std::numeric_limits<double>::quiet_NaN();
  double shrink_risk_min = std::numeric_limits<double>::quiet_NaN();
  double containment_se = 3.0;
  double proj_trace_tol = 1e-6;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::inflation;
  SpectrumConfig spectrum;
  BetaConfig beta;
  NoiseConfig noise;
  int n = 0;
  int replicates = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  int n_splits = 0;  // 0 = ceil(sqrt(n))
  GridConfig grid;
  SlackPolicy slack;
  bool write_spectrum = true;
  bool dump_design = false;
  int fail_replicate = -1;  // test hook: this replicate throws
  CheckConfig checks;
  std::vector<int> d_values;       // unbiased_divergence
  double shrink_c = 0.5;           // direction_shrink
  double alignment_ratio = 2.0;    // spiked: (b.v)/sigma
  int moments_dim = 5;
  long moments_draws = 200000;
};

// ---------------------------------------------------------------------------
// JSON round trip

namespace detail_cfg {

template <class T>
T get_or(const ordered_json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const std::exception& e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

inline double get_check(const ordered_json& j, const std::string& key, double fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<double>();
}

}  // namespace detail_cfg

inline ExperimentConfig parse_config(const ordered_json& j) {
  using detail_cfg::get_check;
  ExperimentConfig cfg;
  if (!j.contains("scenario")) throw ConfigError("missing field: scenario");
  cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  cfg.n = detail_cfg::get_or<int>(j, "n", 0);
  cfg.replicates = detail_cfg::get_or<int>(j, "replicates", 0);
  cfg.seed = detail_cfg::get_or<std::uint64_t>(j, "seed", 1);
  cfg.threads = detail_cfg::get_or<int>(j, "threads", 0);
  cfg.n_splits = detail_cfg::get_or<int>(j, "n_splits", 0);
  cfg.write_spectrum = detail_cfg::get_or<bool>(j, "write_spectrum", true);
  cfg.dump_design = detail_cfg::get_or<bool>(j, "dump_design", false);
  cfg.fail_replicate = detail_cfg::get_or<int>(j, "fail_replicate", -1);
  cfg.shrink_c = detail_cfg::get_or<double>(j, "shrink_c", 0.5);
  cfg.alignment_ratio = detail_cfg::get_or<double>(j, "alignment_ratio", 2.0);
  cfg.moments_dim = detail_cfg::get_or<int>(j, "moments_dim", 5);
  cfg.moments_draws = detail_cfg::get_or<long>(j, "moments_draws", 200000);
  if (j.contains("d_values")) cfg.d_values = j.at("d_values").get<std::vector<int>>();

  if (j.contains("spectrum")) {
    const auto& sj = j.at("spectrum");
    cfg.spectrum.constructor = detail_cfg::get_or<std::string>(sj, "constructor", "block");
    cfg.spectrum.d = detail_cfg::get_or<int>(sj, "d", 0);
    cfg.spectrum.q = detail_cfg::get_or<double>(sj, "q", 0.1);
    cfg.spectrum.a = detail_cfg::get_or<double>(sj, "a", 0.5);
    cfg.spectrum.a_min = detail_cfg::get_or<double>(sj, "a_min", 0.5);
    cfg.spectrum.a0 = detail_cfg::get_or<double>(sj, "a0", 1.0);
    cfg.spectrum.a1 = detail_cfg::get_or<double>(sj, "a1", 0.5);
    cfg.spectrum.a2 = detail_cfg::get_or<double>(sj, "a2", 0.5);
    cfg.spectrum.spike = detail_cfg::get_or<double>(sj, "spike", 0.0);
  }
  if (j.contains("beta")) {
    const auto& bj = j.at("beta");
    cfg.beta.kind = detail_cfg::get_or<std::string>(bj, "kind", "top_k");
    cfg.beta.k = detail_cfg::get_or<int>(bj, "k", 0);
  }
  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    cfg.noise.kind = detail_cfg::get_or<std::string>(nj, "kind", "none");
    cfg.noise.sigma2 = detail_cfg::get_or<double>(nj, "sigma2", 0.0);
    cfg.noise.sigma0_2 = detail_cfg::get_or<double>(nj, "sigma0_2", 0.0);
    cfg.noise.sigma_max2 = detail_cfg::get_or<double>(nj, "sigma_max2", 0.0);
  }
  if (j.contains("grid")) {
    const auto& gj = j.at("grid");
    cfg.grid.inflation_points = detail_cfg::get_or<int>(gj, "inflation_points", 101);
    cfg.grid.ridge_negative = detail_cfg::get_or<int>(gj, "ridge_negative", 25);
    cfg.grid.ridge_positive = detail_cfg::get_or<int>(gj, "ridge_positive", 25);
    cfg.grid.ridge_neg_span = detail_cfg::get_or<double>(gj, "ridge_neg_span", 0.9);
    cfg.grid.ridge_pos_span = detail_cfg::get_or<double>(gj, "ridge_pos_span", 10.0);
  }
  if (j.contains("slack")) {
    const auto& sj = j.at("slack");
    cfg.slack.o1_rel = detail_cfg::get_or<double>(sj, "o1_rel", 0.2);
    cfg.slack.theta_lower = detail_cfg::get_or<double>(sj, "theta_lower", 4.0);
  }
  if (j.contains("checks")) {
    const auto& cj = j.at("checks");
    auto& c = cfg.checks;
    c.c_target = get_check(cj, "c_target", c.c_target);
    c.c_target_abs = get_check(cj, "c_target_abs", c.c_target_abs);
    c.c_target_se = get_check(cj, "c_target_se", c.c_target_se);
    c.a_nd_band_se = get_check(cj, "a_nd_band_se", c.a_nd_band_se);
    c.c_above_one_se = get_check(cj, "c_above_one_se", c.c_above_one_se);
    c.g_ratio_max = get_check(cj, "g_ratio_max", c.g_ratio_max);
    c.pred_rel_band = get_check(cj, "pred_rel_band", c.pred_rel_band);
    c.pred_se_mult = get_check(cj, "pred_se_mult", c.pred_se_mult);
    c.max_runtime_s = get_check(cj, "max_runtime_s", c.max_runtime_s);
    c.ridge_checks = detail_cfg::get_or<bool>(cj, "ridge_checks", false);
    c.argmin_positive_frac = get_check(cj, "argmin_positive_frac", c.argmin_positive_frac);
    c.fd_rel_tol = get_check(cj, "fd_rel_tol", c.fd_rel_tol);
    c.cstar_rel_band = get_check(cj, "cstar_rel_band", c.cstar_rel_band);
    c.gds_band_q_mult = get_check(cj, "gds_band_q_mult", c.gds_band_q_mult);
    c.min_gds_factor = get_check(cj, "min_gds_factor", c.min_gds_factor);
    c.unbiased_ratio_min = get_check(cj, "unbiased_ratio_min", c.unbiased_ratio_min);
    c.shrink_risk_min = get_check(cj, "shrink_risk_min", c.shrink_risk_min);
    c.containment_se = get_check(cj, "containment_se", c.containment_se);
    c.proj_trace_tol = get_check(cj, "proj_trace_tol", c.proj_trace_tol);
  }
  return cfg;
}

inline ordered_json materialize(const ExperimentConfig& cfg) {
  ordered_json j;
  j["scenario"] = to_string(cfg.scenario);
  j["n"] = cfg.n;
  j["replicates"] = cfg.replicates;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["n_splits"] = cfg.n_splits;
  j["write_spectrum"] = cfg.write_spectrum;
  j["dump_design"] = cfg.dump_design;
  j["fail_replicate"] = cfg.fail_replicate;
  j["shrink_c"] = cfg.shrink_c;
  j["alignment_ratio"] = cfg.alignment_ratio;
  j["moments_dim"] = cfg.moments_dim;
  j["moments_draws"] = cfg.moments_draws;
  j["d_values"] = cfg.d_values;
  {
    ordered_json sj;
    sj["constructor"] = cfg.spectrum.constructor;
    sj["d"] = cfg.spectrum.d;
    sj["q"] = cfg.spectrum.q;
    sj["a"] = cfg.spectrum.a;
    sj["a_min"] = cfg.spectrum.a_min;
    sj["a0"] = cfg.spectrum.a0;
    sj["a1"] = cfg.spectrum.a1;
    sj["a2"] = cfg.spectrum.a2;
    sj["spike"] = cfg.spectrum.spike;
    j["spectrum"] = sj;
  }
  {
    ordered_json bj;
    bj["kind"] = cfg.beta.kind;
    bj["k"] = cfg.beta.k;
    j["beta"] = bj;
  }
  {
    ordered_json nj;
    nj["kind"] = cfg.noise.kind;
    nj["sigma2"] = cfg.noise.sigma2;
    nj["sigma0_2"] = cfg.noise.sigma0_2;
    nj["sigma_max2"] = cfg.noise.sigma_max2;
    j["noise"] = nj;
  }
  {
    ordered_json gj;
    gj["inflation_points"] = cfg.grid.inflation_points;
    gj["ridge_negative"] = cfg.grid.ridge_negative;
    gj["ridge_positive"] = cfg.grid.ridge_positive;
    gj["ridge_neg_span"] = cfg.grid.ridge_neg_span;
    gj["ridge_pos_span"] = cfg.grid.ridge_pos_span;
    j["grid"] = gj;
  }
  {
    ordered_json sj;
    sj["o1_rel"] = cfg.slack.o1_rel;
    sj["theta_lower"] = cfg.slack.theta_lower;
    j["slack"] = sj;
  }
  {
    ordered_json cj;
    auto put = [&](const char* key, double v) {
      if (std::isnan(v))
        cj[key] = nullptr;
      else
        cj[key] = v;
    };
    const auto& c = cfg.checks;
    put("c_target", c.c_target);
    cj["c_target_abs"] = c.c_target_abs;
    cj["c_target_se"] = c.c_target_se;
    put("a_nd_band_se", c.a_nd_band_se);
    put("c_above_one_se", c.c_above_one_se);
    put("g_ratio_max", c.g_ratio_max);
    put("pred_rel_band", c.pred_rel_band);
    cj["pred_se_mult"] = c.pred_se_mult;
    put("max_runtime_s", c.max_runtime_s);
    cj["ridge_checks"] = c.ridge_checks;
    cj["argmin_positive_frac"] = c.argmin_positive_frac;
    cj["fd_rel_tol"] = c.fd_rel_tol;
    put("cstar_rel_band", c.cstar_rel_band);
    put("gds_band_q_mult", c.gds_band_q_mult);
    put("min_gds_factor", c.min_gds_factor);
    put("unbiased_ratio_min", c.unbiased_ratio_min);
    put("shrink_risk_min", c.shrink_risk_min);
    cj["containment_se"] = c.containment_se;
    cj["proj_trace_tol"] = c.proj_trace_tol;
    j["checks"] = cj;
  }
  return j;
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.replicates < 2) throw ConfigError("replicates must be >= 2");
  if (cfg.n < 1) throw ConfigError("n must be >= 1");
  switch (cfg.scenario) {
    case Scenario::moments_check:
      if (cfg.moments_dim < 1 || cfg.moments_dim > 16)
        throw ConfigError("moments_dim must lie in [1, 16]");
      if (cfg.moments_draws < 2000) throw ConfigError("moments_draws must be >= 2000");
      break;
    case Scenario::unbiased_divergence:
      if (cfg.d_values.empty()) throw ConfigError("unbiased_divergence requires d_values");
      for (int d : cfg.d_values)
        if (d <= cfg.n) throw ConfigError("every d in d_values must exceed n");
      break;
    case Scenario::direction_shrink:
      if (cfg.spectrum.d <= cfg.n) throw ConfigError("spectrum.d must exceed n");
      if (!(cfg.spectrum.q > 0.0)) throw ConfigError("spectrum.q must be positive");
      break;
    case Scenario::spiked:
      if (cfg.spectrum.d <= cfg.n) throw ConfigError("spectrum.d must exceed n");
      if (!(cfg.spectrum.spike > 0.0)) throw ConfigError("spiked scenario needs spike > 0");
      if (!(cfg.alignment_ratio > 0.0)) throw ConfigError("alignment_ratio must be positive");
      break;
    case Scenario::data_split:
      if (cfg.spectrum.d <= cfg.n) throw ConfigError("spectrum.d must exceed n");
      if (cfg.n_splits == 1) throw ConfigError("n_splits must be 0 (auto) or >= 2");
      break;
    case Scenario::ridge_sweep:
      if (cfg.spectrum.d < cfg.n) throw ConfigError("spectrum.d must be >= n");
      break;
    default:
      if (cfg.spectrum.d <= cfg.n) throw ConfigError("spectrum.d must exceed n");
      break;
  }
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig cfg = parse_config(j);
  validate_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// Builders

inline Spectrum build_spectrum(const ExperimentConfig& cfg) {
  const auto& sc = cfg.spectrum;
  if (sc.constructor == "block") return make_block_spectrum(cfg.n, sc.d, sc.q);
  if (sc.constructor == "power_law")
    return make_power_law_spectrum(cfg.n, sc.d, sc.a, sc.q);
  if (sc.constructor == "two_regime")
    return make_two_regime_spectrum(cfg.n, sc.d, sc.q, sc.a_min, sc.a0, sc.a1, sc.a2);
  if (sc.constructor == "spiked") return make_spiked_spectrum(sc.d, sc.spike);
  if (sc.constructor == "isotropic") {
    Spectrum s = make_custom_spectrum(std::vector<double>(static_cast<std::size_t>(sc.d), 1.0),
                                      true);
    s.constructor = "isotropic";
    s.params = {{"d", double(sc.d)}};
    return s;
  }
  throw ConfigError("unknown spectrum constructor: " + sc.constructor);
}

inline BetaCoefficients build_beta(const ExperimentConfig& cfg, const Spectrum& s) {
  if (cfg.beta.kind == "top_k") {
    const int k = cfg.beta.k > 0 ? cfg.beta.k : std::min(cfg.n, s.dim());
    return make_beta_topk(s, k);
  }
  throw ConfigError("unknown beta kind: " + cfg.beta.kind);
}

inline NoiseModel build_noise(const ExperimentConfig& cfg) {
  const auto& nc = cfg.noise;
  if (nc.kind == "none") return NoiseModel::none();
  if (nc.kind == "homoscedastic") return NoiseModel::homoscedastic(nc.sigma2);
  if (nc.kind == "heteroscedastic")
    return NoiseModel::heteroscedastic(nc.sigma0_2, nc.sigma_max2);
  if (nc.kind == "rademacher") return NoiseModel::rademacher(nc.sigma2);
  throw ConfigError("unknown noise kind: " + nc.kind);
}

// Noise functional value entering the predictions: exact for the supported
// kinds (the heteroscedastic rule falls back to its unconditional moment).
inline double noise_sigma2_for_theory(const NoiseModel& noise, const Spectrum& s) {
  switch (noise.kind) {
    case NoiseModel::Kind::none: return 0.0;
    case NoiseModel::Kind::gaussian_homoscedastic:
    case NoiseModel::Kind::scaled_rademacher: return noise.sigma2;
    case NoiseModel::Kind::gaussian_heteroscedastic: return noise.second_moment(s);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Reports

struct CheckResult {
  std::string id;
  bool passed = false;
  double measured = 0.0;
  double required = 0.0;
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  std::uint64_t seed = 0;
  ordered_json config_echo;
  ordered_json results;
  std::vector<CheckResult> checks;
  std::vector<std::pair<std::string, RiskCurve>> curves;
  std::optional<RiskSummary> summary;
  std::optional<Spectrum> spectrum;
  std::optional<BetaCoefficients> beta;
  std::optional<NoiseModel> noise;
  int n = 0;
  double wall_seconds = 0.0;
  int failed_replicates = 0;

  bool all_passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return true;
  }
};

inline ordered_json to_json(const CheckResult& c) {
  ordered_json j;
  j["id"] = c.id;
  j["passed"] = c.passed;
  j["measured"] = c.measured;
  j["required"] = c.required;
  j["detail"] = c.detail;
  return j;
}

// The deterministic portion of a report: everything except timing. Runtime
// verdicts carry measured wall seconds, so they live in the timing section;
// they still count toward all_passed().
inline ordered_json deterministic_block(const ScenarioReport& rep) {
  ordered_json j;
  j["scenario"] = rep.scenario;
  j["seed"] = rep.seed;
  j["config"] = rep.config_echo;
  j["results"] = rep.results;
  ordered_json verdicts = ordered_json::array();
  for (const auto& c : rep.checks)
    if (c.id != "runtime") verdicts.push_back(to_json(c));
  j["verdicts"] = verdicts;
  j["failed_replicates"] = rep.failed_replicates;
  return j;
}

inline ordered_json report_json(const ScenarioReport& rep) {
  ordered_json j = deterministic_block(rep);
  ordered_json timing;
  timing["wall_seconds"] = rep.wall_seconds;
  for (const auto& c : rep.checks)
    if (c.id == "runtime") timing["runtime_check"] = to_json(c);
  j["timing"] = timing;
  return j;
}

inline void write_report(const ScenarioReport& rep, const std::filesystem::path& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  {
    std::ofstream out(outdir / "report.json", std::ios::binary);
    out << report_json(rep).dump(2) << "\n";
  }
  for (const auto& [name, curve] : rep.curves) write_curve_csv(outdir / (name + ".csv"), curve);
  if (rep.summary) write_summary_csv(outdir / "risk_summary.csv", *rep.summary);
  if (rep.spectrum) {
    std::ofstream out(outdir / "spectrum.json", std::ios::binary);
    out << spectrum_header_json(*rep.spectrum, rep.n).dump(2) << "\n";
    write_spectrum_csv(outdir / "spectrum.csv", *rep.spectrum);
  }
  if (rep.beta && rep.noise && rep.spectrum) {
    // replicate 0 sample dump, gated by the config flag
    const ordered_json& cfg = rep.config_echo;
    if (cfg.contains("dump_design") && cfg.at("dump_design").get<bool>()) {
      RngStream stream(rep.seed, 0, StreamPurpose::design);
      const DesignSample sample = sample_design(*rep.spectrum, rep.n, *rep.noise, *rep.beta,
                                                stream, 0);
      write_design_csv(outdir / "design_replicate0.csv", sample);
    }
  }
}

inline std::filesystem::path report_directory(const std::filesystem::path& base,
                                              const ScenarioReport& rep) {
  return base / (rep.scenario + "-" + std::to_string(rep.seed));
}

// ---------------------------------------------------------------------------
// Shared verdict helpers

namespace detail_checks {

inline void add(std::vector<CheckResult>& out, const std::string& id, bool passed,
                double measured, double required, const std::string& detail) {
  out.push_back({id, passed, measured, required, detail});
}

}  // namespace detail_checks

// ---------------------------------------------------------------------------
// Scenario implementations

namespace detail_scenarios {

inline McOptions mc_options(const ExperimentConfig& cfg) {
  McOptions opt;
  opt.replicates = cfg.replicates;
  opt.seed = cfg.seed;
  opt.threads = cfg.threads;
  opt.fail_replicate = cfg.fail_replicate;
  return opt;
}

// Moment summary of the minimum-norm interpolator plus empirical vertex,
// inflation curve and the closed-form prediction. Shared by the inflation and
// spiked scenarios.
inline void run_vertex_pipeline(const ExperimentConfig& cfg, const Spectrum& s,
                                const BetaCoefficients& beta, const NoiseModel& noise,
                                ScenarioReport& rep) {
  const double sigma2 = noise_sigma2_for_theory(noise, s);
  const TheoryPrediction pred = c_opt_prediction(s, beta, cfg.n, sigma2);

  const McOptions opt = detail_scenarios::mc_options(cfg);
  const RiskSummary rs = mc_risk_summary(
      s, beta, noise, cfg.n,
      [](const DesignSample& sample) { return min_norm(sample, gram_factorize(sample)); },
      opt);
  const COpt copt = empirical_c_opt(rs);
  const RiskCurve curve =
      inflation_curve(rs, default_inflation_grid(pred.c_opt_pred, cfg.grid.inflation_points));

  const double g1 = rs.g_at(1.0);
  const double gc = rs.g_at(copt.c_hat);
  rep.failed_replicates = rs.failures;
  rep.summary = rs;
  rep.results["risk_summary"] = to_json(rs);
  rep.results["c_hat"] = copt.c_hat;
  rep.results["c_hat_se"] = copt.se;
  rep.results["g_at_one"] = g1;
  rep.results["g_at_c_hat"] = gc;
  rep.results["g_ratio"] = gc / g1;
  rep.results["theory"] = to_json(pred);
  if (s.trace_normalized) {
    const AssumptionReport weak =
        check_assumptions(s, beta, cfg.n, sigma2, noise.sigma_max2, AssumptionSet::weak);
    rep.results["assumptions_weak"] = to_json(weak);
  }
  rep.results["functionals"] = to_json(functionals(s, cfg.n));
  rep.curves.emplace_back("inflation_curve", curve);

  const auto& c = cfg.checks;
  auto& out = rep.checks;
  if (!std::isnan(c.c_target)) {
    const double tol = std::max(c.c_target_abs, c.c_target_se * copt.se);
    detail_checks::add(out, "c_hat_target", std::abs(copt.c_hat - c.c_target) <= tol,
                       copt.c_hat, c.c_target,
                       "tolerance " + fmt_double(tol));
  }
  if (!std::isnan(c.a_nd_band_se)) {
    const double target = double(cfg.n) / s.dim();
    const double tol = c.a_nd_band_se * rs.a_se;
    detail_checks::add(out, "a_mean_nd", std::abs(rs.a_mean - target) <= tol, rs.a_mean,
                       target, "tolerance " + fmt_double(tol));
  }
  if (!std::isnan(c.c_above_one_se)) {
    const double margin = copt.se > 0.0 ? (copt.c_hat - 1.0) / copt.se
                                        : std::numeric_limits<double>::infinity();
    detail_checks::add(out, "c_hat_above_one", margin >= c.c_above_one_se, margin,
                       c.c_above_one_se, "c_hat " + fmt_double(copt.c_hat));
  }
  if (!std::isnan(c.g_ratio_max)) {
    detail_checks::add(out, "g_ratio", gc / g1 <= c.g_ratio_max, gc / g1, c.g_ratio_max, "");
  }
  if (!std::isnan(c.pred_rel_band)) {
    const double rel_se = copt.c_hat != 0.0 ? copt.se / std::abs(copt.c_hat) : 0.0;
    const double tol = std::max(c.pred_rel_band, c.pred_se_mult * rel_se);
    const double gap = std::abs(copt.c_hat - pred.c_opt_pred) / pred.c_opt_pred;
    detail_checks::add(out, "prediction_agreement", gap <= tol, gap, tol,
                       "c_hat " + fmt_double(copt.c_hat) + " pred " +
                           fmt_double(pred.c_opt_pred));
  }
}

inline void run_inflation(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const Spectrum s = build_spectrum(cfg);
  const BetaCoefficients beta = build_beta(cfg, s);
  const NoiseModel noise = build_noise(cfg);
  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;
  run_vertex_pipeline(cfg, s, beta, noise, rep);
}

inline void run_spiked(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const Spectrum s = make_spiked_spectrum(cfg.spectrum.d, cfg.spectrum.spike);
  // Signal aligned with the spike direction and normalized; the noise level
  // is fixed by the requested alignment ratio (b.v)/sigma.
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(s.dim());
  raw[0] = 1.0;
  const BetaCoefficients beta = make_beta_custom(s, raw, true);
  const double beta_dot_v = beta.coeffs[0] * std::sqrt(cfg.spectrum.spike);
  const double sigma = beta_dot_v / cfg.alignment_ratio;
  const NoiseModel noise = NoiseModel::homoscedastic(sigma * sigma);

  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;
  rep.results["spike_norm2"] = cfg.spectrum.spike;
  rep.results["spike_cap"] = 0.1 * double(cfg.spectrum.d) / cfg.n;
  rep.results["spike_within_cap"] = cfg.spectrum.spike <= 0.1 * double(cfg.spectrum.d) / cfg.n;
  rep.results["beta_dot_v"] = beta_dot_v;
  rep.results["sigma2"] = sigma * sigma;
  run_vertex_pipeline(cfg, s, beta, noise, rep);
}

inline void run_ridge_sweep(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const Spectrum s = build_spectrum(cfg);
  const BetaCoefficients beta = build_beta(cfg, s);
  const NoiseModel noise = build_noise(cfg);
  const double sigma2 = noise_sigma2_for_theory(noise, s);
  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;

  const McOptions opt = mc_options(cfg);
  const std::vector<double> grid =
      default_ridge_grid(s, beta, cfg.n, opt, cfg.grid.ridge_negative, cfg.grid.ridge_positive,
                         cfg.grid.ridge_neg_span, cfg.grid.ridge_pos_span);
  const RidgeSweepResult sweep = ridge_sweep(s, beta, sigma2, cfg.n, grid, opt);
  rep.failed_replicates = sweep.failures;
  rep.curves.emplace_back("ridge_curve", sweep.curve);
  rep.results["argmin_positive"] = sweep.argmin_positive;
  rep.results["argmin_negative"] = sweep.argmin_negative;
  rep.results["deriv_negative"] = sweep.deriv_negative;
  rep.results["fd_max_rel_err"] = sweep.fd_max_rel_err;
  rep.results["replicates"] = sweep.replicates;
  int total_skips = 0;
  for (int k : sweep.skips) total_skips += k;
  rep.results["grid_skips_total"] = total_skips;
  rep.results["isotropic"] = sweep.isotropic;

  if (cfg.checks.ridge_checks) {
    auto& out = rep.checks;
    const double repl = sweep.replicates;
    detail_checks::add(out, "derivative_negative_all",
                       sweep.isotropic && sweep.deriv_negative == sweep.replicates,
                       double(sweep.deriv_negative), repl, "replicates with slope < 0 at 0");
    detail_checks::add(out, "argmin_positive_frac",
                       sweep.argmin_positive >= cfg.checks.argmin_positive_frac * repl,
                       double(sweep.argmin_positive) / repl, cfg.checks.argmin_positive_frac,
                       "");
    detail_checks::add(out, "fd_derivative_match",
                       sweep.isotropic && sweep.fd_max_rel_err <= cfg.checks.fd_rel_tol,
                       sweep.fd_max_rel_err, cfg.checks.fd_rel_tol, "");
  }
}

inline void run_data_split(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const Spectrum s = build_spectrum(cfg);
  const BetaCoefficients beta = build_beta(cfg, s);
  const NoiseModel noise = build_noise(cfg);
  const double sigma2 = noise_sigma2_for_theory(noise, s);
  const int n_splits = cfg.n_splits > 0 ? cfg.n_splits : default_split_count(cfg.n);
  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;

  const double signal = signal_energy(beta, s);
  const McOptions opt = mc_options(cfg);
  // Per replicate: [a_ds, b_ds, c_hat_star, risk(c_hat_star * theta_ds), a_mn, b_mn]
  const McStats st = mc_collect(
      6,
      [&](int r) {
        RngStream stream(opt.seed, static_cast<std::uint64_t>(r), StreamPurpose::design);
        const DesignSample sample = sample_design(s, cfg.n, noise, beta, stream, r);
        const DataSplit ds = data_split(sample, n_splits);
        const double a_ds = signal_dot(ds.theta_ds, beta, s);
        const double b_ds = quadratic_energy(ds.theta_ds, s);
        const double c_hat_star = estimate_c_star(
            ds.theta_ds, sample.x.middleRows(ds.holdout_begin, ds.holdout_size),
            sample.y.segment(ds.holdout_begin, ds.holdout_size));
        const double risk_chat = signal - 2.0 * c_hat_star * a_ds +
                                 c_hat_star * c_hat_star * b_ds;
        const GramFactor gf = gram_factorize(sample);
        const EstimateVector mn = min_norm(sample, gf);
        Eigen::VectorXd out(6);
        out << a_ds, b_ds, c_hat_star, risk_chat, signal_dot(mn, beta, s),
            quadratic_energy(mn, s);
        return out;
      },
      opt);

  rep.failed_replicates = st.failures;
  const double a_ds = st.mean[0], b_ds = st.mean[1];
  const double chat_mean = st.mean[2], chat_se = st.se[2];
  const double g_chat_ds = st.mean[3], g_chat_ds_se = st.se[3];
  const double a_mn = st.mean[4], b_mn = st.mean[5];

  const double c_star_mc = a_ds / b_ds;
  const double min_g_ds = signal - a_ds * a_ds / b_ds;
  const double c_opt_mn = a_mn / b_mn;
  const double g_copt_mn = signal - a_mn * a_mn / b_mn;
  // Delta-method standard error of signal - a^2/b at the minimum-norm moments.
  const double da = -2.0 * a_mn / b_mn;
  const double db = a_mn * a_mn / (b_mn * b_mn);
  const double var_g_copt = da * da * st.cov_mean(4, 4) + db * db * st.cov_mean(5, 5) +
                            2.0 * da * db * st.cov_mean(4, 5);
  const double g_copt_se = var_g_copt > 0.0 ? std::sqrt(var_g_copt) : 0.0;

  const SpectrumFunctionals f = functionals(s, cfg.n);
  const TheoryPrediction pred = c_opt_prediction(s, beta, cfg.n, sigma2);

  rep.results["n_splits"] = n_splits;
  rep.results["a_ds_mean"] = a_ds;
  rep.results["a_ds_se"] = st.se[0];
  rep.results["b_ds_mean"] = b_ds;
  rep.results["b_ds_se"] = st.se[1];
  rep.results["c_star_mc"] = c_star_mc;
  rep.results["c_hat_star_mean"] = chat_mean;
  rep.results["c_hat_star_se"] = chat_se;
  rep.results["g_chat_theta_ds"] = g_chat_ds;
  rep.results["g_chat_theta_ds_se"] = g_chat_ds_se;
  rep.results["min_g_theta_ds"] = min_g_ds;
  rep.results["c_opt_mn"] = c_opt_mn;
  rep.results["g_copt_theta_mn"] = g_copt_mn;
  rep.results["g_copt_theta_mn_se"] = g_copt_se;
  rep.results["q"] = pred.q;
  rep.results["noise_rank"] = (1.0 + sigma2) * cfg.n * f.r_n;
  rep.results["theory"] = to_json(pred);

  const auto& c = cfg.checks;
  auto& out = rep.checks;
  if (!std::isnan(c.cstar_rel_band)) {
    const double gap = std::abs(chat_mean - c_star_mc);
    detail_checks::add(out, "c_hat_star_consistent", gap <= c.cstar_rel_band * c_star_mc, gap,
                       c.cstar_rel_band * c_star_mc,
                       "c_hat_star mean " + fmt_double(chat_mean) + " vs c* " +
                           fmt_double(c_star_mc));
  }
  if (!std::isnan(c.gds_band_q_mult)) {
    const double pooled = std::sqrt(g_chat_ds_se * g_chat_ds_se + g_copt_se * g_copt_se);
    const double bound = g_copt_mn + c.gds_band_q_mult * pred.q + 3.0 * pooled;
    detail_checks::add(out, "g_split_near_optimal", g_chat_ds <= bound, g_chat_ds, bound,
                       "g_copt_mn " + fmt_double(g_copt_mn));
  }
  if (!std::isnan(c.min_gds_factor)) {
    const double bound = c.min_gds_factor * (1.0 + sigma2) * cfg.n * f.r_n;
    detail_checks::add(out, "min_g_split_floor", min_g_ds >= bound, min_g_ds, bound, "");
  }
}

inline void run_unbiased_divergence(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const NoiseModel noise = build_noise(cfg);
  std::vector<double> g_unbiased, g_unbiased_se, g_min_norm, ratios;
  for (int d : cfg.d_values) {
    const Spectrum s = make_block_spectrum(cfg.n, d, cfg.spectrum.q);
    const BetaCoefficients beta = make_beta_topk(s, cfg.n);
    const McOptions opt = mc_options(cfg);
    const McStats st = mc_collect(
        2,
        [&](int r) {
          RngStream stream(opt.seed, static_cast<std::uint64_t>(r), StreamPurpose::design);
          const DesignSample sample = sample_design(s, cfg.n, noise, beta, stream, r);
          const GramFactor gf = gram_factorize(sample);
          const EstimateVector mn = min_norm(sample, gf);
          const EstimateVector ub = unbiased_attempt(mn, s, cfg.n);
          Eigen::VectorXd out(2);
          out << excess_risk(ub, beta, s), excess_risk(mn, beta, s);
          return out;
        },
        opt);
    rep.failed_replicates += st.failures;
    g_unbiased.push_back(st.mean[0]);
    g_unbiased_se.push_back(st.se[0]);
    g_min_norm.push_back(st.mean[1]);
    ratios.push_back(st.mean[0] / st.mean[1]);
  }
  rep.results["d_values"] = cfg.d_values;
  rep.results["g_unbiased"] = g_unbiased;
  rep.results["g_unbiased_se"] = g_unbiased_se;
  rep.results["g_min_norm"] = g_min_norm;
  rep.results["ratio"] = ratios;

  auto& out = rep.checks;
  bool increasing = true;
  for (std::size_t i = 1; i < g_unbiased.size(); ++i)
    if (!(g_unbiased[i] > g_unbiased[i - 1])) increasing = false;
  detail_checks::add(out, "divergence_monotone", increasing,
                     g_unbiased.empty() ? 0.0 : g_unbiased.back(),
                     g_unbiased.empty() ? 0.0 : g_unbiased.front(),
                     "mean risk strictly increasing across d_values");
  if (!std::isnan(cfg.checks.unbiased_ratio_min) && !ratios.empty()) {
    detail_checks::add(out, "divergence_ratio", ratios.back() >= cfg.checks.unbiased_ratio_min,
                       ratios.back(), cfg.checks.unbiased_ratio_min, "at the largest d");
  }
}

inline void run_direction_shrink(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const int d = cfg.spectrum.d;
  const double q = cfg.spectrum.q;
  const double ratio = double(d) / cfg.n;
  // Adversarial pair: one large eigendirection carrying the whole signal and
  // a flat remainder filling the trace to d.
  const double top = q * ratio;
  const double tail = (d - top) / (d - 1);
  if (!(top > tail))
    throw ConfigError("direction_shrink: q d/n must exceed the flat tail level");
  std::vector<double> values(static_cast<std::size_t>(d), tail);
  values[0] = top;
  Spectrum s = make_custom_spectrum(values, false);
  s.trace_normalized = true;  // exact by construction up to rounding
  validate(s);
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(d);
  raw[0] = 1.0;
  const BetaCoefficients beta = make_beta_custom(s, raw, true);
  Eigen::VectorXd direction = Eigen::VectorXd::Zero(d);
  direction[0] = 1.0;
  const NoiseModel noise = NoiseModel::none();
  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;

  const double c = cfg.shrink_c;
  const McOptions opt = mc_options(cfg);
  const McStats st = mc_collect(
      2,
      [&](int r) {
        RngStream stream(opt.seed, static_cast<std::uint64_t>(r), StreamPurpose::design);
        const DesignSample sample = sample_design(s, cfg.n, noise, beta, stream, r);
        const GramFactor gf = gram_factorize(sample);
        const EstimateVector mn = min_norm(sample, gf);
        const EstimateVector sh = shrink_toward(mn, direction, c);
        Eigen::VectorXd out(2);
        out << excess_risk(sh, beta, s), excess_risk(mn, beta, s);
        return out;
      },
      opt);
  rep.failed_replicates = st.failures;

  const double v_sigma_v = top;  // direction energy under the covariance
  const double bound = std::isnan(cfg.checks.shrink_risk_min)
                           ? 0.5 * c * c * q * ratio
                           : cfg.checks.shrink_risk_min;
  rep.results["c"] = c;
  rep.results["v_sigma_v"] = v_sigma_v;
  rep.results["risk_shrunk_mean"] = st.mean[0];
  rep.results["risk_shrunk_se"] = st.se[0];
  rep.results["risk_min_norm_mean"] = st.mean[1];
  rep.results["bound"] = bound;
  detail_checks::add(rep.checks, "shrink_blowup", st.mean[0] >= bound, st.mean[0], bound,
                     "v'Sv = " + fmt_double(v_sigma_v));
}

inline void run_theory_check(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const Spectrum s = build_spectrum(cfg);
  const BetaCoefficients beta = build_beta(cfg, s);
  const NoiseModel noise = build_noise(cfg);
  const double sigma2 = noise_sigma2_for_theory(noise, s);
  rep.spectrum = s;
  rep.beta = beta;
  rep.noise = noise;

  const int d = s.dim();
  const std::vector<int> indices = {0, d / 2, d - 1};
  const BoundInterval tr1 = trace_inverse_bounds(s, cfg.n, 1, cfg.slack);
  const BoundInterval tr2 = trace_inverse_bounds(s, cfg.n, 2, cfg.slack);
  std::vector<BoundInterval> diag_bounds;
  for (int idx : indices) diag_bounds.push_back(projection_diag_bounds(s, cfg.n, idx, cfg.slack));
  const BoundInterval noise_b = noise_term_bounds(s, cfg.n, sigma2, cfg.slack);
  const BoundInterval psp_b = proj_sigma_proj_bounds(s, beta, cfg.n, cfg.slack);

  const McOptions opt = mc_options(cfg);
  // Per replicate: [trA1, trA2, diag x3, noise term, proj trace deviation, psp]
  const McStats st = mc_collect(
      8,
      [&](int r) {
        RngStream stream(opt.seed, static_cast<std::uint64_t>(r), StreamPurpose::design);
        const DesignSample sample = sample_design(s, cfg.n, noise, beta, stream, r);
        const GramFactor gf = gram_factorize(sample);
        const Eigen::MatrixXd inv =
            gf.solve_matrix(Eigen::MatrixXd::Identity(cfg.n, cfg.n));
        Eigen::VectorXd out(8);
        out[0] = inv.trace();
        out[1] = inv.squaredNorm();
        for (int t = 0; t < 3; ++t) {
          const Eigen::VectorXd col = sample.x.col(indices[static_cast<std::size_t>(t)]);
          out[2 + t] = col.dot(gf.solve(col));
        }
        const Eigen::VectorXd se = gf.solve(sample.eps);
        const Eigen::VectorXd w = sample.x.transpose() * se;
        detail::CompensatedSum noise_acc;
        for (int j = 0; j < d; ++j)
          noise_acc.add(s.eigenvalues[static_cast<std::size_t>(j)] * w[j] * w[j]);
        out[5] = noise_acc.value();
        out[6] = std::abs(projector_trace(sample, gf) - cfg.n);
        const Eigen::VectorXd p = sample.x.transpose() * gf.solve(sample.x * beta.coeffs);
        detail::CompensatedSum psp_acc;
        for (int j = 0; j < d; ++j)
          psp_acc.add(s.eigenvalues[static_cast<std::size_t>(j)] * p[j] * p[j]);
        out[7] = psp_acc.value();
        return out;
      },
      opt);
  rep.failed_replicates = st.failures;

  rep.results["tr_inv_mean"] = st.mean[0];
  rep.results["tr_inv_se"] = st.se[0];
  rep.results["tr_inv2_mean"] = st.mean[1];
  rep.results["tr_inv2_se"] = st.se[1];
  rep.results["diag_indices"] = indices;
  rep.results["diag_means"] = std::vector<double>{st.mean[2], st.mean[3], st.mean[4]};
  rep.results["diag_ses"] = std::vector<double>{st.se[2], st.se[3], st.se[4]};
  rep.results["noise_term_mean"] = st.mean[5];
  rep.results["noise_term_se"] = st.se[5];
  rep.results["proj_trace_max_dev"] = st.rows.col(6).maxCoeff();
  rep.results["psp_mean"] = st.mean[7];
  rep.results["psp_se"] = st.se[7];
  ordered_json theory;
  theory["trace_inverse_k1"] = to_json(tr1);
  theory["trace_inverse_k2"] = to_json(tr2);
  ordered_json diags = ordered_json::array();
  for (const auto& b : diag_bounds) diags.push_back(to_json(b));
  theory["projection_diag"] = diags;
  theory["noise_term"] = to_json(noise_b);
  theory["proj_sigma_proj"] = to_json(psp_b);
  rep.results["theory"] = theory;

  const double m = cfg.checks.containment_se;
  auto contains = [&](const std::string& id, const BoundInterval& b, double mean, double se) {
    const bool ok = mean >= b.lower - m * se && mean <= b.upper + m * se;
    detail_checks::add(rep.checks, id, ok, mean, b.lower,
                       "interval [" + fmt_double(b.lower) + ", " + fmt_double(b.upper) +
                           "] widened by " + fmt_double(m * se));
  };
  contains("contain_tr_inv", tr1, st.mean[0], st.se[0]);
  contains("contain_tr_inv2", tr2, st.mean[1], st.se[1]);
  contains("contain_diag_top", diag_bounds[0], st.mean[2], st.se[2]);
  contains("contain_diag_median", diag_bounds[1], st.mean[3], st.se[3]);
  contains("contain_diag_tail", diag_bounds[2], st.mean[4], st.se[4]);
  if (sigma2 > 0.0) contains("contain_noise_term", noise_b, st.mean[5], st.se[5]);
  contains("contain_proj_sigma_proj", psp_b, st.mean[7], st.se[7]);
  const double max_dev = st.rows.col(6).maxCoeff();
  detail_checks::add(rep.checks, "projector_trace", max_dev <= cfg.checks.proj_trace_tol,
                     max_dev, cfg.checks.proj_trace_tol, "max |tr(P) - n| per draw");
}

inline void run_moments_check(const ExperimentConfig& cfg, ScenarioReport& rep) {
  const int k = cfg.moments_dim;
  RngStream mstream(cfg.seed, 0, StreamPurpose::aux);
  auto random_symmetric = [&]() {
    Eigen::MatrixXd m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) m(i, j) = mstream.next_normal();
    return Eigen::MatrixXd(0.5 * (m + m.transpose()));
  };
  const Eigen::MatrixXd b = random_symmetric();
  const Eigen::MatrixXd c = random_symmetric();
  const Eigen::MatrixXd d = random_symmetric();
  const double closed2 = quadratic_form_moment(b, c);
  const double closed3 = quadratic_form_moment(b, c, d);

  const long chunk = 1000;
  const int chunks = static_cast<int>((cfg.moments_draws + chunk - 1) / chunk);
  McOptions opt = mc_options(cfg);
  opt.replicates = chunks;
  const McStats st = mc_collect(
      2,
      [&](int r) {
        RngStream g(cfg.seed, static_cast<std::uint64_t>(r), StreamPurpose::moments);
        double s2 = 0.0, s3 = 0.0;
        Eigen::VectorXd z(k);
        for (long t = 0; t < chunk; ++t) {
          for (int i = 0; i < k; ++i) z[i] = g.next_normal();
          const double qb = z.dot(b * z);
          const double qc = z.dot(c * z);
          const double qd = z.dot(d * z);
          s2 += qb * qc;
          s3 += qb * qc * qd;
        }
        Eigen::VectorXd out(2);
        out << s2 / chunk, s3 / chunk;
        return out;
      },
      opt);
  rep.failed_replicates = st.failures;

  rep.results["dim"] = k;
  rep.results["draws"] = chunks * chunk;
  rep.results["closed_form_2"] = closed2;
  rep.results["mc_2"] = st.mean[0];
  rep.results["mc_2_se"] = st.se[0];
  rep.results["closed_form_3"] = closed3;
  rep.results["mc_3"] = st.mean[1];
  rep.results["mc_3_se"] = st.se[1];

  const double m = cfg.checks.containment_se;
  detail_checks::add(rep.checks, "moment_2_match",
                     std::abs(st.mean[0] - closed2) <= m * st.se[0],
                     st.mean[0], closed2, "tolerance " + fmt_double(m * st.se[0]));
  detail_checks::add(rep.checks, "moment_3_match",
                     std::abs(st.mean[1] - closed3) <= m * st.se[1],
                     st.mean[1], closed3, "tolerance " + fmt_double(m * st.se[1]));
}

}  // namespace detail_scenarios

inline ScenarioReport run_scenario(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ScenarioReport rep;
  rep.scenario = to_string(cfg.scenario);
  rep.seed = cfg.seed;
  rep.n = cfg.n;
  rep.config_echo = materialize(cfg);

  const auto start = std::chrono::steady_clock::now();
  switch (cfg.scenario) {
    case Scenario::inflation: detail_scenarios::run_inflation(cfg, rep); break;
    case Scenario::ridge_sweep: detail_scenarios::run_ridge_sweep(cfg, rep); break;
    case Scenario::data_split: detail_scenarios::run_data_split(cfg, rep); break;
    case Scenario::spiked: detail_scenarios::run_spiked(cfg, rep); break;
    case Scenario::unbiased_divergence:
      detail_scenarios::run_unbiased_divergence(cfg, rep);
      break;
    case Scenario::direction_shrink: detail_scenarios::run_direction_shrink(cfg, rep); break;
    case Scenario::theory_check: detail_scenarios::run_theory_check(cfg, rep); break;
    case Scenario::moments_check: detail_scenarios::run_moments_check(cfg, rep); break;
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!std::isnan(cfg.checks.max_runtime_s)) {
    detail_checks::add(rep.checks, "runtime", rep.wall_seconds < cfg.checks.max_runtime_s,
                       rep.wall_seconds, cfg.checks.max_runtime_s, "seconds");
  }
  if (!cfg.write_spectrum) rep.spectrum.reset();
  return rep;
}

}  // namespace anisoreg
