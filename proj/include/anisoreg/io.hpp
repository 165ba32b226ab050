#pragma once

// CSV and JSON serialization. CSV output follows RFC 4180 (CRLF line ends,
// mandatory header row, '.' decimal separator); JSON uses UTF-8 with stable
// key order throughout so that reports are byte-comparable across runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "anisoreg/assumptions.hpp"
#include "anisoreg/risk.hpp"
#include "anisoreg/sampling.hpp"
#include "anisoreg/spectrum.hpp"
#include "anisoreg/theory.hpp"

namespace anisoreg {

using ordered_json = nlohmann::ordered_json;

inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_csv(const std::filesystem::path& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
  if (columns.size() != header.size())
    throw std::invalid_argument("write_csv: header/column mismatch");
  std::size_t rows = 0;
  for (const auto& c : columns) rows = std::max(rows, c.size());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << "\r\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out << ',';
      if (i < columns[j].size()) out << fmt_double(columns[j][i]);
    }
    out << "\r\n";
  }
}

inline ordered_json spectrum_header_json(const Spectrum& s, int n_context) {
  ordered_json j;
  j["d"] = s.dim();
  j["n_context"] = n_context;
  j["constructor"] = s.constructor;
  ordered_json params;
  for (const auto& [k, v] : s.params) params[k] = v;
  j["parameters"] = params;
  j["trace_normalized"] = s.trace_normalized;
  return j;
}

inline void write_spectrum_csv(const std::filesystem::path& path, const Spectrum& s) {
  write_csv(path, {"eigenvalue"}, {s.eigenvalues});
}

// Full sample dump (x columns, then eps, then y); files get large, so the
// harness gates this behind a flag.
inline void write_design_csv(const std::filesystem::path& path, const DesignSample& sample) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_design_csv: cannot open " + path.string());
  const int n = sample.n(), d = sample.dim();
  for (int j = 0; j < d; ++j) out << "x" << j << ',';
  out << "eps,y\r\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) out << fmt_double(sample.x(i, j)) << ',';
    out << fmt_double(sample.eps[i]) << ',' << fmt_double(sample.y[i]) << "\r\n";
  }
}

inline ordered_json to_json(const SpectrumFunctionals& f) {
  ordered_json j;
  j["trace"] = f.trace;
  j["trace_sq"] = f.trace_sq;
  j["r_n"] = f.r_n;
  j["eff_rank"] = f.eff_rank;
  j["eff_rank_sq"] = f.eff_rank_sq;
  j["rho"] = f.rho;
  j["q_cap"] = f.q_cap;
  j["lambda_1"] = f.lambda_1;
  j["lambda_min"] = f.lambda_min;
  return j;
}

inline ordered_json to_json(const RiskSummary& rs) {
  ordered_json j;
  j["a_mean"] = rs.a_mean;
  j["a_se"] = rs.a_se;
  j["b_mean"] = rs.b_mean;
  j["b_se"] = rs.b_se;
  j["ab_cov"] = rs.ab_cov;
  j["signal"] = rs.signal;
  j["replicates"] = rs.replicates;
  j["failures"] = rs.failures;
  return j;
}

inline ordered_json to_json(const RiskCurve& c) {
  ordered_json j;
  j["control"] = c.control == RiskCurve::Control::inflation_c ? "inflation_c" : "ridge_lambda";
  j["grid"] = c.grid;
  j["mean"] = c.mean;
  j["se"] = c.se;
  return j;
}

inline void write_summary_csv(const std::filesystem::path& path, const RiskSummary& rs) {
  write_csv(path,
            {"a_mean", "a_se", "b_mean", "b_se", "ab_cov", "signal", "replicates", "failures"},
            {{rs.a_mean},
             {rs.a_se},
             {rs.b_mean},
             {rs.b_se},
             {rs.ab_cov},
             {rs.signal},
             {double(rs.replicates)},
             {double(rs.failures)}});
}

inline void write_curve_csv(const std::filesystem::path& path, const RiskCurve& c) {
  const std::string control =
      c.control == RiskCurve::Control::inflation_c ? "inflation_c" : "ridge_lambda";
  write_csv(path, {control, "mean", "se"}, {c.grid, c.mean, c.se});
}

inline ordered_json to_json(const BoundInterval& b) {
  ordered_json j;
  j["lower"] = b.lower;
  j["upper"] = b.upper;
  j["source"] = b.source;
  ordered_json sl;
  for (const auto& [k, v] : b.slack_policy) sl[k] = v;
  j["slack_policy"] = sl;
  return j;
}

inline ordered_json to_json(const TheoryPrediction& p) {
  ordered_json j;
  j["c_opt_pred"] = p.c_opt_pred;
  j["q"] = p.q;
  j["numerator"] = p.numerator;
  j["denom_signal"] = p.denom_signal;
  j["denom_noise"] = p.denom_noise;
  j["c1_witness"] = p.c1_witness;
  j["cnoise_witness"] = p.cnoise_witness;
  if (p.has_alpha) {
    j["alpha"] = p.alpha;
    j["q_threshold"] = p.q_threshold;
  }
  return j;
}

inline ordered_json to_json(const AssumptionReport& r) {
  ordered_json j;
  j["set"] = to_string(r.set);
  j["passed"] = r.passed;
  ordered_json viols = ordered_json::array();
  for (const auto& v : r.violations) {
    ordered_json e;
    e["clause"] = v.clause;
    e["measured"] = v.measured;
    e["bound"] = v.bound;
    viols.push_back(e);
  }
  j["violations"] = viols;
  j["q"] = r.q;
  j["q_max"] = r.q_max;
  j["rho"] = r.rho;
  j["c1_witness"] = r.c1_witness;
  j["cnoise_witness"] = r.cnoise_witness;
  ordered_json sl;
  for (const auto& [k, v] : r.slack) sl[k] = v;
  j["slack"] = sl;
  j["notes"] = r.notes;
  return j;
}

inline ordered_json to_json(const Sigma2Estimate& e) {
  ordered_json j;
  j["value"] = e.value;
  j["se"] = e.se;
  j["replicates"] = e.replicates;
  j["failures"] = e.failures;
  return j;
}

}  // namespace anisoreg
