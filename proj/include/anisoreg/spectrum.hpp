#pragma once

// Covariance spectra for anisotropic Gaussian designs.
//
// A covariance matrix is always represented by its ordered eigenvalue
// sequence. Designs, estimators and risk functionals are expressed in the
// eigenbasis, so eigenvectors are never materialized; this keeps memory at
// O(n d) instead of O(d^2).
//
// Scalar functionals follow the conventions used throughout the library:
//   r_n         = tr(S^2) / tr(S)^2     (the "noise size" functional; n*r_n
//                                        governs the variance contribution)
//   eff_rank    = tr(S) / lambda_1
//   eff_rank_sq = tr(S)^2 / tr(S^2) = 1 / r_n
//   rho = q_cap = (n/d) * lambda_1
// The chain eff_rank <= eff_rank_sq <= eff_rank^2 holds for every valid
// spectrum and is property-tested.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anisoreg/parallel.hpp"

namespace anisoreg {

struct Spectrum {
  std::vector<double> eigenvalues;  // strictly positive, non-increasing
  bool trace_normalized = false;    // sum of eigenvalues equals the dimension
  std::string constructor = "custom";
  std::map<std::string, double> params;  // constructor parameters, for headers

  int dim() const { return static_cast<int>(eigenvalues.size()); }
  double top() const { return eigenvalues.front(); }
  double bottom() const { return eigenvalues.back(); }
  bool isotropic(double rel_tol = 1e-12) const {
    return bottom() >= top() * (1.0 - rel_tol);
  }
};

inline double spectrum_trace(const Spectrum& s) {
  detail::CompensatedSum acc;
  for (double v : s.eigenvalues) acc.add(v);
  return acc.value();
}

inline double spectrum_trace_sq(const Spectrum& s) {
  detail::CompensatedSum acc;
  for (double v : s.eigenvalues) acc.add(v * v);
  return acc.value();
}

inline void validate(const Spectrum& s) {
  if (s.eigenvalues.empty())
    throw std::invalid_argument("Spectrum: empty eigenvalue sequence");
  double prev = std::numeric_limits<double>::infinity();
  for (double v : s.eigenvalues) {
    if (!(v > 0.0)) throw std::invalid_argument("Spectrum: eigenvalues must be positive");
    if (v > prev) throw std::invalid_argument("Spectrum: eigenvalues must be non-increasing");
    prev = v;
  }
  if (s.trace_normalized) {
    const double d = static_cast<double>(s.dim());
    if (std::abs(spectrum_trace(s) - d) > 1e-12 * d)
      throw std::invalid_argument("Spectrum: trace normalization violated");
  }
}

struct SpectrumFunctionals {
  double trace = 0.0;
  double trace_sq = 0.0;      // tr(S^2)
  double r_n = 0.0;           // tr(S^2)/tr(S)^2
  double eff_rank = 0.0;      // tr(S)/lambda_1
  double eff_rank_sq = 0.0;   // tr(S)^2/tr(S^2) = 1/r_n
  double rho = 0.0;           // (n/d) lambda_1 for the supplied n
  double q_cap = 0.0;         // alias of rho
  double lambda_1 = 0.0;
  double lambda_min = 0.0;
};

// All functionals in one pass; independent of the storage order of the
// eigenvalue sequence.
inline SpectrumFunctionals functionals(const Spectrum& s, int n) {
  if (n < 1) throw std::invalid_argument("functionals: n must be >= 1");
  SpectrumFunctionals f;
  detail::CompensatedSum tr, tr2;
  double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
  for (double v : s.eigenvalues) {
    tr.add(v);
    tr2.add(v * v);
    lmax = std::max(lmax, v);
    lmin = std::min(lmin, v);
  }
  const double d = static_cast<double>(s.dim());
  f.trace = tr.value();
  f.trace_sq = tr2.value();
  f.r_n = f.trace_sq / (f.trace * f.trace);
  f.eff_rank = f.trace / lmax;
  f.eff_rank_sq = 1.0 / f.r_n;
  f.rho = (static_cast<double>(n) / d) * lmax;
  f.q_cap = f.rho;
  f.lambda_1 = lmax;
  f.lambda_min = lmin;
  return f;
}

// Two well-separated blocks: n eigenvalues at q*d/n and d-n at a common tail
// level chosen so the trace equals d exactly.
inline Spectrum make_block_spectrum(int n, int d, double q) {
  if (d <= n || n < 1) throw std::invalid_argument("make_block_spectrum: need d > n >= 1");
  if (!(q > 0.0) || !(q < 1.0))
    throw std::invalid_argument("make_block_spectrum: q must lie in (0,1)");
  const double top = q * (static_cast<double>(d) / n);
  const double tail = (static_cast<double>(d) / (d - n)) * (1.0 - q);
  if (top <= tail)
    throw std::invalid_argument("make_block_spectrum: block not separated (top <= tail)");
  Spectrum s;
  s.eigenvalues.assign(static_cast<std::size_t>(d), tail);
  std::fill_n(s.eigenvalues.begin(), n, top);
  s.trace_normalized = true;
  s.constructor = "block";
  s.params = {{"n", double(n)}, {"d", double(d)}, {"q", q}};
  validate(s);
  return s;
}

// Power-law decay lambda_i = kappa * i^(-a) with kappa fixed by tr = d.
// The q parameter only names the intended scale of the top eigenvalue; the
// trace normalization determines kappa, so q does not enter the values.
// With enforce_top_bound set, rejects spectra whose top eigenvalue exceeds
// (1/8) d/n after normalization.
inline Spectrum make_power_law_spectrum(int n, int d, double a, double q,
                                        bool enforce_top_bound = false) {
  if (d < 1 || n < 1) throw std::invalid_argument("make_power_law_spectrum: need d, n >= 1");
  if (!(a > 0.0) || !(a < 1.0))
    throw std::invalid_argument("make_power_law_spectrum: a must lie in (0,1)");
  std::vector<double> raw(static_cast<std::size_t>(d));
  detail::CompensatedSum sum;
  for (int i = 0; i < d; ++i) {
    raw[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -a);
    sum.add(raw[static_cast<std::size_t>(i)]);
  }
  const double kappa = static_cast<double>(d) / sum.value();
  if (enforce_top_bound && kappa > 0.125 * static_cast<double>(d) / n)
    throw std::invalid_argument(
        "make_power_law_spectrum: top eigenvalue exceeds (1/8) d/n after normalization");
  Spectrum s;
  s.eigenvalues.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    s.eigenvalues[static_cast<std::size_t>(i)] = kappa * raw[static_cast<std::size_t>(i)];
  s.trace_normalized = true;
  s.constructor = "power_law";
  s.params = {{"n", double(n)}, {"d", double(d)}, {"a", a}, {"q", q}};
  validate(s);
  return s;
}

// Two-regime spectrum: a head of n eigenvalues proportional to
// q*(d/n)*(a_min + i^(-a0)) and a tail proportional to
// (d/n)^(-a1) * (i-n+1)^(-a2), jointly rescaled by one constant so tr = d.
inline Spectrum make_two_regime_spectrum(int n, int d, double q, double a_min,
                                         double a0, double a1, double a2) {
  if (d <= n || n < 1) throw std::invalid_argument("make_two_regime_spectrum: need d > n >= 1");
  if (!(q > 0.0)) throw std::invalid_argument("make_two_regime_spectrum: q must be positive");
  if (a_min < 0.0 || a_min >= 1.0)
    throw std::invalid_argument("make_two_regime_spectrum: a_min must lie in [0,1)");
  if (a0 < 0.0) throw std::invalid_argument("make_two_regime_spectrum: a0 must be >= 0");
  if (!(a1 > 0.0) || !(a1 < 1.0) || !(a2 > 0.0) || !(a2 < 1.0))
    throw std::invalid_argument("make_two_regime_spectrum: a1, a2 must lie in (0,1)");

  const double ratio = static_cast<double>(d) / n;
  std::vector<double> raw(static_cast<std::size_t>(d));
  for (int i = 1; i <= n; ++i)
    raw[static_cast<std::size_t>(i - 1)] = q * ratio * (a_min + std::pow(double(i), -a0));
  for (int i = n + 1; i <= d; ++i)
    raw[static_cast<std::size_t>(i - 1)] =
        std::pow(ratio, -a1) * std::pow(double(i - n + 1), -a2);

  const double head_last = raw[static_cast<std::size_t>(n - 1)];
  const double tail_first = raw[static_cast<std::size_t>(n)];
  if (tail_first > head_last)
    throw std::invalid_argument("make_two_regime_spectrum: non-monotone junction");

  detail::CompensatedSum sum;
  for (double v : raw) sum.add(v);
  const double scale = static_cast<double>(d) / sum.value();
  Spectrum s;
  s.eigenvalues.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i)
    s.eigenvalues[static_cast<std::size_t>(i)] = scale * raw[static_cast<std::size_t>(i)];
  s.trace_normalized = true;
  s.constructor = "two_regime";
  s.params = {{"n", double(n)}, {"d", double(d)},   {"q", q},   {"a_min", a_min},
              {"a0", a0},       {"a1", a1},         {"a2", a2}, {"scale", scale}};
  validate(s);
  return s;
}

// Identity plus a rank-one spike: eigenvalues (1+spike, 1, ..., 1). This
// model is used un-normalized; spike equals the squared norm of the spike
// direction.
inline Spectrum make_spiked_spectrum(int d, double spike) {
  if (d < 1) throw std::invalid_argument("make_spiked_spectrum: need d >= 1");
  if (spike < 0.0) throw std::invalid_argument("make_spiked_spectrum: spike must be >= 0");
  Spectrum s;
  s.eigenvalues.assign(static_cast<std::size_t>(d), 1.0);
  s.eigenvalues[0] = 1.0 + spike;
  s.trace_normalized = false;
  s.constructor = "spiked";
  s.params = {{"d", double(d)}, {"spike", spike}};
  validate(s);
  return s;
}

// Arbitrary positive values; sorted descending, optionally rescaled to tr = d.
inline Spectrum make_custom_spectrum(std::vector<double> values, bool normalize) {
  if (values.empty()) throw std::invalid_argument("make_custom_spectrum: empty sequence");
  for (double v : values)
    if (!(v > 0.0)) throw std::invalid_argument("make_custom_spectrum: values must be positive");
  std::sort(values.begin(), values.end(), std::greater<double>());
  Spectrum s;
  s.eigenvalues = std::move(values);
  if (normalize) {
    const double d = static_cast<double>(s.dim());
    const double scale = d / spectrum_trace(s);
    for (double& v : s.eigenvalues) v *= scale;
    s.trace_normalized = true;
  }
  s.constructor = "custom";
  validate(s);
  return s;
}

}  // namespace anisoreg
