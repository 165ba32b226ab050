#pragma once

// Closed-form predictions and two-sided bound intervals serving as analytic
// oracles for the Monte Carlo estimates.
//
// Every asymptotic factor appearing in a bound is replaced by an explicit
// constant recorded in the interval's slack policy:
//   * relative "vanishing" factors use o1_rel (default 0.2): lower bounds are
//     multiplied by (1 - o1_rel), upper bounds by (1 + o1_rel);
//   * unspecified order-one factors multiplying the rho correction of a lower
//     bound use theta_lower (default 4).
// The slack is configuration, never widened silently; acceptance checks treat
// containment failures under the defaults as failures.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

#include "anisoreg/risk.hpp"
#include "anisoreg/sampling.hpp"
#include "anisoreg/spectrum.hpp"

namespace anisoreg {

struct SlackPolicy {
  double o1_rel = 0.2;
  double theta_lower = 4.0;
};

struct BoundInterval {
  double lower = 0.0;
  double upper = 0.0;
  std::string source;
  std::map<std::string, double> slack_policy;
};

struct TheoryPrediction {
  double c_opt_pred = 0.0;
  double q = 0.0;             // (n/d) b'S^2 b
  double numerator = 0.0;     // equal to q
  double denom_signal = 0.0;  // (n^2/d^2) b'S^3 b
  double denom_noise = 0.0;   // (1+sigma^2) n r_n
  double c1_witness = 0.0;
  double cnoise_witness = 0.0;
  double alpha = 0.0;         // guaranteed multiplicative factor, if available
  double q_threshold = 0.0;   // validity threshold for alpha
  bool has_alpha = false;
};

struct AlphaResult {
  double alpha = 0.0;
  double q_threshold = 0.0;
};

// alpha = 1 - 1/(18 (C1 + Cnoise)), valid for q below 1/(216 (C1 + Cnoise)).
inline AlphaResult multiplicative_alpha(double c1, double cnoise) {
  if (!(c1 + cnoise > 0.0))
    throw std::invalid_argument("multiplicative_alpha: need C1 + Cnoise > 0");
  AlphaResult out;
  out.alpha = 1.0 - 1.0 / (18.0 * (c1 + cnoise));
  out.q_threshold = 1.0 / (216.0 * (c1 + cnoise));
  return out;
}

// Leading-order optimal inflation constant
//   c_opt ~ (n/d) b'S^2 b / ((n^2/d^2) b'S^3 b + (1+sigma^2) n r_n),
// exact eigen-sums, valid up to a relative error of order q. Requires a
// normalized signal (b'S b = 1).
inline TheoryPrediction c_opt_prediction(const Spectrum& s, const BetaCoefficients& beta,
                                         int n, double sigma2) {
  if (!beta.normalized)
    throw std::invalid_argument("c_opt_prediction: signal must be normalized");
  if (beta.coeffs.size() != s.dim())
    throw std::invalid_argument("c_opt_prediction: dimension mismatch");
  const int d = s.dim();
  const double nd = static_cast<double>(n) / d;
  detail::CompensatedSum s2, s3;
  for (int i = 0; i < d; ++i) {
    const double l = s.eigenvalues[static_cast<std::size_t>(i)];
    const double c2 = beta.coeffs[i] * beta.coeffs[i];
    s2.add(l * l * c2);
    s3.add(l * l * l * c2);
  }
  const SpectrumFunctionals f = functionals(s, n);

  TheoryPrediction p;
  p.numerator = nd * s2.value();
  p.q = p.numerator;
  p.denom_signal = nd * nd * s3.value();
  p.denom_noise = (1.0 + sigma2) * n * f.r_n;
  const double denom = p.denom_signal + p.denom_noise;
  if (!(denom > 0.0)) throw std::domain_error("c_opt_prediction: zero denominator");
  p.c_opt_pred = p.numerator / denom;
  if (p.q > 0.0) {
    p.c1_witness = p.denom_signal / (p.q * p.q);
    p.cnoise_witness = p.denom_noise / (p.q * p.q);
    if (p.c1_witness + p.cnoise_witness > 0.0) {
      const AlphaResult a = multiplicative_alpha(p.c1_witness, p.cnoise_witness);
      p.alpha = a.alpha;
      p.q_threshold = a.q_threshold;
      p.has_alpha = true;
    }
  }
  return p;
}

namespace detail_theory {

inline void require_top_bound(const SpectrumFunctionals& f, int n, int d, double factor,
                              const char* who) {
  const double cap = factor * static_cast<double>(d) / n;
  if (f.lambda_1 > cap)
    throw std::invalid_argument(std::string(who) + ": top eigenvalue exceeds its cap");
}

inline void require_trace_bound(const SpectrumFunctionals& f, int n, const char* who) {
  if (!(f.trace > n + 1))
    throw std::invalid_argument(std::string(who) + ": trace must exceed n + 1");
}

}  // namespace detail_theory

// Two-sided interval for E[tr((XX')^{-k})], k in {1, 2}.
inline BoundInterval trace_inverse_bounds(const Spectrum& s, int n, int k,
                                          const SlackPolicy& slack = {}) {
  if (k != 1 && k != 2) throw std::invalid_argument("trace_inverse_bounds: k must be 1 or 2");
  if (n <= k + 2) throw std::invalid_argument("trace_inverse_bounds: need n > k + 2");
  const int d = s.dim();
  const SpectrumFunctionals f = functionals(s, n);
  detail_theory::require_top_bound(f, n, d, 1.0 / (k + 1), "trace_inverse_bounds");
  detail_theory::require_trace_bound(f, n, "trace_inverse_bounds");

  const double L = f.trace;
  const double r = f.r_n;
  const double rho = f.rho;
  const double nn = static_cast<double>(n);

  BoundInterval b;
  b.slack_policy = {{"o1_rel", slack.o1_rel}, {"theta_lower", slack.theta_lower}};
  if (k == 1) {
    b.source = "trace_inverse_bounds:k=1";
    b.lower = nn / L + nn * nn * r * (1.0 - slack.theta_lower * rho) / L;
    const double shrink = 1.0 - 2.0 * rho;
    b.upper = shrink > 0.0
                  ? nn / L + nn * nn * r / (L * shrink * shrink)
                  : std::numeric_limits<double>::infinity();
  } else {
    b.source = "trace_inverse_bounds:k=2";
    b.lower = (nn / (L * L)) * (1.0 - slack.o1_rel) + 2.0 * nn * nn * r / (L * L);
    const double shrink = 1.0 - 3.0 * rho;
    b.upper = shrink > 0.0
                  ? (nn / (L * L)) * (1.0 + slack.o1_rel) +
                        2.0 * nn * nn * r / (L * L * shrink * shrink * shrink)
                  : std::numeric_limits<double>::infinity();
  }
  return b;
}

// Two-sided interval for the diagonal entry of the expected row-space
// projector at eigen-index i (0-based): E[e_i' P e_i] = l_i E[a_i' A^{-1} a_i].
inline BoundInterval projection_diag_bounds(const Spectrum& s, int n, int index,
                                            const SlackPolicy& slack = {}) {
  const int d = s.dim();
  if (index < 0 || index >= d)
    throw std::invalid_argument("projection_diag_bounds: index out of range");
  const SpectrumFunctionals f = functionals(s, n);
  detail_theory::require_top_bound(f, n, d, 0.25, "projection_diag_bounds");
  detail_theory::require_trace_bound(f, n, "projection_diag_bounds");

  const double L = f.trace;
  const double r = f.r_n;
  const double rho = f.rho;
  const double nn = static_cast<double>(n);
  const double li = s.eigenvalues[static_cast<std::size_t>(index)];

  // Bounds on E[a_i' A^{-1} a_i]; the diagonal entry scales them by l_i. The
  // quartic correction of the lower bound carries the l_i^2 factor so that it
  // matches the dimensions of the neighbouring quadratic term.
  const double low_a = (nn / L) * (1.0 - slack.o1_rel) +
                       (nn * nn * r / L) * (1.0 - slack.theta_lower * rho) -
                       li * nn * nn / (L * L) -
                       2.0 * li * li * nn * nn * nn * r / (L * L);
  const double shrink2 = 1.0 - 2.0 * rho;
  const double sub_factor =
      (1.0 + nn * r * std::pow(std::max(0.0, 1.0 - slack.theta_lower * rho), 2)) /
      (1.0 + rho);
  const double up_a = (nn / L) * (1.0 + slack.o1_rel) +
                      (shrink2 > 0.0 ? nn * nn * r / (L * shrink2 * shrink2)
                                     : std::numeric_limits<double>::infinity()) -
                      li * (nn * nn / (L * L)) * sub_factor;

  BoundInterval b;
  b.source = "projection_diag_bounds";
  b.slack_policy = {{"o1_rel", slack.o1_rel}, {"theta_lower", slack.theta_lower}};
  b.lower = li * low_a;
  b.upper = li * up_a;
  return b;
}

// Two-sided interval for the noise term E[eps' A^{-1} X S X' A^{-1} eps] under
// homoscedastic noise independent of the design.
inline BoundInterval noise_term_bounds(const Spectrum& s, int n, double sigma2,
                                       const SlackPolicy& slack = {}) {
  const int d = s.dim();
  const SpectrumFunctionals f = functionals(s, n);
  detail_theory::require_top_bound(f, n, d, 0.25, "noise_term_bounds");
  detail_theory::require_trace_bound(f, n, "noise_term_bounds");

  const double r = f.r_n;
  const double rho = f.rho;
  const double nn = static_cast<double>(n);
  const double nr = nn * r;

  BoundInterval b;
  b.source = "noise_term_bounds";
  b.slack_policy = {{"o1_rel", slack.o1_rel}};
  b.lower = sigma2 * nr * (1.0 + 2.0 * nr) * std::max(0.0, 1.0 - 4.0 * rho);
  const double shrink = 1.0 - 4.0 * rho;
  b.upper = shrink > 0.0
                ? sigma2 * nr * (1.0 + 2.0 * nr / (shrink * shrink)) * (1.0 + slack.o1_rel)
                : std::numeric_limits<double>::infinity();
  return b;
}

// Two-sided interval for E[b' P S P b]: the matrix bounds on the projected
// covariance contracted with the signal.
inline BoundInterval proj_sigma_proj_bounds(const Spectrum& s, const BetaCoefficients& beta,
                                            int n, const SlackPolicy& slack = {}) {
  const int d = s.dim();
  if (beta.coeffs.size() != d)
    throw std::invalid_argument("proj_sigma_proj_bounds: dimension mismatch");
  const SpectrumFunctionals f = functionals(s, n);
  detail_theory::require_top_bound(f, n, d, 0.25, "proj_sigma_proj_bounds");
  detail_theory::require_trace_bound(f, n, "proj_sigma_proj_bounds");

  detail::CompensatedSum a1, a3, a4;
  for (int i = 0; i < d; ++i) {
    const double l = s.eigenvalues[static_cast<std::size_t>(i)];
    const double c2 = beta.coeffs[i] * beta.coeffs[i];
    a1.add(l * c2);
    a3.add(l * l * l * c2);
    a4.add(l * l * l * l * c2);
  }
  const double bsb = a1.value();
  const double bs3b = a3.value();
  const double bs4b = a4.value();

  const double L = f.trace;
  const double r = f.r_n;
  const double rho = f.rho;
  const double nn = static_cast<double>(n);
  const double nr = nn * r;

  BoundInterval b;
  b.source = "proj_sigma_proj_bounds";
  b.slack_policy = {{"o1_rel", slack.o1_rel}};
  b.lower = (1.0 - slack.o1_rel) * (nn * nn * (1.0 + nr) * (1.0 + nr) / (L * L)) * bs3b -
            2.0 * nn * nn * nn / (L * L * L) * bs4b +
            (1.0 - slack.o1_rel) * nr * (1.0 + 2.0 * nr) * std::max(0.0, 1.0 - 4.0 * rho) *
                bsb;
  const double shrink4 = 1.0 - 4.0 * rho;
  const double shrink2 = 1.0 - 2.0 * rho;
  if (shrink4 > 0.0 && shrink2 > 0.0) {
    b.upper = (1.0 + slack.o1_rel) * (nn * nn / (L * L)) *
                  (1.0 + nr / (shrink4 * shrink4 * shrink4)) * bs3b +
              (1.0 + slack.o1_rel) * nr * (1.0 + nr / (shrink2 * shrink2)) * bsb;
  } else {
    b.upper = std::numeric_limits<double>::infinity();
  }
  return b;
}

namespace detail_theory {

inline Eigen::MatrixXd symmetric_part(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

inline void require_square_small(const Eigen::MatrixXd& m, const char* who) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(who) + ": square only");
  if (m.rows() > 16) throw std::invalid_argument(std::string(who) + ": dimension above 16");
}

}  // namespace detail_theory

// E[z'Bz z'Cz] for standard normal z. Quadratic forms only see the symmetric
// parts, so inputs are symmetrized before the trace identities apply:
//   tr(BC) + tr(CB) + tr(B) tr(C).
inline double quadratic_form_moment(const Eigen::MatrixXd& b_in, const Eigen::MatrixXd& c_in) {
  detail_theory::require_square_small(b_in, "quadratic_form_moment");
  detail_theory::require_square_small(c_in, "quadratic_form_moment");
  if (b_in.rows() != c_in.rows())
    throw std::invalid_argument("quadratic_form_moment: dimension mismatch");
  const Eigen::MatrixXd b = detail_theory::symmetric_part(b_in);
  const Eigen::MatrixXd c = detail_theory::symmetric_part(c_in);
  return (b * c).trace() + (c * b).trace() + b.trace() * c.trace();
}

// E[z'Bz z'Cz z'Dz] for standard normal z:
//   tr(B)tr(C)tr(D) + 2 tr(B)tr(CD) + 2 tr(C)tr(BD) + 2 tr(D)tr(BC) + 8 tr(BCD)
// after symmetrization.
inline double quadratic_form_moment(const Eigen::MatrixXd& b_in, const Eigen::MatrixXd& c_in,
                                    const Eigen::MatrixXd& d_in) {
  detail_theory::require_square_small(b_in, "quadratic_form_moment");
  detail_theory::require_square_small(c_in, "quadratic_form_moment");
  detail_theory::require_square_small(d_in, "quadratic_form_moment");
  if (b_in.rows() != c_in.rows() || b_in.rows() != d_in.rows())
    throw std::invalid_argument("quadratic_form_moment: dimension mismatch");
  const Eigen::MatrixXd b = detail_theory::symmetric_part(b_in);
  const Eigen::MatrixXd c = detail_theory::symmetric_part(c_in);
  const Eigen::MatrixXd d = detail_theory::symmetric_part(d_in);
  return b.trace() * c.trace() * d.trace() + 2.0 * b.trace() * (c * d).trace() +
         2.0 * c.trace() * (b * d).trace() + 2.0 * d.trace() * (b * c).trace() +
         8.0 * (b * c * d).trace();
}

struct Sigma2Estimate {
  double value = 0.0;
  double se = 0.0;
  int replicates = 0;
  int failures = 0;
};

// Monte Carlo ratio-of-means estimate of the noise functional
//   E[tr(S X' A^{-1} L(X) A^{-1} X)] / E[tr(S X' A^{-2} X)],
// where L(X) is the diagonal of conditional noise variances. The rule must be
// known analytically, which every supported noise kind satisfies.
inline Sigma2Estimate sigma2_functional_mc(const Spectrum& s, int n, const NoiseModel& noise,
                                           const McOptions& opt) {
  const int d = s.dim();
  const double trace = spectrum_trace(s);
  const BetaCoefficients zero_beta{Eigen::VectorXd::Zero(d), false};

  const McStats st = mc_collect(
      2,
      [&](int r) {
        RngStream stream(opt.seed, static_cast<std::uint64_t>(r), StreamPurpose::design);
        const DesignSample sample = sample_design(s, n, NoiseModel::none(), zero_beta, stream, r);
        const GramFactor gf = gram_factorize(sample);

        Eigen::MatrixXd xs = sample.x;
        for (int j = 0; j < d; ++j)
          xs.col(j) *= s.eigenvalues[static_cast<std::size_t>(j)];
        const Eigen::MatrixXd w = xs * sample.x.transpose();
        const Eigen::MatrixXd m = gf.solve_matrix(gf.solve_matrix(w).transpose());

        double numer = 0.0;
        for (int i = 0; i < n; ++i) {
          const double var = noise.conditional_variance(sample.x.row(i).squaredNorm(), trace);
          numer += var * m(i, i);
        }
        Eigen::VectorXd out(2);
        out << numer, m.trace();
        return out;
      },
      opt);

  Sigma2Estimate est;
  est.replicates = st.replicates;
  est.failures = st.failures;
  const double numer = st.mean[0], denom = st.mean[1];
  if (!(denom > 0.0)) throw std::runtime_error("sigma2_functional_mc: degenerate denominator");
  est.value = numer / denom;
  const double var = st.cov_mean(0, 0) / (denom * denom) +
                     numer * numer * st.cov_mean(1, 1) / std::pow(denom, 4) -
                     2.0 * numer * st.cov_mean(0, 1) / std::pow(denom, 3);
  est.se = var > 0.0 ? std::sqrt(var) : 0.0;
  return est;
}

}  // namespace anisoreg
