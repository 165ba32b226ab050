#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "anisoreg/risk.hpp"
#include "anisoreg/theory.hpp"

using namespace anisoreg;

namespace {

EstimatorFn min_norm_recipe() {
  return [](const DesignSample& sample) { return min_norm(sample, gram_factorize(sample)); };
}

}  // namespace

TEST_CASE("excess risk basics") {
  const Spectrum s = make_block_spectrum(5, 50, 0.2);
  const BetaCoefficients beta = make_beta_topk(s, 5);
  EstimateVector theta;
  theta.coeffs = beta.coeffs;
  CHECK(excess_risk(theta, beta, s) == 0.0);

  theta.coeffs = Eigen::VectorXd::Zero(50);
  CHECK(excess_risk(theta, beta, s) == doctest::Approx(1.0).epsilon(1e-12));

  theta.coeffs = 2.0 * beta.coeffs;
  CHECK(excess_risk(theta, beta, s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("excess risk is invariant under joint permutation") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const int d = 40;
  std::vector<double> lam(d);
  for (auto& v : lam) v = u(gen);
  std::sort(lam.begin(), lam.end(), std::greater<double>());
  Eigen::VectorXd b(d), t(d);
  for (int i = 0; i < d; ++i) b[i] = u(gen);
  for (int i = 0; i < d; ++i) t[i] = u(gen);

  Spectrum s1;
  s1.eigenvalues = lam;
  BetaCoefficients beta1{b, false};
  EstimateVector th1{t, {}};
  const double base = excess_risk(th1, beta1, s1);

  std::vector<int> perm(d);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  std::vector<double> lam2(d);
  Eigen::VectorXd b2(d), t2(d);
  for (int i = 0; i < d; ++i) {
    lam2[static_cast<std::size_t>(i)] = lam[static_cast<std::size_t>(perm[i])];
    b2[i] = b[perm[static_cast<std::size_t>(i)]];
    t2[i] = t[perm[static_cast<std::size_t>(i)]];
  }
  Spectrum s2;
  s2.eigenvalues = lam2;  // not sorted; excess_risk only reads the sequence
  const double permuted = excess_risk({t2, {}}, {b2, false}, s2);
  CHECK(permuted == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("zero and oracle estimator recipes") {
  const Spectrum s = make_block_spectrum(8, 80, 0.3);
  const BetaCoefficients beta = make_beta_topk(s, 8);
  McOptions opt;
  opt.replicates = 20;
  opt.seed = 13;
  opt.threads = 2;

  const RiskSummary zero = mc_risk_summary(
      s, beta, NoiseModel::none(), 8,
      [](const DesignSample& sample) {
        EstimateVector est;
        est.coeffs = Eigen::VectorXd::Zero(sample.dim());
        return est;
      },
      opt);
  CHECK(zero.a_mean == 0.0);
  CHECK(zero.b_mean == 0.0);
  CHECK(zero.g_at(0.7) == doctest::Approx(zero.signal).epsilon(1e-15));

  const RiskSummary oracle = mc_risk_summary(
      s, beta, NoiseModel::none(), 8,
      [&](const DesignSample&) {
        EstimateVector est;
        est.coeffs = beta.coeffs;
        return est;
      },
      opt);
  const COpt copt = empirical_c_opt(oracle);
  CHECK(copt.c_hat == 1.0);
  CHECK(copt.se == 0.0);
}

TEST_CASE("noiseless isotropic moment matches n/d") {
  const int n = 50, d = 500;
  const Spectrum s = make_custom_spectrum(std::vector<double>(d, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, n);
  McOptions opt;
  opt.replicates = 200;
  opt.seed = 14;
  opt.threads = 2;
  const RiskSummary rs = mc_risk_summary(s, beta, NoiseModel::none(), n, min_norm_recipe(), opt);
  CHECK(std::abs(rs.a_mean - 0.1) <= 3.0 * rs.a_se);
  // Noiseless isotropic: both moments coincide per draw, so the vertex is one.
  CHECK(empirical_c_opt(rs).c_hat == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("block moments stay inside the analytic envelope") {
  const int n = 20, d = 2000;
  const Spectrum s = make_block_spectrum(n, d, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, n);
  McOptions opt;
  opt.replicates = 300;
  opt.seed = 15;
  opt.threads = 2;
  const RiskSummary rs = mc_risk_summary(s, beta, NoiseModel::none(), n, min_norm_recipe(), opt);

  // b = E[b' P S P b] must sit inside the two-sided bound interval.
  const BoundInterval psp = proj_sigma_proj_bounds(s, beta, n);
  CHECK(rs.b_mean >= psp.lower - 3.0 * rs.b_se);
  CHECK(rs.b_mean <= psp.upper + 3.0 * rs.b_se);

  // a = E[b' P S b]: the projector diagonal bounds contracted with the signal.
  const BoundInterval diag_top = projection_diag_bounds(s, n, 0);
  const double bs2b = 10.0;  // t^2 * n * lambda_1^2 with t^2 = 1/(n lambda_1)
  const double lo = bs2b / s.top() * diag_top.lower;
  const double hi = bs2b / s.top() * diag_top.upper;
  CHECK(rs.a_mean >= lo - 3.0 * rs.a_se);
  CHECK(rs.a_mean <= hi + 3.0 * rs.a_se);
}

TEST_CASE("failed replicates are excluded and counted") {
  const Spectrum s = make_block_spectrum(6, 60, 0.3);
  const BetaCoefficients beta = make_beta_topk(s, 6);
  McOptions opt;
  opt.replicates = 24;
  opt.seed = 16;
  opt.threads = 2;
  opt.fail_replicate = 7;
  const RiskSummary rs = mc_risk_summary(s, beta, NoiseModel::none(), 6, min_norm_recipe(), opt);
  CHECK(rs.failures == 1);
  CHECK(rs.replicates == 23);
  CHECK(rs.b_mean > 0.0);
}

TEST_CASE("curve reconstruction is exactly the quadratic") {
  RngStream g(17, 0, StreamPurpose::aux);
  for (int t = 0; t < 20; ++t) {
    RiskSummary rs;
    rs.signal = 0.5 + g.next_unit();
    rs.a_mean = g.next_normal();
    rs.b_mean = 0.1 + g.next_unit();
    rs.a_se = 0.01 * g.next_unit();
    rs.b_se = 0.01 * g.next_unit();
    const std::vector<double> grid = default_inflation_grid(1.0 + 2.0 * g.next_unit(), 31);
    const RiskCurve curve = inflation_curve(rs, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double c = grid[i];
      CHECK(curve.mean[i] == rs.signal - 2.0 * c * rs.a_mean + c * c * rs.b_mean);
    }
    CHECK(curve.mean.front() == rs.signal);  // grid starts at zero
  }
}

TEST_CASE("scale equivariance of the curve") {
  RiskSummary rs;
  rs.signal = 1.0;
  rs.a_mean = 0.3;
  rs.b_mean = 0.2;
  const double scale = 1.7;
  RiskSummary scaled = rs;
  scaled.a_mean = scale * rs.a_mean;
  scaled.b_mean = scale * scale * rs.b_mean;
  for (double c : {0.0, 0.4, 1.0, 2.3}) {
    CHECK(scaled.g_at(c) == doctest::Approx(rs.g_at(scale * c)).epsilon(1e-12));
  }
}

TEST_CASE("vertex optimality on the grid") {
  RiskSummary rs;
  rs.signal = 1.0;
  rs.a_mean = 0.25;
  rs.b_mean = 0.1;
  const COpt copt = empirical_c_opt(rs);
  CHECK(copt.c_hat == doctest::Approx(2.5).epsilon(1e-14));
  const RiskCurve curve = inflation_curve(rs, default_inflation_grid(copt.c_hat));
  const double g_min = rs.g_at(copt.c_hat);
  for (double g : curve.mean) CHECK(g >= g_min - 1e-12);

  RiskSummary bad;
  bad.b_mean = 0.0;
  CHECK_THROWS_AS(empirical_c_opt(bad), std::domain_error);
}

TEST_CASE("standard errors shrink like one over root replicates") {
  const Spectrum s = make_block_spectrum(10, 400, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 10);
  double prev_a = 0.0, prev_b = 0.0;
  int step = 0;
  for (int reps : {100, 400, 1600}) {
    McOptions opt;
    opt.replicates = reps;
    opt.seed = 18;
    opt.threads = 2;
    const RiskSummary rs =
        mc_risk_summary(s, beta, NoiseModel::homoscedastic(0.5), 10, min_norm_recipe(), opt);
    if (step > 0) {
      CHECK(prev_a / rs.a_se == doctest::Approx(2.0).epsilon(0.2));
      CHECK(prev_b / rs.b_se == doctest::Approx(2.0).epsilon(0.2));
    }
    prev_a = rs.a_se;
    prev_b = rs.b_se;
    ++step;
  }
}

TEST_CASE("risk derivative at zero penalty") {
  // sigma = 0 gives a zero slope.
  {
    const Spectrum s = make_custom_spectrum(std::vector<double>(8, 1.0), true);
    const BetaCoefficients beta = make_beta_topk(s, 8);
    RngStream stream(19, 0, StreamPurpose::design);
    const DesignSample sample = sample_design(s, 4, NoiseModel::none(), beta, stream, 0);
    const GramFactor gf = gram_factorize(sample);
    CHECK(risk_derivative_at_zero(s, sample, gf, 0.0) == 0.0);
  }

  // Scalar case |x|^2 = 4: slope is -2 sigma^2 tr(A^{-2}) = -2/16. The
  // finite-difference oracle below pins the trace power.
  {
    Spectrum s = make_custom_spectrum({1.0}, false);
    DesignSample sample;
    sample.x.resize(1, 1);
    sample.x << 2.0;
    sample.eps = Eigen::VectorXd::Zero(1);
    sample.y = Eigen::VectorXd::Zero(1);
    const GramFactor gf = gram_factorize(sample);
    CHECK(risk_derivative_at_zero(s, sample, gf, 1.0) ==
          doctest::Approx(-0.125).epsilon(1e-12));
  }

  // Non-isotropic spectra are rejected.
  {
    const Spectrum s = make_block_spectrum(4, 40, 0.2);
    const BetaCoefficients beta = make_beta_topk(s, 4);
    RngStream stream(20, 0, StreamPurpose::design);
    const DesignSample sample = sample_design(s, 4, NoiseModel::none(), beta, stream, 0);
    const GramFactor gf = gram_factorize(sample);
    CHECK_THROWS_AS(risk_derivative_at_zero(s, sample, gf, 1.0), std::invalid_argument);
  }
}

TEST_CASE("finite differences of the conditional risk match the formula") {
  const int n = 10, d = 20;
  const double sigma2 = 1.0;
  const Spectrum s = make_custom_spectrum(std::vector<double>(d, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, d);
  RngStream stream(21, 0, StreamPurpose::design);
  const DesignSample sample = sample_design(s, n, NoiseModel::none(), beta, stream, 0);
  const GramFactor gf = gram_factorize(sample);

  // Dense, independent evaluation of the noise-averaged conditional risk.
  auto conditional_risk = [&](double lambda) {
    const Eigen::MatrixXd shifted =
        gf.gram + lambda * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd binv = shifted.inverse();
    const Eigen::VectorXd theta_bar =
        sample.x.transpose() * (binv * (sample.x * beta.coeffs));
    const double bias = (theta_bar - beta.coeffs).squaredNorm();
    const double noise_tr = (sample.x.transpose() * binv * binv * sample.x).trace();
    return bias + sigma2 * noise_tr;
  };
  const double delta = 1e-4 * gf.gram.trace() / n;
  const double fd = (conditional_risk(delta) - conditional_risk(0.0)) / delta;
  const double formula = risk_derivative_at_zero(s, sample, gf, sigma2);
  CHECK(fd == doctest::Approx(formula).epsilon(0.05));
  CHECK(formula < 0.0);
}

TEST_CASE("square noiseless design has zero ridge risk at zero penalty") {
  const int n = 10;
  const Spectrum s = make_custom_spectrum(std::vector<double>(n, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, n);
  McOptions opt;
  opt.replicates = 10;
  opt.seed = 22;
  opt.threads = 2;
  const std::vector<double> grid = {0.0, 0.5, 5.0};
  const RidgeSweepResult sweep = ridge_sweep(s, beta, 0.0, n, grid, opt);
  CHECK(sweep.curve.mean[0] <= 1e-10);
  CHECK(sweep.curve.mean[1] > sweep.curve.mean[0]);
  CHECK(sweep.curve.mean[2] > sweep.curve.mean[1]);
}

TEST_CASE("aligned spiked design prefers a negative penalty") {
  // High signal-to-noise with the signal on the spike: anti-shrinkage wins,
  // so the per-draw argmin lands at a negative penalty in most replicates.
  const int n = 40, d = 160;
  const Spectrum s = make_spiked_spectrum(d, 4.0);
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(d);
  raw[0] = 1.0;
  const BetaCoefficients beta = make_beta_custom(s, raw, true);
  McOptions opt;
  opt.replicates = 60;
  opt.seed = 23;
  opt.threads = 2;
  const std::vector<double> grid = default_ridge_grid(s, beta, n, opt);
  const RidgeSweepResult sweep = ridge_sweep(s, beta, 0.02, n, grid, opt);
  CHECK(sweep.argmin_negative > sweep.argmin_positive);
}
