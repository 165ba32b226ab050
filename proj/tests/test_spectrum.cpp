#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "anisoreg/assumptions.hpp"
#include "anisoreg/sampling.hpp"
#include "anisoreg/spectrum.hpp"

using namespace anisoreg;

namespace {

// Independent long-double sums used as the oracle for all trace functionals.
double oracle_sum(const std::vector<double>& v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x);
  return static_cast<double>(acc);
}

double oracle_sum_sq(const std::vector<double>& v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x) * x;
  return static_cast<double>(acc);
}

}  // namespace

TEST_CASE("block spectrum matches the direct formula") {
  const Spectrum s = make_block_spectrum(10, 1000, 0.1);
  CHECK(s.dim() == 1000);
  CHECK(s.top() == doctest::Approx(10.0).epsilon(1e-14));
  const double tail_oracle = (1000.0 / 990.0) * 0.9;  // 0.909090...
  CHECK(s.eigenvalues[10] == doctest::Approx(tail_oracle).epsilon(1e-15));
  CHECK(s.eigenvalues[999] == s.eigenvalues[10]);
  CHECK(std::abs(spectrum_trace(s) - 1000.0) <= 1e-12 * 1000.0);
  CHECK(s.trace_normalized);
}

TEST_CASE("block spectrum rejects the degenerate and unseparated cases") {
  CHECK_THROWS_AS(make_block_spectrum(1, 2, 0.5), std::invalid_argument);  // top == tail
  CHECK_THROWS_AS(make_block_spectrum(10, 10, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_block_spectrum(10, 1000, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_block_spectrum(10, 1000, 1.0), std::invalid_argument);
}

TEST_CASE("large block spectrum functionals against summation oracle") {
  const int n = 100, d = 100000;
  const Spectrum s = make_block_spectrum(n, d, 0.1);
  const SpectrumFunctionals f = functionals(s, n);
  CHECK(f.rho == doctest::Approx(0.1).epsilon(1e-12));
  const double r_oracle = oracle_sum_sq(s.eigenvalues) /
                          (oracle_sum(s.eigenvalues) * oracle_sum(s.eigenvalues));
  CHECK(f.r_n == doctest::Approx(r_oracle).epsilon(1e-12));
  CHECK(f.r_n == doctest::Approx(1.08e-4).epsilon(2e-3));
}

TEST_CASE("power-law spectrum normalization") {
  const int n = 10, d = 100;
  const double a = 0.5;
  const Spectrum s = make_power_law_spectrum(n, d, a, 0.1);
  std::vector<double> raw(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) raw[static_cast<std::size_t>(i)] = std::pow(double(i + 1), -a);
  const double kappa = d / oracle_sum(raw);
  CHECK(kappa == doctest::Approx(5.3795).epsilon(2e-4));
  for (int i : {0, 4, 99})
    CHECK(s.eigenvalues[static_cast<std::size_t>(i)] ==
          doctest::Approx(kappa * raw[static_cast<std::size_t>(i)]).epsilon(1e-13));
  CHECK(std::abs(spectrum_trace(s) - d) <= 1e-12 * d);
}

TEST_CASE("power-law edge cases") {
  const Spectrum single = make_power_law_spectrum(1, 1, 0.5, 0.1);
  CHECK(single.dim() == 1);
  CHECK(single.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-14));

  const Spectrum flat = make_power_law_spectrum(10, 50, 1e-9, 0.1);
  for (double v : flat.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(make_power_law_spectrum(10, 100, 1.5, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(make_power_law_spectrum(10, 100, 0.0, 0.1), std::invalid_argument);
  // After normalization the top eigenvalue is ~5.55 > (1/8) d/n = 0.3125.
  CHECK_THROWS_AS(make_power_law_spectrum(40, 100, 0.5, 0.1, true), std::invalid_argument);
}

TEST_CASE("two-regime spectrum matches the direct evaluation") {
  const int n = 10, d = 1000;
  const double q = 0.1, a_min = 0.5, a0 = 1.0, a1 = 0.5, a2 = 0.5;
  const Spectrum s = make_two_regime_spectrum(n, d, q, a_min, a0, a1, a2);

  const double ratio = double(d) / n;
  std::vector<double> raw(static_cast<std::size_t>(d));
  for (int i = 1; i <= n; ++i)
    raw[static_cast<std::size_t>(i - 1)] = q * ratio * (a_min + std::pow(i, -a0));
  for (int i = n + 1; i <= d; ++i)
    raw[static_cast<std::size_t>(i - 1)] =
        std::pow(ratio, -a1) * std::pow(double(i - n + 1), -a2);
  const double scale = d / oracle_sum(raw);
  for (int i : {0, 5, 9, 10, 500, 999})
    CHECK(s.eigenvalues[static_cast<std::size_t>(i)] ==
          doctest::Approx(scale * raw[static_cast<std::size_t>(i)]).epsilon(1e-12));
  CHECK(std::abs(spectrum_trace(s) - d) <= 1e-12 * d);

  // Vanishing head at the junction: a_min = 0 with a steep head decay makes
  // the last head value smaller than the first tail value.
  CHECK_THROWS_AS(make_two_regime_spectrum(10, 1000, 1e-4, 0.0, 50.0, 0.5, 0.5),
                  std::invalid_argument);
}

TEST_CASE("two-regime rescale can violate the top-eigenvalue cap") {
  // With q = 0.125 and these shapes the joint rescale pushes the top
  // eigenvalue above (1/8) d/n, which the additive checker must flag.
  const int n = 10, d = 1000;
  const Spectrum s = make_two_regime_spectrum(n, d, 0.125, 0.5, 1.0, 0.5, 0.5);
  const BetaCoefficients beta = make_beta_topk(s, n);
  const AssumptionReport rep =
      check_assumptions(s, beta, n, 0.0, 0.0, AssumptionSet::additive);
  CHECK_FALSE(rep.passed);
  bool top_violated = false;
  for (const auto& v : rep.violations)
    if (v.clause == "additive.2.top") top_violated = true;
  CHECK(top_violated);
}

TEST_CASE("spiked spectrum") {
  const Spectrum id = make_spiked_spectrum(4, 0.0);
  for (double v : id.eigenvalues) CHECK(v == 1.0);

  const Spectrum sp = make_spiked_spectrum(4, 2.0);
  CHECK(sp.eigenvalues == std::vector<double>{3.0, 1.0, 1.0, 1.0});
  CHECK_FALSE(sp.trace_normalized);

  // Boundary case of the spike-size precondition at n = 100, d = 2000.
  const Spectrum big = make_spiked_spectrum(2000, 2.0);
  CHECK(2.0 <= 0.1 * 2000.0 / 100.0);
  CHECK(big.top() == 3.0);
  CHECK_THROWS_AS(make_spiked_spectrum(0, 1.0), std::invalid_argument);
}

TEST_CASE("functionals on simple spectra") {
  const Spectrum iso = make_custom_spectrum(std::vector<double>(100, 1.0), true);
  const SpectrumFunctionals f = functionals(iso, 10);
  CHECK(f.r_n == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(f.eff_rank == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(f.rho == doctest::Approx(0.1).epsilon(1e-12));

  const Spectrum blk = make_block_spectrum(10, 1000, 0.1);
  const SpectrumFunctionals fb = functionals(blk, 10);
  const double tr2_oracle = oracle_sum_sq(blk.eigenvalues);
  CHECK(tr2_oracle == doctest::Approx(1818.18).epsilon(1e-4));
  CHECK(fb.trace_sq == doctest::Approx(tr2_oracle).epsilon(1e-12));
  CHECK(fb.r_n == doctest::Approx(1.818e-3).epsilon(1e-3));

  const Spectrum one = make_custom_spectrum({7.0}, true);
  const SpectrumFunctionals f1 = functionals(one, 1);
  CHECK(f1.r_n == 1.0);
  CHECK(f1.eff_rank == 1.0);
}

TEST_CASE("effective-rank chain holds for random spectra") {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const int d = 2 + int(std::uniform_real_distribution<double>(0, 200)(gen));
    std::vector<double> v(static_cast<std::size_t>(d));
    for (auto& x : v) x = std::exp(u(gen));
    const Spectrum s = make_custom_spectrum(v, true);
    const SpectrumFunctionals f = functionals(s, 1);
    CHECK(f.eff_rank <= f.eff_rank_sq * (1 + 1e-12));
    CHECK(f.eff_rank_sq <= f.eff_rank * f.eff_rank * (1 + 1e-12));
  }
}

TEST_CASE("functionals are permutation invariant") {
  std::mt19937_64 gen(7);
  std::vector<double> v(64);
  for (auto& x : v) x = std::exp(std::uniform_real_distribution<double>(-2, 2)(gen));
  const Spectrum a = make_custom_spectrum(v, true);
  std::shuffle(v.begin(), v.end(), gen);
  const Spectrum b = make_custom_spectrum(v, true);
  const SpectrumFunctionals fa = functionals(a, 5), fb = functionals(b, 5);
  CHECK(fa.trace == doctest::Approx(fb.trace).epsilon(1e-13));
  CHECK(fa.trace_sq == doctest::Approx(fb.trace_sq).epsilon(1e-13));
  CHECK(fa.eff_rank == doctest::Approx(fb.eff_rank).epsilon(1e-13));
}

TEST_CASE("weak conditions pass on the aligned block model") {
  const int n = 100, d = 100000;
  const Spectrum s = make_block_spectrum(n, d, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, n);
  const AssumptionReport rep = check_assumptions(s, beta, n, 0.0, 0.0, AssumptionSet::weak);
  CHECK(rep.passed);
  CHECK(rep.q == doctest::Approx(0.1).epsilon(1e-10));
  // The top block carries the whole signal, so the cubic alignment witness is
  // exactly one: (n^2/d^2) b'S^3 b = rho * q = q^2 on the pure block model.
  CHECK(rep.c1_witness == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("additive margin vanishes exactly in the isotropic noiseless case") {
  // Dyadic sizes keep every quantity exact in floating point: the margin is
  // exactly zero and the strict positivity clause fails.
  const int n = 64, d = 512;
  const Spectrum s =
      make_custom_spectrum(std::vector<double>(static_cast<std::size_t>(d), 1.0), true);
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(d);
  raw[0] = 1.0;
  const BetaCoefficients beta = make_beta_custom(s, raw, true);
  const AssumptionReport rep =
      check_assumptions(s, beta, n, 0.0, 0.0, AssumptionSet::additive);
  CHECK_FALSE(rep.passed);
  bool found = false;
  for (const auto& v : rep.violations)
    if (v.clause == "additive.3") {
      found = true;
      CHECK(v.measured == 0.0);
    }
  CHECK(found);
}

TEST_CASE("strong conditions imply the weak conditions") {
  // The weak caps are derived from the same constants, so any instance that
  // clears the strong set must clear the weak set with consistent options.
  AssumptionOptions opt;
  opt.alpha_noise = 20.0;
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> uq(0.05, 0.12);
  int strong_passing = 0;
  for (int t = 0; t < 400 && strong_passing < 100; ++t) {
    const int n = 20 + int(std::uniform_real_distribution<double>(0, 80)(gen));
    const int d = n * (60 + int(std::uniform_real_distribution<double>(0, 190)(gen)));
    const double q = uq(gen);
    Spectrum s;
    try {
      s = make_block_spectrum(n, d, q);
    } catch (const std::invalid_argument&) {
      continue;
    }
    const int k = 1 + int(std::uniform_real_distribution<double>(0, n - 1)(gen));
    const BetaCoefficients beta = make_beta_topk(s, k);
    const double sigma2 = std::uniform_real_distribution<double>(0.0, 0.5)(gen);
    const AssumptionReport strong =
        check_assumptions(s, beta, n, sigma2, sigma2, AssumptionSet::strong, opt);
    if (!strong.passed) continue;
    ++strong_passing;
    const AssumptionReport weak =
        check_assumptions(s, beta, n, sigma2, sigma2, AssumptionSet::weak, opt);
    CHECK(weak.passed);
  }
  // The generator must actually exercise the implication.
  CHECK(strong_passing >= 100);
}

TEST_CASE("rate-improvement set evaluates its extra clauses") {
  const Spectrum s = make_block_spectrum(100, 100000, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 100);
  const AssumptionReport rep =
      check_assumptions(s, beta, 100, 0.0, 0.0, AssumptionSet::rate_improvement);
  CHECK(rep.passed);  // pure block: cubic alignment tight, noise rank small
  const AssumptionReport noisy =
      check_assumptions(s, beta, 100, 0.0, std::exp(20.0), AssumptionSet::rate_improvement);
  CHECK_FALSE(noisy.passed);
}

TEST_CASE("assumption checker rejects dimension mismatches") {
  const Spectrum s = make_block_spectrum(10, 100, 0.3);
  BetaCoefficients beta;
  beta.coeffs = Eigen::VectorXd::Ones(50);
  CHECK_THROWS_AS(check_assumptions(s, beta, 10, 0.0, 0.0, AssumptionSet::weak),
                  std::invalid_argument);
}

TEST_CASE("spectrum validation") {
  Spectrum bad;
  bad.eigenvalues = {1.0, 2.0};  // increasing
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad.eigenvalues = {1.0, -1.0};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  CHECK_THROWS_AS(make_custom_spectrum({}, true), std::invalid_argument);
}
