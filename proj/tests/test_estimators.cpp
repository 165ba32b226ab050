#include "doctest.h"

#include <cmath>
#include <vector>

#include "anisoreg/estimators.hpp"
#include "anisoreg/parallel.hpp"
#include "anisoreg/risk.hpp"
#include "anisoreg/sampling.hpp"

using namespace anisoreg;

namespace {

DesignSample sample_for(const Spectrum& s, int n, const NoiseModel& noise,
                        const BetaCoefficients& beta, std::uint64_t seed, int rep) {
  RngStream stream(seed, static_cast<std::uint64_t>(rep), StreamPurpose::design);
  return sample_design(s, n, noise, beta, stream, rep);
}

}  // namespace

TEST_CASE("scalar Gram factorization is plain division") {
  DesignSample sample;
  sample.x.resize(1, 3);
  sample.x << 1.0, 2.0, 2.0;  // |x|^2 = 9
  sample.eps = Eigen::VectorXd::Zero(1);
  sample.y = Eigen::VectorXd::Constant(1, 3.0);
  const GramFactor gf = gram_factorize(sample);
  CHECK(gf.gram(0, 0) == doctest::Approx(9.0).epsilon(1e-15));
  Eigen::VectorXd b(1);
  b << 4.5;
  CHECK(gf.solve(b)[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("nearly square Gram matrices stay positive definite") {
  const Spectrum s = make_custom_spectrum(std::vector<double>(13, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, 13);
  for (int seed = 0; seed < 100; ++seed) {
    const DesignSample sample = sample_for(s, 12, NoiseModel::none(), beta, 60, seed);
    const GramFactor gf = gram_factorize(sample);
    CHECK(gf.min_eig > 0.0);
    CHECK_FALSE(gf.fallback_used);
  }
}

TEST_CASE("duplicate rows engage the eigendecomposition fallback") {
  DesignSample sample;
  sample.x.resize(3, 6);
  sample.x << 1, 2, 3, 4, 5, 6, 1, 2, 3, 4, 5, 6, 0, 1, 0, 1, 0, 1;
  sample.eps = Eigen::VectorXd::Zero(3);
  sample.y = Eigen::VectorXd::Ones(3);
  const GramFactor gf = gram_factorize(sample);
  CHECK(gf.fallback_used);
  CHECK(gf.jitter > 0.0);
  // The fallback still solves consistent systems to working accuracy.
  const Eigen::VectorXd b = gf.gram * Eigen::VectorXd::Ones(3);
  const Eigen::VectorXd z = gf.solve(b);
  CHECK((gf.gram * z - b).norm() <= 1e-6 * b.norm());
}

TEST_CASE("solver residuals on probe vectors") {
  const Spectrum s = make_block_spectrum(20, 300, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 20);
  const DesignSample sample = sample_for(s, 20, NoiseModel::homoscedastic(1.0), beta, 61, 0);
  const GramFactor gf = gram_factorize(sample);
  RngStream g(62, 0, StreamPurpose::aux);
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXd b(20);
    for (int i = 0; i < 20; ++i) b[i] = g.next_normal();
    const Eigen::VectorXd z = gf.solve(b);
    CHECK((gf.gram * z - b).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("square full-rank design recovers the signal exactly") {
  const Spectrum s = make_custom_spectrum(std::vector<double>(20, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, 20);
  const DesignSample sample = sample_for(s, 20, NoiseModel::none(), beta, 63, 0);
  const GramFactor gf = gram_factorize(sample);
  const EstimateVector theta = min_norm(sample, gf);
  CHECK((theta.coeffs - beta.coeffs).norm() <= 1e-8 * beta.coeffs.norm());
}

TEST_CASE("single-row interpolator is a scalar projection") {
  DesignSample sample;
  sample.x.resize(1, 2);
  sample.x << 1.0, 0.0;
  sample.eps = Eigen::VectorXd::Zero(1);
  sample.y = Eigen::VectorXd::Constant(1, 3.0);
  const GramFactor gf = gram_factorize(sample);
  const EstimateVector theta = min_norm(sample, gf);
  CHECK(theta.coeffs[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(theta.coeffs[1] == 0.0);
  CHECK(theta.provenance.kind == Provenance::Kind::min_norm);
}

TEST_CASE("projected signal mass is n/d on average for isotropic designs") {
  const int n = 10, d = 100, reps = 500;
  const Spectrum s = make_custom_spectrum(std::vector<double>(d, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, d);
  std::vector<double> vals(reps);
  for (int r = 0; r < reps; ++r) {
    const DesignSample sample = sample_for(s, n, NoiseModel::none(), beta, 64, r);
    const GramFactor gf = gram_factorize(sample);
    const EstimateVector theta = min_norm(sample, gf);
    vals[static_cast<std::size_t>(r)] = signal_dot(theta, beta, s);
  }
  const MeanSe ms = mean_se(vals);
  CHECK(std::abs(ms.mean - double(n) / d) <= 3.0 * ms.se);
}

TEST_CASE("inflate") {
  EstimateVector theta;
  theta.coeffs.resize(2);
  theta.coeffs << 1.0, -1.0;
  theta.provenance.kind = Provenance::Kind::min_norm;

  const EstimateVector same = inflate(theta, 1.0);
  CHECK(same.coeffs == theta.coeffs);
  const EstimateVector zero = inflate(theta, 0.0);
  CHECK(zero.coeffs.norm() == 0.0);
  const EstimateVector twice = inflate(theta, 2.0);
  CHECK(twice.coeffs[0] == 2.0);
  CHECK(twice.coeffs[1] == -2.0);
  CHECK(twice.provenance.kind == Provenance::Kind::inflated);
  CHECK(twice.provenance.base == Provenance::Kind::min_norm);
  CHECK(twice.provenance.scale == 2.0);
}

TEST_CASE("ridge behaviour across the penalty range") {
  const Spectrum s = make_block_spectrum(15, 200, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 15);
  const DesignSample sample = sample_for(s, 15, NoiseModel::homoscedastic(0.25), beta, 65, 0);
  const GramFactor gf = gram_factorize(sample);
  const EstimateVector mn = min_norm(sample, gf);

  const EstimateVector at_zero = ridge(sample, gf, 0.0);
  CHECK((at_zero.coeffs - mn.coeffs).norm() <= 1e-8 * std::max(1.0, mn.coeffs.norm()));

  const double huge = 1e12 * gf.gram.trace();
  const EstimateVector shrunk = ridge(sample, gf, huge);
  CHECK(shrunk.coeffs.norm() <= 1e-6);

  // Residual identity X theta = Gram (Gram + l I)^{-1} y.
  RngStream g(66, 0, StreamPurpose::aux);
  for (double lambda : {0.5 * gf.gram.trace() / 15, -0.3 * gf.min_eig}) {
    const EstimateVector tl = ridge(sample, gf, lambda);
    const Eigen::MatrixXd shifted =
        gf.gram + lambda * Eigen::MatrixXd::Identity(15, 15);
    const Eigen::VectorXd z = shifted.llt().solve(sample.y);
    CHECK((sample.x * tl.coeffs - gf.gram * z).norm() <= 1e-8 * sample.y.norm());
  }

  CHECK_THROWS_AS(ridge(sample, gf, -0.96 * gf.min_eig), std::invalid_argument);
}

TEST_CASE("data split sums the per-block interpolators") {
  const Spectrum s = make_block_spectrum(4, 60, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 4);
  const DesignSample half = sample_for(s, 4, NoiseModel::homoscedastic(0.1), beta, 67, 0);

  // Duplicated halves: with N = 2 the split estimator equals the plain
  // interpolator of the first half.
  DesignSample doubled;
  doubled.x.resize(8, 60);
  doubled.x << half.x, half.x;
  doubled.eps.resize(8);
  doubled.eps << half.eps, half.eps;
  doubled.y.resize(8);
  doubled.y << half.y, half.y;
  const DataSplit ds = data_split(doubled, 2);
  const GramFactor gf_half = gram_factorize(half);
  const EstimateVector mn_half = min_norm(half, gf_half);
  CHECK((ds.theta_ds.coeffs - mn_half.coeffs).norm() <=
        1e-10 * std::max(1.0, mn_half.coeffs.norm()));
  CHECK(ds.holdout_begin == 4);
  CHECK(ds.holdout_size == 4);

  // n = 9, N = 3: three blocks of three rows, the split sums blocks 1-2.
  const DesignSample nine = sample_for(s, 9, NoiseModel::none(), beta, 68, 0);
  const DataSplit ds3 = data_split(nine, 3);
  CHECK(ds3.holdout_begin == 6);
  CHECK(ds3.holdout_size == 3);
  Eigen::VectorXd expect = Eigen::VectorXd::Zero(60);
  for (int b = 0; b < 2; ++b) {
    DesignSample blockwise;
    blockwise.x = nine.x.middleRows(3 * b, 3);
    blockwise.eps = nine.eps.segment(3 * b, 3);
    blockwise.y = nine.y.segment(3 * b, 3);
    expect += min_norm(blockwise, gram_factorize(blockwise)).coeffs;
  }
  CHECK((ds3.theta_ds.coeffs - expect).norm() <= 1e-10 * std::max(1.0, expect.norm()));
  CHECK(ds3.theta_ds.provenance.kind == Provenance::Kind::data_split);
  CHECK(ds3.theta_ds.provenance.splits == 3);

  CHECK_THROWS_AS(data_split(nine, 10), std::invalid_argument);  // empty block
  CHECK_THROWS_AS(data_split(nine, 1), std::invalid_argument);
}

TEST_CASE("data split rejects blocks at least as large as the dimension") {
  const Spectrum s = make_custom_spectrum(std::vector<double>(15, 1.0), true);
  const BetaCoefficients beta = make_beta_topk(s, 15);
  RngStream stream(69, 0, StreamPurpose::design);
  // 40 rows in dimension 15: N = 2 gives block size 20 >= 15.
  const DesignSample sample = sample_design(s, 40, NoiseModel::none(), beta, stream, 0);
  CHECK_THROWS_AS(data_split(sample, 2), std::invalid_argument);
}

TEST_CASE("default split count is the square-root rule") {
  CHECK(default_split_count(400) == 20);
  CHECK(default_split_count(9) == 3);
  CHECK(default_split_count(10) == 4);
}

TEST_CASE("plug-in constant on exact and scaled signals") {
  const Spectrum s = make_block_spectrum(6, 80, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, 6);
  const DesignSample holdout = sample_for(s, 12, NoiseModel::none(), beta, 70, 0);

  EstimateVector exact;
  exact.coeffs = beta.coeffs;
  // Noiseless labels with theta = beta make q_hat and r_hat identical sums.
  CHECK(estimate_c_star(exact, holdout.x, holdout.y) == doctest::Approx(1.0).epsilon(1e-12));

  EstimateVector twice;
  twice.coeffs = 2.0 * beta.coeffs;
  CHECK(estimate_c_star(twice, holdout.x, holdout.y) == doctest::Approx(0.5).epsilon(1e-12));

  EstimateVector zero;
  zero.coeffs = Eigen::VectorXd::Zero(80);
  CHECK_THROWS_AS(estimate_c_star(zero, holdout.x, holdout.y), std::domain_error);
}

TEST_CASE("unbiased attempt rescaling") {
  const Spectrum iso = make_custom_spectrum(std::vector<double>(20, 1.0), true);
  EstimateVector theta;
  theta.coeffs = Eigen::VectorXd::Ones(20);
  const EstimateVector ub = unbiased_attempt(theta, iso, 5);
  for (int i = 0; i < 20; ++i) CHECK(ub.coeffs[i] == doctest::Approx(4.0).epsilon(1e-14));

  const Spectrum blk = make_block_spectrum(5, 50, 0.2);
  EstimateVector t2;
  t2.coeffs = Eigen::VectorXd::Ones(50);
  const EstimateVector ub2 = unbiased_attempt(t2, blk, 5);
  // Top coordinates scale by (tr/n)/lambda_1 = 1/q.
  CHECK(ub2.coeffs[0] == doctest::Approx(1.0 / 0.2).epsilon(1e-12));
}

TEST_CASE("shrink toward a direction") {
  EstimateVector theta;
  theta.coeffs.resize(3);
  theta.coeffs << 1.0, 2.0, 3.0;
  Eigen::VectorXd v(3);
  v << 1.0, 0.0, 0.0;
  CHECK(shrink_toward(theta, v, 0.0).coeffs == theta.coeffs);
  const EstimateVector at_one = shrink_toward(theta, v, 1.0);
  CHECK((at_one.coeffs - v).norm() == 0.0);
  Eigen::VectorXd bad(3);
  bad << 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(shrink_toward(theta, bad, 0.5), std::invalid_argument);
}

TEST_CASE("projector facts and linearity on random instances") {
  RngStream g(71, 0, StreamPurpose::aux);
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + int(g.next_unit() * 12);
    const int d = n + 3 + int(g.next_unit() * 40);
    std::vector<double> vals(static_cast<std::size_t>(d));
    for (auto& v : vals) v = std::exp(-1.5 + 3.0 * g.next_unit());
    const Spectrum s = make_custom_spectrum(vals, true);
    Eigen::VectorXd raw(d);
    for (int j = 0; j < d; ++j) raw[j] = g.next_normal();
    const BetaCoefficients beta = make_beta_custom(s, raw, true);
    const DesignSample sample =
        sample_for(s, n, NoiseModel::homoscedastic(0.2), beta, 72, t);
    const GramFactor gf = gram_factorize(sample);

    CHECK(std::abs(projector_trace(sample, gf) - n) <= 1e-6);

    Eigen::VectorXd w(d);
    for (int j = 0; j < d; ++j) w[j] = g.next_normal();
    const Eigen::VectorXd pw = project_rowspace(sample, gf, w);
    CHECK((project_rowspace(sample, gf, pw) - pw).norm() <=
          1e-8 * std::max(1.0, pw.norm()));

    // Minimal norm among interpolants, and membership in the row space.
    const EstimateVector mn = min_norm(sample, gf);
    const Eigen::VectorXd competitor = mn.coeffs + (w - pw);
    CHECK(mn.coeffs.squaredNorm() <=
          competitor.squaredNorm() + 1e-10 * std::max(1.0, mn.coeffs.squaredNorm()));
    CHECK((sample.x * mn.coeffs - sample.y).norm() <=
          1e-8 * std::max(1.0, sample.y.norm()));
    CHECK((mn.coeffs - project_rowspace(sample, gf, mn.coeffs)).norm() <=
          1e-8 * mn.coeffs.norm());

    // Linearity of the interpolator in the labels.
    Eigen::VectorXd y1(n), y2(n);
    for (int i = 0; i < n; ++i) y1[i] = g.next_normal();
    for (int i = 0; i < n; ++i) y2[i] = g.next_normal();
    const Eigen::VectorXd t1 = sample.x.transpose() * gf.solve(y1);
    const Eigen::VectorXd t2 = sample.x.transpose() * gf.solve(y2);
    const Eigen::VectorXd t12 = sample.x.transpose() * gf.solve(y1 + y2);
    CHECK((t12 - t1 - t2).norm() <= 1e-10 * std::max(1.0, t12.norm()));
  }
}

TEST_CASE("split estimator mean signal moment stays in its band") {
  // E[theta_ds' S b] tracks (n/d) b'S^2 b up to O(1/N) and rho/N corrections;
  // the band uses the recorded slack constants (0.2 relative, factor 4 on the
  // order-one 1/N term).
  const int n = 60, d = 3000, splits = 6;
  const Spectrum s = make_block_spectrum(n, d, 0.1);
  const BetaCoefficients beta = make_beta_topk(s, n);
  const SpectrumFunctionals f = functionals(s, n);
  // Top-block signal: q = (n/d) b'S^2 b collapses to (n/d) lambda_1 = rho.
  const double q = f.rho;

  std::vector<double> vals;
  for (int r = 0; r < 200; ++r) {
    RngStream stream(73, static_cast<std::uint64_t>(r), StreamPurpose::design);
    const DesignSample sample =
        sample_design(s, n, NoiseModel::homoscedastic(0.25), beta, stream, r);
    const DataSplit ds = data_split(sample, splits);
    vals.push_back(signal_dot(ds.theta_ds, beta, s));
  }
  const MeanSe ms = mean_se(vals);
  const double lower = q * (1.0 - 0.2 - 3.0 * f.rho / splits);
  const double upper = q * (1.0 + 4.0 / splits);
  CHECK(ms.mean >= lower - 3.0 * ms.se);
  CHECK(ms.mean <= upper + 3.0 * ms.se);
}
