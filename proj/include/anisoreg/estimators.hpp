#pragma once

// Estimators built on the n x n Gram matrix XX'. The ambient dimension d is
// large, so nothing here ever forms a d x d object: solves run through a
// Cholesky factorization of the Gram matrix, the minimum-norm interpolator is
// X' (XX')^{-1} Y, and projections onto the row space are applied implicitly.

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "anisoreg/sampling.hpp"
#include "anisoreg/spectrum.hpp"

namespace anisoreg {

struct Provenance {
  enum class Kind {
    min_norm,
    ridge,
    data_split,
    inflated,
    shrink_toward,
    unbiased_attempt,
    custom,
  };
  Kind kind = Kind::custom;
  double scale = 1.0;          // c for inflated / shrink_toward
  double lambda = 0.0;         // ridge penalty
  int splits = 0;              // data_split block count
  Kind base = Kind::min_norm;  // wrapped estimator for inflated / shrink / unbiased
};

struct EstimateVector {
  Eigen::VectorXd coeffs;  // eigenbasis coordinates
  Provenance provenance;
};

// Factorization of the Gram matrix XX'. The primary path is Cholesky; if the
// Gram matrix is numerically singular the factorization falls back to a
// symmetric eigendecomposition whose inverted eigenvalues carry a relative
// jitter of 1e-12 * tr(Gram)/n, and the event is recorded on the factor.
class GramFactor {
 public:
  Eigen::MatrixXd gram;
  double min_eig = 0.0;
  bool fallback_used = false;
  double jitter = 0.0;

  // Solves (XX') z = b with one step of iterative refinement.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd z = raw_solve(b);
    z += raw_solve(b - gram * z);
    return z;
  }

  Eigen::MatrixXd solve_matrix(const Eigen::MatrixXd& b) const {
    Eigen::MatrixXd z = raw_solve_matrix(b);
    z += raw_solve_matrix(b - gram * z);
    return z;
  }

  double trace_inverse() const {
    const int n = static_cast<int>(gram.rows());
    return solve_matrix(Eigen::MatrixXd::Identity(n, n)).trace();
  }

  friend GramFactor gram_factorize_rows(const Eigen::Ref<const Eigen::MatrixXd>& x);

 private:
  Eigen::VectorXd raw_solve(const Eigen::VectorXd& b) const {
    if (!fallback_used) return llt_.solve(b);
    return eigvecs_ * (inv_eigs_.asDiagonal() * (eigvecs_.transpose() * b));
  }
  Eigen::MatrixXd raw_solve_matrix(const Eigen::MatrixXd& b) const {
    if (!fallback_used) return llt_.solve(b);
    return eigvecs_ * (inv_eigs_.asDiagonal() * (eigvecs_.transpose() * b));
  }

  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd eigvecs_;
  Eigen::VectorXd inv_eigs_;
};

inline GramFactor gram_factorize_rows(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (n < 1) throw std::invalid_argument("gram_factorize: need n >= 1");
  if (d < n) throw std::invalid_argument("gram_factorize: need d >= n");

  GramFactor gf;
  gf.gram = Eigen::MatrixXd::Zero(n, n);
  gf.gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  gf.gram = gf.gram.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_values(gf.gram,
                                                            Eigen::EigenvaluesOnly);
  gf.min_eig = eig_values.eigenvalues().minCoeff();

  const double mean_diag = gf.gram.trace() / n;
  gf.llt_.compute(gf.gram);
  const bool degenerate =
      gf.llt_.info() != Eigen::Success || gf.min_eig <= 1e-14 * mean_diag;
  if (degenerate) {
    gf.fallback_used = true;
    gf.jitter = 1e-12 * mean_diag;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gf.gram);
    gf.eigvecs_ = eig.eigenvectors();
    gf.inv_eigs_ = (eig.eigenvalues().cwiseMax(0.0).array() + gf.jitter).inverse();
  }
  return gf;
}

inline GramFactor gram_factorize(const DesignSample& sample) {
  return gram_factorize_rows(sample.x);
}

inline EstimateVector min_norm(const DesignSample& sample, const GramFactor& gf) {
  EstimateVector est;
  est.coeffs = sample.x.transpose() * gf.solve(sample.y);
  est.provenance.kind = Provenance::Kind::min_norm;
  return est;
}

inline EstimateVector inflate(const EstimateVector& theta, double c) {
  EstimateVector est;
  est.coeffs = c * theta.coeffs;
  est.provenance.kind = Provenance::Kind::inflated;
  est.provenance.scale = c;
  est.provenance.base = theta.provenance.kind;
  return est;
}

// Ridge through the Gram matrix: theta = X' (XX' + lambda I)^{-1} Y. Negative
// penalties are admissible down to -(1-margin) * min_eig(XX'); beyond that the
// conditioning is hopeless and the call is rejected.
inline EstimateVector ridge(const DesignSample& sample, const GramFactor& gf, double lambda,
                            double margin = 0.05) {
  const double floor = -(1.0 - margin) * gf.min_eig;
  if (lambda <= floor) {
    std::ostringstream msg;
    msg << "ridge: lambda " << lambda << " at or below -(1-margin)*min_eig = " << floor
        << " (min_eig " << gf.min_eig << ")";
    throw std::invalid_argument(msg.str());
  }
  const int n = sample.n();
  Eigen::MatrixXd shifted = gf.gram + lambda * Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("ridge: shifted Gram factorization failed");
  Eigen::VectorXd z = llt.solve(sample.y);
  z += llt.solve(sample.y - shifted * z);
  EstimateVector est;
  est.coeffs = sample.x.transpose() * z;
  est.provenance.kind = Provenance::Kind::ridge;
  est.provenance.lambda = lambda;
  return est;
}

struct DataSplit {
  EstimateVector theta_ds;  // sum of per-block interpolators over blocks 1..N-1
  int n_splits = 0;
  int holdout_begin = 0;  // block N, reserved for plug-in estimation
  int holdout_size = 0;
};

inline int default_split_count(int n) {
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
}

// Splits the rows into N blocks (the first N-1 of size floor(n/N), the last
// taking the remainder), sums the per-block minimum-norm interpolators over
// blocks 1..N-1 and reserves block N as the holdout.
inline DataSplit data_split(const DesignSample& sample, int n_splits) {
  const int n = sample.n();
  const int d = sample.dim();
  if (n_splits < 2) throw std::invalid_argument("data_split: need at least 2 blocks");
  const int block = n / n_splits;
  if (block < 1) throw std::invalid_argument("data_split: empty block");
  const int last_size = n - (n_splits - 1) * block;
  if (block >= d || last_size >= d)
    throw std::invalid_argument("data_split: block size must stay below the dimension");

  DataSplit out;
  out.n_splits = n_splits;
  out.holdout_begin = (n_splits - 1) * block;
  out.holdout_size = last_size;
  out.theta_ds.coeffs = Eigen::VectorXd::Zero(d);
  for (int b = 0; b < n_splits - 1; ++b) {
    const auto rows = sample.x.middleRows(b * block, block);
    const auto labels = sample.y.segment(b * block, block);
    GramFactor gf = gram_factorize_rows(rows);
    out.theta_ds.coeffs += rows.transpose() * gf.solve(labels);
  }
  out.theta_ds.provenance.kind = Provenance::Kind::data_split;
  out.theta_ds.provenance.splits = n_splits;
  return out;
}

// Plug-in inflation constant from a holdout block: the ratio of the mean of
// theta' z_i eta_i to the mean of (theta' z_i)^2.
inline double estimate_c_star(const EstimateVector& theta,
                              const Eigen::Ref<const Eigen::MatrixXd>& holdout_x,
                              const Eigen::Ref<const Eigen::VectorXd>& holdout_y) {
  const auto k = holdout_x.rows();
  if (k < 1) throw std::invalid_argument("estimate_c_star: empty holdout");
  if (holdout_x.cols() != theta.coeffs.size() || holdout_y.size() != k)
    throw std::invalid_argument("estimate_c_star: dimension mismatch");
  const Eigen::VectorXd proj = holdout_x * theta.coeffs;
  const double q_hat = proj.dot(holdout_y) / static_cast<double>(k);
  const double r_hat = proj.squaredNorm() / static_cast<double>(k);
  if (r_hat == 0.0)
    throw std::domain_error("estimate_c_star: degenerate holdout (r_hat = 0)");
  return q_hat / r_hat;
}

// Coordinatewise rescale by (tr(S)/n) / lambda_i, the diagonal surrogate for
// inverting the expected row-space projector. Used to demonstrate that naive
// unbiasing diverges; not a useful estimator.
inline EstimateVector unbiased_attempt(const EstimateVector& theta, const Spectrum& s,
                                       int n) {
  if (theta.coeffs.size() != s.dim())
    throw std::invalid_argument("unbiased_attempt: dimension mismatch");
  const double trace = spectrum_trace(s);
  EstimateVector est;
  est.coeffs = theta.coeffs;
  for (int i = 0; i < s.dim(); ++i)
    est.coeffs[i] *= (trace / n) / s.eigenvalues[static_cast<std::size_t>(i)];
  est.provenance.kind = Provenance::Kind::unbiased_attempt;
  est.provenance.base = theta.provenance.kind;
  return est;
}

// (1-c) theta + c v for a unit direction v.
inline EstimateVector shrink_toward(const EstimateVector& theta,
                                    const Eigen::VectorXd& direction, double c) {
  if (direction.size() != theta.coeffs.size())
    throw std::invalid_argument("shrink_toward: dimension mismatch");
  if (std::abs(direction.norm() - 1.0) > 1e-8)
    throw std::invalid_argument("shrink_toward: direction must have unit norm");
  EstimateVector est;
  est.coeffs = (1.0 - c) * theta.coeffs + c * direction;
  est.provenance.kind = Provenance::Kind::shrink_toward;
  est.provenance.scale = c;
  est.provenance.base = theta.provenance.kind;
  return est;
}

// Row-space projector applied to a vector: P w = X' (XX')^{-1} X w.
inline Eigen::VectorXd project_rowspace(const DesignSample& sample, const GramFactor& gf,
                                        const Eigen::VectorXd& w) {
  return sample.x.transpose() * gf.solve(sample.x * w);
}

// tr(P) accumulated column by column as sum_j x_j' (XX')^{-1} x_j; equals the
// row count up to solver error. Chunked to bound temporary memory.
inline double projector_trace(const DesignSample& sample, const GramFactor& gf) {
  const int d = sample.dim();
  const int chunk = 512;
  double acc = 0.0;
  for (int j0 = 0; j0 < d; j0 += chunk) {
    const int width = std::min(chunk, d - j0);
    const Eigen::MatrixXd cols = sample.x.middleCols(j0, width);
    const Eigen::MatrixXd solved = gf.solve_matrix(cols);
    acc += cols.cwiseProduct(solved).sum();
  }
  return acc;
}

}  // namespace anisoreg
