#include "gplcp/cell_lcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>
#include <boost/random/normal_distribution.hpp>

#include "gplcp/error.hpp"
#include "gplcp/rng.hpp"

namespace gplcp {

namespace {

using Mat8 = Eigen::Matrix<double, 8, 8>;

// Lower factor of cov, escalating jitter when needed. Returns false only when
// every rung fails.
bool jittered_cholesky(const Mat8& cov, Mat8& lower) {
  const double max_diag = cov.diagonal().maxCoeff();
  Eigen::LLT<Mat8> llt(cov);
  if (llt.info() == Eigen::Success) {
    lower = llt.matrixL();
    return true;
  }
  double jitter = 1e-10 * max_diag;
  for (int attempt = 0; attempt <= 3; ++attempt, jitter *= 10.0) {
    Mat8 shifted = cov;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) {
      lower = llt.matrixL();
      return true;
    }
  }
  return false;
}

double sample_crossings(const Eigen::Matrix<double, 8, 1>& mean, const Mat8& root,
                        bool triangular, double theta, int samples, std::uint64_t seed);

}  // namespace

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double log_std_normal_cdf(double z) {
  if (z > 0.0) return std::log1p(-0.5 * std::erfc(z / std::numbers::sqrt2));
  if (z > -37.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic series; erfc underflows past here.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

double std_normal_quantile_from_log(double log_p) {
  if (!(log_p < 0.0)) return std::numeric_limits<double>::infinity();
  if (log_p > -std::numbers::ln2) {
    const double q = -std::expm1(log_p);
    return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  }
  if (log_p > -700.0) return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * std::exp(log_p));
  // Deep lower tail: Newton on log Phi, whose slope there is about -z.
  double z = -std::sqrt(-2.0 * log_p);
  for (int i = 0; i < 50; ++i) {
    const double f = log_std_normal_cdf(z) - log_p;
    const double slope = std::exp(-0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) -
                                  log_std_normal_cdf(z));
    const double step = f / slope;
    z -= step;
    if (std::abs(step) < 1e-12 * std::abs(z)) break;
  }
  return z;
}

double mc_crossing_probability(const CellGaussian& cell, double theta, int samples,
                               std::uint64_t seed) {
  if (samples < 1) throw ConfigError("mc samples must be >= 1");
  const auto& mean = cell.mean;

  // Degenerate cell: every draw equals the mean.
  if (cell.cov.cwiseAbs().maxCoeff() == 0.0) {
    bool below = false, above = false;
    for (int i = 0; i < 8; ++i) {
      if (mean[i] < theta) below = true;
      else if (mean[i] > theta) above = true;
      else below = above = true;
    }
    return below && above ? 1.0 : 0.0;
  }

  Mat8 lower;
  if (!jittered_cholesky(cell.cov, lower)) {
    // Indefinite only at rounding level: sample from the clipped eigen-decomposition.
    Eigen::SelfAdjointEigenSolver<Mat8> eig(cell.cov);
    const double tolerance = std::max(1e-6 * cell.cov.diagonal().maxCoeff(), cell.cov_noise);
    if (eig.info() != Eigen::Success || eig.eigenvalues()[0] < -tolerance)
      throw FactorizationFailure("cell covariance is not positive semidefinite after jitter");
    const Mat8 root = eig.eigenvectors() *
                      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return sample_crossings(mean, root, false, theta, samples, seed);
  }
  return sample_crossings(mean, lower, true, theta, samples, seed);
}

namespace {

double sample_crossings(const Eigen::Matrix<double, 8, 1>& mean, const Mat8& root,
                        bool triangular, double theta, int samples, std::uint64_t seed) {
  Xoshiro256pp engine(seed);
  boost::random::normal_distribution<double> normal;
  double z[8];
  int crossings = 0;
  if (!triangular) {
    for (int s = 0; s < samples; ++s) {
      for (double& v : z) v = normal(engine);
      bool below = false, above = false;
      for (int i = 0; i < 8; ++i) {
        double y = mean[i];
        for (int j = 0; j < 8; ++j) y += root(i, j) * z[j];
        if (y < theta) below = true;
        else if (y > theta) above = true;
        else below = above = true;
      }
      if (below && above) ++crossings;
    }
    return double(crossings) / double(samples);
  }
  for (int s = 0; s < samples; ++s) {
    bool below = false, above = false;
    for (int i = 0; i < 8; ++i) {
      z[i] = normal(engine);
      double y = mean[i];
      for (int j = 0; j <= i; ++j) y += root(i, j) * z[j];
      if (y < theta) below = true;
      else if (y > theta) above = true;
      else below = above = true;
      // The rest of this draw cannot change the outcome.
      if (below && above) break;
    }
    if (below && above) ++crossings;
  }
  return double(crossings) / double(samples);
}

}  // namespace

double independent_crossing_probability(std::span<const double, 8> means,
                                        std::span<const double, 8> variances, double theta) {
  double all_below = 1.0, all_above = 1.0;
  for (int i = 0; i < 8; ++i) {
    double p_below;
    if (variances[i] > 0.0) {
      p_below = std_normal_cdf((theta - means[i]) / std::sqrt(variances[i]));
      all_above *= std_normal_cdf((means[i] - theta) / std::sqrt(variances[i]));
    } else {
      p_below = means[i] < theta ? 1.0 : 0.0;
      all_above *= means[i] > theta ? 1.0 : 0.0;
    }
    all_below *= p_below;
  }
  return std::clamp(1.0 - all_below - all_above, 0.0, 1.0);
}

}  // namespace gplcp
