#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gplcp/types.hpp"

namespace gplcp {

/// Cholesky factor of the inducing prior K_MM + jitter * I.
struct InducingFactor {
  Eigen::MatrixXd lower;
  /// Absolute jitter added to the diagonal.
  double jitter = 0.0;
  /// Number of x10 escalations beyond the base jitter 1e-10 * trace(K_MM).
  int escalations = 0;
  /// True when K_MM alone was not numerically positive definite.
  bool jitter_required = false;
};

/// Factorizes K_MM over `positions`; throws FactorizationFailure when the
/// matrix stays indefinite after three escalations (duplicate points).
InducingFactor factorize_inducing_prior(std::span<const Vec3> positions,
                                        const KernelParams& params);

/// Quantities derived once per model.
///
/// Stored in whitened coordinates: with v = L^-1 k_xM the posterior is
///   mean(x) = scalar_mean + k_xM . w
///   cov(x, y) = k(x, y) - v_x^T (I - S) v_y
/// where S = L^-1 A_M L^-T; this equals K_II - K_IM K^-1 K_MI + K_IM B K_MI
/// with B = K^-1 A_M K^-1 but avoids forming B.
struct Precomp {
  InducingFactor factor;
  Eigen::VectorXd w;
  Eigen::MatrixXd whitened_cov;
  Eigen::MatrixXd residual_map;  // I - S
};

Precomp precompute(const SparseGpModel& model);

/// Immutable model + precomputation bundle, shared read-only across threads.
struct PreparedModel {
  SparseGpModel model;
  Precomp precomp;
};

std::shared_ptr<const PreparedModel> prepare(SparseGpModel model);

struct PosteriorGaussian {
  std::vector<Vec3> positions;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/// Joint posterior over `positions`. Diagonal entries in (-1e-8 sigma^2, 0)
/// are clamped to 0; anything lower throws NumericalInstability.
PosteriorGaussian predict_joint(const SparseGpModel& model, const Precomp& pre,
                                std::span<const Vec3> positions);

struct PointPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Marginal at one position, variance floored at variance_floor(model).
PointPrediction predict_point(const SparseGpModel& model, const Precomp& pre, const Vec3& x);

/// Mean only; O(m).
double predict_mean(const SparseGpModel& model, const Precomp& pre, const Vec3& x);

struct PointGradients {
  Vec3 mean = Vec3::Zero();
  Vec3 variance = Vec3::Zero();
};

PointGradients predict_point_gradients(const SparseGpModel& model, const Precomp& pre,
                                       const Vec3& x);

struct PointPredictionWithGradients {
  PointPrediction value;
  PointGradients gradient;
};

/// predict_point and predict_point_gradients sharing one set of solves.
PointPredictionWithGradients predict_point_with_gradients(const SparseGpModel& model,
                                                          const Precomp& pre, const Vec3& x);

inline double variance_floor(const SparseGpModel& model) {
  return 1e-12 * model.kernel.variance;
}

/// Worst-case rounding in a covariance formed as k - v.h: about m ulps of sigma^2.
inline double covariance_rounding(const SparseGpModel& model) {
  return double(model.size() + 1) * 2.220446049250313e-16 * model.kernel.variance;
}

/// Applies the negative-variance policy to a raw diagonal entry.
double clamp_variance(double raw, const SparseGpModel& model);

// Batched building blocks. Every joint covariance in the library is
// assembled from these so that identical positions give bit-identical
// results regardless of which code path requested them.

/// Writes v = L^-1 k_xM and h = (I - S) v (both length m) and returns the
/// posterior mean at x.
double point_basis(const SparseGpModel& model, const Precomp& pre, const Vec3& x, double* v,
                   double* h);

/// Posterior covariance between a and b from their bases; call with a
/// ordered before b (the convention that makes results reproducible).
double basis_covariance(const KernelParams& kernel, const Vec3& a, const Vec3& b,
                        const double* v_a, const double* h_b, std::size_t m);

}  // namespace gplcp
