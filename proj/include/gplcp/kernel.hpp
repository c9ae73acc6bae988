#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gplcp/types.hpp"

namespace gplcp {

/// Squared distance, evaluated so that swapping arguments is bit-identical.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// sigma^2 * exp(-|x1 - x2|^2 / (2 l^2)).
inline double rbf(const Vec3& x1, const Vec3& x2, const KernelParams& params) {
  const double l2 = params.lengthscale * params.lengthscale;
  return params.variance * std::exp(-squared_distance(x1, x2) / (2.0 * l2));
}

/// Dense covariance block between two position sets.
struct CovMatrixView {
  std::vector<Vec3> rows;
  std::vector<Vec3> cols;
  Eigen::MatrixXd data;
};

CovMatrixView cov_matrix(std::span<const Vec3> rows, std::span<const Vec3> cols,
                         const KernelParams& params);

/// K(rows, cols) without keeping the position lists.
Eigen::MatrixXd cov_block(std::span<const Vec3> rows, std::span<const Vec3> cols,
                          const KernelParams& params);

/// d k(x, x_ref) / dx.
Vec3 rbf_spatial_gradient(const Vec3& x, const Vec3& x_ref, const KernelParams& params);

/// Radius beta * l beyond which covariance drops below sigma^2 exp(-beta^2/2).
double distance_threshold(const KernelParams& params, double beta);

}  // namespace gplcp
