#include "gplcp/kernel.hpp"

#include <cmath>

namespace gplcp {

Eigen::MatrixXd cov_block(std::span<const Vec3> rows, std::span<const Vec3> cols,
                          const KernelParams& params) {
  Eigen::MatrixXd out(Eigen::Index(rows.size()), Eigen::Index(cols.size()));
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, j) = rbf(rows[std::size_t(i)], cols[std::size_t(j)], params);
  return out;
}

CovMatrixView cov_matrix(std::span<const Vec3> rows, std::span<const Vec3> cols,
                         const KernelParams& params) {
  CovMatrixView view;
  view.rows.assign(rows.begin(), rows.end());
  view.cols.assign(cols.begin(), cols.end());
  view.data = cov_block(rows, cols, params);
  return view;
}

Vec3 rbf_spatial_gradient(const Vec3& x, const Vec3& x_ref, const KernelParams& params) {
  const double l2 = params.lengthscale * params.lengthscale;
  return -(x - x_ref) / l2 * rbf(x, x_ref, params);
}

double distance_threshold(const KernelParams& params, double beta) {
  return beta * params.lengthscale;
}

}  // namespace gplcp
