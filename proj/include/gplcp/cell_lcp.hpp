#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "gplcp/types.hpp"

namespace gplcp {

/// Phi(z), accurate in both tails.
double std_normal_cdf(double z);
double std_normal_pdf(double z);
/// log Phi(z) without cancellation near Phi(z) = 1. -inf once Phi underflows.
double log_std_normal_cdf(double z);
/// Phi^-1 of exp(log_p), for log_p < 0.
double std_normal_quantile_from_log(double log_p);

/// Corner offsets in marching-cubes order.
inline constexpr std::array<std::array<int, 3>, 8> kCornerOffsets{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
}};

/// Joint distribution of a cell's eight corner values.
struct CellGaussian {
  std::array<Vec3, 8> corner_positions{};
  Eigen::Matrix<double, 8, 1> mean = Eigen::Matrix<double, 8, 1>::Zero();
  Eigen::Matrix<double, 8, 8> cov = Eigen::Matrix<double, 8, 8>::Zero();
  /// Absolute rounding level of the cov entries. When jitter does not make
  /// cov factorizable, eigenvalues down to -max(1e-6 max_diag, cov_noise)
  /// are treated as zero; anything more negative is a FactorizationFailure.
  double cov_noise = 0.0;
};

/// Fraction of `samples` draws in which the eight corner values do not all
/// lie strictly on one side of theta. Deterministic in `seed`.
double mc_crossing_probability(const CellGaussian& cell, double theta, int samples,
                               std::uint64_t seed);

/// Closed form for independent corners: 1 - prod P(Y_i < theta) - prod P(Y_i > theta).
double independent_crossing_probability(std::span<const double, 8> means,
                                        std::span<const double, 8> variances, double theta);

}  // namespace gplcp
