#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "gplcp/adaptive_query.hpp"
#include "gplcp/baseline.hpp"
#include "gplcp/fitting.hpp"
#include "gplcp/inference.hpp"

namespace gplcp::fixtures {

/// Hyperparameters reported for the Tangle SGPR model.
inline constexpr double kTangleLengthscale = 36.33;
inline constexpr double kTangleSigma = 187.6;
inline constexpr double kTangleNoiseSigma = 0.0015;

/// Tangle 32^3 fitted with m = 50 at the reference hyperparameters. Cached.
std::shared_ptr<const PreparedModel> tangle_model();
const VolumeField& tangle_training();

/// Target grid with n points per axis spanning the model domain.
GridSpec target_grid(const SparseGpModel& model, int n);

/// Dense and adaptive results for the Tangle model at n^3 (cached per iso).
struct TanglePair {
  DenseResult dense;
  AdaptiveResult adaptive;
  QueryConfig cfg;
  GridSpec target;
};
const TanglePair& tangle_pair(int n, double iso);

/// Small random model whose (mu_M, A_M) is a genuine DTC posterior of noisy
/// samples of a smooth function over `domain`.
SparseGpModel random_model(std::mt19937_64& rng, int m, double lengthscale,
                           const Box3& domain = {Vec3::Zero(), Vec3::Constant(10.0)});

/// Inducing points on a lattice with spacing >= 3 l, so K_MM is close to
/// diagonal and exact identities hold to ~1e-10.
SparseGpModel well_conditioned_model(std::mt19937_64& rng, int m);

Vec3 random_point(std::mt19937_64& rng, const Box3& box);

/// Textbook posterior with explicit inverses in long double, using the same
/// jittered K_MM (1e-10 * trace) as the library.
struct NaivePosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
NaivePosterior naive_posterior(const SparseGpModel& model, const std::vector<Vec3>& positions);

/// max |a - b| / max |b| (max-norm relative error).
double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Probability that the joint field over all grid points of the node box
/// crosses theta, by direct sampling of the full joint Gaussian.
struct BoxEstimate {
  double probability = 0.0;
  double stderr_ = 0.0;
  std::int64_t points = 0;
};
BoxEstimate dense_box_crossing(const PreparedModel& model, const GridSpec& grid,
                               const std::array<int, 3>& cell_lo,
                               const std::array<int, 3>& cell_hi, double theta, int samples,
                               std::uint64_t seed);

}  // namespace gplcp::fixtures
