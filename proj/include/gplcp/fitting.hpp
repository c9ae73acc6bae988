#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gplcp/inference.hpp"
#include "gplcp/types.hpp"

namespace gplcp {

enum class InducingSelection {
  /// Evenly strided pick of training points in flat (x-fastest) order.
  uniform_grid_subsample,
  /// Lloyd iterations on the training positions, seeded by the strided pick.
  kmeans_positions,
};

struct HyperParams {
  double lengthscale = 1.0;
  double variance = 1.0;
  double noise_variance = 1e-6;
};

struct HyperGrid {
  std::vector<double> lengthscales;
  std::vector<double> variances;
  std::vector<double> noise_variances;
};

struct FitConfig {
  int num_inducing = 50;
  InducingSelection selection = InducingSelection::uniform_grid_subsample;
  /// Fixed hyperparameters; when empty the grid is searched.
  std::optional<HyperParams> fixed;
  /// Search grid; empty axes are filled from default_hyper_grid.
  HyperGrid grid;
  /// Fraction of training points held out for scoring, in [0, 0.5).
  double holdout_fraction = 0.0;
  int kmeans_iterations = 25;
  int threads = 0;
};

struct CandidateScore {
  HyperParams params;
  /// Mean log predictive density on the scoring set.
  double log_density = 0.0;
  bool failed = false;
};

struct FitResult {
  SparseGpModel model;
  HyperParams chosen;
  std::vector<CandidateScore> candidates;
};

/// Log-spaced grid centred on data-derived scales.
HyperGrid default_hyper_grid(const VolumeField& training);

std::vector<Vec3> select_inducing(std::span<const Vec3> positions, int m,
                                  InducingSelection selection, int kmeans_iterations = 25);

/// DTC posterior (mu_M, A_M) of the latent field at `inducing` given
/// centred observations `y` at `x`.
struct InducingPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
InducingPosterior dtc_inducing_posterior(std::span<const Vec3> x, const Eigen::VectorXd& y,
                                         std::span<const Vec3> inducing,
                                         const KernelParams& kernel, double noise_variance);

FitResult fit_sgpr_detailed(const VolumeField& training, const FitConfig& cfg);
SparseGpModel fit_sgpr(const VolumeField& training, const FitConfig& cfg);

/// 20 log10(range(reference) / rmse). Returns +inf for an exact match;
/// throws DegenerateRange for a constant reference.
double psnr(const VolumeField& reference, const VolumeField& reconstruction);

/// Posterior mean sampled on every point of `grid`.
VolumeField reconstruct_mean(const SparseGpModel& model, const Precomp& pre,
                             const GridSpec& grid, int threads = 0);

}  // namespace gplcp
