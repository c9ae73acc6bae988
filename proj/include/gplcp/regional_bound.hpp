#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "gplcp/box_minimizer.hpp"
#include "gplcp/inference.hpp"

namespace gplcp {

/// Indices of `candidates` whose inducing position lies in `box`.
std::vector<int> inducing_in_box(const SparseGpModel& model, std::span<const int> candidates,
                                 const Box3& box);
std::vector<int> all_inducing(const SparseGpModel& model);

/// Sub-model on the inducing points near a region (M').
class LocalGp {
 public:
  /// Restricts `parent` to `subset`. A subset covering every inducing point
  /// reuses the parent's precomputation, so results match the full model exactly.
  LocalGp(std::shared_ptr<const PreparedModel> parent, std::vector<int> subset);

  const std::vector<int>& subset() const { return subset_; }
  bool empty() const { return subset_.empty(); }
  bool is_full() const { return full_; }
  const SparseGpModel& parent_model() const { return parent_->model; }

  /// Mean and variance (floored) with spatial gradients. Empty subsets give
  /// the prior: scalar mean and sigma^2, zero gradients.
  PointPredictionWithGradients predict(const Vec3& x) const;

 private:
  std::shared_ptr<const PreparedModel> parent_;
  std::vector<int> subset_;
  bool full_ = false;
  // Set when the subset is a proper, nonempty part of the parent.
  std::shared_ptr<const PreparedModel> local_;
};

/// Local GP over the inducing points inside `box` enlarged by beta * l.
LocalGp build_local_gp(std::shared_ptr<const PreparedModel> model, const Box3& box, double beta);

struct CdfWithGradient {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// F(x) = Phi((theta - mu(x)) / sigma(x)) and its gradient.
CdfWithGradient f_crossing_cdf(const LocalGp& gp, const Vec3& x, double theta);

enum class BoundSide {
  /// min F: the all-below factor B_l.
  below,
  /// min (1 - F): the all-above factor B_u.
  above,
};

/// s * (theta - mu) / sigma with s = +1 for `below` and -1 for `above`;
/// Phi of it is F or 1 - F respectively.
CdfWithGradient standardized_margin(const LocalGp& gp, const Vec3& x, double theta, BoundSide side);

struct SideMinimum {
  /// Phi(margin) at the minimizer, and its logarithm.
  double value = 1.0;
  double log_value = 0.0;
  double margin = 0.0;
  Vec3 argmin = Vec3::Zero();
  int not_converged = 0;
  bool stopped_early = false;
};

/// Minimizes F (below) or 1 - F (above) over `box`. The search runs on the
/// standardized margin, whose argmin coincides and whose gradient does not
/// underflow far from the iso-value. With a finite `stop_margin` the search
/// may return as soon as the margin drops below it.
SideMinimum minimize_over_box(BoundSide side, const LocalGp& gp, const Box3& box, double theta,
                              const OptimizerConfig& opt,
                              double stop_margin = -std::numeric_limits<double>::infinity());

struct BoundResult {
  double b_lower = 0.0;
  double b_upper = 0.0;
  double log_b_lower = -std::numeric_limits<double>::infinity();
  double log_b_upper = -std::numeric_limits<double>::infinity();
  std::int64_t d = 1;
  double upper_bound = 1.0;
  Vec3 argmin_lower = Vec3::Zero();
  Vec3 argmin_upper = Vec3::Zero();
};

/// clamp(1 - exp(d log_bl) - exp(d log_bu), 0, 1) without cancellation.
/// A skipped side is passed as -inf (B = 0).
double slepian_upper_bound(double log_b_lower, double log_b_upper, double d);

/// Both minimizations and the combined upper bound on the probability that
/// the field crosses theta somewhere among d grid points in `box`.
BoundResult regional_upper_bound(const LocalGp& gp, const Box3& box, double theta, std::int64_t d,
                                 const OptimizerConfig& opt);

}  // namespace gplcp
