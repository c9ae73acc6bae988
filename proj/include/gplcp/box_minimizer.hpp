#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "gplcp/types.hpp"

namespace gplcp {

/// Returns f(x) and writes its gradient.
using BoxObjective = std::function<double(const Vec3& x, Vec3& gradient)>;

enum class StopReason {
  /// Projected-gradient infinity norm <= grad_tol.
  gradient,
  /// Relative decrease of one step below 1e7 * machine epsilon.
  function_change,
  /// No step along the search direction decreased f.
  stalled,
  max_iters,
  /// Value fell below the caller's threshold.
  threshold,
};

struct BoxMinimum {
  double value = std::numeric_limits<double>::infinity();
  Vec3 argmin = Vec3::Zero();
  int iterations = 0;
  StopReason reason = StopReason::max_iters;
};

/// Start points in their fixed order: centre, the corners (even parity
/// first), then the six face centres. At most 15.
std::vector<Vec3> multistart_points(const Box3& box, int count);

/// Projected limited-memory quasi-Newton descent from one start.
BoxMinimum minimize_from(const BoxObjective& f, const Box3& box, const Vec3& start,
                         int max_iters, double grad_tol,
                         double stop_below = -std::numeric_limits<double>::infinity());

struct MultistartMinimum {
  BoxMinimum best;
  int starts_run = 0;
  /// Starts that ran out of iterations.
  int not_converged = 0;
  bool stopped_early = false;
};

/// Runs minimize_from from the centre and from the `multistarts - 1` candidate
/// points with the lowest objective, and keeps the lowest value
/// (earliest start on ties). Skips remaining starts once a value is below
/// `stop_below`.
MultistartMinimum minimize_box(const BoxObjective& f, const Box3& box, const OptimizerConfig& opt,
                               double stop_below = -std::numeric_limits<double>::infinity());

}  // namespace gplcp
