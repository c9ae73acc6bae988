#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gplcp/cell_lcp.hpp"
#include "gplcp/inference.hpp"

namespace gplcp {

/// Corner distribution of one target cell under the full model.
CellGaussian cell_gaussian(const SparseGpModel& model, const Precomp& pre, const GridSpec& grid,
                           std::int64_t cell_index);

struct CellBatchResult {
  /// One probability per requested cell, in request order.
  std::vector<double> probabilities;
  double time_gp = 0.0;
  double time_mc = 0.0;
};

/// Crossing probabilities for `cells` (ascending cell indices). Corner
/// predictions are shared between neighbouring cells; the result for a cell
/// does not depend on which other cells are requested or on `threads`.
CellBatchResult evaluate_cells(const SparseGpModel& model, const Precomp& pre,
                               const GridSpec& grid, std::span<const std::int64_t> cells,
                               double theta, int samples, std::uint64_t seed, int threads);

}  // namespace gplcp
