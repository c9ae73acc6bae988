#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "gplcp/inference.hpp"
#include "gplcp/regional_bound.hpp"

namespace gplcp {

/// One octree node, clipped to the target grid. Cell ranges are half-open.
struct NodeBox {
  std::array<int, 3> cell_lo{0, 0, 0};
  std::array<int, 3> cell_hi{0, 0, 0};
  int level = 0;
  /// World bounds through the node's outermost grid points.
  Box3 bounds;
  /// M~: inducing points inside `bounds`.
  std::vector<int> inducing_inside;
  /// M': inducing points inside `bounds` enlarged by beta * l.
  std::vector<int> local_subset;

  /// Inclusive grid-point count, the exponent of the regional bound.
  std::int64_t grid_points() const;
  std::int64_t cell_count() const;
};

struct QueryStats {
  std::int64_t nodes_visited = 0;
  std::int64_t nodes_pruned = 0;
  std::int64_t bound_evaluations = 0;
  std::int64_t minimizations_skipped = 0;
  /// Minimizations cut short once the subdivision decision was forced.
  std::int64_t early_exits = 0;
  /// Two-sided bounds decided without the second minimization.
  std::int64_t second_sides_settled = 0;
  std::int64_t optimizer_not_converged = 0;
  std::int64_t leaf_cells = 0;
  double time_gp = 0.0;
  double time_mc = 0.0;
  double time_overhead = 0.0;
  double time_total = 0.0;
};

/// ceil(log2(largest cell count along any axis)).
int default_max_depth(const GridSpec& target);

/// Validated depth for `cfg`: auto when 0, ConfigError when deeper than auto.
int resolve_max_depth(const GridSpec& target, const QueryConfig& cfg);

/// (max P(Y_i < theta), max P(Y_i > theta)) over the listed inducing points;
/// (0, 0) for an empty list.
std::pair<double, double> inducing_point_probabilities(const SparseGpModel& model,
                                                       std::span<const int> indices,
                                                       double theta);

/// Root node covering the whole target grid.
NodeBox root_node(const SparseGpModel& model, const GridSpec& target);

/// Children of `parent` in a virtual cube of 2^max_depth cells per axis,
/// dropping those outside the grid. M' is filtered from the parent's.
std::vector<NodeBox> child_nodes(const SparseGpModel& model, const GridSpec& target,
                                 const NodeBox& parent, int max_depth, double beta);

struct OctreeResult {
  /// Ascending target cell indices that need a cell-level estimate.
  std::vector<std::int64_t> leaf_cells;
  /// Depth at which each cell's node was finalized.
  VolumeField level_field;
  QueryStats stats;
  int max_depth = 0;
};

OctreeResult octree_query(const std::shared_ptr<const PreparedModel>& model,
                          const GridSpec& target, const QueryConfig& cfg);

struct AdaptiveResult {
  VolumeField lcp;
  VolumeField level_field;
  std::vector<std::int64_t> leaf_cells;
  QueryStats stats;
};

/// Octree query followed by cell estimates on the leaves; every other cell is 0.
AdaptiveResult lcp_field_adaptive(const std::shared_ptr<const PreparedModel>& model,
                                  const GridSpec& target, const QueryConfig& cfg);

}  // namespace gplcp
