#include "gplcp/adaptive_query.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "gplcp/cell_field.hpp"
#include "gplcp/cell_lcp.hpp"
#include "gplcp/error.hpp"
#include "gplcp/kernel.hpp"
#include "gplcp/parallel.hpp"

namespace gplcp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Box3 node_bounds(const GridSpec& target, const std::array<int, 3>& lo,
                 const std::array<int, 3>& hi) {
  return {target.point(lo[0], lo[1], lo[2]), target.point(hi[0], hi[1], hi[2])};
}

// Node with its lazily built local GP.
struct WorkNode {
  NodeBox box;
  std::shared_ptr<const LocalGp> local;
};

struct NodeOutcome {
  bool subdivide = false;
  QueryStats counts;
};

// Margin below which Phi(u)^d < target is guaranteed (with a little slack).
double forcing_margin(double log_target, double d) {
  if (std::isinf(log_target)) return -std::numeric_limits<double>::infinity();
  const double u = std_normal_quantile_from_log(log_target / d);
  return u - 1e-6 * (1.0 + std::abs(u));
}

}  // namespace

std::int64_t NodeBox::grid_points() const {
  std::int64_t d = 1;
  for (int a = 0; a < 3; ++a) d *= std::int64_t(cell_hi[a] - cell_lo[a] + 1);
  return d;
}

std::int64_t NodeBox::cell_count() const {
  std::int64_t n = 1;
  for (int a = 0; a < 3; ++a) n *= std::int64_t(cell_hi[a] - cell_lo[a]);
  return n;
}

int default_max_depth(const GridSpec& target) {
  const int cells = std::max({target.cells(0), target.cells(1), target.cells(2)});
  int depth = 0;
  while ((std::int64_t(1) << depth) < cells) ++depth;
  return depth;
}

int resolve_max_depth(const GridSpec& target, const QueryConfig& cfg) {
  const int automatic = default_max_depth(target);
  if (cfg.max_depth == 0) return automatic;
  if (cfg.max_depth < 0 || cfg.max_depth > automatic) {
    std::ostringstream msg;
    msg << "max_depth " << cfg.max_depth << " is inconsistent with the target grid "
        << "(at most " << automatic << " for " << target.cells(0) << "x" << target.cells(1)
        << "x" << target.cells(2) << " cells)";
    throw ConfigError(msg.str());
  }
  return cfg.max_depth;
}

std::pair<double, double> inducing_point_probabilities(const SparseGpModel& model,
                                                       std::span<const int> indices,
                                                       double theta) {
  double p1 = 0.0, p2 = 0.0;
  for (int i : indices) {
    const double mu = model.scalar_mean + model.inducing_mean[i];
    const double var = model.inducing_cov(i, i);
    double below, above;
    if (var > 0.0) {
      const double z = (theta - mu) / std::sqrt(var);
      below = std_normal_cdf(z);
      above = std_normal_cdf(-z);
    } else {
      below = mu < theta ? 1.0 : (mu == theta ? 0.5 : 0.0);
      above = mu > theta ? 1.0 : (mu == theta ? 0.5 : 0.0);
    }
    p1 = std::max(p1, below);
    p2 = std::max(p2, above);
  }
  return {p1, p2};
}

NodeBox root_node(const SparseGpModel& model, const GridSpec& target) {
  NodeBox root;
  root.cell_hi = {target.cells(0), target.cells(1), target.cells(2)};
  root.bounds = node_bounds(target, root.cell_lo, root.cell_hi);
  root.local_subset = all_inducing(model);
  root.inducing_inside = inducing_in_box(model, root.local_subset, root.bounds);
  return root;
}

std::vector<NodeBox> child_nodes(const SparseGpModel& model, const GridSpec& target,
                                 const NodeBox& parent, int max_depth, double beta) {
  std::vector<NodeBox> children;
  const int level = parent.level + 1;
  const int span = 1 << (max_depth - level);
  const double reach = distance_threshold(model.kernel, beta);
  for (int c = 0; c < 8; ++c) {
    NodeBox child;
    child.level = level;
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      const int lo = parent.cell_lo[a] + ((c >> a) & 1) * span;
      child.cell_lo[a] = lo;
      child.cell_hi[a] = std::min(lo + span, target.cells(a));
      if (child.cell_hi[a] <= child.cell_lo[a]) empty = true;
    }
    if (empty) continue;
    child.bounds = node_bounds(target, child.cell_lo, child.cell_hi);
    child.local_subset = inducing_in_box(model, parent.local_subset, child.bounds.enlarged(reach));
    child.inducing_inside = inducing_in_box(model, child.local_subset, child.bounds);
    children.push_back(std::move(child));
  }
  return children;
}

OctreeResult octree_query(const std::shared_ptr<const PreparedModel>& prepared,
                          const GridSpec& target, const QueryConfig& cfg) {
  target.check();
  if (auto problems = check_query_config(cfg); !problems.empty()) throw ConfigError(problems.front());
  const auto start = Clock::now();
  const SparseGpModel& model = prepared->model;

  OctreeResult result;
  result.max_depth = resolve_max_depth(target, cfg);
  result.level_field = VolumeField::zeros(target, Centering::cell);
  const double theta = cfg.iso_value;
  const double alpha = cfg.alpha;

  std::vector<WorkNode> frontier;
  {
    WorkNode root{root_node(model, target), nullptr};
    root.local = std::make_shared<const LocalGp>(prepared, root.box.local_subset);
    frontier.push_back(std::move(root));
  }

  while (!frontier.empty()) {
    std::vector<NodeOutcome> outcomes(frontier.size());
    parallel_for(frontier.size(), cfg.threads, [&](std::size_t n) {
      WorkNode& node = frontier[n];
      NodeOutcome& out = outcomes[n];
      out.counts.nodes_visited = 1;
      const auto [p1, p2] = inducing_point_probabilities(model, node.box.inducing_inside, theta);
      const bool has_inside = !node.box.inducing_inside.empty();
      if (has_inside && p1 < alpha && p2 < alpha)
        throw NumericalInstability("both inducing-point probabilities fell below alpha");

      if (p1 > alpha && p2 > alpha) {
        out.subdivide = true;
        out.counts.minimizations_skipped = 2;
        return;
      }
      if (!node.local) node.local = std::make_shared<const LocalGp>(prepared, node.box.local_subset);
      const double d = double(node.box.grid_points());
      out.counts.bound_evaluations = 1;

      if (has_inside && (p2 < alpha || p1 < alpha)) {
        // Only one side can be non-negligible; the skipped factor counts as 0.
        const BoundSide side = p2 < alpha ? BoundSide::below : BoundSide::above;
        const auto best = minimize_over_box(side, *node.local, node.box.bounds, theta,
                                            cfg.optimizer, forcing_margin(std::log1p(-alpha), d));
        // 1 - B^d for whichever side was evaluated.
        const double one_sided = std::clamp(-std::expm1(d * best.log_value), 0.0, 1.0);
        out.subdivide = one_sided > alpha;
        out.counts.minimizations_skipped = 1;
        out.counts.early_exits = best.stopped_early ? 1 : 0;
        out.counts.optimizer_not_converged = best.not_converged;
        return;
      }

      // Empty M~ or a probability exactly at alpha: two-sided bound. The side
      // holding the larger share at the box centre goes first; the other
      // factor is at most its value at the centre, which often settles it.
      const auto centre =
          standardized_margin(*node.local, node.box.bounds.center(), theta, BoundSide::below);
      const BoundSide first = centre.value >= 0.0 ? BoundSide::below : BoundSide::above;
      const BoundSide second = first == BoundSide::below ? BoundSide::above : BoundSide::below;
      const double log_other_cap = d * log_std_normal_cdf(-std::abs(centre.value));
      const double other_cap = std::exp(log_other_cap);

      const auto a = minimize_over_box(first, *node.local, node.box.bounds, theta, cfg.optimizer,
                                       forcing_margin(std::log(1.0 - alpha - other_cap), d));
      out.counts.optimizer_not_converged = a.not_converged;
      out.counts.early_exits = a.stopped_early ? 1 : 0;
      const double first_pow = std::exp(d * a.log_value);
      const double bound_low = 1.0 - first_pow - other_cap;
      const double bound_high = -std::expm1(d * a.log_value);
      if (a.stopped_early || bound_low > alpha || bound_high <= alpha) {
        out.subdivide = a.stopped_early || bound_low > alpha;
        out.counts.second_sides_settled = 1;
        return;
      }
      const double room = 1.0 - alpha - first_pow;
      const auto b = minimize_over_box(second, *node.local, node.box.bounds, theta, cfg.optimizer,
                                       room > 0.0 ? forcing_margin(std::log(room), d)
                                                  : -std::numeric_limits<double>::infinity());
      out.counts.optimizer_not_converged += b.not_converged;
      out.counts.early_exits += b.stopped_early ? 1 : 0;
      const double log_lo = first == BoundSide::below ? a.log_value : b.log_value;
      const double log_hi = first == BoundSide::below ? b.log_value : a.log_value;
      out.subdivide = b.stopped_early || slepian_upper_bound(log_lo, log_hi, d) > alpha;
    });

    std::vector<WorkNode> next;
    for (std::size_t n = 0; n < frontier.size(); ++n) {
      WorkNode& node = frontier[n];
      const NodeOutcome& out = outcomes[n];
      auto& s = result.stats;
      s.nodes_visited += out.counts.nodes_visited;
      s.bound_evaluations += out.counts.bound_evaluations;
      s.minimizations_skipped += out.counts.minimizations_skipped;
      s.early_exits += out.counts.early_exits;
      s.second_sides_settled += out.counts.second_sides_settled;
      s.optimizer_not_converged += out.counts.optimizer_not_converged;

      const auto& b = node.box;
      const bool at_max = b.level == result.max_depth;
      if (!out.subdivide || at_max) {
        if (!out.subdivide) ++s.nodes_pruned;
        for (int k = b.cell_lo[2]; k < b.cell_hi[2]; ++k)
          for (int j = b.cell_lo[1]; j < b.cell_hi[1]; ++j)
            for (int i = b.cell_lo[0]; i < b.cell_hi[0]; ++i) {
              const std::int64_t index = target.cell_index(i, j, k);
              result.level_field.values[std::size_t(index)] = b.level;
              if (out.subdivide) result.leaf_cells.push_back(index);
            }
        continue;
      }
      for (auto& child : child_nodes(model, target, b, result.max_depth, cfg.beta)) {
        WorkNode w{std::move(child), nullptr};
        if (w.box.local_subset.size() == b.local_subset.size()) w.local = node.local;
        next.push_back(std::move(w));
      }
    }
    frontier = std::move(next);
  }

  std::sort(result.leaf_cells.begin(), result.leaf_cells.end());
  result.stats.leaf_cells = std::int64_t(result.leaf_cells.size());
  result.stats.time_overhead = seconds_since(start);
  return result;
}

AdaptiveResult lcp_field_adaptive(const std::shared_ptr<const PreparedModel>& prepared,
                                  const GridSpec& target, const QueryConfig& cfg) {
  const auto start = Clock::now();
  auto tree = octree_query(prepared, target, cfg);

  AdaptiveResult result;
  result.lcp = VolumeField::zeros(target, Centering::cell);
  const auto batch = evaluate_cells(prepared->model, prepared->precomp, target, tree.leaf_cells,
                                    cfg.iso_value, cfg.mc_samples, cfg.rng_seed, cfg.threads);
  for (std::size_t c = 0; c < tree.leaf_cells.size(); ++c)
    result.lcp.values[std::size_t(tree.leaf_cells[c])] = batch.probabilities[c];

  result.stats = tree.stats;
  result.stats.time_gp = batch.time_gp;
  result.stats.time_mc = batch.time_mc;
  result.level_field = std::move(tree.level_field);
  result.leaf_cells = std::move(tree.leaf_cells);
  result.stats.time_total = seconds_since(start);
  return result;
}

}  // namespace gplcp
