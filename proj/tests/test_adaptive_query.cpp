#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "gplcp/error.hpp"
#include "gplcp/kernel.hpp"

using namespace gplcp;

namespace {

SparseGpModel two_point_model(double mu_a, double mu_b) {
  SparseGpModel m;
  m.kernel = {KernelKind::rbf, 2.0, 1.0};
  m.domain = {Vec3::Zero(), Vec3::Constant(8)};
  m.inducing_positions = {Vec3(2, 2, 2), Vec3(6, 6, 6)};
  m.inducing_mean.resize(2);
  m.inducing_mean << mu_a, mu_b;
  m.inducing_cov = 0.01 * Eigen::MatrixXd::Identity(2, 2);
  return m;
}

std::int64_t cells_in(const NodeBox& b) { return b.cell_count(); }

}  // namespace

TEST(InducingProbabilities, Examples) {
  const auto m = two_point_model(0.3, 5.0);
  const std::vector<int> first{0};
  const auto [p1, p2] = inducing_point_probabilities(m, first, 0.3);
  EXPECT_EQ(p1, 0.5);
  EXPECT_EQ(p2, 0.5);
  const std::vector<int> high{1};
  const auto [q1, q2] = inducing_point_probabilities(m, high, 5.0 - 10 * 0.1);
  EXPECT_LT(q1, 1e-20);
  EXPECT_NEAR(q2, 1.0, 1e-15);
  const auto [e1, e2] = inducing_point_probabilities(m, std::vector<int>{}, 0.0);
  EXPECT_EQ(e1, 0.0);
  EXPECT_EQ(e2, 0.0);
}

TEST(Depth, DefaultAndValidation) {
  GridSpec g;
  g.dims = {65, 65, 65};
  EXPECT_EQ(default_max_depth(g), 6);
  g.dims = {116, 117, 135};
  EXPECT_EQ(default_max_depth(g), 8);
  g.dims = {2, 2, 2};
  EXPECT_EQ(default_max_depth(g), 0);
  g.dims = {33, 33, 33};
  QueryConfig cfg;
  cfg.max_depth = 6;
  EXPECT_THROW(resolve_max_depth(g, cfg), ConfigError);
  cfg.max_depth = 3;
  EXPECT_EQ(resolve_max_depth(g, cfg), 3);
}

TEST(Octree, ChildrenTileParentAndPropagateSubsets) {
  std::mt19937_64 rng(61);
  const auto model = fixtures::random_model(rng, 60, 0.7, {Vec3::Zero(), Vec3(10, 9, 11)});
  GridSpec target = GridSpec::spanning(model.domain, {21, 18, 26});
  const int depth = default_max_depth(target);
  const double beta = 2.0;
  const double reach = distance_threshold(model.kernel, beta);
  std::vector<NodeBox> frontier{root_node(model, target)};
  std::vector<int> owner(std::size_t(target.num_cells()), 0);
  while (!frontier.empty()) {
    std::vector<NodeBox> next;
    for (const auto& parent : frontier) {
      EXPECT_TRUE(std::includes(parent.local_subset.begin(), parent.local_subset.end(),
                                parent.inducing_inside.begin(), parent.inducing_inside.end()));
      if (parent.level == depth) {
        for (int k = parent.cell_lo[2]; k < parent.cell_hi[2]; ++k)
          for (int j = parent.cell_lo[1]; j < parent.cell_hi[1]; ++j)
            for (int i = parent.cell_lo[0]; i < parent.cell_hi[0]; ++i)
              ++owner[std::size_t(target.cell_index(i, j, k))];
        continue;
      }
      const auto children = child_nodes(model, target, parent, depth, beta);
      std::int64_t covered = 0;
      for (const auto& c : children) {
        covered += cells_in(c);
        EXPECT_EQ(c.level, parent.level + 1);
        // Shared planes coincide bit-for-bit with the parent's.
        for (int a = 0; a < 3; ++a) {
          EXPECT_GE(c.cell_lo[a], parent.cell_lo[a]);
          EXPECT_LE(c.cell_hi[a], parent.cell_hi[a]);
          if (c.cell_lo[a] == parent.cell_lo[a]) EXPECT_EQ(c.bounds.lo[a], parent.bounds.lo[a]);
          if (c.cell_hi[a] == parent.cell_hi[a]) EXPECT_EQ(c.bounds.hi[a], parent.bounds.hi[a]);
        }
        std::vector<int> scratch = inducing_in_box(model, all_inducing(model), c.bounds.enlarged(reach));
        EXPECT_EQ(c.local_subset, scratch);
        next.push_back(c);
      }
      EXPECT_EQ(covered, cells_in(parent));
    }
    frontier = std::move(next);
  }
  for (int n : owner) EXPECT_EQ(n, 1);
}

TEST(Octree, HighMeanModelPrunesRoot) {
  // Shifted-constant fit: every prediction is far above theta.
  auto m = two_point_model(0.0, 0.0);
  m.scalar_mean = 100.0;
  const auto prepared = prepare(m);
  const auto target = GridSpec::spanning(m.domain, {17, 17, 17});
  QueryConfig cfg;
  cfg.iso_value = 0.0;
  const auto r = octree_query(prepared, target, cfg);
  EXPECT_TRUE(r.leaf_cells.empty());
  EXPECT_EQ(r.stats.nodes_visited, 1);
  EXPECT_EQ(r.stats.bound_evaluations, 1);
  EXPECT_EQ(r.stats.nodes_pruned, 1);
  const auto lcp = lcp_field_adaptive(prepared, target, cfg);
  for (double v : lcp.lcp.values) EXPECT_EQ(v, 0.0);
}

TEST(Octree, StraddlingInducingPointsSkipBounds) {
  const auto prepared = prepare(two_point_model(-1.0, 1.0));
  const auto target = GridSpec::spanning(prepared->model.domain, {9, 9, 9});
  QueryConfig cfg;
  cfg.iso_value = 0.0;
  cfg.max_depth = 1;
  const auto r = octree_query(prepared, target, cfg);
  // Root holds both points (case 1): two minimizations skipped, no bound.
  EXPECT_GE(r.stats.minimizations_skipped, 2);
  EXPECT_LT(r.stats.bound_evaluations, r.stats.nodes_visited);
}

TEST(Octree, LevelFieldAndDeterminism) {
  const auto prepared = fixtures::tangle_model();
  const auto target = fixtures::target_grid(prepared->model, 33);
  QueryConfig cfg;
  cfg.iso_value = -0.59;
  cfg.threads = 1;
  const auto a = lcp_field_adaptive(prepared, target, cfg);
  cfg.threads = 4;
  const auto b = lcp_field_adaptive(prepared, target, cfg);
  EXPECT_EQ(a.lcp.values, b.lcp.values);
  EXPECT_EQ(a.level_field.values, b.level_field.values);
  const int depth = default_max_depth(target);
  std::set<std::int64_t> leaves(a.leaf_cells.begin(), a.leaf_cells.end());
  for (std::int64_t c = 0; c < target.num_cells(); ++c) {
    const double level = a.level_field.values[std::size_t(c)];
    EXPECT_GE(level, 0.0);
    EXPECT_LE(level, depth);
    if (leaves.count(c)) EXPECT_EQ(level, depth);
    else EXPECT_EQ(a.lcp.values[std::size_t(c)], 0.0);
  }
  EXPECT_EQ(a.stats.leaf_cells, std::int64_t(a.leaf_cells.size()));
  EXPECT_LE(a.stats.leaf_cells, target.num_cells());
}

TEST(Octree, NonPowerOfTwoGridMatchesDense) {
  const auto prepared = fixtures::tangle_model();
  const auto target = GridSpec::spanning(prepared->model.domain, {21, 24, 18});
  QueryConfig cfg;
  cfg.iso_value = -1.5;
  const auto a = lcp_field_adaptive(prepared, target, cfg);
  const auto d = lcp_field_dense(prepared, target, cfg);
  for (std::int64_t c = 0; c < target.num_cells(); ++c) {
    const double dv = d.lcp.values[std::size_t(c)], av = a.lcp.values[std::size_t(c)];
    if (av != 0.0) EXPECT_EQ(av, dv);
    EXPECT_LE(dv - av, 10 * cfg.alpha);
  }
}

TEST(Octree, TimingBreakdownAddsUp) {
  const auto& pair = fixtures::tangle_pair(64, -0.59);
  const auto& s = pair.adaptive.stats;
  const double parts = s.time_gp + s.time_mc + s.time_overhead;
  EXPECT_NEAR(parts, s.time_total, 0.05 * s.time_total);
}

TEST(Octree, TangleLeavesCoverDenseCrossings) {
  const auto& pair = fixtures::tangle_pair(64, -0.59);
  const std::set<std::int64_t> leaves(pair.adaptive.leaf_cells.begin(), pair.adaptive.leaf_cells.end());
  const double alpha = pair.cfg.alpha;
  std::int64_t relevant = 0, missed = 0, pruned = 0, pruned_violations = 0;
  for (std::int64_t c = 0; c < pair.target.num_cells(); ++c) {
    const double p = pair.dense.lcp.values[std::size_t(c)];
    const bool leaf = leaves.count(c) > 0;
    if (p > alpha + 0.005) {
      ++relevant;
      missed += !leaf;
    }
    if (!leaf) {
      ++pruned;
      const double se = std::sqrt(std::max(p, 1.0 / 1600) * (1 - p) / 1600);
      pruned_violations += p > alpha + 3 * se;
    }
  }
  std::cout << "relevant " << relevant << " missed " << missed << " pruned-region violations "
            << pruned_violations << " / " << pruned << "\n";
  EXPECT_GT(relevant, 0);
  EXPECT_LE(double(missed), 0.005 * double(relevant));
  EXPECT_LE(double(pruned_violations), 0.005 * double(pruned));
}

TEST(Octree, BothProbabilitiesBelowAlphaIsImpossible) {
  std::mt19937_64 rng(62);
  for (int t = 0; t < 100; ++t) {
    const auto m = fixtures::random_model(rng, 10, 2.0);
    std::vector<int> idx(10);
    for (int i = 0; i < 10; ++i) idx[std::size_t(i)] = i;
    const double theta = m.scalar_mean + std::normal_distribution<double>(0, 1)(rng);
    const auto [p1, p2] = inducing_point_probabilities(m, idx, theta);
    EXPECT_FALSE(p1 < 1e-3 && p2 < 1e-3);
  }
}
