#include "gplcp/cell_field.hpp"

#include <chrono>

#include "gplcp/error.hpp"
#include "gplcp/parallel.hpp"
#include "gplcp/rng.hpp"

namespace gplcp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Covariance entries always use the lower corner index as the left argument.
void assemble(const SparseGpModel& model, CellGaussian& cell, const double* const mean[8],
              const double* const v[8], const double* const h[8]) {
  const std::size_t m = model.size();
  cell.cov_noise = covariance_rounding(model);
  for (int a = 0; a < 8; ++a) {
    cell.mean[a] = *mean[a];
    for (int b = a; b < 8; ++b) {
      double c = basis_covariance(model.kernel, cell.corner_positions[a],
                                  cell.corner_positions[b], v[a], h[b], m);
      if (a == b) c = clamp_variance(c, model);
      cell.cov(a, b) = c;
      cell.cov(b, a) = c;
    }
  }
}

// Bases for the points of one z-plane that some requested cell touches.
struct PlaneCache {
  int k = -1;
  std::vector<std::int32_t> slot;  // per (i, j), -1 when absent
  std::vector<double> mean, v, h;
  std::vector<std::int32_t> pending;  // (i, j) flat indices awaiting computation
};

}  // namespace

CellGaussian cell_gaussian(const SparseGpModel& model, const Precomp& pre, const GridSpec& grid,
                           std::int64_t cell_index) {
  if (cell_index < 0 || cell_index >= grid.num_cells())
    throw ConfigError("cell index outside the target grid");
  const std::size_t m = model.size();
  const auto [ci, cj, ck] = grid.cell_coords(cell_index);
  CellGaussian cell;
  std::vector<double> v(8 * m), h(8 * m);
  double means[8];
  const double* mp[8];
  const double* vp[8];
  const double* hp[8];
  for (int c = 0; c < 8; ++c) {
    const auto& o = kCornerOffsets[std::size_t(c)];
    cell.corner_positions[std::size_t(c)] = grid.point(ci + o[0], cj + o[1], ck + o[2]);
    means[c] = point_basis(model, pre, cell.corner_positions[std::size_t(c)], &v[c * m], &h[c * m]);
    mp[c] = &means[c];
    vp[c] = &v[c * m];
    hp[c] = &h[c * m];
  }
  assemble(model, cell, mp, vp, hp);
  return cell;
}

CellBatchResult evaluate_cells(const SparseGpModel& model, const Precomp& pre,
                               const GridSpec& grid, std::span<const std::int64_t> cells,
                               double theta, int samples, std::uint64_t seed, int threads) {
  CellBatchResult result;
  result.probabilities.assign(cells.size(), 0.0);
  if (cells.empty()) return result;

  const std::size_t m = model.size();
  const int nx = grid.dims[0], ny = grid.dims[1];
  const std::size_t plane_points = std::size_t(nx) * std::size_t(ny);

  PlaneCache planes[2];
  for (auto& p : planes) p.slot.assign(plane_points, -1);

  auto reset = [&](PlaneCache& p, int k) {
    p.k = k;
    std::fill(p.slot.begin(), p.slot.end(), -1);
    p.mean.clear();
    p.v.clear();
    p.h.clear();
    p.pending.clear();
  };
  auto request = [&](PlaneCache& p, std::int32_t flat) {
    if (p.slot[std::size_t(flat)] >= 0) return;
    p.slot[std::size_t(flat)] = std::int32_t(p.mean.size() + p.pending.size());
    p.pending.push_back(flat);
  };
  auto fill = [&](PlaneCache& p) {
    const std::size_t first = p.mean.size();
    const std::size_t count = p.pending.size();
    p.mean.resize(first + count);
    p.v.resize((first + count) * m);
    p.h.resize((first + count) * m);
    parallel_for(count, threads, [&](std::size_t t) {
      const std::int32_t flat = p.pending[t];
      const Vec3 x = grid.point(flat % nx, flat / nx, p.k);
      const std::size_t s = first + t;
      p.mean[s] = point_basis(model, pre, x, &p.v[s * m], &p.h[s * m]);
    });
    p.pending.clear();
  };

  std::vector<CellGaussian> gaussians;
  std::size_t begin = 0;
  while (begin < cells.size()) {
    const int k = grid.cell_coords(cells[begin])[2];
    std::size_t end = begin;
    while (end < cells.size() && grid.cell_coords(cells[end])[2] == k) ++end;

    const auto gp_start = Clock::now();
    // Reuse the previous top plane as this slab's bottom plane.
    if (planes[0].k != k) {
      if (planes[1].k == k) std::swap(planes[0], planes[1]);
      else reset(planes[0], k);
    }
    if (planes[1].k != k + 1) reset(planes[1], k + 1);

    for (std::size_t c = begin; c < end; ++c) {
      const auto [ci, cj, ck] = grid.cell_coords(cells[c]);
      for (const auto& o : kCornerOffsets)
        request(planes[o[2]], std::int32_t((ci + o[0]) + std::int64_t(nx) * (cj + o[1])));
    }
    fill(planes[0]);
    fill(planes[1]);

    const std::size_t slab = end - begin;
    gaussians.resize(slab);
    parallel_for(slab, threads, [&](std::size_t t) {
      const auto [ci, cj, ck] = grid.cell_coords(cells[begin + t]);
      CellGaussian& cell = gaussians[t];
      const double* mp[8];
      const double* vp[8];
      const double* hp[8];
      for (int c = 0; c < 8; ++c) {
        const auto& o = kCornerOffsets[std::size_t(c)];
        const PlaneCache& p = planes[o[2]];
        const std::size_t s =
            std::size_t(p.slot[std::size_t((ci + o[0]) + std::int64_t(nx) * (cj + o[1]))]);
        cell.corner_positions[std::size_t(c)] = grid.point(ci + o[0], cj + o[1], ck + o[2]);
        mp[c] = &p.mean[s];
        vp[c] = &p.v[s * m];
        hp[c] = &p.h[s * m];
      }
      assemble(model, cell, mp, vp, hp);
    });
    result.time_gp += seconds_since(gp_start);

    const auto mc_start = Clock::now();
    parallel_for(slab, threads, [&](std::size_t t) {
      const std::int64_t index = cells[begin + t];
      result.probabilities[begin + t] = mc_crossing_probability(
          gaussians[t], theta, samples, derive_cell_seed(seed, std::uint64_t(index)));
    });
    result.time_mc += seconds_since(mc_start);
    begin = end;
  }
  return result;
}

}  // namespace gplcp
