#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gplcp {

using Vec3 = Eigen::Vector3d;

/// Axis-aligned box, bounds inclusive.
struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  Box3 enlarged(double radius) const {
    return {lo.array() - radius, hi.array() + radius};
  }
  Vec3 center() const { return 0.5 * (lo + hi); }
  Vec3 extent() const { return hi - lo; }
};

enum class KernelKind { rbf };

/// Isotropic stationary kernel hyperparameters. Lengthscale is in world
/// units of the model domain, variance in squared field units.
struct KernelParams {
  KernelKind kind = KernelKind::rbf;
  double lengthscale = 1.0;
  double variance = 1.0;
};

/// A fitted sparse GP regression model.
///
/// `inducing_mean` and `inducing_cov` describe the posterior N(mu_M, A_M) of
/// the latent field at the inducing positions, relative to the zero-mean
/// prior. Predictions add `scalar_mean` back.
struct SparseGpModel {
  KernelParams kernel;
  double noise_variance = 0.0;
  double scalar_mean = 0.0;
  Box3 domain;
  std::vector<Vec3> inducing_positions;
  Eigen::VectorXd inducing_mean;
  Eigen::MatrixXd inducing_cov;

  std::size_t size() const { return inducing_positions.size(); }
};

/// Returns the violated invariants of `model`; empty means valid.
std::vector<std::string> validate_model(const SparseGpModel& model);

/// Regular 3D lattice. `dims` counts grid points per axis.
struct GridSpec {
  std::array<int, 3> dims{2, 2, 2};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();

  /// Lattice with `dims` points spanning `box` exactly.
  static GridSpec spanning(const Box3& box, const std::array<int, 3>& dims);

  int cells(int axis) const { return dims[axis] - 1; }
  std::int64_t num_points() const {
    return std::int64_t(dims[0]) * dims[1] * dims[2];
  }
  std::int64_t num_cells() const {
    return std::int64_t(cells(0)) * cells(1) * cells(2);
  }
  std::int64_t point_index(int i, int j, int k) const {
    return i + std::int64_t(dims[0]) * (j + std::int64_t(dims[1]) * k);
  }
  std::int64_t cell_index(int i, int j, int k) const {
    return i + std::int64_t(cells(0)) * (j + std::int64_t(cells(1)) * k);
  }
  std::array<int, 3> cell_coords(std::int64_t index) const;
  std::array<int, 3> point_coords(std::int64_t index) const;

  double coordinate(int axis, int index) const {
    return origin[axis] + spacing[axis] * index;
  }
  Vec3 point(int i, int j, int k) const {
    return {coordinate(0, i), coordinate(1, j), coordinate(2, k)};
  }
  Box3 bounds() const {
    return {origin, point(dims[0] - 1, dims[1] - 1, dims[2] - 1)};
  }
  bool operator==(const GridSpec& other) const {
    return dims == other.dims && origin == other.origin && spacing == other.spacing;
  }

  /// Throws ConfigError unless every axis has at least 2 points and a
  /// positive spacing.
  void check() const;
};

enum class Centering { cell, point };

/// Scalar field over a GridSpec, x-fastest row-major.
struct VolumeField {
  GridSpec spec;
  Centering kind = Centering::point;
  std::vector<double> values;

  static VolumeField zeros(const GridSpec& spec, Centering kind);
  static std::int64_t expected_size(const GridSpec& spec, Centering kind) {
    return kind == Centering::point ? spec.num_points() : spec.num_cells();
  }
  bool consistent() const {
    return std::int64_t(values.size()) == expected_size(spec, kind);
  }
};

struct OptimizerConfig {
  int max_iters = 50;
  double grad_tol = 1e-8;
  int multistarts = 5;
};

struct QueryConfig {
  double iso_value = 0.0;
  double alpha = 1e-3;
  double beta = 6.0;
  /// 0 selects ceil(log2(max cells per axis)).
  int max_depth = 0;
  int mc_samples = 1600;
  std::uint64_t rng_seed = 0;
  OptimizerConfig optimizer;
  /// 0 selects the hardware concurrency.
  int threads = 0;
};

/// Problems with a query configuration, empty when usable.
std::vector<std::string> check_query_config(const QueryConfig& cfg);

}  // namespace gplcp
