#include "gplcp/types.hpp"

#include <cmath>
#include <sstream>

#include "gplcp/error.hpp"

namespace gplcp {

namespace {

bool all_finite(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return m.allFinite();
}

}  // namespace

std::vector<std::string> validate_model(const SparseGpModel& model) {
  std::vector<std::string> report;
  const auto& k = model.kernel;
  if (!(k.lengthscale > 0.0) || !std::isfinite(k.lengthscale))
    report.emplace_back("lengthscale must be positive");
  if (!(k.variance > 0.0) || !std::isfinite(k.variance))
    report.emplace_back("variance must be positive");
  if (!(model.noise_variance >= 0.0) || !std::isfinite(model.noise_variance))
    report.emplace_back("noise_variance must be nonnegative");
  if (!std::isfinite(model.scalar_mean))
    report.emplace_back("scalar_mean must be finite");
  if (!model.domain.lo.allFinite() || !model.domain.hi.allFinite() ||
      (model.domain.lo.array() > model.domain.hi.array()).any())
    report.emplace_back("domain_bounds must be finite with lo <= hi");

  const auto m = static_cast<Eigen::Index>(model.size());
  if (m < 1) {
    report.emplace_back("at least one inducing point is required");
    return report;
  }
  if (model.inducing_mean.size() != m)
    report.emplace_back("inducing_mean length must equal the number of inducing points");
  if (model.inducing_cov.rows() != m || model.inducing_cov.cols() != m) {
    report.emplace_back("inducing_cov must be m x m");
  } else if (!all_finite(model.inducing_cov)) {
    report.emplace_back("inducing_cov must be finite");
  } else {
    const auto& a = model.inducing_cov;
    const double scale = a.cwiseAbs().maxCoeff();
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
      report.emplace_back("inducing_cov must be symmetric");
    const double trace = a.trace();
    if (trace < 0.0) {
      report.emplace_back("inducing_cov is not positive semidefinite");
    } else {
      Eigen::MatrixXd jittered = a;
      jittered.diagonal().array() += 1e-10 * trace / double(m) + 1e-300;
      Eigen::LLT<Eigen::MatrixXd> llt(jittered);
      if (llt.info() != Eigen::Success)
        report.emplace_back("inducing_cov is not positive semidefinite");
    }
  }
  if (model.inducing_mean.size() == m && !all_finite(model.inducing_mean))
    report.emplace_back("inducing_mean must be finite");

  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& p = model.inducing_positions[i];
    if (!p.allFinite() || !model.domain.contains(p)) {
      std::ostringstream msg;
      msg << "inducing position " << i << " lies outside domain_bounds";
      report.push_back(msg.str());
      break;
    }
  }
  return report;
}

GridSpec GridSpec::spanning(const Box3& box, const std::array<int, 3>& dims) {
  GridSpec spec;
  spec.dims = dims;
  spec.origin = box.lo;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw ConfigError("grid dims must be >= 2 on every axis");
    spec.spacing[a] = (box.hi[a] - box.lo[a]) / double(dims[a] - 1);
  }
  return spec;
}

std::array<int, 3> GridSpec::cell_coords(std::int64_t index) const {
  const std::int64_t nx = cells(0), ny = cells(1);
  return {int(index % nx), int((index / nx) % ny), int(index / (nx * ny))};
}

std::array<int, 3> GridSpec::point_coords(std::int64_t index) const {
  const std::int64_t nx = dims[0], ny = dims[1];
  return {int(index % nx), int((index / nx) % ny), int(index / (nx * ny))};
}

void GridSpec::check() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) throw ConfigError("grid dims must be >= 2 on every axis");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw ConfigError("grid spacing must be positive");
    if (!std::isfinite(origin[a])) throw ConfigError("grid origin must be finite");
  }
}

VolumeField VolumeField::zeros(const GridSpec& spec, Centering kind) {
  VolumeField field;
  field.spec = spec;
  field.kind = kind;
  field.values.assign(std::size_t(expected_size(spec, kind)), 0.0);
  return field;
}

std::vector<std::string> check_query_config(const QueryConfig& cfg) {
  std::vector<std::string> problems;
  if (!std::isfinite(cfg.iso_value)) problems.emplace_back("iso value must be finite");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 0.5))
    problems.emplace_back("alpha must lie in (0, 0.5)");
  if (!(cfg.beta > 0.0)) problems.emplace_back("beta must be positive");
  if (cfg.max_depth < 0) problems.emplace_back("max_depth must be nonnegative");
  if (cfg.mc_samples < 1) problems.emplace_back("mc samples must be >= 1");
  if (cfg.optimizer.max_iters < 1) problems.emplace_back("optimizer max_iters must be >= 1");
  if (cfg.optimizer.multistarts < 1 || cfg.optimizer.multistarts > 15)
    problems.emplace_back("optimizer multistarts must lie in [1, 15]");
  if (!(cfg.optimizer.grad_tol >= 0.0)) problems.emplace_back("optimizer grad_tol must be >= 0");
  if (cfg.threads < 0) problems.emplace_back("threads must be >= 0");
  return problems;
}

}  // namespace gplcp
