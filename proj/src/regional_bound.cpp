#include "gplcp/regional_bound.hpp"

#include <algorithm>
#include <cmath>

#include "gplcp/cell_lcp.hpp"
#include "gplcp/error.hpp"
#include "gplcp/kernel.hpp"

namespace gplcp {

std::vector<int> inducing_in_box(const SparseGpModel& model, std::span<const int> candidates,
                                 const Box3& box) {
  std::vector<int> out;
  for (int i : candidates)
    if (box.contains(model.inducing_positions[std::size_t(i)])) out.push_back(i);
  return out;
}

std::vector<int> all_inducing(const SparseGpModel& model) {
  std::vector<int> out(model.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = int(i);
  return out;
}

LocalGp::LocalGp(std::shared_ptr<const PreparedModel> parent, std::vector<int> subset)
    : parent_(std::move(parent)), subset_(std::move(subset)) {
  const auto& full = parent_->model;
  full_ = subset_.size() == full.size();
  if (full_ || subset_.empty()) return;

  SparseGpModel sub;
  sub.kernel = full.kernel;
  sub.noise_variance = full.noise_variance;
  sub.scalar_mean = full.scalar_mean;
  sub.domain = full.domain;
  const auto k = Eigen::Index(subset_.size());
  sub.inducing_mean.resize(k);
  sub.inducing_cov.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const int ia = subset_[std::size_t(a)];
    sub.inducing_positions.push_back(full.inducing_positions[std::size_t(ia)]);
    sub.inducing_mean[a] = full.inducing_mean[ia];
    for (Eigen::Index b = 0; b < k; ++b)
      sub.inducing_cov(a, b) = full.inducing_cov(ia, subset_[std::size_t(b)]);
  }
  local_ = prepare(std::move(sub));
}

PointPredictionWithGradients LocalGp::predict(const Vec3& x) const {
  if (full_) return predict_point_with_gradients(parent_->model, parent_->precomp, x);
  if (local_) return predict_point_with_gradients(local_->model, local_->precomp, x);
  PointPredictionWithGradients prior;
  prior.value.mean = parent_->model.scalar_mean;
  prior.value.variance = parent_->model.kernel.variance;
  return prior;
}

LocalGp build_local_gp(std::shared_ptr<const PreparedModel> model, const Box3& box, double beta) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  const Box3 reach = box.enlarged(distance_threshold(model->model.kernel, beta));
  const auto all = all_inducing(model->model);
  auto subset = inducing_in_box(model->model, all, reach);
  return LocalGp(std::move(model), std::move(subset));
}

CdfWithGradient standardized_margin(const LocalGp& gp, const Vec3& x, double theta,
                                    BoundSide side) {
  const auto p = gp.predict(x);
  const double sigma = std::sqrt(p.value.variance);
  const double diff = theta - p.value.mean;
  const double s = side == BoundSide::below ? 1.0 : -1.0;
  // d sigma = d var / (2 sigma)
  const Vec3 dsigma = p.gradient.variance / (2.0 * sigma);
  CdfWithGradient out;
  out.value = s * diff / sigma;
  out.gradient = s * (-p.gradient.mean * sigma - diff * dsigma) / (sigma * sigma);
  return out;
}

CdfWithGradient f_crossing_cdf(const LocalGp& gp, const Vec3& x, double theta) {
  const auto z = standardized_margin(gp, x, theta, BoundSide::below);
  return {std_normal_cdf(z.value), std_normal_pdf(z.value) * z.gradient};
}

SideMinimum minimize_over_box(BoundSide side, const LocalGp& gp, const Box3& box, double theta,
                              const OptimizerConfig& opt, double stop_margin) {
  const BoxObjective objective = [&](const Vec3& x, Vec3& gradient) {
    const auto z = standardized_margin(gp, x, theta, side);
    gradient = z.gradient;
    return z.value;
  };
  const auto run = minimize_box(objective, box, opt, stop_margin);
  SideMinimum out;
  out.margin = run.best.value;
  out.value = std_normal_cdf(out.margin);
  out.log_value = log_std_normal_cdf(out.margin);
  out.argmin = run.best.argmin;
  out.not_converged = run.not_converged;
  out.stopped_early = run.stopped_early;
  return out;
}

double slepian_upper_bound(double log_b_lower, double log_b_upper, double d) {
  // 1 - Bl^d computed as -expm1(d log Bl) keeps precision when Bl^d is near 1.
  const double lower_part = std::isinf(log_b_lower) ? 1.0 : -std::expm1(d * log_b_lower);
  const double upper_part = std::isinf(log_b_upper) ? 0.0 : std::exp(d * log_b_upper);
  return std::clamp(lower_part - upper_part, 0.0, 1.0);
}

BoundResult regional_upper_bound(const LocalGp& gp, const Box3& box, double theta, std::int64_t d,
                                 const OptimizerConfig& opt) {
  if (d < 1) throw ConfigError("d must be >= 1");
  const auto lo = minimize_over_box(BoundSide::below, gp, box, theta, opt);
  const auto hi = minimize_over_box(BoundSide::above, gp, box, theta, opt);
  BoundResult r;
  r.b_lower = lo.value;
  r.b_upper = hi.value;
  r.log_b_lower = lo.log_value;
  r.log_b_upper = hi.log_value;
  r.d = d;
  r.argmin_lower = lo.argmin;
  r.argmin_upper = hi.argmin;
  r.upper_bound = slepian_upper_bound(r.log_b_lower, r.log_b_upper, double(d));
  return r;
}

}  // namespace gplcp
