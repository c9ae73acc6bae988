#include "gplcp/inference.hpp"

#include <cmath>
#include <sstream>

#include "gplcp/error.hpp"
#include "gplcp/kernel.hpp"

namespace gplcp {

namespace {

constexpr int kMaxJitterEscalations = 3;

// Plain loop: fixed summation order independent of pointer alignment.
double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

Eigen::VectorXd kernel_column(const SparseGpModel& model, const Vec3& x) {
  const auto m = Eigen::Index(model.size());
  Eigen::VectorXd k(m);
  for (Eigen::Index j = 0; j < m; ++j)
    k[j] = rbf(x, model.inducing_positions[std::size_t(j)], model.kernel);
  return k;
}

}  // namespace

InducingFactor factorize_inducing_prior(std::span<const Vec3> positions,
                                        const KernelParams& params) {
  const Eigen::MatrixXd kmm = cov_block(positions, positions, params);
  InducingFactor factor;
  {
    Eigen::LLT<Eigen::MatrixXd> plain(kmm);
    factor.jitter_required = plain.info() != Eigen::Success;
  }
  const double base = 1e-10 * kmm.trace();
  for (int attempt = 0; attempt <= kMaxJitterEscalations; ++attempt) {
    const double jitter = base * std::pow(10.0, attempt);
    Eigen::MatrixXd shifted = kmm;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() == Eigen::Success) {
      factor.lower = llt.matrixL();
      factor.jitter = jitter;
      factor.escalations = attempt;
      if (attempt > 0) factor.jitter_required = true;
      return factor;
    }
  }
  throw FactorizationFailure(
      "K_MM is not positive definite after jitter escalation "
      "(degenerate inducing placement, e.g. duplicate points)");
}

Precomp precompute(const SparseGpModel& model) {
  const auto m = Eigen::Index(model.size());
  if (m < 1) throw ConfigError("model has no inducing points");
  if (model.inducing_mean.size() != m || model.inducing_cov.rows() != m ||
      model.inducing_cov.cols() != m)
    throw ConfigError("inducing mean/covariance sizes do not match the inducing positions");

  Precomp pre;
  pre.factor = factorize_inducing_prior(model.inducing_positions, model.kernel);
  const auto lower = pre.factor.lower.triangularView<Eigen::Lower>();

  pre.w = model.inducing_mean;
  lower.solveInPlace(pre.w);
  pre.factor.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(pre.w);

  Eigen::MatrixXd t = model.inducing_cov;
  lower.solveInPlace(t);                       // L^-1 A
  Eigen::MatrixXd s = t.transpose();
  lower.solveInPlace(s);                       // L^-1 (L^-1 A)^T = L^-1 A L^-T
  pre.whitened_cov = 0.5 * (s + s.transpose());
  pre.residual_map = Eigen::MatrixXd::Identity(m, m) - pre.whitened_cov;
  return pre;
}

std::shared_ptr<const PreparedModel> prepare(SparseGpModel model) {
  auto prepared = std::make_shared<PreparedModel>();
  prepared->precomp = precompute(model);
  prepared->model = std::move(model);
  return prepared;
}

double clamp_variance(double raw, const SparseGpModel& model) {
  if (raw >= 0.0) return raw;
  if (raw < -1e-8 * model.kernel.variance || std::isnan(raw)) {
    std::ostringstream msg;
    msg << "posterior variance " << raw << " is below -1e-8 sigma^2; "
        << "the model file is inconsistent";
    throw NumericalInstability(msg.str());
  }
  return 0.0;
}

double point_basis(const SparseGpModel& model, const Precomp& pre, const Vec3& x, double* v,
                   double* h) {
  const std::size_t m = model.size();
  Eigen::VectorXd k = kernel_column(model, x);
  const double mean = model.scalar_mean + dot(k.data(), pre.w.data(), m);
  pre.factor.lower.triangularView<Eigen::Lower>().solveInPlace(k);
  const Eigen::VectorXd hv = pre.residual_map * k;
  for (std::size_t j = 0; j < m; ++j) {
    v[j] = k[Eigen::Index(j)];
    h[j] = hv[Eigen::Index(j)];
  }
  return mean;
}

double basis_covariance(const KernelParams& kernel, const Vec3& a, const Vec3& b,
                        const double* v_a, const double* h_b, std::size_t m) {
  return rbf(a, b, kernel) - dot(v_a, h_b, m);
}

PosteriorGaussian predict_joint(const SparseGpModel& model, const Precomp& pre,
                                std::span<const Vec3> positions) {
  const std::size_t n = positions.size();
  const std::size_t m = model.size();
  PosteriorGaussian out;
  out.positions.assign(positions.begin(), positions.end());
  out.mean.resize(Eigen::Index(n));
  out.cov.resize(Eigen::Index(n), Eigen::Index(n));

  std::vector<double> v(n * m), h(n * m);
  for (std::size_t i = 0; i < n; ++i)
    out.mean[Eigen::Index(i)] = point_basis(model, pre, positions[i], &v[i * m], &h[i * m]);

  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i <= j; ++i) {
      double c = basis_covariance(model.kernel, positions[i], positions[j], &v[i * m],
                                  &h[j * m], m);
      if (i == j) c = clamp_variance(c, model);
      out.cov(Eigen::Index(i), Eigen::Index(j)) = c;
      out.cov(Eigen::Index(j), Eigen::Index(i)) = c;
    }
  }
  return out;
}

PointPrediction predict_point(const SparseGpModel& model, const Precomp& pre, const Vec3& x) {
  const auto joint = predict_joint(model, pre, std::span<const Vec3>(&x, 1));
  return {joint.mean[0], std::max(joint.cov(0, 0), variance_floor(model))};
}

double predict_mean(const SparseGpModel& model, const Precomp& pre, const Vec3& x) {
  const Eigen::VectorXd k = kernel_column(model, x);
  return model.scalar_mean + dot(k.data(), pre.w.data(), model.size());
}

PointPredictionWithGradients predict_point_with_gradients(const SparseGpModel& model,
                                                          const Precomp& pre, const Vec3& x) {
  const std::size_t m = model.size();
  const double inv_l2 = 1.0 / (model.kernel.lengthscale * model.kernel.lengthscale);

  Eigen::VectorXd k = kernel_column(model, x);
  PointPredictionWithGradients out;
  out.value.mean = model.scalar_mean + dot(k.data(), pre.w.data(), m);

  // dk_j/dx = -(x - x_j) / l^2 * k_j
  Eigen::Matrix<double, Eigen::Dynamic, 3> dk(Eigen::Index(m), 3);
  for (std::size_t j = 0; j < m; ++j)
    dk.row(Eigen::Index(j)) =
        (-(x - model.inducing_positions[j]) * (inv_l2 * k[Eigen::Index(j)])).transpose();

  const auto lower = pre.factor.lower.triangularView<Eigen::Lower>();
  Eigen::VectorXd v = k;
  lower.solveInPlace(v);
  Eigen::VectorXd g = pre.residual_map * v;  // h
  const double raw = model.kernel.variance - dot(v.data(), g.data(), m);
  out.value.variance = std::max(clamp_variance(raw, model), variance_floor(model));
  pre.factor.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(g);  // L^-T h

  for (int d = 0; d < 3; ++d) {
    const double* col = dk.col(d).data();
    out.gradient.mean[d] = dot(col, pre.w.data(), m);
    out.gradient.variance[d] = -2.0 * dot(col, g.data(), m);
  }
  return out;
}

PointGradients predict_point_gradients(const SparseGpModel& model, const Precomp& pre,
                                       const Vec3& x) {
  return predict_point_with_gradients(model, pre, x).gradient;
}

}  // namespace gplcp
