#include "fixtures.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "gplcp/io.hpp"
#include "gplcp/kernel.hpp"

namespace gplcp::fixtures {

namespace {

using MatL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VecL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

MatL kernel_l(const std::vector<Vec3>& a, const std::vector<Vec3>& b, const KernelParams& k) {
  MatL out(Eigen::Index(a.size()), Eigen::Index(b.size()));
  const long double l2 = (long double)k.lengthscale * k.lengthscale;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      long double r2 = 0;
      for (int d = 0; d < 3; ++d) {
        const long double t = (long double)a[i][d] - b[j][d];
        r2 += t * t;
      }
      out(Eigen::Index(i), Eigen::Index(j)) = k.variance * std::exp(-r2 / (2 * l2));
    }
  return out;
}

double smooth_function(const Vec3& x) {
  return std::sin(0.5 * x[0]) + std::cos(0.3 * x[1]) + 0.2 * x[2] + 0.3 * std::sin(x[0] * x[1] * 0.05);
}

}  // namespace

std::shared_ptr<const PreparedModel> tangle_model() {
  static const auto model = [] {
    FitConfig cfg;
    cfg.num_inducing = 50;
    cfg.fixed = HyperParams{kTangleLengthscale, kTangleSigma * kTangleSigma,
                            kTangleNoiseSigma * kTangleNoiseSigma};
    return prepare(fit_sgpr(tangle_training(), cfg));
  }();
  return model;
}

const VolumeField& tangle_training() {
  static const VolumeField field = generate_tangle({32, 32, 32});
  return field;
}

GridSpec target_grid(const SparseGpModel& model, int n) {
  return GridSpec::spanning(model.domain, {n, n, n});
}

const TanglePair& tangle_pair(int n, double iso) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, TanglePair> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find({n, iso});
  if (it != cache.end()) return it->second;
  TanglePair pair;
  pair.cfg.iso_value = iso;
  const auto model = tangle_model();
  pair.target = target_grid(model->model, n);
  pair.adaptive = lcp_field_adaptive(model, pair.target, pair.cfg);
  pair.dense = lcp_field_dense(model, pair.target, pair.cfg);
  return cache.emplace(std::make_pair(n, iso), std::move(pair)).first->second;
}

Vec3 random_point(std::mt19937_64& rng, const Box3& box) {
  Vec3 p;
  for (int a = 0; a < 3; ++a)
    p[a] = std::uniform_real_distribution<double>(box.lo[a], box.hi[a])(rng);
  return p;
}

SparseGpModel random_model(std::mt19937_64& rng, int m, double lengthscale, const Box3& domain) {
  SparseGpModel model;
  model.kernel = {KernelKind::rbf, lengthscale, 1.0};
  model.noise_variance = 1e-2;
  model.domain = domain;
  for (int i = 0; i < m; ++i) model.inducing_positions.push_back(random_point(rng, domain));

  const int n = 150;
  std::vector<Vec3> x;
  Eigen::VectorXd y(n);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (int i = 0; i < n; ++i) {
    x.push_back(random_point(rng, domain));
    y[i] = smooth_function(x.back()) + noise(rng);
  }
  model.scalar_mean = y.mean();
  y.array() -= model.scalar_mean;
  const auto post = dtc_inducing_posterior(x, y, model.inducing_positions, model.kernel,
                                           model.noise_variance);
  model.inducing_mean = post.mean;
  model.inducing_cov = post.cov;
  return model;
}

SparseGpModel well_conditioned_model(std::mt19937_64& rng, int m) {
  const double spacing = 4.0;
  const int side = int(std::ceil(std::cbrt(double(m))));
  std::vector<Vec3> lattice;
  for (int k = 0; k < side; ++k)
    for (int j = 0; j < side; ++j)
      for (int i = 0; i < side; ++i) lattice.emplace_back(spacing * i, spacing * j, spacing * k);
  std::shuffle(lattice.begin(), lattice.end(), rng);
  lattice.resize(std::size_t(m));
  const Box3 domain{Vec3::Zero(), Vec3::Constant(spacing * (side - 1))};
  SparseGpModel model = random_model(rng, 1, 1.0, domain);
  model.inducing_positions = lattice;
  // Refit with the lattice positions.
  const int n = 150;
  std::vector<Vec3> x;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x.push_back(random_point(rng, domain));
    y[i] = smooth_function(x.back());
  }
  model.scalar_mean = y.mean();
  y.array() -= model.scalar_mean;
  const auto post = dtc_inducing_posterior(x, y, model.inducing_positions, model.kernel,
                                           model.noise_variance);
  model.inducing_mean = post.mean;
  model.inducing_cov = post.cov;
  return model;
}

NaivePosterior naive_posterior(const SparseGpModel& model, const std::vector<Vec3>& positions) {
  const MatL kmm = kernel_l(model.inducing_positions, model.inducing_positions, model.kernel);
  MatL jittered = kmm;
  jittered.diagonal().array() += 1e-10L * kmm.trace();
  const MatL kinv = jittered.inverse();
  const MatL kim = kernel_l(positions, model.inducing_positions, model.kernel);
  const MatL kii = kernel_l(positions, positions, model.kernel);
  const VecL mu = model.inducing_mean.cast<long double>();
  const MatL a = model.inducing_cov.cast<long double>();

  const VecL mean = (kim * (kinv * mu)).array() + (long double)model.scalar_mean;
  const MatL cov = kii - kim * kinv * kim.transpose() + kim * kinv * a * kinv * kim.transpose();
  return {mean.cast<double>(), cov.cast<double>()};
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / (scale > 0 ? scale : 1.0);
}

BoxEstimate dense_box_crossing(const PreparedModel& model, const GridSpec& grid,
                               const std::array<int, 3>& lo, const std::array<int, 3>& hi,
                               double theta, int samples, std::uint64_t seed) {
  std::vector<Vec3> points;
  for (int k = lo[2]; k <= hi[2]; ++k)
    for (int j = lo[1]; j <= hi[1]; ++j)
      for (int i = lo[0]; i <= hi[0]; ++i) points.push_back(grid.point(i, j, k));
  const auto joint = predict_joint(model.model, model.precomp, points);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(joint.cov);
  const Eigen::MatrixXd root =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const auto n = Eigen::Index(points.size());
  Eigen::VectorXd z(n);
  int crossings = 0;
  for (int s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal(rng);
    const Eigen::VectorXd y = joint.mean + root * z;
    const bool below = (y.array() < theta).any() || (y.array() == theta).any();
    const bool above = (y.array() > theta).any() || (y.array() == theta).any();
    crossings += below && above;
  }
  BoxEstimate out;
  out.points = n;
  out.probability = double(crossings) / samples;
  out.stderr_ = std::sqrt(out.probability * (1.0 - out.probability) / samples);
  return out;
}

}  // namespace gplcp::fixtures
