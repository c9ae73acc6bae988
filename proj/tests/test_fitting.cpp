#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "gplcp/error.hpp"
#include "gplcp/io.hpp"

using namespace gplcp;

namespace {

VolumeField smooth_volume(int n, double spacing = 1.0) {
  GridSpec g;
  g.dims = {n, n, n};
  g.spacing = Vec3::Constant(spacing);
  auto f = VolumeField::zeros(g, Centering::point);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const Vec3 p = g.point(i, j, k);
        f.values[std::size_t(g.point_index(i, j, k))] =
            std::sin(0.4 * p[0]) + std::cos(0.3 * p[1]) * 0.5 + 0.1 * p[2];
      }
  return f;
}

}  // namespace

TEST(FitSgpr, InterpolationLimit) {
  const auto training = smooth_volume(4);
  FitConfig cfg;
  cfg.num_inducing = int(training.values.size());
  cfg.fixed = HyperParams{1.5, 1.0, 1e-12};
  const auto model = fit_sgpr(training, cfg);
  const auto pre = precompute(model);
  double mean = 0, sq = 0;
  for (double v : training.values) mean += v;
  mean /= double(training.values.size());
  for (double v : training.values) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / double(training.values.size()));
  double worst = 0.0;
  const auto& g = training.spec;
  for (std::int64_t p = 0; p < g.num_points(); ++p) {
    const auto ijk = g.point_coords(p);
    const double pred = predict_point(model, pre, g.point(ijk[0], ijk[1], ijk[2])).mean;
    worst = std::max(worst, std::abs(pred - training.values[std::size_t(p)]));
  }
  EXPECT_LE(worst, 1e-3 * sd);
}

TEST(FitSgpr, TanglePsnr) {
  const auto model = fixtures::tangle_model();
  const auto& training = fixtures::tangle_training();
  const auto recon = reconstruct_mean(model->model, model->precomp, training.spec);
  const double db = psnr(training, recon);
  std::cout << "Tangle m=50 PSNR " << db << " dB\n";
  EXPECT_GE(db, 30.9);
}

TEST(FitSgpr, ConstantField) {
  auto training = smooth_volume(6);
  const double c = 3.25;
  for (double& v : training.values) v = c;
  FitConfig cfg;
  cfg.num_inducing = 20;
  cfg.fixed = HyperParams{2.0, 1.0, 1e-4};
  const auto model = fit_sgpr(training, cfg);
  const auto pre = precompute(model);
  std::mt19937_64 rng(1);
  Box3 hull{Vec3::Constant(1e300), Vec3::Constant(-1e300)};
  for (const auto& p : model.inducing_positions) {
    hull.lo = hull.lo.cwiseMin(p);
    hull.hi = hull.hi.cwiseMax(p);
  }
  for (int t = 0; t < 200; ++t) {
    const Vec3 x = fixtures::random_point(rng, hull);
    EXPECT_NEAR(predict_point(model, pre, x).mean, c, 1e-6 * c);
  }
}

TEST(FitSgpr, OutputValidates) {
  const auto training = smooth_volume(8);
  FitConfig cfg;
  cfg.num_inducing = 30;
  cfg.fixed = HyperParams{2.0, 1.0, 1e-3};
  EXPECT_TRUE(validate_model(fit_sgpr(training, cfg)).empty());
  cfg.selection = InducingSelection::kmeans_positions;
  const auto km = fit_sgpr(training, cfg);
  EXPECT_TRUE(validate_model(km).empty());
  EXPECT_EQ(km.size(), 30u);
  EXPECT_TRUE(validate_model(fixtures::tangle_model()->model).empty());
}

TEST(FitSgpr, PredictsInducingPosteriorAtInducingPoints) {
  // Sparse inducing set relative to the lengthscale keeps K_MM well conditioned.
  const auto training = smooth_volume(10, 1.0);
  FitConfig cfg;
  cfg.num_inducing = 27;
  cfg.fixed = HyperParams{0.5, 1.0, 1e-3};
  const auto model = fit_sgpr(training, cfg);
  const auto pre = precompute(model);
  const auto joint = predict_joint(model, pre, model.inducing_positions);
  const Eigen::VectorXd centred = joint.mean.array() - model.scalar_mean;
  EXPECT_LE(fixtures::relative_error(centred, model.inducing_mean), 1e-8);
  // The stored K_MM carries a jitter of 1e-10 * trace, so the recovered covariance
  // differs from A_M by O(jitter) in absolute terms; A_M itself is tiny here.
  EXPECT_LE((joint.cov - model.inducing_cov).cwiseAbs().maxCoeff(), 1e-8 * model.kernel.variance);
  const auto oracle = fixtures::naive_posterior(model, model.inducing_positions);
  EXPECT_LE(fixtures::relative_error(joint.cov, oracle.cov), 1e-8);
}

TEST(FitSgpr, DoublingInducingDoesNotHurt) {
  const auto& training = fixtures::tangle_training();
  double previous = -std::numeric_limits<double>::infinity();
  for (int m : {25, 50, 100}) {
    FitConfig cfg;
    cfg.num_inducing = m;
    cfg.fixed = HyperParams{fixtures::kTangleLengthscale, fixtures::kTangleSigma * fixtures::kTangleSigma,
                            fixtures::kTangleNoiseSigma * fixtures::kTangleNoiseSigma};
    const auto model = fit_sgpr(training, cfg);
    const auto pre = precompute(model);
    const double db = psnr(training, reconstruct_mean(model, pre, training.spec));
    std::cout << "m=" << m << " PSNR " << db << "\n";
    EXPECT_GE(db, previous - 0.5);
    previous = db;
  }
}

TEST(FitSgpr, SearchPicksBestCandidate) {
  const auto training = smooth_volume(8);
  FitConfig cfg;
  cfg.num_inducing = 30;
  cfg.holdout_fraction = 0.2;
  cfg.grid.lengthscales = {0.5, 2.0, 8.0};
  cfg.grid.variances = {0.5, 2.0};
  cfg.grid.noise_variances = {1e-4, 1e-2};
  const auto result = fit_sgpr_detailed(training, cfg);
  ASSERT_EQ(result.candidates.size(), 12u);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : result.candidates)
    if (!c.failed) best = std::max(best, c.log_density);
  bool found = false;
  for (const auto& c : result.candidates)
    if (!c.failed && c.log_density == best && c.params.lengthscale == result.chosen.lengthscale &&
        c.params.variance == result.chosen.variance)
      found = true;
  EXPECT_TRUE(found);
  EXPECT_EQ(result.model.kernel.lengthscale, result.chosen.lengthscale);
}

TEST(FitSgpr, Errors) {
  const auto training = smooth_volume(3);
  FitConfig cfg;
  cfg.num_inducing = 28;
  cfg.fixed = HyperParams{1.0, 1.0, 1e-3};
  EXPECT_THROW(fit_sgpr(training, cfg), ConfigError);
  cfg.num_inducing = 5;
  cfg.holdout_fraction = 0.6;
  EXPECT_THROW(fit_sgpr(training, cfg), ConfigError);
  cfg.holdout_fraction = 0.0;
  auto bad = training;
  bad.values[3] = std::nan("");
  EXPECT_THROW(fit_sgpr(bad, cfg), ConfigError);
}

TEST(Psnr, Formula) {
  auto a = smooth_volume(5);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  const auto [lo, hi] = std::minmax_element(a.values.begin(), a.values.end());
  const double range = *hi - *lo;
  auto b = a;
  for (std::size_t i = 0; i < b.values.size(); ++i) b.values[i] += (i % 2 ? 1 : -1) * range / 10;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  auto flat = a;
  for (double& v : flat.values) v = 1.0;
  EXPECT_THROW(psnr(flat, a), DegenerateRange);
  auto other = smooth_volume(4);
  EXPECT_THROW(psnr(a, other), SpecMismatch);
}
