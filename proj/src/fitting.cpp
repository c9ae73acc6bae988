#include "gplcp/fitting.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gplcp/error.hpp"
#include "gplcp/kernel.hpp"
#include "gplcp/parallel.hpp"

namespace gplcp {

namespace {

constexpr Eigen::Index kColumnBlock = 4096;

std::vector<std::size_t> strided_indices(std::size_t n, std::size_t m) {
  std::vector<std::size_t> out(m);
  if (m == 1) {
    out[0] = (n - 1) / 2;
    return out;
  }
  for (std::size_t i = 0; i < m; ++i) out[i] = (i * (n - 1) + (m - 1) / 2) / (m - 1);
  return out;
}

struct TrainingSplit {
  std::vector<Vec3> fit_x;
  Eigen::VectorXd fit_y;
  std::vector<Vec3> score_x;
  Eigen::VectorXd score_y;
};

TrainingSplit split_training(const VolumeField& training, double holdout_fraction,
                             double centre) {
  const auto& g = training.spec;
  std::vector<Vec3> xs;
  std::vector<double> ys;
  std::vector<Vec3> hx;
  std::vector<double> hy;
  const std::int64_t stride =
      holdout_fraction > 0.0 ? std::max<std::int64_t>(2, std::llround(1.0 / holdout_fraction))
                             : 0;
  for (std::int64_t idx = 0; idx < g.num_points(); ++idx) {
    const auto c = g.point_coords(idx);
    const Vec3 p = g.point(c[0], c[1], c[2]);
    const double y = training.values[std::size_t(idx)] - centre;
    if (stride > 0 && idx % stride == stride / 2) {
      hx.push_back(p);
      hy.push_back(y);
    } else {
      xs.push_back(p);
      ys.push_back(y);
    }
  }
  TrainingSplit split;
  split.fit_x = std::move(xs);
  split.fit_y = Eigen::Map<Eigen::VectorXd>(ys.data(), Eigen::Index(ys.size()));
  if (hx.empty()) {
    split.score_x = split.fit_x;
    split.score_y = split.fit_y;
  } else {
    split.score_x = std::move(hx);
    split.score_y = Eigen::Map<Eigen::VectorXd>(hy.data(), Eigen::Index(hy.size()));
  }
  return split;
}

SparseGpModel build_model(const VolumeField& training, double centre,
                          std::span<const Vec3> inducing, const HyperParams& hp,
                          const InducingPosterior& post) {
  SparseGpModel model;
  model.kernel = {KernelKind::rbf, hp.lengthscale, hp.variance};
  model.noise_variance = hp.noise_variance;
  model.scalar_mean = centre;
  model.domain = training.spec.bounds();
  model.inducing_positions.assign(inducing.begin(), inducing.end());
  model.inducing_mean = post.mean;
  model.inducing_cov = post.cov;
  return model;
}

double mean_log_density(const SparseGpModel& model, const Precomp& pre,
                        std::span<const Vec3> xs, const Eigen::VectorXd& ys_centred) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = predict_point(model, pre, xs[i]);
    const double var = p.variance + model.noise_variance;
    const double r = ys_centred[Eigen::Index(i)] + model.scalar_mean - p.mean;
    total += -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
  }
  return total / double(xs.size());
}

std::vector<double> log_spaced(double centre, std::initializer_list<double> factors) {
  std::vector<double> out;
  for (double f : factors) out.push_back(centre * f);
  return out;
}

}  // namespace

HyperGrid default_hyper_grid(const VolumeField& training) {
  const Vec3 extent = training.spec.bounds().extent();
  const double e = extent.maxCoeff();
  double mean = 0.0;
  for (double v : training.values) mean += v;
  mean /= double(training.values.size());
  double var = 0.0;
  for (double v : training.values) var += (v - mean) * (v - mean);
  var = std::max(var / double(training.values.size()), 1e-12);
  HyperGrid grid;
  grid.lengthscales = log_spaced(e, {0.125, 0.25, 0.5, 1.0, 2.0});
  grid.variances = log_spaced(var, {1.0, 10.0, 100.0, 1000.0});
  grid.noise_variances = log_spaced(var, {1e-6, 1e-4, 1e-2});
  return grid;
}

std::vector<Vec3> select_inducing(std::span<const Vec3> positions, int m,
                                  InducingSelection selection, int kmeans_iterations) {
  if (m < 1) throw ConfigError("number of inducing points must be >= 1");
  if (std::size_t(m) > positions.size())
    throw ConfigError("number of inducing points exceeds the number of training points");
  std::vector<Vec3> centres;
  for (auto i : strided_indices(positions.size(), std::size_t(m)))
    centres.push_back(positions[i]);
  if (selection == InducingSelection::uniform_grid_subsample) return centres;

  std::vector<Vec3> sums(centres.size());
  std::vector<std::size_t> counts(centres.size());
  for (int it = 0; it < kmeans_iterations; ++it) {
    std::fill(sums.begin(), sums.end(), Vec3::Zero());
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& p : positions) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centres.size(); ++c) {
        const double d = squared_distance(p, centres[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sums[best] += p;
      ++counts[best];
    }
    bool moved = false;
    for (std::size_t c = 0; c < centres.size(); ++c) {
      if (counts[c] == 0) continue;
      const Vec3 next = sums[c] / double(counts[c]);
      moved = moved || next != centres[c];
      centres[c] = next;
    }
    if (!moved) break;
  }
  return centres;
}

InducingPosterior dtc_inducing_posterior(std::span<const Vec3> x, const Eigen::VectorXd& y,
                                         std::span<const Vec3> inducing,
                                         const KernelParams& kernel, double noise_variance) {
  if (!(noise_variance > 0.0)) throw ConfigError("noise variance must be positive for fitting");
  const auto m = Eigen::Index(inducing.size());
  const auto n = Eigen::Index(x.size());
  const double inv_sd = 1.0 / std::sqrt(noise_variance);

  const InducingFactor factor = factorize_inducing_prior(inducing, kernel);
  const auto lower = factor.lower.triangularView<Eigen::Lower>();

  // With Aw = L^-1 K_MN / sigma_y:  Q = L (I + Aw Aw^T) L^T.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (Eigen::Index start = 0; start < n; start += kColumnBlock) {
    const Eigen::Index cols = std::min(kColumnBlock, n - start);
    Eigen::MatrixXd block = cov_block(inducing, x.subspan(std::size_t(start), std::size_t(cols)),
                                      kernel);
    lower.solveInPlace(block);
    block *= inv_sd;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(block);
    rhs.noalias() += block * y.segment(start, cols);
  }
  rhs *= inv_sd;
  gram = gram.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Eigen::MatrixXd> gram_llt(gram);
  if (gram_llt.info() != Eigen::Success)
    throw FactorizationFailure("DTC system matrix Q is not positive definite");

  InducingPosterior post;
  // mu_M = L B^-1 Aw y / sigma_y ; A_M = L B^-1 L^T
  post.mean = factor.lower * gram_llt.solve(rhs);
  const Eigen::MatrixXd s = gram_llt.solve(Eigen::MatrixXd::Identity(m, m));
  Eigen::MatrixXd a = factor.lower * s * factor.lower.transpose();
  post.cov = 0.5 * (a + a.transpose());
  return post;
}

FitResult fit_sgpr_detailed(const VolumeField& training, const FitConfig& cfg) {
  if (training.kind != Centering::point)
    throw ConfigError("training volume must be point-centred");
  if (!training.consistent()) throw SizeMismatch("training volume size does not match its grid");
  for (double v : training.values)
    if (!std::isfinite(v)) throw ConfigError("training values must be finite");
  if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 0.5))
    throw ConfigError("holdout fraction must lie in [0, 0.5)");

  double centre = 0.0;
  for (double v : training.values) centre += v;
  centre /= double(training.values.size());

  const TrainingSplit split = split_training(training, cfg.holdout_fraction, centre);
  if (cfg.num_inducing < 1 || std::size_t(cfg.num_inducing) > split.fit_x.size())
    throw ConfigError("number of inducing points must lie in [1, training points]");
  const std::vector<Vec3> inducing =
      select_inducing(split.fit_x, cfg.num_inducing, cfg.selection, cfg.kmeans_iterations);

  std::vector<HyperParams> candidates;
  if (cfg.fixed) {
    candidates.push_back(*cfg.fixed);
  } else {
    HyperGrid grid = cfg.grid;
    const HyperGrid defaults = default_hyper_grid(training);
    if (grid.lengthscales.empty()) grid.lengthscales = defaults.lengthscales;
    if (grid.variances.empty()) grid.variances = defaults.variances;
    if (grid.noise_variances.empty()) grid.noise_variances = defaults.noise_variances;
    for (double l : grid.lengthscales)
      for (double s : grid.variances)
        for (double nv : grid.noise_variances) candidates.push_back({l, s, nv});
  }
  for (const auto& c : candidates)
    if (!(c.lengthscale > 0.0 && c.variance > 0.0 && c.noise_variance > 0.0))
      throw ConfigError("hyperparameters must be positive");

  std::vector<CandidateScore> scores(candidates.size());
  std::vector<SparseGpModel> models(candidates.size());
  const bool score_needed = candidates.size() > 1;
  parallel_for(candidates.size(), cfg.threads, [&](std::size_t i) {
    scores[i].params = candidates[i];
    try {
      const KernelParams kernel{KernelKind::rbf, candidates[i].lengthscale,
                                candidates[i].variance};
      const auto post = dtc_inducing_posterior(split.fit_x, split.fit_y, inducing, kernel,
                                               candidates[i].noise_variance);
      models[i] = build_model(training, centre, inducing, candidates[i], post);
      if (score_needed) {
        const Precomp pre = precompute(models[i]);
        scores[i].log_density = mean_log_density(models[i], pre, split.score_x, split.score_y);
        if (!std::isfinite(scores[i].log_density)) scores[i].failed = true;
      }
    } catch (const FactorizationFailure&) {
      scores[i].failed = true;
    } catch (const NumericalInstability&) {
      scores[i].failed = true;
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].failed) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& b = scores[*best];
    if (scores[i].log_density > b.log_density ||
        (scores[i].log_density == b.log_density &&
         scores[i].params.lengthscale > b.params.lengthscale))
      best = i;
  }
  if (!best) throw FactorizationFailure("every hyperparameter candidate failed to factorize");

  FitResult result;
  result.model = std::move(models[*best]);
  result.chosen = candidates[*best];
  result.candidates = std::move(scores);
  return result;
}

SparseGpModel fit_sgpr(const VolumeField& training, const FitConfig& cfg) {
  return fit_sgpr_detailed(training, cfg).model;
}

double psnr(const VolumeField& reference, const VolumeField& reconstruction) {
  if (!(reference.spec == reconstruction.spec) || reference.kind != reconstruction.kind ||
      reference.values.size() != reconstruction.values.size())
    throw SpecMismatch("psnr: volumes have different grids");
  const auto [lo, hi] = std::minmax_element(reference.values.begin(), reference.values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) throw DegenerateRange("psnr: reference volume is constant");
  double sq = 0.0;
  for (std::size_t i = 0; i < reference.values.size(); ++i) {
    const double d = reference.values[i] - reconstruction.values[i];
    sq += d * d;
  }
  const double rmse = std::sqrt(sq / double(reference.values.size()));
  if (rmse == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(range / rmse);
}

VolumeField reconstruct_mean(const SparseGpModel& model, const Precomp& pre,
                             const GridSpec& grid, int threads) {
  VolumeField out = VolumeField::zeros(grid, Centering::point);
  parallel_for(std::size_t(grid.num_points()), threads, [&](std::size_t idx) {
    const auto c = grid.point_coords(std::int64_t(idx));
    out.values[idx] = predict_mean(model, pre, grid.point(c[0], c[1], c[2]));
  });
  return out;
}

}  // namespace gplcp
