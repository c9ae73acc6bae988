#include "gplcp/box_minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace gplcp {

namespace {

constexpr int kHistory = 10;
constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 40;
// Same scale as the usual L-BFGS-B default (factr = 1e7).
constexpr double kRelativeDecrease = 1e7 * std::numeric_limits<double>::epsilon();

Vec3 project(const Vec3& x, const Box3& box) {
  return x.cwiseMax(box.lo).cwiseMin(box.hi);
}

double projected_gradient_norm(const Vec3& x, const Vec3& g, const Box3& box) {
  return (project(x - g, box) - x).cwiseAbs().maxCoeff();
}

// Components pinned at a bound with the gradient pushing outward.
std::array<bool, 3> active_set(const Vec3& x, const Vec3& g, const Box3& box) {
  std::array<bool, 3> active{};
  for (int a = 0; a < 3; ++a)
    active[a] = (x[a] <= box.lo[a] && g[a] > 0.0) || (x[a] >= box.hi[a] && g[a] < 0.0) ||
                box.lo[a] == box.hi[a];
  return active;
}

struct Pair {
  Vec3 s, y;
  double rho;
};

// Two-loop recursion on the free subspace.
Vec3 lbfgs_direction(const Vec3& g, const std::deque<Pair>& pairs, const std::array<bool, 3>& active,
                     double gamma) {
  auto mask = [&](Vec3 v) {
    for (int a = 0; a < 3; ++a)
      if (active[a]) v[a] = 0.0;
    return v;
  };
  Vec3 q = mask(g);
  std::vector<double> alpha(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    alpha[i] = pairs[i].rho * mask(pairs[i].s).dot(q);
    q -= alpha[i] * mask(pairs[i].y);
  }
  Vec3 r = gamma * q;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double beta = pairs[i].rho * mask(pairs[i].y).dot(r);
    r += (alpha[i] - beta) * mask(pairs[i].s);
  }
  return -mask(r);
}

}  // namespace

std::vector<Vec3> multistart_points(const Box3& box, int count) {
  static constexpr int kCorners[8][3] = {{0, 0, 0}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1},
                                         {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 1}};
  std::vector<Vec3> points;
  const Vec3 c = box.center();
  points.push_back(c);
  for (const auto& k : kCorners) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = k[a] ? box.hi[a] : box.lo[a];
    points.push_back(p);
  }
  for (int a = 0; a < 3; ++a) {
    Vec3 lo = c, hi = c;
    lo[a] = box.lo[a];
    hi[a] = box.hi[a];
    points.push_back(lo);
    points.push_back(hi);
  }
  points.resize(std::size_t(std::clamp(count, 1, int(points.size()))));
  return points;
}

BoxMinimum minimize_from(const BoxObjective& f, const Box3& box, const Vec3& start,
                         int max_iters, double grad_tol, double stop_below) {
  BoxMinimum out;
  Vec3 x = project(start, box);
  Vec3 g;
  double fx = f(x, g);
  out.value = fx;
  out.argmin = x;
  if (fx < stop_below) {
    out.reason = StopReason::threshold;
    return out;
  }

  const double diameter = box.extent().norm();
  std::deque<Pair> pairs;
  double gamma = 1.0;

  for (int iter = 0; iter < max_iters; ++iter) {
    if (projected_gradient_norm(x, g, box) <= grad_tol) {
      out.reason = StopReason::gradient;
      return out;
    }
    out.iterations = iter + 1;
    const auto active = active_set(x, g, box);

    if (pairs.empty()) {
      const double gn = g.norm();
      gamma = gn > 0.0 && diameter > 0.0 ? 0.25 * diameter / gn : 1.0;
    }
    Vec3 d = lbfgs_direction(g, pairs, active, gamma);
    bool steepest = pairs.empty();
    if (!(d.dot(g) < 0.0)) {
      d = lbfgs_direction(g, {}, active, pairs.empty() ? gamma : 0.25 * diameter / g.norm());
      steepest = true;
    }

    // Backtracking along the projected path.
    bool accepted = false;
    Vec3 x_new, g_new;
    double f_new = fx;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int b = 0; b < kMaxBacktracks; ++b, t *= 0.5) {
        x_new = project(x + t * d, box);
        const Vec3 step = x_new - x;
        if (step.cwiseAbs().maxCoeff() == 0.0) break;
        f_new = f(x_new, g_new);
        if (f_new <= fx + kArmijo * g.dot(step)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (steepest) break;
        pairs.clear();
        gamma = 0.25 * diameter / std::max(g.norm(), 1e-300);
        d = lbfgs_direction(g, {}, active, gamma);
        steepest = true;
      }
    }
    if (!accepted) {
      out.reason = StopReason::stalled;
      return out;
    }

    const Vec3 s = x_new - x, y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      pairs.push_back({s, y, 1.0 / sy});
      if (int(pairs.size()) > kHistory) pairs.pop_front();
      gamma = sy / y.squaredNorm();
    }
    const double decrease = fx - f_new;
    x = x_new;
    g = g_new;
    fx = f_new;
    if (fx < out.value) {
      out.value = fx;
      out.argmin = x;
    }
    if (fx < stop_below) {
      out.reason = StopReason::threshold;
      return out;
    }
    if (decrease <= kRelativeDecrease * std::max({std::abs(fx + decrease), std::abs(fx), 1.0})) {
      out.reason = StopReason::function_change;
      return out;
    }
  }
  out.reason = projected_gradient_norm(x, g, box) <= grad_tol ? StopReason::gradient
                                                               : StopReason::max_iters;
  return out;
}

MultistartMinimum minimize_box(const BoxObjective& f, const Box3& box, const OptimizerConfig& opt,
                               double stop_below) {
  MultistartMinimum result;
  // The centre always runs first; the other starts are the lowest-valued of
  // the remaining candidate points (fixed order on ties). A fixed pick misses
  // minima sitting at the unlisted corners.
  const auto candidates = multistart_points(box, 15);
  std::vector<std::pair<double, std::size_t>> screened;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    Vec3 g;
    const double v = f(candidates[i], g);
    screened.emplace_back(std::isnan(v) ? std::numeric_limits<double>::infinity() : v, i);
  }
  std::stable_sort(screened.begin(), screened.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Vec3> starts{candidates[0]};
  for (std::size_t i = 0; int(starts.size()) < std::max(opt.multistarts, 1) && i < screened.size(); ++i)
    starts.push_back(candidates[screened[i].second]);

  for (const Vec3& start : starts) {
    const BoxMinimum run = minimize_from(f, box, start, opt.max_iters, opt.grad_tol, stop_below);
    ++result.starts_run;
    if (run.reason == StopReason::max_iters) ++result.not_converged;
    if (run.value < result.best.value || result.starts_run == 1) result.best = run;
    if (run.reason == StopReason::threshold) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace gplcp
