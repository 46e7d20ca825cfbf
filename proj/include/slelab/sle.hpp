#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"
#include "slelab/harness.hpp"
#include "slelab/parallel.hpp"
#include "slelab/rng.hpp"

namespace slelab {

struct ForcePoint {
  double x;    // initial position; 0 on the left means 0-, on the right 0+
  double rho;  // weight
};

/// Force points of SLE_kappa(rho), each side listed from the origin outward.
struct ForcePointConfig {
  double kappa = 2.0;
  std::vector<ForcePoint> left;
  std::vector<ForcePoint> right;

  void validate() const {
    if (!(kappa > 0.0 && kappa <= 4.0)) throw DomainError("kappa must lie in (0,4]");
    for (std::size_t i = 0; i < left.size(); ++i) {
      if (left[i].x > 0.0) throw DomainError("left force points must lie at or left of 0-");
      if (i > 0 && !(left[i].x < left[i - 1].x))
        throw DomainError("left force points must be strictly ordered away from 0");
    }
    for (std::size_t i = 0; i < right.size(); ++i) {
      if (right[i].x < 0.0) throw DomainError("right force points must lie at or right of 0+");
      if (i > 0 && !(right[i].x > right[i - 1].x))
        throw DomainError("right force points must be strictly ordered away from 0");
    }
  }
};

/**
 * @brief Step control of the Loewner discretization.
 *
 * A step has length dt * max(G, floor_rel * S)^2, where G is the smallest and S
 * the largest distance from W to a tracked point (at least 2 sqrt(t)), so dt is
 * a relative step.
 */
struct SimOptions {
  double floor_rel = 1e-3;
  double reflect_rel = 1e-9;  // W is kept this far (relative to S) from force points
  std::size_t max_steps = 50'000'000;
};

enum class StepStatus { ok, threshold, observer_hit, nonfinite };

/**
 * @brief Driving function W together with the images of tracked boundary points.
 *
 * Over a step of length h the driving value is frozen, so every tracked point
 * moves by the exact vertical slit map V -> W + sign(V-W) sqrt((V-W)^2 + 4h).
 * W then moves by the Brownian increment plus the drift of each force point,
 * integrated over the step from the pre-step distances.
 *
 * Points are stored by their distance to W and by their distance to the
 * previous point on the same side. The latter is updated multiplicatively, so
 * nearby images keep full relative precision even when they sit far from 0.
 */
class LoewnerFlow {
 public:
  struct Point {
    double v;       // initial position
    double rho;
    double deriv = 1.0;    // g'_t at the original point
    bool observer = false;  // swallowing this point is an error
    double d = 0.0;    // |g_t(x) - W_t|
    double gap = 0.0;  // distance to the previous point of the same side
  };

  LoewnerFlow(double kappa, std::vector<Point> left, std::vector<Point> right, SimOptions opt)
      : sqrt_kappa_(std::sqrt(kappa)), left_(std::move(left)), right_(std::move(right)), opt_(opt) {
    init(left_, -1);
    init(right_, +1);
  }

  double time() const { return t_; }
  double W() const { return W_; }
  const std::vector<Point>& left() const { return left_; }
  const std::vector<Point>& right() const { return right_; }
  double position(const Point& p, int side) const { return W_ + side * p.d; }
  void set_time(double t) { t_ = t; }

  double proposed_step(double dt, double horizon) const {
    double G = std::numeric_limits<double>::infinity(), S = 0.0;
    for (const auto* side : {&left_, &right_}) {
      if (side->empty()) continue;
      G = std::min(G, side->front().d);
      S = std::max(S, side->back().d);
    }
    if (!std::isfinite(G)) return dt * horizon;
    // 2 sqrt(t) is the natural length scale when all points start near W
    S = std::max(S, 2.0 * std::sqrt(t_));
    const double g = std::max(G, opt_.floor_rel * S);
    // every point sits at W (start from 0+/0-): no length scale yet
    if (g == 0.0) return dt * dt * horizon;
    return dt * g * g;
  }

  StepStatus advance(double h, double dB) {
    double drift = 0.0, scale = 0.0;
    for (const auto& p : right_) drift += drift_toward(p, h);
    for (const auto& p : left_) drift -= drift_toward(p, h);
    slit(right_, h, scale);
    slit(left_, h, scale);
    double dW = sqrt_kappa_ * dB + drift;
    t_ += h;
    if (!std::isfinite(dW)) return StepStatus::nonfinite;
    const double floor = opt_.reflect_rel * std::max(scale, 2.0 * std::sqrt(t_));
    if (!right_.empty() && dW > right_.front().d - floor) {
      const StepStatus s = collide(right_, dW, floor);
      if (s != StepStatus::ok) return finish_at(right_, +1, s);
      const double d0 = right_.front().d;
      if (dW > d0) dW = 2.0 * d0 - dW;
      dW = std::min(dW, d0 - floor);
    }
    if (!left_.empty() && -dW > left_.front().d - floor) {
      const StepStatus s = collide(left_, -dW, floor);
      if (s != StepStatus::ok) return finish_at(left_, -1, s);
      const double d0 = left_.front().d;
      if (-dW > d0) dW = -(2.0 * d0 + dW);
      dW = std::max(dW, floor - d0);
    }
    // a reflection off one side may overshoot the other when both are close
    if (!right_.empty()) dW = std::min(dW, right_.front().d - floor);
    if (!left_.empty()) dW = std::max(dW, floor - left_.front().d);
    W_ += dW;
    for (auto& p : right_) p.d -= dW;
    for (auto& p : left_) p.d += dW;
    return StepStatus::ok;
  }

 private:
  void init(std::vector<Point>& pts, int side) {
    double prev = 0.0;
    for (auto& p : pts) {
      p.d = side * (p.v - W_);
      p.gap = p.d - prev;
      prev = p.d;
    }
  }

  // Displacement of W towards one point under its drift rho/d alone, integrated
  // exactly over the step: d -> sqrt(d^2 + 2 rho h). Equals rho h / d to first
  // order and stays bounded by sqrt(2 |rho| h) when W is close to the point.
  static double drift_toward(const Point& p, double h) {
    return p.d - std::sqrt(std::max(p.d * p.d + 2.0 * p.rho * h, 0.0));
  }

  static void slit(std::vector<Point>& pts, double h, double& scale) {
    double prev_d = 0.0, prev_nd = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      auto& p = pts[i];
      const double nd = std::sqrt(p.d * p.d + 4.0 * h);
      p.deriv *= p.d / nd;
      if (i > 0) p.gap *= (p.d + prev_d) / (nd + prev_nd);
      prev_d = p.d;
      prev_nd = nd;
      p.d = nd;
      scale = std::max(scale, nd);
    }
    if (!pts.empty()) pts.front().gap = pts.front().d;
  }

  // W moved by `reach` towards the points of one side: decide between the
  // continuation threshold, a swallowed observer, and reflection.
  static StepStatus collide(const std::vector<Point>& pts, double reach, double floor) {
    double cum = 0.0;
    bool observer = false;
    for (const auto& p : pts) {
      if (p.d > reach + floor) break;
      cum += p.rho;
      observer = observer || p.observer;
      if (cum <= -2.0) return StepStatus::threshold;
    }
    return observer ? StepStatus::observer_hit : StepStatus::ok;
  }

  StepStatus finish_at(std::vector<Point>& pts, int side, StepStatus s) {
    const double dW = side * pts.front().d;
    W_ += dW;
    for (auto& p : right_) p.d -= dW;
    for (auto& p : left_) p.d += dW;
    return s;
  }

  double sqrt_kappa_;
  std::vector<Point> left_;
  std::vector<Point> right_;
  SimOptions opt_;
  double t_ = 0.0;
  double W_ = 0.0;
};

/// A discretized driving function with the trajectories of its force points.
struct DrivingPath {
  double dt = 0.0;
  double kappa = 0.0;
  std::vector<double> times;
  std::vector<double> W;
  std::vector<std::vector<double>> V;  // left force points first, then right ones
  std::vector<int> sides;               // -1 left, +1 right, per entry of V
  std::optional<double> threshold_time;
  std::uint64_t rng_seed = 0;

  /// A path with prescribed driving values and no force points.
  static DrivingPath from_driving(std::vector<double> times, std::vector<double> W) {
    if (times.size() != W.size() || times.empty())
      throw DomainError("times and driving values must be non-empty and of equal length");
    DrivingPath p;
    p.times = std::move(times);
    p.W = std::move(W);
    return p;
  }
};

/**
 * @brief Simulates the driving function of SLE_kappa(rho) up to time T.
 *
 * The grid contains T/2 and T exactly. Stops early at the continuation
 * threshold and records its time.
 */
inline DrivingPath simulate_driving(const ForcePointConfig& cfg, double T, double dt,
                                    std::uint64_t seed, SimOptions opt = {}) {
  cfg.validate();
  if (!(T >= 0.0) || !(dt > 0.0)) throw DomainError("need T >= 0 and dt > 0");
  std::vector<LoewnerFlow::Point> L, R;
  for (const auto& f : cfg.left) L.push_back({f.x, f.rho, 1.0, false});
  for (const auto& f : cfg.right) R.push_back({f.x, f.rho, 1.0, false});
  LoewnerFlow flow(cfg.kappa, L, R, opt);
  DrivingPath path;
  path.dt = dt;
  path.kappa = cfg.kappa;
  path.rng_seed = seed;
  const std::size_t np = L.size() + R.size();
  path.V.resize(np);
  for (std::size_t i = 0; i < L.size(); ++i) path.sides.push_back(-1);
  for (std::size_t i = 0; i < R.size(); ++i) path.sides.push_back(+1);
  auto record = [&] {
    path.times.push_back(flow.time());
    path.W.push_back(flow.W());
    std::size_t i = 0;
    for (const auto& p : flow.left()) path.V[i++].push_back(flow.position(p, -1));
    for (const auto& p : flow.right()) path.V[i++].push_back(flow.position(p, +1));
  };
  record();
  auto rng = sample_stream(seed, 0);
  std::normal_distribution<double> normal;
  const double stops[2] = {0.5 * T, T};
  std::size_t step = 0;
  for (double stop : stops) {
    while (flow.time() < stop) {
      double h = flow.proposed_step(dt, T);
      const bool last = h >= stop - flow.time();
      if (last) h = stop - flow.time();
      const StepStatus s = flow.advance(h, std::sqrt(h) * normal(rng));
      if (last) flow.set_time(stop);
      ++step;
      if (s == StepStatus::nonfinite) throw SimulationError("non-finite driving value", step);
      record();
      if (s == StepStatus::threshold) {
        path.threshold_time = flow.time();
        return path;
      }
      if (step > opt.max_steps) throw SimulationError("step limit exceeded", step);
    }
  }
  return path;
}

struct ObserverState {
  double g_value = 1.0;
  double g_derivative = 1.0;
  bool swallowed = false;
  std::optional<double> swallow_time;
};

namespace detail {

// Flow of one boundary point along a stored path up to grid index `upto`.
// With clamp set, a swallowed right point is replaced by the image of the
// swallowed set's right end, which then follows the flow again.
inline ObserverState flow_point(const DrivingPath& path, double z0, std::size_t upto, bool clamp,
                                double swallow_eps) {
  ObserverState st;
  st.g_value = z0;
  const int side = z0 >= path.W.front() ? +1 : -1;
  for (std::size_t k = 0; k < upto; ++k) {
    const double h = path.times[k + 1] - path.times[k];
    const double d = std::abs(st.g_value - path.W[k]);
    const double nd = std::sqrt(d * d + 4.0 * h);
    st.g_derivative *= d / nd;
    st.g_value = path.W[k] + side * nd;
    const double gap = side * (st.g_value - path.W[k + 1]);
    if (gap < swallow_eps) {
      if (clamp) {
        st.g_value = path.W[k + 1];
        continue;
      }
      st.swallowed = true;
      st.swallow_time = path.times[k + 1];
      return st;
    }
  }
  return st;
}

}  // namespace detail

/// Images g_t(z0) and g_t'(z0) at the end of the path.
inline ObserverState evolve_observer(const DrivingPath& path, double z0,
                                     double swallow_eps = 1e-12) {
  return detail::flow_point(path, z0, path.times.size() - 1, false, swallow_eps);
}

struct PsiPrime {
  double value = 1.0;       // at the path horizon
  double half_value = 1.0;  // at the grid time closest to half the horizon
  bool converged = true;
};

/**
 * @brief psi'(1) for the map fixing 1 and sending the hit points to 0 and infinity.
 *
 * a is the image of the rightmost swallowed point of [0,1) (the flow of 0+),
 * b = g_T(1); the point at infinity stays at infinity, so psi' = g'_T(1)/(b-a).
 */
inline PsiPrime psi_prime_at_one(const DrivingPath& path, double conv_tol = 1e-3) {
  const std::size_t end = path.times.size() - 1;
  const double Th = 0.5 * path.times.back();
  std::size_t half = 0;
  while (half < end && path.times[half] < Th) ++half;
  auto psi_at = [&](std::size_t upto) {
    // joint flow of 0+ (clamped to W once swallowed) and 1, with their gap
    // carried multiplicatively
    double a = 0.0, b = 1.0, gap = 1.0 - std::max(0.0, path.W.front()), deriv = 1.0;
    a = std::max(a, path.W.front());
    for (std::size_t k = 0; k < upto; ++k) {
      const double h = path.times[k + 1] - path.times[k];
      const double da = a - path.W[k], db = b - path.W[k];
      const double na = std::sqrt(da * da + 4.0 * h), nb = std::sqrt(db * db + 4.0 * h);
      deriv *= db / nb;
      gap *= (da + db) / (na + nb);
      a = path.W[k] + na;
      b = path.W[k] + nb;
      if (b - path.W[k + 1] < 1e-12 * nb)
        throw CurveHitOneError("the curve swallowed the point 1");
      if (a < path.W[k + 1]) {
        a = path.W[k + 1];
        gap = b - a;
      }
    }
    return deriv / gap;
  };
  PsiPrime out;
  out.value = psi_at(end);
  out.half_value = psi_at(half);
  out.converged = std::abs(out.value - out.half_value) <= conv_tol * out.value;
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo of psi'(1) for SLE_kappa(rho_-; rho_+, rho_1) with force points (0-; 0+, 1)

enum class SampleStatus { ok, observer_hit, threshold, nonfinite, step_limit };

struct RadiusSetup {
  double kappa;
  double rho_minus;
  double rho_plus;
  double rho_1;
  double T = 1e6;
  double dt = 1e-3;
  double conv_tol = 1e-3;
  SimOptions opt{};
};

struct RadiusSample {
  double psi = 1.0;
  double psi_half = 1.0;
  SampleStatus status = SampleStatus::ok;
  std::size_t steps = 0;
  // coupled path with every step split in two (Brownian bridge midpoints)
  double fine_psi = 1.0;
  double fine_psi_half = 1.0;
  SampleStatus fine_status = SampleStatus::ok;
};

namespace detail {

inline LoewnerFlow radius_flow(const RadiusSetup& s) {
  return LoewnerFlow(s.kappa, {{0.0, s.rho_minus, 1.0, false}},
                     {{0.0, s.rho_plus, 1.0, false}, {1.0, s.rho_1, 1.0, true}}, s.opt);
}

inline double radius_psi(const LoewnerFlow& f) {
  const auto& r = f.right();
  return r[1].deriv / r[1].gap;
}

inline SampleStatus to_sample_status(StepStatus s) {
  switch (s) {
    case StepStatus::threshold: return SampleStatus::threshold;
    case StepStatus::observer_hit: return SampleStatus::observer_hit;
    case StepStatus::nonfinite: return SampleStatus::nonfinite;
    default: return SampleStatus::ok;
  }
}

}  // namespace detail

/// One path of the radius experiment; the random stream is fixed by (seed, index).
inline RadiusSample run_radius_sample(const RadiusSetup& s, std::uint64_t seed,
                                      std::uint64_t index, bool with_fine) {
  LoewnerFlow coarse = detail::radius_flow(s);
  LoewnerFlow fine = detail::radius_flow(s);
  auto rng = sample_stream(seed, index, 0);
  auto bridge_rng = sample_stream(seed, index, 1);
  std::normal_distribution<double> normal, bridge_normal;
  RadiusSample out;
  bool fine_alive = with_fine;
  const double stops[2] = {0.5 * s.T, s.T};
  for (int si = 0; si < 2; ++si) {
    const double stop = stops[si];
    while (coarse.time() < stop) {
      double h = coarse.proposed_step(s.dt, s.T);
      const bool last = h >= stop - coarse.time();
      if (last) h = stop - coarse.time();
      const double dB = std::sqrt(h) * normal(rng);
      const StepStatus st = coarse.advance(h, dB);
      if (fine_alive) {
        const double dB1 = 0.5 * dB + 0.5 * std::sqrt(h) * bridge_normal(bridge_rng);
        StepStatus fs = fine.advance(0.5 * h, dB1);
        if (fs == StepStatus::ok) fs = fine.advance(0.5 * h, dB - dB1);
        if (last) fine.set_time(stop);
        if (fs != StepStatus::ok) {
          out.fine_status = detail::to_sample_status(fs);
          fine_alive = false;
        }
      }
      if (last) coarse.set_time(stop);
      ++out.steps;
      if (st != StepStatus::ok) {
        out.status = detail::to_sample_status(st);
        if (with_fine && fine_alive) out.fine_status = out.status;
        return out;
      }
      if (out.steps > s.opt.max_steps) {
        out.status = out.fine_status = SampleStatus::step_limit;
        return out;
      }
    }
    const double psi = detail::radius_psi(coarse);
    if (!(psi >= 1.0 - 1e-9)) throw SimulationError("psi'(1) fell below 1", out.steps);
    (si == 0 ? out.psi_half : out.psi) = psi;
    if (fine_alive) (si == 0 ? out.fine_psi_half : out.fine_psi) = detail::radius_psi(fine);
  }
  return out;
}

struct RadiusBatch {
  RadiusSetup setup;
  std::vector<RadiusSample> samples;
  std::size_t total_steps = 0;
  double failed_fraction = 0.0;       // observer hit, threshold or numerical failure
  double unconverged_fraction = 0.0;  // T versus T/2 disagreement above conv_tol
};

inline RadiusBatch sample_radius(const RadiusSetup& s, std::size_t n, std::uint64_t seed,
                                 unsigned workers, bool with_fine) {
  check_admissible(s.kappa, s.rho_minus, s.rho_plus, s.rho_1);
  RadiusBatch b;
  b.setup = s;
  b.samples.resize(n);
  parallel_for(n, workers, [&](std::size_t i) {
    b.samples[i] = run_radius_sample(s, seed, i, with_fine);
  });
  std::size_t failed = 0, unconverged = 0;
  for (const auto& r : b.samples) {
    b.total_steps += r.steps;
    if (r.status != SampleStatus::ok) ++failed;
    else if (std::abs(r.psi - r.psi_half) > s.conv_tol * r.psi) ++unconverged;
  }
  if (n > 0) {
    b.failed_fraction = double(failed) / double(n);
    b.unconverged_fraction = double(unconverged) / double(n);
  }
  return b;
}

struct RadiusMoment {
  MomentEstimate estimate;
  std::optional<MomentEstimate> fine;        // coupled half-step estimate
  std::optional<MomentEstimate> difference;  // paired fine - coarse
  double unconverged_fraction = 0.0;
  double failed_fraction = 0.0;
  std::size_t total_steps = 0;
  std::vector<double> values;  // psi'(1)^alpha of the successful samples, in sample order
};

struct McOptions {
  unsigned workers = 1;
  bool dt_halving = false;
  double max_bad_fraction = 0.05;
  double conv_tol = 1e-3;
  SimOptions sim{};
};

namespace detail {

inline void check_batch_quality(const RadiusBatch& b, double max_bad) {
  if (b.failed_fraction > max_bad)
    throw QualityError("fraction of failed samples " + std::to_string(b.failed_fraction) +
                       " exceeds " + std::to_string(max_bad));
  if (b.unconverged_fraction > max_bad)
    throw QualityError("fraction of unconverged samples " +
                       std::to_string(b.unconverged_fraction) + " exceeds " +
                       std::to_string(max_bad));
}

inline MomentEstimate constant_estimate(double c, std::size_t n) {
  MomentEstimate e;
  e.mean = c;
  e.n = n;
  e.ess = double(n);
  return e;
}

}  // namespace detail

/// Monte Carlo estimate of E[psi'(1)^alpha] paired with the closed form.
inline RadiusMoment mc_radius_moment(double kappa, double rho_minus, double rho_plus, double rho1,
                                     double alpha, std::size_t n_samples, double T, double dt,
                                     std::uint64_t seed, const McOptions& o = {}) {
  const RadiusMomentQuery q = make_radius_query(kappa, rho_minus, rho_plus, rho1, alpha);
  if (alpha >= q.alpha_0)
    throw DomainError("alpha must be below the divergence threshold " + std::to_string(q.alpha_0));
  RadiusMoment out;
  if (alpha == 0.0) {
    out.estimate = detail::constant_estimate(1.0, n_samples);
    out.estimate.set_exact(ExactValue::finite(1.0));
    return out;
  }
  RadiusSetup s{kappa, rho_minus, rho_plus, rho1, T, dt, o.conv_tol, o.sim};
  const RadiusBatch b = sample_radius(s, n_samples, seed, o.workers, o.dt_halving);
  detail::check_batch_quality(b, o.max_bad_fraction);
  std::vector<double> coarse, fine, diff;
  for (const auto& r : b.samples) {
    if (r.status != SampleStatus::ok) continue;
    coarse.push_back(std::pow(r.psi, alpha));
    if (o.dt_halving && r.fine_status == SampleStatus::ok) {
      fine.push_back(std::pow(r.fine_psi, alpha));
      diff.push_back(fine.back() - coarse.back());
    }
  }
  out.estimate = accumulate(coarse);
  out.estimate.set_exact(radius_moment_exact(q));
  out.values = std::move(coarse);
  if (o.dt_halving) {
    out.fine = accumulate(fine);
    out.difference = accumulate(diff);
  }
  out.unconverged_fraction = b.unconverged_fraction;
  out.failed_fraction = b.failed_fraction;
  out.total_steps = b.total_steps;
  return out;
}

struct ReversalCheck {
  MomentEstimate direct;
  MomentEstimate weighted;
  double alpha_star = 0.0;
  std::vector<double> direct_values;
};

/**
 * @brief Direct moment under SLE_kappa(rho_-; rho_+, rho_1) against the
 * reweighted moment under SLE_kappa(rho_-; rho_+ + rho_1, -rho_1).
 */
inline ReversalCheck mc_reversal_check(double kappa, double rho_minus, double rho_plus,
                                       double rho1, double alpha_obs, std::size_t n_samples,
                                       double T, double dt, std::uint64_t seed,
                                       const McOptions& o = {}) {
  const double as = reversal_exponent(kappa, rho1);
  const RadiusMomentQuery q1 = make_radius_query(kappa, rho_minus, rho_plus, rho1, alpha_obs);
  const RadiusMomentQuery q2 =
      make_radius_query(kappa, rho_minus, rho_plus + rho1, -rho1, alpha_obs + as);
  if (alpha_obs >= q1.alpha_0 || alpha_obs + as >= q2.alpha_0 || as >= q2.alpha_0)
    throw DomainError("reversal check needs all moments below their thresholds");
  RadiusSetup s1{kappa, rho_minus, rho_plus, rho1, T, dt, o.conv_tol, o.sim};
  RadiusSetup s2{kappa, rho_minus, rho_plus + rho1, -rho1, T, dt, o.conv_tol, o.sim};
  const RadiusBatch b1 = sample_radius(s1, n_samples, seed, o.workers, false);
  const RadiusBatch b2 = sample_radius(s2, n_samples, splitmix64(seed ^ 0x5eedULL), o.workers, false);
  detail::check_batch_quality(b1, o.max_bad_fraction);
  detail::check_batch_quality(b2, o.max_bad_fraction);
  std::vector<double> direct, values, weights;
  for (const auto& r : b1.samples)
    if (r.status == SampleStatus::ok) direct.push_back(std::pow(r.psi, alpha_obs));
  for (const auto& r : b2.samples) {
    if (r.status != SampleStatus::ok) continue;
    values.push_back(std::pow(r.psi, alpha_obs));
    weights.push_back(std::pow(r.psi, as));
  }
  ReversalCheck out;
  out.alpha_star = as;
  out.direct = accumulate(direct);
  out.weighted = accumulate(values, weights);
  const ExactValue target = radius_moment_exact(q1);
  out.direct.set_exact(target);
  out.weighted.set_exact(target);
  out.direct_values = std::move(direct);
  if (out.weighted.ess < 100.0)
    throw QualityError("effective sample size " + std::to_string(out.weighted.ess) + " below 100");
  return out;
}

struct DivergenceCheck {
  double alpha_0 = 0.0;
  double alpha_below = 0.0;
  double alpha_above = 0.0;
  MomentEstimate below;  // finite target
  MomentEstimate above;  // infinite target
  std::vector<std::size_t> checkpoints;
  std::vector<double> running_above;  // running mean of the divergent moment at the checkpoints
  double failed_fraction = 0.0;
};

/**
 * @brief Moments just below and just above the divergence threshold, estimated
 * from the same paths, with running means of the divergent one.
 */
inline DivergenceCheck mc_divergence_check(double kappa, double rho_minus, double rho_plus,
                                           double rho1, double offset, std::size_t n_samples,
                                           double T, double dt, std::uint64_t seed,
                                           const McOptions& o = {}) {
  if (!(offset > 0.0)) throw DomainError("offset must be positive");
  DivergenceCheck out;
  out.alpha_0 = alpha_threshold(kappa, rho_plus, rho1);
  out.alpha_below = out.alpha_0 - offset;
  out.alpha_above = out.alpha_0 + offset;
  RadiusSetup s{kappa, rho_minus, rho_plus, rho1, T, dt, o.conv_tol, o.sim};
  const RadiusBatch b = sample_radius(s, n_samples, seed, o.workers, false);
  detail::check_batch_quality(b, o.max_bad_fraction);
  out.failed_fraction = b.failed_fraction;
  std::vector<double> lo, hi;
  for (const auto& r : b.samples) {
    if (r.status != SampleStatus::ok) continue;
    lo.push_back(std::pow(r.psi, out.alpha_below));
    hi.push_back(std::pow(r.psi, out.alpha_above));
  }
  out.below = accumulate(lo);
  out.below.set_exact(radius_moment_exact(kappa, rho_minus, rho_plus, rho1, out.alpha_below));
  out.above = accumulate(hi);
  out.above.set_exact(ExactValue::infinity());
  for (std::size_t c = std::max<std::size_t>(hi.size() / 16, 2); ; c *= 2) {
    c = std::min(c, hi.size());
    out.checkpoints.push_back(c);
    out.running_above.push_back(pairwise_sum(std::span<const double>(hi.data(), c)) / double(c));
    if (c == hi.size()) break;
  }
  return out;
}

}  // namespace slelab

