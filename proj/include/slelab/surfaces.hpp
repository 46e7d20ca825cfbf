#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"
#include "slelab/params.hpp"
#include "slelab/rng.hpp"

namespace slelab {

/// A one-dimensional process on the grid k*dt, k = 0..K.
struct RadialProcess {
  double dt = 0.0;
  double drift = 0.0;  // drift of the unconditioned motion
  std::vector<double> values;
  std::uint64_t seed = 0;
  double sup = 0.0;                 // supremum of the continuous path on [0, T_max]
  std::optional<double> hit_time;  // grid time at which a prescribed maximum was reached

  double horizon() const { return dt * double(values.size() - 1); }
  double at(double t) const {
    const std::size_t k = std::size_t(std::llround(t / dt));
    if (k >= values.size()) throw DomainError("time beyond the sampled horizon");
    return values[k];
  }
};

namespace detail {

inline std::size_t grid_steps(double T_max, double dt) {
  if (!(dt > 0.0) || !(T_max > 0.0)) throw DomainError("need T_max > 0 and dt > 0");
  return std::size_t(std::llround(T_max / dt));
}

// Maximum of a Brownian bridge from x to y over time dt with variance 2 per unit time.
template <class Rng>
double bridge_max(double x, double y, double dt, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = 1.0 - unif(rng);
  return 0.5 * (x + y + std::sqrt((y - x) * (y - x) - 4.0 * dt * std::log(u)));
}

// Runs variance-2 Brownian motion with drift mu from 0 until it first reaches
// `a`, with hits between grid points detected by the bridge crossing
// probability. Returns the index of the hitting grid point or K if none.
template <class Rng>
std::size_t run_until_hit(RadialProcess& p, double mu, double a, std::size_t K, Rng& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double sd = std::sqrt(2.0 * p.dt);
  double x = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double y = x + mu * p.dt + sd * normal(rng);
    const bool crossed = y >= a || unif(rng) < std::exp(-(a - x) * (a - y) / p.dt);
    if (crossed) {
      p.values.push_back(a);
      p.hit_time = double(k + 1) * p.dt;
      return k + 1;
    }
    p.values.push_back(y);
    p.sup = std::max(p.sup, y);
    x = y;
  }
  return K;
}

// Continues from `a` with a - sqrt(2)|B + nu t e|, B a 3D Brownian motion: a
// variance-2 motion with drift -sqrt(2) nu conditioned to stay below a.
template <class Rng>
void run_below(RadialProcess& p, double a, double nu, std::size_t steps, Rng& rng) {
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(p.dt);
  std::array<double, 3> B{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < steps; ++k) {
    B[0] += nu * p.dt + sd * normal(rng);
    B[1] += sd * normal(rng);
    B[2] += sd * normal(rng);
    p.values.push_back(a - std::sqrt(2.0) * std::hypot(B[0], B[1], B[2]));
  }
}

}  // namespace detail

/// Variance-2 Brownian motion with drift -(Q - beta) from 0; the supremum is sampled exactly.
inline RadialProcess sample_M_beta(double beta, const LqgParams& lq, double T_max, double dt,
                                   std::uint64_t seed) {
  if (!(beta < lq.Q())) throw DomainError("need beta < Q");
  const std::size_t K = detail::grid_steps(T_max, dt);
  RadialProcess p;
  p.dt = dt;
  p.drift = -(lq.Q() - beta);
  p.seed = seed;
  p.values.reserve(K + 1);
  p.values.push_back(0.0);
  auto rng = sample_stream(seed, 0);
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(2.0 * dt);
  double x = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    const double y = x + p.drift * dt + sd * normal(rng);
    p.sup = std::max(p.sup, detail::bridge_max(x, y, dt, rng));
    p.values.push_back(y);
    x = y;
  }
  return p;
}

/**
 * @brief The same motion decomposed at its maximum a: drift +(Q - beta) until
 * hitting a, then drift -(Q - beta) conditioned to stay below a.
 */
inline RadialProcess sample_M_beta_given_max(double beta, double a, const LqgParams& lq,
                                             double T_max, double dt, std::uint64_t seed) {
  if (!(beta < lq.Q())) throw DomainError("need beta < Q");
  if (!(a > 0.0)) throw DomainError("the maximum must be positive");
  const std::size_t K = detail::grid_steps(T_max, dt);
  const double mu = lq.Q() - beta;
  RadialProcess p;
  p.dt = dt;
  p.drift = -mu;
  p.seed = seed;
  p.values.reserve(K + 1);
  p.values.push_back(0.0);
  auto rng = sample_stream(seed, 0);
  const std::size_t k = detail::run_until_hit(p, mu, a, K, rng);
  if (p.hit_time) {
    p.sup = a;
    detail::run_below(p, a, mu / std::sqrt(2.0), K - k, rng);
  }
  return p;
}

/// Driftless variance-2 motion until hitting a, then a - sqrt(2) |3D Brownian motion|.
inline RadialProcess sample_M_Qminus(double a, double T_max, double dt, std::uint64_t seed) {
  if (!(a > 0.0)) throw DomainError("the maximum must be positive");
  const std::size_t K = detail::grid_steps(T_max, dt);
  RadialProcess p;
  p.dt = dt;
  p.seed = seed;
  p.values.reserve(K + 1);
  p.values.push_back(0.0);
  auto rng = sample_stream(seed, 0);
  const std::size_t k = detail::run_until_hit(p, 0.0, a, K, rng);
  if (p.hit_time) {
    p.sup = a;
    detail::run_below(p, a, 0.0, K - k, rng);
  }
  return p;
}

/**
 * @brief Two independent radial parts of a thick quantum disk: variance-2
 * motion with drift -(Q - beta) conditioned to stay negative.
 *
 * The distance y = -X solves dy = mu coth(mu y / 2) dt + sqrt(2) dB. It starts
 * at eps_start and is integrated by Euler with sub-steps no longer than
 * substep_rel * y^2, reflected at 0.
 */
inline std::pair<RadialProcess, RadialProcess> sample_disk_radial_conditioned(
    double W, const LqgParams& lq, double T_max, double dt, std::uint64_t seed,
    double eps_start = 1e-4, double substep_rel = 1e-2) {
  if (!(W > lq.kappa() / 2.0)) throw DomainError("need a thick weight W > gamma^2/2");
  if (!(eps_start > 0.0)) throw DomainError("eps_start must be positive");
  const double beta = weight_to_beta(W, lq);
  const double mu = lq.Q() - beta;
  const std::size_t K = detail::grid_steps(T_max, dt);
  auto run = [&](std::uint64_t stream) {
    RadialProcess p;
    p.dt = dt;
    p.drift = -mu;
    p.seed = seed;
    p.values.reserve(K + 1);
    auto rng = sample_stream(seed, 0, stream);
    std::normal_distribution<double> normal;
    double y = eps_start;
    p.values.push_back(-y);
    for (std::size_t k = 0; k < K; ++k) {
      double left = dt;
      while (left > 0.0) {
        const double h = std::min(left, substep_rel * y * y);
        y += mu / std::tanh(0.5 * mu * y) * h + std::sqrt(2.0 * h) * normal(rng);
        y = std::abs(y);
        if (y == 0.0) y = std::numeric_limits<double>::min();
        left -= h;
        if (left < 1e-15 * dt) left = 0.0;
      }
      p.values.push_back(-y);
    }
    p.sup = -eps_start;
    for (double v : p.values) p.sup = std::max(p.sup, v);
    return p;
  };
  return {run(0), run(1)};
}

/// Beads of a thin quantum disk whose left boundary lengths fall in a window.
struct BeadChain {
  std::vector<double> left_lengths;  // in chain order
  double total_left = 0.0;
  double length_min = 0.0;  // window used for the bead lengths
  double length_max = 0.0;
  double T = 0.0;           // length of the Poisson time interval
  double T_window = 0.0;    // T was drawn uniformly from (0, T_window]
  double weight = 0.0;      // density of the T measure over the uniform proposal
  double intensity = 0.0;   // expected number of beads per unit time in the window
};

/// Integral over [lo, hi] of the bead length density of a thin disk of weight W.
inline double bead_window_intensity(double W, double lo, double hi, const LqgParams& lq) {
  const LengthLawDensity d = disk_length_density(lq.kappa() - W, lq);
  if (d.infinite) throw DomainError("bead length law is infinite");
  const double e1 = d.exponent + 1.0;
  if (std::abs(e1) < 1e-14) return d.prefactor * std::log(hi / lo);
  return d.prefactor * (std::pow(hi, e1) - std::pow(lo, e1)) / e1;
}

/**
 * @brief Samples T uniformly on (0, T_window], then the beads of the Poisson
 * process of weight gamma^2 - W disks on [0, T] with lengths in [lmin, lmax].
 */
inline BeadChain thin_chain_structure(double W, double lmin, double lmax, const LqgParams& lq,
                                      std::uint64_t seed, double T_window = 1.0) {
  if (!(W > 0.0 && W < lq.kappa() / 2.0)) throw DomainError("thin weights lie in (0, gamma^2/2)");
  if (!(lmin > 0.0 && lmin < lmax)) throw DomainError("need 0 < lmin < lmax");
  if (!(T_window > 0.0)) throw DomainError("T_window must be positive");
  BeadChain c;
  c.length_min = lmin;
  c.length_max = lmax;
  c.T_window = T_window;
  const double f = 1.0 - 2.0 * W / lq.kappa();
  c.weight = T_window / (f * f);
  c.intensity = bead_window_intensity(W, lmin, lmax, lq);
  auto rng = sample_stream(seed, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  c.T = T_window * (1.0 - unif(rng));
  std::poisson_distribution<long> count(c.T * c.intensity);
  const long n = count(rng);
  const double e1 = disk_length_density(lq.kappa() - W, lq).exponent + 1.0;
  for (long i = 0; i < n; ++i) {
    const double u = unif(rng);
    double ell;
    if (std::abs(e1) < 1e-14) {
      ell = lmin * std::pow(lmax / lmin, u);
    } else {
      const double a = std::pow(lmin, e1), b = std::pow(lmax, e1);
      ell = std::pow(a + u * (b - a), 1.0 / e1);
    }
    c.left_lengths.push_back(ell);
    c.total_left += ell;
  }
  return c;
}

}  // namespace slelab
