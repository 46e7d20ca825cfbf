#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"
#include "slelab/harness.hpp"
#include "slelab/parallel.hpp"
#include "slelab/params.hpp"
#include "slelab/rng.hpp"

namespace slelab {

/// Midpoints of N equal cells of [0,1].
struct BoundaryGrid {
  std::size_t N = 0;
  double delta = 0.0;
  std::vector<double> points;

  static BoundaryGrid make(std::size_t N) {
    if (N == 0 || (N & (N - 1)) != 0) throw DomainError("grid size must be a power of two");
    if (N > (std::size_t(1) << 16)) throw DomainError("grid size above 2^16");
    BoundaryGrid g;
    g.N = N;
    g.delta = 1.0 / double(N);
    g.points.resize(N);
    for (std::size_t i = 0; i < N; ++i) g.points[i] = (double(i) + 0.5) * g.delta;
    return g;
  }
};

/// Average of -2 log|u - v| over the unit cell against itself.
inline constexpr double kCellSelfAverage = 3.0;

/// Covariance of the discretized boundary field at lag k (in cells).
inline double boundary_covariance(std::size_t lag, double delta) {
  if (lag == 0) return -2.0 * std::log(delta) + kCellSelfAverage;
  return -2.0 * std::log(double(lag) * delta);
}

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

inline FftwBuffer fftw_buffer(std::size_t n) {
  auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  if (!p) throw std::bad_alloc();
  return FftwBuffer(p);
}

}  // namespace detail

/**
 * @brief Exact sampler for a stationary Gaussian vector via circulant embedding.
 *
 * The N x N Toeplitz covariance is embedded in a circulant of size 2N whose
 * eigenvalues are obtained by one FFT. One complex FFT of scaled white noise
 * yields two independent samples (real and imaginary parts).
 */
class CirculantGaussian {
 public:
  /// `lags[k]` is the covariance at lag k, k = 0..N.
  explicit CirculantGaussian(const std::vector<double>& lags) : N_(lags.size() - 1), M_(2 * N_) {
    if (lags.size() < 2) throw DomainError("need at least two lags");
    auto buf = detail::fftw_buffer(M_);
    for (std::size_t k = 0; k < M_; ++k) {
      const std::size_t lag = k <= N_ ? k : M_ - k;
      buf[k][0] = lags[lag];
      buf[k][1] = 0.0;
    }
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      plan_ = fftw_plan_dft_1d(int(M_), buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (!plan_) throw NumericalError("FFT planning failed");
    fftw_execute(plan_);
    double lmax = 0.0;
    min_eigenvalue_ = buf[0][0];
    for (std::size_t k = 0; k < M_; ++k) {
      lmax = std::max(lmax, buf[k][0]);
      min_eigenvalue_ = std::min(min_eigenvalue_, buf[k][0]);
    }
    scale_.resize(M_);
    for (std::size_t k = 0; k < M_; ++k) {
      double l = buf[k][0];
      if (l < 0.0) {
        if (l < -1e-10 * lmax)
          throw NumericalError("circulant embedding is not positive semidefinite (eigenvalue " +
                               std::to_string(l) + ")");
        l = 0.0;
      }
      scale_[k] = std::sqrt(l / double(M_));
    }
  }

  CirculantGaussian(const CirculantGaussian&) = delete;
  CirculantGaussian& operator=(const CirculantGaussian&) = delete;
  ~CirculantGaussian() {
    std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::size_t size() const { return N_; }
  double min_eigenvalue() const { return min_eigenvalue_; }

  /// Two independent samples of length N; safe to call concurrently.
  template <class Rng>
  void sample_pair(Rng& rng, double* a, double* b) const {
    std::normal_distribution<double> normal;
    auto buf = detail::fftw_buffer(M_);
    for (std::size_t k = 0; k < M_; ++k) {
      buf[k][0] = scale_[k] * normal(rng);
      buf[k][1] = scale_[k] * normal(rng);
    }
    fftw_execute_dft(plan_, buf.get(), buf.get());
    for (std::size_t i = 0; i < N_; ++i) {
      a[i] = buf[i][0];
      b[i] = buf[i][1];
    }
  }

 private:
  std::size_t N_;
  std::size_t M_;
  fftw_plan plan_ = nullptr;
  std::vector<double> scale_;
  double min_eigenvalue_ = 0.0;
};

/// Sampler of the boundary field on a grid of [0,1] with the cell-average diagonal.
inline std::unique_ptr<CirculantGaussian> boundary_field_sampler(const BoundaryGrid& grid) {
  std::vector<double> lags(grid.N + 1);
  for (std::size_t k = 0; k <= grid.N; ++k) lags[k] = boundary_covariance(k, grid.delta);
  return std::make_unique<CirculantGaussian>(lags);
}

struct BoundaryFieldSample {
  std::vector<double> values;
  std::vector<double> variance;  // per-point variance used for Wick normalization
  std::uint64_t seed = 0;
};

inline BoundaryFieldSample sample_boundary_field(const BoundaryGrid& grid, std::uint64_t seed) {
  const auto sampler = boundary_field_sampler(grid);
  BoundaryFieldSample s;
  s.seed = seed;
  s.values.resize(grid.N);
  std::vector<double> other(grid.N);
  auto rng = sample_stream(seed, 0);
  sampler->sample_pair(rng, s.values.data(), other.data());
  s.variance.assign(grid.N, boundary_covariance(0, grid.delta));
  return s;
}

struct Insertion {
  double beta;
  double position;
};

struct GmcAtoms {
  std::vector<double> masses;
  std::vector<Insertion> insertions;
};

namespace detail {

// delta * prod_j |x_i - s_j|^{-gamma beta_j / 2} for every cell
inline std::vector<double> insertion_weights(std::size_t N, const std::vector<Insertion>& ins,
                                             double gamma) {
  const double delta = 1.0 / double(N);
  std::vector<double> w(N, delta);
  for (const auto& s : ins) {
    const double rel = s.position / delta - 0.5;
    if (std::abs(rel - std::round(rel)) < 0.1 && s.position >= 0.0 && s.position <= 1.0)
      throw DomainError("insertion within delta/10 of a cell midpoint");
    for (std::size_t i = 0; i < N; ++i) {
      const double x = (double(i) + 0.5) * delta;
      w[i] *= std::pow(std::abs(x - s.position), -0.5 * gamma * s.beta);
    }
  }
  return w;
}

inline double chaos_sum(const double* phi, const std::vector<double>& w, double variance,
                        double gamma, std::size_t lo, std::size_t hi) {
  const double wick = -gamma * gamma / 8.0 * variance;
  double sum = 0.0;
  for (std::size_t i = lo; i < hi; ++i) sum += w[i] * std::exp(0.5 * gamma * phi[i] + wick);
  return sum;
}

}  // namespace detail

/// Cell masses of the Wick-normalized boundary chaos with insertion singularities.
inline GmcAtoms gmc_atoms(const BoundaryFieldSample& f, const std::vector<Insertion>& ins,
                          const LqgParams& p) {
  const std::size_t N = f.values.size();
  if (f.variance.size() != N) throw DomainError("field values and variances differ in length");
  GmcAtoms a;
  a.insertions = ins;
  a.masses = detail::insertion_weights(N, ins, p.gamma());
  const double g = p.gamma();
  for (std::size_t i = 0; i < N; ++i) {
    a.masses[i] *= std::exp(0.5 * g * f.values[i] - g * g / 8.0 * f.variance[i]);
    if (!(a.masses[i] >= 0.0) || !std::isfinite(a.masses[i]))
      throw NumericalError("non-finite chaos mass");
  }
  return a;
}

/// Chaos mass of the cells whose midpoints lie in [lo, hi].
inline double gmc_length(const BoundaryFieldSample& f, const std::vector<Insertion>& ins,
                         double lo, double hi, const LqgParams& p) {
  if (!(0.0 <= lo && lo <= hi && hi <= 1.0)) throw DomainError("interval must lie within [0,1]");
  const GmcAtoms a = gmc_atoms(f, ins, p);
  const double delta = 1.0 / double(a.masses.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.masses.size(); ++i) {
    const double x = (double(i) + 0.5) * delta;
    if (x >= lo && x <= hi) sum += a.masses[i];
  }
  return sum;
}

/// Exponent p = (2Q - beta_bar)/gamma after checking the bounds that make E[nu^p] finite.
inline double gmc_moment_exponent(double b1, double b2, double b3, const LqgParams& p) {
  const double Q = p.Q(), g = p.gamma();
  if (!(std::abs(b1 - b2) < b3)) throw DomainError("Seiberg bound |beta1 - beta2| < beta3 violated");
  if (!(b1 + b2 + b3 > g)) throw DomainError("Seiberg bound beta_bar > gamma violated");
  if (!(b1 < Q)) throw DomainError("Seiberg bound beta1 < Q violated");
  if (!(b2 < Q)) throw DomainError("Seiberg bound beta2 < Q violated");
  const double e = (2.0 * Q - (b1 + b2 + b3)) / g;
  if (!(e < 4.0 / (g * g))) throw DomainError("moment exponent must be below 4/gamma^2");
  if (!(e < 2.0 / g * (Q - b1))) throw DomainError("moment exponent must be below (2/gamma)(Q - beta1)");
  if (!(e < 2.0 / g * (Q - b2))) throw DomainError("moment exponent must be below (2/gamma)(Q - beta2)");
  return e;
}

struct GmcMoment {
  MomentEstimate estimate;
  double exponent = 0.0;
  // grid-doubling gate: a 2N field and its pair averages on the N grid
  std::optional<MomentEstimate> refined;
  std::optional<MomentEstimate> paired_coarse;
  std::optional<MomentEstimate> difference;  // refined - paired coarse, per sample
  std::vector<double> values;                 // nu([0,1])^p per sample
};

struct GmcOptions {
  unsigned workers = 1;
  bool refinement_gate = false;
};

namespace detail {

// p-th powers of total masses for n samples; two samples per FFT, indexed by pair
inline std::vector<double> gmc_power_samples(const BoundaryGrid& grid,
                                             const std::vector<Insertion>& ins, double e,
                                             const LqgParams& p, std::size_t n,
                                             std::uint64_t seed, unsigned workers) {
  const auto sampler = boundary_field_sampler(grid);
  const auto w = insertion_weights(grid.N, ins, p.gamma());
  const double var = boundary_covariance(0, grid.delta);
  std::vector<double> out(n);
  parallel_for((n + 1) / 2, workers, [&](std::size_t j) {
    auto rng = sample_stream(seed, j);
    std::vector<double> a(grid.N), b(grid.N);
    sampler->sample_pair(rng, a.data(), b.data());
    out[2 * j] = std::pow(chaos_sum(a.data(), w, var, p.gamma(), 0, grid.N), e);
    if (2 * j + 1 < n) out[2 * j + 1] = std::pow(chaos_sum(b.data(), w, var, p.gamma(), 0, grid.N), e);
  });
  return out;
}

}  // namespace detail

/**
 * @brief Monte Carlo of E[nu([0,1])^p] with beta1 at 0 and beta2 at 1, p = (2Q - beta_bar)/gamma.
 *
 * The target is h_bar(beta1, beta2, beta3). With the refinement gate, a second
 * run samples fields on 2N cells and compares them with their own pair
 * averages, which form a field on N cells with exactly known variance.
 */
inline GmcMoment mc_gmc_moment(double b1, double b2, double b3, std::size_t N, std::size_t n,
                               const LqgParams& p, std::uint64_t seed, const GmcOptions& o = {}) {
  GmcMoment out;
  out.exponent = gmc_moment_exponent(b1, b2, b3, p);
  const ExactValue target = ExactValue::finite(h_bar(b1, b2, b3, p).value);
  if (out.exponent == 0.0) {
    out.estimate.mean = 1.0;
    out.estimate.n = n;
    out.estimate.ess = double(n);
    out.estimate.set_exact(target);
    return out;
  }
  const BoundaryGrid grid = BoundaryGrid::make(N);
  const std::vector<Insertion> ins{{b1, 0.0}, {b2, 1.0}};
  out.values = detail::gmc_power_samples(grid, ins, out.exponent, p, n, seed, o.workers);
  out.estimate = accumulate(out.values);
  out.estimate.set_exact(target);
  if (!o.refinement_gate) return out;

  const BoundaryGrid fine = BoundaryGrid::make(2 * N);
  const auto sampler = boundary_field_sampler(fine);
  const auto wf = detail::insertion_weights(2 * N, ins, p.gamma());
  const auto wc = detail::insertion_weights(N, ins, p.gamma());
  const double vf = boundary_covariance(0, fine.delta);
  const double vc = 0.5 * (boundary_covariance(0, fine.delta) + boundary_covariance(1, fine.delta));
  std::vector<double> rf(n), rc(n);
  const std::uint64_t gate_seed = splitmix64(seed ^ 0x9e3779b97f4a7c15ULL);
  parallel_for((n + 1) / 2, o.workers, [&](std::size_t j) {
    auto rng = sample_stream(gate_seed, j);
    std::vector<double> a(2 * N), b(2 * N), avg(N);
    sampler->sample_pair(rng, a.data(), b.data());
    for (int half = 0; half < 2; ++half) {
      const std::size_t idx = 2 * j + half;
      if (idx >= n) break;
      const double* f = half == 0 ? a.data() : b.data();
      for (std::size_t i = 0; i < N; ++i) avg[i] = 0.5 * (f[2 * i] + f[2 * i + 1]);
      rf[idx] = std::pow(detail::chaos_sum(f, wf, vf, p.gamma(), 0, 2 * N), out.exponent);
      rc[idx] = std::pow(detail::chaos_sum(avg.data(), wc, vc, p.gamma(), 0, N), out.exponent);
    }
  });
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = rf[i] - rc[i];
  out.refined = accumulate(rf);
  out.paired_coarse = accumulate(rc);
  out.difference = accumulate(diff);
  return out;
}

struct TriangleLengthSample {
  BoundaryFieldSample field;  // shifted so that its length on [0,1] is the target
  double raw_length = 0.0;
  double weight = 0.0;
};

namespace detail {

inline void check_all_thick(const TriangleWeights& tw) {
  for (bool t : tw.thick)
    if (!t) throw DomainError("length-law sampling needs all-thick weights");
}

inline double triangle_weight(const TriangleWeights& tw, double ell, double L, const LqgParams& p) {
  const double Q = p.Q(), g = p.gamma();
  double pre = 2.0 / g;
  for (double b : tw.beta) pre /= (Q - b);
  const double e = (tw.beta_bar - 2.0 * Q) / g;
  return pre * std::pow(ell, e - 1.0) / std::pow(L, e);
}

}  // namespace detail

/**
 * @brief Field with boundary length exactly ell on [0,1] and its importance weight
 * relative to the triangle with the given weights.
 */
inline TriangleLengthSample triangle_length_weighted_sample(const TriangleWeights& tw, double ell,
                                                            std::size_t N, const LqgParams& p,
                                                            std::uint64_t seed) {
  detail::check_all_thick(tw);
  if (N < 1024) throw DomainError("length-law sampling needs N >= 2^10");
  if (!(ell > 0.0)) throw DomainError("target length must be positive");
  const BoundaryGrid grid = BoundaryGrid::make(N);
  const std::vector<Insertion> ins{{tw.beta[0], 0.0}, {tw.beta[1], 1.0}};
  TriangleLengthSample s;
  s.field = sample_boundary_field(grid, seed);
  s.raw_length = gmc_length(s.field, ins, 0.0, 1.0, p);
  if (!(s.raw_length > 0.0)) throw NumericalError("degenerate sample with zero boundary length");
  const double shift = 2.0 / p.gamma() * std::log(ell / s.raw_length);
  for (double& v : s.field.values) v += shift;
  s.weight = detail::triangle_weight(tw, ell, s.raw_length, p);
  return s;
}

struct LengthLawCheck {
  std::vector<double> lengths;
  std::vector<MomentEstimate> mean_weights;  // exact side: triangle_length_density at each length
  double fitted_exponent = 0.0;
  double expected_exponent = 0.0;
};

/// Mean importance weights at several target lengths and the fitted power-law exponent.
inline LengthLawCheck mc_triangle_length_law(const TriangleWeights& tw,
                                             const std::vector<double>& lengths, std::size_t N,
                                             std::size_t n, const LqgParams& p, std::uint64_t seed,
                                             unsigned workers = 1) {
  detail::check_all_thick(tw);
  if (lengths.size() < 2) throw DomainError("need at least two target lengths");
  const BoundaryGrid grid = BoundaryGrid::make(N);
  const std::vector<Insertion> ins{{tw.beta[0], 0.0}, {tw.beta[1], 1.0}};
  const auto sampler = boundary_field_sampler(grid);
  const auto w = detail::insertion_weights(N, ins, p.gamma());
  const double var = boundary_covariance(0, grid.delta);
  std::vector<double> L(n);
  parallel_for((n + 1) / 2, workers, [&](std::size_t j) {
    auto rng = sample_stream(seed, j);
    std::vector<double> a(N), b(N);
    sampler->sample_pair(rng, a.data(), b.data());
    L[2 * j] = detail::chaos_sum(a.data(), w, var, p.gamma(), 0, N);
    if (2 * j + 1 < n) L[2 * j + 1] = detail::chaos_sum(b.data(), w, var, p.gamma(), 0, N);
  });
  const LengthLawDensity dens = triangle_length_density(tw, p);
  LengthLawCheck out;
  out.lengths = lengths;
  out.expected_exponent = dens.exponent;
  std::vector<double> xs, ys;
  for (double ell : lengths) {
    std::vector<double> ws(n);
    for (std::size_t i = 0; i < n; ++i) ws[i] = detail::triangle_weight(tw, ell, L[i], p);
    MomentEstimate m = accumulate(ws);
    m.set_exact(dens.infinite ? ExactValue::infinity() : ExactValue::finite(dens.at(ell)));
    xs.push_back(std::log(ell));
    ys.push_back(std::log(m.mean));
    out.mean_weights.push_back(m);
  }
  const double mx = pairwise_sum(xs) / double(xs.size()), my = pairwise_sum(ys) / double(ys.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  out.fitted_exponent = sxy / sxx;
  return out;
}

}  // namespace slelab
