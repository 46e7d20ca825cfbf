#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "slelab/errors.hpp"
#include "slelab/exact.hpp"

namespace slelab {

/// Pairwise (cascade) summation; the result depends only on the order of xs.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 16) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t h = xs.size() / 2;
  return pairwise_sum(xs.first(h)) + pairwise_sum(xs.subspan(h));
}

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  double ess = 0.0;
  std::optional<ExactValue> exact;
  std::optional<double> z;
  double excess_kurtosis = 0.0;
  double top_share = 0.0;  // share of the total |mass| carried by the top 1% of samples

  void set_exact(ExactValue e) {
    exact = e;
    if (!e.infinite && std_error > 0.0) z = (mean - e.value) / std_error;
    else z.reset();
  }
};

/// Streaming mean and variance (Welford), mergeable across partial streams.
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const Accumulator& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double standard_error() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

namespace detail {

inline double top_share(std::vector<double> mass) {
  for (double& m : mass) m = std::abs(m);
  const double total = pairwise_sum(mass);
  if (total <= 0.0) return 0.0;
  const std::size_t k = std::max<std::size_t>(1, (mass.size() + 99) / 100);
  std::partial_sort(mass.begin(), mass.begin() + static_cast<std::ptrdiff_t>(k), mass.end(),
                    std::greater<>());
  return pairwise_sum(std::span<const double>(mass.data(), k)) / total;
}

inline double excess_kurtosis(std::span<const double> xs, double mean) {
  std::vector<double> d2(xs.size()), d4(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - mean;
    d2[i] = d * d;
    d4[i] = d2[i] * d2[i];
  }
  const double m2 = pairwise_sum(d2) / static_cast<double>(xs.size());
  const double m4 = pairwise_sum(d4) / static_cast<double>(xs.size());
  return m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
}

}  // namespace detail

/// Mean and standard error of the sample values (two-pass, pairwise sums).
inline MomentEstimate accumulate(std::span<const double> xs) {
  if (xs.size() < 2) throw DomainError("accumulate needs at least two samples");
  const double n = static_cast<double>(xs.size());
  MomentEstimate e;
  e.n = xs.size();
  e.ess = n;
  e.mean = pairwise_sum(xs) / n;
  std::vector<double> sq(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - e.mean) * (xs[i] - e.mean);
  e.std_error = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
  e.excess_kurtosis = detail::excess_kurtosis(xs, e.mean);
  e.top_share = detail::top_share(std::vector<double>(xs.begin(), xs.end()));
  return e;
}

/**
 * @brief Self-normalized weighted estimate sum(w x)/sum(w).
 *
 * The standard error is the delta-method value with an n/(n-1) correction, so
 * equal weights reproduce the unweighted estimate.
 */
inline MomentEstimate accumulate(std::span<const double> xs, std::span<const double> ws) {
  if (xs.size() != ws.size()) throw DomainError("values and weights differ in length");
  if (xs.size() < 2) throw DomainError("accumulate needs at least two samples");
  const double n = static_cast<double>(xs.size());
  std::vector<double> wx(xs.size()), w2(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ws[i] < 0.0) throw DomainError("negative importance weight");
    wx[i] = ws[i] * xs[i];
    w2[i] = ws[i] * ws[i];
  }
  const double sw = pairwise_sum(ws);
  if (!(sw > 0.0)) throw DomainError("degenerate weights: all zero");
  MomentEstimate e;
  e.n = xs.size();
  e.mean = pairwise_sum(wx) / sw;
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = ws[i] * (xs[i] - e.mean);
    r[i] = d * d;
  }
  e.std_error = std::sqrt(n / (n - 1.0) * pairwise_sum(r)) / sw;
  e.ess = sw * sw / pairwise_sum(w2);
  std::vector<double> normalized(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) normalized[i] = wx[i] * n / sw;
  e.excess_kurtosis = detail::excess_kurtosis(normalized, e.mean);
  e.top_share = detail::top_share(wx);
  return e;
}

struct Verdict {
  bool pass = false;
  std::string criterion;
  std::vector<double> measured;
  bool quality_failure = false;  // failed for lack of precision rather than disagreement
};

/**
 * @brief Dual gate: |mean - exact| <= k sigma and sigma <= rel_tol |exact|.
 *
 * Infinite targets pass when the mean exceeds divergence_floor. Finite targets
 * are refused when the top 1% of samples carries more than half the mass.
 */
inline Verdict compare(const MomentEstimate& est, ExactValue exact, double k_sigma, double rel_tol,
                       double divergence_floor = 1e3) {
  Verdict v;
  if (exact.infinite) {
    v.pass = est.mean > divergence_floor;
    v.criterion = "mean > divergence floor";
    v.measured = {est.mean, divergence_floor};
    return v;
  }
  const double diff = std::abs(est.mean - exact.value);
  const bool close = diff <= k_sigma * est.std_error;
  const bool precise = est.std_error <= rel_tol * std::abs(exact.value);
  const bool tail_ok = est.top_share <= 0.5;
  v.pass = close && precise && tail_ok;
  v.quality_failure = !precise || !tail_ok;
  v.criterion = "|mean-exact| <= k*stderr and stderr <= rel_tol*|exact| and top1% share <= 0.5";
  v.measured = {diff, k_sigma * est.std_error, est.std_error, rel_tol * std::abs(exact.value),
                est.top_share};
  return v;
}

/// Relative-deviation gate: |mean - exact| <= k sigma and |mean - exact| <= rel_dev |exact|.
inline Verdict compare_deviation(const MomentEstimate& est, ExactValue exact, double k_sigma,
                                 double rel_dev) {
  Verdict v;
  if (exact.infinite) throw DomainError("deviation gate needs a finite target");
  const double diff = std::abs(est.mean - exact.value);
  const bool tail_ok = est.top_share <= 0.5;
  v.pass = diff <= k_sigma * est.std_error && diff <= rel_dev * std::abs(exact.value) && tail_ok;
  v.quality_failure = !tail_ok || est.n < 2;
  v.criterion = "|mean-exact| <= k*stderr and |mean-exact| <= rel_dev*|exact| and top1% share <= 0.5";
  v.measured = {diff, k_sigma * est.std_error, rel_dev * std::abs(exact.value), est.top_share};
  return v;
}

// ---------------------------------------------------------------------------
// Distribution tests

/// Asymptotic Kolmogorov critical value c(alpha) = sqrt(-log(alpha/2)/2); 1.6276 at 1%.
inline double ks_critical_coefficient(double alpha = 0.01) {
  return std::sqrt(-0.5 * std::log(0.5 * alpha));
}

/// sup |F_n - F| for a sample against a continuous CDF.
template <class Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  if (xs.empty()) throw DomainError("KS test needs samples");
  std::sort(xs.begin(), xs.end());
  const double n = double(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double F = cdf(xs[i]);
    d = std::max({d, double(i + 1) / n - F, F - double(i) / n});
  }
  return d;
}

/// sup |F_n - G_m| for two samples.
inline double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = double(a.size()), m = double(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / n - double(j) / m));
  }
  return d;
}

struct KsResult {
  double statistic = 0.0;
  double critical = 0.0;
  bool pass = false;
};

template <class Cdf>
KsResult ks_test(const std::vector<double>& xs, Cdf cdf, double alpha = 0.01) {
  KsResult r;
  r.statistic = ks_statistic(xs, cdf);
  r.critical = ks_critical_coefficient(alpha) / std::sqrt(double(xs.size()));
  r.pass = r.statistic < r.critical;
  return r;
}

inline KsResult ks_test_two_sample(const std::vector<double>& a, const std::vector<double>& b,
                                   double alpha = 0.01) {
  KsResult r;
  r.statistic = ks_statistic_two_sample(a, b);
  const double n = double(a.size()), m = double(b.size());
  r.critical = ks_critical_coefficient(alpha) * std::sqrt((n + m) / (n * m));
  r.pass = r.statistic < r.critical;
  return r;
}

struct ChiSquareResult {
  double statistic = 0.0;
  double critical = 0.0;
  std::size_t dof = 0;
  bool pass = false;
};

/// Pearson goodness of fit of bin counts against expected counts.
inline ChiSquareResult chi_square_test(const std::vector<double>& observed,
                                       const std::vector<double>& expected, double alpha = 0.01) {
  if (observed.size() != expected.size() || observed.size() < 2)
    throw DomainError("chi-square test needs matching bins, at least two");
  ChiSquareResult r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw DomainError("expected bin counts must be positive");
    const double d = observed[i] - expected[i];
    r.statistic += d * d / expected[i];
  }
  r.dof = observed.size() - 1;
  r.critical = boost::math::quantile(boost::math::chi_squared(double(r.dof)), 1.0 - alpha);
  r.pass = r.statistic < r.critical;
  return r;
}

}  // namespace slelab
