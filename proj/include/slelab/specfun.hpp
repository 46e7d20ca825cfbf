#pragma once

#include <math.h>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "slelab/detail/quadrature.hpp"
#include "slelab/errors.hpp"

namespace slelab {

using cplx = std::complex<double>;

/// log|x| together with the sign of x.
struct SignedLog {
  double log_abs = 0.0;
  int sign = 1;

  double value() const { return sign * std::exp(log_abs); }
  SignedLog& operator+=(const SignedLog& o) {
    log_abs += o.log_abs;
    sign *= o.sign;
    return *this;
  }
  SignedLog& operator-=(const SignedLog& o) {
    log_abs -= o.log_abs;
    sign *= o.sign;
    return *this;
  }
  friend SignedLog operator+(SignedLog a, const SignedLog& b) { return a += b; }
  friend SignedLog operator-(SignedLog a, const SignedLog& b) { return a -= b; }
};

/// log|Gamma(x)| with sign, backed by the C library.
inline SignedLog log_gamma(double x) {
  if (x <= 0.0 && x == std::floor(x))
    throw PoleError("Gamma pole at non-positive integer " + std::to_string(x));
  int s = 1;
  const double v = ::lgamma_r(x, &s);
  return {v, s};
}

/// A branch of log Gamma(z) for complex z (Lanczos, g = 7).
inline cplx log_gamma(cplx z) {
  static constexpr double kCoef[9] = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double pi = std::numbers::pi;
  if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real()))
    throw PoleError("Gamma pole at non-positive integer " + std::to_string(z.real()));
  if (z.real() < 0.5) return std::log(pi) - std::log(std::sin(pi * z)) - log_gamma(1.0 - z);
  z -= 1.0;
  cplx x = kCoef[0];
  for (int i = 1; i < 9; ++i) x += kCoef[i] / (z + double(i));
  const cplx t = z + 7.5;
  return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

namespace detail {

inline cplx expm1(cplx z) {
  const double x = z.real(), y = z.imag();
  if (y == 0.0) return {std::expm1(x), 0.0};
  const double s = std::sin(0.5 * y);
  return {std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y)};
}
inline double expm1(double x) { return std::expm1(x); }

inline double real_part(double x) { return x; }
inline double real_part(const cplx& z) { return z.real(); }

}  // namespace detail

/**
 * @brief Evaluator of the Barnes double gamma function Gamma_b.
 *
 * Direct quadrature of the integral representation on a central strip
 * 0.25 Q <= Re z <= 1.25 Q, extended by the shift equations elsewhere.
 * Supported b: [0.3, 3].
 */
class DoubleGamma {
 public:
  static constexpr double kSeriesCut = 0.05;
  static constexpr int kSeriesOrder = 14;
  static constexpr double kUpper = 80.0;
  static constexpr double kPoleGuard = 1e-8;

  explicit DoubleGamma(double b) : b_(b) {
    if (!(b >= 0.3 && b <= 3.0))
      throw DomainError("double gamma b must lie in [0.3, 3], got " + std::to_string(b));
    Q_ = b + 1.0 / b;
    step_ = std::max(b, 1.0 / b);
  }

  double b() const noexcept { return b_; }
  double Q() const noexcept { return Q_; }

  /// Number of shifts needed to bring Re z into the strip (positive = upward).
  int shift_count(double re_z) const {
    int k = 0;
    while (re_z + k * step_ < 0.25 * Q_) ++k;
    while (re_z + k * step_ > 1.25 * Q_) --k;
    return k;
  }

  /// log|Gamma_b(z)| and its sign for real z.
  SignedLog log_value(double z) const {
    check_pole(z, 0.0);
    const int k = shift_count(z);
    SignedLog acc{strip_integral<double>(z + k * step_), 1};
    for (int j = 0; j < k; ++j) acc += shift_term(z + j * step_);
    for (int j = 1; j <= -k; ++j) acc -= shift_term(z - j * step_);
    return acc;
  }

  /// A branch of log Gamma_b(z) for complex z; exp() of it is Gamma_b(z).
  cplx log_value(cplx z) const {
    check_pole(z.real(), z.imag());
    const int k = shift_count(z.real());
    cplx acc = strip_integral<cplx>(z + double(k) * step_);
    for (int j = 0; j < k; ++j) acc += shift_term(z + double(j) * step_);
    for (int j = 1; j <= -k; ++j) acc -= shift_term(z - double(j) * step_);
    return acc;
  }

  /// The integral representation, valid for Re z > 0 (no shifts applied).
  template <class T>
  T strip_integral(T z) const {
    if (!(detail::real_part(z) > 0.0)) throw DomainError("strip integral needs Re z > 0");
    const T a = 0.5 * Q_ - z;
    const double b = b_;
    auto f = [&](double t) -> T {
      const T num = std::exp(-0.5 * Q_ * t) * detail::expm1(a * t);
      const double den = std::expm1(-b * t) * std::expm1(-t / b);
      return (num / den - 0.5 * a * a * std::exp(-t) - a / t) / t;
    };
    static constexpr double breaks[] = {kSeriesCut, 0.3, 1.0, 3.0, 8.0, 20.0, 45.0, kUpper};
    T body = detail::integrate_panels<T>(f, breaks, 1e-12);
    return small_t_series(z, a) + body - a / kUpper;
  }

 private:
  // log of Gamma_b(z)/Gamma_b(z+s), s = step_. For b >= 1 the step is b,
  // otherwise 1/b, each with its own shift equation.
  SignedLog shift_term(double z) const {
    SignedLog g = b_ >= 1.0 ? log_gamma(b_ * z) : log_gamma(z / b_);
    const double e = b_ >= 1.0 ? -b_ * z + 0.5 : z / b_ - 0.5;
    g.log_abs += e * std::log(b_) - kHalfLog2Pi;
    return g;
  }
  cplx shift_term(cplx z) const {
    const cplx g = b_ >= 1.0 ? log_gamma(b_ * z) : log_gamma(z / b_);
    const cplx e = b_ >= 1.0 ? -b_ * z + 0.5 : z / b_ - 0.5;
    return g + e * std::log(b_) - kHalfLog2Pi;
  }

  static constexpr double kHalfLog2Pi = 0.91893853320467274178;

  void check_pole(double re, double im) const {
    if (std::abs(im) > kPoleGuard || re > kPoleGuard) return;
    for (int m = 0; m * b_ <= -re + 1.0; ++m) {
      const double rest = -re - m * b_;
      const long n = std::lround(rest * b_);
      if (n >= 0 && std::abs(rest - n / b_) < kPoleGuard)
        throw PoleError("double gamma pole near z = " + std::to_string(re) + " (b = " +
                        std::to_string(b_) + ")");
    }
  }

  // Integral over [0, kSeriesCut] from the Taylor expansion of the integrand.
  template <class T>
  T small_t_series(T z, T a) const {
    constexpr int K = kSeriesOrder + 2;
    std::array<T, K + 1> n1{}, d{}, d1{}, d2{}, s{};
    // n1(t) = (exp(-z t) - exp(-Q t / 2)) / t
    T pz = T(1.0), pq = T(1.0);
    double fact = 1.0;
    for (int k = 0; k <= K; ++k) {
      pz *= -z;
      pq *= T(-0.5 * Q_);
      fact *= (k + 1);
      n1[k] = (pz - pq) / fact;
    }
    // (1 - exp(-c t)) / (c t) = sum (-c t)^k / (k+1)!
    auto unit = [&](double c, std::array<T, K + 1>& out) {
      double p = 1.0, f = 1.0;
      for (int k = 0; k <= K; ++k) {
        f *= (k + 1);
        out[k] = T(p / f);
        p *= -c;
      }
    };
    unit(b_, d1);
    unit(1.0 / b_, d2);
    for (int k = 0; k <= K; ++k) {
      d[k] = T(0.0);
      for (int j = 0; j <= k; ++j) d[k] += d1[j] * d2[k - j];
    }
    for (int k = 0; k <= K; ++k) {
      T acc = n1[k];
      for (int j = 1; j <= k; ++j) acc -= d[j] * s[k - j];
      s[k] = acc / d[0];
    }
    // integrand = sum_{j>=1} (s_{j+1} - (a^2/2)(-1)^j / j!) t^{j-1}
    T total = T(0.0);
    double tj = 1.0, jf = 1.0;
    for (int j = 1; j + 1 <= K; ++j) {
      tj *= kSeriesCut;
      jf *= j;
      const double sgn = (j % 2 == 0) ? 1.0 : -1.0;
      total += (s[j + 1] - 0.5 * a * a * (sgn / jf)) * (tj / j);
    }
    return total;
  }

  double b_;
  double Q_;
  double step_;
};

/// log|Gamma_b(z)| for real z.
inline double log_gamma_b(double b, double z) { return DoubleGamma(b).log_value(z).log_abs; }

inline SignedLog log_gamma_b_signed(double b, double z) { return DoubleGamma(b).log_value(z); }

inline cplx log_gamma_b(double b, cplx z) { return DoubleGamma(b).log_value(z); }

}  // namespace slelab
