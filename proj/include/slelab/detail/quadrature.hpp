#pragma once

#include <cmath>
#include <complex>

namespace slelab::detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1,1].
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& x) { return std::abs(x); }

template <class T, class F>
void gk15(F& f, double a, double b, T& kronrod, T& gauss) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const T fc = f(c);
  kronrod = fc * kWgk[7];
  gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const T f1 = f(c - h * kXgk[j]);
    const T f2 = f(c + h * kXgk[j]);
    kronrod += (f1 + f2) * kWgk[j];
    if (j % 2 == 1) gauss += (f1 + f2) * kWg[j / 2];
  }
  kronrod *= h;
  gauss *= h;
}

template <class T, class F>
T adaptive_gk(F& f, double a, double b, double tol, int depth) {
  T k{}, g{};
  gk15<T>(f, a, b, k, g);
  if (depth <= 0 || magnitude(k - g) <= tol) return k;
  const double m = 0.5 * (a + b);
  return adaptive_gk<T>(f, a, m, 0.5 * tol, depth - 1) +
         adaptive_gk<T>(f, m, b, 0.5 * tol, depth - 1);
}

/// Adaptive Gauss-Kronrod over consecutive panels given by breakpoints.
template <class T, class F, std::size_t N>
T integrate_panels(F&& f, const double (&breaks)[N], double tol, int max_depth = 30) {
  T sum{};
  for (std::size_t i = 0; i + 1 < N; ++i)
    sum += adaptive_gk<T>(f, breaks[i], breaks[i + 1], tol, max_depth);
  return sum;
}

}  // namespace slelab::detail
