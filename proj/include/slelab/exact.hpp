#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "slelab/params.hpp"
#include "slelab/specfun.hpp"

namespace slelab {

/// A real value that may be +infinity (divergent moment, infinite measure).
struct ExactValue {
  double value = 0.0;
  bool infinite = false;

  static ExactValue finite(double v) { return {v, false}; }
  static ExactValue infinity() { return {std::numeric_limits<double>::infinity(), true}; }
};

inline double delta_beta(double beta, const LqgParams& p) {
  return 0.5 * beta * (p.Q() - 0.5 * beta);
}

namespace detail {

constexpr double kLog2Pi = 1.8378770664093454836;

// log|1/Gamma_b(z)|; the reciprocal vanishes at poles, reported as sign 0.
inline SignedLog inv_gamma_b(const DoubleGamma& G, double z) {
  try {
    SignedLog v = G.log_value(z);
    return {-v.log_abs, v.sign};
  } catch (const PoleError&) {
    return {-std::numeric_limits<double>::infinity(), 0};
  }
}

inline double signed_exp(const SignedLog& s) {
  return s.sign == 0 ? 0.0 : s.sign * std::exp(s.log_abs);
}

}  // namespace detail

/**
 * @brief log of the boundary two-point constant R(beta; 1, 0).
 *
 * The factor 1/((Q-beta) Gamma_b(Q-beta)) is evaluated through one b-shift so
 * that beta = Q is a removable point.
 */
inline SignedLog r_bar_log(double beta, const LqgParams& p) {
  const double g = p.gamma(), Q = p.Q(), x = Q - beta;
  const DoubleGamma G(g / 2.0);
  const double b = g / 2.0;
  SignedLog out{(2.0 * x / g - 0.5) * detail::kLog2Pi + (g * x / 2.0 - 0.5) * std::log(2.0 / g) -
                    (2.0 * x / g) * log_gamma(1.0 - g * g / 4.0).log_abs,
                1};
  out += G.log_value(beta - g / 2.0);
  // (Q-beta) Gamma_b(Q-beta) = Gamma_b(x+b) Gamma(1+bx) b^{-bx-1/2} / sqrt(2 pi)
  SignedLog xg = G.log_value(x + b) + log_gamma(1.0 + b * x);
  xg.log_abs += (-b * x - 0.5) * std::log(b) - 0.5 * detail::kLog2Pi;
  out -= xg;
  return out;
}

inline double r_bar(double beta, const LqgParams& p) { return r_bar_log(beta, p).value(); }

/// Seiberg bounds under which H-bar equals a finite GMC moment.
inline bool seiberg_ok(double b1, double b2, double b3, const LqgParams& p) {
  return b1 < p.Q() && b2 < p.Q() && std::abs(b1 - b2) < b3 && b1 + b2 + b3 > p.gamma();
}

/// Name of the first violated Seiberg bound, if any.
inline std::optional<std::string> seiberg_violation(double b1, double b2, double b3,
                                                    const LqgParams& p) {
  if (!(b1 < p.Q())) return "beta1 < Q";
  if (!(b2 < p.Q())) return "beta2 < Q";
  if (!(std::abs(b1 - b2) < b3)) return "|beta1 - beta2| < beta3";
  if (!(b1 + b2 + b3 > p.gamma())) return "beta1 + beta2 + beta3 > gamma";
  return std::nullopt;
}

struct HBar {
  double value;
  bool seiberg_ok;  // false: the GMC moment this would represent is infinite
};

inline SignedLog h_bar_log(double b1, double b2, double b3, const LqgParams& p) {
  const double g = p.gamma(), Q = p.Q(), bb = b1 + b2 + b3, b = g / 2.0;
  const DoubleGamma G(b);
  const double e = (2.0 * Q - bb) / g;
  SignedLog out{(e + 1.0) * detail::kLog2Pi +
                    ((g / 2.0 - 2.0 / g) * (Q - bb / 2.0) - 1.0) * std::log(2.0 / g) -
                    e * log_gamma(1.0 - g * g / 4.0).log_abs,
                1};
  // Gamma_b(bb/2 - Q) / Gamma((bb - 2Q)/g) through the 1/b shift
  out += G.log_value(bb / 2.0 - Q + 1.0 / b);
  out.log_abs += (-e - 0.5) * std::log(b) - 0.5 * detail::kLog2Pi;
  out += G.log_value((bb - 2.0 * b2) / 2.0);
  out += G.log_value((bb - 2.0 * b1) / 2.0);
  out += G.log_value(Q - (bb - 2.0 * b3) / 2.0);
  out += detail::inv_gamma_b(G, Q);
  out += detail::inv_gamma_b(G, Q - b1);
  out += detail::inv_gamma_b(G, Q - b2);
  out += detail::inv_gamma_b(G, b3);
  return out;
}

inline HBar h_bar(double b1, double b2, double b3, const LqgParams& p) {
  return {detail::signed_exp(h_bar_log(b1, b2, b3, p)), seiberg_ok(b1, b2, b3, p)};
}

/// Relative residual of the reflection beta_2 -> 2Q - beta_2 of H-bar.
inline double h_bar_reflection_residual(double b1, double b2, double b3, const LqgParams& p) {
  const double g = p.gamma(), Q = p.Q(), bb = b1 + b2 + b3;
  const double lhs = h_bar(b1, 2.0 * Q - b2, b3, p).value;
  SignedLog f = log_gamma(2.0 / g * (2.0 * Q - b2 - 2.0 / g)) + log_gamma((bb - 2.0 * Q) / g) -
                log_gamma((b1 + b3 - b2) / g) + r_bar_log(2.0 * Q - b2, p);
  const double rhs = -f.value() * h_bar(b1, b2, b3, p).value;
  const double scale = std::max(std::abs(lhs), std::abs(rhs));
  return scale == 0.0 ? 0.0 : std::abs(lhs - rhs) / scale;
}

/// Relative residual of R(beta) R(2Q-beta) Gamma(1-x) Gamma(1+x) = 1, x = 2(Q-beta)/gamma.
inline double r_bar_reflection_residual(double beta, const LqgParams& p) {
  const double x = 2.0 * (p.Q() - beta) / p.gamma();
  const SignedLog s =
      r_bar_log(beta, p) + r_bar_log(2.0 * p.Q() - beta, p) + log_gamma(1.0 - x) + log_gamma(1.0 + x);
  return std::abs(s.value() - 1.0);
}

/// Power-law density prefactor * l^exponent on l > 0.
struct LengthLawDensity {
  double prefactor = 0.0;
  double exponent = 0.0;
  bool infinite = false;

  double at(double ell) const {
    if (infinite) return std::numeric_limits<double>::infinity();
    return prefactor * std::pow(ell, exponent);
  }
};

namespace detail {
inline void reject_critical(double W, const LqgParams& p) {
  if (std::abs(W - p.kappa() / 2.0) < 1e-12)
    throw DomainError("weight gamma^2/2 (beta = Q) is not covered by the length laws");
}
}  // namespace detail

/// Left boundary length law of a two-pointed quantum disk of weight W.
inline LengthLawDensity disk_length_density(double W, const LqgParams& p) {
  detail::reject_critical(W, p);
  const double beta = weight_to_beta(W, p);
  const double e = -2.0 * W / p.kappa();
  if (W >= p.gamma() * p.Q()) return {0.0, e, true};
  return {r_bar(beta, p), e, false};
}

/**
 * @brief Law of the boundary arc length between the first two vertices of a quantum triangle.
 *
 * A thin first or second vertex adds a disk chain to the arc of the thick
 * triangle with reflected insertions. When that triangle's own length law is
 * not integrable at 0 (reflected sum <= 2Q) the convolution diverges and the
 * law is infinite on every interval.
 */
inline LengthLawDensity triangle_length_density(const TriangleWeights& tw, const LqgParams& p) {
  for (double W : tw.W) detail::reject_critical(W, p);
  if (!tw.thick[2]) throw DomainError("the third vertex must be thick");
  const double Q = p.Q(), g = p.gamma();
  const double e = (tw.beta_bar - 2.0 * Q) / g - 1.0;
  if (!seiberg_ok(tw.reflected[0], tw.reflected[1], tw.reflected[2], p)) return {0.0, e, true};
  const double reflected_sum = tw.reflected[0] + tw.reflected[1] + tw.reflected[2];
  if ((!tw.thick[0] || !tw.thick[1]) && reflected_sum <= 2.0 * Q) return {0.0, e, true};
  SignedLog pre = h_bar_log(tw.beta[0], tw.beta[1], tw.beta[2], p);
  double denom = g / 2.0;
  for (double b : tw.beta) denom *= (Q - b);
  return {detail::signed_exp(pre) / denom, e, false};
}

/// Laplace transform of the triangle length law at mu > 0.
inline ExactValue triangle_length_laplace(const TriangleWeights& tw, double mu, const LqgParams& p) {
  if (!(mu > 0.0)) throw DomainError("Laplace variable must be positive");
  const LengthLawDensity d = triangle_length_density(tw, p);
  const double e = d.exponent + 1.0;
  if (d.infinite || e <= 0.0) return ExactValue::infinity();
  const SignedLog gm = log_gamma(e);
  return ExactValue::finite(d.prefactor * gm.value() * std::pow(mu, -e));
}

// ---------------------------------------------------------------------------
// Conformal radius moments of SLE_kappa(rho_-; rho_+, rho_1)

struct BetaRoots {
  cplx first;
  cplx second;
  bool complex;
};

/// Roots in beta of (s(s-beta) - rho_1)(4 + rho_1 - s beta) = 4 kappa alpha, s = sqrt(kappa).
inline BetaRoots alpha_to_beta_roots(double alpha, double kappa, double rho1) {
  const double s = std::sqrt(kappa);
  const double A = kappa - rho1, C = 4.0 + rho1;
  const double disc = (A - C) * (A - C) + 16.0 * kappa * alpha;
  const cplx root = std::sqrt(cplx(disc, 0.0));
  return {(A + C - root) / (2.0 * s), (A + C + root) / (2.0 * s), disc < 0.0};
}

inline cplx alpha_beta_residual(cplx beta, double alpha, double kappa, double rho1) {
  const double s = std::sqrt(kappa);
  return (s * (s - beta) - rho1) * (4.0 + rho1 - s * beta) - 4.0 * kappa * alpha;
}

/// Threshold above which the moment of psi'(1) diverges.
inline double alpha_threshold(double kappa, double rho_plus, double rho1) {
  return (rho_plus + 2.0) * (rho_plus + rho1 + 4.0 - kappa / 2.0) / kappa;
}

struct RadiusMomentQuery {
  double kappa;
  double rho_minus;
  double rho_plus;
  double rho_1;
  double alpha;
  double alpha_0;
  BetaRoots beta_roots;
};

inline void check_admissible(double kappa, double rho_minus, double rho_plus, double rho1) {
  if (!(kappa > 0.0 && kappa < 4.0)) throw DomainError("kappa must lie in (0,4)");
  if (!(rho_minus > -2.0)) throw DomainError("rho_minus must exceed -2");
  if (!(rho_plus > -2.0)) throw DomainError("rho_plus must exceed -2");
  if (!(rho1 > -2.0 - rho_plus)) throw DomainError("rho_1 must exceed -2 - rho_plus");
}

inline RadiusMomentQuery make_radius_query(double kappa, double rho_minus, double rho_plus,
                                           double rho1, double alpha) {
  check_admissible(kappa, rho_minus, rho_plus, rho1);
  return {kappa,  rho_minus, rho_plus, rho1, alpha, alpha_threshold(kappa, rho_plus, rho1),
          alpha_to_beta_roots(alpha, kappa, rho1)};
}

/// log F(x) for complex x; exp() of the result is F.
inline cplx log_f_function(cplx x, double kappa, double rho_minus, double rho_plus, double rho1) {
  const double s = std::sqrt(kappa);
  if (!(s / 2.0 >= 0.3)) throw DomainError("kappa below 0.36 is outside the double gamma range");
  const DoubleGamma G(s / 2.0);
  const cplx args[4] = {2.0 / s - s / 2.0 + rho_plus / s + x / 2.0,
                        4.0 / s + (rho_plus + rho1) / s - x / 2.0,
                        4.0 / s - s / 2.0 + (rho_plus + rho_minus) / s + x / 2.0,
                        6.0 / s + (rho_minus + rho_plus + rho1) / s - x / 2.0};
  cplx v[4];
  for (int i = 0; i < 4; ++i) {
    try {
      v[i] = G.log_value(args[i]);
    } catch (const PoleError& e) {
      throw PoleError("F-function argument " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return v[0] + v[1] - v[2] - v[3];
}

inline double f_function(double x, double kappa, double rho_minus, double rho_plus, double rho1) {
  return std::exp(log_f_function(cplx(x, 0.0), kappa, rho_minus, rho_plus, rho1)).real();
}

namespace detail {
// The closed form evaluated as written, without the alpha = 0 shortcut.
inline ExactValue radius_moment_formula(const RadiusMomentQuery& q, int root) {
  const double s = std::sqrt(q.kappa);
  const cplx beta = root == 0 ? q.beta_roots.first : q.beta_roots.second;
  const cplx lm = log_f_function(beta + q.rho_1 / s, q.kappa, q.rho_minus, q.rho_plus, q.rho_1) -
                  log_f_function(cplx(s, 0.0), q.kappa, q.rho_minus, q.rho_plus, q.rho_1);
  const cplx m = std::exp(lm);
  if (std::abs(m.imag()) > 1e-8 * std::abs(m))
    throw DomainError("moment evaluated to a non-real value");
  return ExactValue::finite(m.real());
}
}  // namespace detail

/// E[psi'(1)^alpha] from the closed form; `root` picks which solution beta is used.
inline ExactValue radius_moment_exact(const RadiusMomentQuery& q, int root = 0) {
  if (q.alpha >= q.alpha_0) return ExactValue::infinity();
  if (q.alpha == 0.0) return ExactValue::finite(1.0);
  return detail::radius_moment_formula(q, root);
}

inline ExactValue radius_moment_exact(double kappa, double rho_minus, double rho_plus, double rho1,
                                      double alpha, int root = 0) {
  return radius_moment_exact(make_radius_query(kappa, rho_minus, rho_plus, rho1, alpha), root);
}

/// Relative disagreement of the moment between the two roots.
inline double two_root_residual(const RadiusMomentQuery& q) {
  const ExactValue a = radius_moment_exact(q, 0), b = radius_moment_exact(q, 1);
  if (a.infinite || b.infinite) return a.infinite == b.infinite ? 0.0 : 1.0;
  return std::abs(a.value / b.value - 1.0);
}

/// Moment indexed by insertions: m(beta_-, beta_1, beta_2, alpha).
inline ExactValue m_beta(double beta_minus, double beta1, double beta2, double alpha,
                         const LqgParams& p, int root = 0) {
  const RhoTriple r = beta_rho_bridge(beta_minus, beta1, beta2, p);
  return radius_moment_exact(p.kappa(), r.minus, r.plus, r.one, alpha, root);
}

namespace detail {
inline cplx m_special(double c, double beta1, double beta2, double alpha, const LqgParams& p,
                      int root) {
  const double g = p.gamma(), Q = p.Q();
  const BetaRoots br = alpha_to_beta_roots(alpha, p.kappa(), g * (beta2 - beta1));
  const cplx B = root == 0 ? br.first : br.second;
  return log_gamma(c * (Q - (beta1 + beta2 - B) / 2.0)) +
         log_gamma(c * (2.0 * Q - (beta1 + beta2 + B) / 2.0)) -
         log_gamma(cplx(c * (Q + 2.0 / g - beta1), 0.0)) -
         log_gamma(cplx(c * (Q + g / 2.0 - beta2), 0.0));
}
}  // namespace detail

/// Closed form of m(gamma, beta_1, beta_2, alpha) in ordinary gamma functions.
inline double m_gamma_closed_form(double beta1, double beta2, double alpha, const LqgParams& p,
                                  int root = 0) {
  return std::exp(detail::m_special(2.0 / p.gamma(), beta1, beta2, alpha, p, root)).real();
}

/// Closed form of m(Q, beta_1, beta_2, alpha).
inline double m_Q_closed_form(double beta1, double beta2, double alpha, const LqgParams& p,
                              int root = 0) {
  return std::exp(detail::m_special(p.gamma() / 2.0, beta1, beta2, alpha, p, root)).real();
}

struct ShiftResiduals {
  double shift_a;     // beta_- -> beta_- - 2/gamma
  double shift_b;     // beta_- -> beta_- - gamma/2
  double multiplicative;
};

namespace detail {
inline double finite_m(double bm, double b1, double b2, double alpha, const LqgParams& p,
                       const char* which) {
  const ExactValue v = m_beta(bm, b1, b2, alpha, p);
  if (v.infinite) throw DomainError(std::string("moment ") + which + " is infinite");
  return v.value;
}

inline double shift_ratio(double c, double bm, double b1, double b2, double alpha,
                          const LqgParams& p) {
  const double g = p.gamma(), Q = p.Q();
  const BetaRoots br = alpha_to_beta_roots(alpha, p.kappa(), g * (b2 - b1));
  const cplx B = br.first;
  const double base = g - b1 - b2 - 2.0 * bm;
  const cplx v = log_gamma(c * (2.0 * Q + (base + B) / 2.0)) +
                 log_gamma(c * (3.0 * Q + (base - B) / 2.0)) -
                 log_gamma(cplx(c * (3.0 * Q - b1 - bm), 0.0)) -
                 log_gamma(cplx(c * (2.0 * Q + g - b2 - bm), 0.0));
  return std::exp(v).real();
}
}  // namespace detail

/**
 * @brief Residuals of the two beta_- shift relations and the composition rule.
 *
 * beta_tilde is the free insertion of the composition rule.
 */
inline ShiftResiduals shift_relation_residuals(double bm, double b1, double b2, double alpha,
                                               const LqgParams& p, double beta_tilde) {
  const double g = p.gamma(), Q = p.Q();
  const double m0 = detail::finite_m(bm, b1, b2, alpha, p, "m(beta_-)");
  ShiftResiduals r{};
  const double ma = detail::finite_m(bm - 2.0 / g, b1, b2, alpha, p, "m(beta_- - 2/gamma)");
  r.shift_a = std::abs(ma / m0 / detail::shift_ratio(2.0 / g, bm, b1, b2, alpha, p) - 1.0);
  const double mb = detail::finite_m(bm - g / 2.0, b1, b2, alpha, p, "m(beta_- - gamma/2)");
  r.shift_b = std::abs(mb / m0 / detail::shift_ratio(g / 2.0, bm, b1, b2, alpha, p) - 1.0);
  const double lhs = detail::finite_m(bm + beta_tilde - Q - g / 2.0, b1, b2, alpha, p, "composed");
  const double shift = bm - g - 2.0 / g;
  const double mt = detail::finite_m(beta_tilde, b1 + shift, b2 + shift, alpha, p, "m(beta_tilde)");
  r.multiplicative = std::abs(lhs / (mt * m0) - 1.0);
  return r;
}

/// Exponent of the reversal weighting.
inline double reversal_exponent(double kappa, double rho1) {
  return rho1 * (4.0 - kappa) / (2.0 * kappa);
}

/// Residual of m(rho_-,rho_+,rho_1;a) m(rho_-,rho_++rho_1,-rho_1;a*) = m(rho_-,rho_++rho_1,-rho_1;a+a*).
inline double reversal_consistency_residual(double kappa, double rho_minus, double rho_plus,
                                            double rho1, double alpha) {
  const double as = reversal_exponent(kappa, rho1);
  const ExactValue m1 = radius_moment_exact(kappa, rho_minus, rho_plus, rho1, alpha);
  const ExactValue m2 = radius_moment_exact(kappa, rho_minus, rho_plus + rho1, -rho1, as);
  const ExactValue m3 = radius_moment_exact(kappa, rho_minus, rho_plus + rho1, -rho1, alpha + as);
  if (m1.infinite || m2.infinite || m3.infinite)
    throw DomainError("reversal check needs all three moments finite");
  return std::abs(m1.value * m2.value - m3.value) / std::abs(m3.value);
}

}  // namespace slelab
