#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "slelab/exact.hpp"
#include "slelab/identities.hpp"

using namespace slelab;

TEST(DeltaBeta, Examples) {
  const LqgParams p(1.3);
  EXPECT_NEAR(delta_beta(p.gamma(), p), 1.0, 1e-14);
  EXPECT_EQ(delta_beta(0.0, p), 0.0);
  EXPECT_NEAR(delta_beta(p.Q(), p), p.Q() * p.Q() / 4.0, 1e-14);
}

TEST(RBar, MatchesReferenceDoubleGamma) {
  // the defining product with both double gamma values from the 50-digit integral
  const double g = 1.0, beta = 1.2, Q = 2.5, x = 2.0 * (Q - beta) / g;
  const double log_ref = (x - 0.5) * std::log(2.0 * std::numbers::pi) +
                         (g * (Q - beta) / 2.0 - 0.5) * std::log(2.0 / g) - std::log(Q - beta) -
                         x * std::lgamma(1.0 - g * g / 4.0) + oracle::log_gamma_b(g / 2.0, beta - g / 2.0) -
                         oracle::log_gamma_b(g / 2.0, Q - beta);
  EXPECT_NEAR(r_bar(beta, LqgParams(g)) / std::exp(log_ref), 1.0, 1e-9);
}

// finite disk measure: gamma/2 < beta < Q
TEST(RBar, PositiveOnThickRange) {
  for (double g : {0.6, 1.0, 1.5})
    for (double beta = g / 2.0 + 0.05; beta < 2.0 / g + g / 2.0; beta += 0.1) {
      const double v = r_bar(beta, LqgParams(g));
      EXPECT_TRUE(std::isfinite(v) && v > 0.0) << g << ' ' << beta;
    }
}

TEST(RBar, ReflectionIdentity) {
  for (double beta : {0.4, 1.1, 1.9, 2.9}) EXPECT_LT(r_bar_reflection_residual(beta, LqgParams(1.0)), 1e-10);
}

TEST(HBar, MatchesSelbergIntegerMoments) {
  struct Case {
    double gamma, b1, b2;
    int p;
  };
  for (const Case c : {Case{1.0, 0.5, 0.5, 2}, Case{1.0, 0.5, 0.5, 1}, Case{1.0, 0.5, 0.5, 3},
                       Case{0.8, 0.3, 0.6, 2}, Case{1.4, -0.2, 0.4, 1}, Case{0.7, 1.0, 0.2, 4}}) {
    const LqgParams p(c.gamma);
    const double b3 = 2.0 * p.Q() - c.p * c.gamma - c.b1 - c.b2;
    ASSERT_TRUE(seiberg_ok(c.b1, c.b2, b3, p));
    const double ref = oracle::boundary_chaos_moment(c.p, c.gamma, c.b1, c.b2);
    EXPECT_NEAR(h_bar(c.b1, c.b2, b3, p).value / ref, 1.0, 1e-10) << c.gamma << ' ' << c.p;
  }
  EXPECT_NEAR(h_bar(0.5, 0.5, 2.0, LqgParams(1.0)).value, 7.52813711883, 1e-9);
}

TEST(HBar, SeibergFlag) {
  const LqgParams p(1.0);
  EXPECT_TRUE(h_bar(0.5, 0.5, 2.0, p).seiberg_ok);
  EXPECT_FALSE(h_bar(0.2, 0.3, 0.4, p).seiberg_ok);  // beta_bar <= gamma
  EXPECT_EQ(*seiberg_violation(0.2, 0.3, 0.4, p), "beta1 + beta2 + beta3 > gamma");
  EXPECT_EQ(*seiberg_violation(3.0, 0.5, 3.0, p), "beta1 < Q");
  EXPECT_EQ(*seiberg_violation(0.5, 2.0, 1.0, p), "|beta1 - beta2| < beta3");
  EXPECT_FALSE(seiberg_violation(0.5, 0.5, 2.0, p).has_value());
}

TEST(HBar, ReflectionIdentity) {
  const LqgParams p(1.0);
  EXPECT_LT(h_bar_reflection_residual(2.2, 2.1, 2.3, p), 1e-7);
  EXPECT_LT(h_bar_reflection_residual(0.7, p.Q(), 1.4, p), 1e-12);
}

TEST(DiskDensity, Examples) {
  const LqgParams p(1.0);
  EXPECT_TRUE(disk_length_density(p.gamma() * p.Q(), p).infinite);
  const LengthLawDensity d = disk_length_density(2.0, p);
  EXPECT_DOUBLE_EQ(d.exponent, -2.0 * 2.0 / 1.0);
  EXPECT_DOUBLE_EQ(d.prefactor, r_bar(p.gamma(), p));
  EXPECT_THROW(disk_length_density(0.5, p), DomainError);
}

TEST(DiskDensity, WeightTwoExponent) {
  // weight 2 disk: exponent -2 W / gamma^2 = -4/gamma^2 ... at gamma = sqrt 2 it is -2
  const LengthLawDensity d = disk_length_density(2.0, LqgParams::from_kappa(2.0));
  EXPECT_NEAR(d.exponent, -2.0, 1e-15);
}

TEST(TriangleDensity, PositiveOnGrid) {
  const LqgParams p(1.0);
  int finite_thin = 0;
  for (double W1 : {0.3, 1.2, 1.8, 2.6})
    for (double W2 : {0.2, 0.45, 1.0, 1.8})
      for (double W3 : {0.8, 1.8, 3.0}) {
        const TriangleWeights tw = make_triangle(W1, W2, W3, p);
        const LengthLawDensity d = triangle_length_density(tw, p);
        EXPECT_NEAR(d.exponent, (tw.beta_bar - 2.0 * p.Q()) / p.gamma() - 1.0, 1e-14);
        if (d.infinite) continue;
        finite_thin += !tw.thick[0] || !tw.thick[1];
        EXPECT_GT(d.prefactor, 0.0) << W1 << ' ' << W2 << ' ' << W3;
      }
  EXPECT_GT(finite_thin, 5);
}

TEST(TriangleDensity, ThinLawDivergesWhenReflectedArcIsNotIntegrable) {
  // reflected insertions (2.3, 1.2, 1.2) sum to 4.7 < 2Q = 5
  const LqgParams p(1.0);
  EXPECT_TRUE(triangle_length_density(make_triangle(0.3, 1.8, 1.8, p), p).infinite);
  EXPECT_THROW(triangle_length_density(make_triangle(1.8, 1.8, 0.3, p), p), DomainError);
}

TEST(TriangleDensity, ThinVertexMatchesLaplaceConvolution) {
  // thin W2: L12 is the thick (W1, gamma^2 - W2, W3) arc plus a weight W2 disk length
  const LqgParams p(1.0);
  const double W1 = 1.2, W2 = 0.2, W3 = 1.8, mu = 1.7;
  const TriangleWeights thin = make_triangle(W1, W2, W3, p);
  const TriangleWeights thick = make_triangle(W1, p.kappa() - W2, W3, p);
  const double b2 = thin.beta[1];
  const double disk = r_bar(b2, p) * std::tgamma(1.0 - 2.0 * W2 / p.kappa()) * std::pow(mu, 2.0 * W2 / p.kappa() - 1.0);
  // the thin bead chain's Poisson time carries the factor (1 - 2 W2 / gamma^2)
  const double chain = (1.0 - 2.0 * W2 / p.kappa()) * disk;
  const double expected = triangle_length_laplace(thick, mu, p).value * chain;
  EXPECT_NEAR(triangle_length_laplace(thin, mu, p).value / expected, 1.0, 1e-6);
}

TEST(TriangleDensity, EqualWeightsValue) {
  const LqgParams p(1.0);
  const TriangleWeights tw = make_triangle(1.8, 1.8, 1.8, p);
  const LengthLawDensity d = triangle_length_density(tw, p);
  const double beta = weight_to_beta(1.8, p);
  EXPECT_NEAR(d.prefactor, h_bar(beta, beta, beta, p).value * 2.0 / std::pow(p.Q() - beta, 3), 1e-12 * d.prefactor);
}

TEST(TriangleLaplace, MatchesQuadrature) {
  const LqgParams p(1.0);
  const TriangleWeights tw = make_triangle(0.8, 0.8, 0.8, p);  // beta_bar > 2Q: finite transform
  const LengthLawDensity d = triangle_length_density(tw, p);
  boost::math::quadrature::exp_sinh<double> integrator;
  for (double mu : {0.5, 1.0, 3.0}) {
    // substitute l = u^k so the integrable singularity at 0 becomes smooth
    const double k = 1.0 / (d.exponent + 1.0);
    auto f = [&](double u) { return k * std::pow(u, k - 1.0) * std::exp(-mu * std::pow(u, k)) * d.at(std::pow(u, k)); };
    const double ref = integrator.integrate(f);
    EXPECT_NEAR(triangle_length_laplace(tw, mu, p).value / ref, 1.0, 1e-6) << mu;
  }
  EXPECT_THROW(triangle_length_laplace(tw, 0.0, p), DomainError);
}

TEST(TriangleLaplace, DecreasesInMu) {
  const LqgParams p(1.0);
  const TriangleWeights tw = make_triangle(0.8, 0.8, 0.8, p);
  EXPECT_TRUE(triangle_length_laplace(make_triangle(1.7, 1.7, 1.7, p), 1.0, p).infinite);
  double last = INFINITY;
  for (double mu = 0.1; mu < 100.0; mu *= 2.0) {
    const double v = triangle_length_laplace(tw, mu, p).value;
    EXPECT_LT(v, last);
    last = v;
  }
  EXPECT_LT(last, 1e-2);
}

TEST(BetaRoots, AlphaZero) {
  const double k = 2.0, s = std::sqrt(k);
  BetaRoots r = alpha_to_beta_roots(0.0, k, 0.0);
  EXPECT_NEAR(r.first.real(), s, 1e-14);
  EXPECT_NEAR(r.second.real(), 4.0 / s, 1e-14);
  r = alpha_to_beta_roots(0.0, k, 0.7);
  EXPECT_NEAR(r.first.real(), s - 0.7 / s, 1e-14);
  EXPECT_NEAR(r.second.real(), (4.0 + 0.7) / s, 1e-14);
}

TEST(BetaRoots, SubstituteBack) {
  for (double a : {-2.0, -0.3, 0.4, 1.5}) {
    const BetaRoots r = alpha_to_beta_roots(a, 2.5, 0.6);
    EXPECT_LT(std::abs(alpha_beta_residual(r.first, a, 2.5, 0.6)), 1e-10);
    EXPECT_LT(std::abs(alpha_beta_residual(r.second, a, 2.5, 0.6)), 1e-10);
  }
}

TEST(FFunction, MatchesReferenceDoubleGamma) {
  const double k = 2.0, s = std::sqrt(k), rm = 1.0, rp = 0.5, r1 = 0.5, x = std::sqrt(2.0);
  const double a1 = 2 / s - s / 2 + rp / s + x / 2, a2 = 4 / s + (rp + r1) / s - x / 2,
               a3 = 4 / s - s / 2 + (rp + rm) / s + x / 2, a4 = 6 / s + (rm + rp + r1) / s - x / 2;
  const double b = s / 2;
  const double ref = oracle::log_gamma_b(b, a1) + oracle::log_gamma_b(b, a2) - oracle::log_gamma_b(b, a3) -
                     oracle::log_gamma_b(b, a4);
  EXPECT_NEAR(std::log(f_function(x, k, rm, rp, r1)), ref, 1e-9);
}

TEST(RadiusMoment, Examples) {
  EXPECT_EQ(radius_moment_exact(2, 0, 0, 0, 0.0).value, 1.0);
  EXPECT_DOUBLE_EQ(alpha_threshold(2.0, 0.0, 1.0), 4.0);
  EXPECT_TRUE(radius_moment_exact(2, 0, 0, 1, 4.0).infinite);
  EXPECT_TRUE(radius_moment_exact(2, 0, 0, 1, 5.0).infinite);
  EXPECT_FALSE(radius_moment_exact(2, 0, 0, 1, 3.9).infinite);
  EXPECT_THROW(radius_moment_exact(4.5, 0, 0, 0, -1.0), DomainError);
  EXPECT_THROW(radius_moment_exact(2, 0, -2.5, 0, -1.0), DomainError);
}

TEST(RadiusMoment, FormulaAtAlphaZeroIsOne) {
  for (double r1 : {-0.5, 0.0, 1.0}) {
    const RadiusMomentQuery q = make_radius_query(2.5, 0.3, 0.2, r1, 0.0);
    EXPECT_NEAR(detail::radius_moment_formula(q, 0).value, 1.0, 1e-10);
    EXPECT_NEAR(detail::radius_moment_formula(q, 1).value, 1.0, 1e-10);
  }
}

TEST(RadiusMoment, NegativeMomentsBelowOneAndMonotone) {
  // psi'(1) >= 1, so E[psi'^alpha] decreases in -alpha and lies in (0,1] for alpha < 0
  double last = 1.0;
  for (double a = -0.25; a >= -2.0; a -= 0.25) {
    const double v = radius_moment_exact(3.0, 1.0, 1.0, 1.0, a).value;
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, last);
    last = v;
  }
}

TEST(RadiusMoment, ConvexInAlpha) {
  // log-convexity (Hoelder) of alpha -> E[psi'^alpha]
  auto lm = [](double a) { return std::log(radius_moment_exact(2.0, 0.5, 0.5, 1.0, a).value); };
  for (double a = -1.5; a < 3.0; a += 0.5) EXPECT_GE(lm(a - 0.2) + lm(a + 0.2) - 2.0 * lm(a), -1e-10) << a;
}

TEST(RadiusMoment, TwoRootsAgree) {
  EXPECT_LT(two_root_residual(make_radius_query(2.0, 0.5, 0.5, 1.0, -0.3)), 1e-8);
  EXPECT_LT(two_root_residual(make_radius_query(2.0, 0.0, 0.0, 0.0, -1.0)), 1e-8);  // complex pair
}

TEST(ClosedForms, MatchGeneralFormula) {
  const LqgParams p(1.2);
  for (double a : {-0.7, -0.2, 0.3}) {
    EXPECT_NEAR(m_gamma_closed_form(0.9, 1.3, a, p) / m_beta(p.gamma(), 0.9, 1.3, a, p).value, 1.0, 1e-8);
    EXPECT_NEAR(m_Q_closed_form(0.9, 1.3, a, p) / m_beta(p.Q(), 0.9, 1.3, a, p).value, 1.0, 1e-8);
  }
}

TEST(ShiftRelations, Point) {
  const ShiftResiduals r = shift_relation_residuals(1.1, 1.0, 1.2, -0.5, LqgParams(1.0), 1.0);
  EXPECT_LT(r.shift_a, 1e-7);
  EXPECT_LT(r.shift_b, 1e-7);
  EXPECT_LT(r.multiplicative, 1e-7);
}

TEST(ShiftRelations, AlphaZeroDegenerate) {
  const ShiftResiduals r = shift_relation_residuals(1.1, 1.0, 1.2, 0.0, LqgParams(1.0), 1.0);
  EXPECT_LT(r.shift_a, 1e-10);
  EXPECT_LT(r.shift_b, 1e-10);
}

TEST(Reversal, ConsistencyPoint) {
  EXPECT_LT(reversal_consistency_residual(2.0, 0.5, 0.5, 1.0, -0.3), 1e-7);
  EXPECT_EQ(reversal_exponent(2.0, 0.0), 0.0);
  EXPECT_LT(reversal_consistency_residual(2.0, 0.5, 0.5, 0.0, -0.3), 1e-12);
}

TEST(IdentitySuite, AllPass) {
  const IdentityReport r = run_identity_suite();
  EXPECT_TRUE(r.pass);
  for (const auto& s : r.summary) {
    if (s.identity != "gamma_b_half_Q") {
      EXPECT_GE(s.points, 20u) << s.identity;
    }
    EXPECT_TRUE(s.pass) << s.identity << ' ' << s.max_residual;
  }
}

TEST(IdentitySuite, PerturbationIsDetected) {
  IdentityOptions o;
  o.grid_size = 5;
  o.perturb = 1e-3;
  EXPECT_FALSE(run_identity_suite(o).pass);
}
