#include <gtest/gtest.h>

#include "slelab/params.hpp"

using namespace slelab;

TEST(LqgParams, DerivedConstants) {
  const LqgParams p(1.0);
  EXPECT_DOUBLE_EQ(p.kappa(), 1.0);
  EXPECT_DOUBLE_EQ(p.Q(), 2.5);
  EXPECT_DOUBLE_EQ(p.chi(), 1.5);
  EXPECT_NEAR(LqgParams::from_kappa(2.0).gamma(), std::sqrt(2.0), 1e-15);
}

TEST(LqgParams, RejectsOutOfRange) {
  EXPECT_THROW(LqgParams(0.0), DomainError);
  EXPECT_THROW(LqgParams(2.0), DomainError);
  EXPECT_THROW(LqgParams::from_kappa(4.0), DomainError);
}

TEST(WeightToBeta, Examples) {
  EXPECT_DOUBLE_EQ(weight_to_beta(2.0, LqgParams(1.0)), 1.0);
  EXPECT_DOUBLE_EQ(weight_to_beta(0.5, LqgParams(1.0)), 2.5);
  EXPECT_NEAR(weight_to_beta(0.64, LqgParams(0.8)), 2.5, 1e-14);
  EXPECT_THROW(weight_to_beta(0.0, LqgParams(1.0)), DomainError);
}

TEST(WeightToBeta, RoundTrip) {
  for (double g : {0.4, 1.0, 1.7})
    for (double W : {0.1, 1.0, 2.0, 5.5}) {
      const LqgParams p(g);
      EXPECT_NEAR(beta_to_weight(weight_to_beta(W, p), p), W, 1e-12);
    }
}

TEST(Triangle, ThickThinAndReflection) {
  const LqgParams p(1.0);
  const TriangleWeights tw = make_triangle(1.7, 0.3, 2.0, p);
  EXPECT_TRUE(tw.thick[0]);
  EXPECT_FALSE(tw.thick[1]);
  EXPECT_DOUBLE_EQ(tw.reflected[0], tw.beta[0]);
  EXPECT_DOUBLE_EQ(tw.reflected[1], 2.0 * p.Q() - tw.beta[1]);
  EXPECT_NEAR(tw.beta_bar, tw.beta[0] + tw.beta[1] + tw.beta[2], 1e-15);
}

TEST(WeightsToRho, Examples) {
  const LqgParams p(1.0);
  RhoTriple r = weights_to_rho(2, 2, 2, p);
  EXPECT_EQ(r.minus, 0.0);
  EXPECT_EQ(r.plus, 0.0);
  EXPECT_EQ(r.one, 0.0);
  r = weights_to_rho(4, 3, 1, p);
  EXPECT_EQ(r.minus, 2.0);
  EXPECT_EQ(r.plus, -1.0);
  EXPECT_EQ(r.one, 2.0);
  r = weights_to_rho(0.5, 1, 1, p);
  EXPECT_EQ(r.minus, -1.5);
  EXPECT_EQ(r.plus, -1.0);
  EXPECT_EQ(r.one, 0.0);
}

TEST(BetaRhoBridge, Examples) {
  const LqgParams p(1.0);
  RhoTriple r = beta_rho_bridge(1, 1, 1, p);
  EXPECT_EQ(r.minus, 0.0);
  EXPECT_EQ(r.plus, 0.0);
  EXPECT_EQ(r.one, 0.0);
  r = beta_rho_bridge(p.Q(), 1, 1.5, p);
  EXPECT_DOUBLE_EQ(r.minus, -1.5);
  EXPECT_DOUBLE_EQ(r.plus, -0.5);
  EXPECT_DOUBLE_EQ(r.one, 0.5);
}

TEST(BetaRhoBridge, AgreesWithWeights) {
  // insertions from weights give the same force points as the weights directly
  const LqgParams p(1.3);
  const double W = 2.4, W1 = 1.1, W2 = 3.0;
  const RhoTriple a = weights_to_rho(W, W1, W2, p);
  const RhoTriple b = beta_rho_bridge(weight_to_beta(W, p), weight_to_beta(W1, p), weight_to_beta(W2, p), p);
  EXPECT_NEAR(a.minus, b.minus, 1e-12);
  EXPECT_NEAR(a.plus, b.plus, 1e-12);
  EXPECT_NEAR(a.one, b.one, 1e-12);
}

TEST(AlphaExponent, Examples) {
  const LqgParams k1 = LqgParams::from_kappa(1.0), k2 = LqgParams::from_kappa(2.0);
  EXPECT_NEAR(alpha_exponent(1.4, 0.9, 1.4 - 0.9 + 2.0, k1), 0.0, 1e-15);
  EXPECT_NEAR(alpha_exponent(1.3, 1.3, 2.0, k1), 0.0, 1e-15);
  EXPECT_NEAR(alpha_exponent(1.0, 2.0, 3.0, k2), 0.5, 1e-15);
}
