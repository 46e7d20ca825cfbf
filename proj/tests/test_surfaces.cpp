#include <gtest/gtest.h>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

#include "slelab/harness.hpp"
#include "slelab/surfaces.hpp"

using namespace slelab;

namespace {

// E|Z + m e| for a standard 3D Gaussian Z, from the noncentral chi-squared density
double chi3_mean_oracle(double m) {
  boost::math::non_central_chi_squared dist(3.0, m * m);
  boost::math::quadrature::exp_sinh<double> es;
  return es.integrate([&](double x) { return std::sqrt(x) * boost::math::pdf(dist, x); });
}

double exp_cdf(double x, double rate) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * x); }

}  // namespace

TEST(SampleMBeta, SupremumIsExponential) {
  const LqgParams p(1.0);
  for (double beta : {1.0, 2.0}) {
    const double mu = p.Q() - beta, T = std::max(20.0, 40.0 / (mu * mu));
    std::vector<double> sups;
    for (std::uint64_t s = 0; s < 2000; ++s) sups.push_back(sample_M_beta(beta, p, T, T / 2000.0, s).sup);
    const KsResult ks = ks_test(sups, [&](double x) { return exp_cdf(x, mu); });
    EXPECT_TRUE(ks.pass) << beta << " " << ks.statistic << " " << ks.critical;
  }
}

TEST(SampleMBeta, LinearDriftAtLargeTime) {
  const LqgParams p(1.0);
  const double beta = 1.0, mu = p.Q() - beta, T = 400.0;
  std::vector<double> ends;
  for (std::uint64_t s = 0; s < 200; ++s) ends.push_back(sample_M_beta(beta, p, T, 0.1, s).values.back() / T);
  const MomentEstimate m = accumulate(ends);
  // X_T / T has mean -mu and standard deviation sqrt(2/T)
  EXPECT_LT(std::abs(m.mean + mu), 4.0 * std::sqrt(2.0 / T / 200.0));
}

TEST(SampleMBeta, Domain) {
  const LqgParams p(1.0);
  EXPECT_THROW(sample_M_beta(p.Q(), p, 1.0, 0.1, 0), DomainError);
  EXPECT_THROW(sample_M_beta(1.0, p, 1.0, 0.0, 0), DomainError);
  EXPECT_THROW(sample_M_beta_given_max(1.0, 0.0, p, 1.0, 0.1, 0), DomainError);
  EXPECT_THROW(sample_M_Qminus(-1.0, 1.0, 0.1, 0), DomainError);
  EXPECT_THROW(sample_M_beta(1.0, p, 1.0, 0.1, 0).at(2.0), DomainError);
}

TEST(SampleMBetaGivenMax, StaysBelowMaximumAfterHit) {
  const LqgParams p(1.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const RadialProcess r = sample_M_beta_given_max(1.0, 0.7, p, 20.0, 0.01, s);
    if (!r.hit_time) continue;
    EXPECT_EQ(r.sup, 0.7);
    EXPECT_EQ(r.at(*r.hit_time), 0.7);
    for (double v : r.values) EXPECT_LE(v, 0.7);
    EXPECT_EQ(r.values.size(), 2001u);
  }
}

TEST(SampleMBetaGivenMax, WilliamsMixtureMatchesDirect) {
  const LqgParams p(1.0);
  const double beta = 1.0, mu = p.Q() - beta;
  std::vector<double> direct, mixed;
  std::mt19937_64 rng(5);
  std::exponential_distribution<double> ex(mu);
  for (std::uint64_t s = 0; s < 3000; ++s) {
    direct.push_back(sample_M_beta(beta, p, 2.0, 0.005, s).at(1.0));
    mixed.push_back(sample_M_beta_given_max(beta, ex(rng), p, 2.0, 0.005, 100000 + s).at(1.0));
  }
  const KsResult ks = ks_test_two_sample(direct, mixed);
  EXPECT_TRUE(ks.pass) << ks.statistic << " " << ks.critical;
}

TEST(SampleMQminus, PostHitBesselMean) {
  const double a = 0.5, after = 1.0;
  std::vector<double> vals;
  for (std::uint64_t s = 0; s < 3000; ++s) {
    const RadialProcess r = sample_M_Qminus(a, 6.0, 0.005, s);
    if (r.hit_time && *r.hit_time + after <= 6.0)
      vals.push_back((a - r.at(*r.hit_time + after)) / std::sqrt(2.0));
  }
  ASSERT_GT(vals.size(), 1000u);
  const MomentEstimate m = accumulate(vals);
  EXPECT_LT(std::abs(m.mean - chi3_mean_oracle(0.0) * std::sqrt(after)), 4.0 * m.std_error);
}

TEST(DiskRadial, EntranceLawMean) {
  const LqgParams p(1.0);
  const double W = 2.0, mu = p.Q() - weight_to_beta(W, p);
  std::vector<double> a, b;
  for (std::uint64_t s = 0; s < 1500; ++s) {
    const auto pr = sample_disk_radial_conditioned(W, p, 1.0, 0.01, s, 1e-4);
    a.push_back(pr.first.values.back());
    b.push_back(pr.second.values.back());
    for (double v : pr.first.values) ASSERT_LT(v, 0.0);
  }
  const double target = -std::sqrt(2.0) * chi3_mean_oracle(mu / std::sqrt(2.0));
  const MomentEstimate ma = accumulate(a), mb = accumulate(b);
  EXPECT_LT(std::abs(ma.mean - target), 4.0 * ma.std_error);
  EXPECT_LT(std::abs(mb.mean - target), 4.0 * mb.std_error);
  EXPECT_NE(a, b);
}

TEST(DiskRadial, Domain) {
  const LqgParams p(1.0);
  EXPECT_THROW(sample_disk_radial_conditioned(0.3, p, 1.0, 0.01, 0), DomainError);
  EXPECT_THROW(sample_disk_radial_conditioned(2.0, p, 1.0, 0.01, 0, 0.0), DomainError);
}

TEST(ThinChain, WindowIntensityByQuadrature) {
  const LqgParams p(1.0);
  const double W = 0.3;
  const LengthLawDensity d = disk_length_density(p.kappa() - W, p);
  const double q = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double l) { return d.at(l); }, 0.1, 10.0, 15, 1e-12);
  EXPECT_NEAR(bead_window_intensity(W, 0.1, 10.0, p) / q, 1.0, 1e-9);
}

TEST(ThinChain, CountAndLengthLaw) {
  const LqgParams p(1.0);
  const double W = 0.3, lo = 0.1, hi = 10.0;
  const double e1 = disk_length_density(p.kappa() - W, p).exponent + 1.0;
  std::vector<double> excess, lengths;
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const BeadChain c = thin_chain_structure(W, lo, hi, p, s);
    EXPECT_GT(c.T, 0.0);
    EXPECT_LE(c.T, 1.0);
    excess.push_back(double(c.left_lengths.size()) - c.T * c.intensity);
    for (double l : c.left_lengths) lengths.push_back(l);
  }
  const MomentEstimate m = accumulate(excess);
  EXPECT_LT(std::abs(m.mean), 4.0 * m.std_error);
  const double A = std::pow(lo, e1), B = std::pow(hi, e1);
  const KsResult ks = ks_test(lengths, [&](double l) { return (std::pow(l, e1) - A) / (B - A); });
  EXPECT_TRUE(ks.pass) << ks.statistic << " " << ks.critical;
}

TEST(ThinChain, WiderWindowOnlyAddsBeads) {
  // intensities over adjacent windows add up
  const LqgParams p(1.0);
  const double W = 0.3;
  EXPECT_NEAR(bead_window_intensity(W, 0.1, 1.0, p) + bead_window_intensity(W, 1.0, 10.0, p),
              bead_window_intensity(W, 0.1, 10.0, p), 1e-12);
  EXPECT_GT(bead_window_intensity(W, 0.05, 10.0, p), bead_window_intensity(W, 0.1, 10.0, p));
}

TEST(ThinChain, Domain) {
  const LqgParams p(1.0);
  EXPECT_THROW(thin_chain_structure(0.6, 0.1, 1.0, p, 0), DomainError);
  EXPECT_THROW(thin_chain_structure(0.3, 1.0, 0.1, p, 0), DomainError);
  EXPECT_THROW(thin_chain_structure(0.3, 0.1, 1.0, p, 0, 0.0), DomainError);
}
