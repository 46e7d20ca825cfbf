#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "slelab/harness.hpp"
#include "slelab/parallel.hpp"
#include "slelab/rng.hpp"

using namespace slelab;

namespace {
MomentEstimate estimate(double mean, double se) {
  MomentEstimate e;
  e.mean = mean;
  e.std_error = se;
  e.n = 1000;
  e.ess = 1000;
  return e;
}
}  // namespace

TEST(Accumulate, ConstantStream) {
  const std::vector<double> xs(37, 2.5);
  const MomentEstimate e = accumulate(xs);
  EXPECT_EQ(e.mean, 2.5);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(Accumulate, TwoSamples) {
  const std::vector<double> xs{0.0, 2.0};
  const MomentEstimate e = accumulate(xs);
  EXPECT_DOUBLE_EQ(e.mean, 1.0);
  EXPECT_DOUBLE_EQ(e.std_error, 1.0);
  EXPECT_THROW(accumulate(std::vector<double>{1.0}), DomainError);
}

TEST(Accumulate, StreamingAgreesWithBatch) {
  std::mt19937_64 rng(4);
  std::lognormal_distribution<double> d(0.0, 1.0);
  std::vector<double> xs(5000);
  for (double& x : xs) x = d(rng);
  Accumulator a, b;
  for (std::size_t i = 0; i < xs.size(); ++i) (i < 1234 ? a : b).add(xs[i]);
  a.merge(b);
  const MomentEstimate e = accumulate(xs);
  EXPECT_NEAR(a.mean(), e.mean, 1e-12);
  EXPECT_NEAR(a.standard_error(), e.std_error, 1e-12);
}

TEST(Accumulate, PairwiseSumIsAccurate) {
  std::vector<double> xs(1 << 20, 0.1);
  EXPECT_NEAR(pairwise_sum(xs), 0.1 * double(xs.size()), 1e-9);
}

TEST(AccumulateWeighted, EqualWeightsReproduceUnweighted) {
  const std::vector<double> xs{1.0, 4.0, 2.0, 8.0, 3.0};
  const std::vector<double> ws(xs.size(), 0.7);
  const MomentEstimate a = accumulate(xs), b = accumulate(xs, ws);
  EXPECT_NEAR(a.mean, b.mean, 1e-14);
  EXPECT_NEAR(a.std_error, b.std_error, 1e-14);
  EXPECT_NEAR(b.ess, 5.0, 1e-12);
}

TEST(AccumulateWeighted, EssNeverExceedsN) {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> ex(1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> xs(100), ws(100);
    for (int i = 0; i < 100; ++i) {
      xs[i] = ex(rng);
      ws[i] = std::pow(ex(rng), rep * 0.3);
    }
    const MomentEstimate e = accumulate(xs, ws);
    EXPECT_LE(e.ess, 100.0 + 1e-9);
    EXPECT_GT(e.ess, 0.0);
  }
}

TEST(AccumulateWeighted, RejectsDegenerateWeights) {
  const std::vector<double> xs{1.0, 2.0}, zero{0.0, 0.0}, neg{1.0, -1.0};
  EXPECT_THROW(accumulate(xs, zero), DomainError);
  EXPECT_THROW(accumulate(xs, neg), DomainError);
}

TEST(Compare, Examples) {
  EXPECT_TRUE(compare(estimate(1.00, 0.01), ExactValue::finite(1.005), 3.0, 0.05).pass);
  EXPECT_FALSE(compare(estimate(1.00, 0.001), ExactValue::finite(1.02), 3.0, 0.05).pass);
  EXPECT_TRUE(compare(estimate(1e6, 10.0), ExactValue::infinity(), 3.0, 0.05, 1e3).pass);
  EXPECT_FALSE(compare(estimate(10.0, 1.0), ExactValue::infinity(), 3.0, 0.05, 1e3).pass);
}

TEST(Compare, ImpreciseIsQualityFailure) {
  const Verdict v = compare(estimate(1.0, 0.2), ExactValue::finite(1.0), 3.0, 0.03);
  EXPECT_FALSE(v.pass);
  EXPECT_TRUE(v.quality_failure);
  const Verdict w = compare(estimate(1.5, 0.01), ExactValue::finite(1.0), 3.0, 0.03);
  EXPECT_FALSE(w.pass);
  EXPECT_FALSE(w.quality_failure);
}

TEST(CompareDeviation, Examples) {
  EXPECT_TRUE(compare_deviation(estimate(1.02, 0.04), ExactValue::finite(1.0), 3.0, 0.05).pass);
  EXPECT_FALSE(compare_deviation(estimate(1.08, 0.04), ExactValue::finite(1.0), 3.0, 0.05).pass);
  EXPECT_THROW(compare_deviation(estimate(1.0, 0.1), ExactValue::infinity(), 3.0, 0.05), DomainError);
}

TEST(Ks, CriticalValue) { EXPECT_NEAR(ks_critical_coefficient(0.01), 1.6276, 1e-4); }

TEST(Ks, AcceptsCorrectLawRejectsWrongOne) {
  std::mt19937_64 rng(11);
  std::exponential_distribution<double> ex(2.0);
  std::vector<double> xs(4000);
  for (double& x : xs) x = ex(rng);
  EXPECT_TRUE(ks_test(xs, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-2.0 * x); }).pass);
  EXPECT_FALSE(ks_test(xs, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-2.3 * x); }).pass);
}

TEST(Ks, TwoSample) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n0(0.0, 1.0), n1(0.15, 1.0);
  std::vector<double> a(5000), b(5000), c(5000);
  for (int i = 0; i < 5000; ++i) {
    a[i] = n0(rng);
    b[i] = n0(rng);
    c[i] = n1(rng);
  }
  EXPECT_TRUE(ks_test_two_sample(a, b).pass);
  EXPECT_FALSE(ks_test_two_sample(a, c).pass);
  EXPECT_DOUBLE_EQ(ks_statistic_two_sample({1.0, 2.0}, {1.0, 2.0}), 0.0);
}

TEST(ChiSquare, UniformBins) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> u(0, 9);
  std::vector<double> obs(10, 0.0), expct(10, 1000.0), skew(10, 1000.0);
  for (int i = 0; i < 10000; ++i) obs[u(rng)] += 1.0;
  EXPECT_TRUE(chi_square_test(obs, expct).pass);
  skew[0] = 1200.0;
  skew[9] = 800.0;
  EXPECT_FALSE(chi_square_test(obs, skew).pass);
  EXPECT_EQ(chi_square_test(obs, expct).dof, 9u);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = sample_stream(5, 17), b = sample_stream(5, 17), c = sample_stream(5, 18), d = sample_stream(5, 17, 1);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
  EXPECT_EQ(splitmix64(42), splitmix64(42));
}

TEST(Parallel, ResultIndependentOfWorkers) {
  auto run = [](unsigned w) {
    std::vector<double> out(257);
    parallel_for(out.size(), w, [&](std::size_t i) {
      auto rng = sample_stream(3, i);
      std::normal_distribution<double> n;
      out[i] = n(rng);
    });
    return out;
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw DomainError("boom");
               }),
               DomainError);
}
