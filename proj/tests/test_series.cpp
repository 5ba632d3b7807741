#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <gtest/gtest.h>

#include "balmet/series.hpp"

using namespace balmet;

namespace {

const double kPi = std::numbers::pi;

double lgamma_ref(double x) { return boost::math::lgamma(x); }

}  // namespace

TEST(EvalLogF, ExponentialAtOne) {
  const auto seq = CoefficientSequence::factorial(60);
  // direct sum of 1/i!, small terms last
  double s = 0.0;
  for (int i = 60; i >= 0; --i) s += std::exp(-lgamma_ref(i + 1.0));
  EXPECT_NEAR(eval_log_f(seq, 1.0), std::log(s), 1e-12);
  EXPECT_NEAR(eval_log_f(seq, 1.0), 1.0, 1e-12);
}

TEST(EvalLogF, ExponentialAtTen) {
  const auto seq = CoefficientSequence::factorial(60);
  EXPECT_NEAR(eval_log_f(seq, 10.0), 10.0, 1e-8);
}

TEST(EvalLogF, ConstantFunction) {
  const CoefficientSequence one(0.0, {0.0});
  for (double x : {0.0, 0.5, 3.0, 1e6}) EXPECT_EQ(eval_log_f(one, x), 0.0);
}

TEST(EvalLogF, ZeroAndNegative) {
  const auto seq = CoefficientSequence::factorial(20);
  EXPECT_EQ(eval_log_f(seq, 0.0), 0.0);
  EXPECT_THROW(eval_log_f(seq, -1.0), DomainError);
  EXPECT_THROW(eval_log_f(seq, std::nan("")), DomainError);
}

TEST(EvalLogF, AgreesWithNaiveSumOnRandomSequences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-2.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> lam(12);
    lam[0] = 0.0;
    for (std::size_t i = 1; i < lam.size(); ++i) lam[i] = lam[i - 1] + d(rng);
    const CoefficientSequence seq(0.0, lam);
    for (double x : {0.1, 1.0, 4.0}) {
      double s = 0.0;
      for (std::size_t i = 0; i < lam.size(); ++i) s += std::exp(i * std::log(x) - lam[i]);
      EXPECT_NEAR(eval_log_f(seq, x), std::log(s), 1e-12 * std::max(1.0, std::abs(std::log(s))));
    }
  }
}

TEST(CoefficientSequenceCtor, RejectsBadInput) {
  EXPECT_THROW(CoefficientSequence(1.0, {0.0}), DomainError);
  EXPECT_THROW(CoefficientSequence(-0.1, {0.0}), DomainError);
  EXPECT_THROW(CoefficientSequence(0.0, {}), DomainError);
  EXPECT_THROW(CoefficientSequence(0.0, {0.0, std::nan("")}), DomainError);
  EXPECT_THROW(CoefficientSequence(0.0, {kInf, kInf}), DomainError);
  EXPECT_THROW(CoefficientSequence::factorial(-1), DomainError);
}

TEST(EvalProfile, PointMass) {
  std::vector<double> lam(10, kInf);
  lam[4] = 1.5;
  const CoefficientSequence seq(0.0, lam);
  for (double x : {0.01, 1.0, 50.0}) {
    const auto p = eval_profile(seq, x);
    EXPECT_DOUBLE_EQ(p.u, 4.0);
    EXPECT_NEAR(p.index_variance, 0.0, 1e-14);
  }
}

TEST(EvalProfile, ExponentialAtTwentyFive) {
  const auto p = eval_profile(CoefficientSequence::factorial(100), 25.0);
  EXPECT_NEAR(p.u, 25.0, 0.25);
  EXPECT_NEAR(p.index_variance, 25.0, 0.25);
  EXPECT_NEAR(p.u / p.x, 1.0, 0.01);
}

TEST(EvalProfile, ExponentialIdentityWhereTailIsNegligible) {
  // for e^x, u(x) = x and the index variance is x
  const auto seq = CoefficientSequence::factorial(200);
  for (double x : {0.5, 2.0, 10.0, 40.0, 80.0}) {
    const auto p = eval_profile(seq, x);
    EXPECT_NEAR(p.u, x, 1e-12 * std::max(1.0, x)) << x;
    EXPECT_NEAR(p.index_variance, x, 1e-11 * std::max(1.0, x)) << x;
  }
}

TEST(EvalProfile, RejectsNonPositiveX) {
  const auto seq = CoefficientSequence::factorial(20);
  EXPECT_THROW(eval_profile(seq, 0.0), DomainError);
  EXPECT_THROW(eval_profile(seq, -2.0), DomainError);
  EXPECT_THROW(eval_profile(seq, kInf), DomainError);
}

TEST(IndexWeights, SumToOneAndMatchMoments) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(0.2, 2.5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> lam(41);
    lam[0] = 0.0;
    double slope = 0.0;
    for (std::size_t i = 1; i < lam.size(); ++i) {
      slope += d(rng) * 0.2;  // increasing slope, convex lambda
      lam[i] = lam[i - 1] + slope;
    }
    const CoefficientSequence seq(0.0, lam);
    for (double x : {0.3, 1.0, 5.0, 30.0}) {
      const auto w = index_weights(seq, x);
      double s = 0.0, m1 = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        s += w[i];
        m1 += i * w[i];
      }
      double m2 = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) m2 += (i - m1) * (i - m1) * w[i];
      EXPECT_NEAR(s, 1.0, 1e-12);
      const auto p = eval_profile(seq, x);
      EXPECT_NEAR(p.u, m1, 1e-10 * std::max(1.0, m1));
      EXPECT_NEAR(p.index_variance, m2, 1e-10 * std::max(m2, 1e-3));
      EXPECT_GE(p.index_variance, 0.0);
      EXPECT_GE(p.u, 0.0);
      EXPECT_LE(p.u, seq.order());
    }
  }
}

TEST(ContinuousCoefficient, FactorialAtTen) {
  const auto cc = continuous_coefficient(CoefficientSequence::factorial(80), 10.0);
  EXPECT_NEAR(cc.lambda_of_a, std::log(3628800.0), 1e-9);
  EXPECT_NEAR(cc.lambda_prime, boost::math::digamma(11.0), 1e-9);
  EXPECT_NEAR(cc.lambda_prime, 2.3517525, 1e-7);
  EXPECT_NEAR(cc.lambda_second, boost::math::trigamma(11.0), 1e-9);
  EXPECT_NEAR(cc.lambda_second, 0.0951663, 1e-7);
  EXPECT_NEAR(cc.c_of_a, std::exp(-cc.lambda_of_a), 1e-15);
}

TEST(ContinuousCoefficient, FactorialMatchesGammaFamilyOnAGrid) {
  // for f = e^x the integral is Gamma(a+1) at every real a, once the
  // truncation sits far beyond the peak
  const auto seq = CoefficientSequence::factorial(400);
  for (double a : {1.0, 2.5, 7.25, 33.3, 100.0, 140.0}) {
    const auto cc = continuous_coefficient(seq, a);
    EXPECT_NEAR(cc.lambda_of_a, lgamma_ref(a + 1.0), 1e-9 * std::max(1.0, cc.lambda_of_a)) << a;
    EXPECT_NEAR(cc.lambda_prime, boost::math::digamma(a + 1.0), 1e-8) << a;
    EXPECT_NEAR(cc.lambda_second, boost::math::trigamma(a + 1.0),
                1e-7 * boost::math::trigamma(a + 1.0))
        << a;
    EXPECT_GT(cc.lambda_second, 0.0);
  }
}

TEST(ContinuousCoefficient, SecondDerivativeMatchesSecondDifference) {
  const auto seq = CoefficientSequence::factorial(200);
  const double h = 1e-2;
  for (double a : {20.0, 50.0, 100.0}) {
    const double l0 = continuous_coefficient(seq, a).lambda_of_a;
    const double lp = continuous_coefficient(seq, a + h).lambda_of_a;
    const double lm = continuous_coefficient(seq, a - h).lambda_of_a;
    const double fd = (lp - 2.0 * l0 + lm) / (h * h);
    const double q = continuous_coefficient(seq, a).lambda_second;
    EXPECT_NEAR(fd / q, 1.0, 1e-4) << a;
  }
}

TEST(ContinuousCoefficient, PositiveCurvatureOnRandomConvexSequences) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0.01, 0.6);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> lam(101);
    lam[0] = 0.0;
    double slope = -1.0;
    for (std::size_t i = 1; i < lam.size(); ++i) {
      slope += d(rng) / std::sqrt(double(i));
      lam[i] = lam[i - 1] + slope;
    }
    const CoefficientSequence seq(0.0, lam);
    for (double a : {5.0, 20.0, 50.0})
      EXPECT_GT(continuous_coefficient(seq, a).lambda_second, 0.0);
  }
}

TEST(ContinuousCoefficient, SafeRange) {
  const auto seq = CoefficientSequence::factorial(100);
  EXPECT_DOUBLE_EQ(safe_index_max(seq), 60.0);
  EXPECT_NO_THROW(continuous_coefficient(seq, 60.0));
  EXPECT_THROW(continuous_coefficient(seq, 60.5), RangeError);
  EXPECT_THROW(continuous_coefficient(seq, -1.0), DomainError);
  try {
    continuous_coefficient(seq, 80.0);
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("60"), std::string::npos);
  }
}

TEST(PeakData, FactorialAtHundred) {
  const auto seq = CoefficientSequence::factorial(220);
  const auto pd = peak_data(seq, 100.0);
  EXPECT_NEAR(pd.x_a, 100.0, 1e-9);
  // h = e^a a! / a^a
  const double h_ref = std::exp(100.0 + lgamma_ref(101.0) - 100.0 * std::log(100.0));
  EXPECT_NEAR(pd.h_a_at_xa, h_ref, 1e-8 * h_ref);
  EXPECT_NEAR(pd.h_a_at_xa, std::sqrt(2.0 * kPi * 100.0) * (1.0 + 1.0 / 1200.0), 5e-3);
  EXPECT_NEAR(pd.h_a_at_xa / std::sqrt(100.0) / std::sqrt(2.0 * kPi), 1.0, 0.02);
  EXPECT_NEAR(std::log(pd.x_tilde_a), boost::math::digamma(101.0), 1e-9);
  EXPECT_GE(pd.delta_a, 1.0);
  EXPECT_GT(pd.h_a_at_xa, 0.0);
  // n_x solves lambda'(n) = log x on the interpolant: close to x for e^x
  EXPECT_NEAR(pd.n_x, 100.0, 1.0);
}

TEST(PeakData, StrictMonotonicityAlongAGrid) {
  const auto seq = CoefficientSequence::factorial(160);
  double px = 0.0, pxt = 0.0;
  for (double a = 2.0; a <= 100.0; a += 3.7) {
    const auto pd = peak_data(seq, a);
    EXPECT_GT(pd.x_a, px) << a;
    EXPECT_GT(pd.x_tilde_a, pxt) << a;
    EXPECT_GE(pd.delta_a, 1.0 - 1e-12) << a;
    px = pd.x_a;
    pxt = pd.x_tilde_a;
  }
}

TEST(PeakData, RejectsAbsentTermsAndUnreachableTargets) {
  std::vector<double> lam(30, 0.0);
  lam[3] = kInf;
  EXPECT_THROW(peak_data(CoefficientSequence(0.0, lam), 5.0), DomainError);
  const auto seq = CoefficientSequence::factorial(30);
  EXPECT_THROW(solve_u_equals(seq, 30.0), RangeError);
  EXPECT_THROW(solve_u_equals(seq, 0.0), RangeError);
}

TEST(AsymptoticReport, FactorialAtFourHundred) {
  const auto seq = CoefficientSequence::factorial(900);
  const auto rows = asymptotic_report(seq, {400.0});
  ASSERT_EQ(rows.size(), 1u);
  const auto& r = rows[0];
  EXPECT_NEAR(r.a_lambda2, 400.0 * boost::math::trigamma(401.0), 1e-6);
  EXPECT_NEAR(r.a_lambda2, 1.0, 0.02);
  EXPECT_NEAR(r.f_ratio, 1.0, 0.01);
  EXPECT_NEAR(r.dxtilde_da, 1.0, 0.02);
  EXPECT_NEAR(r.u_residual, 0.0, 1e-12);
  EXPECT_NEAR(r.variance_ratio, 1.0, 1e-9);
  EXPECT_NEAR(r.h_over_sqrt_a, std::sqrt(2.0 * kPi), 0.02 * std::sqrt(2.0 * kPi));
  // for e^x, x_a = a, t_{a+1} = log(a+1) and t~_a = psi(a+1)
  EXPECT_NEAR(r.xa_minus_a, 0.0, 1e-8);
  EXPECT_NEAR(r.t_gap, boost::math::digamma(401.0) - std::log(401.0), 1e-8);
}

TEST(AsymptoticReport, RowsFollowGridOrder) {
  const auto seq = CoefficientSequence::factorial(200);
  const std::vector<double> grid{30.0, 60.0, 90.0};
  const auto rows = asymptotic_report(seq, grid);
  ASSERT_EQ(rows.size(), grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) EXPECT_EQ(rows[k].a, grid[k]);
  EXPECT_LT(rows[0].x_a, rows[1].x_a);
}

TEST(ContinuousCoefficient, TruncationInsideTheSafeRangeIsVisible) {
  // the safe range only guards against gross truncation; at a = 400, N = 520
  // the missing tail of e^x already shifts lambda'' in the fourth digit
  const double ref = boost::math::trigamma(401.0);
  const double near = continuous_coefficient(CoefficientSequence::factorial(520), 400.0).lambda_second;
  const double far = continuous_coefficient(CoefficientSequence::factorial(900), 400.0).lambda_second;
  EXPECT_NEAR(far / ref, 1.0, 1e-8);
  EXPECT_GT(std::abs(near / ref - 1.0), 1e-5);
  EXPECT_LT(std::abs(near / ref - 1.0), 1e-3);
}
