#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "balmet/contraction.hpp"

using namespace balmet;

namespace {

const double kPi = std::numbers::pi;

const CoarseResult& standard_run() {
  static const CoarseResult r = coarse_iterate(standard_initial_state());
  return r;
}

IterationState limit_state() {
  IterationState s;
  s.m = s.m_prime = 1.0;
  s.p = s.p_prime = s.q = s.q_prime = 1.0 / (2.0 * kPi);
  return s;
}

}  // namespace

TEST(CoarseUpdate, LimitIsAFixedPoint) {
  const auto u = coarse_update(limit_state(), 0.0);
  EXPECT_EQ(u.m_bar, 1.0);
  EXPECT_EQ(u.m_bar_prime, 1.0);
  const auto e = coarse_update(limit_state(), 1e-6);
  EXPECT_EQ(e.m_bar, 1.0 + 1e-6);
}

TEST(CoarseUpdate, Formula) {
  IterationState s;
  s.p = 0.3;
  s.p_prime = 0.4;
  s.q = 0.1;
  s.q_prime = 0.09;
  const auto u = coarse_update(s, 0.0);
  EXPECT_NEAR(u.m_bar, (0.4 / 0.09) * std::sqrt(0.3 * 0.4 / (0.1 * 0.09)), 1e-13);
  EXPECT_NEAR(u.m_bar_prime, 0.3 * 0.4 / (2 * kPi * 0.1 * 0.1 * 0.09), 1e-12);
}

TEST(CoarseIterate, StartingAtTheLimitStaysThere) {
  CoarseOptions opt;
  opt.epsilon = 0.0;
  const auto r = coarse_iterate(limit_state(), opt);
  ASSERT_TRUE(r.reached);
  EXPECT_EQ(r.iterations(), 1);
  EXPECT_EQ(r.trajectory.back().m, 1.0);
  EXPECT_NEAR(r.trajectory.back().q, 1.0 / (2 * kPi), 1e-15);
}

TEST(CoarseIterate, StandardStartReachesTheBand) {
  const auto& r = standard_run();
  ASSERT_TRUE(r.reached);
  EXPECT_GE(r.iterations(), 62);
  EXPECT_LE(r.iterations(), 72);
  const auto& s = r.trajectory.back();
  EXPECT_LT(s.m, 1.01);
  EXPECT_LT(s.m_prime, 1.01);
  EXPECT_GT(s.m, 1.0);
  EXPECT_LT(s.m, s.m_prime);
  EXPECT_LT(s.q_prime, s.q);
  EXPECT_LT(s.q, s.p);
  EXPECT_LT(s.p, s.p_prime);
  for (double v : {s.q_prime, s.q, s.p, s.p_prime}) {
    EXPECT_GT(v, 0.1585);
    EXPECT_LT(v, 0.1598);
  }
}

TEST(CoarseIterate, StatesStayInsideTheConstantBounds) {
  for (const auto& s : standard_run().trajectory) {
    if (s.iter == 0) continue;
    EXPECT_GE(s.m, 1.0);
    EXPECT_GE(s.m_prime, 1.0);
    for (auto [q, p] : {std::pair{s.q, s.p}, {s.q_prime, s.p_prime}}) {
      EXPECT_GE(q, 1.0 / 12);
      EXPECT_LE(q, p);
      EXPECT_LT(p, 0.5);
    }
  }
}

TEST(CoarseIterate, MonotoneOnceBelowAMillion) {
  const auto& t = standard_run().trajectory;
  std::size_t start = 0;
  while (start < t.size() && !(t[start].m < 1e6 && t[start].m_prime < 1e6)) ++start;
  ASSERT_LT(start, t.size());
  for (std::size_t k = start + 1; k < t.size(); ++k) {
    EXPECT_LE(t[k].m, t[k - 1].m) << k;
    EXPECT_LE(t[k].m_prime, t[k - 1].m_prime) << k;
  }
}

TEST(CoarseIterate, LiteralConventionAlsoContracts) {
  CoarseOptions opt;
  opt.convention = QBarConvention::kLiteral;
  const auto r = coarse_iterate(standard_initial_state(), opt);
  EXPECT_TRUE(r.reached);
  EXPECT_LT(r.iterations(), standard_run().iterations());
}

TEST(CoarseIterate, MaxIterStopsEarly) {
  CoarseOptions opt;
  opt.max_iter = 5;
  const auto r = coarse_iterate(standard_initial_state(), opt);
  EXPECT_FALSE(r.reached);
  EXPECT_EQ(r.iterations(), 5);
  for (int k = 0; k <= 5; ++k) {
    EXPECT_EQ(r.trajectory[k].iter, k);
    EXPECT_EQ(r.trajectory[k].m, standard_run().trajectory[k].m);
  }
}

TEST(CoarseIterate, OverflowIsReportedWithTheTrajectory) {
  IterationState s = standard_initial_state();
  s.p = s.p_prime = 1e200;
  s.q = s.q_prime = 1e-200;
  try {
    coarse_iterate(s);
    FAIL() << "expected NonContraction";
  } catch (const NonContraction& e) {
    EXPECT_EQ(e.coarse().size(), 1u);
  }
}

TEST(CoarseIterate, RejectsBadInput) {
  CoarseOptions opt;
  opt.epsilon = -1.0;
  EXPECT_THROW(coarse_iterate(standard_initial_state(), opt), DomainError);
  IterationState s = standard_initial_state();
  s.q = 0.0;
  EXPECT_THROW(coarse_iterate(s), DomainError);
}

TEST(CoarseIterate, TrajectoryExport) {
  std::ostringstream os;
  write_trajectory(os, standard_run().trajectory);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "iter,m,m_prime,p,p_prime,q,q_prime");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, static_cast<int>(standard_run().trajectory.size()));
  std::ostringstream again;
  write_trajectory(again, standard_run().trajectory);
  EXPECT_EQ(again.str(), os.str());
}

TEST(Refined, IdentityAtOne) {
  const auto s = refined_state(1.0);
  EXPECT_NEAR(s.I, 1.0, 1e-9);
  EXPECT_EQ(s.H, 1.0);
  EXPECT_EQ(s.Q, 1.0);
  EXPECT_EQ(s.alpha, 1.0);
}

TEST(Refined, DerivativeBandOnElevenPoints) {
  for (int k = 0; k <= 10; ++k) {
    const double m = 1.0 + 0.01 * k / 11.0;
    const double d = refined_I_prime(m);
    EXPECT_GT(d, 0.0) << m;
    EXPECT_LT(d, 0.86) << m;
  }
}

TEST(Refined, HAndQBounds) {
  for (int k = 0; k <= 50; ++k) {
    const double m = 1.0 + 0.01 * k / 51.0;
    const auto s = refined_state(m);
    EXPECT_GE(s.H, 0.99998) << m;
    EXPECT_LE(s.H, 1.0) << m;
    EXPECT_GE(s.Q, 1.0) << m;
    EXPECT_LT(s.Q, 1.00001) << m;
    EXPECT_NEAR(s.alpha, 1.0 / std::sqrt(m), 1e-16);
  }
}

TEST(Refined, AnalyticDerivativesMatchFiniteDifferences) {
  for (double m : {1.001, 1.005, 1.009}) {
    const double h = differentiate_central([](double x) { return refined_state(x).H; }, m,
                                           DiffScheme::kOrder4, 2.5e-4)
                         .value;
    const double q = differentiate_central([](double x) { return refined_state(x).Q; }, m,
                                           DiffScheme::kOrder4, 2.5e-4)
                         .value;
    EXPECT_NEAR(refined_H_prime(m), h, 1e-8) << m;
    EXPECT_NEAR(refined_Q_prime(m), q, 1e-9) << m;
  }
}

TEST(Refined, ConvergesFromTheTopOfTheBand) {
  const auto r = refined_iterate(1.009);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.trajectory.size(), 201u);
  EXPECT_LT(r.trajectory.back().m - 1.0, 1e-6);
  for (std::size_t k = 1; k < r.trajectory.size(); ++k)
    EXPECT_LT(r.trajectory[k].m, r.trajectory[k - 1].m) << k;
}

TEST(Refined, PositiveEpsilonStallsAboveOne) {
  RefinedOptions opt;
  opt.epsilon = 1e-4;
  const auto r = refined_iterate(1.009, opt);
  EXPECT_FALSE(r.converged);
  // the stall point solves m = I(m) + eps, roughly eps / (1 - I'(1))
  EXPECT_NEAR(r.trajectory.back().m - 1.0, 1e-4 / (1.0 - refined_I_prime(1.0005)), 2e-5);
}

TEST(Refined, RejectsStartsOutsideTheBand) {
  EXPECT_THROW(refined_iterate(1.0), DomainError);
  EXPECT_THROW(refined_iterate(1.02), DomainError);
  EXPECT_THROW(refined_state(1.2), DomainError);
}

TEST(Audit, ReproducibleRowsPass) {
  const auto rep = constants_audit();
  for (const char* name : {"c0", "dG_dc(1,c0)", "eta(1)", "F_prime(1)", "A1[1,1.01)", "|A2|[1,1.01)",
                           "dG_dc[1,1.01)", "A1(0.99,1]", "|A2|(0.99,1]", "dG_dc(0.99,1]",
                           "4q_prime[1,1.01)", "4q[1,1.01)", "4p[1,1.01)", "p/q[1,1.01)",
                           "4p_prime(1/m)(0.99,1]", "Q_prime[1,1.01)"}) {
    const AuditRow* r = rep.find(name);
    ASSERT_NE(r, nullptr) << name;
    EXPECT_TRUE(r->pass) << name << " min " << r->min << " max " << r->max;
    EXPECT_TRUE(r->error.empty());
  }
  EXPECT_EQ(rep.find("A1[1,1.01)")->samples, 21 * 21);
  EXPECT_EQ(rep.find("c0")->samples, 1);
}

TEST(Audit, RowValuesMatchDirectComputation) {
  const auto rep = constants_audit();
  EXPECT_NEAR(rep.find("c0")->min, critical_knot_at_one(), 0.0);
  EXPECT_NEAR(rep.find("dG_dm(1,c0)")->min, G_and_partials(1.0, critical_knot_at_one()).dG_dm, 0.0);
  EXPECT_NEAR(rep.find("p/q[1,1.01)")->max, pq_extremize(1.0 + 0.01 * 20 / 21).p / pq_extremize(1.0 + 0.01 * 20 / 21).q,
              1e-15);
  EXPECT_LT(pq_extremize(1.005).p / pq_extremize(1.005).q, 1.005);
}

TEST(Audit, Deterministic) {
  std::ostringstream a, b;
  write_audit(a, constants_audit());
  write_audit(b, constants_audit());
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str().find("name,claim,lo,hi,min,max,samples,pass"), std::string::npos);
}

TEST(Audit, RejectsDegenerateGrid) {
  AuditOptions opt;
  opt.grid = 1;
  EXPECT_THROW(constants_audit(opt), DomainError);
}
