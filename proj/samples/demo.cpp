// Short tour of the library: balanced coefficients for a cone angle,
// the extremal shape constants, and the contraction that squeezes them.
#include <cmath>
#include <cstdio>
#include <numbers>

#include "balmet/balmet.hpp"

using namespace balmet;

int main() {
  SolverConfig cfg;
  cfg.truncation_order = 48;
  const auto sol = solve_balanced(0.5, cfg);
  std::printf("beta = 0.5, N = %d: %d sweeps, max |b_i - target| = %.2e\n", sol.seq.order(), sol.sweeps,
              sol.residual.max_deviation);
  std::printf("%4s %14s %14s\n", "n", "c_n", "1/n!");
  for (int n = 0; n <= 8; ++n)
    std::printf("%4d %14.8f %14.8f\n", n, sol.seq.coefficient(n), std::exp(-std::lgamma(n + 1.0)));

  const auto row = asymptotic_row(sol.seq, 12.0);
  std::printf("\nat a = 12: a lambda''(a) = %.6f, h_a(x_a)/sqrt(2 pi a) = %.6f\n", row.a_lambda2,
              row.h_over_sqrt_a / std::sqrt(2.0 * std::numbers::pi));

  std::printf("\n%8s %12s %12s\n", "m", "p(m)", "q(m)");
  for (double m : {1.0, 1.01, 2.0, 10.0}) {
    const auto pq = pq_extremize(m);
    std::printf("%8.3g %12.8f %12.8f\n", m, pq.p, pq.q);
  }
  std::printf("1/(2 pi) = %.8f\n", 1.0 / (2.0 * std::numbers::pi));

  const auto coarse = coarse_iterate(standard_initial_state());
  const auto& s = coarse.trajectory.back();
  std::printf("\ncoarse contraction from m = 1e10: %d iterations, m = %.6f, m' = %.6f\n", coarse.iterations(),
              s.m, s.m_prime);
  const auto fine = refined_iterate(1.009);
  std::printf("refined map from m = 1.009: %zu steps to m - 1 = %.2e\n", fine.trajectory.size() - 1,
              fine.trajectory.back().m - 1.0);
}
