// Acceptance harness: one PASS/FAIL line per criterion.
//   acceptance            run everything, exit 1 if anything failed
//   acceptance --only 5   run a single criterion
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "balmet/balmet.hpp"

using namespace balmet;

namespace {

const double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Outcome::check(bool ok, const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!ok) {
    detail += " [x]";
    pass = false;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const BalancedSolution& solved(double beta) {
  static std::map<double, BalancedSolution> cache;
  auto it = cache.find(beta);
  if (it == cache.end()) it = cache.emplace(beta, solve_balanced(beta, SolverConfig{})).first;
  return it->second;
}

// ---------------------------------------------------------------------------

Outcome factorial_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  SolverConfig cfg;
  cfg.truncation_order = 80;
  cfg.tol = 1e-8;
  const auto sol = solve_balanced(0.0, cfg);
  const double secs = seconds_since(t0);
  double err = 0.0;
  for (int i = 0; i <= 30; ++i) err = std::max(err, std::abs(sol.seq.lambda(i) - std::lgamma(i + 1.0)));
  o.check(err < 1e-4, "max|lambda_i - log i!| = %.3g (< 1e-4)", err);
  o.check(secs < 60.0, "runtime %.1f s (< 60)", secs);
  return o;
}

Outcome balance_identity() {
  Outcome o;
  const auto& sol = solved(0.5);
  const auto rows = global_balance_check(sol.seq, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(r.deviation));
  o.check(worst <= 1e-2, "max deviation %.3g over s = 0.1..0.7 (<= 1e-2)", worst);
  o.check(true, "validity bound at s = 0.7: %.2g", rows.back().validity_bound);
  return o;
}

Outcome reference_constants() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double c0 = critical_knot_at_one();
  const auto g = G_and_partials(1.0, c0);
  const auto cp = critical_path(1.0);
  const auto ef = eta_F_audit(1.0);
  const auto rep = constants_audit();
  const double secs = seconds_since(t0);
  o.check(std::abs(c0 - 0.612003) <= 1e-4, "c0 = %.6f (0.612003 +- 1e-4)", c0);
  o.check(std::abs(g.dG_dc - 1.06) <= 0.01, "dG/dc = %.4f (1.06 +- 0.01)", g.dG_dc);
  o.check(std::abs(g.dG_dm - 1.557) <= 0.01, "dG/dm = %.6f (1.557 +- 0.01)", g.dG_dm);
  o.check(std::abs(cp.c_prime - 1.47) <= 0.02, "c'(1) = %.6f (1.47 +- 0.02)", cp.c_prime);
  o.check(std::abs(ef.eta - (-0.318018)) <= 1e-4, "eta(1) = %.6f (-0.318018 +- 1e-4)", ef.eta);
  o.check(std::abs(ef.F_prime - 0.81) <= 0.02, "F'(1) = %.4f (0.81 +- 0.02)", ef.F_prime);
  o.check(secs < 120.0, "audit runtime %.1f s (< 120)", secs);
  (void)rep;
  return o;
}

Outcome interval_audit() {
  Outcome o;
  const auto rep = constants_audit();
  int n = 0, bad = 0;
  for (const auto& r : rep.rows) {
    if (r.samples <= 1) continue;  // point values belong to the previous criterion
    ++n;
    if (!r.pass) {
      ++bad;
      o.check(false, "%s: [%.6g, %.6g] vs %s", r.name.c_str(), r.min, r.max, r.claim.c_str());
    }
  }
  o.check(bad == 0, "%d/%d rectangle bounds hold on the 21x21 grid", n - bad, n);
  return o;
}

Outcome coarse_contraction() {
  Outcome o;
  const auto r = coarse_iterate(standard_initial_state());
  const auto& s = r.trajectory.back();
  o.check(r.reached && s.m < 1.01 && s.m_prime < 1.01, "final m = %.6f, m' = %.6f (< 1.01)", s.m, s.m_prime);
  o.check(std::abs(r.iterations() - 67) <= 5, "%d iterations (67 +- 5)", r.iterations());
  const bool ordered = s.q_prime < s.q && s.q < s.p && s.p < s.p_prime;
  const bool inside = s.q_prime > 0.1585 && s.p_prime < 0.1598;
  o.check(ordered && inside, "q' %.6f < q %.6f < p %.6f < p' %.6f in (0.1585, 0.1598)", s.q_prime, s.q, s.p,
          s.p_prime);
  return o;
}

Outcome refined_contraction() {
  Outcome o;
  const double i1 = refined_map(1.0);
  o.check(std::abs(i1 - 1.0) <= 1e-9, "I(1) - 1 = %.2g", i1 - 1.0);
  double lo = kInf, hi = -kInf;
  for (int k = 0; k <= 10; ++k) {
    const double d = refined_I_prime(1.0 + 0.01 * k / 11.0);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  o.check(lo > 0.0 && hi < 0.86, "I' in [%.4f, %.4f] at 11 points (0, 0.86)", lo, hi);
  const auto run = refined_iterate(1.009);
  bool monotone = true;
  for (std::size_t k = 1; k < run.trajectory.size(); ++k)
    monotone = monotone && run.trajectory[k].m < run.trajectory[k - 1].m;
  const int steps = static_cast<int>(run.trajectory.size()) - 1;
  o.check(run.converged && monotone && steps <= 200 && run.trajectory.back().m < 1.0 + 1e-6,
          "from 1.009: %d steps, monotone %d, final m - 1 = %.2g", steps, monotone,
          run.trajectory.back().m - 1.0);
  return o;
}

Outcome exact_limits() {
  Outcome o;
  const double target = 1.0 / (2.0 * kPi);
  const auto pq = pq_extremize(1.0);
  const double qt = qtilde_extremize(1.0).q_tilde;
  const double e = std::max({std::abs(pq.p - target), std::abs(pq.q - target), std::abs(qt - target)});
  o.check(e <= 1e-8, "max |{p,q,q~}(1) - 1/(2 pi)| = %.2g", e);
  double ed = 0.0;
  for (double m : {0.5, 2.0, 10.0})
    ed = std::max(ed, std::abs(half_functionals(PiecewiseQuadraticHalf{m, 0.0}).d_raw - 2.0 / kPi));
  o.check(ed <= 1e-10, "max |d_raw(m, 0) - 2/pi| = %.2g", ed);
  return o;
}

Outcome dominating_properties() {
  Outcome o;
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int bad_half = 0;
  double dmin = kInf, dmax = -kInf;
  for (int rep = 0; rep < 200; ++rep) {
    const double M1 = std::exp(std::log(0.1) + u(rng) * std::log(100.0));
    const double ratio = std::exp(u(rng) * std::log(100.0));
    const int segs = 1 + static_cast<int>(u(rng) * 6);
    std::vector<double> knots{0.0}, curv;
    for (int k = 1; k < segs; ++k) knots.push_back(knots.back() + 0.05 + 2.0 * u(rng) / std::sqrt(M1));
    for (int k = 0; k < segs; ++k) curv.push_back(M1 * std::exp(u(rng) * std::log(ratio)));
    const double d = general_d(AdmissibleHalfFunction(knots, curv, M1, M1 * ratio));
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
    if (!(d > 1.0 / 12 && d < 0.5)) ++bad_half;
  }
  o.check(bad_half == 0, "200 half-line functions: d in [%.4f, %.4f], %d violations", dmin, dmax, bad_half);

  int bad_two = 0;
  for (int rep = 0; rep < 500; ++rep) {
    const double m = 1.0 + 99.0 * u(rng);
    const double M1 = std::exp(std::log(0.01) + u(rng) * std::log(1000.0));
    const double c1 = u(rng) < 0.1 ? 0.0 : 6.0 * u(rng) * u(rng);
    const double c2 = u(rng) < 0.1 ? 0.0 : 6.0 * u(rng) * u(rng);
    const auto f = two_sided_functionals(TwoSidedProfile{m, c1, c2, M1});
    if (!(f.d_tilde >= 1.0 / 12 && f.d_tilde < pq_extremize(m).p && std::abs(f.t_bar) <= tbar_bound(M1, m)))
      ++bad_two;
  }
  o.check(bad_two == 0, "500 two-sided profiles: %d violations", bad_two);
  return o;
}

void asymptotic_checks(Outcome& o, const char* label, const CoefficientSequence& seq, double a) {
  const auto r = asymptotic_row(seq, a);
  const double h = r.h_over_sqrt_a / std::sqrt(2.0 * kPi) - 1.0;
  o.check(std::abs(h) <= 0.02, "%s a=%g: h/sqrt(2 pi a) - 1 = %.4f", label, a, h);
  o.check(std::abs(r.a_lambda2 - 1.0) <= 0.02, "a lambda'' - 1 = %.4f", r.a_lambda2 - 1.0);
  o.check(std::abs(r.variance_ratio - 1.0) <= 0.02, "var/x - 1 = %.4f", r.variance_ratio - 1.0);
  o.check(std::abs(r.xa_minus_a) <= std::sqrt(a) * std::log(a), "|x_a - a| = %.4f (<= %.2f)",
          std::abs(r.xa_minus_a), std::sqrt(a) * std::log(a));
  o.check(std::abs(r.t_gap_scaled) <= 1.0, "sqrt(a)|t gap| = %.4f", std::abs(r.t_gap_scaled));
}

Outcome asymptotics() {
  Outcome o;
  asymptotic_checks(o, "factorial", CoefficientSequence::factorial(900, 0.0), 400.0);
  const auto& sol = solved(0.5);
  const double a = std::floor(SolverConfig::default_enforce(sol.seq.order()) / 2.0);
  asymptotic_checks(o, "beta=0.5", sol.seq, a);
  return o;
}

Outcome monotonicity_continuity() {
  Outcome o;
  std::vector<double> betas;
  for (int k = 0; k <= 9; ++k) betas.push_back(0.1 * k);
  const auto scan = beta_scan(betas, 1, SolverConfig{});
  bool inc = true;
  for (const auto& r : scan.rows) inc = inc && r.increasing;
  o.check(inc, "c1 from %.6f (beta 0) to %.6f (beta 0.9), strictly increasing %d", scan.rows.front().c_n,
          scan.rows.back().c_n, inc);

  const auto& half = scan.solutions[5].seq;
  int bad = 0;
  for (int n = 1; n <= 10; ++n)  // c_0 = 1 is the normalization
    if (!(half.lambda(n) < std::lgamma(n + 1.0))) ++bad;
  o.check(bad == 0, "c_n(0.5) > 1/n! for 1 <= n <= 10: %d violations", bad);

  SolverConfig warm;
  warm.initial_lambdas = half.lambdas();
  const double c3a = half.coefficient(3);
  const double c3b = solve_balanced(0.501, warm).seq.coefficient(3);
  o.check(std::abs(c3b - c3a) < 1e-2, "|c3(0.501) - c3(0.5)| = %.3g", std::abs(c3b - c3a));
  return o;
}

Outcome ratio_functions() {
  Outcome o;
  std::vector<double> grid;
  for (int k = 0; k < 50; ++k) grid.push_back(10.0 * k / 49.0);
  const auto t = ratio_monotonicity(grid, 0.5);
  int b1 = 0, b2 = 0, b3 = 0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (!(t.rows[k].f1_prime > 0.0)) ++b1;
    if (!(t.rows[k].f2_prime > 0.0)) ++b2;
    if (k && !(t.rows[k].f3_excess < t.rows[k - 1].f3_excess)) ++b3;
  }
  o.check(b1 == 0 && b2 == 0, "f1' > 0, f2' > 0 on 50 points of [0, 10]: %d, %d violations", b1, b2);
  o.check(b3 == 0, "f3 (m = 0.5) strictly decreasing: %d violations", b3);
  int be = 0;
  double worst = kInf;
  for (int k = 0; k < 1000; ++k) {
    const double margin = erfc_inequality_margin(10.0 * k / 999.0);
    worst = std::min(worst, margin);
    if (!(margin > 0.0)) ++be;
  }
  o.check(be == 0, "erfc inequality at 1000 points of [0, 10]: min margin %.3g", worst);
  return o;
}

Outcome rough_bounds() {
  Outcome o;
  const auto& sol = solved(0.5);
  const int top = static_cast<int>(std::floor(SolverConfig::default_enforce(sol.seq.order()) / 2.0));
  int bad = 0;
  double hmin = kInf, vmin = kInf, vmax = -kInf, lmin = kInf, lmax = -kInf;
  for (int a = 10; a <= top; a += 4) {
    const auto r = asymptotic_row(sol.seq, a);
    const double h = r.h_over_sqrt_a;  // h / sqrt(a) >= 1/13
    hmin = std::min(hmin, h);
    vmin = std::min(vmin, r.variance_ratio);
    vmax = std::max(vmax, r.variance_ratio);
    lmin = std::min(lmin, r.a_lambda2);
    lmax = std::max(lmax, r.a_lambda2);
    if (!(h >= 1.0 / 13)) ++bad;
    if (!(r.variance_ratio > 1.0 / 5000 && r.variance_ratio < 2e7)) ++bad;
    if (!(r.a_lambda2 > 1.0 / 5000 && r.a_lambda2 < 2e7)) ++bad;
  }
  o.check(hmin >= 1.0 / 13, "min h/sqrt(a) = %.4f (>= 1/13) for a = 10..%d", hmin, top);
  o.check(vmin > 1.0 / 5000 && vmax < 2e7, "var/x in [%.4f, %.4f]", vmin, vmax);
  o.check(lmin > 1.0 / 5000 && lmax < 2e7, "a lambda'' in [%.4f, %.4f]", lmin, lmax);
  o.check(bad == 0, "%d violations", bad);
  return o;
}

struct Criterion {
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balmet acceptance checks"};
  int only = 0;
  app.add_option("--only", only, "run one criterion (1-12)")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {"beta = 0 factorial oracle", factorial_oracle},
      {"global balance identity", balance_identity},
      {"reference constants", reference_constants},
      {"interval bounds audit", interval_audit},
      {"coarse contraction", coarse_contraction},
      {"refined contraction", refined_contraction},
      {"exact limits", exact_limits},
      {"dominating-bound properties", dominating_properties},
      {"finite-a asymptotics", asymptotics},
      {"monotonicity and continuity in beta", monotonicity_continuity},
      {"ratio-function monotonicity", ratio_functions},
      {"rough bounds on solved sequences", rough_bounds},
  };

  int failed = 0;
  for (std::size_t k = 0; k < all.size(); ++k) {
    if (only && static_cast<int>(k) + 1 != only) continue;
    Outcome o;
    try {
      o = all[k].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, all[k].title, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
