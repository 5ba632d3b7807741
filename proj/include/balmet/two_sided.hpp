#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "balmet/dominating.hpp"
#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"
#include "balmet/parallel.hpp"

namespace balmet {

// Full-line profile: g_{m,c1} on the right, g_{m,c2}(-y) on the left, both
// dilated by the base curvature M1.  The pure branch is the knot-free
// extremal case: curvature 1 on the right, m on the left.
struct TwoSidedProfile {
  double m = 1.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double M1 = 1.0;
  bool pure_branch = false;

  static TwoSidedProfile pure(double m, double M1 = 1.0) { return {m, kInf, 0.0, M1, true}; }

  void validate() const {
    if (!(m >= 1.0) || !std::isfinite(m)) throw DomainError("two-sided profile: m must be >= 1");
    if (!(M1 > 0.0) || !std::isfinite(M1)) throw DomainError("two-sided profile: M1 must be > 0");
    if (pure_branch) return;
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw DomainError("two-sided profile: knots must be >= 0");
  }

  double right_knot() const { return pure_branch ? kInf : c1; }
  double left_knot() const { return pure_branch ? 0.0 : c2; }

  double operator()(double y) const {
    const double s = std::sqrt(M1) * y;
    return s >= 0.0 ? PiecewiseQuadraticHalf{m, right_knot()}(s)
                    : PiecewiseQuadraticHalf{m, left_knot()}(-s);
  }
};

struct TwoSidedFunctionals {
  double a_tilde = kNaN;
  double b_tilde = kNaN;
  double t_bar = kNaN;
  double d_tilde = kNaN;
};

namespace detail {

// a, b1, b for the two halves, in M1 = 1 units
inline TwoSidedFunctionals combine_halves(double aR, double b1R, double bR, double aL, double b1L,
                                          double bL, double M1) {
  const double A = aR + aL;
  const double tb = (b1R - b1L) / A;
  const double B = std::max(0.0, bR + bL - A * tb * tb);
  const double s = std::sqrt(M1);
  TwoSidedFunctionals out;
  out.a_tilde = A / s;
  out.t_bar = tb / s;
  out.b_tilde = B / (M1 * s);
  out.d_tilde = B / (A * A * A);
  return out;
}

}  // namespace detail

inline TwoSidedFunctionals two_sided_functionals(const TwoSidedProfile& p) {
  p.validate();
  const HalfLineCalculus R(p.m, p.right_knot());
  const HalfLineCalculus L(p.m, p.left_knot());
  return detail::combine_halves(R.a(), R.b1(), R.b(), L.a(), L.b1(), L.b(), p.M1);
}

// Same quantities by direct quadrature over the whole line.
inline TwoSidedFunctionals two_sided_functionals_quadrature(const TwoSidedProfile& p,
                                                            const QuadratureConfig& cfg = {}) {
  p.validate();
  std::vector<double> breaks{0.0};
  const double s = std::sqrt(p.M1);
  if (std::isfinite(p.right_knot())) breaks.push_back(p.right_knot() / s);
  breaks.push_back(-p.left_knot() / s);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto ell = [&p](double y) { return -p(y); };
  const LogQuadrature q = log_moments(ell, Interval{-kInf, kInf}, cfg, breaks);
  TwoSidedFunctionals out;
  out.a_tilde = q.value();
  out.t_bar = q.mean;
  out.b_tilde = out.a_tilde * q.variance;
  out.d_tilde = out.b_tilde / (out.a_tilde * out.a_tilde * out.a_tilde);
  return out;
}

// |t_bar| <= sqrt(2/(pi M1)) (1 - 1/sqrt m) for curvature in [M1, m M1]
inline double tbar_bound(double M1, double m) {
  if (!(M1 > 0.0)) throw DomainError("tbar_bound: M1 must be > 0");
  if (!(m >= 1.0)) throw DomainError("tbar_bound: m must be >= 1");
  return std::sqrt(2.0 / (std::numbers::pi * M1)) * (1.0 - 1.0 / std::sqrt(m));
}

inline double d_tilde(double m, double c1, double c2) {
  return two_sided_functionals(TwoSidedProfile{m, c1, c2}).d_tilde;
}

// lower-band correction term (4/pi^2) (1 - alpha)^2 / (1 + alpha)^2, alpha = m^{-1/2}
inline double qtilde_correction(double m) {
  const double al = 1.0 / std::sqrt(m);
  const double r = (1.0 - al) / (1.0 + al);
  return 4.0 / (std::numbers::pi * std::numbers::pi) * r * r;
}

struct QTildeOptions {
  double move_tol = 1e-7;
  double line_tol = 1e-9;
  int max_rounds = 2000;
  unsigned threads = 1;
};

struct QTilde {
  double q_tilde = kNaN;
  double c1_star = kNaN;  // +inf when the Gaussian limit wins
  double c2_star = kNaN;
  int rounds = 0;         // coordinate sweeps of the winning start
};

namespace detail {

struct DescentRun {
  double value, c1, c2;
  int rounds;
  bool converged;
};

inline DescentRun coordinate_descent(double m, double c1, double c2, double cmax,
                                     const QTildeOptions& opt) {
  double v = d_tilde(m, c1, c2);
  for (int r = 1; r <= opt.max_rounds; ++r) {
    const Minimum a = golden_section_minimize([&](double x) { return d_tilde(m, x, c2); }, 0.0,
                                              cmax, opt.line_tol);
    const double n1 = a.value <= v ? a.x : c1;
    v = std::min(v, a.value);
    const Minimum b = golden_section_minimize([&](double x) { return d_tilde(m, n1, x); }, 0.0,
                                              cmax, opt.line_tol);
    const double n2 = b.value <= v ? b.x : c2;
    v = std::min(v, b.value);
    const bool small = std::fabs(n1 - c1) < opt.move_tol && std::fabs(n2 - c2) < opt.move_tol;
    c1 = n1;
    c2 = n2;
    if (small) return {v, c1, c2, r, true};
  }
  return {v, c1, c2, opt.max_rounds, false};
}

}  // namespace detail

// Minimum of d_tilde over both knots.  Starts on a 5x5 grid with c1 >= c2;
// the Gaussian limit 1/(2 pi) at infinity is compared explicitly.
inline QTilde qtilde_extremize(double m, const QTildeOptions& opt = {}) {
  if (!(m >= 1.0) || !std::isfinite(m)) throw DomainError("qtilde_extremize: m must be >= 1");
  const double limit = 1.0 / (2.0 * std::numbers::pi);
  if (m == 1.0) return {limit, kInf, kInf, 0};
  const double cmax = 10.0 * std::max(1.0, 1.0 / std::sqrt(m));
  std::vector<std::array<double, 2>> starts;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j <= i; ++j) starts.push_back({cmax * (i + 0.5) / 5.0, cmax * (j + 0.5) / 5.0});
  std::vector<detail::DescentRun> runs(starts.size());
  detail::parallel_for(starts.size(), opt.threads, [&](std::size_t k) {
    runs[k] = detail::coordinate_descent(m, starts[k][0], starts[k][1], cmax, opt);
  });
  const detail::DescentRun* best = nullptr;
  for (const auto& r : runs) {
    if (!r.converged) continue;
    if (!best || r.value < best->value ||
        (r.value == best->value && (r.c1 < best->c1 || (r.c1 == best->c1 && r.c2 < best->c2))))
      best = &r;
  }
  if (!best) {
    double v = kInf;
    for (const auto& r : runs) v = std::min(v, r.value);
    throw AccuracyError("qtilde_extremize: coordinate descent stagnated", v, opt.move_tol);
  }
  if (best->value >= limit) return {limit, kInf, kInf, best->rounds};
  return {best->value, best->c1, best->c2, best->rounds};
}

// ---------------------------------------------------------------------------
// ratio functions

// f1(c) = int x (x+c)^2 e^{-x^2/2-cx} / int x e^{-x^2/2-cx}
inline double ratio_f1(double c) {
  const auto K = detail::tail_kernel(c);
  return (K[3] + 2.0 * c * K[2] + c * c * K[1]) / K[1];
}

// f2(c) = int x (x+c) e^{-x^2/2-cx} / int x e^{-x^2/2-cx}
inline double ratio_f2(double c) {
  const auto K = detail::tail_kernel(c);
  return (K[2] + c * K[1]) / K[1];
}

// With X = sqrt(2 pi) e^{c^2/2} erfc(c/sqrt 2):
// f1'(c) = (2 (c^2+1) X - 4c) / (c X - 2)^2
inline double ratio_f1_prime(double c) {
  const double X = std::sqrt(2.0 * std::numbers::pi) * erfcx_eval(c / std::numbers::sqrt2);
  const double den = c * X - 2.0;
  return (2.0 * (c * c + 1.0) * X - 4.0 * c) / (den * den);
}

// f2'(sqrt2 s) = 2 (X^2 + 2 s X - 2) / (2 - 2 s X)^2, X = sqrt(pi) e^{s^2} erfc(s)
inline double ratio_f2_prime(double c) {
  const double s = c / std::numbers::sqrt2;
  const double X = std::sqrt(std::numbers::pi) * erfcx_eval(s);
  const double den = 2.0 - 2.0 * s * X;
  return 2.0 * (X * X + 2.0 * s * X - 2.0) / (den * den);
}

// f3(c) = b1/a for g_{m,c}, and its knot derivative
inline double ratio_f3(double m, double c) {
  const HalfLineCalculus h(m, c);
  return h.b1() / h.a();
}

inline double ratio_f3_prime(double m, double c) {
  const HalfLineCalculus h(m, c);
  const double a = h.a();
  return (a * h.b1_prime() - h.b1() * h.a_prime()) / (a * a);
}

// f3(c) - sqrt(2/pi), the distance to the c -> inf limit.  f3 itself
// rounds to the limit near c = 8, so comparisons go through this form:
// b1 - L a collapses to e^{-c^2/2} times an O(1/c^2) bracket.
inline double ratio_f3_excess(double m, double c) {
  const HalfLineCalculus h(m, c);
  if (!std::isfinite(c)) return 0.0;
  const double L = std::sqrt(2.0 / std::numbers::pi);
  const double e = std::exp(-0.5 * c * c);
  const double num = h.tail(0, 1) - e * (1.0 - erfcx_eval(c / std::numbers::sqrt2)) - L * h.tail(0, 0);
  return num / h.a();
}

// sqrt(pi) e^{x^2} erfc(x) - 2 / (x + sqrt(x^2 + 2)); positive for x >= 0
inline double erfc_inequality_margin(double x) {
  return std::sqrt(std::numbers::pi) * erfcx_eval(x) - 2.0 / (x + std::sqrt(x * x + 2.0));
}

struct RatioRow {
  double c = kNaN;
  double f1 = kNaN, f2 = kNaN, f3 = kNaN;
  double f3_excess = kNaN;  // f3 - sqrt(2/pi), resolved past the rounding of f3
  double f1_prime = kNaN, f2_prime = kNaN, f3_prime = kNaN;
};

struct RatioTable {
  std::vector<RatioRow> rows;
  bool f1_increasing = true;
  bool f2_increasing = true;
  bool f3_decreasing = true;  // only meaningful for m < 1
};

inline RatioTable ratio_monotonicity(const std::vector<double>& grid, double m) {
  if (!(m > 0.0)) throw DomainError("ratio_monotonicity: m must be > 0");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i]))
      throw DomainError("ratio_monotonicity: grid points must be finite and >= 0");
    if (i && !(grid[i] > grid[i - 1])) throw DomainError("ratio_monotonicity: grid not ascending");
  }
  RatioTable t;
  for (double c : grid) {
    RatioRow r;
    r.c = c;
    r.f1 = ratio_f1(c);
    r.f2 = ratio_f2(c);
    r.f3 = ratio_f3(m, c);
    r.f3_excess = ratio_f3_excess(m, c);
    r.f1_prime = ratio_f1_prime(c);
    r.f2_prime = ratio_f2_prime(c);
    r.f3_prime = ratio_f3_prime(m, c);
    if (!t.rows.empty()) {
      const RatioRow& p = t.rows.back();
      t.f1_increasing = t.f1_increasing && r.f1 > p.f1;
      t.f2_increasing = t.f2_increasing && r.f2 > p.f2;
      t.f3_decreasing = t.f3_decreasing && r.f3_excess < p.f3_excess;
    }
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace balmet
