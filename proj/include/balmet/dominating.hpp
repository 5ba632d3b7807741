#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"

namespace balmet {

// g(y) = y^2/2 up to the knot c, then curvature m; C^1 at the knot.
struct PiecewiseQuadraticHalf {
  double m = 1.0;
  double c = 0.0;  // +inf allowed: pure Gaussian

  void validate() const {
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("g_{m,c}: m must be positive and finite");
    if (std::isnan(c) || c < 0.0) throw DomainError("g_{m,c}: knot must be >= 0");
  }

  double operator()(double y) const {
    if (y <= c) return 0.5 * y * y;
    const double z = y - c;
    return 0.5 * c * c + c * z + 0.5 * m * z * z;
  }
  double derivative(double y) const { return y <= c ? y : c + m * (y - c); }
};

// Convex g on [0, inf) with g(0) = g'(0) = 0 and piecewise-constant
// curvature: curvature[k] holds on [knots[k], knots[k+1]) with knots[0] = 0.
class AdmissibleHalfFunction {
 public:
  AdmissibleHalfFunction(std::vector<double> knots, std::vector<double> curvatures, double M1,
                         double M2)
      : knots_(std::move(knots)), curv_(std::move(curvatures)), M1_(M1), M2_(M2) {
    if (!(M1_ > 0.0) || !(M2_ >= M1_) || !std::isfinite(M2_))
      throw DomainError("admissible g: need 0 < M1 <= M2 < inf");
    if (knots_.empty() || knots_.size() != curv_.size())
      throw DomainError("admissible g: knots and curvatures must pair up");
    if (knots_[0] != 0.0) throw DomainError("admissible g: first segment must start at 0");
    for (std::size_t k = 0; k < knots_.size(); ++k) {
      if (k && !(knots_[k] > knots_[k - 1]) ) throw DomainError("admissible g: knots must increase");
      if (!std::isfinite(knots_[k])) throw DomainError("admissible g: knots must be finite");
      const double tol = 1e-12 * M2_;
      if (!(curv_[k] >= M1_ - tol && curv_[k] <= M2_ + tol))
        throw DomainError("admissible g: curvature outside [M1, M2]");
    }
    // values and slopes at the knots
    val_.assign(knots_.size(), 0.0);
    slope_.assign(knots_.size(), 0.0);
    for (std::size_t k = 1; k < knots_.size(); ++k) {
      const double h = knots_[k] - knots_[k - 1];
      val_[k] = val_[k - 1] + slope_[k - 1] * h + 0.5 * curv_[k - 1] * h * h;
      slope_[k] = slope_[k - 1] + curv_[k - 1] * h;
    }
  }

  static AdmissibleHalfFunction from(const PiecewiseQuadraticHalf& g) {
    g.validate();
    const double lo = std::min(1.0, g.m), hi = std::max(1.0, g.m);
    if (g.c == 0.0) return AdmissibleHalfFunction({0.0}, {g.m}, lo, hi);
    if (!std::isfinite(g.c)) return AdmissibleHalfFunction({0.0}, {1.0}, lo, hi);
    return AdmissibleHalfFunction({0.0, g.c}, {1.0, g.m}, lo, hi);
  }

  double operator()(double y) const {
    const std::size_t k = segment(y);
    const double h = y - knots_[k];
    return val_[k] + slope_[k] * h + 0.5 * curv_[k] * h * h;
  }

  // y -> g(rho y)
  AdmissibleHalfFunction dilated(double rho) const {
    if (!(rho > 0.0)) throw DomainError("dilation factor must be positive");
    std::vector<double> kn = knots_, cv = curv_;
    for (double& v : kn) v /= rho;
    for (double& v : cv) v *= rho * rho;
    return AdmissibleHalfFunction(kn, cv, M1_ * rho * rho, M2_ * rho * rho);
  }

  const std::vector<double>& knots() const noexcept { return knots_; }
  const std::vector<double>& curvatures() const noexcept { return curv_; }
  double M1() const noexcept { return M1_; }
  double M2() const noexcept { return M2_; }

 private:
  std::size_t segment(double y) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), y);
    return it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin() - 1);
  }

  std::vector<double> knots_, curv_;
  double M1_, M2_;
  std::vector<double> val_, slope_;
};

struct HalfFunctionals {
  double a = kNaN;   // int e^{-g}
  double b = kNaN;   // int y^2 e^{-g}
  double b1 = kNaN;  // int y e^{-g}
  double d_raw = kNaN;
  double d_quarter = kNaN;
};

namespace detail {

inline HalfFunctionals make_functionals(double a, double b1, double b) {
  const double d = b / (a * a * a);
  return {a, b, b1, d, 0.25 * d};
}

// K_k(mu) = int_0^inf s^k e^{-mu s - s^2/2} ds for k = 0..5.  K_k is the
// minimal solution of K_k = (k-1) K_{k-2} - mu K_{k-1}: the upward
// recurrence is fine for small mu but cancels badly as mu grows, so larger
// mu runs the recurrence downwards (Miller) and normalizes with K_0.
inline std::array<double, 6> tail_kernel(double mu) {
  std::array<double, 6> K{};
  const double k0 = std::sqrt(std::numbers::pi / 2.0) * erfcx_eval(mu / std::numbers::sqrt2);
  if (mu <= 1.0) {
    K[0] = k0;
    K[1] = 1.0 - mu * K[0];
    for (int k = 2; k < 6; ++k) K[k] = (k - 1) * K[k - 2] - mu * K[k - 1];
    return K;
  }
  // dominant/minimal ratio decays roughly like exp(-2 mu sqrt(k))
  const double root = std::sqrt(5.0) + 20.0 / mu;
  const int L = std::max(40, static_cast<int>(root * root) + 1);
  // rho_k = K_k / K_{k-1} satisfies rho_{k-1} = (k-1) / (rho_k + mu)
  double rho = 0.0;
  std::array<double, 6> ratio{};
  for (int k = L; k >= 1; --k) {
    if (k <= 5) ratio[k] = rho;
    rho = (k - 1) / (rho + mu);
  }
  K[0] = k0;
  for (int k = 1; k < 6; ++k) K[k] = K[k - 1] * ratio[k];
  return K;
}

}  // namespace detail

// Closed-form integrals of e^{-g_{m,c}}.  With e = e^{-c^2/2} and
// J_k = int_0^inf z^k e^{-c z - m z^2/2} dz = m^{-(k+1)/2} K_k(c/sqrt m),
// every tail moment int_c^inf (y-c)^j y^k e^{-g} is a finite sum of J's.
class HalfLineCalculus {
 public:
  HalfLineCalculus(double m, double c) : m_(m), c_(c) {
    PiecewiseQuadraticHalf{m, c}.validate();
    const double s2pi = std::sqrt(std::numbers::pi / 2.0);
    if (!std::isfinite(c)) {
      e_ = 0.0;
      inner_ = {s2pi, 1.0, s2pi};
      J_.fill(0.0);
      return;
    }
    e_ = std::exp(-0.5 * c * c);
    const double A0 = s2pi * erf_eval(c / std::numbers::sqrt2);
    inner_ = {A0, 1.0 - e_, A0 - c * e_};
    const auto K = detail::tail_kernel(c / std::sqrt(m));
    for (int k = 0; k < 6; ++k) J_[k] = std::pow(m, -0.5 * (k + 1)) * K[k];
  }

  double m() const noexcept { return m_; }
  double c() const noexcept { return c_; }

  // int_c^inf (y - c)^j y^k e^{-g} dy, j + k <= 5
  double tail(int j, int k) const {
    if (j < 0 || k < 0 || j + k > 5) throw DomainError("tail moment order out of range");
    if (e_ == 0.0) return 0.0;
    double s = 0.0, binom = 1.0;
    for (int l = 0; l <= k; ++l) {
      s += binom * std::pow(c_, k - l) * J_[j + l];
      binom = binom * (k - l) / (l + 1);
    }
    return e_ * s;
  }

  double a() const { return inner_[0] + tail(0, 0); }
  double b1() const { return inner_[1] + tail(0, 1); }
  double b() const { return inner_[2] + tail(0, 2); }

  HalfFunctionals functionals() const { return detail::make_functionals(a(), b1(), b()); }

  // derivatives in the knot position
  double a_prime() const { return (m_ - 1.0) * tail(1, 0); }
  double b1_prime() const { return (m_ - 1.0) * tail(1, 1); }
  double b_prime() const { return (m_ - 1.0) * tail(1, 2); }

  // gamma = a b' - 3 b a' = (m - 1) G
  double gamma() const { return a() * b_prime() - 3.0 * b() * a_prime(); }
  double G() const { return a() * tail(1, 2) - 3.0 * b() * tail(1, 0); }

  double A1() const { return 3.0 * b() * tail(0, 0) - a() * tail(0, 2); }
  double A2() const {
    return 2.0 * tail(1, 2) * tail(1, 0) - a() * tail(2, 2) + 3.0 * b() * tail(2, 0);
  }
  double dG_dc() const { return A1() + (1.0 - m_) * A2(); }
  double dG_dm() const {
    const double P = tail(1, 2), R = tail(1, 0);
    return -0.5 * tail(2, 0) * P - 0.5 * a() * tail(3, 2) + 1.5 * tail(2, 2) * R +
           1.5 * b() * tail(3, 0);
  }

  // a b_m - 3 b a_m; equals d/dm of b a^{-3} times a^4 along a critical curve
  double eta() const { return 1.5 * b() * tail(2, 0) - 0.5 * a() * tail(2, 2); }

 private:
  double m_, c_;
  double e_ = 0.0;
  std::array<double, 3> inner_{};
  std::array<double, 6> J_{};
};

inline HalfFunctionals half_functionals(const PiecewiseQuadraticHalf& g) {
  return HalfLineCalculus(g.m, g.c).functionals();
}

// a, b1, b by quadrature with the knots as breakpoints.
inline HalfFunctionals half_functionals(const AdmissibleHalfFunction& g,
                                        const QuadratureConfig& cfg = {}) {
  auto ell = [&g](double y) { return -g(y); };
  const LogQuadrature q = log_moments(ell, Interval{0.0, kInf}, cfg, g.knots());
  const double a = q.value();
  const double b1 = a * q.mean;
  const double b = a * (q.variance + q.mean * q.mean);
  return detail::make_functionals(a, b1, b);
}

inline HalfFunctionals half_functionals_quadrature(const PiecewiseQuadraticHalf& g,
                                                   const QuadratureConfig& cfg = {}) {
  return half_functionals(AdmissibleHalfFunction::from(g), cfg);
}

inline double general_d(const AdmissibleHalfFunction& g, const QuadratureConfig& cfg = {}) {
  return half_functionals(g, cfg).d_quarter;
}

inline double gamma_fn(double m, double c) { return HalfLineCalculus(m, c).gamma(); }

struct GPartials {
  double G = kNaN;
  double dG_dc = kNaN;
  double dG_dm = kNaN;
  double A1 = kNaN;
  double A2 = kNaN;
};

inline GPartials G_and_partials(double m, double c) {
  const HalfLineCalculus h(m, c);
  return {h.G(), h.dG_dc(), h.dG_dm(), h.A1(), h.A2()};
}

struct DExtremum {
  double d_raw = kNaN;
  double c = kNaN;  // +inf when the limit value at infinity wins
};

// Interior extremum of d_raw over c >= 0 for curvature ratio r: the maximum
// for r < 1 and the minimum for r > 1.  In both cases d' changes sign where
// G crosses zero upwards, because gamma = (r - 1) G.
inline DExtremum extremize_d(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("extremize_d: ratio must be positive");
  const bool want_max = r < 1.0;
  const double limit = 2.0 / std::numbers::pi;
  const double cmax = 10.0 * std::max(1.0, 1.0 / std::sqrt(r));
  auto G = [r](double c) { return HalfLineCalculus(r, c).G(); };
  auto d = [r](double c) { return HalfLineCalculus(r, c).functionals().d_raw; };

  std::vector<double> grid{0.0};
  constexpr int n = 240;
  const double lo = 1e-3;
  for (int k = 0; k < n; ++k) grid.push_back(lo * std::pow(cmax / lo, k / (n - 1.0)));

  DExtremum best{limit, 0.0};
  auto better = [&](double v) { return want_max ? v > best.d_raw : v < best.d_raw; };
  bool found = false;
  double gprev = G(grid[0]);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double gk = G(grid[k]);
    if (gprev < 0.0 && gk >= 0.0) {
      const double c = gk == 0.0 ? grid[k] : find_root({G, grid[k - 1], grid[k]}, 1e-13);
      const double v = d(c);
      found = true;
      if (better(v)) best = {v, c};
    }
    gprev = gk;
  }
  if (!found) {
    // no interior critical point on the grid: search the best cell directly
    std::size_t kb = 0;
    double vb = d(grid[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
      const double v = d(grid[k]);
      if (want_max ? v > vb : v < vb) {
        vb = v;
        kb = k;
      }
    }
    const double a = grid[kb ? kb - 1 : 0], b = grid[std::min(kb + 1, grid.size() - 1)];
    const auto mn = golden_section_minimize([&](double c) { return want_max ? -d(c) : d(c); }, a, b, 1e-10);
    const double v = want_max ? -mn.value : mn.value;
    if (better(v)) best = {v, mn.x};
  }
  // otherwise the value 2/pi at c = 0 (equal to the limit at infinity) stands
  return best;
}

struct PQ {
  double p = kNaN;
  double q = kNaN;
  double c_at_p = kNaN;
  double c_at_q = kNaN;
};

inline PQ pq_extremize(double m) {
  if (!(m >= 1.0) || !std::isfinite(m)) throw DomainError("pq_extremize: m must be >= 1");
  const DExtremum hi = extremize_d(1.0 / m);
  const DExtremum lo = extremize_d(m);
  return {0.25 * hi.d_raw, 0.25 * lo.d_raw, hi.c, lo.c};
}

namespace detail {

inline double critical_knot_unchecked(double m, double c0) {
  auto G = [m](double c) { return HalfLineCalculus(m, c).G(); };
  const double lo = c0 - 0.1, hi = c0 + 0.1;
  if ((G(lo) > 0.0) == (G(hi) > 0.0))
    throw RangeError("critical_path: G(m, .) not bracketed in [c0 - 0.1, c0 + 0.1]");
  return find_root({G, lo, hi}, 1e-14);
}

}  // namespace detail

// c_0: the zero of G(1, .) in [0.5, 0.7].
inline double critical_knot_at_one() {
  static const double c0 =
      find_root({[](double c) { return HalfLineCalculus(1.0, c).G(); }, 0.5, 0.7}, 1e-15);
  return c0;
}

struct CriticalPoint {
  double c_of_m = kNaN;
  double c_prime = kNaN;
};

inline CriticalPoint critical_path(double m) {
  if (!(m >= 0.99 && m <= 1.01)) throw DomainError("critical_path: m must lie in [0.99, 1.01]");
  const double c = detail::critical_knot_unchecked(m, critical_knot_at_one());
  const HalfLineCalculus h(m, c);
  return {c, -h.dG_dm() / h.dG_dc()};
}

// Smooth branches of p and q near m = 1 through the critical knot; they
// coincide with pq_extremize there but stay differentiable across m = 1.
inline double q_branch(double m) {
  const double c = detail::critical_knot_unchecked(m, critical_knot_at_one());
  return 0.25 * HalfLineCalculus(m, c).functionals().d_raw;
}
inline double p_branch(double m) { return q_branch(1.0 / m); }

// d/dm of d_raw along the critical curve: eta / a^4.
inline double four_q_prime(double m) {
  const double c = detail::critical_knot_unchecked(m, critical_knot_at_one());
  const HalfLineCalculus h(m, c);
  const double a = h.a();
  return h.eta() / (a * a * a * a);
}

struct EtaFAudit {
  double m = kNaN;
  double eta = kNaN;
  double q_prime_times_4 = kNaN;
  double F = kNaN;
  double F_prime = kNaN;           // central difference
  double F_prime_analytic = kNaN;  // from eta at m and 1/m
};

inline EtaFAudit eta_F_audit(double m) {
  if (!(m >= 1.0 && m < 1.01)) throw DomainError("eta_F_audit: m must lie in [1, 1.01)");
  EtaFAudit r;
  r.m = m;
  const double c = detail::critical_knot_unchecked(m, critical_knot_at_one());
  const HalfLineCalculus h(m, c);
  const double a = h.a();
  r.eta = h.eta();
  r.q_prime_times_4 = r.eta / (a * a * a * a);
  auto F = [](double x) {
    const double ratio = p_branch(x) / q_branch(x);
    return ratio * ratio;
  };
  r.F = F(m);
  r.F_prime = differentiate_central(F, m, DiffScheme::kOrder4, 2.5e-4).value;
  const double p = p_branch(m), q = q_branch(m);
  const double qp = 0.25 * r.q_prime_times_4;
  const double pp = -0.25 * four_q_prime(1.0 / m) / (m * m);
  r.F_prime_analytic = 2.0 * (p / q) * (pp * q - p * qp) / (q * q);
  return r;
}

}  // namespace balmet
