#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "balmet/errors.hpp"

namespace balmet {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Controls for integrate_log_domain.  abs_tol is measured in units of the
// integrand's peak value, so it is scale free like rel_tol.
struct QuadratureConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-15;
  int max_refinements = 10;
  std::optional<double> peak_hint;
  double window_halfwidth_factor = 10.0;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw DomainError("QuadratureConfig: tolerances must be positive");
    if (max_refinements < 1)
      throw DomainError("QuadratureConfig: max_refinements must be >= 1");
    if (!(window_halfwidth_factor >= 6.0))
      throw DomainError("QuadratureConfig: window_halfwidth_factor must be >= 6");
    if (peak_hint && !std::isfinite(*peak_hint))
      throw DomainError("QuadratureConfig: peak_hint must be finite");
  }

  QuadratureConfig with_hint(double t) const {
    QuadratureConfig c = *this;
    c.peak_hint = t;
    return c;
  }
};

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

// ---------------------------------------------------------------------------
// log-sum-exp

inline double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) throw DomainError("log_sum_exp: empty input");
  if (terms.size() == 1) return terms[0];
  double mx = -kInf;
  for (double v : terms) {
    if (std::isnan(v)) throw DomainError("log_sum_exp: NaN term");
    mx = std::max(mx, v);
  }
  if (mx == -kInf) return -kInf;
  if (mx == kInf) return kInf;
  double s = 0.0;
  for (double v : terms) s += std::exp(v - mx);
  return mx + std::log(s);
}

inline double log_sum_exp(std::initializer_list<double> terms) {
  return log_sum_exp(std::span<const double>(terms.begin(), terms.size()));
}

// log(e^a + e^b) without building a container.
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

// ---------------------------------------------------------------------------
// complementary error function
//
// Two regimes: the positive-term erf series below 1 and the even
// continued fraction for erfcx above.  The series loses a couple of digits
// to cancellation in 1 - erf once erfc drops much below 0.1, so the switch
// sits at 1 rather than further out.

namespace detail {

// erf(x) * e^{x^2} * sqrt(pi) / 2 = sum 2^n x^{2n+1} / (2n+1)!!, x >= 0 small.
inline double erf_scaled_series(double x) {
  double term = x, sum = x;
  const double x2 = 2.0 * x * x;
  for (int n = 1; n < 200; ++n) {
    term *= x2 / (2.0 * n + 1.0);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// e^{x^2} erfc(x) for x >= 1 via the even part of Laplace's fraction,
// evaluated with modified Lentz.
inline double erfcx_fraction(double x) {
  const double z = 2.0 * x * x;
  constexpr double tiny = 1e-300;
  double f = z + 1.0;
  double C = f, D = 0.0;
  for (int n = 1; n < 5000; ++n) {
    const double an = -(2.0 * n - 1.0) * (2.0 * n);
    const double bn = z + 1.0 + 4.0 * n;
    D = bn + an * D;
    if (std::fabs(D) < tiny) D = tiny;
    C = bn + an / C;
    if (std::fabs(C) < tiny) C = tiny;
    D = 1.0 / D;
    const double delta = C * D;
    f *= delta;
    if (std::fabs(delta - 1.0) < 2e-16) break;
  }
  return 2.0 * x * std::numbers::inv_sqrtpi / f;
}

// e^{-x^2} with the rounding error of x*x folded back in.
inline double exp_neg_square(double x) {
  const double hi = x * x;
  const double lo = std::fma(x, x, -hi);
  return std::exp(-hi) * (1.0 - lo);
}

}  // namespace detail

inline double erf_eval(double x) {
  if (std::isnan(x)) throw DomainError("erf: NaN argument");
  if (x < 0.0) return -erf_eval(-x);
  if (x < 1.0)
    return 2.0 * std::numbers::inv_sqrtpi * detail::exp_neg_square(x) * detail::erf_scaled_series(x);
  if (x == kInf) return 1.0;
  return 1.0 - detail::erfcx_fraction(x) * detail::exp_neg_square(x);
}

// Scaled complementary error function e^{x^2} erfc(x).
inline double erfcx_eval(double x) {
  if (std::isnan(x)) throw DomainError("erfcx: NaN argument");
  if (x < 0.0) {
    // 2 e^{x^2} - erfcx(-x); overflows to +inf for very negative x.
    const double e = 1.0 / detail::exp_neg_square(x);
    return 2.0 * e - erfcx_eval(-x);
  }
  if (x < 1.0) {
    const double e = 1.0 / detail::exp_neg_square(x);
    return e - 2.0 * std::numbers::inv_sqrtpi * detail::erf_scaled_series(x);
  }
  if (x == kInf) return 0.0;
  return detail::erfcx_fraction(x);
}

inline double erfc_eval(double x) {
  if (std::isnan(x)) throw DomainError("erfc: NaN argument");
  if (x < 0.0) return 2.0 - erfc_eval(-x);
  if (x < 1.0) {
    return 1.0 - 2.0 * std::numbers::inv_sqrtpi * detail::exp_neg_square(x) *
                     detail::erf_scaled_series(x);
  }
  if (x == kInf) return 0.0;
  return detail::erfcx_fraction(x) * detail::exp_neg_square(x);
}

// ---------------------------------------------------------------------------
// tanh-sinh core

namespace detail {

struct TanhSinhNode {
  double s;  // distance from the nearer endpoint, as a fraction of (b - a)
  double w;  // weight per unit interval length, without the step h
};

inline constexpr double kTanhSinhTmax = 3.5;
inline constexpr int kTanhSinhTableLevels = 14;

inline TanhSinhNode tanh_sinh_node(double t) {
  const double u = std::numbers::pi / 2.0 * std::sinh(t);
  const double e = std::exp(-2.0 * u);
  const double ch = std::cosh(u);
  return {e / (1.0 + e), std::numbers::pi / 4.0 * std::cosh(t) / (ch * ch)};
}

// Non-negative abscissae added at each level: level 0 holds t = 0,1,2,3;
// level L >= 1 holds the odd multiples of 2^-L.
inline const std::vector<std::vector<TanhSinhNode>>& tanh_sinh_table() {
  static const std::vector<std::vector<TanhSinhNode>> table = [] {
    std::vector<std::vector<TanhSinhNode>> t(kTanhSinhTableLevels + 1);
    for (int k = 0; k <= static_cast<int>(kTanhSinhTmax); ++k)
      t[0].push_back(tanh_sinh_node(k));
    for (int L = 1; L <= kTanhSinhTableLevels; ++L) {
      const double h = std::ldexp(1.0, -L);
      for (long j = 1;; j += 2) {
        const double tt = j * h;
        if (tt > kTanhSinhTmax) break;
        t[L].push_back(tanh_sinh_node(tt));
      }
    }
    return t;
  }();
  return table;
}

template <std::size_t K>
struct TanhSinhResult {
  std::array<double, K> value{};
  std::array<double, K> error{};
  int levels = 0;
  long evaluations = 0;
};

// Integrates the array-valued g over the finite [a, b].  g receives the
// abscissa; components converge jointly.  The test for component k is
// |I_L - I_{L-1}| <= rel_tol * ||g_k||_1 + abs_tol.
template <std::size_t K, class G>
TanhSinhResult<K> tanh_sinh(G&& g, double a, double b, double rel_tol, double abs_tol,
                            int max_levels) {
  TanhSinhResult<K> r;
  const double len = b - a;
  if (!(len > 0.0)) return r;
  const auto& table = tanh_sinh_table();

  std::array<double, K> sum{}, l1{};
  auto add_node = [&](const TanhSinhNode& nd, bool symmetric) {
    auto acc = [&](double x) {
      const std::array<double, K> v = g(x);
      ++r.evaluations;
      for (std::size_t k = 0; k < K; ++k) {
        const double c = nd.w * v[k];
        sum[k] += c;
        l1[k] += std::fabs(c);
      }
    };
    if (!symmetric) {
      acc(a + 0.5 * len);
      return;
    }
    acc(a + nd.s * len);
    acc(b - nd.s * len);
  };
  auto level_nodes = [&](int L) -> std::vector<TanhSinhNode> {
    if (L <= kTanhSinhTableLevels) return table[L];
    std::vector<TanhSinhNode> nodes;
    const double h = std::ldexp(1.0, -L);
    for (long j = 1;; j += 2) {
      const double tt = j * h;
      if (tt > kTanhSinhTmax) break;
      nodes.push_back(tanh_sinh_node(tt));
    }
    return nodes;
  };

  const auto& lv0 = table[0];
  add_node(lv0[0], false);
  for (std::size_t i = 1; i < lv0.size(); ++i) add_node(lv0[i], true);

  // Once in the asymptotic regime the error roughly squares per level, so a
  // level difference well below sqrt(rel_tol) that is still shrinking fast
  // already certifies the current estimate.
  std::array<double, K> prev{}, prev_diff{};
  prev_diff.fill(kInf);
  for (std::size_t k = 0; k < K; ++k) prev[k] = sum[k] * len;
  const double fast = 1e-2 * std::sqrt(rel_tol);
  for (int L = 1; L <= max_levels; ++L) {
    for (const auto& nd : level_nodes(L)) add_node(nd, true);
    const double h = std::ldexp(1.0, -L);
    bool done = L >= 3;
    for (std::size_t k = 0; k < K; ++k) {
      const double cur = sum[k] * h * len;
      const double scale = l1[k] * h * len;
      const double diff = std::fabs(cur - prev[k]);
      const bool plain = diff <= rel_tol * scale + abs_tol;
      const bool quad = L >= 4 && diff <= fast * scale && diff <= 1e-2 * prev_diff[k];
      r.error[k] = plain ? diff : diff * diff / std::max(prev_diff[k], 1e-300);
      if (!plain && !quad) done = false;
      prev_diff[k] = diff;
      prev[k] = cur;
    }
    r.value = prev;
    r.levels = L;
    if (done) return r;
  }
  const double est = r.value[0];
  throw AccuracyError("tanh-sinh quadrature did not converge", est, r.error[0]);
}

struct PeakInfo {
  double t = 0.0;
  double value = -kInf;
  bool at_lo = false;
  bool at_hi = false;
};

template <class L>
double checked_eval(L& ell, double t) {
  const double v = ell(t);
  if (std::isnan(v)) throw DomainError("log integrand returned NaN");
  if (v == kInf) throw DomainError("log integrand returned +inf");
  return v;
}

// Brent's parabolic/golden maximizer on [a, b] given an interior x with
// f(x) >= f(a), f(b).
template <class L>
PeakInfo refine_peak(L& ell, double a, double x, double b, double fx, double xtol_rel) {
  constexpr double cgold = 0.3819660112501051;
  double v = x, w = x, fv = fx, fw = fx;
  double d = 0.0, e = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = xtol_rel * (std::fabs(x) + 1.0) + 1e-300;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::fabs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double etemp = e;
      e = d;
      if (!(std::fabs(p) >= std::fabs(0.5 * q * etemp) || p <= q * (a - x) || p >= q * (b - x))) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (xm - x >= 0.0) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= xm) ? a - x : b - x;
      d = cgold * e;
    }
    const double u = (std::fabs(d) >= tol1) ? x + d : x + (d >= 0.0 ? tol1 : -tol1);
    const double fu = checked_eval(ell, u);
    // maximizing: compare with reversed sign
    if (fu >= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu >= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu >= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, false, false};
}

// Locates the maximum of a unimodal log integrand on [lo, hi].
template <class L>
PeakInfo locate_peak(L& ell, double lo, double hi, std::optional<double> hint) {
  double x;
  if (hint) {
    x = std::clamp(*hint, lo, hi);
  } else if (std::isfinite(lo) && std::isfinite(hi)) {
    x = 0.5 * (lo + hi);
  } else if (std::isfinite(lo)) {
    x = lo + 1.0;
  } else if (std::isfinite(hi)) {
    x = hi - 1.0;
  } else {
    x = 0.0;
  }
  double fx = checked_eval(ell, x);
  double step = 0.25 * std::max(1.0, std::fabs(x)) * 1e-2 + 0.05;
  if (std::isfinite(lo) && std::isfinite(hi)) step = std::min(step, 0.25 * (hi - lo));

  // -inf at the start point: walk towards the interior of the domain.
  if (fx == -kInf) {
    for (int i = 0; i < 200 && fx == -kInf; ++i) {
      double nx = x + step;
      if (nx > hi) nx = 0.5 * (x + hi);
      x = nx;
      fx = checked_eval(ell, x);
      step *= 1.5;
    }
    if (fx == -kInf) throw DomainError("log integrand is -inf everywhere probed");
    step = 0.05 + 1e-2 * std::fabs(x);
  }

  auto clampd = [&](double t) { return std::clamp(t, lo, hi); };
  const double xp = clampd(x + step), xn = clampd(x - step);
  const double fp = (xp == x) ? -kInf : checked_eval(ell, xp);
  const double fn = (xn == x) ? -kInf : checked_eval(ell, xn);

  double a, b;
  if (fp <= fx && fn <= fx) {
    if (xp == x && fp == -kInf) return {x, fx, false, true};
    if (xn == x && fn == -kInf) return {x, fx, true, false};
    a = xn;
    b = xp;
  } else {
    const double dir = (fp > fn) ? 1.0 : -1.0;
    double prev = x, cur = dir > 0 ? xp : xn, fcur = dir > 0 ? fp : fn;
    double s = step;
    for (int i = 0;; ++i) {
      if (i > 400) throw AccuracyError("log integrand does not decay", kNaN, kInf);
      s *= 1.6;
      const double nxt = clampd(cur + dir * s);
      if (nxt == cur) return {cur, fcur, dir < 0, dir > 0};
      const double fnxt = checked_eval(ell, nxt);
      if (fnxt < fcur) {
        a = std::min(prev, nxt);
        b = std::max(prev, nxt);
        x = cur;
        fx = fcur;
        break;
      }
      prev = cur;
      cur = nxt;
      fcur = fnxt;
    }
  }
  return refine_peak(ell, a, x, b, fx, 1e-9);
}

// Rough Gaussian width of the peak: 1/sqrt(-l''), with fallbacks for kinks,
// flat tops and peaks sitting on a domain edge.
template <class L>
double peak_scale(L& ell, const PeakInfo& pk, double lo, double hi) {
  auto curvature = [&](double h) {
    const double a = std::max(lo, pk.t - h), b = std::min(hi, pk.t + h);
    if (pk.t - a < 0.5 * h || b - pk.t < 0.5 * h) return kNaN;
    const double fa = checked_eval(ell, a), fb = checked_eval(ell, b);
    const double ha = pk.t - a, hb = b - pk.t;
    return -2.0 * (fa * hb + fb * ha - pk.value * (ha + hb)) / (ha * hb * (ha + hb));
  };
  if (!pk.at_lo && !pk.at_hi) {
    double h = 1e-3 * (1.0 + std::fabs(pk.t));
    double k = curvature(h);
    if (std::isfinite(k) && k > 0.0) {
      const double h2 = 0.1 / std::sqrt(k);
      const double k2 = curvature(h2);
      if (std::isfinite(k2) && k2 > 0.0) k = k2;
      return std::clamp(1.0 / std::sqrt(k), 1e-10, 1e10);
    }
  }
  // Edge peak: decay rate from the one-sided slope, or from the one-sided
  // curvature when the edge sits next to a stationary point.
  const double h = 1e-3 * (1.0 + std::fabs(pk.t));
  const double dir = pk.at_hi ? -1.0 : 1.0;
  const double t2 = pk.t + dir * h, t3 = pk.t + 2.0 * dir * h;
  if (t2 >= lo && t2 <= hi) {
    const double f2 = checked_eval(ell, t2);
    double rate = std::fabs(f2 - pk.value) / h;
    if (t3 >= lo && t3 <= hi) {
      const double f3 = checked_eval(ell, t3);
      const double k = -(pk.value - 2.0 * f2 + f3) / (h * h);
      if (k > 0.0 && std::isfinite(k)) rate = std::max(rate, std::sqrt(k));
    }
    if (rate > 0.0 && std::isfinite(rate)) return std::clamp(1.0 / rate, 1e-10, 1e10);
  }
  return 1.0;
}

}  // namespace detail

// Result of a log-domain quadrature.  Moments are about the origin of the
// integration variable: mean = int t e^l / int e^l, variance likewise.
struct LogQuadrature {
  double log_value = -kInf;
  double mean = kNaN;
  double variance = kNaN;
  double rel_error = 0.0;
  double peak = kNaN;
  long evaluations = 0;

  double value() const { return std::exp(log_value); }
};

namespace detail {

template <std::size_t K, class L>
LogQuadrature integrate_log_impl(L&& ell, Interval dom, const QuadratureConfig& cfg,
                                 std::span<const double> breakpoints) {
  cfg.validate();
  if (std::isnan(dom.lo) || std::isnan(dom.hi) || !(dom.lo < dom.hi)) {
    if (dom.lo == dom.hi) return LogQuadrature{};
    throw DomainError("integrate_log_domain: empty or invalid interval");
  }
  long evals = 0;
  auto counted = [&](double t) {
    ++evals;
    return ell(t);
  };

  const PeakInfo pk = locate_peak(counted, dom.lo, dom.hi, cfg.peak_hint);
  const double peak = pk.value;
  if (peak == -kInf) return LogQuadrature{};
  const double sigma = peak_scale(counted, pk, dom.lo, dom.hi);

  // window, then widen each side until the edge has dropped far enough
  const double half = cfg.window_halfwidth_factor * sigma;
  double wlo = std::max(dom.lo, pk.t - half);
  double whi = std::min(dom.hi, pk.t + half);
  const double log_abs = std::log(cfg.abs_tol);
  for (int side = 0; side < 2; ++side) {
    double& edge = side == 0 ? wlo : whi;
    const double bound = side == 0 ? dom.lo : dom.hi;
    for (int it = 0;; ++it) {
      if (edge == bound) break;
      const double f = checked_eval(counted, edge);
      if (f <= peak + log_abs - std::log(whi - wlo)) break;
      if (it > 80)
        throw AccuracyError("integrand does not decay within the window", kNaN, kInf);
      const double dist = std::fabs(edge - pk.t) * 2.0;
      edge = side == 0 ? std::max(bound, pk.t - dist) : std::min(bound, pk.t + dist);
    }
  }

  std::vector<double> cuts{wlo};
  if (pk.t > wlo && pk.t < whi) cuts.push_back(pk.t);
  for (double bp : breakpoints)
    if (bp > wlo && bp < whi) cuts.push_back(bp);
  cuts.push_back(whi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double t0 = pk.t;
  auto g = [&](double t) {
    std::array<double, K> v{};
    const double l = checked_eval(ell, t);
    const double e = std::exp(l - peak);
    double p = e;
    for (std::size_t k = 0; k < K; ++k) {
      v[k] = p;
      p *= (t - t0);
    }
    return v;
  };

  std::array<double, K> tot{}, err{};
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    TanhSinhResult<K> r;
    try {
      r = tanh_sinh<K>(g, cuts[i], cuts[i + 1], cfg.rel_tol, cfg.abs_tol, cfg.max_refinements);
    } catch (const AccuracyError& ex) {
      const double est = std::log(std::max(tot[0] + ex.estimate(), 1e-300)) + peak;
      throw AccuracyError("integrate_log_domain: no convergence after max_refinements", est,
                          ex.error_bound() / std::max(tot[0] + ex.estimate(), 1e-300));
    }
    evals += r.evaluations;
    for (std::size_t k = 0; k < K; ++k) {
      tot[k] += r.value[k];
      err[k] += r.error[k];
    }
  }

  LogQuadrature out;
  out.peak = t0;
  out.evaluations = evals;
  if (!(tot[0] > 0.0)) {
    out.log_value = -kInf;
    return out;
  }
  out.log_value = peak + std::log(tot[0]);
  out.rel_error = err[0] / tot[0];
  if constexpr (K >= 2) out.mean = t0 + tot[1] / tot[0];
  if constexpr (K >= 3) {
    const double m1 = tot[1] / tot[0];
    out.variance = std::max(0.0, tot[2] / tot[0] - m1 * m1);
  }
  return out;
}

}  // namespace detail

// int_dom e^{log_integrand(t)} dt, returned on the log scale together with
// diagnostics.  Breakpoints mark kinks of the integrand.
template <class L>
LogQuadrature integrate_log_domain_detailed(L&& log_integrand, Interval dom,
                                            const QuadratureConfig& cfg = {},
                                            std::span<const double> breakpoints = {}) {
  return detail::integrate_log_impl<1>(log_integrand, dom, cfg, breakpoints);
}

template <class L>
double integrate_log_domain(L&& log_integrand, Interval dom, const QuadratureConfig& cfg = {},
                            std::span<const double> breakpoints = {}) {
  return integrate_log_domain_detailed(log_integrand, dom, cfg, breakpoints).value();
}

// Mass, mean and variance of the density proportional to e^{log_integrand}.
template <class L>
LogQuadrature log_moments(L&& log_integrand, Interval dom, const QuadratureConfig& cfg = {},
                          std::span<const double> breakpoints = {}) {
  return detail::integrate_log_impl<3>(log_integrand, dom, cfg, breakpoints);
}

// ---------------------------------------------------------------------------
// root finding

struct BracketedFunction {
  std::function<double(double)> evaluator;
  double lo = 0.0;
  double hi = 0.0;
};

// Brent's zeroin.  The bracket is put in ascending order first, so swapping
// the endpoints gives the same answer bit for bit.
inline double find_root(const BracketedFunction& fn, double tol) {
  if (!(tol > 0.0)) throw DomainError("find_root: tol must be positive");
  double a = std::min(fn.lo, fn.hi), b = std::max(fn.lo, fn.hi);
  if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("find_root: bracket must be finite");
  double fa = fn.evaluator(a), fb = fn.evaluator(b);
  if (std::isnan(fa) || std::isnan(fb)) throw DomainError("find_root: NaN at bracket endpoint");
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0))
    throw DomainError("find_root: endpoints do not bracket a sign change");

  constexpr double eps = std::numeric_limits<double>::epsilon();
  double c = a, fc = fa, d = b - a, e = d;
  for (int it = 0; it < 500; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * eps * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = fn.evaluator(b);
    if (std::isnan(fb)) throw DomainError("find_root: NaN inside bracket");
  }
  throw NonConvergenceError("find_root: iteration limit", std::fabs(fb));
}

// ---------------------------------------------------------------------------
// central differences with one Richardson step

enum class DiffScheme { kOrder2, kOrder4 };

struct Derivative {
  double value = kNaN;
  double step = kNaN;
  double error_estimate = kNaN;
};

template <class F>
Derivative differentiate_central(F&& f, double x, DiffScheme scheme = DiffScheme::kOrder4,
                                 double step = 0.0) {
  if (!std::isfinite(x)) throw DomainError("differentiate_central: non-finite x");
  const bool o4 = scheme == DiffScheme::kOrder4;
  double h = step > 0.0 ? step : (o4 ? 1e-2 : 1e-3) * std::max(1.0, std::fabs(x));
  auto sample = [&](double y) {
    const double v = f(y);
    if (!std::isfinite(v)) throw DomainError("differentiate_central: non-finite sample");
    return v;
  };
  auto D = [&](double hh) {
    if (o4) {
      return (-sample(x + 2 * hh) + 8.0 * sample(x + hh) - 8.0 * sample(x - hh) +
              sample(x - 2 * hh)) /
             (12.0 * hh);
    }
    return (sample(x + hh) - sample(x - hh)) / (2.0 * hh);
  };
  const double d1 = D(h), d2 = D(0.5 * h);
  const double k = o4 ? 16.0 : 4.0;
  const double rich = (k * d2 - d1) / (k - 1.0);
  return {rich, h, std::fabs(rich - d2)};
}

// ---------------------------------------------------------------------------
// golden-section search

struct Minimum {
  double x = kNaN;
  double value = kNaN;
};

template <class F>
Minimum golden_section_minimize(F&& f, double lo, double hi, double tol) {
  if (!(lo <= hi)) throw DomainError("golden_section_minimize: invalid interval");
  if (!(tol > 0.0)) throw DomainError("golden_section_minimize: tol must be positive");
  constexpr double r = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  Minimum best = f1 <= f2 ? Minimum{x1, f1} : Minimum{x2, f2};
  const double fa = f(lo), fb = f(hi);
  if (fa < best.value) best = {lo, fa};
  if (fb < best.value) best = {hi, fb};
  return best;
}

}  // namespace balmet
