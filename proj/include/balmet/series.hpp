#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"

namespace balmet {

// f(x) = sum_i e^{-lambda_i} x^i truncated at i = N, together with the cone
// parameter beta it was built for.  lambda_i = +inf marks an absent term.
class CoefficientSequence {
 public:
  CoefficientSequence(double beta, std::vector<double> lambdas)
      : beta_(beta), lambdas_(std::move(lambdas)) {
    if (!(beta_ >= 0.0 && beta_ < 1.0))
      throw DomainError("CoefficientSequence: beta must lie in [0, 1)");
    if (lambdas_.empty()) throw DomainError("CoefficientSequence: no coefficients");
    bool any = false;
    for (double l : lambdas_) {
      if (std::isnan(l) || l == -kInf)
        throw DomainError("CoefficientSequence: lambda must be finite or +inf");
      any = any || std::isfinite(l);
    }
    if (!any) throw DomainError("CoefficientSequence: all coefficients vanish");
  }

  // lambda_i = log i!, i.e. f = e^x truncated.
  static CoefficientSequence factorial(int order, double beta = 0.0) {
    if (order < 0) throw DomainError("factorial sequence: negative order");
    std::vector<double> l(order + 1);
    for (int i = 0; i <= order; ++i) l[i] = std::lgamma(i + 1.0);
    return CoefficientSequence(beta, std::move(l));
  }

  double beta() const noexcept { return beta_; }
  int order() const noexcept { return static_cast<int>(lambdas_.size()) - 1; }
  const std::vector<double>& lambdas() const noexcept { return lambdas_; }
  double lambda(int i) const { return lambdas_.at(i); }
  double coefficient(int i) const { return std::exp(-lambdas_.at(i)); }

  // Multiplies every coefficient by e^{log_scale}.
  CoefficientSequence rescaled(double log_scale) const {
    std::vector<double> l = lambdas_;
    for (double& v : l) v -= log_scale;
    return CoefficientSequence(beta_, std::move(l));
  }

  // Shifts so that lambda_0 = 0 (f(0) = 1).
  CoefficientSequence normalized() const {
    if (!std::isfinite(lambdas_[0]))
      throw DomainError("CoefficientSequence: cannot normalize with c_0 = 0");
    return rescaled(lambdas_[0]);
  }

  bool all_finite() const {
    return std::all_of(lambdas_.begin(), lambdas_.end(), [](double l) { return std::isfinite(l); });
  }

 private:
  double beta_;
  std::vector<double> lambdas_;
};

struct ConcentrationProfile {
  double x = kNaN;
  double t = kNaN;
  double log_f = kNaN;
  double u = kNaN;
  double index_variance = kNaN;
  double weights_center = kNaN;
};

struct ContinuousCoefficient {
  double a = kNaN;
  double c_of_a = kNaN;
  double lambda_of_a = kNaN;
  double lambda_prime = kNaN;
  double lambda_second = kNaN;
};

struct PeakData {
  double a = kNaN;
  double x_a = kNaN;
  double x_tilde_a = kNaN;
  double h_a_at_xa = kNaN;
  double n_x = kNaN;
  double delta_a = kNaN;
};

namespace detail {

struct LogFStats {
  double log_f = -kInf;
  double u = 0.0;
  double var = 0.0;
};

// Terms more than this far below the largest one are dropped; e^-40 times
// a few hundred terms is far below double resolution.
inline constexpr double kTermCut = 40.0;

// log f(e^t) and the index-weight moments, evaluated from the dominant term
// outwards with the coefficient ratios c_{i+1}/c_i, so a call costs one exp
// instead of one per term.  Built once per sequence for hot loops.
class LogFKernel {
 public:
  explicit LogFKernel(const std::vector<double>& lam) : lam_(lam), ratio_(lam.size(), 0.0) {
    for (std::size_t i = 0; i + 1 < lam.size(); ++i) {
      const bool fin = std::isfinite(lam[i]) && std::isfinite(lam[i + 1]);
      ratio_[i] = fin ? std::exp(lam[i] - lam[i + 1]) : 0.0;
      finite_ = finite_ && fin && std::isnormal(ratio_[i]) && std::isfinite(ratio_[i]);
    }
    finite_ = finite_ && std::isfinite(lam.back());
  }

  double log_f(double t) const { return eval(t, false).log_f; }
  LogFStats stats(double t) const { return eval(t, true); }

 private:
  std::size_t argmax(double t, double& mx) const {
    mx = -kInf;
    std::size_t im = 0;
    for (std::size_t i = 0; i < lam_.size(); ++i) {
      const double v = static_cast<double>(i) * t - lam_[i];
      if (v > mx) {
        mx = v;
        im = i;
      }
    }
    return im;
  }

  LogFStats eval(double t, bool moments) const {
    double mx;
    const std::size_t im = argmax(t, mx);
    LogFStats st;
    if (mx == -kInf) return st;
    const std::size_t n = lam_.size();
    double s = 1.0, s1 = 0.0, s2 = 0.0;
    const double et = std::exp(t), ie = std::exp(-t);
    if (finite_ && std::isnormal(et) && std::isnormal(ie)) {
      double w = 1.0;
      for (std::size_t i = im + 1; i < n; ++i) {
        w *= et * ratio_[i - 1];
        if (w < 1e-300) break;
        const double d = static_cast<double>(i - im);
        s += w;
        if (moments) {
          s1 += w * d;
          s2 += w * d * d;
        }
      }
      w = 1.0;
      for (std::size_t i = im; i-- > 0;) {
        w *= ie / ratio_[i];
        if (w < 1e-300) break;
        const double d = -static_cast<double>(im - i);
        s += w;
        if (moments) {
          s1 += w * d;
          s2 += w * d * d;
        }
      }
    } else {
      s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(i) * t - lam_[i] - mx;
        if (v <= -kTermCut) continue;
        const double w = std::exp(v);
        const double d = static_cast<double>(i) - static_cast<double>(im);
        s += w;
        s1 += w * d;
        s2 += w * d * d;
      }
    }
    st.log_f = mx + std::log(s);
    if (moments) {
      const double m1 = s1 / s;
      st.u = static_cast<double>(im) + m1;
      st.var = std::max(0.0, s2 / s - m1 * m1);
    }
    return st;
  }

  const std::vector<double>& lam_;
  std::vector<double> ratio_;
  bool finite_ = true;
};

inline double log_f_at(const std::vector<double>& lam, double t) {
  const std::size_t n = lam.size();
  double mx = -kInf;
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, static_cast<double>(i) * t - lam[i]);
  if (mx == -kInf) return -kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(i) * t - lam[i] - mx;
    if (v > -kTermCut) s += std::exp(v);
  }
  return mx + std::log(s);
}

// Shape-preserving cubic Hermite interpolation through (i, y_i), i = 0..n-1.
class MonotoneCubic {
 public:
  explicit MonotoneCubic(std::vector<double> y) : y_(std::move(y)) {
    const std::size_t n = y_.size();
    if (n < 2) throw DomainError("MonotoneCubic: need at least two knots");
    for (double v : y_)
      if (!std::isfinite(v)) throw DomainError("MonotoneCubic: non-finite knot value");
    std::vector<double> del(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) del[i] = y_[i + 1] - y_[i];
    d_.assign(n, 0.0);
    if (n == 2) {
      d_[0] = d_[1] = del[0];
      return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double a = del[i - 1], b = del[i];
      if (a * b > 0.0) d_[i] = 2.0 / (1.0 / a + 1.0 / b);
    }
    auto edge = [](double d0, double d1) {
      double d = 0.5 * (3.0 * d0 - d1);
      if ((d > 0.0) != (d0 > 0.0) || d0 == 0.0) return 0.0;
      if ((d0 > 0.0) != (d1 > 0.0) && std::fabs(d) > 3.0 * std::fabs(d0)) d = 3.0 * d0;
      return d;
    };
    d_[0] = edge(del[0], del[1]);
    d_[n - 1] = edge(del[n - 2], del[n - 3]);
  }

  double operator()(double x) const { return eval(x, false); }
  double derivative(double x) const { return eval(x, true); }
  double upper() const { return static_cast<double>(y_.size() - 1); }

 private:
  double eval(double x, bool deriv) const {
    if (!(x >= 0.0 && x <= upper())) throw RangeError("MonotoneCubic: argument outside knots");
    std::size_t i = std::min(static_cast<std::size_t>(x), y_.size() - 2);
    const double s = x - static_cast<double>(i);
    const double y0 = y_[i], y1 = y_[i + 1], d0 = d_[i], d1 = d_[i + 1];
    if (deriv) {
      const double s2 = s * s;
      return (6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * d0 + (-6 * s2 + 6 * s) * y1 +
             (3 * s2 - 2 * s) * d1;
    }
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * y1 +
           (s3 - s2) * d1;
  }

  std::vector<double> y_, d_;
};

}  // namespace detail

inline double eval_log_f(const CoefficientSequence& seq, double x) {
  if (std::isnan(x) || x < 0.0) throw DomainError("eval_log_f: x must be >= 0");
  if (x == 0.0) return -seq.lambda(0);
  return detail::log_f_at(seq.lambdas(), std::log(x));
}

inline ConcentrationProfile eval_profile(const CoefficientSequence& seq, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("eval_profile: x must be > 0");
  const double t = std::log(x);
  const auto st = detail::LogFKernel(seq.lambdas()).stats(t);
  return {x, t, st.log_f, st.u, st.var, st.u};
}

// tau_x(i) = c_i x^i / f(x).
inline std::vector<double> index_weights(const CoefficientSequence& seq, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("index_weights: x must be > 0");
  const double t = std::log(x);
  const double lf = detail::log_f_at(seq.lambdas(), t);
  std::vector<double> w(seq.lambdas().size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::exp(static_cast<double>(i) * t - seq.lambdas()[i] - lf);
  return w;
}

// Largest a for which int x^a / f dx is governed by the kept terms.
inline double safe_index_max(const CoefficientSequence& seq) {
  const double n = seq.order();
  return n - 4.0 * std::sqrt(n);
}

inline ContinuousCoefficient continuous_coefficient(const CoefficientSequence& seq, double a,
                                                    const QuadratureConfig& cfg = {}) {
  if (std::isnan(a) || a < 0.0) throw DomainError("continuous_coefficient: a must be >= 0");
  const double amax = safe_index_max(seq);
  if (a > amax)
    throw RangeError("continuous_coefficient: a = " + std::to_string(a) +
                     " exceeds the safe maximum " + std::to_string(amax));
  const detail::LogFKernel kern(seq.lambdas());
  auto ell = [&kern, a](double t) { return (a + 1.0) * t - kern.log_f(t); };
  QuadratureConfig c = cfg;
  if (!c.peak_hint) c.peak_hint = std::log(a + 1.0);
  const LogQuadrature q = log_moments(ell, Interval{}, c);
  if (!(q.variance > 0.0))
    throw AccuracyError("continuous_coefficient: non-positive lambda''", q.variance, q.rel_error);
  // int x^a/f dx = e^{-lambda(a)}^{-1}
  return {a, std::exp(-q.log_value), q.log_value, q.mean, q.variance};
}

// t = log x_a, the point where u(x) = a.
inline double solve_u_equals(const CoefficientSequence& seq, double a) {
  const int n = seq.order();
  if (!(a > 0.0) || !(a < n))
    throw RangeError("u(x) = a has no solution: need 0 < a < N = " + std::to_string(n));
  const detail::LogFKernel kern(seq.lambdas());
  auto du = [&kern, a](double t) { return kern.stats(t).u - a; };
  double lo = std::log(a) - 1.0, hi = std::log(a + 1.0) + 1.0;
  for (int i = 0; du(lo) > 0.0; ++i) {
    if (i > 200) throw RangeError("u(x) = a: lower bracket not found");
    lo -= std::ldexp(1.0, i);
  }
  for (int i = 0; du(hi) < 0.0; ++i) {
    if (i > 60) throw RangeError("u(x) = a: upper bracket not found (a too close to N)");
    hi += std::ldexp(1.0, i);
  }
  return find_root({du, lo, hi}, 1e-14);
}

inline PeakData peak_data(const CoefficientSequence& seq, double a,
                          const QuadratureConfig& cfg = {}) {
  if (!seq.all_finite()) throw DomainError("peak_data: sequence has vanishing coefficients");
  const ContinuousCoefficient cc = continuous_coefficient(seq, a, cfg);
  const double ta = solve_u_equals(seq, a);
  PeakData pd;
  pd.a = a;
  pd.x_a = std::exp(ta);
  pd.x_tilde_a = std::exp(cc.lambda_prime);
  pd.h_a_at_xa = std::exp(detail::log_f_at(seq.lambdas(), ta) - a * ta + cc.lambda_of_a);

  // n_x: maximizer of n log x - lambda(n) on the interpolated lambda
  const detail::MonotoneCubic lam(seq.lambdas());
  const int n = seq.order();
  int i = 0;
  while (i < n && seq.lambda(i + 1) - seq.lambda(i) <= ta) ++i;
  const double lo = std::max(0, i - 2), hi = std::min(n, i + 2);
  auto dF = [&](double v) { return ta - lam.derivative(v); };
  double nx;
  if (dF(lo) > 0.0 && dF(hi) < 0.0) {
    nx = find_root({dF, lo, hi}, 1e-12);
  } else {
    nx = golden_section_minimize([&](double v) { return lam(v) - v * ta; }, lo, hi, 1e-10).x;
  }
  pd.n_x = nx;
  pd.delta_a = std::exp(lam(a) - lam(nx) + (nx - a) * ta);
  return pd;
}

struct AsymptoticRow {
  double a = kNaN;
  double x_a = kNaN;
  double u_residual = kNaN;      // u(x_a)/a - 1, from the root solve
  double a_lambda2 = kNaN;       // a lambda''(a)
  double variance_ratio = kNaN;  // index_variance(x_a) / x_a
  double h_over_sqrt_a = kNaN;
  double xa_minus_a = kNaN;
  double xa_scaled = kNaN;  // (x_a - a) / (sqrt(a) log a)
  double t_gap = kNaN;      // t~_a - t_{a+1}
  double t_gap_scaled = kNaN;
  double f_ratio = kNaN;  // f(x~)/(c_[a] x~^[a] sqrt(2 pi x~))
  double dxtilde_da = kNaN;
};

inline AsymptoticRow asymptotic_row(const CoefficientSequence& seq, double a,
                                    const QuadratureConfig& cfg = {}) {
  const PeakData pd = peak_data(seq, a, cfg);
  const ContinuousCoefficient cc = continuous_coefficient(seq, a, cfg);
  AsymptoticRow r;
  r.a = a;
  r.x_a = pd.x_a;
  const auto prof = eval_profile(seq, pd.x_a);
  r.u_residual = prof.u / a - 1.0;
  r.a_lambda2 = a * cc.lambda_second;
  r.variance_ratio = prof.index_variance / pd.x_a;
  r.h_over_sqrt_a = pd.h_a_at_xa / std::sqrt(a);
  r.xa_minus_a = pd.x_a - a;
  r.xa_scaled = (pd.x_a - a) / (std::sqrt(a) * std::log(a));
  const double t_next = solve_u_equals(seq, a + 1.0);
  r.t_gap = cc.lambda_prime - t_next;
  r.t_gap_scaled = std::sqrt(a) * r.t_gap;
  const int fa = static_cast<int>(std::floor(a));
  const double xt = pd.x_tilde_a;
  r.f_ratio = std::exp(eval_log_f(seq, xt) + seq.lambda(fa) - fa * std::log(xt) -
                       0.5 * std::log(2.0 * std::numbers::pi * xt));
  const double h = std::min(0.5, 0.25 * std::max(1e-3, safe_index_max(seq) - a));
  r.dxtilde_da = differentiate_central(
                     [&](double s) { return std::exp(continuous_coefficient(seq, s, cfg).lambda_prime); },
                     a, DiffScheme::kOrder2, h)
                     .value;
  return r;
}

inline std::vector<AsymptoticRow> asymptotic_report(const CoefficientSequence& seq,
                                                    const std::vector<double>& a_grid,
                                                    const QuadratureConfig& cfg = {}) {
  std::vector<AsymptoticRow> rows;
  rows.reserve(a_grid.size());
  for (double a : a_grid) rows.push_back(asymptotic_row(seq, a, cfg));
  return rows;
}

}  // namespace balmet
