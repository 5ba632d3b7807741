#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "balmet/dominating.hpp"
#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"
#include "balmet/parallel.hpp"
#include "balmet/two_sided.hpp"

namespace balmet {

struct IterationState {
  double m = kNaN;
  double m_prime = kNaN;
  double p = kNaN, p_prime = kNaN;
  double q = kNaN, q_prime = kNaN;
  int iter = 0;
};

struct RefinedState {
  double m = kNaN;
  double p = kNaN;
  double q = kNaN;  // q(m) minus the two-sided correction
  double alpha = kNaN;
  double H = kNaN, Q = kNaN, I = kNaN;
  int iter = 0;
};

// The iteration stopped shrinking the band.  Keeps whatever trajectory was
// produced so far.
class NonContraction : public NonConvergenceError {
 public:
  NonContraction(const std::string& what, double last, std::vector<IterationState> coarse,
                 std::vector<RefinedState> refined = {})
      : NonConvergenceError(what, last), coarse_(std::move(coarse)), refined_(std::move(refined)) {}

  const std::vector<IterationState>& coarse() const noexcept { return coarse_; }
  const std::vector<RefinedState>& refined() const noexcept { return refined_; }

 private:
  std::vector<IterationState> coarse_;
  std::vector<RefinedState> refined_;
};

// ---------------------------------------------------------------------------
// coarse stage

// Which ratio feeds q-bar-prime: the update m-bar-prime (default) or m-bar as
// printed.
enum class QBarConvention { kPrimed, kLiteral };

struct CoarseOptions {
  double epsilon = 1e-6;
  int max_iter = 200;
  double stop_ratio = 1.01;
  QBarConvention convention = QBarConvention::kPrimed;
  unsigned threads = 0;
};

struct CoarseUpdate {
  double m_bar = kNaN;
  double m_bar_prime = kNaN;
};

inline CoarseUpdate coarse_update(const IterationState& s, double epsilon) {
  const double r = s.p / s.q, rp = s.p_prime / s.q_prime;
  CoarseUpdate u;
  u.m_bar = rp * std::sqrt(r * rp) + epsilon;
  u.m_bar_prime = r * rp / (2.0 * std::numbers::pi * s.q) + epsilon;
  return u;
}

struct CoarseResult {
  std::vector<IterationState> trajectory;  // trajectory[0] is the initial state
  bool reached = false;                    // m, m' < stop_ratio
  int iterations() const { return static_cast<int>(trajectory.size()) - 1; }
};

namespace detail {

inline double cache_key(double m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.11e", m);
  return std::strtod(buf, nullptr);
}

// p(m) and q_tilde(m), memoized on m rounded to 12 significant digits.
class ExtremalCache {
 public:
  double p(double m) { return lookup(p_, m); }
  double q(double m) { return lookup(q_, m); }

  // fills both tables for the given ratios, computing misses in parallel
  void prefetch(const std::vector<double>& ps, const std::vector<double>& qs, unsigned threads) {
    struct Job {
      bool is_p;
      double key;
      double value;
    };
    std::vector<Job> jobs;
    auto want = [&](bool is_p, double m) {
      const double k = cache_key(std::max(1.0, m));
      auto& table = is_p ? p_ : q_;
      if (table.count(k)) return;
      for (const auto& j : jobs)
        if (j.is_p == is_p && j.key == k) return;
      jobs.push_back({is_p, k, kNaN});
    };
    for (double m : ps) want(true, m);
    for (double m : qs) want(false, m);
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
      Job& j = jobs[i];
      j.value = j.is_p ? 0.25 * extremize_d(1.0 / j.key).d_raw : qtilde_extremize(j.key).q_tilde;
    });
    for (const auto& j : jobs) (j.is_p ? p_ : q_)[j.key] = j.value;
  }

 private:
  double lookup(std::map<double, double>& table, double m) {
    const double k = cache_key(std::max(1.0, m));
    auto it = table.find(k);
    if (it != table.end()) return it->second;
    const double v = &table == &p_ ? 0.25 * extremize_d(1.0 / k).d_raw : qtilde_extremize(k).q_tilde;
    table[k] = v;
    return v;
  }

  std::map<double, double> p_, q_;
};

}  // namespace detail

// Band narrowing from an initial state.  Ratios below 1 (possible only
// through rounding) are evaluated at 1.
inline CoarseResult coarse_iterate(const IterationState& init, const CoarseOptions& opt = {}) {
  if (!(opt.epsilon >= 0.0)) throw DomainError("coarse_iterate: epsilon must be >= 0");
  if (opt.max_iter < 1) throw DomainError("coarse_iterate: max_iter must be >= 1");
  for (double v : {init.p, init.p_prime, init.q, init.q_prime})
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("coarse_iterate: p, p', q, q' must be positive");
  CoarseResult out;
  out.trajectory.push_back(init);
  out.trajectory.back().iter = 0;
  detail::ExtremalCache cache;
  int rising = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    const IterationState& s = out.trajectory.back();
    const CoarseUpdate u = coarse_update(s, opt.epsilon);
    if (!std::isfinite(u.m_bar) || !std::isfinite(u.m_bar_prime))
      throw NonContraction("coarse_iterate: ratio overflowed", u.m_bar, out.trajectory);
    const double mq = opt.convention == QBarConvention::kPrimed ? u.m_bar_prime : u.m_bar;
    cache.prefetch({u.m_bar, u.m_bar_prime}, {u.m_bar, mq}, opt.threads);
    IterationState n;
    n.iter = it;
    n.m = u.m_bar;
    n.m_prime = u.m_bar_prime;
    n.p = cache.p(u.m_bar);
    n.p_prime = cache.p(u.m_bar_prime);
    n.q = cache.q(u.m_bar);
    n.q_prime = cache.q(mq);
    rising = (it > 1 && n.m > s.m) ? rising + 1 : 0;
    out.trajectory.push_back(n);
    if (rising >= 5)
      throw NonContraction("coarse_iterate: m increased for 5 consecutive steps", n.m,
                           out.trajectory);
    if (n.m < opt.stop_ratio && n.m_prime < opt.stop_ratio) {
      out.reached = true;
      break;
    }
  }
  return out;
}

// The starting point used for the main theorem: ratios 1e10, p = 2, q = 1/12.
inline IterationState standard_initial_state() {
  IterationState s;
  s.m = s.m_prime = 1e10;
  s.p = s.p_prime = 2.0;
  s.q = s.q_prime = 1.0 / 12.0;
  return s;
}

// iter, m, m', p, p', q, q' with 12 significant digits
inline void write_trajectory(std::ostream& os, const std::vector<IterationState>& t,
                             char delim = ',') {
  os << "iter" << delim << "m" << delim << "m_prime" << delim << "p" << delim << "p_prime"
     << delim << "q" << delim << "q_prime" << '\n';
  char buf[256];
  for (const auto& s : t) {
    std::snprintf(buf, sizeof buf, "%d%c%.12g%c%.12g%c%.12g%c%.12g%c%.12g%c%.12g", s.iter, delim,
                  s.m, delim, s.m_prime, delim, s.p, delim, s.p_prime, delim, s.q, delim,
                  s.q_prime);
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// refined stage: m -> F(m) H(m)^{-2} Q(m) + eps near m = 1

inline RefinedState refined_state(double m) {
  if (!(m >= 0.99 && m <= 1.01)) throw DomainError("refined_state: m must lie in [0.99, 1.01]");
  RefinedState s;
  s.m = m;
  s.alpha = 1.0 / std::sqrt(m);
  const double qm = q_branch(m);
  s.p = p_branch(m);
  s.q = qm - qtilde_correction(m);
  const double F = (s.p / qm) * (s.p / qm);
  s.H = 1.0 - qtilde_correction(m) / qm;
  const double om = 1.0 - s.alpha;
  s.Q = std::exp(1.1 / std::numbers::pi * om * om);
  s.I = F / (s.H * s.H) * s.Q;
  return s;
}

inline double refined_map(double m) { return refined_state(m).I; }

// dH/dm with q' taken along the critical branch
inline double refined_H_prime(double m) {
  const double al = 1.0 / std::sqrt(m);
  const double q = q_branch(m);
  const double qp = 0.25 * four_q_prime(m);
  const double r = (1.0 - al) / (1.0 + al);
  const double r_rp = (1.0 - al) * al * al * al / std::pow(1.0 + al, 3);  // r dr/dm
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return 4.0 * r * r * qp / (pi2 * q * q) - 8.0 * r_rp / (pi2 * q);
}

inline double refined_Q_prime(double m) {
  const double al = 1.0 / std::sqrt(m);
  const double k = 1.1 / std::numbers::pi;
  return k * (1.0 - al) * al * al * al * std::exp(k * (1.0 - al) * (1.0 - al));
}

inline double refined_I_prime(double m, double step = 2.5e-4) {
  return differentiate_central(refined_map, m, DiffScheme::kOrder4, step).value;
}

struct RefinedOptions {
  double epsilon = 0.0;
  int max_iter = 200;
  double target = 1e-6;  // stop once m - 1 < target
};

struct RefinedResult {
  std::vector<RefinedState> trajectory;
  bool converged = false;
};

inline RefinedResult refined_iterate(double m0, const RefinedOptions& opt = {}) {
  if (!(m0 > 1.0 && m0 <= 1.01)) throw DomainError("refined_iterate: m0 must lie in (1, 1.01]");
  if (!(opt.epsilon >= 0.0)) throw DomainError("refined_iterate: epsilon must be >= 0");
  RefinedResult out;
  double m = m0;
  for (int it = 0; it <= opt.max_iter; ++it) {
    RefinedState s = refined_state(m);
    s.iter = it;
    out.trajectory.push_back(s);
    if (m - 1.0 < opt.target) {
      out.converged = true;
      break;
    }
    if (s.I >= m)
      throw NonContraction("refined_iterate: I(m) >= m", s.I - m, {}, out.trajectory);
    if (it == opt.max_iter) break;
    m = std::max(1.0, s.I + opt.epsilon);
  }
  return out;
}

inline void write_refined(std::ostream& os, const std::vector<RefinedState>& t, char delim = ',') {
  os << "iter" << delim << "m" << delim << "p" << delim << "q" << delim << "alpha" << delim << "H"
     << delim << "Q" << delim << "I" << '\n';
  char buf[256];
  for (const auto& s : t) {
    std::snprintf(buf, sizeof buf, "%d%c%.12g%c%.12g%c%.12g%c%.12g%c%.12g%c%.12g%c%.12g", s.iter,
                  delim, s.m, delim, s.p, delim, s.q, delim, s.alpha, delim, s.H, delim, s.Q,
                  delim, s.I);
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// audit of the reference constants

struct AuditRow {
  std::string name;
  std::string claim;  // the claimed statement
  double lo = kNaN;   // accepted open interval (lo, hi); +-inf for one-sided claims
  double hi = kNaN;
  double min = kNaN;  // computed extremes over the sample (equal for point checks)
  double max = kNaN;
  int samples = 0;
  bool pass = false;
  std::string error;  // set when the computation itself threw
};

struct AuditReport {
  std::vector<AuditRow> rows;
  int failures() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const AuditRow& r) { return !r.pass; }));
  }
  const AuditRow* find(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return &r;
    return nullptr;
  }
};

struct AuditOptions {
  int grid = 21;            // points per axis
  double c_halfwidth = 0.03;
};

namespace detail {

// Evaluates f at every sample and records the extremes.  Inclusive bounds
// are used where the claim is non-strict.
template <class F>
AuditRow audit_range(std::string name, std::string claim, double lo, double hi, bool hi_inclusive,
                     const std::vector<double>& xs, F&& f) {
  AuditRow r;
  r.name = std::move(name);
  r.claim = std::move(claim);
  r.lo = lo;
  r.hi = hi;
  try {
    r.min = kInf;
    r.max = -kInf;
    for (double x : xs) {
      const double v = f(x);
      r.min = std::min(r.min, v);
      r.max = std::max(r.max, v);
      ++r.samples;
    }
    r.pass = r.min > lo && (hi_inclusive ? r.max <= hi : r.max < hi);
  } catch (const std::exception& e) {
    r.error = e.what();
    r.pass = false;
  }
  return r;
}

inline AuditRow audit_point(std::string name, std::string claim, double target, double tol,
                            double (*f)()) {
  return audit_range(std::move(name), std::move(claim), target - tol, target + tol, true, {0.0},
                     [f](double) { return f(); });
}

}  // namespace detail

inline AuditReport constants_audit(const AuditOptions& opt = {}) {
  if (opt.grid < 2) throw DomainError("constants_audit: grid must have at least 2 points");
  const int n = opt.grid;
  std::vector<double> up, down, cs;
  for (int j = 0; j < n; ++j) {
    up.push_back(1.0 + 0.01 * j / n);    // [1, 1.01)
    down.push_back(1.0 - 0.01 * j / n);  // (0.99, 1]
  }
  AuditReport rep;
  auto& rows = rep.rows;
  double c0 = kNaN;
  try {
    c0 = critical_knot_at_one();
  } catch (...) {
  }
  for (int k = 0; k < n; ++k) cs.push_back(c0 - opt.c_halfwidth + 2.0 * opt.c_halfwidth * k / (n - 1));

  rows.push_back(detail::audit_point("c0", "c0 ~ 0.612003", 0.612003, 1e-4,
                                     [] { return critical_knot_at_one(); }));
  rows.push_back(detail::audit_point("dG_dc(1,c0)", "dG/dc(1,c0) ~ 1.06", 1.06, 0.01, [] {
    return HalfLineCalculus(1.0, critical_knot_at_one()).dG_dc();
  }));
  rows.push_back(detail::audit_point("dG_dm(1,c0)", "dG/dm(1,c0) ~ 1.557", 1.557, 0.01, [] {
    return HalfLineCalculus(1.0, critical_knot_at_one()).dG_dm();
  }));
  rows.push_back(detail::audit_point("c_prime(1)", "c'(1) ~ 1.47", 1.47, 0.02,
                                     [] { return critical_path(1.0).c_prime; }));
  rows.push_back(detail::audit_point("eta(1)", "eta(1) ~ -0.318018", -0.318018, 1e-4,
                                     [] { return eta_F_audit(1.0).eta; }));
  rows.push_back(detail::audit_point("F_prime(1)", "F'(1) ~ 0.81", 0.81, 0.02,
                                     [] { return eta_F_audit(1.0).F_prime; }));

  // rectangles in (m, c): index k encodes (i, j)
  auto rect = [&](const std::vector<double>& ms, auto&& f) {
    std::vector<double> idx;
    for (int k = 0; k < n * n; ++k) idx.push_back(k);
    return std::pair{idx, [&ms, &cs, f, n](double k) {
                       const int i = static_cast<int>(k) / n, j = static_cast<int>(k) % n;
                       return f(HalfLineCalculus(ms[i], cs[j]));
                     }};
  };
  struct RectClaim {
    const char* name;
    const char* claim;
    double lo, hi;
    int which;  // 0 A1, 1 |A2|, 2 Gc, 3 Gm, 4 c'
  };
  auto value = [](const HalfLineCalculus& h, int which) {
    switch (which) {
      case 0: return h.A1();
      case 1: return std::fabs(h.A2());
      case 2: return h.dG_dc();
      case 3: return h.dG_dm();
      default: return -h.dG_dm() / h.dG_dc();
    }
  };
  const RectClaim up_claims[] = {
      {"A1[1,1.01)", "0.932 < A1 < 1.182", 0.932, 1.182, 0},
      {"|A2|[1,1.01)", "|A2| < 3.36", -kInf, 3.36, 1},
      {"dG_dc[1,1.01)", "0.89 < dG/dc < 1.22", 0.89, 1.22, 2},
      {"dG_dm[1,1.01)", "1.29 < dG/dm < 1.792", 1.29, 1.792, 3},
      {"c_prime[1,1.01)", "1.05 < c' < 2.02", 1.05, 2.02, 4},
  };
  const RectClaim down_claims[] = {
      {"A1(0.99,1]", "0.943 < A1 < 1.197", 0.943, 1.197, 0},
      {"|A2|(0.99,1]", "|A2| < 4.21", -kInf, 4.21, 1},
      {"dG_dc(0.99,1]", "0.9 < dG/dc < 1.24", 0.9, 1.24, 2},
      {"dG_dm(0.99,1]", "1.32 < dG/dm < 1.84", 1.32, 1.84, 3},
      {"c_prime(0.99,1]", "1.06 < c' < 2.05", 1.06, 2.05, 4},
  };
  for (const auto* claims : {up_claims, down_claims}) {
    const auto& ms = claims == up_claims ? up : down;
    for (int k = 0; k < 5; ++k) {
      const RectClaim& rc = claims[k];
      const int which = rc.which;
      auto [idx, f] = rect(ms, [&value, which](const HalfLineCalculus& h) { return value(h, which); });
      rows.push_back(detail::audit_range(rc.name, rc.claim, rc.lo, rc.hi, false, idx, f));
    }
  }

  rows.push_back(detail::audit_range("4q_prime[1,1.01)", "-0.132 < 4q'(m) < -0.127", -0.132,
                                     -0.127, false, up, [](double m) { return four_q_prime(m); }));
  rows.push_back(detail::audit_range("4q[1,1.01)", "4q(m) > 0.635", 0.635, kInf, false, up,
                                     [](double m) { return 4.0 * pq_extremize(m).q; }));
  rows.push_back(detail::audit_range("4p[1,1.01)", "4p(m) < 0.638", -kInf, 0.638, false, up,
                                     [](double m) { return 4.0 * pq_extremize(m).p; }));
  rows.push_back(detail::audit_range("p/q[1,1.01)", "p(m)/q(m) < 1.005", -kInf, 1.005, false, up,
                                     [](double m) {
                                       const PQ v = pq_extremize(m);
                                       return v.p / v.q;
                                     }));
  rows.push_back(detail::audit_range("4p_prime(1/m)(0.99,1]", "-0.131 < 4p'(1/m) < -0.126",
                                     -0.131, -0.126, false, down,
                                     [](double m) { return four_q_prime(m); }));
  rows.push_back(detail::audit_range("H_prime[1,1.01)", "-0.000067 < H'(m) <= 0", -0.000067, 0.0,
                                     true, up, [](double m) { return refined_H_prime(m); }));
  rows.push_back(detail::audit_range("Q_prime[1,1.01)", "Q'(m) < 0.0018", -kInf, 0.0018, false,
                                     up, [](double m) { return refined_Q_prime(m); }));
  return rep;
}

inline void write_audit(std::ostream& os, const AuditReport& rep, char delim = ',') {
  os << "name" << delim << "claim" << delim << "lo" << delim << "hi" << delim << "min" << delim
     << "max" << delim << "samples" << delim << "pass" << '\n';
  char buf[512];
  for (const auto& r : rep.rows) {
    std::snprintf(buf, sizeof buf, "%s%c\"%s\"%c%.12g%c%.12g%c%.12g%c%.12g%c%d%c%s", r.name.c_str(),
                  delim, r.claim.c_str(), delim, r.lo, delim, r.hi, delim, r.min, delim, r.max,
                  delim, r.samples, delim, r.pass ? "pass" : "FAIL");
    os << buf << '\n';
  }
}

}  // namespace balmet
