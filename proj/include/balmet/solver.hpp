#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "balmet/errors.hpp"
#include "balmet/numerics.hpp"
#include "balmet/parallel.hpp"
#include "balmet/series.hpp"

namespace balmet {

struct SolverConfig {
  int truncation_order = 80;
  int enforce_count = -1;       // < 0: N - ceil(4 sqrt N)
  double domain_cutoff = kNaN;  // NaN: N + 1 - beta
  double tol = 1e-8;
  double damping = 1.0;
  int max_sweeps = 5000;
  QuadratureConfig quadrature{};
  std::vector<double> initial_lambdas;  // empty: log i!
  unsigned threads = 0;                 // 0: hardware concurrency

  static int default_enforce(int n) {
    return n - static_cast<int>(std::ceil(4.0 * std::sqrt(static_cast<double>(n))));
  }
  int enforce_for(int n) const { return enforce_count < 0 ? default_enforce(n) : enforce_count; }

  // Summing b_i over all kept indices gives int_0^R 1 dx = R, so the only
  // cutoff compatible with every b_i reaching its target is N + 1 - beta.
  double cutoff_for(int n, double beta) const {
    return std::isnan(domain_cutoff) ? n + 1.0 - beta : domain_cutoff;
  }

  void validate() const {
    if (truncation_order < 8) throw DomainError("SolverConfig: truncation order must be >= 8");
    const int ne = enforce_for(truncation_order);
    if (ne < 1 || ne > default_enforce(truncation_order))
      throw DomainError("SolverConfig: enforce_count must lie in [1, N - ceil(4 sqrt N)]");
    if (!(tol > 0.0)) throw DomainError("SolverConfig: tol must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("SolverConfig: damping must lie in (0, 1]");
    if (max_sweeps < 1) throw DomainError("SolverConfig: max_sweeps must be >= 1");
    if (!std::isnan(domain_cutoff) && !(domain_cutoff > 0.0))
      throw DomainError("SolverConfig: domain cutoff must be positive");
    if (!initial_lambdas.empty() &&
        static_cast<int>(initial_lambdas.size()) != truncation_order + 1)
      throw DomainError("SolverConfig: initial guess has the wrong length");
    quadrature.validate();
  }
};

struct BalanceResidual {
  std::vector<double> values;  // b_0 .. b_N (pad indices included)
  int enforced = 0;            // indices 0 .. enforced-1 count towards max_deviation
  double max_deviation = 0.0;
  double cutoff = kNaN;
};

struct BalancedSolution {
  CoefficientSequence seq{0.0, {0.0}};
  BalanceResidual residual;
  int sweeps = 0;
  double tol = kNaN;
  bool converged = false;
};

class SolverNonConvergence : public NonConvergenceError {
 public:
  SolverNonConvergence(const std::string& what, BalancedSolution partial)
      : NonConvergenceError(what, partial.residual.max_deviation), partial_(std::move(partial)) {}
  const BalancedSolution& partial() const noexcept { return partial_; }

 private:
  BalancedSolution partial_;
};

namespace detail {

inline double balance_target(int i, double beta) { return i == 0 ? 1.0 - beta : 1.0; }

// b_i = int_0^R c_i x^i / f dx, in t = log x.
inline double balance_integral(const LogFKernel& kern, const std::vector<double>& lam, int i,
                               double log_r, const QuadratureConfig& q) {
  const double li = lam[i];
  auto ell = [&kern, i, li](double t) { return (i + 1.0) * t - li - kern.log_f(t); };
  QuadratureConfig c = q;
  c.peak_hint = std::min(std::log(i + 1.0), log_r);
  return integrate_log_domain(ell, Interval{-kInf, log_r}, c);
}

}  // namespace detail

inline BalanceResidual residual_vector(const CoefficientSequence& seq, const SolverConfig& cfg) {
  cfg.quadrature.validate();
  const int n = seq.order();
  const double r = cfg.cutoff_for(n, seq.beta());
  if (!(r > 0.0)) throw DomainError("residual_vector: cutoff must be positive");
  const double log_r = std::log(r);
  BalanceResidual res;
  res.cutoff = r;
  res.enforced = std::clamp(cfg.enforce_count < 0 ? SolverConfig::default_enforce(n) : cfg.enforce_count, 0, n + 1);
  res.values.assign(n + 1, kNaN);
  const auto& lam = seq.lambdas();
  const detail::LogFKernel kern(lam);
  detail::parallel_for(static_cast<std::size_t>(n + 1), cfg.threads, [&](std::size_t i) {
    if (!std::isfinite(lam[i])) {
      res.values[i] = 0.0;
      return;
    }
    res.values[i] = detail::balance_integral(kern, lam, static_cast<int>(i), log_r, cfg.quadrature);
  });
  for (int i = 0; i < res.enforced; ++i)
    res.max_deviation = std::max(
        res.max_deviation, std::fabs(res.values[i] - detail::balance_target(i, seq.beta())));
  return res;
}

inline BalancedSolution solve_balanced(double beta, const SolverConfig& cfg) {
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("solve_balanced: beta must lie in [0, 1)");
  cfg.validate();
  const int n = cfg.truncation_order;
  std::vector<double> lam = cfg.initial_lambdas.empty()
                                ? CoefficientSequence::factorial(n).lambdas()
                                : cfg.initial_lambdas;
  for (double v : lam)
    if (!std::isfinite(v)) throw DomainError("solve_balanced: initial guess must be finite");
  const double l0 = lam[0];
  for (double& v : lam) v -= l0;

  double theta = cfg.damping;
  double prev = kInf;
  BalancedSolution out;
  out.tol = cfg.tol;
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    CoefficientSequence seq(beta, lam);
    BalanceResidual res = residual_vector(seq, cfg);
    out.seq = seq;
    out.residual = res;
    out.sweeps = sweep;
    if (res.max_deviation <= cfg.tol) {
      out.converged = true;
      return out;
    }
    if (res.max_deviation > prev) theta = std::min(theta, 0.5);
    prev = res.max_deviation;
    for (int i = 0; i <= n; ++i)
      lam[i] += theta * std::log(res.values[i] / detail::balance_target(i, beta));
    const double shift = lam[0];
    for (double& v : lam) v -= shift;
  }
  throw SolverNonConvergence("solve_balanced: max_sweeps exceeded (last max deviation " +
                                 std::to_string(out.residual.max_deviation) + ")",
                             out);
}

struct BalanceCheckRow {
  double s = kNaN;
  double lhs = kNaN;
  double rhs = kNaN;
  double deviation = kNaN;
  double validity_bound = kNaN;  // s^{N_eff}/(1 - s): size of the truncation effect
};

inline std::vector<BalanceCheckRow> global_balance_check(const CoefficientSequence& seq,
                                                         const std::vector<double>& s_samples,
                                                         const SolverConfig& cfg = {}) {
  for (double s : s_samples)
    if (!(s > 0.0 && s < 1.0)) throw DomainError("global_balance_check: s must lie in (0, 1)");
  const int n = seq.order();
  const double log_r = std::log(cfg.cutoff_for(n, seq.beta()));
  const int ne = cfg.enforce_for(n);
  const detail::LogFKernel kern(seq.lambdas());
  std::vector<BalanceCheckRow> rows;
  for (double s : s_samples) {
    const double ls = std::log(s);
    auto ell = [&kern, ls](double t) { return kern.log_f(t + ls) - kern.log_f(t) + t; };
    QuadratureConfig q = cfg.quadrature;
    q.peak_hint = std::min(-std::log1p(-s), log_r);
    BalanceCheckRow r;
    r.s = s;
    r.lhs = integrate_log_domain(ell, Interval{-kInf, log_r}, q);
    r.rhs = 1.0 / (1.0 - s) - seq.beta();
    r.deviation = r.lhs - r.rhs;
    r.validity_bound = std::pow(s, ne) / (1.0 - s);
    rows.push_back(r);
  }
  return rows;
}

struct BetaScanRow {
  double beta = kNaN;
  double lambda_n = kNaN;
  double c_n = kNaN;
  bool above_factorial = false;  // c_n(beta) > 1/n! (strict only for beta > 0)
  bool increasing = true;        // c_n strictly above the previous row
  int sweeps = 0;
};

struct BetaScan {
  std::vector<BetaScanRow> rows;
  std::vector<BalancedSolution> solutions;
  bool all_ok = true;
};

inline BetaScan beta_scan(const std::vector<double>& betas, int n_probe, const SolverConfig& cfg) {
  if (betas.empty()) throw DomainError("beta_scan: empty beta list");
  for (std::size_t k = 0; k < betas.size(); ++k) {
    if (!(betas[k] >= 0.0 && betas[k] < 1.0)) throw DomainError("beta_scan: beta outside [0, 1)");
    if (k && !(betas[k] > betas[k - 1])) throw DomainError("beta_scan: betas must be ascending");
  }
  if (n_probe < 0 || n_probe > cfg.truncation_order) throw DomainError("beta_scan: probe index out of range");
  BetaScan out;
  SolverConfig c = cfg;
  const double log_fact = std::lgamma(n_probe + 1.0);
  for (double b : betas) {
    BalancedSolution sol = solve_balanced(b, c);
    c.initial_lambdas = sol.seq.lambdas();  // warm start
    BetaScanRow r;
    r.beta = b;
    r.lambda_n = sol.seq.lambda(n_probe);
    r.c_n = std::exp(-r.lambda_n);
    r.sweeps = sol.sweeps;
    r.above_factorial = b == 0.0 ? true : r.lambda_n < log_fact;
    if (!out.rows.empty()) r.increasing = r.c_n > out.rows.back().c_n;
    out.all_ok = out.all_ok && r.above_factorial && r.increasing;
    out.rows.push_back(r);
    out.solutions.push_back(std::move(sol));
  }
  return out;
}

struct ConvexityProbe {
  std::vector<double> t;
  std::vector<double> b;
  std::vector<double> second_differences;
  double log_rescale = 0.0;  // log of the factor applied to seq1
  double b_prime_0 = kNaN;
  double b_prime_1 = kNaN;
  bool convex = false;
};

// b_i along f_t = t f1 + (1 - t) f0 after rescaling f1 so both share c(i).
inline ConvexityProbe interpolation_convexity_probe(const CoefficientSequence& seq0,
                                                    const CoefficientSequence& seq1, int i,
                                                    const std::vector<double>& t_grid,
                                                    const SolverConfig& cfg = {}) {
  if (seq0.order() != seq1.order()) throw DomainError("convexity probe: sequences differ in N");
  if (i < 0 || i > seq0.order() - 2) throw DomainError("convexity probe: index out of range");
  for (double t : t_grid)
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("convexity probe: t must lie in [0, 1]");
  const QuadratureConfig& q = cfg.quadrature;
  auto log_cfun = [&](const CoefficientSequence& s) {
    return continuous_coefficient(s, i, q).lambda_of_a;
  };
  ConvexityProbe out;
  // scaling f by k scales c(i) by k, so k = c0(i)/c1(i)
  out.log_rescale = log_cfun(seq1) - log_cfun(seq0);
  const auto& l0 = seq0.lambdas();
  const CoefficientSequence s1 = seq1.rescaled(out.log_rescale);
  const auto& l1 = s1.lambdas();
  const detail::LogFKernel k0(l0), k1(l1);

  auto b_at = [&](double t) {
    const double lt = t > 0.0 ? std::log(t) : -kInf;
    const double lm = t < 1.0 ? std::log1p(-t) : -kInf;
    const double log_ai = log_add_exp(lt - l1[i], lm - l0[i]);
    auto ell = [&](double tau) {
      const double lf = log_add_exp(lt + k1.log_f(tau), lm + k0.log_f(tau));
      return log_ai + (i + 1.0) * tau - lf;
    };
    QuadratureConfig qc = q;
    qc.peak_hint = std::log(i + 1.0);
    return integrate_log_domain(ell, Interval{}, qc);
  };

  for (double t : t_grid) {
    out.t.push_back(t);
    out.b.push_back(b_at(t));
  }
  out.convex = out.b.size() >= 3;
  for (std::size_t k = 1; k + 1 < out.b.size(); ++k) {
    const double d2 = out.b[k + 1] - 2.0 * out.b[k] + out.b[k - 1];
    out.second_differences.push_back(d2);
    out.convex = out.convex && d2 > 0.0;
  }
  const double h = 1e-3;
  out.b_prime_0 = (-3.0 * b_at(0.0) + 4.0 * b_at(h) - b_at(2 * h)) / (2 * h);
  out.b_prime_1 = (3.0 * b_at(1.0) - 4.0 * b_at(1.0 - h) + b_at(1.0 - 2 * h)) / (2 * h);
  return out;
}

struct ConjectureRow {
  double x = kNaN;
  double ratio = kNaN;      // f(x) / (x^beta e^x); f(0) at x = 0
  double log_slope = kNaN;  // d log ratio / d log x = u - beta - x
};

inline std::vector<ConjectureRow> conjecture_probe(const CoefficientSequence& seq,
                                                   const std::vector<double>& x_grid,
                                                   const SolverConfig& cfg = {}) {
  const int n = seq.order();
  const double umax = cfg.enforce_for(n) - 2.0 * std::sqrt(static_cast<double>(n));
  std::vector<ConjectureRow> rows;
  for (double x : x_grid) {
    if (std::isnan(x) || x < 0.0) throw DomainError("conjecture_probe: x must be >= 0");
    ConjectureRow r;
    r.x = x;
    if (x == 0.0) {
      r.ratio = std::exp(eval_log_f(seq, 0.0));
      r.log_slope = -seq.beta();
      rows.push_back(r);
      continue;
    }
    const auto p = eval_profile(seq, x);
    if (p.u > umax)
      throw RangeError("conjecture_probe: x = " + std::to_string(x) +
                       " lies beyond the truncation-safe region (u <= " + std::to_string(umax) + ")");
    r.ratio = std::exp(p.log_f - seq.beta() * p.t - x);
    r.log_slope = p.u - seq.beta() - x;
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// plain-text record

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_solution(std::ostream& os, const BalancedSolution& sol, char delim = ' ') {
  const int n = sol.seq.order();
  os << "# balanced-solution\n";
  os << "# beta = " << detail::fmt17(sol.seq.beta()) << "\n";
  os << "# N = " << n << "\n";
  os << "# N_eff = " << sol.residual.enforced << "\n";
  os << "# R = " << detail::fmt17(sol.residual.cutoff) << "\n";
  os << "# tol = " << detail::fmt17(sol.tol) << "\n";
  os << "# sweeps = " << sol.sweeps << "\n";
  os << "# converged = " << (sol.converged ? 1 : 0) << "\n";
  os << "# max_deviation = " << detail::fmt17(sol.residual.max_deviation) << "\n";
  for (int i = 0; i <= n; ++i) os << i << delim << detail::fmt17(sol.seq.lambda(i)) << "\n";
}

inline BalancedSolution read_solution(std::istream& is) {
  std::map<std::string, std::string> hdr;
  std::vector<double> lam;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t#");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
      };
      hdr[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
      continue;
    }
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    long idx;
    std::string val;
    if (!(ls >> idx >> val)) throw DomainError("read_solution: malformed line: " + line);
    if (idx != static_cast<long>(lam.size())) throw DomainError("read_solution: indices out of order");
    lam.push_back(std::strtod(val.c_str(), nullptr));
  }
  if (!hdr.count("beta") || lam.empty()) throw DomainError("read_solution: missing header or data");
  BalancedSolution sol;
  sol.seq = CoefficientSequence(std::strtod(hdr["beta"].c_str(), nullptr), std::move(lam));
  auto num = [&](const char* k, double dflt) {
    return hdr.count(k) ? std::strtod(hdr[k].c_str(), nullptr) : dflt;
  };
  sol.residual.enforced = static_cast<int>(num("N_eff", 0));
  sol.residual.cutoff = num("R", kNaN);
  sol.residual.max_deviation = num("max_deviation", kNaN);
  sol.tol = num("tol", kNaN);
  sol.sweeps = static_cast<int>(num("sweeps", 0));
  sol.converged = num("converged", 0) != 0;
  return sol;
}

}  // namespace balmet
