// balmet: command-line front end for the balanced-sequence toolkit.
//
// Exit status: 0 ok, 1 invalid input, 2 accuracy / non-convergence
// (partial output is still written and flagged), 64 usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "balmet/balmet.hpp"

namespace {

using namespace balmet;

constexpr int kExitDomain = 1;
constexpr int kExitAccuracy = 2;
constexpr int kExitUsage = 64;

struct Common {
  std::string out;
  std::string format = "csv";
};

struct SolveArgs {
  double beta = 0.0;
  int order = 80;
  double tol = 1e-8;
  int enforce = -1;
  double damping = 1.0;
  int max_sweeps = 5000;
  unsigned threads = 0;
  std::string in;  // existing solution file instead of solving

  SolverConfig config() const {
    SolverConfig c;
    c.truncation_order = order;
    c.enforce_count = enforce;
    c.tol = tol;
    c.damping = damping;
    c.max_sweeps = max_sweeps;
    c.threads = threads;
    return c;
  }

  void describe(Table& t) const {
    if (!in.empty()) {
      t.add_param("in", in);
      return;
    }
    t.add_param("beta", beta);
    t.add_param("order", std::to_string(order));
    t.add_param("tol", tol);
    t.add_param("enforce", std::to_string(enforce));
    t.add_param("damping", damping);
    t.add_param("max_sweeps", std::to_string(max_sweeps));
  }
};

void add_solve_flags(CLI::App* app, SolveArgs& a, bool allow_input) {
  app->add_option("--beta", a.beta, "exponent beta in [0, 1)")->capture_default_str();
  app->add_option("--order", a.order, "truncation order N (>= 8)")->capture_default_str();
  app->add_option("--tol", a.tol, "max-norm residual tolerance")->capture_default_str();
  app->add_option("--enforce", a.enforce, "number of enforced indices (< 0: N - ceil(4 sqrt N))")
      ->capture_default_str();
  app->add_option("--damping", a.damping, "log-update damping in (0, 1]")->capture_default_str();
  app->add_option("--max-sweeps", a.max_sweeps, "sweep limit")->capture_default_str();
  app->add_option("--threads", a.threads, "worker threads (0: all cores)")->capture_default_str();
  if (allow_input) app->add_option("--in", a.in, "read a saved solution instead of solving");
}

void add_output_flags(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "output path (default: stdout)");
  app->add_option("--format", c.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    std::cout.flush();
  } else {
    atomic_write(c.out, text);
  }
}

void emit_table(const Common& c, const Table& t) { emit(c, render(t, parse_format(c.format))); }

// A flagged failure: the table is written, then the status is reported.
struct Partial {
  int code = 0;
  std::string message;
};

BalancedSolution obtain_solution(const SolveArgs& a, Partial& partial) {
  if (!a.in.empty()) {
    std::ifstream is(a.in);
    if (!is) throw DomainError("cannot open solution file '" + a.in + "'");
    return read_solution(is);
  }
  if (!(a.beta >= 0.0 && a.beta < 1.0)) throw DomainError("--beta must lie in [0, 1)");
  const SolverConfig cfg = a.config();
  cfg.validate();
  try {
    return solve_balanced(a.beta, cfg);
  } catch (const SolverNonConvergence& e) {
    partial = {kExitAccuracy, e.what()};
    return e.partial();
  }
}

void flag_partial(Table& t, const Partial& p) {
  if (p.code) t.add_param("partial", "1 (" + p.message + ")");
}

std::vector<double> default_s() { return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7}; }

// ---------------------------------------------------------------------------

int cmd_solve(const SolveArgs& a, const Common& c) {
  Partial partial;
  const BalancedSolution sol = obtain_solution(a, partial);
  Table t;
  t.command = "solve";
  a.describe(t);
  flag_partial(t, partial);
  if (parse_format(c.format) == Format::kDelimited) {
    std::ostringstream os;
    os << header_text(t);
    write_solution(os, sol, ',');
    emit(c, os.str());
  } else {
    t.digits = 17;
    t.add_param("N_eff", std::to_string(sol.residual.enforced));
    t.add_param("R", sol.residual.cutoff);
    t.add_param("sweeps", std::to_string(sol.sweeps));
    t.add_param("converged", sol.converged ? "1" : "0");
    t.add_param("max_deviation", sol.residual.max_deviation);
    t.columns = {"i", "lambda"};
    for (int i = 0; i <= sol.seq.order(); ++i)
      t.rows.push_back({static_cast<long long>(i), sol.seq.lambda(i)});
    emit_table(c, t);
  }
  if (partial.code) std::cerr << "balmet: " << partial.message << "\n";
  return partial.code;
}

int cmd_residuals(const SolveArgs& a, const Common& c) {
  Partial partial;
  const BalancedSolution sol = obtain_solution(a, partial);
  const SolverConfig cfg = a.config();
  const BalanceResidual r = residual_vector(sol.seq, cfg);
  Table t;
  t.command = "residuals";
  a.describe(t);
  flag_partial(t, partial);
  t.add_param("R", r.cutoff);
  t.add_param("N_eff", std::to_string(r.enforced));
  t.columns = {"i", "b", "target", "deviation", "enforced"};
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const double target = i == 0 ? 1.0 - sol.seq.beta() : 1.0;
    t.rows.push_back({static_cast<long long>(i), r.values[i], target, r.values[i] - target,
                      static_cast<long long>(static_cast<int>(i) < r.enforced)});
  }
  emit_table(c, t);
  if (partial.code) std::cerr << "balmet: " << partial.message << "\n";
  return partial.code;
}

int cmd_balance_check(const SolveArgs& a, const std::vector<double>& s, const Common& c) {
  Partial partial;
  const BalancedSolution sol = obtain_solution(a, partial);
  const auto rows = global_balance_check(sol.seq, s, a.config());
  Table t;
  t.command = "balance-check";
  a.describe(t);
  flag_partial(t, partial);
  t.columns = {"s", "lhs", "rhs", "deviation", "validity_bound"};
  for (const auto& r : rows) t.rows.push_back({r.s, r.lhs, r.rhs, r.deviation, r.validity_bound});
  emit_table(c, t);
  return partial.code;
}

int cmd_asymptotics(const SolveArgs& a, const std::string& source, int factorial_order,
                    std::vector<double> grid, const Common& c) {
  Partial partial;
  Table t;
  t.command = "asymptotics";
  t.add_param("source", source);
  std::optional<CoefficientSequence> seq;
  if (source == "factorial") {
    if (factorial_order < 8) throw DomainError("--factorial-order must be >= 8");
    t.add_param("factorial_order", std::to_string(factorial_order));
    seq = CoefficientSequence::factorial(factorial_order, 0.0);
    if (grid.empty()) grid = {100.0, 200.0, 400.0};
  } else {
    a.describe(t);
    seq = obtain_solution(a, partial).seq;
    if (grid.empty()) grid = {std::floor(a.config().enforce_for(seq->order()) / 2.0)};
  }
  flag_partial(t, partial);
  std::sort(grid.begin(), grid.end());
  const auto rows = asymptotic_report(*seq, grid);
  t.columns = {"a",          "x_a",         "u_residual", "a_lambda2",    "variance_ratio",
               "h_over_sqrt_a", "xa_minus_a", "xa_scaled", "t_gap",     "t_gap_scaled",
               "f_ratio",    "dxtilde_da"};
  for (const auto& r : rows)
    t.rows.push_back({r.a, r.x_a, r.u_residual, r.a_lambda2, r.variance_ratio, r.h_over_sqrt_a,
                      r.xa_minus_a, r.xa_scaled, r.t_gap, r.t_gap_scaled, r.f_ratio, r.dxtilde_da});
  emit_table(c, t);
  return partial.code;
}

int cmd_dominating_table(const std::vector<double>& ms, const Common& c) {
  for (double m : ms)
    if (!(m >= 1.0)) throw DomainError("--m values must be >= 1");
  Table t;
  t.command = "dominating-table";
  std::string list;
  for (double m : ms) list += (list.empty() ? "" : " ") + Table::format_number(m, 17);
  t.add_param("m", list);
  t.columns = {"m", "p", "q", "c_at_p", "c_at_q", "four_p", "four_q"};
  for (double m : ms) {
    const PQ v = pq_extremize(m);
    t.rows.push_back({m, v.p, v.q, v.c_at_p, v.c_at_q, 4.0 * v.p, 4.0 * v.q});
  }
  emit_table(c, t);
  return 0;
}

int cmd_qtilde(const std::vector<double>& ms, const Common& c) {
  for (double m : ms)
    if (!(m >= 1.0)) throw DomainError("--m values must be >= 1");
  Table t;
  t.command = "qtilde";
  std::string list;
  for (double m : ms) list += (list.empty() ? "" : " ") + Table::format_number(m, 17);
  t.add_param("m", list);
  t.columns = {"m", "q_tilde", "c1_star", "c2_star", "q_half", "correction"};
  for (double m : ms) {
    const QTilde q = qtilde_extremize(m);
    t.rows.push_back({m, q.q_tilde, q.c1_star, q.c2_star, pq_extremize(m).q, qtilde_correction(m)});
  }
  emit_table(c, t);
  return 0;
}

Table trajectory_table(const std::vector<IterationState>& tr) {
  Table t;
  t.columns = {"iter", "m", "m_prime", "p", "p_prime", "q", "q_prime"};
  for (const auto& s : tr)
    t.rows.push_back({static_cast<long long>(s.iter), s.m, s.m_prime, s.p, s.p_prime, s.q, s.q_prime});
  return t;
}

int cmd_contraction(double epsilon, int max_iter, const std::string& convention, const Common& c) {
  CoarseOptions o;
  o.epsilon = epsilon;
  o.max_iter = max_iter;
  o.convention = convention == "literal" ? QBarConvention::kLiteral : QBarConvention::kPrimed;
  if (!(epsilon >= 0.0)) throw DomainError("--epsilon must be >= 0");
  if (max_iter < 1) throw DomainError("--max-iter must be >= 1");
  Partial partial;
  std::vector<IterationState> tr;
  try {
    const CoarseResult r = coarse_iterate(standard_initial_state(), o);
    tr = r.trajectory;
    if (!r.reached) partial = {kExitAccuracy, "band did not reach the stop ratio within --max-iter"};
  } catch (const NonContraction& e) {
    tr = e.coarse();
    partial = {kExitAccuracy, e.what()};
  }
  Table t = trajectory_table(tr);
  t.command = "contraction";
  t.add_param("epsilon", epsilon);
  t.add_param("max_iter", std::to_string(max_iter));
  t.add_param("convention", convention);
  t.add_param("init", "m = m' = 1e10, p = p' = 2, q = q' = 1/12");
  flag_partial(t, partial);
  emit_table(c, t);
  if (partial.code) std::cerr << "balmet: " << partial.message << "\n";
  return partial.code;
}

int cmd_refined(double m0, double epsilon, int max_iter, const Common& c) {
  RefinedOptions o;
  o.epsilon = epsilon;
  o.max_iter = max_iter;
  if (!(m0 > 1.0 && m0 <= 1.01)) throw DomainError("--m must lie in (1, 1.01]");
  Partial partial;
  std::vector<RefinedState> tr;
  try {
    const RefinedResult r = refined_iterate(m0, o);
    tr = r.trajectory;
    if (!r.converged) partial = {kExitAccuracy, "refined map did not reach 1 + 1e-6 within --max-iter"};
  } catch (const NonContraction& e) {
    tr = e.refined();
    partial = {kExitAccuracy, e.what()};
  }
  Table t;
  t.command = "refined";
  t.add_param("m", m0);
  t.add_param("epsilon", epsilon);
  t.add_param("max_iter", std::to_string(max_iter));
  flag_partial(t, partial);
  t.columns = {"iter", "m", "p", "q", "alpha", "H", "Q", "I"};
  for (const auto& s : tr)
    t.rows.push_back({static_cast<long long>(s.iter), s.m, s.p, s.q, s.alpha, s.H, s.Q, s.I});
  emit_table(c, t);
  if (partial.code) std::cerr << "balmet: " << partial.message << "\n";
  return partial.code;
}

int cmd_audit(int grid, const Common& c) {
  AuditOptions o;
  o.grid = grid;
  const AuditReport rep = constants_audit(o);
  Table t;
  t.command = "audit";
  t.add_param("grid", std::to_string(grid));
  t.columns = {"name", "claim", "lo", "hi", "min", "max", "samples", "pass"};
  for (const auto& r : rep.rows)
    t.rows.push_back({r.name, r.claim, r.lo, r.hi, r.min, r.max, static_cast<long long>(r.samples),
                      std::string(r.pass ? "pass" : "FAIL")});
  emit_table(c, t);
  std::cerr << "balmet: audit " << rep.rows.size() - rep.failures() << "/" << rep.rows.size()
            << " claims reproduced\n";
  return 0;
}

int cmd_conjecture(const SolveArgs& a, std::vector<double> xs, const Common& c) {
  Partial partial;
  const BalancedSolution sol = obtain_solution(a, partial);
  if (xs.empty()) xs = {0.0, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0};
  const auto rows = conjecture_probe(sol.seq, xs, a.config());
  Table t;
  t.command = "conjecture";
  a.describe(t);
  flag_partial(t, partial);
  t.columns = {"x", "ratio", "log_slope"};
  for (const auto& r : rows) t.rows.push_back({r.x, r.ratio, r.log_slope});
  emit_table(c, t);
  return partial.code;
}

int cmd_beta_scan(const SolveArgs& a, std::vector<double> betas, int probe, const Common& c) {
  if (betas.empty()) betas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  const SolverConfig cfg = a.config();
  cfg.validate();
  Table t;
  t.command = "beta-scan";
  a.describe(t);
  t.add_param("probe", std::to_string(probe));
  Partial partial;
  BetaScan scan;
  try {
    scan = beta_scan(betas, probe, cfg);
  } catch (const SolverNonConvergence& e) {
    partial = {kExitAccuracy, e.what()};
  }
  flag_partial(t, partial);
  t.columns = {"beta", "lambda_n", "c_n", "c_n_factorial", "above_factorial", "increasing", "sweeps"};
  for (const auto& r : scan.rows)
    t.rows.push_back({r.beta, r.lambda_n, r.c_n, r.c_n * std::exp(std::lgamma(probe + 1.0)),
                      static_cast<long long>(r.above_factorial), static_cast<long long>(r.increasing),
                      static_cast<long long>(r.sweeps)});
  emit_table(c, t);
  if (partial.code) std::cerr << "balmet: " << partial.message << "\n";
  return partial.code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"balmet: balanced sequences, dominating functions and contraction constants"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Common common;
  SolveArgs sa;
  std::vector<double> s_list = default_s(), a_grid, m_list{1.0, 1.01, 2.0, 10.0, 100.0}, x_list, betas;
  std::string source = "factorial", convention = "primed";
  int factorial_order = 520, max_iter = 200, grid = 21, probe = 1;
  double epsilon = 1e-6, m0 = 1.009, refined_eps = 0.0;

  auto* solve = app.add_subcommand("solve", "solve the balance equations for one beta");
  add_solve_flags(solve, sa, false);
  add_output_flags(solve, common);

  auto* residuals = app.add_subcommand("residuals", "balance integrals b_i of a solution");
  add_solve_flags(residuals, sa, true);
  add_output_flags(residuals, common);

  auto* check = app.add_subcommand("balance-check", "global identity int f(sx)/f(x) dx = 1/(1-s) - beta");
  add_solve_flags(check, sa, true);
  check->add_option("--s", s_list, "sample points in (0, 1)")->capture_default_str();
  add_output_flags(check, common);

  auto* asym = app.add_subcommand("asymptotics", "finite-a concentration diagnostics");
  add_solve_flags(asym, sa, true);
  asym->add_option("--source", source, "factorial or solve")
      ->check(CLI::IsMember({"factorial", "solve"}))
      ->capture_default_str();
  asym->add_option("--factorial-order", factorial_order, "order of the factorial sequence")
      ->capture_default_str();
  asym->add_option("--a", a_grid, "indices a to report");
  add_output_flags(asym, common);

  auto* dom = app.add_subcommand("dominating-table", "extremal constants p(m), q(m)");
  dom->add_option("--m", m_list, "curvature ratios >= 1")->capture_default_str();
  add_output_flags(dom, common);

  auto* qt = app.add_subcommand("qtilde", "two-sided minimum q~(m)");
  qt->add_option("--m", m_list, "curvature ratios >= 1")->capture_default_str();
  add_output_flags(qt, common);

  auto* con = app.add_subcommand("contraction", "coarse band-narrowing iteration");
  con->add_option("--epsilon", epsilon, "slack added to each update")->capture_default_str();
  con->add_option("--max-iter", max_iter, "iteration limit")->capture_default_str();
  con->add_option("--convention", convention, "q-bar-prime ratio: primed or literal")
      ->check(CLI::IsMember({"primed", "literal"}))
      ->capture_default_str();
  add_output_flags(con, common);

  auto* ref = app.add_subcommand("refined", "refined map m -> F H^-2 Q + eps near 1");
  ref->add_option("--m", m0, "starting ratio in (1, 1.01]")->capture_default_str();
  ref->add_option("--epsilon", refined_eps, "slack added to each update")->capture_default_str();
  ref->add_option("--max-iter", max_iter, "iteration limit")->capture_default_str();
  add_output_flags(ref, common);

  auto* aud = app.add_subcommand("audit", "recompute the reference constants and bounds");
  aud->add_option("--grid", grid, "sample points per axis")->capture_default_str();
  add_output_flags(aud, common);

  auto* conj = app.add_subcommand("conjecture", "f(x) / (x^beta e^x) on a grid");
  add_solve_flags(conj, sa, true);
  conj->add_option("--x", x_list, "sample points >= 0");
  add_output_flags(conj, common);

  auto* scan = app.add_subcommand("beta-scan", "c_n(beta) over an ascending beta list");
  add_solve_flags(scan, sa, false);
  scan->add_option("--betas", betas, "ascending betas in [0, 1)");
  scan->add_option("--probe", probe, "coefficient index n")->capture_default_str();
  add_output_flags(scan, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "balmet: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*solve) return cmd_solve(sa, common);
    if (*residuals) return cmd_residuals(sa, common);
    if (*check) return cmd_balance_check(sa, s_list, common);
    if (*asym) return cmd_asymptotics(sa, source, factorial_order, a_grid, common);
    if (*dom) return cmd_dominating_table(m_list, common);
    if (*qt) return cmd_qtilde(m_list, common);
    if (*con) return cmd_contraction(epsilon, max_iter, convention, common);
    if (*ref) return cmd_refined(m0, refined_eps, max_iter, common);
    if (*aud) return cmd_audit(grid, common);
    if (*conj) return cmd_conjecture(sa, x_list, common);
    if (*scan) return cmd_beta_scan(sa, betas, probe, common);
  } catch (const DomainError& e) {
    std::cerr << "balmet: " << e.what() << "\n";
    return kExitDomain;
  } catch (const RangeError& e) {
    std::cerr << "balmet: " << e.what() << "\n";
    return kExitDomain;
  } catch (const AccuracyError& e) {
    std::cerr << "balmet: " << e.what() << " (estimate " << e.estimate() << ")\n";
    return kExitAccuracy;
  } catch (const NonConvergenceError& e) {
    std::cerr << "balmet: " << e.what() << "\n";
    return kExitAccuracy;
  } catch (const std::exception& e) {
    std::cerr << "balmet: " << e.what() << "\n";
    return kExitDomain;
  }
  std::cerr << app.help();
  return kExitUsage;
}
