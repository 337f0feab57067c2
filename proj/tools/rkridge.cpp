// rkridge: generate instances, run solvers, run the experiment grid, print
// convergence rates, and run the verification suite.
//
// Exit codes: 0 success, 1 I/O or data failure, 2 usage error, 3 verification failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"
#include "rkridge/harness.hpp"
#include "rkridge/matrix_market.hpp"
#include "rkridge/problems.hpp"
#include "rkridge/solvers.hpp"
#include "rkridge/theory.hpp"
#include "rkridge/verify.hpp"

namespace {

using namespace rkridge;

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;

// Above this many augmented unknowns `rates` derives cond_A from the singular
// values of X instead of a Jacobi eigensolve of the (m+n)-square matrix.
constexpr std::size_t kAugmentedEigensolveLimit = 600;

std::string fmt(double v, int digits = 10) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

struct InstanceFlags {
  std::string in;
  std::optional<std::size_t> m, n;
  double sigma_min = 0.1;
  double lambda = 0.01;
  std::uint64_t seed = 1;

  void add_generator(CLI::App* cmd, bool with_in) {
    if (with_in) cmd->add_option("--in", in, "Instance directory written by `gen`");
    cmd->add_option("--m", m, "Rows of X");
    cmd->add_option("--n", n, "Columns of X");
    cmd->add_option("--sigma-min", sigma_min, "Smallest singular value, in (0,1]")->capture_default_str();
    cmd->add_option("--lambda", lambda, "Ridge parameter")->capture_default_str();
    cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
  }

  // Range checks come first so that a bad value is reported even when other
  // flags are missing.
  void validate() const {
    if (!(sigma_min > 0.0 && sigma_min <= 1.0)) throw UsageError("sigma-min must be in (0,1]");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be >= 0");
  }

  ProblemInstance resolve() const {
    validate();
    if (!in.empty()) {
      if (m || n) throw UsageError("--in cannot be combined with --m/--n");
      return load(in);
    }
    if (!m || !n) throw UsageError("give either --in DIR or both --m and --n");
    return generate(*m, *n, sigma_min, lambda, seed);
  }
};

std::string spectrum_summary(const std::vector<double>& ascending) {
  std::string s;
  if (ascending.size() <= 8) {
    for (double v : ascending) s += (s.empty() ? "" : " ") + fmt(v);
  } else {
    s = fmt(ascending.front()) + " ... " + fmt(ascending.back()) + " (" +
        std::to_string(ascending.size()) + " values)";
  }
  return s;
}

/// Opens `path` for writing, or returns stdout when it is empty.
class OutputTarget {
 public:
  explicit OutputTarget(const std::string& path) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw IoError("cannot open '" + path + "' for writing");
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

// ---------------------------------------------------------------------------

int cmd_gen(const InstanceFlags& f, const std::string& out) {
  f.validate();
  if (out.empty()) throw UsageError("gen requires --out DIR");
  const ProblemInstance p = f.resolve();
  save(p, out);
  auto spectrum = prescribed_spectrum(std::min(p.m(), p.n()), p.sigma_min);
  std::reverse(spectrum.begin(), spectrum.end());
  const auto d = diagnose_oracle(p.X, p.y, p.lambda, p.oracle);
  std::cout << "wrote " << p.m() << "x" << p.n() << " instance to " << out << '\n'
            << "spectrum: " << spectrum_summary(spectrum) << '\n'
            << "oracle: primal_residual=" << fmt(d.primal_residual, 3)
            << " dual_residual=" << fmt(d.dual_residual, 3) << " duality_gap=" << fmt(d.duality_gap, 3)
            << '\n';
  return kExitOk;
}

struct SolveFlags {
  std::string alg;
  std::string iz_init;
  std::uint64_t iters = 10000;
  std::uint64_t trace_every = 100;
  std::string csv;
  bool wall_time = false;
};

int cmd_solve(const InstanceFlags& f, const SolveFlags& s) {
  const auto kind = parse_solver_kind(s.alg);
  if (!kind) throw UsageError("unknown algorithm '" + s.alg + "'; valid names: " + solver_names());
  std::optional<IZInit> init_kind;
  if (*kind == SolverKind::IZ) {
    if (s.iz_init.empty()) throw UsageError("iz requires --iz-init (iz0, iz1, izmix, izrnd)");
    init_kind = parse_iz_init(s.iz_init);
    if (!init_kind) throw UsageError("unknown --iz-init '" + s.iz_init + "' (iz0, iz1, izmix, izrnd)");
  } else if (!s.iz_init.empty()) {
    throw UsageError("--iz-init only applies to --alg iz");
  }
  if (s.iters < 1 || s.trace_every < 1) throw UsageError("--iters and --trace-every must be >= 1");

  const ProblemInstance p = f.resolve();
  OutputTarget out(s.csv);  // open before running so a bad path fails fast
  const AlgorithmSpec spec{*kind, init_kind};
  SolverState state = init(*kind, p, init_kind, algorithm_seed(f.seed, spec));
  RunOptions ro;
  ro.steps = s.iters;
  ro.trace_every = s.trace_every;
  ro.record_wall_time = s.wall_time;
  const auto records = run(state, p, ro);
  auto& os = out.stream();
  write_csv(os, records);
  os.flush();
  if (!os) throw IoError("writing CSV failed");
  return kExitOk;
}

struct BenchFlags {
  std::string config;
  std::string out;
  unsigned threads = 0;
  bool wall_time = false;
};

int cmd_bench(const BenchFlags& b) {
  ExperimentConfig cfg;
  if (!b.config.empty()) {
    std::ifstream is(b.config);
    if (!is) throw IoError("cannot open config '" + b.config + "'");
    try {
      cfg = parse_config(is);
    } catch (const ParseError& e) {
      throw UsageError("config " + b.config + ": " + e.what());
    }
  }
  OutputTarget out(b.out);
  GridOptions opt;
  opt.threads = b.threads;
  opt.record_wall_time = b.wall_time;
  const auto summary = run_grid(cfg, out.stream(), opt);
  std::cerr << "cells=" << summary.cells << " trials=" << summary.trials_run
            << " records=" << summary.records << " expected=" << planned_record_count(cfg)
            << " wall_seconds=" << fmt(summary.wall_seconds, 4) << '\n';
  return kExitOk;
}

int cmd_rates(const InstanceFlags& f) {
  const ProblemInstance p = f.resolve();
  const std::size_t m = p.m(), n = p.n();
  const auto sv = singular_values(p.X);
  const Regime regime = regime_of(m, n);
  std::cout << "instance: m=" << m << " n=" << n << " lambda=" << fmt(p.lambda, 17) << '\n';
  std::cout << "regime: " << to_string(regime);
  if (regime == Regime::Square) {
    std::cout << " (completion for m = n: sigma_min(Sigma') = sigma_min(K') = sigma_1^2 + lambda)";
  }
  std::cout << '\n' << "singular values: " << spectrum_summary(sv) << '\n';

  for (auto kind : kAllSolverKinds) {
    if (kind == SolverKind::IZ) continue;
    const auto b = contraction_factor(kind, m, n, p.lambda, sv);
    std::cout << "factor " << to_string(kind) << " = " << fmt(b.factor, 17) << "  (norm "
              << to_string(b.norm_matrix) << ")\n";
  }

  if (!(p.lambda > 0.0)) {
    std::cout << "iz: not applicable (lambda = 0)\n";
    return kExitOk;
  }
  IZConditionReport r;
  std::string method = "eigensolve";
  if (m + n <= kAugmentedEigensolveLimit) {
    r = iz_condition_check(p.X, p.lambda);
  } else {
    // |eigenvalues| of A are sqrt(sigma^2 + lambda) and, when m != n, sqrt(lambda).
    const double top = sv.back() * sv.back() + p.lambda;
    const double bottom_small = sv.front() * sv.front() + p.lambda;
    const double bottom_large = m == n ? bottom_small : p.lambda;
    r.cond_A = std::sqrt(top / bottom_large);
    r.cond_primal = top / (n > m ? bottom_large : bottom_small);
    r.cond_dual = top / (m > n ? bottom_large : bottom_small);
    r.uses_primal = n >= m;
    r.cond_M = r.uses_primal ? r.cond_primal : r.cond_dual;
    r.relative_discrepancy = std::abs(r.cond_A - std::sqrt(r.cond_M)) / r.cond_A;
    method = "closed form from singular values";
  }
  std::cout << "iz: cond_A=" << fmt(r.cond_A, 12) << " sqrt(cond_M)=" << fmt(std::sqrt(r.cond_M), 12)
            << " relative_discrepancy=" << fmt(r.relative_discrepancy, 3) << "  (M = "
            << (r.uses_primal ? "X^T X + lambda I_n" : "X X^T + lambda I_m") << ", " << method << ")\n";
  std::cout << "iz: cond(X^T X + lambda I_n)=" << fmt(r.cond_primal, 12)
            << " cond(X X^T + lambda I_m)=" << fmt(r.cond_dual, 12) << '\n';
  return kExitOk;
}

int cmd_verify(bool full, std::uint64_t seed) {
  const auto rep = run_verification(full, seed);
  for (const auto& c : rep.checks) print(std::cout, c);
  std::cout << (rep.all_passed() ? "all checks passed" : "verification FAILED") << '\n';
  return rep.all_passed() ? kExitOk : kExitVerify;
}

constexpr const char* kConfigGrammar = R"(Config grammar (plain text, one `key = value` per line, '#' starts a comment):
  dims        = 1000x1000, 10000x100, 100x10000
  lambdas     = 0.001, 0.01, 0.1
  sigma_mins  = 1, 0.1, 0.01, 0.001
  algorithms  = rgs-ridge, rk-ridge, iz0, iz1, izmix, izrnd
                (also rk, rgs, naive-rk, naive-rgs)
  iterations  = 10000
  trace_every = 100
  trials      = 20
  base_seed   = 1
  metrics     = err_beta, err_normal, err_weighted, noop_count
Missing keys keep the defaults shown. Unknown keys are errors.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized Kaczmarz / Gauss-Seidel solvers for ridge regression"};
  app.name("rkridge");
  app.require_subcommand(1);

  InstanceFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic instance directory");
  gen_flags.add_generator(gen, false);
  gen->add_option("--out", gen_out, "Output directory (required)");

  InstanceFlags solve_inst;
  SolveFlags solve_flags;
  auto* solve = app.add_subcommand("solve", "Run one solver and write its trace as CSV");
  solve_inst.add_generator(solve, true);
  solve->add_option("--alg", solve_flags.alg, "rk, rgs, rk-ridge, rgs-ridge, naive-rk, naive-rgs, iz")->required();
  solve->add_option("--iz-init", solve_flags.iz_init, "iz0, iz1, izmix, izrnd (iz only)");
  solve->add_option("--iters", solve_flags.iters, "Iterations")->capture_default_str();
  solve->add_option("--trace-every", solve_flags.trace_every, "Record every K iterations")->capture_default_str();
  solve->add_option("--csv", solve_flags.csv, "CSV path (default: stdout)");
  solve->add_flag("--wall-time", solve_flags.wall_time, "Fill wall_ns (output no longer reproducible)");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Run the experiment grid");
  bench->add_option("--config", bench_flags.config, "Config file (default: built-in grid)");
  bench->add_option("--out", bench_flags.out, "CSV path (default: stdout)");
  bench->add_option("--threads", bench_flags.threads, "Concurrent trials (0: all cores)")->capture_default_str();
  bench->add_flag("--wall-time", bench_flags.wall_time, "Fill wall_ns (output no longer reproducible)");
  bench->footer(kConfigGrammar);

  InstanceFlags rates_inst;
  auto* rates = app.add_subcommand("rates", "Print contraction factors and condition numbers");
  rates_inst.add_generator(rates, true);

  bool verify_full = false;
  std::uint64_t verify_seed = kVerifySeed;
  auto* verify = app.add_subcommand("verify", "Run the deterministic verification suite");
  auto* quick_flag = verify->add_flag("--quick", "Small instances only (default)");
  verify->add_flag("--full", verify_full, "Also run the 200x50 / 50x200 ordering check")->excludes(quick_flag);
  verify->add_option("--seed", verify_seed, "Suite seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_flags, gen_out);
    if (*solve) return cmd_solve(solve_inst, solve_flags);
    if (*bench) return cmd_bench(bench_flags);
    if (*rates) return cmd_rates(rates_inst);
    if (*verify) return cmd_verify(verify_full, verify_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}
