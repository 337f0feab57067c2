#pragma once

// Deterministic verification suite behind `rkridge verify`. Each check returns
// its largest measured discrepancy next to the tolerance it was held to.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rkridge/densela.hpp"
#include "rkridge/harness.hpp"
#include "rkridge/matrix_market.hpp"
#include "rkridge/oracle.hpp"
#include "rkridge/problems.hpp"
#include "rkridge/random.hpp"
#include "rkridge/solvers.hpp"
#include "rkridge/theory.hpp"

namespace rkridge {

struct CheckResult {
  std::string name;
  bool passed = false;
  double discrepancy = 0.0;  // worst measured value
  double tolerance = 0.0;    // pass iff discrepancy <= tolerance
  std::string detail;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

inline void print(std::ostream& os, const CheckResult& c) {
  os << (c.passed ? "PASS " : "FAIL ") << c.name << "  discrepancy=" << mm::format_real(c.discrepancy)
     << " tol=" << mm::format_real(c.tolerance);
  if (!c.detail.empty()) os << "  " << c.detail;
  os << '\n';
}

namespace detail {

inline CheckResult verdict(std::string name, double worst, double tol, std::string detail = {}) {
  return CheckResult{std::move(name), worst <= tol, worst, tol, std::move(detail)};
}

/// Small random instance for the quick checks: m, n in [1, max_dim],
/// sigma_min in [0.05, 1], lambda log-uniform in [1e-3, 1].
inline ProblemInstance random_small_instance(SeededRng& rng, std::size_t max_dim) {
  auto pick = [&](std::size_t hi) {
    return 1 + static_cast<std::size_t>(rng.next_u64() % hi);
  };
  const std::size_t m = pick(max_dim);
  const std::size_t n = pick(max_dim);
  const double sigma_min = 0.05 + 0.95 * rng.uniform_open_closed();
  const double lambda = std::pow(10.0, -3.0 + 3.0 * rng.uniform_open_closed());
  return generate(m, n, sigma_min, lambda, rng.next_u64());
}

inline Vector random_vector(std::size_t len, SeededRng& rng) {
  Vector v(len);
  for (double& x : v) x = rng.normal();
  return v;
}

/// Put a ridge solver into an arbitrary state with a consistent mirror.
inline void randomize_ridge_state(SolverState& s, const ProblemInstance& p, SeededRng& rng) {
  if (s.kind == SolverKind::RKRidge) {
    s.alpha = random_vector(p.m(), rng);
  } else {
    s.beta = random_vector(p.n(), rng);
  }
  refresh_mirror(s, p.X, p.y);
}

/// Probability-weighted post-step weighted error, enumerated over every index.
inline double enumerate_expectation(const SolverState& s, const ProblemInstance& p) {
  double total = 0.0;
  for (std::size_t k = 0; k < s.selection_size(); ++k) {
    const double prob = s.sampler.probability(k);
    if (prob == 0.0) continue;
    SolverState next = s;
    step_at(next, p.X, p.y, p.lambda, k);
    total += prob * weighted_error_sq(next, p.X, p.lambda, p.oracle);
  }
  return total;
}

}  // namespace detail

/// Brute-force enumeration against the closed-form one-step expectation.
inline CheckResult check_expectation_identity(std::size_t instances, std::uint64_t seed,
                                              std::size_t max_dim = 12) {
  SeededRng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, max_dim);
    for (auto kind : {SolverKind::RKRidge, SolverKind::RGSRidge}) {
      SolverState s = init(kind, p, std::nullopt, rng.next_u64());
      detail::randomize_ridge_state(s, p, rng);
      const double brute = detail::enumerate_expectation(s, p);
      const double closed = expected_onestep_error(s, p.X, p.y, p.lambda, p.oracle);
      // The closed form is current - gain, so its rounding is relative to the
      // current error; exact one-step solves (one row or column) make both ~0.
      const double current = weighted_error_sq(s, p.X, p.lambda, p.oracle);
      const double scale = std::max({std::abs(brute), std::abs(closed), current, 1e-300});
      worst = std::max(worst, std::abs(brute - closed) / scale);
    }
  }
  return detail::verdict("expectation-identity", worst, 1e-10,
                         std::to_string(instances) + " instances x {rk-ridge, rgs-ridge}");
}

/// Single-step contraction: E[next] <= factor * current, up to 1e-10 relative slack.
inline CheckResult check_bound_dominance(std::size_t instances, std::uint64_t seed,
                                         std::size_t max_dim = 12) {
  SeededRng rng(seed);
  double worst = -1.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, max_dim);
    for (auto kind : {SolverKind::RKRidge, SolverKind::RGSRidge}) {
      SolverState s = init(kind, p, std::nullopt, rng.next_u64());
      detail::randomize_ridge_state(s, p, rng);
      const double current = weighted_error_sq(s, p.X, p.lambda, p.oracle);
      const double expected = expected_onestep_error(s, p.X, p.y, p.lambda, p.oracle);
      const double factor = contraction_factor(kind, p.X, p.lambda).factor;
      // Positive excess means the bound is violated.
      worst = std::max(worst, (expected - factor * current) / std::max(current, 1e-300));
    }
  }
  return detail::verdict("bound-dominance", std::max(worst, 0.0), 1e-10,
                         "worst (E[next] - factor*current)/current = " + mm::format_real(worst));
}

namespace detail {

/// Run iz from a state on the closure manifold and measure (a) drift off it and
/// (b) the fraction of the expected no-op steps that were not no-ops.
inline CheckResult iz_closure(bool claim_one, std::size_t instances, std::size_t steps,
                              std::uint64_t seed) {
  SeededRng rng(seed);
  double worst_drift = 0.0;
  std::uint64_t expected_noops = 0, missed = 0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = random_small_instance(rng, 12);
    const double root = std::sqrt(p.lambda);
    SolverState s = init(SolverKind::IZ, p, IZInit::IZ0, rng.next_u64());
    if (claim_one) {
      // beta = X^T alpha' / sqrt(lambda)
      s.alpha = random_vector(p.m(), rng);
      s.beta = (1.0 / root) * multiply_transpose(p.X, s.alpha->span());
    } else {
      // alpha' = (y - X beta) / sqrt(lambda)
      s.beta = random_vector(p.n(), rng);
      s.alpha = (1.0 / root) * (p.y - multiply(p.X, s.beta.span()));
    }
    for (std::size_t k = 0; k < steps; ++k) {
      const auto r = step(s, p.X, p.y, p.lambda);
      const bool should_noop = claim_one ? r.picked_kind == PickAxis::Column
                                         : r.picked_kind == PickAxis::Row;
      if (should_noop) {
        ++expected_noops;
        if (!r.was_noop) ++missed;
      }
      double drift;
      if (claim_one) {
        const Vector target = (1.0 / root) * multiply_transpose(p.X, s.alpha->span());
        drift = norm((s.beta - target).span()) / (1.0 + norm(s.beta.span()));
      } else {
        const Vector target = (1.0 / root) * (p.y - multiply(p.X, s.beta.span()));
        drift = norm((*s.alpha - target).span()) / (1.0 + norm(s.alpha->span()));
      }
      worst_drift = std::max(worst_drift, drift);
    }
  }
  // Either failure mode must fail the check; fold missed no-ops into the discrepancy.
  const double discrepancy = missed > 0 ? std::max(1.0, worst_drift) : worst_drift;
  return verdict(claim_one ? "claim1-closure" : "claim2-closure", discrepancy, 1e-10,
                 std::to_string(missed) + "/" + std::to_string(expected_noops) +
                     (claim_one ? " column" : " row") + " steps not no-ops, max drift " +
                     mm::format_real(worst_drift));
}

}  // namespace detail

inline CheckResult check_claim1_closure(std::size_t instances, std::size_t steps, std::uint64_t seed) {
  return detail::iz_closure(true, instances, steps, seed);
}

inline CheckResult check_claim2_closure(std::size_t instances, std::size_t steps, std::uint64_t seed) {
  return detail::iz_closure(false, instances, steps, seed);
}

/// Fraction of column (iz0) / row (iz1) steps that were not no-ops at
/// tolerance `tol` * (1 + scale).
inline CheckResult check_iz_wasted_steps(std::size_t m, std::size_t n, std::size_t steps,
                                         double lambda, double tol, std::uint64_t seed) {
  const auto p = generate(m, n, 0.1, lambda, seed);
  std::uint64_t expected = 0, missed = 0;
  for (auto init_kind : {IZInit::IZ0, IZInit::IZ1}) {
    SolverOptions opt;
    opt.noop_tolerance = tol;
    SolverState s = init(SolverKind::IZ, p, init_kind, mix64(seed, hash_label(to_string(init_kind))), opt);
    const PickAxis wasted = init_kind == IZInit::IZ0 ? PickAxis::Column : PickAxis::Row;
    for (std::size_t k = 0; k < steps; ++k) {
      const auto r = step(s, p.X, p.y, p.lambda);
      if (r.picked_kind != wasted) continue;
      ++expected;
      if (!r.was_noop) ++missed;
    }
  }
  return detail::verdict("iz-wasted-steps", static_cast<double>(missed), 0.0,
                         std::to_string(expected) + " predicted no-ops on " + std::to_string(m) +
                             "x" + std::to_string(n) + ", " + std::to_string(missed) + " missed");
}

/// Primal and dual solved independently agree: ||beta - X^T alpha|| <= 1e-8 (1 + ||beta||).
inline CheckResult check_oracle_duality(std::size_t instances, std::size_t max_dim, std::uint64_t seed) {
  SeededRng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, max_dim);
    const auto both = solve_both_systems(p.X, p.y, p.lambda);
    const Vector xta = multiply_transpose(p.X, both.alpha_dual.span());
    worst = std::max(worst, norm((both.beta_primal - xta).span()) / (1.0 + norm(both.beta_primal.span())));
    const auto d = diagnose_oracle(p.X, p.y, p.lambda, p.oracle);
    worst = std::max({worst, d.primal_residual, d.dual_residual, d.duality_gap});
  }
  return detail::verdict("oracle-duality", worst, 1e-8,
                         std::to_string(instances) + " instances up to " + std::to_string(max_dim) +
                             "x" + std::to_string(max_dim));
}

/// |cond_A - sqrt(cond_M)| / cond_A, plus the augmented eigenvalues against
/// the values implied by the singular values of X.
inline CheckResult check_augmented_condition(std::size_t instances, std::size_t max_dim,
                                             std::uint64_t seed) {
  SeededRng rng(seed);
  double worst = 0.0, worst_eig = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, max_dim);
    const auto r = iz_condition_check(p.X, p.lambda);
    worst = std::max(worst, r.relative_discrepancy);
    const auto ev = sym_eigenvalues(build_augmented(p.X, p.lambda));
    const auto predicted = augmented_spectrum(singular_values(p.X), p.m(), p.n(), p.lambda);
    for (std::size_t k = 0; k < ev.size(); ++k) worst_eig = std::max(worst_eig, std::abs(ev[k] - predicted[k]));
  }
  const bool ok = worst <= 1e-6 && worst_eig <= 1e-8;
  CheckResult c = detail::verdict("augmented-condition", worst, 1e-6,
                                  "max eigenvalue error " + mm::format_real(worst_eig) + " (tol 1e-08)");
  c.passed = ok;
  return c;
}

/// Generated spectra: endpoints 1.0 and sigma_min, full prescribed spectrum,
/// and ||X||_F^2 = sum sigma_i^2.
inline CheckResult check_generator_spectrum(std::size_t instances, std::size_t max_dim,
                                            std::uint64_t seed) {
  SeededRng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, max_dim);
    const auto sv = singular_values(p.X);  // increasing
    auto want = prescribed_spectrum(sv.size(), p.sigma_min);
    std::reverse(want.begin(), want.end());
    double sum_sq = 0.0;
    for (std::size_t k = 0; k < sv.size(); ++k) {
      worst = std::max(worst, std::abs(sv[k] - want[k]));
      sum_sq += want[k] * want[k];
    }
    worst = std::max(worst, std::abs(frobenius_sq(p.X) - sum_sq));
  }
  return detail::verdict("generator-spectrum", worst, 1e-9,
                         std::to_string(instances) + " generated instances");
}

/// Every index is a fixed point at the oracle solution.
inline CheckResult check_fixed_points(std::size_t instances, std::uint64_t seed) {
  SeededRng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const auto p = detail::random_small_instance(rng, 12);
    for (auto kind : {SolverKind::RKRidge, SolverKind::RGSRidge}) {
      SolverState s = init(kind, p, std::nullopt, 0);
      if (kind == SolverKind::RKRidge) {
        s.alpha = p.oracle.alpha_star;
      } else {
        s.beta = p.oracle.beta_star;
      }
      refresh_mirror(s, p.X, p.y);
      const double ref = kind == SolverKind::RKRidge ? norm(p.oracle.alpha_star.span())
                                                     : norm(p.oracle.beta_star.span());
      for (std::size_t k = 0; k < s.selection_size(); ++k) {
        SolverState probe = s;
        const auto r = step_at(probe, p.X, p.y, p.lambda, k);
        worst = std::max(worst, r.delta_magnitude / (1.0 + ref));
      }
    }
  }
  return detail::verdict("fixed-point-stationarity", worst, 1e-12,
                         "every index forced at the oracle solution");
}

struct OrderingOutcome {
  double rgs_mean = 0.0;
  double rk_mean = 0.0;
};

/// Trial-mean final err_beta of rgs-ridge and rk-ridge on fresh instances.
inline OrderingOutcome ridge_ordering(std::size_t m, std::size_t n, double sigma_min, double lambda,
                                      std::size_t trials, std::uint64_t iterations,
                                      std::uint64_t seed) {
  ExperimentConfig c;
  c.dims = {{m, n}};
  c.lambdas = {lambda};
  c.sigma_mins = {sigma_min};
  c.algorithms = {{SolverKind::RGSRidge, {}}, {SolverKind::RKRidge, {}}};
  c.iterations = iterations;
  c.trace_every = iterations;
  c.trials = trials;
  c.base_seed = seed;
  c.metrics = MetricSet{true, false, false, false};
  OrderingOutcome o;
  for (const auto& r : run_grid_records(c)) {
    if (r.iteration != iterations) continue;
    (r.algorithm == "rgs-ridge" ? o.rgs_mean : o.rk_mean) += r.err_beta / static_cast<double>(trials);
  }
  return o;
}

/// rgs-ridge beats rk-ridge when m > n and loses when m < n.
inline CheckResult check_crossover(std::size_t tall_m, std::size_t tall_n, std::size_t trials,
                                   std::uint64_t iterations, std::uint64_t seed) {
  const auto tall = ridge_ordering(tall_m, tall_n, 0.1, 1e-2, trials, iterations, seed);
  const auto wide = ridge_ordering(tall_n, tall_m, 0.1, 1e-2, trials, iterations, seed);
  const bool ok = tall.rgs_mean < tall.rk_mean && wide.rk_mean < wide.rgs_mean;
  const auto dims = [](std::size_t a, std::size_t b) { return std::to_string(a) + "x" + std::to_string(b); };
  CheckResult c;
  c.name = "rgs-rk-crossover";
  c.passed = ok;
  // Worst ratio winner/loser; below 1 means the predicted winner won.
  c.discrepancy = std::max(tall.rgs_mean / tall.rk_mean, wide.rk_mean / wide.rgs_mean);
  c.tolerance = 1.0;
  c.detail = dims(tall_m, tall_n) + ": rgs " + mm::format_real(tall.rgs_mean) + " vs rk " +
             mm::format_real(tall.rk_mean) + "; " + dims(tall_n, tall_m) + ": rgs " +
             mm::format_real(wide.rgs_mean) + " vs rk " + mm::format_real(wide.rk_mean);
  return c;
}

inline constexpr std::uint64_t kVerifySeed = 20170101;

/// --quick: instances up to 12x12. --full adds the 200x50 / 50x200 ordering.
inline VerifyReport run_verification(bool full, std::uint64_t seed = kVerifySeed) {
  VerifyReport rep;
  auto run = [&](auto&& fn) {
    try {
      rep.checks.push_back(fn());
    } catch (const std::exception& e) {
      rep.checks.push_back(CheckResult{"(check aborted)", false, 0.0, 0.0, e.what()});
    }
  };
  run([&] { return check_expectation_identity(25, mix64(seed, 1)); });
  run([&] { return check_bound_dominance(25, mix64(seed, 2)); });
  run([&] { return check_claim1_closure(8, 400, mix64(seed, 3)); });
  run([&] { return check_claim2_closure(8, 400, mix64(seed, 4)); });
  run([&] { return check_iz_wasted_steps(12, 8, 2000, 1e-2, 1e-12, mix64(seed, 5)); });
  run([&] { return check_fixed_points(10, mix64(seed, 6)); });
  run([&] { return check_oracle_duality(20, 12, mix64(seed, 7)); });
  run([&] { return check_augmented_condition(10, 12, mix64(seed, 8)); });
  run([&] { return check_generator_spectrum(10, 12, mix64(seed, 9)); });
  if (full) {
    run([&] { return check_crossover(200, 50, 10, 5000, mix64(seed, 10)); });
  }
  return rep;
}

}  // namespace rkridge
