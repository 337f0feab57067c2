#pragma once

// Randomized row / column solvers for ridge regression behind one
// init / step / run interface.
//
//   rk          plain Kaczmarz on X beta = y (rows sampled by ||X^i||^2)
//   rgs         plain Gauss-Seidel on X beta = y (columns sampled by ||X_(j)||^2)
//   rk-ridge    coordinate descent on the dual (X X^T + lambda I) alpha = y
//   rgs-ridge   coordinate descent on the primal (X^T X + lambda I) beta = X^T y
//   naive-rk    plain Kaczmarz on the formed normal matrix M = X^T X + lambda I
//   naive-rgs   plain Gauss-Seidel on the formed normal matrix
//   iz          Kaczmarz on the augmented system [[sqrt(l) I, X], [X^T, -sqrt(l) I]]
//
// rk-ridge keeps beta = X^T alpha as a cached "mirror" and rgs-ridge / rgs keep
// the residual y - X beta, so each step costs O(n) or O(m).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"
#include "rkridge/oracle.hpp"
#include "rkridge/problems.hpp"
#include "rkridge/random.hpp"

namespace rkridge {

enum class SolverKind { PlainRK, PlainRGS, RKRidge, RGSRidge, NaiveRKNormal, NaiveRGSNormal, IZ };

inline constexpr SolverKind kAllSolverKinds[] = {
    SolverKind::PlainRK,       SolverKind::PlainRGS,       SolverKind::RKRidge, SolverKind::RGSRidge,
    SolverKind::NaiveRKNormal, SolverKind::NaiveRGSNormal, SolverKind::IZ};

constexpr std::string_view to_string(SolverKind k) {
  switch (k) {
    case SolverKind::PlainRK: return "rk";
    case SolverKind::PlainRGS: return "rgs";
    case SolverKind::RKRidge: return "rk-ridge";
    case SolverKind::RGSRidge: return "rgs-ridge";
    case SolverKind::NaiveRKNormal: return "naive-rk";
    case SolverKind::NaiveRGSNormal: return "naive-rgs";
    case SolverKind::IZ: return "iz";
  }
  return "?";
}

inline std::optional<SolverKind> parse_solver_kind(std::string_view s) {
  for (auto k : kAllSolverKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline std::string solver_names() {
  std::string out;
  for (auto k : kAllSolverKinds) {
    if (!out.empty()) out += ", ";
    out += '"';
    out += to_string(k);
    out += '"';
  }
  return out;
}

enum class IZInit { IZ0, IZ1, IZMix, IZRnd };

inline constexpr IZInit kAllIZInits[] = {IZInit::IZ0, IZInit::IZ1, IZInit::IZMix, IZInit::IZRnd};

constexpr std::string_view to_string(IZInit i) {
  switch (i) {
    case IZInit::IZ0: return "iz0";
    case IZInit::IZ1: return "iz1";
    case IZInit::IZMix: return "izmix";
    case IZInit::IZRnd: return "izrnd";
  }
  return "?";
}

inline std::optional<IZInit> parse_iz_init(std::string_view s) {
  for (auto i : kAllIZInits)
    if (to_string(i) == s) return i;
  return std::nullopt;
}

enum class PickAxis { Row, Column };

struct StepReport {
  PickAxis picked_kind = PickAxis::Row;
  std::size_t picked_index = 0;  // row of X (or M) / column of X (or M)
  double delta_magnitude = 0.0;  // largest absolute change applied to any stored coordinate
  double scale = 0.0;            // largest |stored coordinate| the step reads or writes, mirror included
  bool was_noop = false;
};

/// A step is a no-op when delta_magnitude <= kNoopTolerance * (1 + scale).
inline constexpr double kNoopTolerance = 1e-14;

struct SolverOptions {
  std::uint64_t mirror_refresh_interval = 1'000'000;  // recompute cached vectors every N steps
  double noop_tolerance = kNoopTolerance;
};

class SolverState {
 public:
  SolverKind kind = SolverKind::RGSRidge;
  std::optional<IZInit> iz_init;
  double lambda = 0.0;

  Vector beta;                  // n; unused (empty) for rk-ridge, whose beta is the mirror
  std::optional<Vector> alpha;  // m; alpha for rk-ridge, alpha' for iz
  std::optional<Vector> mirror;  // X^T alpha (rk-ridge) or y - X beta (rgs, rgs-ridge), b - M beta (naive-rgs)

  std::optional<Matrix> normal_matrix;  // naive variants: M = X^T X + lambda I
  std::optional<Vector> normal_rhs;     // naive variants: X^T y

  WeightedSampler sampler;
  // Per-index largest |entry| of the update direction (row-projection methods
  // and iz); empty when a step changes a single coordinate.
  std::vector<double> direction_scale;
  SeededRng rng;
  std::uint64_t iteration = 0;
  std::uint64_t noop_count = 0;
  SolverOptions options;

  /// Current primal estimate: the mirror for rk-ridge, beta otherwise.
  const Vector& estimate() const { return kind == SolverKind::RKRidge ? *mirror : beta; }

  /// Number of selectable indices (rows, columns, or m + n for iz).
  std::size_t selection_size() const { return sampler.size(); }
};

namespace detail {

inline void require_kind(const SolverState& s, std::initializer_list<SolverKind> kinds,
                         const char* op) {
  for (auto k : kinds)
    if (s.kind == k) return;
  throw UsageError(std::string(op) + ": state was initialized for " +
                   std::string(to_string(s.kind)));
}

inline std::vector<double> shifted(std::vector<double> w, double shift) {
  for (double& v : w) v += shift;
  return w;
}

inline std::vector<double> row_max_abs(const Matrix& X) {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = max_abs(X.row(i));
  return out;
}

inline std::vector<double> col_max_abs(const Matrix& X) {
  std::vector<double> out(X.cols(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto r = X.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = std::max(out[j], std::abs(r[j]));
  }
  return out;
}

/// `delta` is the signed step length along the update direction for `sel`.
inline StepReport finish(SolverState& s, PickAxis axis, std::size_t index, std::size_t sel,
                         double delta, double scale) {
  StepReport r;
  r.picked_kind = axis;
  r.picked_index = index;
  r.delta_magnitude =
      std::abs(delta) * (s.direction_scale.empty() ? 1.0 : s.direction_scale[sel]);
  r.scale = scale;
  r.was_noop = r.delta_magnitude <= s.options.noop_tolerance * (1.0 + scale);
  if (r.was_noop) ++s.noop_count;
  ++s.iteration;
  return r;
}

}  // namespace detail

/// Recompute the cached mirror vector from the stored iterate.
inline void refresh_mirror(SolverState& s, const Matrix& X, const Vector& y) {
  switch (s.kind) {
    case SolverKind::RKRidge:
      s.mirror = multiply_transpose(X, s.alpha->span());
      break;
    case SolverKind::PlainRGS:
    case SolverKind::RGSRidge:
      s.mirror = y - multiply(X, s.beta.span());
      break;
    case SolverKind::NaiveRGSNormal:
      s.mirror = *s.normal_rhs - multiply(*s.normal_matrix, s.beta.span());
      break;
    default:
      break;
  }
}

inline SolverState init(SolverKind kind, const Matrix& X, const Vector& y, double lambda,
                        std::optional<IZInit> iz_init, std::uint64_t seed,
                        SolverOptions options = {}) {
  if (y.size() != X.rows()) throw UsageError("init: y length does not match X rows");
  if (!(lambda >= 0.0)) throw UsageError("init: lambda must be >= 0");
  if (iz_init.has_value() != (kind == SolverKind::IZ)) {
    throw UsageError(kind == SolverKind::IZ ? "iz requires an initialization (iz0, iz1, izmix, izrnd)"
                                            : "an iz initialization only applies to iz");
  }
  if (kind == SolverKind::IZ && !(lambda > 0.0)) {
    throw UsageError("iz requires lambda > 0");
  }
  if (options.mirror_refresh_interval == 0) throw UsageError("mirror refresh interval must be >= 1");

  const std::size_t m = X.rows();
  const std::size_t n = X.cols();
  SolverState s;
  s.kind = kind;
  s.iz_init = iz_init;
  s.lambda = lambda;
  s.rng = SeededRng(seed);
  s.options = options;

  switch (kind) {
    case SolverKind::PlainRK:
      s.beta = Vector(n);
      s.sampler = WeightedSampler(row_norms_sq(X));
      s.direction_scale = detail::row_max_abs(X);
      break;
    case SolverKind::PlainRGS:
      s.beta = Vector(n);
      s.mirror = y;
      s.sampler = WeightedSampler(col_norms_sq(X));
      break;
    case SolverKind::RKRidge:
      s.alpha = Vector(m);
      s.mirror = Vector(n);
      s.sampler = WeightedSampler(detail::shifted(row_norms_sq(X), lambda));
      break;
    case SolverKind::RGSRidge:
      s.beta = Vector(n);
      s.mirror = y;
      s.sampler = WeightedSampler(detail::shifted(col_norms_sq(X), lambda));
      break;
    case SolverKind::NaiveRKNormal:
    case SolverKind::NaiveRGSNormal: {
      s.beta = Vector(n);
      s.normal_matrix = add_diagonal(gram_cols(X), lambda);
      s.normal_rhs = multiply_transpose(X, y.span());
      // M is symmetric: its row norms are its column norms.
      s.sampler = WeightedSampler(row_norms_sq(*s.normal_matrix));
      if (kind == SolverKind::NaiveRGSNormal) {
        s.mirror = *s.normal_rhs;
      } else {
        s.direction_scale = detail::row_max_abs(*s.normal_matrix);
      }
      break;
    }
    case SolverKind::IZ: {
      const double root = std::sqrt(lambda);
      s.beta = Vector(n);
      s.alpha = Vector(m);
      switch (*iz_init) {
        case IZInit::IZ0:
          break;
        case IZInit::IZ1:
          for (std::size_t i = 0; i < m; ++i) (*s.alpha)[i] = y[i] / root;
          break;
        case IZInit::IZMix:
          for (std::size_t i = 0; i < m; ++i) (*s.alpha)[i] = y[i] / (2.0 * root);
          break;
        case IZInit::IZRnd:
          for (double& a : *s.alpha) a = s.rng.normal();
          for (double& b : s.beta) b = s.rng.normal();
          break;
      }
      std::vector<double> w = detail::shifted(row_norms_sq(X), lambda);
      const auto cw = detail::shifted(col_norms_sq(X), lambda);
      w.insert(w.end(), cw.begin(), cw.end());
      s.sampler = WeightedSampler(w);
      s.direction_scale = detail::row_max_abs(X);
      const auto cm = detail::col_max_abs(X);
      s.direction_scale.insert(s.direction_scale.end(), cm.begin(), cm.end());
      for (double& d : s.direction_scale) d = std::max(d, root);
      break;
    }
  }
  return s;
}

inline SolverState init(SolverKind kind, const ProblemInstance& p, std::optional<IZInit> iz_init,
                        std::uint64_t seed, SolverOptions options = {}) {
  return init(kind, p.X, p.y, p.lambda, iz_init, seed, options);
}

// ---------------------------------------------------------------------------
// Index-forced updates. `index` lives in the state's selection space.

namespace detail {

inline StepReport plain_rk_at(SolverState& s, const Matrix& X, const Vector& y, std::size_t i) {
  const double scale = max_abs(s.beta.span());  // every coordinate of beta is touched
  const double w = s.sampler.weights()[i];
  const double delta = (y[i] - row_dot(X, i, s.beta.span())) / w;
  row_axpy(X, i, delta, s.beta.span());
  return finish(s, PickAxis::Row, i, i, delta, scale);
}

inline StepReport plain_rgs_at(SolverState& s, const Matrix& X, std::size_t j) {
  const double scale = std::max(std::abs(s.beta[j]), max_abs(s.mirror->span()));
  const double w = s.sampler.weights()[j];
  const double delta = col_dot(X, j, s.mirror->span()) / w;
  s.beta[j] += delta;
  col_axpy(X, j, -delta, s.mirror->span());
  return finish(s, PickAxis::Column, j, j, delta, scale);
}

inline StepReport rk_ridge_at(SolverState& s, const Matrix& X, const Vector& y, double lambda,
                              std::size_t i) {
  auto& alpha = *s.alpha;
  const double scale = std::max(std::abs(alpha[i]), max_abs(s.mirror->span()));
  const double w = s.sampler.weights()[i];  // ||X^i||^2 + lambda
  const double delta = (y[i] - row_dot(X, i, s.mirror->span()) - lambda * alpha[i]) / w;
  alpha[i] += delta;
  row_axpy(X, i, delta, s.mirror->span());
  return finish(s, PickAxis::Row, i, i, delta, scale);
}

inline StepReport rgs_ridge_at(SolverState& s, const Matrix& X, double lambda, std::size_t j) {
  const double scale = std::max(std::abs(s.beta[j]), max_abs(s.mirror->span()));
  const double w = s.sampler.weights()[j];  // ||X_(j)||^2 + lambda
  const double delta = (col_dot(X, j, s.mirror->span()) - lambda * s.beta[j]) / w;
  s.beta[j] += delta;
  col_axpy(X, j, -delta, s.mirror->span());
  return finish(s, PickAxis::Column, j, j, delta, scale);
}

inline StepReport naive_rk_at(SolverState& s, std::size_t i) {
  const Matrix& M = *s.normal_matrix;
  const double scale = max_abs(s.beta.span());
  const double w = s.sampler.weights()[i];
  const double delta = ((*s.normal_rhs)[i] - row_dot(M, i, s.beta.span())) / w;
  row_axpy(M, i, delta, s.beta.span());
  return finish(s, PickAxis::Row, i, i, delta, scale);
}

inline StepReport naive_rgs_at(SolverState& s, std::size_t j) {
  const Matrix& M = *s.normal_matrix;
  const double scale = std::max(std::abs(s.beta[j]), max_abs(s.mirror->span()));
  const double w = s.sampler.weights()[j];
  const double delta = col_dot(M, j, s.mirror->span()) / w;
  s.beta[j] += delta;
  col_axpy(M, j, -delta, s.mirror->span());
  return finish(s, PickAxis::Column, j, j, delta, scale);
}

inline StepReport iz_at(SolverState& s, const Matrix& X, const Vector& y, double lambda,
                        std::size_t index) {
  const std::size_t m = X.rows();
  const double root = std::sqrt(lambda);
  auto& ap = *s.alpha;  // alpha'
  const double w = s.sampler.weights()[index];
  if (index < m) {
    // Row equation sqrt(l) alpha'_i + X^i beta = y_i.
    const std::size_t i = index;
    const double scale = std::max(std::abs(ap[i]), max_abs(s.beta.span()));
    const double delta = (y[i] - root * ap[i] - row_dot(X, i, s.beta.span())) / w;
    ap[i] += delta * root;
    row_axpy(X, i, delta, s.beta.span());
    return finish(s, PickAxis::Row, i, index, delta, scale);
  }
  // Column equation X_(j)^T alpha' - sqrt(l) beta_j = 0.
  const std::size_t j = index - m;
  const double scale = std::max(std::abs(s.beta[j]), max_abs(ap.span()));
#ifdef RKRIDGE_MUTATE_IZ_COLUMN_SIGN
  // Deliberately wrong lower-right block (+sqrt(l) I); used to prove the
  // verification suite catches a broken column update.
  const double delta = (-root * s.beta[j] - col_dot(X, j, ap.span())) / w;
  col_axpy(X, j, delta, ap.span());
  s.beta[j] += delta * root;
#else
  const double delta = (root * s.beta[j] - col_dot(X, j, ap.span())) / w;
  col_axpy(X, j, delta, ap.span());
  s.beta[j] -= delta * root;
#endif
  return finish(s, PickAxis::Column, j, index, delta, scale);
}

inline void maybe_refresh(SolverState& s, const Matrix& X, const Vector& y) {
  if (s.mirror && s.iteration % s.options.mirror_refresh_interval == 0) refresh_mirror(s, X, y);
}

}  // namespace detail

/// Apply the update for a given index, bypassing the sampler. Used by the
/// exact-expectation checks and the fixed-point tests.
inline StepReport step_at(SolverState& s, const Matrix& X, const Vector& y, double lambda,
                          std::size_t index) {
  if (index >= s.selection_size()) {
    throw UsageError("step_at: index " + std::to_string(index) + " out of range");
  }
  if (s.sampler.weights()[index] == 0.0) {
    throw UsageError("step_at: index " + std::to_string(index) + " has zero selection weight");
  }
  StepReport r;
  switch (s.kind) {
    case SolverKind::PlainRK: r = detail::plain_rk_at(s, X, y, index); break;
    case SolverKind::PlainRGS: r = detail::plain_rgs_at(s, X, index); break;
    case SolverKind::RKRidge: r = detail::rk_ridge_at(s, X, y, lambda, index); break;
    case SolverKind::RGSRidge: r = detail::rgs_ridge_at(s, X, lambda, index); break;
    case SolverKind::NaiveRKNormal: r = detail::naive_rk_at(s, index); break;
    case SolverKind::NaiveRGSNormal: r = detail::naive_rgs_at(s, index); break;
    case SolverKind::IZ: r = detail::iz_at(s, X, y, lambda, index); break;
  }
  detail::maybe_refresh(s, X, y);
  return r;
}

inline StepReport plain_rk_step(SolverState& s, const Matrix& X, const Vector& y) {
  detail::require_kind(s, {SolverKind::PlainRK}, "plain_rk_step");
  return step_at(s, X, y, 0.0, s.sampler.sample(s.rng));
}

inline StepReport plain_rgs_step(SolverState& s, const Matrix& X, const Vector& y) {
  detail::require_kind(s, {SolverKind::PlainRGS}, "plain_rgs_step");
  return step_at(s, X, y, 0.0, s.sampler.sample(s.rng));
}

inline StepReport rk_ridge_step(SolverState& s, const Matrix& X, const Vector& y, double lambda) {
  detail::require_kind(s, {SolverKind::RKRidge}, "rk_ridge_step");
  return step_at(s, X, y, lambda, s.sampler.sample(s.rng));
}

inline StepReport rgs_ridge_step(SolverState& s, const Matrix& X, const Vector& y, double lambda) {
  detail::require_kind(s, {SolverKind::RGSRidge}, "rgs_ridge_step");
  return step_at(s, X, y, lambda, s.sampler.sample(s.rng));
}

inline StepReport naive_normal_step(SolverState& s, const Matrix& X, const Vector& y,
                                    double lambda) {
  detail::require_kind(s, {SolverKind::NaiveRKNormal, SolverKind::NaiveRGSNormal},
                       "naive_normal_step");
  return step_at(s, X, y, lambda, s.sampler.sample(s.rng));
}

inline StepReport iz_step(SolverState& s, const Matrix& X, const Vector& y, double lambda) {
  detail::require_kind(s, {SolverKind::IZ}, "iz_step");
  return step_at(s, X, y, lambda, s.sampler.sample(s.rng));
}

/// One sampled step of whatever algorithm the state was initialized for.
inline StepReport step(SolverState& s, const Matrix& X, const Vector& y, double lambda) {
  return step_at(s, X, y, lambda, s.sampler.sample(s.rng));
}

// ---------------------------------------------------------------------------
// Traced runs

struct MetricSet {
  bool err_beta = true;
  bool err_normal = true;
  bool err_weighted = true;
  bool noop_count = true;

  static MetricSet all() { return {}; }
  bool operator==(const MetricSet&) const = default;
};

struct TraceRecord {
  std::string algorithm;
  std::string iz_init;  // empty unless algorithm == "iz"
  std::size_t m = 0;
  std::size_t n = 0;
  double lambda = 0.0;
  double sigma_min = 0.0;
  std::size_t trial = 0;
  std::uint64_t iteration = 0;
  // Unrequested metrics are NaN.
  double err_beta = 0.0;      // ||beta_t - beta*||
  double err_normal = 0.0;    // ||X^T X beta_t - X^T y||
  double err_weighted = 0.0;  // ||alpha_t - alpha*||_K' (rk-ridge), ||beta_t - beta*||_Sigma' (rgs-ridge), else err_beta
  std::optional<std::uint64_t> noop_count;
  std::int64_t wall_ns = 0;
};

struct RunOptions {
  std::uint64_t steps = 1;
  std::uint64_t trace_every = 1;
  MetricSet metrics;
  bool record_wall_time = false;  // off keeps traces byte-reproducible
};

/// sqrt(||X d||^2 + lambda ||d||^2) = ||d||_{X^T X + lambda I}
inline double primal_weighted_norm(const Matrix& X, double lambda, const Vector& d) {
  return std::sqrt(norm_sq(multiply(X, d.span()).span()) + lambda * norm_sq(d.span()));
}

/// sqrt(||X^T d||^2 + lambda ||d||^2) = ||d||_{X X^T + lambda I}
inline double dual_weighted_norm(const Matrix& X, double lambda, const Vector& d) {
  return std::sqrt(norm_sq(multiply_transpose(X, d.span()).span()) + lambda * norm_sq(d.span()));
}

inline TraceRecord measure(const SolverState& s, const Matrix& X, const Vector& y, double lambda,
                           const OracleSolutions& oracle, const MetricSet& metrics) {
  const double nan = std::nan("");
  TraceRecord r;
  r.algorithm = std::string(to_string(s.kind));
  if (s.iz_init) r.iz_init = std::string(to_string(*s.iz_init));
  r.m = X.rows();
  r.n = X.cols();
  r.lambda = lambda;
  r.iteration = s.iteration;
  const Vector& beta = s.estimate();
  const double eb = norm((beta - oracle.beta_star).span());
  r.err_beta = metrics.err_beta ? eb : nan;
  if (metrics.err_normal) {
    const Vector resid = multiply(X, beta.span()) - y;
    r.err_normal = norm(multiply_transpose(X, resid.span()).span());
  } else {
    r.err_normal = nan;
  }
  if (metrics.err_weighted) {
    if (s.kind == SolverKind::RKRidge) {
      r.err_weighted = dual_weighted_norm(X, lambda, *s.alpha - oracle.alpha_star);
    } else if (s.kind == SolverKind::RGSRidge) {
      r.err_weighted = primal_weighted_norm(X, lambda, s.beta - oracle.beta_star);
    } else {
      r.err_weighted = eb;
    }
  } else {
    r.err_weighted = nan;
  }
  if (metrics.noop_count) r.noop_count = s.noop_count;
  return r;
}

/// Advance `steps` times, recording at iteration 0 and every multiple of trace_every.
inline std::vector<TraceRecord> run(SolverState& s, const Matrix& X, const Vector& y,
                                    double lambda, const RunOptions& opt,
                                    const OracleSolutions& oracle) {
  if (opt.steps < 1) throw UsageError("run: steps must be >= 1");
  if (opt.trace_every < 1) throw UsageError("run: trace_every must be >= 1");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto stamp = [&](TraceRecord r) {
    if (opt.record_wall_time) {
      r.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count();
    }
    return r;
  };

  std::vector<TraceRecord> out;
  out.reserve(opt.steps / opt.trace_every + 1);
  out.push_back(stamp(measure(s, X, y, lambda, oracle, opt.metrics)));
  for (std::uint64_t t = 1; t <= opt.steps; ++t) {
    step(s, X, y, lambda);
    if (t % opt.trace_every == 0) out.push_back(stamp(measure(s, X, y, lambda, oracle, opt.metrics)));
  }
  return out;
}

inline std::vector<TraceRecord> run(SolverState& s, const ProblemInstance& p, const RunOptions& opt) {
  auto out = run(s, p.X, p.y, p.lambda, opt, p.oracle);
  for (auto& r : out) r.sigma_min = p.sigma_min;
  return out;
}

}  // namespace rkridge
