#pragma once

// Closed-form convergence theory for the ridge solvers.
//
// With Sigma' = X^T X + lambda I_n and K' = X X^T + lambda I_m, one step of
// rgs-ridge contracts E||beta - beta*||^2_Sigma' by 1 - sigma_min(Sigma') / tr(Sigma')
// and one step of rk-ridge contracts E||alpha - alpha*||^2_K' by
// 1 - sigma_min(K') / tr(K'). Because sigma_min(Sigma') = sigma_1^2 + lambda when
// m > n but only lambda when m < n (and the reverse for K'), rgs-ridge is the
// better choice for tall X and rk-ridge for wide X.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"
#include "rkridge/oracle.hpp"
#include "rkridge/solvers.hpp"

namespace rkridge {

enum class NormKind { KPrime, SigmaPrime, Euclidean, XGram };
enum class Regime { OverDetermined, UnderDetermined, Square };

constexpr std::string_view to_string(NormKind k) {
  switch (k) {
    case NormKind::KPrime: return "K'";
    case NormKind::SigmaPrime: return "Sigma'";
    case NormKind::Euclidean: return "euclidean";
    case NormKind::XGram: return "X^T X";
  }
  return "?";
}

constexpr std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::OverDetermined: return "overdetermined";
    case Regime::UnderDetermined: return "underdetermined";
    case Regime::Square: return "square";
  }
  return "?";
}

struct RateBound {
  double factor = 1.0;  // per-step contraction of the expected squared error, in [0, 1]
  NormKind norm_matrix = NormKind::Euclidean;
  SolverKind applies_to = SolverKind::RGSRidge;
  Regime regime = Regime::Square;
};

constexpr Regime regime_of(std::size_t m, std::size_t n) {
  return m > n ? Regime::OverDetermined : (n > m ? Regime::UnderDetermined : Regime::Square);
}

/// `spectrum` holds the min(m, n) singular values of X in increasing order.
/// Rank deficiency shows up as leading zeros and is used as-is.
inline RateBound contraction_factor(SolverKind kind, std::size_t m, std::size_t n, double lambda,
                                    std::span<const double> spectrum) {
  if (spectrum.empty()) throw UsageError("contraction_factor: empty spectrum");
  if (spectrum.size() != std::min(m, n)) {
    throw UsageError("contraction_factor: spectrum must have min(m, n) values");
  }
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (!(spectrum[i] >= 0.0) || (i > 0 && spectrum[i] < spectrum[i - 1])) {
      throw UsageError("contraction_factor: spectrum must be nonnegative and increasing");
    }
  }
  if (!(lambda >= 0.0)) throw UsageError("contraction_factor: lambda must be >= 0");

  const double s1_sq = spectrum.front() * spectrum.front();
  double fro_sq = 0.0;
  for (double s : spectrum) fro_sq += s * s;
  const double md = static_cast<double>(m);
  const double nd = static_cast<double>(n);

  auto one_minus = [](double num, double den) {
    if (!(den > 0.0)) return 1.0;
    return std::clamp(1.0 - num / den, 0.0, 1.0);
  };

  RateBound b;
  b.applies_to = kind;
  b.regime = regime_of(m, n);
  switch (kind) {
    case SolverKind::RKRidge: {
      // sigma_min(K') is lambda when m > n (X X^T is singular), sigma_1^2 + lambda otherwise.
      const double smin = b.regime == Regime::OverDetermined ? lambda : s1_sq + lambda;
      b.factor = one_minus(smin, fro_sq + md * lambda);
      b.norm_matrix = NormKind::KPrime;
      break;
    }
    case SolverKind::RGSRidge: {
      const double smin = b.regime == Regime::UnderDetermined ? lambda : s1_sq + lambda;
      b.factor = one_minus(smin, fro_sq + nd * lambda);
      b.norm_matrix = NormKind::SigmaPrime;
      break;
    }
    case SolverKind::PlainRK:
      b.factor = one_minus(s1_sq, fro_sq);
      b.norm_matrix = NormKind::Euclidean;
      break;
    case SolverKind::PlainRGS:
      b.factor = one_minus(s1_sq, fro_sq);
      b.norm_matrix = NormKind::XGram;
      break;
    case SolverKind::NaiveRKNormal:
    case SolverKind::NaiveRGSNormal: {
      // Plain bound applied to M = X^T X + lambda I_n, whose eigenvalues are
      // sigma_i^2 + lambda plus lambda repeated n - k times.
      const std::size_t k = spectrum.size();
      double m_fro_sq = 0.0;
      for (double s : spectrum) m_fro_sq += (s * s + lambda) * (s * s + lambda);
      m_fro_sq += static_cast<double>(n - k) * lambda * lambda;
      const double m_min = n > k ? lambda : s1_sq + lambda;
      b.factor = one_minus(m_min * m_min, m_fro_sq);
      b.norm_matrix = kind == SolverKind::NaiveRKNormal ? NormKind::Euclidean : NormKind::XGram;
      break;
    }
    case SolverKind::IZ:
      throw UsageError("contraction_factor: no closed-form factor for iz; use iz_condition_check");
  }
  return b;
}

inline RateBound contraction_factor(SolverKind kind, const Matrix& X, double lambda) {
  const auto sv = singular_values(X);
  return contraction_factor(kind, X.rows(), X.cols(), lambda, sv);
}

/// Current squared error in the norm the contraction bounds use: ||alpha - alpha*||^2_K'
/// for rk-ridge, ||beta - beta*||^2_Sigma' for rgs-ridge.
inline double weighted_error_sq(const SolverState& s, const Matrix& X, double lambda,
                                const OracleSolutions& oracle) {
  if (s.kind == SolverKind::RKRidge) {
    const double e = dual_weighted_norm(X, lambda, *s.alpha - oracle.alpha_star);
    return e * e;
  }
  if (s.kind == SolverKind::RGSRidge) {
    const double e = primal_weighted_norm(X, lambda, s.beta - oracle.beta_star);
    return e * e;
  }
  throw UsageError("weighted_error_sq: only rk-ridge and rgs-ridge have a weighted norm");
}

/// Exact E_t of the next squared weighted error, conditioned on the current state:
///   rk-ridge:  ||alpha - alpha*||^2_K'    - ||y - K' alpha||^2       / (||X||_F^2 + m lambda)
///   rgs-ridge: ||beta - beta*||^2_Sigma'  - ||X^T y - Sigma' beta||^2 / (||X||_F^2 + n lambda)
/// Uses the stored alpha / beta, never the cached mirror.
inline double expected_onestep_error(const SolverState& s, const Matrix& X, const Vector& y,
                                     double lambda, const OracleSolutions& oracle) {
  const double fro = frobenius_sq(X);
  if (s.kind == SolverKind::RKRidge) {
    const Vector& alpha = *s.alpha;
    const Vector xta = multiply_transpose(X, alpha.span());
    const Vector resid = y - (multiply(X, xta.span()) + lambda * alpha);
    const double trace = fro + static_cast<double>(X.rows()) * lambda;
    return weighted_error_sq(s, X, lambda, oracle) - norm_sq(resid.span()) / trace;
  }
  if (s.kind == SolverKind::RGSRidge) {
    const Vector xb = multiply(X, s.beta.span());
    const Vector grad = multiply_transpose(X, (y - xb).span()) - lambda * s.beta;
    const double trace = fro + static_cast<double>(X.cols()) * lambda;
    return weighted_error_sq(s, X, lambda, oracle) - norm_sq(grad.span()) / trace;
  }
  throw UsageError("expected_onestep_error: only rk-ridge and rgs-ridge are supported");
}

/// bound.factor^t * initial_error for t = 0..steps.
inline std::vector<double> bound_curve(const RateBound& bound, double initial_error,
                                       std::size_t steps) {
  if (!(initial_error >= 0.0)) throw UsageError("bound_curve: initial error must be >= 0");
  std::vector<double> out(steps + 1);
  double e = initial_error;
  for (std::size_t t = 0; t <= steps; ++t) {
    out[t] = e;
    e *= bound.factor;
  }
  return out;
}

/// [[sqrt(lambda) I_m, X], [X^T, -sqrt(lambda) I_n]]
inline Matrix build_augmented(const Matrix& X, double lambda) {
  if (!(lambda > 0.0)) throw UsageError("build_augmented: lambda must be > 0");
  const std::size_t m = X.rows();
  const std::size_t n = X.cols();
  const double root = std::sqrt(lambda);
  Matrix A(m + n, m + n);
  for (std::size_t i = 0; i < m; ++i) A(i, i) = root;
  for (std::size_t j = 0; j < n; ++j) A(m + j, m + j) = -root;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      A(i, m + j) = X(i, j);
      A(m + j, i) = X(i, j);
    }
  }
  return A;
}

/// Eigenvalues of the augmented matrix implied by the singular values of X:
/// +-sqrt(sigma_i^2 + lambda), plus sqrt(lambda) (m > n) or -sqrt(lambda) (n > m)
/// repeated |m - n| times. Sorted increasing.
inline std::vector<double> augmented_spectrum(std::span<const double> singular, std::size_t m,
                                              std::size_t n, double lambda) {
  std::vector<double> ev;
  ev.reserve(m + n);
  for (double s : singular) {
    const double r = std::sqrt(s * s + lambda);
    ev.push_back(r);
    ev.push_back(-r);
  }
  const double extra = m > n ? std::sqrt(lambda) : -std::sqrt(lambda);
  for (std::size_t i = std::min(m, n); i < std::max(m, n); ++i) ev.push_back(extra);
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct IZConditionReport {
  double cond_A = 0.0;       // spectral condition number of the augmented matrix
  double cond_M = 0.0;       // condition number of the larger regularized Gram matrix
  double cond_primal = 0.0;  // X^T X + lambda I_n
  double cond_dual = 0.0;    // X X^T + lambda I_m
  bool uses_primal = true;   // cond_M == cond_primal (n >= m)
  double relative_discrepancy = 0.0;  // |cond_A - sqrt(cond_M)| / cond_A
};

namespace detail {

inline double spd_condition(const Matrix& M) {
  const auto ev = sym_eigenvalues(M);
  if (!(ev.front() > 0.0)) throw NumericalError("condition number: matrix is singular");
  return ev.back() / ev.front();
}

}  // namespace detail

/// Condition numbers of the augmented matrix and of the regularized Gram
/// matrices, each from its own eigensolve. The square-root relation
/// cond_A = sqrt(cond_M) holds for the Gram matrix of the larger dimension:
/// A^2 = diag(K', Sigma'), and only the larger of the two carries the bare
/// lambda eigenvalue when m != n.
inline IZConditionReport iz_condition_check(const Matrix& X, double lambda) {
  if (!(lambda > 0.0)) throw UsageError("iz_condition_check: lambda must be > 0");
  IZConditionReport r;
  const auto ev = sym_eigenvalues(build_augmented(X, lambda));
  double lo = std::abs(ev.front()), hi = 0.0;
  for (double v : ev) {
    lo = std::min(lo, std::abs(v));
    hi = std::max(hi, std::abs(v));
  }
  if (!(lo > 0.0)) throw NumericalError("iz_condition_check: augmented matrix is singular");
  r.cond_A = hi / lo;
  r.cond_primal = detail::spd_condition(add_diagonal(gram_cols(X), lambda));
  r.cond_dual = detail::spd_condition(add_diagonal(gram_rows(X), lambda));
  r.uses_primal = X.cols() >= X.rows();
  r.cond_M = r.uses_primal ? r.cond_primal : r.cond_dual;
  r.relative_discrepancy = std::abs(r.cond_A - std::sqrt(r.cond_M)) / r.cond_A;
  return r;
}

}  // namespace rkridge
