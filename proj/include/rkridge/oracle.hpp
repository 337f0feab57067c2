#pragma once

// Direct solutions of the primal system (X^T X + lambda I) beta = X^T y and the
// dual system (X X^T + lambda I) alpha = y, used as ground truth for every
// iterative method.

#include <algorithm>
#include <cmath>
#include <string>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"

namespace rkridge {

struct OracleSolutions {
  Vector beta_star;         // primal solution
  Vector alpha_star;        // dual solution, beta_star = X^T alpha_star
  Vector alpha_prime_star;  // sqrt(lambda) * alpha_star, the augmented-system variable
};

/// Solve whichever of the primal (n x n) or dual (m x m) systems is smaller and
/// map to the other one. lambda == 0 is allowed as long as the smaller Gram
/// matrix is nonsingular.
inline OracleSolutions compute_oracle(const Matrix& X, const Vector& y, double lambda) {
  if (y.size() != X.rows()) throw UsageError("oracle: y length does not match X rows");
  if (!(lambda >= 0.0)) throw UsageError("oracle: lambda must be nonnegative");
  OracleSolutions o;
  if (X.cols() <= X.rows()) {
    const Matrix primal = add_diagonal(gram_cols(X), lambda);
    o.beta_star = solve_spd(primal, multiply_transpose(X, y.span()).span());
    if (lambda > 0.0) {
      // X^T (y - X beta) = lambda beta, so alpha = (y - X beta) / lambda.
      o.alpha_star = (1.0 / lambda) * (y - multiply(X, o.beta_star.span()));
    } else {
      // Least-squares dual representative: alpha = X (X^T X)^{-1} beta.
      o.alpha_star = multiply(X, solve_spd(primal, o.beta_star.span()).span());
    }
  } else {
    const Matrix dual = add_diagonal(gram_rows(X), lambda);
    o.alpha_star = solve_spd(dual, y.span());
    o.beta_star = multiply_transpose(X, o.alpha_star.span());
  }
  o.alpha_prime_star = std::sqrt(lambda) * o.alpha_star;
  return o;
}

/// Residuals and duality gap of an oracle, each relative to the scale of its equation.
struct OracleDiagnostics {
  double primal_residual = 0.0;  // ||Sigma' beta - X^T y|| / (||Sigma'||_F ||beta|| + ||X^T y||)
  double dual_residual = 0.0;    // ||K' alpha - y|| / (||K'||_F ||alpha|| + ||y||), NaN if undefined
  double duality_gap = 0.0;      // ||beta - X^T alpha|| / (1 + ||beta||)
};

inline OracleDiagnostics diagnose_oracle(const Matrix& X, const Vector& y, double lambda,
                                         const OracleSolutions& o) {
  OracleDiagnostics d;
  const Vector xty = multiply_transpose(X, y.span());
  const Vector xb = multiply(X, o.beta_star.span());
  const Vector primal_lhs = multiply_transpose(X, xb.span()) + lambda * o.beta_star;
  const double fro_x = frobenius_sq(X);
  // ||Sigma'||_F <= ||X||_F^2 + sqrt(n) lambda, which is all the scale we need.
  const double sigma_fro = fro_x + std::sqrt(static_cast<double>(X.cols())) * lambda;
  d.primal_residual = norm((primal_lhs - xty).span()) /
                      (sigma_fro * norm(o.beta_star.span()) + norm(xty.span()) + 1e-300);

  const Vector xta = multiply_transpose(X, o.alpha_star.span());
  if (lambda > 0.0 || X.rows() <= X.cols()) {
    const Vector dual_lhs = multiply(X, xta.span()) + lambda * o.alpha_star;
    const double k_fro = fro_x + std::sqrt(static_cast<double>(X.rows())) * lambda;
    d.dual_residual = norm((dual_lhs - y).span()) /
                      (k_fro * norm(o.alpha_star.span()) + norm(y.span()) + 1e-300);
  } else {
    d.dual_residual = std::nan("");
  }
  d.duality_gap = norm((o.beta_star - xta).span()) / (1.0 + norm(o.beta_star.span()));
  return d;
}

/// Primal and dual solved independently, each by its own Cholesky factorization.
struct IndependentSolutions {
  Vector beta_primal;
  Vector alpha_dual;
};

inline IndependentSolutions solve_both_systems(const Matrix& X, const Vector& y, double lambda) {
  if (!(lambda > 0.0)) throw UsageError("independent solves need lambda > 0");
  IndependentSolutions s;
  s.beta_primal = solve_spd(add_diagonal(gram_cols(X), lambda),
                            multiply_transpose(X, y.span()).span());
  s.alpha_dual = solve_spd(add_diagonal(gram_rows(X), lambda), y.span());
  return s;
}

}  // namespace rkridge
