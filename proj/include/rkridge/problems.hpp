#pragma once

// Synthetic ridge instances X = U S V^T with a geometric singular spectrum from
// 1.0 down to sigma_min, y = X beta_true + standard Gaussian noise.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"
#include "rkridge/matrix_market.hpp"
#include "rkridge/oracle.hpp"
#include "rkridge/random.hpp"

namespace rkridge {

struct ProblemInstance {
  Matrix X;
  Vector y;
  double lambda = 0.0;
  Vector beta_true;
  double sigma_min = 1.0;
  std::uint64_t seed = 0;
  OracleSolutions oracle;

  std::size_t m() const noexcept { return X.rows(); }
  std::size_t n() const noexcept { return X.cols(); }
};

/// sigma_min^{(i-1)/(k-1)} for i = 1..k: descending from 1.0 to sigma_min; [1.0] when k == 1.
inline std::vector<double> prescribed_spectrum(std::size_t k, double sigma_min) {
  std::vector<double> s(k, 1.0);
  if (k > 1) {
    for (std::size_t i = 0; i < k; ++i) {
      s[i] = std::pow(sigma_min, static_cast<double>(i) / static_cast<double>(k - 1));
    }
    s.back() = sigma_min;
  }
  return s;
}

namespace detail {

/// Orthonormalize the rows of Q in place by modified Gram-Schmidt with one
/// re-orthogonalization pass. Returns false on numerical breakdown.
inline bool orthonormalize_rows(Matrix& Q) {
  constexpr double kBreakdown = 1e-10;
  for (std::size_t j = 0; j < Q.rows(); ++j) {
    auto v = Q.row(j);
    const double original = norm(v);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t l = 0; l < j; ++l) {
        const auto q = Q.row(l);
        const double r = dot(q, v);
        for (std::size_t t = 0; t < v.size(); ++t) v[t] -= r * q[t];
      }
    }
    const double len = norm(v);
    if (!(len > kBreakdown * original) || original == 0.0) return false;
    for (double& x : v) x /= len;
  }
  return true;
}

inline Matrix gaussian(std::size_t rows, std::size_t cols, SeededRng& rng) {
  Matrix G(rows, cols);
  for (double& x : G.data()) x = rng.normal();
  return G;
}

}  // namespace detail

/// Deterministic in (m, n, sigma_min, lambda, seed). Random draws happen in the
/// order: U (column by column), V (column by column), beta_true, noise.
inline ProblemInstance generate(std::size_t m, std::size_t n, double sigma_min, double lambda,
                                std::uint64_t seed) {
  if (m == 0 || n == 0) throw UsageError("generate: m and n must be positive");
  if (!(sigma_min > 0.0 && sigma_min <= 1.0)) throw UsageError("sigma-min must be in (0,1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be >= 0");

  const std::size_t k = std::min(m, n);
  const auto spectrum = prescribed_spectrum(k, sigma_min);

  constexpr int kMaxRetries = 3;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    SeededRng rng(attempt == 0 ? seed : mix64(seed, static_cast<std::uint64_t>(attempt)));
    // Rows of Ut / Vt are the columns of U / V.
    Matrix Ut = detail::gaussian(k, m, rng);
    Matrix Vt = detail::gaussian(k, n, rng);
    if (!detail::orthonormalize_rows(Ut) || !detail::orthonormalize_rows(Vt)) continue;

    ProblemInstance p;
    p.X = Matrix(m, n);
    for (std::size_t l = 0; l < k; ++l) {
      const auto u = Ut.row(l);
      const auto v = Vt.row(l);
      const double s = spectrum[l];
      for (std::size_t i = 0; i < m; ++i) {
        const double su = s * u[i];
        auto xr = p.X.row(i);
        for (std::size_t j = 0; j < n; ++j) xr[j] += su * v[j];
      }
    }
    p.beta_true = Vector(n);
    for (double& b : p.beta_true) b = rng.normal();
    p.y = multiply(p.X, p.beta_true.span());
    for (double& v : p.y) v += rng.normal();
    p.lambda = lambda;
    p.sigma_min = sigma_min;
    p.seed = seed;
    p.oracle = compute_oracle(p.X, p.y, lambda);
    return p;
  }
  throw NumericalError("generate: Gram-Schmidt broke down after " +
                       std::to_string(kMaxRetries) + " retries");
}

/// Build an instance from explicit data (tests, hand-made fixtures).
inline ProblemInstance make_instance(Matrix X, Vector y, double lambda,
                                     Vector beta_true = {}, double sigma_min = 1.0,
                                     std::uint64_t seed = 0) {
  if (y.size() != X.rows()) throw UsageError("make_instance: y length does not match X rows");
  ProblemInstance p;
  p.oracle = compute_oracle(X, y, lambda);
  p.X = std::move(X);
  p.y = std::move(y);
  p.lambda = lambda;
  p.beta_true = beta_true.empty() ? Vector(p.X.cols()) : std::move(beta_true);
  p.sigma_min = sigma_min;
  p.seed = seed;
  return p;
}

// ---------------------------------------------------------------------------
// Instance directories: X.mtx, y.mtx, beta_true.mtx and meta.txt (key=value).

inline constexpr const char* kMetaFile = "meta.txt";
inline constexpr double kOracleTolerance = 1e-8;

inline void validate_oracle(const ProblemInstance& p) {
  const auto d = diagnose_oracle(p.X, p.y, p.lambda, p.oracle);
  if (!(d.primal_residual <= kOracleTolerance)) {
    throw ValidationError("oracle primal residual " + mm::format_real(d.primal_residual) +
                          " exceeds tolerance");
  }
  if (!std::isnan(d.dual_residual) && !(d.dual_residual <= kOracleTolerance)) {
    throw ValidationError("oracle dual residual " + mm::format_real(d.dual_residual) +
                          " exceeds tolerance");
  }
  if (!(d.duality_gap <= kOracleTolerance)) {
    throw ValidationError("oracle duality gap " + mm::format_real(d.duality_gap) +
                          " exceeds tolerance");
  }
}

inline void save(const ProblemInstance& p, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  mm::write_file((dir / "X.mtx").string(), p.X);
  mm::write_file((dir / "y.mtx").string(), mm::as_column(p.y));
  mm::write_file((dir / "beta_true.mtx").string(), mm::as_column(p.beta_true));
  std::ofstream meta(dir / kMetaFile, std::ios::binary);
  if (!meta) throw IoError("cannot write '" + (dir / kMetaFile).string() + "'");
  meta << "m=" << p.m() << '\n'
       << "n=" << p.n() << '\n'
       << "lambda=" << mm::format_real(p.lambda) << '\n'
       << "sigma_min=" << mm::format_real(p.sigma_min) << '\n'
       << "seed=" << p.seed << '\n';
  if (!meta) throw IoError("write to '" + (dir / kMetaFile).string() + "' failed");
}

namespace detail {

inline std::map<std::string, std::string> read_meta(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::map<std::string, std::string> kv;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    const auto body = mm::detail::trim(text);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, path.string() + ": expected key=value");
    kv[std::string(mm::detail::trim(body.substr(0, eq)))] =
        std::string(mm::detail::trim(body.substr(eq + 1)));
  }
  for (const char* key : {"m", "n", "lambda", "sigma_min", "seed"}) {
    if (!kv.count(key)) throw ParseError(0, path.string() + ": missing key '" + key + "'");
  }
  return kv;
}

template <typename T>
T parse_number(const std::string& text, const std::string& what) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(0, "invalid value for " + what + ": '" + text + "'");
  }
  return v;
}

}  // namespace detail

/// Reads an instance directory, recomputes the oracle and validates it.
inline ProblemInstance load(const std::filesystem::path& dir) {
  const auto meta = detail::read_meta(dir / kMetaFile);
  const auto m = detail::parse_number<std::size_t>(meta.at("m"), "m");
  const auto n = detail::parse_number<std::size_t>(meta.at("n"), "n");
  const auto lambda = detail::parse_number<double>(meta.at("lambda"), "lambda");
  const auto sigma_min = detail::parse_number<double>(meta.at("sigma_min"), "sigma_min");
  const auto seed = detail::parse_number<std::uint64_t>(meta.at("seed"), "seed");

  Matrix X = mm::read_file((dir / "X.mtx").string());
  Vector y = mm::as_vector(mm::read_file((dir / "y.mtx").string()), "y.mtx");
  Vector beta_true = mm::as_vector(mm::read_file((dir / "beta_true.mtx").string()), "beta_true.mtx");

  if (X.rows() != m || X.cols() != n) {
    throw ValidationError("X.mtx is " + std::to_string(X.rows()) + "x" + std::to_string(X.cols()) +
                          " but meta says " + std::to_string(m) + "x" + std::to_string(n));
  }
  if (y.size() != m) throw ValidationError("y.mtx length does not match m");
  if (beta_true.size() != n) throw ValidationError("beta_true.mtx length does not match n");
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(sigma_min > 0.0 && sigma_min <= 1.0)) throw ValidationError("sigma_min must be in (0,1]");

  ProblemInstance p;
  p.X = std::move(X);
  p.y = std::move(y);
  p.beta_true = std::move(beta_true);
  p.lambda = lambda;
  p.sigma_min = sigma_min;
  p.seed = seed;
  try {
    p.oracle = compute_oracle(p.X, p.y, p.lambda);
  } catch (const NumericalError& e) {
    throw ValidationError(std::string("oracle recomputation failed: ") + e.what());
  }
  validate_oracle(p);
  return p;
}

}  // namespace rkridge
