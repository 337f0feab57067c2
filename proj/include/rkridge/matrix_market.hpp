#pragma once

// MatrixMarket dense "array real general" files. Entries are stored
// column-major, one per line, printed with 17 significant digits so that a
// write/read cycle is bit-exact.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "rkridge/densela.hpp"
#include "rkridge/error.hpp"

namespace rkridge::mm {

inline constexpr std::string_view kArrayHeader = "%%MatrixMarket matrix array real general";

inline std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return {buf, static_cast<std::size_t>(len)};
}

inline void write(std::ostream& os, const Matrix& A) {
  os << kArrayHeader << '\n' << A.rows() << ' ' << A.cols() << '\n';
  for (std::size_t j = 0; j < A.cols(); ++j)
    for (std::size_t i = 0; i < A.rows(); ++i) os << format_real(A(i, j)) << '\n';
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "invalid real value '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value");
  return v;
}

inline std::size_t parse_dim(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    throw ParseError(line, "invalid dimension '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

inline Matrix read(std::istream& is) {
  std::string text;
  std::size_t line_no = 0;

  if (!std::getline(is, text)) throw ParseError(1, "empty file");
  ++line_no;
  {
    std::istringstream hs{std::string(detail::trim(text))};
    std::string banner, object, format, field, symmetry;
    hs >> banner >> object >> format >> field >> symmetry;
    if (banner != "%%MatrixMarket") throw ParseError(line_no, "missing %%MatrixMarket banner");
    if (detail::lower(object) != "matrix" || detail::lower(format) != "array" ||
        detail::lower(field) != "real" || detail::lower(symmetry) != "general") {
      throw ParseError(line_no, "only 'matrix array real general' is supported");
    }
  }

  // Skip comments and blank lines up to the size line.
  std::string_view body;
  while (true) {
    if (!std::getline(is, text)) throw ParseError(line_no + 1, "missing size line");
    ++line_no;
    body = detail::trim(text);
    if (!body.empty() && body.front() != '%') break;
  }
  std::size_t rows = 0, cols = 0;
  {
    std::istringstream ss{std::string(body)};
    std::string r, c, extra;
    ss >> r >> c;
    if (r.empty() || c.empty() || (ss >> extra)) throw ParseError(line_no, "expected 'rows cols'");
    rows = detail::parse_dim(r, line_no);
    cols = detail::parse_dim(c, line_no);
  }

  Matrix A(rows, cols);
  const std::size_t expected = rows * cols;
  std::size_t k = 0;
  while (std::getline(is, text)) {
    ++line_no;
    body = detail::trim(text);
    if (body.empty() || body.front() == '%') continue;
    if (k == expected) throw ParseError(line_no, "more entries than " + std::to_string(expected));
    const double v = detail::parse_real(body, line_no);
    A(k % rows, k / rows) = v;
    ++k;
  }
  if (k != expected) {
    throw ParseError(line_no, "expected " + std::to_string(expected) + " entries, found " +
                                  std::to_string(k));
  }
  return A;
}

inline void write_file(const std::string& path, const Matrix& A) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write(os, A);
  if (!os) throw IoError("write to '" + path + "' failed");
}

inline Matrix read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return read(is);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + std::string(e.what()), false);
  }
}

inline Matrix as_column(const Vector& v) {
  return Matrix(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

inline Vector as_vector(const Matrix& A, const std::string& what) {
  if (A.cols() != 1) throw ValidationError(what + ": expected a single column");
  return Vector(std::vector<double>(A.data().begin(), A.data().end()));
}

}  // namespace rkridge::mm
