#pragma once

// Experiment grid: every (dims x lambda x sigma_min) cell, every trial, every
// algorithm, with traces streamed as CSV in a fixed (cell, trial, algorithm,
// iteration) order regardless of how trials are scheduled across threads.

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "rkridge/error.hpp"
#include "rkridge/matrix_market.hpp"
#include "rkridge/problems.hpp"
#include "rkridge/random.hpp"
#include "rkridge/solvers.hpp"

namespace rkridge {

struct AlgorithmSpec {
  SolverKind kind = SolverKind::RGSRidge;
  std::optional<IZInit> iz_init;

  /// "rgs-ridge", "iz0", ... (the config-file token).
  std::string token() const {
    return iz_init ? std::string(to_string(*iz_init)) : std::string(to_string(kind));
  }
  /// Stream label used for seed derivation: "rgs-ridge", "iz/iz0", ...
  std::string stream_label() const {
    return iz_init ? "iz/" + std::string(to_string(*iz_init)) : std::string(to_string(kind));
  }
  bool operator==(const AlgorithmSpec&) const = default;
};

inline std::optional<AlgorithmSpec> parse_algorithm(std::string_view tok) {
  if (auto k = parse_solver_kind(tok); k && *k != SolverKind::IZ) return AlgorithmSpec{*k, {}};
  if (tok.starts_with("iz:") || tok.starts_with("iz/")) tok.remove_prefix(3);
  if (auto i = parse_iz_init(tok)) return AlgorithmSpec{SolverKind::IZ, *i};
  return std::nullopt;
}

struct ExperimentConfig {
  std::vector<std::pair<std::size_t, std::size_t>> dims = {{1000, 1000}, {10000, 100}, {100, 10000}};
  std::vector<double> lambdas = {1e-3, 1e-2, 1e-1};
  std::vector<double> sigma_mins = {1.0, 1e-1, 1e-2, 1e-3};
  std::vector<AlgorithmSpec> algorithms = {
      {SolverKind::RGSRidge, {}},         {SolverKind::RKRidge, {}},
      {SolverKind::IZ, IZInit::IZ0},      {SolverKind::IZ, IZInit::IZ1},
      {SolverKind::IZ, IZInit::IZMix},    {SolverKind::IZ, IZInit::IZRnd}};
  std::uint64_t iterations = 10000;
  std::uint64_t trace_every = 100;
  std::uint64_t trials = 20;
  std::uint64_t base_seed = 1;
  MetricSet metrics;

  void validate() const {
    if (dims.empty() || lambdas.empty() || sigma_mins.empty() || algorithms.empty()) {
      throw UsageError("config: dims, lambdas, sigma_mins and algorithms must be nonempty");
    }
    for (auto [m, n] : dims)
      if (m == 0 || n == 0) throw UsageError("config: dimensions must be positive");
    for (double l : lambdas)
      if (!(l > 0.0) || !std::isfinite(l)) throw UsageError("config: lambdas must be positive");
    for (double s : sigma_mins)
      if (!(s > 0.0 && s <= 1.0)) throw UsageError("config: sigma_mins must be in (0,1]");
    if (trace_every < 1) throw UsageError("config: trace_every must be >= 1");
    if (iterations < trace_every) throw UsageError("config: iterations must be >= trace_every");
    if (trials < 1) throw UsageError("config: trials must be >= 1");
  }

  std::size_t cell_count() const { return dims.size() * lambdas.size() * sigma_mins.size(); }
  std::uint64_t records_per_run() const { return iterations / trace_every + 1; }
};

/// cells x trials x algorithms x (iterations / trace_every + 1)
inline std::uint64_t planned_record_count(const ExperimentConfig& c) {
  return c.cell_count() * c.trials * c.algorithms.size() * c.records_per_run();
}

// ---------------------------------------------------------------------------
// Config files: `key = value` lines, '#' comments, comma-separated lists,
// dims as "1000x1000,10000x100".

namespace detail {

inline std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto tok = mm::detail::trim(s.substr(0, comma));
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_scalar(std::string_view tok, std::size_t line, std::string_view key) {
  T v{};
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError(line, "invalid value '" + std::string(tok) + "' for " + std::string(key));
  }
  return v;
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig c;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    std::string_view body = text;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = mm::detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(line, "expected 'key = value': " + text);
    const auto key = mm::detail::trim(body.substr(0, eq));
    const auto value = mm::detail::trim(body.substr(eq + 1));
    const auto items = detail::split_list(value);
    if (items.empty()) throw ParseError(line, "empty value for " + std::string(key));

    if (key == "dims") {
      c.dims.clear();
      for (auto tok : items) {
        const auto x = tok.find_first_of("xX");
        if (x == std::string_view::npos) throw ParseError(line, "dims entries look like 1000x100");
        const auto m = detail::parse_scalar<std::size_t>(mm::detail::trim(tok.substr(0, x)), line, key);
        const auto n = detail::parse_scalar<std::size_t>(mm::detail::trim(tok.substr(x + 1)), line, key);
        if (m == 0 || n == 0) throw ParseError(line, "dimensions must be positive");
        c.dims.emplace_back(m, n);
      }
    } else if (key == "lambdas" || key == "sigma_mins") {
      std::vector<double> vals;
      for (auto tok : items) vals.push_back(detail::parse_scalar<double>(tok, line, key));
      (key == "lambdas" ? c.lambdas : c.sigma_mins) = std::move(vals);
    } else if (key == "algorithms") {
      c.algorithms.clear();
      for (auto tok : items) {
        auto a = parse_algorithm(tok);
        if (!a) {
          throw ParseError(line, "unknown algorithm '" + std::string(tok) +
                                     "' (use rk, rgs, rk-ridge, rgs-ridge, naive-rk, naive-rgs, "
                                     "iz0, iz1, izmix, izrnd)");
        }
        c.algorithms.push_back(*a);
      }
    } else if (key == "metrics") {
      c.metrics = MetricSet{false, false, false, false};
      for (auto tok : items) {
        if (tok == "err_beta") c.metrics.err_beta = true;
        else if (tok == "err_normal") c.metrics.err_normal = true;
        else if (tok == "err_weighted") c.metrics.err_weighted = true;
        else if (tok == "noop_count") c.metrics.noop_count = true;
        else throw ParseError(line, "unknown metric '" + std::string(tok) + "'");
      }
    } else if (key == "iterations" || key == "trace_every" || key == "trials" || key == "base_seed") {
      if (items.size() != 1) throw ParseError(line, std::string(key) + " takes a single value");
      const auto v = detail::parse_scalar<std::uint64_t>(items.front(), line, key);
      if (key == "iterations") c.iterations = v;
      else if (key == "trace_every") c.trace_every = v;
      else if (key == "trials") c.trials = v;
      else c.base_seed = v;
    } else {
      throw ParseError(line, "unknown key '" + std::string(key) + "'");
    }
  }
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw ParseError(0, e.what());
  }
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

// ---------------------------------------------------------------------------
// Seeds

/// Instance seed for one (cell, trial): base_seed XOR a splitmix chain over the
/// cell fields, so any single cell can be re-run in isolation.
inline std::uint64_t instance_seed(std::uint64_t base_seed, std::size_t m, std::size_t n,
                                   double lambda, double sigma_min, std::uint64_t trial) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(m));
  h = mix64(h, static_cast<std::uint64_t>(n));
  h = mix64(h, std::bit_cast<std::uint64_t>(lambda));
  h = mix64(h, std::bit_cast<std::uint64_t>(sigma_min));
  h = mix64(h, trial);
  return base_seed ^ h;
}

inline std::uint64_t algorithm_seed(std::uint64_t instance, const AlgorithmSpec& a) {
  return mix64(instance, hash_label(a.stream_label()));
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader =
    "algorithm,iz_init,m,n,lambda,sigma_min,trial,iteration,err_beta,err_normal,err_weighted,"
    "noop_count,wall_ns";

namespace detail {

inline std::string csv_real(double v) { return std::isnan(v) ? std::string() : mm::format_real(v); }

}  // namespace detail

inline std::string to_csv_row(const TraceRecord& r) {
  std::string s;
  s.reserve(160);
  s += r.algorithm;
  s += ',';
  s += r.iz_init;
  s += ',' + std::to_string(r.m) + ',' + std::to_string(r.n) + ',';
  s += mm::format_real(r.lambda) + ',' + mm::format_real(r.sigma_min) + ',';
  s += std::to_string(r.trial) + ',' + std::to_string(r.iteration) + ',';
  s += detail::csv_real(r.err_beta) + ',' + detail::csv_real(r.err_normal) + ',' +
       detail::csv_real(r.err_weighted) + ',';
  if (r.noop_count) s += std::to_string(*r.noop_count);
  s += ',' + std::to_string(r.wall_ns);
  return s;
}

inline void write_csv(std::ostream& os, const std::vector<TraceRecord>& records) {
  os << kCsvHeader << '\n';
  for (const auto& r : records) os << to_csv_row(r) << '\n';
}

inline std::vector<TraceRecord> read_csv(std::istream& is) {
  std::string text;
  std::size_t line = 1;
  if (!std::getline(is, text) || text != kCsvHeader) throw ParseError(1, "unexpected CSV header");
  std::vector<TraceRecord> out;
  while (std::getline(is, text)) {
    ++line;
    if (text.empty() || text.front() == '#') continue;
    std::vector<std::string_view> f;
    std::string_view rest = text;
    while (true) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 13) throw ParseError(line, "expected 13 CSV fields");
    auto real = [&](std::string_view tok) {
      return tok.empty() ? std::nan("") : detail::parse_scalar<double>(tok, line, "csv");
    };
    TraceRecord r;
    r.algorithm = std::string(f[0]);
    r.iz_init = std::string(f[1]);
    r.m = detail::parse_scalar<std::size_t>(f[2], line, "m");
    r.n = detail::parse_scalar<std::size_t>(f[3], line, "n");
    r.lambda = real(f[4]);
    r.sigma_min = real(f[5]);
    r.trial = detail::parse_scalar<std::size_t>(f[6], line, "trial");
    r.iteration = detail::parse_scalar<std::uint64_t>(f[7], line, "iteration");
    r.err_beta = real(f[8]);
    r.err_normal = real(f[9]);
    r.err_weighted = real(f[10]);
    if (!f[11].empty()) r.noop_count = detail::parse_scalar<std::uint64_t>(f[11], line, "noop_count");
    r.wall_ns = detail::parse_scalar<std::int64_t>(f[12], line, "wall_ns");
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid execution

struct GridOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  bool record_wall_time = false;
  std::ostream* progress = nullptr;  // one line per finished cell, if set
};

struct GridSummary {
  std::size_t cells = 0;
  std::uint64_t trials_run = 0;
  std::uint64_t records = 0;
  double wall_seconds = 0.0;
};

/// All records for one trial of one cell, every algorithm on the same instance.
inline std::vector<TraceRecord> run_trial(const ExperimentConfig& c, std::size_t m, std::size_t n,
                                          double lambda, double sigma_min, std::uint64_t trial,
                                          bool record_wall_time) {
  const std::uint64_t seed = instance_seed(c.base_seed, m, n, lambda, sigma_min, trial);
  const ProblemInstance p = generate(m, n, sigma_min, lambda, seed);
  RunOptions ro;
  ro.steps = c.iterations;
  ro.trace_every = c.trace_every;
  ro.metrics = c.metrics;
  ro.record_wall_time = record_wall_time;
  std::vector<TraceRecord> out;
  out.reserve(c.algorithms.size() * c.records_per_run());
  for (const auto& a : c.algorithms) {
    SolverState s = init(a.kind, p, a.iz_init, algorithm_seed(seed, a));
    for (auto& r : run(s, p, ro)) {
      r.trial = static_cast<std::size_t>(trial);
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Runs the grid, handing records to `sink` in deterministic order.
inline GridSummary run_grid(const ExperimentConfig& c,
                            const std::function<void(const TraceRecord&)>& sink,
                            const GridOptions& opt = {}) {
  c.validate();
  const auto start = std::chrono::steady_clock::now();

  struct Task {
    std::size_t m, n;
    double lambda, sigma_min;
    std::uint64_t trial;
  };
  std::vector<Task> tasks;
  for (auto [m, n] : c.dims)
    for (double l : c.lambdas)
      for (double s : c.sigma_mins)
        for (std::uint64_t t = 0; t < c.trials; ++t) tasks.push_back({m, n, l, s, t});

  unsigned threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
  GridSummary summary;
  summary.cells = c.cell_count();

  for (std::size_t first = 0; first < tasks.size(); first += threads) {
    const std::size_t last = std::min(tasks.size(), first + threads);
    std::vector<std::future<std::vector<TraceRecord>>> pending;
    for (std::size_t k = first; k < last; ++k) {
      const Task t = tasks[k];
      auto job = [&c, t, &opt] {
        return run_trial(c, t.m, t.n, t.lambda, t.sigma_min, t.trial, opt.record_wall_time);
      };
      pending.push_back(std::async(last - first > 1 ? std::launch::async : std::launch::deferred, job));
    }
    for (std::size_t k = first; k < last; ++k) {
      for (const auto& r : pending[k - first].get()) {
        sink(r);
        ++summary.records;
      }
      ++summary.trials_run;
      const Task& t = tasks[k];
      if (opt.progress && t.trial + 1 == c.trials) {
        *opt.progress << "cell " << t.m << "x" << t.n << " lambda=" << t.lambda
                      << " sigma_min=" << t.sigma_min << " done" << std::endl;
      }
    }
  }
  summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}

/// Runs the grid and streams CSV to `out`. On a stream failure a
/// "# partial output" marker is attempted and IoError is thrown.
inline GridSummary run_grid(const ExperimentConfig& c, std::ostream& out, const GridOptions& opt = {}) {
  out << kCsvHeader << '\n';
  std::uint64_t written = 0;
  auto fail = [&] {
    out.clear();
    out << "# partial output: aborted after " << written << " records\n";
    out.flush();
    throw IoError("CSV write failed after " + std::to_string(written) + " records");
  };
  if (!out) fail();
  auto summary = run_grid(
      c,
      [&](const TraceRecord& r) {
        out << to_csv_row(r) << '\n';
        if (!out) fail();
        ++written;
      },
      opt);
  out.flush();
  if (!out) fail();
  return summary;
}

inline std::vector<TraceRecord> run_grid_records(const ExperimentConfig& c, const GridOptions& opt = {}) {
  std::vector<TraceRecord> out;
  out.reserve(planned_record_count(c));
  run_grid(c, [&](const TraceRecord& r) { out.push_back(r); }, opt);
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation across trials

enum class Statistic { Mean, Median };

struct AggregatePoint {
  std::string algorithm;
  std::string iz_init;
  std::size_t m = 0, n = 0;
  double lambda = 0.0, sigma_min = 0.0;
  std::uint64_t iteration = 0;
  std::size_t trials = 0;
  double err_beta = 0.0, err_normal = 0.0, err_weighted = 0.0, noop_count = 0.0;
};

namespace detail {

inline double reduce(std::vector<double> v, Statistic stat) {
  if (v.empty()) return std::nan("");
  if (stat == Statistic::Mean) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace detail

/// Per (algorithm, iz_init, m, n, lambda, sigma_min, iteration) statistic over
/// trials. Groups appear in first-seen order, iterations ascending. Throws if
/// the trials of a group do not share one iteration grid.
inline std::vector<AggregatePoint> aggregate(const std::vector<TraceRecord>& records,
                                             Statistic stat = Statistic::Mean) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::size_t, double, double>;
  std::vector<Key> order;
  std::map<Key, std::map<std::size_t, std::vector<const TraceRecord*>>> groups;
  for (const auto& r : records) {
    Key k{r.algorithm, r.iz_init, r.m, r.n, r.lambda, r.sigma_min};
    auto [it, inserted] = groups.try_emplace(k);
    if (inserted) order.push_back(k);
    it->second[r.trial].push_back(&r);
  }

  std::vector<AggregatePoint> out;
  for (const auto& k : order) {
    const auto& trials = groups.at(k);
    std::vector<std::uint64_t> grid;
    for (const auto* r : trials.begin()->second) grid.push_back(r->iteration);
    for (const auto& [trial, rs] : trials) {
      std::vector<std::uint64_t> g;
      for (const auto* r : rs) g.push_back(r->iteration);
      if (g != grid) {
        throw UsageError("aggregate: ragged iteration grid for " + std::get<0>(k) + " trial " +
                         std::to_string(trial));
      }
    }
    for (std::size_t p = 0; p < grid.size(); ++p) {
      std::vector<double> eb, en, ew, nc;
      for (const auto& [trial, rs] : trials) {
        eb.push_back(rs[p]->err_beta);
        en.push_back(rs[p]->err_normal);
        ew.push_back(rs[p]->err_weighted);
        nc.push_back(rs[p]->noop_count ? static_cast<double>(*rs[p]->noop_count) : std::nan(""));
      }
      AggregatePoint a;
      std::tie(a.algorithm, a.iz_init, a.m, a.n, a.lambda, a.sigma_min) = k;
      a.iteration = grid[p];
      a.trials = trials.size();
      a.err_beta = detail::reduce(eb, stat);
      a.err_normal = detail::reduce(en, stat);
      a.err_weighted = detail::reduce(ew, stat);
      a.noop_count = detail::reduce(nc, stat);
      out.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace rkridge
