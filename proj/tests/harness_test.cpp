#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <sstream>
#include <streambuf>

#include "rkridge/harness.hpp"

using namespace rkridge;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dims = {{12, 5}, {5, 12}};
  c.lambdas = {0.01, 0.1};
  c.sigma_mins = {0.1};
  c.iterations = 200;
  c.trace_every = 50;
  c.trials = 3;
  c.base_seed = 7;
  return c;
}

std::string grid_csv(const ExperimentConfig& c, unsigned threads) {
  std::ostringstream os;
  GridOptions opt;
  opt.threads = threads;
  run_grid(c, os, opt);
  return os.str();
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Accepts everything except the `fail_at`-th bulk write.
class FlakyBuf : public std::streambuf {
 public:
  explicit FlakyBuf(int fail_at) : fail_at_(fail_at) {}
  std::string text;

 protected:
  std::streamsize xsputn(const char* s, std::streamsize n) override {
    if (++calls_ == fail_at_) return 0;
    text.append(s, static_cast<std::size_t>(n));
    return n;
  }
  int_type overflow(int_type c) override {
    if (c != traits_type::eof()) text.push_back(static_cast<char>(c));
    return c;
  }

 private:
  int fail_at_;
  int calls_ = 0;
};

TraceRecord rec(std::string alg, std::size_t trial, std::uint64_t it, double v) {
  TraceRecord r;
  r.algorithm = std::move(alg);
  r.m = 4;
  r.n = 2;
  r.lambda = 0.1;
  r.sigma_min = 1.0;
  r.trial = trial;
  r.iteration = it;
  r.err_beta = r.err_normal = r.err_weighted = v;
  r.noop_count = static_cast<std::uint64_t>(v);
  return r;
}

}  // namespace

// --- config ---------------------------------------------------------------

TEST(Config, DefaultsMatchTheReferenceGrid) {
  const ExperimentConfig c;
  EXPECT_EQ(c.cell_count(), 36u);
  EXPECT_EQ(c.trials, 20u);
  EXPECT_EQ(c.algorithms.size(), 6u);
  EXPECT_EQ(planned_record_count(c), 36u * 20u * 6u * 101u);
}

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config_string("# nothing here\n\n");
  const ExperimentConfig d;
  EXPECT_EQ(c.dims, d.dims);
  EXPECT_EQ(c.lambdas, d.lambdas);
  EXPECT_EQ(c.sigma_mins, d.sigma_mins);
  EXPECT_EQ(c.algorithms, d.algorithms);
  EXPECT_EQ(c.iterations, d.iterations);
}

TEST(Config, ParsesEveryKey) {
  const auto c = parse_config_string(
      "dims = 1000x1000, 10000x100,100X10000  # comment\n"
      "lambdas=0.5\n"
      "sigma_mins = 1, 0.25\n"
      "algorithms = rk, naive-rgs, iz:izmix, izrnd\n"
      "iterations = 300\n"
      "trace_every = 30\n"
      "trials = 2\n"
      "base_seed = 18446744073709551615\n"
      "metrics = err_beta, noop_count\n");
  ASSERT_EQ(c.dims.size(), 3u);
  EXPECT_EQ(c.dims[2], (std::pair<std::size_t, std::size_t>{100, 10000}));
  EXPECT_EQ(c.lambdas, std::vector<double>{0.5});
  EXPECT_EQ(c.sigma_mins, (std::vector<double>{1, 0.25}));
  ASSERT_EQ(c.algorithms.size(), 4u);
  EXPECT_EQ(c.algorithms[1].kind, SolverKind::NaiveRGSNormal);
  EXPECT_EQ(c.algorithms[2].iz_init, IZInit::IZMix);
  EXPECT_EQ(c.algorithms[3].token(), "izrnd");
  EXPECT_EQ(c.iterations, 300u);
  EXPECT_EQ(c.trace_every, 30u);
  EXPECT_EQ(c.trials, 2u);
  EXPECT_EQ(c.base_seed, 18446744073709551615ULL);
  EXPECT_EQ(c.metrics, (MetricSet{true, false, false, true}));
}

TEST(Config, ErrorsNameTheOffendingLine) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_config_string(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 999;
  };
  EXPECT_EQ(line_of("trials = 2\nbogus = 1\n"), 2u);
  EXPECT_EQ(line_of("\n\ndims = 10by10\n"), 3u);
  EXPECT_EQ(line_of("lambdas = 0.1, abc\n"), 1u);
  EXPECT_EQ(line_of("algorithms = rk, lsqr\n"), 1u);
  EXPECT_EQ(line_of("algorithms = iz\n"), 1u);
  EXPECT_EQ(line_of("trials 3\n"), 1u);
  EXPECT_EQ(line_of("trials = 1, 2\n"), 1u);
  EXPECT_EQ(line_of("metrics = accuracy\n"), 1u);
  // Semantic problems are not tied to one line.
  EXPECT_EQ(line_of("iterations = 10\ntrace_every = 100\n"), 0u);
  EXPECT_EQ(line_of("sigma_mins = 2\n"), 0u);
}

// --- grid -----------------------------------------------------------------

TEST(Grid, SingleRecordBoundary) {
  ExperimentConfig c;
  c.dims = {{6, 3}};
  c.lambdas = {0.1};
  c.sigma_mins = {0.5};
  c.algorithms = {{SolverKind::RKRidge, {}}};
  c.iterations = 100;
  c.trace_every = 100;
  c.trials = 1;
  EXPECT_EQ(run_grid_records(c).size(), 2u);
  EXPECT_EQ(planned_record_count(c), 2u);
}

TEST(Grid, CsvIsByteIdenticalAcrossRunsAndThreadCounts) {
  const auto c = small_config();
  const auto a = grid_csv(c, 1);
  EXPECT_EQ(a, grid_csv(c, 1));
  EXPECT_EQ(a, grid_csv(c, 4));
  EXPECT_EQ(count_lines(a), planned_record_count(c) + 1);
}

TEST(Grid, RecordsAreInCellTrialAlgorithmIterationOrder) {
  const auto c = small_config();
  const auto recs = run_grid_records(c);
  ASSERT_EQ(recs.size(), planned_record_count(c));
  std::size_t k = 0;
  for (auto [m, n] : c.dims)
    for (double l : c.lambdas)
      for (double s : c.sigma_mins)
        for (std::uint64_t t = 0; t < c.trials; ++t)
          for (const auto& a : c.algorithms)
            for (std::uint64_t it = 0; it <= c.iterations; it += c.trace_every) {
              const auto& r = recs[k++];
              ASSERT_EQ(r.m, m);
              ASSERT_EQ(r.n, n);
              ASSERT_EQ(r.lambda, l);
              ASSERT_EQ(r.sigma_min, s);
              ASSERT_EQ(r.trial, t);
              ASSERT_EQ(r.iteration, it);
              ASSERT_EQ(r.iz_init.empty() ? r.algorithm : r.iz_init, a.token());
            }
}

TEST(Grid, AlgorithmsShareTheInstanceWithinATrial) {
  // Zero-start algorithms (beta_0 = 0) all report ||beta*|| at iteration 0,
  // so within one (cell, trial) their first err_beta must coincide.
  std::map<std::tuple<std::size_t, std::size_t, double, std::size_t>, std::vector<double>> first;
  for (const auto& r : run_grid_records(small_config())) {
    const bool zero_start = r.algorithm != "iz" || r.iz_init != "izrnd";
    if (r.iteration == 0 && zero_start) first[{r.m, r.n, r.lambda, r.trial}].push_back(r.err_beta);
  }
  ASSERT_FALSE(first.empty());
  for (const auto& [key, values] : first) {
    ASSERT_EQ(values.size(), 5u);
    for (double v : values) EXPECT_EQ(v, values.front());
  }
  // Different trials see different instances.
  EXPECT_NE(first.begin()->second.front(), std::next(first.begin())->second.front());
}

TEST(Grid, CellsRerunInIsolation) {
  const auto c = small_config();
  const auto all = run_grid_records(c);
  ExperimentConfig one = c;
  one.dims = {c.dims[1]};
  one.lambdas = {c.lambdas[1]};
  const auto part = run_grid_records(one);
  std::vector<TraceRecord> slice;
  for (const auto& r : all)
    if (r.m == c.dims[1].first && r.lambda == c.lambdas[1]) slice.push_back(r);
  ASSERT_EQ(slice.size(), part.size());
  for (std::size_t k = 0; k < part.size(); ++k) EXPECT_EQ(to_csv_row(slice[k]), to_csv_row(part[k]));
}

TEST(Grid, SeedsDifferAcrossCellsTrialsAndAlgorithms) {
  const auto s0 = instance_seed(1, 10, 5, 0.1, 0.5, 0);
  EXPECT_NE(s0, instance_seed(1, 10, 5, 0.1, 0.5, 1));
  EXPECT_NE(s0, instance_seed(1, 5, 10, 0.1, 0.5, 0));
  EXPECT_NE(s0, instance_seed(1, 10, 5, 0.01, 0.5, 0));
  EXPECT_NE(s0, instance_seed(2, 10, 5, 0.1, 0.5, 0));
  EXPECT_NE(algorithm_seed(s0, {SolverKind::IZ, IZInit::IZ0}),
            algorithm_seed(s0, {SolverKind::IZ, IZInit::IZ1}));
  EXPECT_EQ(AlgorithmSpec({SolverKind::IZ, IZInit::IZ0}).stream_label(), "iz/iz0");
}

TEST(Grid, WriteFailureThrowsAndLeavesMarker) {
  FlakyBuf buf(20);
  std::ostream os(&buf);
  EXPECT_THROW(run_grid(small_config(), os), IoError);
  EXPECT_NE(buf.text.find("# partial output"), std::string::npos);
}

TEST(Grid, RgsRidgeCurveIsNearlyMonotoneInEasyRegime) {
  ExperimentConfig c;
  c.dims = {{10000, 100}};
  c.lambdas = {0.1};
  c.sigma_mins = {1.0};
  c.algorithms = {{SolverKind::RGSRidge, {}}};
  c.trials = 3;
  c.metrics = MetricSet{true, false, false, false};
  const auto curve = aggregate(run_grid_records(c));
  ASSERT_EQ(curve.size(), 101u);
  for (std::size_t k = 2; k < curve.size(); ++k) {
    // Once at the rounding floor the curve just jitters.
    const double floor = 1e-12 * curve[0].err_beta;
    EXPECT_LE(curve[k].err_beta, 1.05 * curve[k - 1].err_beta + floor) << "iteration " << curve[k].iteration;
  }
}

// --- CSV ------------------------------------------------------------------

TEST(Csv, HeaderAndFormatting) {
  TraceRecord r = rec("iz", 2, 300, 0.1);
  r.iz_init = "iz1";
  r.err_normal = std::nan("");
  r.noop_count.reset();
  std::ostringstream os;
  write_csv(os, {r});
  EXPECT_EQ(os.str(),
            "algorithm,iz_init,m,n,lambda,sigma_min,trial,iteration,err_beta,err_normal,"
            "err_weighted,noop_count,wall_ns\n"
            "iz,iz1,4,2,0.10000000000000001,1,2,300,0.10000000000000001,,0.10000000000000001,,0\n");
}

TEST(Csv, RoundTrip) {
  const auto recs = run_grid_records(small_config());
  std::stringstream ss;
  write_csv(ss, recs);
  const auto back = read_csv(ss);
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t k = 0; k < recs.size(); ++k) EXPECT_EQ(to_csv_row(back[k]), to_csv_row(recs[k]));
}

TEST(Csv, BadInputIsParseError) {
  std::istringstream wrong_header("a,b,c\n");
  EXPECT_THROW(read_csv(wrong_header), ParseError);
  std::istringstream short_row(std::string(kCsvHeader) + "\nrk,,1,1\n");
  EXPECT_THROW(read_csv(short_row), ParseError);
}

// --- aggregation ----------------------------------------------------------

TEST(Aggregate, MeanOfConstantAndOfTwoValues) {
  std::vector<TraceRecord> recs;
  for (std::size_t t = 0; t < 20; ++t) recs.push_back(rec("rk-ridge", t, 0, 3.0));
  const auto a = aggregate(recs);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].err_beta, 3.0);
  EXPECT_EQ(a[0].trials, 20u);

  const auto b = aggregate({rec("rk-ridge", 0, 0, 1.0), rec("rk-ridge", 1, 0, 3.0)});
  EXPECT_EQ(b[0].err_beta, 2.0);
  EXPECT_EQ(b[0].noop_count, 2.0);
}

TEST(Aggregate, MedianOption) {
  const auto a = aggregate({rec("rk", 0, 0, 1.0), rec("rk", 1, 0, 100.0), rec("rk", 2, 0, 2.0)},
                           Statistic::Median);
  EXPECT_EQ(a[0].err_beta, 2.0);
  const auto b = aggregate({rec("rk", 0, 0, 1.0), rec("rk", 1, 0, 3.0)}, Statistic::Median);
  EXPECT_EQ(b[0].err_beta, 2.0);
}

TEST(Aggregate, KeepsGroupsApartAndOrdered) {
  std::vector<TraceRecord> recs;
  for (std::size_t t = 0; t < 2; ++t) {
    recs.push_back(rec("rgs-ridge", t, 0, 4.0));
    recs.push_back(rec("rgs-ridge", t, 10, 2.0));
    recs.push_back(rec("rk-ridge", t, 0, 8.0));
    recs.push_back(rec("rk-ridge", t, 10, 6.0));
  }
  const auto a = aggregate(recs);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0].algorithm, "rgs-ridge");
  EXPECT_EQ(a[1].iteration, 10u);
  EXPECT_EQ(a[3].err_beta, 6.0);
}

TEST(Aggregate, RaggedGridIsAnError) {
  EXPECT_THROW(aggregate({rec("rk", 0, 0, 1), rec("rk", 0, 10, 1), rec("rk", 1, 0, 1)}), UsageError);
  EXPECT_THROW(aggregate({rec("rk", 0, 0, 1), rec("rk", 1, 5, 1)}), UsageError);
}
