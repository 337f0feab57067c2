// End-to-end tests of the rkridge executable. Each case runs the binary in a
// shell with stdout and stderr captured to files.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("rkridge_cli_" + std::string(info->name()) + "_" +
                                        std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args, const char* binary = RKRIDGE_CLI) const {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string("'") + binary + "' " + args + " >'" + out.string() +
                            "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& row) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : row) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

const char* kHeader =
    "algorithm,iz_init,m,n,lambda,sigma_min,trial,iteration,err_beta,err_normal,err_weighted,"
    "noop_count,wall_ns";

}  // namespace

// --- top level ---------------------------------------------------------------

TEST_F(Cli, HelpExitsZero) {
  const auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  for (const char* sub : {"gen", "solve", "bench", "rates", "verify"}) EXPECT_TRUE(contains(r.out, sub)) << sub;
}

TEST_F(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run("").code, 2); }

TEST_F(Cli, UnknownFlagIsUsageError) { EXPECT_EQ(run("solve --bogus").code, 2); }

// --- gen ---------------------------------------------------------------------

TEST_F(Cli, GenWritesInstanceAndReportsSpectrum) {
  const auto r = run("gen --m 4 --n 2 --sigma-min 0.5 --lambda 0.1 --seed 3 --out " + path("inst"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "spectrum: 0.5 1")) << r.out;
  for (const char* f : {"X.mtx", "y.mtx", "beta_true.mtx", "meta.txt"}) EXPECT_TRUE(fs::exists(dir_ / "inst" / f)) << f;
  EXPECT_TRUE(contains(slurp(dir_ / "inst" / "X.mtx"), "%%MatrixMarket matrix array real general"));
}

TEST_F(Cli, GenSigmaOutOfRange) {
  const auto r = run("gen --sigma-min 2.0");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "sigma-min must be in (0,1]")) << r.err;
}

TEST_F(Cli, GenNegativeLambda) {
  const auto r = run("gen --m 3 --n 3 --lambda -1 --out " + path("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "lambda")) << r.err;
}

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(run("gen --m 7 --n 5 --sigma-min 0.1 --lambda 0.01 --seed 9 --out " + path("a")).code, 0);
  ASSERT_EQ(run("gen --m 7 --n 5 --sigma-min 0.1 --lambda 0.01 --seed 9 --out " + path("b")).code, 0);
  for (const char* f : {"X.mtx", "y.mtx", "beta_true.mtx", "meta.txt"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  ASSERT_EQ(run("gen --m 7 --n 5 --sigma-min 0.1 --lambda 0.01 --seed 10 --out " + path("c")).code, 0);
  EXPECT_NE(slurp(dir_ / "a" / "X.mtx"), slurp(dir_ / "c" / "X.mtx"));
}

TEST_F(Cli, GenUnwritableDestinationIsIoError) {
  write("blocker", "a regular file");
  const auto r = run("gen --m 3 --n 2 --out " + path("blocker") + "/sub");
  EXPECT_EQ(r.code, 1) << r.err;
}

// --- solve -------------------------------------------------------------------

TEST_F(Cli, SolveTraceHas101Rows) {
  const auto r = run("solve --m 40 --n 10 --alg rgs-ridge --iters 10000 --trace-every 100");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 102u);
  EXPECT_EQ(ls[0], kHeader);
  EXPECT_EQ(fields(ls[1])[7], "0");
  EXPECT_EQ(fields(ls.back())[7], "10000");
  EXPECT_EQ(fields(ls.back())[12], "0");  // wall time off by default
}

TEST_F(Cli, SolveFromInstanceDirectoryConverges) {
  ASSERT_EQ(run("gen --m 1 --n 1 --lambda 1 --out " + path("one")).code, 0);
  const auto r = run("solve --in " + path("one") + " --alg rk-ridge --iters 1 --trace-every 1");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  EXPECT_LE(std::stod(fields(ls.back())[8]), 1e-12);
}

TEST_F(Cli, SolveIsReproducibleAndWritesCsvFile) {
  const std::string args = "solve --m 20 --n 30 --alg iz --iz-init izrnd --iters 500 --trace-every 50 --seed 4";
  ASSERT_EQ(run(args + " --csv " + path("a.csv")).code, 0);
  ASSERT_EQ(run(args + " --csv " + path("b.csv")).code, 0);
  const auto a = slurp(dir_ / "a.csv");
  EXPECT_EQ(lines(a).size(), 12u);
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
  EXPECT_EQ(fields(lines(a)[1])[1], "izrnd");
}

TEST_F(Cli, SolveIzWithoutInit) {
  const auto r = run("solve --m 5 --n 5 --alg iz");
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "iz requires --iz-init")) << r.err;
}

TEST_F(Cli, SolveUnknownAlgorithmListsNames) {
  const auto r = run("solve --m 5 --n 5 --alg bogus");
  EXPECT_EQ(r.code, 2);
  for (const char* name : {"rk", "rgs", "rk-ridge", "rgs-ridge", "naive-rk", "naive-rgs", "iz"}) {
    EXPECT_TRUE(contains(r.err, std::string("\"") + name + "\"")) << name << ": " << r.err;
  }
}

TEST_F(Cli, SolveWithoutInstanceIsUsageError) { EXPECT_EQ(run("solve --alg rk").code, 2); }

TEST_F(Cli, SolveMissingInstanceDirectoryIsIoError) {
  EXPECT_EQ(run("solve --in " + path("nope") + " --alg rk").code, 1);
}

TEST_F(Cli, SolveMalformedMatrixFileIsDataError) {
  ASSERT_EQ(run("gen --m 3 --n 2 --out " + path("bad")).code, 0);
  std::ofstream(dir_ / "bad" / "X.mtx", std::ios::binary) << "%%MatrixMarket matrix array real general\n3 2\n1\n";
  const auto r = run("solve --in " + path("bad") + " --alg rk");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

// --- bench -------------------------------------------------------------------

TEST_F(Cli, BenchRecordCountAndDeterminism) {
  write("cfg.txt",
        "# small grid\n"
        "dims = 12x6, 6x12\n"
        "lambdas = 0.01\n"
        "sigma_mins = 0.5, 0.1\n"
        "algorithms = rgs-ridge, rk-ridge, iz0\n"
        "iterations = 200\n"
        "trace_every = 50\n"
        "trials = 2\n"
        "base_seed = 5\n");
  const auto r = run("bench --config " + path("cfg.txt") + " --out " + path("a.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto a = slurp(dir_ / "a.csv");
  // 4 cells x 2 trials x 3 algorithms x 5 records
  EXPECT_EQ(lines(a).size(), 1u + 4 * 2 * 3 * 5);
  EXPECT_EQ(lines(a)[0], kHeader);
  EXPECT_TRUE(contains(r.err, "records=120 expected=120")) << r.err;
  ASSERT_EQ(run("bench --threads 1 --config " + path("cfg.txt") + " --out " + path("b.csv")).code, 0);
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
}

TEST_F(Cli, BenchMalformedConfigReportsLine) {
  write("cfg.txt", "trials = 2\nlambdas = 0.1, zebra\n");
  const auto r = run("bench --config " + path("cfg.txt"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "line 2")) << r.err;
}

TEST_F(Cli, BenchUnknownKeyIsUsageError) {
  write("cfg.txt", "trails = 2\n");
  const auto r = run("bench --config " + path("cfg.txt"));
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(contains(r.err, "line 1")) << r.err;
}

TEST_F(Cli, BenchUnwritableOutputIsIoError) {
  write("cfg.txt", "dims = 3x2\ntrials = 1\niterations = 10\ntrace_every = 10\n");
  const auto r = run("bench --config " + path("cfg.txt") + " --out " + path("missing_dir") + "/out.csv");
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(contains(r.err, "cannot open")) << r.err;
}

TEST_F(Cli, BenchMissingConfigIsIoError) {
  EXPECT_EQ(run("bench --config " + path("absent.txt")).code, 1);
}

// --- rates -------------------------------------------------------------------

TEST_F(Cli, RatesSingleColumnExample) {
  fs::create_directories(dir_ / "col");
  std::ofstream(dir_ / "col" / "X.mtx") << "%%MatrixMarket matrix array real general\n2 1\n1\n0\n";
  std::ofstream(dir_ / "col" / "y.mtx") << "%%MatrixMarket matrix array real general\n2 1\n1\n0\n";
  std::ofstream(dir_ / "col" / "beta_true.mtx") << "%%MatrixMarket matrix array real general\n1 1\n1\n";
  std::ofstream(dir_ / "col" / "meta.txt") << "m=2\nn=1\nlambda=1\nsigma_min=1\nseed=0\n";
  const auto r = run("rates --in " + path("col"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "factor rgs-ridge = 0 ")) << r.out;
  EXPECT_TRUE(contains(r.out, "factor rk-ridge = 0.66666666666666")) << r.out;
  EXPECT_TRUE(contains(r.out, "regime: over-determined") || contains(r.out, "regime: overdetermined")) << r.out;
  EXPECT_TRUE(contains(r.out, "cond_A")) << r.out;
}

TEST_F(Cli, RatesSquareUsesCompletion) {
  const auto r = run("rates --m 6 --n 6 --sigma-min 0.1 --lambda 0.01");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "square")) << r.out;
  EXPECT_TRUE(contains(r.out, "completion")) << r.out;
  for (const char* name : {"rk", "rgs", "rk-ridge", "rgs-ridge", "naive-rk", "naive-rgs"}) {
    EXPECT_TRUE(contains(r.out, std::string("factor ") + name + " = ")) << name;
  }
  EXPECT_TRUE(contains(r.out, "relative_discrepancy")) << r.out;
}

TEST_F(Cli, RatesIsDeterministic) {
  const auto a = run("rates --m 9 --n 4 --seed 2");
  const auto b = run("rates --m 9 --n 4 --seed 2");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
}

// --- verify ------------------------------------------------------------------

TEST_F(Cli, VerifyQuickPasses) {
  const auto r = run("verify --quick");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(contains(r.out, "all checks passed")) << r.out;
  EXPECT_FALSE(contains(r.out, "FAIL")) << r.out;
}

TEST_F(Cli, VerifyFlagsAreExclusive) { EXPECT_EQ(run("verify --quick --full").code, 2); }

TEST_F(Cli, MutantFailsVerification) {
  const auto r = run("verify --quick", RKRIDGE_MUTANT_CLI);
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_TRUE(contains(r.out, "FAIL claim1-closure")) << r.out;
  EXPECT_TRUE(contains(r.out, "verification FAILED")) << r.out;
}
