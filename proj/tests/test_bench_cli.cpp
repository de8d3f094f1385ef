#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qmnewt/cli.hpp"
#include "qmnewt/qmnewt.hpp"

using namespace qmnewt;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int rc = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "qmnewt_bench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.rc = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  ADD_FAILURE() << "missing column " << name;
  return 0;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("qmnewt_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

const std::vector<std::string> kRosenbrock2{"run",          "--problem",   "rosenbrock", "--dim",
                                            "2",            "--ig",        "IG1",        "--model",
                                            "simplified",   "--safeguard", "backtrack"};

}  // namespace

TEST(CliRun, SingleCell) {
  const auto r = cli(kRosenbrock2);
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  const auto& h = rows[0];
  EXPECT_EQ(h.front(), "problem");
  EXPECT_EQ(rows[1][column(h, "problem")], "rosenbrock");
  EXPECT_EQ(rows[1][column(h, "ig")], "IG1");
  EXPECT_EQ(rows[1][column(h, "variant")], "simplified-newton-backtrack");
  EXPECT_EQ(rows[1].size(), h.size());
}

TEST(CliRun, InitialGuessGrid) {
  const auto r = cli({"run", "--problem", "woods", "--ig", "IG1,IG2,IG3", "--max-iter", "100"});
  ASSERT_NE(r.rc, 2) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 4u);
  const auto ig = column(rows[0], "ig");
  EXPECT_EQ(rows[1][ig], "IG1");
  EXPECT_EQ(rows[2][ig], "IG2");
  EXPECT_EQ(rows[3][ig], "IG3");
}

TEST(CliRun, ProblemAndVariantGrid) {
  const auto r = cli({"run", "--problem", "quadratic,expsin", "--variant", "model,fd-newton",
                      "--repetitions", "2", "--jobs", "3"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 9u);
  const auto rep = column(rows[0], "rep");
  const auto seed = column(rows[0], "seed");
  EXPECT_EQ(rows[1][rep], "0");
  EXPECT_EQ(rows[2][rep], "1");
  EXPECT_EQ(rows[2][seed], "1");
  EXPECT_EQ(rows[3][column(rows[0], "variant")], "fd-newton");
}

TEST(CliRun, UnknownProblemIsUsageError) {
  TempDir dir;
  const auto out = dir / "x.csv";
  const auto r = cli({"run", "--problem", "nosuch", "--out", out.string()});
  EXPECT_EQ(r.rc, 2);
  EXPECT_NE(r.err.find("nosuch"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST(CliRun, BadFlagValues) {
  EXPECT_EQ(cli({"run", "--problem", "woods", "--ig", "IG7"}).rc, 2);
  EXPECT_EQ(cli({"run", "--problem", "woods", "--model", "exact"}).rc, 2);
  EXPECT_EQ(cli({"run", "--problem", "woods", "--eps", "-1"}).rc, 2);
  EXPECT_EQ(cli({"run", "--problem", "woods", "--format", "xml"}).rc, 2);
  EXPECT_EQ(cli({"run", "--problem", "woods", "--dim", "5"}).rc, 2);
  EXPECT_EQ(cli({"run"}).rc, 2);
  EXPECT_EQ(cli({}).rc, 2);
  EXPECT_EQ(cli({"frobnicate"}).rc, 2);
}

TEST(CliRun, HelpIsOk) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.rc, 0);
  EXPECT_NE(r.out.find("mu-sweep"), std::string::npos);
}

TEST(CliRun, DeterministicOutput) {
  const std::vector<std::string> args{"run", "--problem", "powell", "--dim", "8", "--ig", "IG2,IG3",
                                      "--seed", "5", "--safeguard", "backtrack"};
  EXPECT_EQ(cli(args).out, cli(args).out);
  auto parallel = args;
  parallel.insert(parallel.end(), {"--jobs", "4"});
  EXPECT_EQ(cli(args).out, cli(parallel).out);
}

TEST(CliRun, EnvironmentSeedAndFlagPrecedence) {
  const auto seed_of = [](const CliResult& r) {
    const auto rows = parse_csv(r.out);
    return rows.at(1).at(column(rows[0], "seed"));
  };
  ::setenv("QMNEWT_SEED", "42", 1);
  const auto from_env = cli({"run", "--problem", "expsin"});
  const auto from_flag = cli({"run", "--problem", "expsin", "--seed", "7"});
  ::unsetenv("QMNEWT_SEED");
  const auto fallback = cli({"run", "--problem", "expsin"});
  EXPECT_EQ(seed_of(from_env), "42");
  EXPECT_EQ(seed_of(from_flag), "7");
  EXPECT_EQ(seed_of(fallback), "0");
}

TEST(CliRun, CsvAndJsonAgree) {
  TempDir dir;
  const auto csv = dir / "r.csv";
  const auto json = dir / "r.json";
  std::vector<std::string> base{"run", "--problem", "woods,expsin", "--ig", "IG1,IG2", "--max-iter", "50"};
  auto a = base;
  a.insert(a.end(), {"--out", csv.string()});
  auto b = base;
  b.insert(b.end(), {"--out", json.string(), "--format", "json"});
  ASSERT_NE(cli(a).rc, 2);
  ASSERT_NE(cli(b).rc, 2);

  const auto rows = parse_csv(slurp(csv));
  const auto doc = nlohmann::json::parse(slurp(json));
  ASSERT_TRUE(doc.contains("meta"));
  ASSERT_EQ(doc["rows"].size() + 1, rows.size());
  EXPECT_EQ(doc["meta"]["command"], "run");
  EXPECT_EQ(doc["meta"]["config"]["max_iter"], 50);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& obj = doc["rows"][i - 1];
    for (std::size_t c = 0; c < rows[0].size(); ++c) {
      const auto& v = obj.at(rows[0][c]);
      const std::string& s = rows[i][c];
      if (v.is_null()) {
        EXPECT_EQ(s, "");
      } else if (v.is_string()) {
        EXPECT_EQ(v.get<std::string>(), s);
      } else if (v.is_number_integer()) {
        EXPECT_EQ(std::to_string(v.get<std::int64_t>()), s);
      } else {
        EXPECT_EQ(v.get<double>(), std::stod(s)) << rows[0][c];
      }
    }
  }
}

TEST(CliRun, OutFileWritesSidecarAndSummary) {
  TempDir dir;
  const auto out = dir / "r.csv";
  const auto r = cli({"run", "--problem", "quadratic", "--ig", "IG1,IG3", "--out", out.string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  ASSERT_TRUE(fs::exists(out));
  const auto side = nlohmann::json::parse(slurp(out.string() + ".meta.json"));
  EXPECT_EQ(side["wall_time"].size(), 2u);
  EXPECT_EQ(side["meta"]["problems"][0], "quadratic");
  EXPECT_NE(r.out.find("quadratic"), std::string::npos);
  const std::string text = slurp(out);
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
}

TEST(CliRun, UnwritableOutputIsIoError) {
  const auto r = cli({"run", "--problem", "expsin", "--out", "/nonexistent-dir/sub/r.csv"});
  EXPECT_EQ(r.rc, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(CliRun, FailedCellsExitCode) {
  // Either outcome is possible for an unguarded solve; the exit code must match it.
  const auto r = cli({"run", "--problem", "p2", "--ig", "IG3", "--newton", "pure", "--safeguard",
                      "pure", "--max-iter", "200"});
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  const auto status = rows[1][column(rows[0], "status")];
  if (status == "converged" || status == "max_iter") {
    EXPECT_EQ(r.rc, 0);
  } else {
    EXPECT_EQ(r.rc, 3);
  }
}

TEST(CliResidualTable, Layout) {
  const auto r = cli({"residual-table", "--problem", "rosenbrock", "--dim", "2", "--safeguard",
                      "backtrack", "--max-iter", "250"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  int residual_columns = 0;
  for (const auto& c : rows[0]) residual_columns += c.rfind("e1_at_", 0) == 0 || c.rfind("e2_at_", 0) == 0;
  EXPECT_EQ(residual_columns, 8);
  const long iters = std::stol(rows[1][column(rows[0], "iters")]);
  for (long c : {200L, 300L, 400L, 500L}) {
    const auto& cell = rows[1][column(rows[0], "e1_at_" + std::to_string(c))];
    if (c >= iters) {
      EXPECT_EQ(cell, "not-reached");
    } else {
      EXPECT_NO_THROW((void)std::stod(cell));
    }
  }
  EXPECT_EQ(rows[1][column(rows[0], "e2_at_500")], "not-reached");
}

TEST(CliResidualTable, CustomCheckpoints) {
  const auto r = cli({"residual-table", "--problem", "woods", "--checkpoints", "0,1", "--ig", "IG1,IG2"});
  ASSERT_NE(r.rc, 2) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].size(), 9u);
  EXPECT_NO_THROW((void)std::stod(rows[1][column(rows[0], "e1_at_0")]));
  EXPECT_EQ(cli({"residual-table", "--problem", "woods", "--checkpoints", "300,200"}).rc, 2);
}

TEST(CliResidualTable, ResidualTableMatchesRunRecords) {
  BenchSpec spec;
  spec.problems = {"woods"};
  spec.safeguard = Safeguard::backtrack;
  const auto results = run_cells(spec);
  const auto t = residual_table(results, {0, 1000000});
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(std::get<double>(t.rows[0][5]), results[0].report.iterations[0].e1_inf);
  EXPECT_EQ(std::get<std::string>(t.rows[0][7]), std::string(kNotReached));
}

TEST(CliProbe, ExpsinSlopes) {
  const auto r = cli({"probe", "--problem", "expsin", "--radii", "1e-1,3e-2,1e-2,3e-3,1e-3"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = parse_csv(r.out);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"radius", "grad_error", "hess_error"}));
  EXPECT_EQ(rows.size(), 7u);  // header, five radii, slope line
  EXPECT_EQ(r.out.find("grad_slope") != std::string::npos || r.out.find("floor-detected") != std::string::npos,
            true);
}

TEST(CliProbe, QuadraticWithoutUpdatesReportsFloor) {
  const auto r = cli({"probe", "--problem", "quadratic", "--radii", "1e-1,3e-2,1e-2,3e-3,1e-3",
                      "--updates", "0"});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_NE(r.out.find("floor-detected"), std::string::npos);
}

TEST(CliProbe, JsonCarriesSlopes) {
  const auto r = cli({"probe", "--problem", "expsin", "--radii", "1e-1,3e-2,1e-2,3e-3,1e-3",
                      "--updates", "0", "--format", "json"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_NEAR(doc["meta"]["grad_slope"].get<double>(), 1.0, 0.1);
  EXPECT_EQ(doc["meta"]["updates"], 0);
  EXPECT_EQ(doc["rows"].size(), 5u);
}

TEST(CliProbe, UsageErrors) {
  EXPECT_EQ(cli({"probe", "--problem", "expsin", "--radii", ""}).rc, 2);
  EXPECT_EQ(cli({"probe", "--problem", "expsin"}).rc, 2);
  EXPECT_EQ(cli({"probe", "--problem", "woods", "--radii", "1e-1,3e-2,1e-2,3e-3,1e-3"}).rc, 2);
  EXPECT_EQ(cli({"probe", "--problem", "expsin", "--radii", "1e-1,1e-2"}).rc, 2);
  EXPECT_EQ(cli({"probe", "--problem", "expsin,quadratic", "--radii", "1e-1,3e-2,1e-2,3e-3,1e-3"}).rc, 2);
}

TEST(CliMuSweep, SingleMu) {
  const auto r = cli({"mu-sweep", "--mus", "1e-2"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"mu", "status", "iters", "x_inf", "f_final"}));
  EXPECT_DOUBLE_EQ(std::stod(rows[1][0]), 1e-2);
}

TEST(CliMuSweep, OrderingAndSign) {
  EXPECT_EQ(cli({"mu-sweep", "--mus", "1e-3,1e-2"}).rc, 2);
  EXPECT_EQ(cli({"mu-sweep", "--mus", "1e-2,1e-2"}).rc, 2);
  EXPECT_EQ(cli({"mu-sweep", "--mus", "1e-1,-1e-2"}).rc, 2);
}

TEST(CliMuSweep, DefaultSweepEmitsAllRows) {
  const auto r = cli({"mu-sweep"});
  ASSERT_TRUE(r.rc == 0 || r.rc == 4) << r.err;
  const auto rows = parse_csv(r.out);
  ASSERT_EQ(rows.size(), 4u);
  const auto direct = mu_sweep({1e-1, 1e-2, 1e-3}, 1.0, InitialGuess::IG1, [] {
    SolverConfig c;
    c.safeguard = Safeguard::backtrack;
    return c;
  }());
  EXPECT_EQ(r.rc == 0, direct.monotone);
  if (r.rc == 4) {
    EXPECT_NE(r.err.find("assertion"), std::string::npos);
  }
}

TEST(MuSweep, ValidatesInput) {
  EXPECT_THROW(mu_sweep({}, 1.0, InitialGuess::IG1, {}), ConfigError);
  EXPECT_THROW(mu_sweep({1e-2, 1e-1}, 1.0, InitialGuess::IG1, {}), ConfigError);
}

TEST(Bench, CellExpansionOrder) {
  BenchSpec spec;
  spec.problems = {"a", "b"};
  spec.igs = {InitialGuess::IG1, InitialGuess::IG2};
  spec.repetitions = 2;
  const auto cells = expand_cells(spec);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_EQ(cells[0].problem, "a");
  EXPECT_EQ(cells[1].rep, 1);
  EXPECT_EQ(cells[2].ig, InitialGuess::IG2);
  EXPECT_EQ(cells[4].problem, "b");
}

TEST(Bench, DefaultSafeguardFollowsSmoothness) {
  BenchSpec spec;
  EXPECT_EQ(cell_config(spec, problems::woods(), 0).safeguard, Safeguard::pure);
  EXPECT_EQ(cell_config(spec, problems::p3(), 0).safeguard, Safeguard::backtrack);
  spec.safeguard = Safeguard::backtrack;
  EXPECT_EQ(cell_config(spec, problems::woods(), 3).safeguard, Safeguard::backtrack);
  EXPECT_EQ(cell_config(spec, problems::woods(), 3).seed, 3u);
}

TEST(Bench, ParallelMapKeepsOrderAndRethrows) {
  const auto v = parallel_map<int>(100, 8, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_map<int>(10, 4,
                                 [](std::size_t i) -> int {
                                   if (i == 7) throw ConfigError("boom");
                                   return 0;
                                 }),
               ConfigError);
}

TEST(Table, Formatting) {
  EXPECT_EQ(format_real(0.5), "5.0000000000000000e-01");
  EXPECT_EQ(format_real(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_short(1234.5), "1.23e+03");
  EXPECT_EQ(csv_field(Cell{std::string("a,b")}), "\"a,b\"");
  EXPECT_EQ(csv_field(Cell{std::string("say \"hi\"")}), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field(Cell{}), "");
  EXPECT_EQ(csv_field(Cell{std::int64_t{-3}}), "-3");
}

TEST(Table, RoundTripExactDoubles) {
  Table t;
  t.columns = {"x"};
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) t.add_row({v});
  const auto rows = parse_csv(to_csv(t));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stod(rows[i][0]), std::get<double>(t.rows[i - 1][0]));
  }
  EXPECT_THROW(t.add_row({1.0, 2.0}), std::logic_error);
}

TEST(Table, JsonShape) {
  Table t;
  t.columns = {"a", "b", "c"};
  t.add_row({std::string("x"), Cell{}, std::numeric_limits<double>::quiet_NaN()});
  const auto doc = nlohmann::json::parse(to_json(t, {{"k", 1}}));
  EXPECT_EQ(doc["meta"]["k"], 1);
  EXPECT_TRUE(doc["rows"][0]["b"].is_null());
  EXPECT_EQ(doc["rows"][0]["c"], "nan");
  EXPECT_EQ(doc.size(), 2u);
}
