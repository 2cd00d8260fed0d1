#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "support.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string output;
};

Result run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli_output.txt";
  const std::string cmd = std::string("\"") + GAVG_CLI_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, gavg_test::slurp(log)};
}

constexpr const char* kMinimal = R"({
  "problem": {"kind": "quadratic", "dim": 3, "l": 1, "L": 2,
              "noise": {"kind": "additive_gaussian", "sigma": 0.1}},
  "schedule": {"s": 10},
  "methods": [{"method": "sg"}],
  "run": {"n_trials": 2, "max_k": 100}
})";

TEST(Cli, RunTwiceIsByteIdentical) {
  const auto dir = gavg_test::scratch_dir("cli_run");
  gavg_test::write_text(dir / "c.json", kMinimal);
  const auto cfg = (dir / "c.json").string();
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + (dir / "a").string(), dir).code, 0);
  ASSERT_EQ(run_cli("run --config " + cfg + " --out " + (dir / "b").string() + " --threads 3", dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "a/summary.csv"));
  EXPECT_EQ(gavg_test::compare_trees(dir / "a", dir / "b"), "");
}

TEST(Cli, ValidatePrintsSigmaAndBound) {
  const auto dir = gavg_test::scratch_dir("cli_validate");
  gavg_test::write_text(dir / "c.json", kMinimal);
  const auto r = run_cli("validate --config " + (dir / "c.json").string(), dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("sigma=29 (auto)"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("bound=0.333333333333"), std::string::npos) << r.output;
}

TEST(Cli, StrictBoundaryExitsTwo) {
  const auto dir = gavg_test::scratch_dir("cli_invalid");
  std::string cfg = kMinimal;
  cfg.replace(cfg.find("\"s\": 10"), 7, "\"s\": 4");
  gavg_test::write_text(dir / "c.json", cfg);
  const auto r = run_cli("run --config " + (dir / "c.json").string() + " --out " +
                         (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("s > 4/l (strict"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("VIOLATED"), std::string::npos);
  EXPECT_EQ(run_cli("validate --config " + (dir / "c.json").string(), dir).code, 2);
}

TEST(Cli, UnknownMethodExitsTwo) {
  const auto dir = gavg_test::scratch_dir("cli_unknown");
  std::string cfg = kMinimal;
  cfg.replace(cfg.find("\"sg\""), 4, "\"adam\"");
  gavg_test::write_text(dir / "c.json", cfg);
  const auto r = run_cli("run --config " + (dir / "c.json").string() + " --out " +
                         (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("unknown method"), std::string::npos);
}

TEST(Cli, IoFailuresExitThree) {
  const auto dir = gavg_test::scratch_dir("cli_io");
  EXPECT_EQ(run_cli("plotdata --in " + (dir / "missing").string() + " --out " +
                    (dir / "p").string(), dir).code, 3);
  EXPECT_EQ(run_cli("validate --config " + (dir / "missing.json").string(), dir).code, 3);
  // Output path blocked by a regular file.
  gavg_test::write_text(dir / "c.json", kMinimal);
  gavg_test::write_text(dir / "blocker", "x");
  EXPECT_EQ(run_cli("run --config " + (dir / "c.json").string() + " --out " +
                    (dir / "blocker").string(), dir).code, 3);
}

TEST(Cli, AsymptoticsPasses) {
  const auto dir = gavg_test::scratch_dir("cli_asym");
  const auto r = run_cli("asymptotics --s 10 --sigma 9 --l 1 --a 1 --kmax 10000 --out " +
                         (dir / "o").string(), dir);
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS overall"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "o/leading_order.csv"));
  EXPECT_TRUE(fs::exists(dir / "o/report.txt"));
}

TEST(Cli, PlotdataAfterRun) {
  const auto dir = gavg_test::scratch_dir("cli_plot");
  gavg_test::write_text(dir / "c.json", kMinimal);
  ASSERT_EQ(run_cli("run --config " + (dir / "c.json").string() + " --out " +
                    (dir / "r").string(), dir).code, 0);
  EXPECT_EQ(run_cli("plotdata --in " + (dir / "r").string() + " --out " + (dir / "p").string(), dir).code, 0);
  EXPECT_TRUE(fs::exists(dir / "p/sg_loglog.csv"));
}

TEST(Cli, BadArgumentsExitTwo) {
  const auto dir = gavg_test::scratch_dir("cli_args");
  EXPECT_EQ(run_cli("frobnicate", dir).code, 2);
  EXPECT_EQ(run_cli("run", dir).code, 2);
}

}  // namespace
