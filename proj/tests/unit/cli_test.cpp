#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "proxopt_cli.hpp"

namespace fs = std::filesystem;
using proxopt::io::Json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "proxopt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = proxopt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("proxopt_cli_" + std::string(::testing::UnitTest::GetInstance()
                                              ->current_test_info()
                                              ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string prefix(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SolveSphereWritesResultAndTrace) {
  const auto r = run({"solve", "--problem", "sphere", "--spectrum", "1,2,4", "--eps", "1e-10",
                      "--out", prefix("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(prefix("s") + ".result.json"));
  EXPECT_TRUE(j["converged"].get<bool>());
  EXPECT_LE(j["residual"].get<double>(), 1e-10);
  const std::string trace = slurp(prefix("s") + ".trace.csv");
  EXPECT_EQ(trace.rfind("k,phase,f,residual,step_len,descent_ok,residual_ineq_ok", 0), 0u);
  if (!j["phase_counts"]["finished_in_gpa"].get<bool>()) {
    EXPECT_NE(trace.find(",gpa,"), std::string::npos);
    EXPECT_NE(trace.find(",newton,"), std::string::npos);
  }
}

TEST_F(CliTest, SolveWithoutOutPrintsJson) {
  const auto r = run({"solve", "--spectrum", "1,2,4"});
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j.contains("phase_counts"));
  EXPECT_TRUE(j.contains("ledger"));
}

TEST_F(CliTest, JsonTraceMirrorsCsvColumns) {
  const auto r = run({"solve", "--spectrum", "1,2,4", "--format", "json", "--out", prefix("j")});
  ASSERT_EQ(r.code, 0);
  const Json t = Json::parse(slurp(prefix("j") + ".trace.json"));
  ASSERT_FALSE(t.empty());
  std::vector<std::string> keys;
  for (auto it = t[0].begin(); it != t[0].end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> expected{"k", "phase", "f", "residual", "step_len",
                                          "descent_ok", "residual_ineq_ok", "kkt_norm"};
  EXPECT_EQ(keys, expected);
}

TEST_F(CliTest, DegenerateSpectrumIsConfigError) {
  const auto r = run({"solve", "--spectrum", "1,1,2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("DegenerateSpectrum"), std::string::npos);
}

TEST_F(CliTest, BadFlagsAreUsageErrors) {
  EXPECT_EQ(run({"solve", "--switch-rule", "bogus"}).code, 1);
  EXPECT_EQ(run({"solve", "--format", "xml"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"solve", "--problem", "custom", "--plugin", "nope"}).code, 1);
}

TEST_F(CliTest, BudgetExhaustionKeepsPartialTrace) {
  const auto r = run({"solve", "--max-steps", "3", "--out", prefix("m")});
  EXPECT_EQ(r.code, 2);
  const std::string trace = slurp(prefix("m") + ".trace.csv");
  int lines = 0;
  for (char c : trace) lines += c == '\n';
  EXPECT_EQ(lines, 5);  // header + x0 + 3 steps
}

TEST_F(CliTest, StepRuleSolves) {
  const auto r = run({"solve", "--spectrum", "1,2,3,5", "--switch-rule", "step"});
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, VerifySphereReportsMu) {
  const auto r = run({"verify", "--problem", "sphere", "--spectrum", "1,2,4", "--out",
                      prefix("v")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(prefix("v") + ".verify.json"));
  EXPECT_NEAR(j["mu_exact"].get<double>(), 1.0, 1e-12);
  EXPECT_GE(j["mu_hat"].get<double>(), 1.0 - 1e-9);
  EXPECT_TRUE(j["passed"].get<bool>());
}

TEST_F(CliTest, VerifyFdOnlyRunsDerivativeChecks) {
  const auto r = run({"verify", "--problem", "custom", "--plugin", "ellipsoid", "--fd-only"});
  ASSERT_EQ(r.code, 0) << r.out;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["checks"].contains("fd"));
  EXPECT_FALSE(j["checks"].contains("teb"));
}

TEST_F(CliTest, VerifyCorruptedGradientFails) {
  const auto r = run({"verify", "--problem", "custom", "--plugin", "corrupted-gradient",
                      "--fd-only"});
  EXPECT_EQ(r.code, 2);
  const Json j = Json::parse(r.out);
  EXPECT_NE(j["errors"][0].get<std::string>().find("DerivativeMismatch"), std::string::npos);
}

TEST_F(CliTest, SweepMinimizerNearOptimalStep) {
  const auto r = run({"sweep", "--spectrum", "1,2,3,4,5,6,7,8,9,10", "--grid-points", "50",
                      "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["rows"].size(), 50u);
  EXPECT_TRUE(j["within_one_cell"].get<bool>());
}

TEST_F(CliTest, SweepRejectsOversizedSteps) {
  const auto r = run({"sweep", "--spectrum", "1,2,4", "--gammas", "0.01,0.2,0.5"});
  ASSERT_EQ(r.code, 0);
  // L1 = 8, gamma_max = 0.125: the last two rows are rejected.
  std::istringstream is(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(is, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NE(rows[1].find(",1,"), std::string::npos);
  EXPECT_NE(rows[2].find(",0,"), std::string::npos);
  EXPECT_NE(rows[3].find("outside"), std::string::npos);
}

TEST_F(CliTest, SingleGridPoint) {
  const auto r = run({"sweep", "--spectrum", "1,2,4", "--gammas", "0.02", "--format", "json"});
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["bound_minimizer"].get<double>(), 0.02);
}

TEST_F(CliTest, DeterministicTraces) {
  for (const char* tag : {"a", "b"}) {
    ASSERT_EQ(run({"solve", "--problem", "stiefel", "--n", "8", "--k", "2", "--seed", "4",
                   "--eps", "1e-8", "--out", prefix(tag)})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(prefix("a") + ".trace.csv"), slurp(prefix("b") + ".trace.csv"));
  EXPECT_EQ(slurp(prefix("a") + ".result.json"), slurp(prefix("b") + ".result.json"));
}

TEST_F(CliTest, ConfigFileSuppliesFlags) {
  {
    std::ofstream cfg(prefix("run.toml"));
    cfg << "[solve]\nspectrum = [1.0, 2.0, 4.0]\neps = 1e-9\nseed = 3\n";
  }
  const auto r = run({"--config", prefix("run.toml"), "solve"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["final_point"].size(), 3u);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = PROXOPT_CLI_PATH;
  const int ok = std::system((bin + " solve --spectrum 1,2,4 > /dev/null").c_str());
  EXPECT_EQ(WEXITSTATUS(ok), 0);
  const int bad = std::system((bin + " solve --spectrum 1,1,2 > /dev/null 2>&1").c_str());
  EXPECT_EQ(WEXITSTATUS(bad), 1);
}
