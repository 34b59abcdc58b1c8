// Integration tests: run the qmm binary and inspect exit codes and reports.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "qmm/io.hpp"
#include "support.hpp"

using namespace qmm;
using namespace qmm::testing;

namespace {

const std::string kCli = QMM_CLI;
const std::string kData = QMM_DATA_DIR;
const std::string kProblem = kData + "/three_state_example.json";
const std::string kPovm = kData + "/three_state_povm.json";

struct CliRun {
  int exit_code = -1;
  std::string out;
};

// `redirect` replaces the default stdout capture when set (e.g. "> /dev/full").
CliRun run(const std::string& args, const std::string& redirect = "") {
  const std::string cmd = kCli + " " + args + " 2>/dev/null" + (redirect.empty() ? "" : " " + redirect);
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

io::Json report(const CliRun& r) { return io::Json::parse(r.out); }

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::path(::testing::TempDir()) / name;
  std::ofstream(path, std::ios::binary) << content;
  return path.string();
}

}  // namespace

TEST(Cli, LfpOnThreeStateExample) {
  const CliRun r = run("lfp " + kProblem + " --tol 1e-6");
  ASSERT_EQ(r.exit_code, 0);
  const io::Json j = report(r);
  EXPECT_EQ(j["status"], "ok");
  const auto prior = j["result"]["prior"].get<std::vector<double>>();
  EXPECT_NEAR(prior[0], 0.5, 1e-4);
  EXPECT_NEAR(prior[1], 0.5, 1e-4);
  EXPECT_NEAR(prior[2], 0.0, 1e-4);
  EXPECT_NEAR(j["result"]["value"].get<double>(), kThreeStateValue, 1e-6);
}

TEST(Cli, CertifyAndRiskOnThreeStateExample) {
  const CliRun c = run("certify " + kProblem + " --povm " + kPovm + " --prior 0.5,0.5,0");
  ASSERT_EQ(c.exit_code, 0);
  EXPECT_LE(std::abs(report(c)["result"]["diff"].get<double>()), 1e-10);

  const CliRun r = run("risk " + kProblem + " --povm " + kPovm);
  ASSERT_EQ(r.exit_code, 0);
  const auto risk = report(r)["result"]["risk"].get<std::vector<double>>();
  EXPECT_NEAR(risk[0], kThreeStateValue, 1e-12);
  EXPECT_NEAR(risk[1], kThreeStateValue, 1e-12);
  EXPECT_NEAR(risk[2], 0.0, 1e-12);
}

TEST(Cli, BayesReportsCertifiedGap) {
  const CliRun r = run("bayes " + kProblem + " --prior 0.2,0.3,0.5");
  ASSERT_EQ(r.exit_code, 0);
  const io::Json j = report(r);
  EXPECT_LE(j["result"]["gap"].get<double>(), 1e-7);
  EXPECT_LE(j["result"]["dual_bound"].get<double>(), j["result"]["primal"].get<double>() + 1e-10);
}

TEST(Cli, InputDigestMatchesFile) {
  const CliRun r = run("risk " + kProblem + " --povm " + kPovm);
  ASSERT_EQ(r.exit_code, 0);
  const io::Json j = report(r);
  EXPECT_EQ(j["input"]["sha256"], io::sha256_hex(io::read_file(kProblem)));
  EXPECT_EQ(j["input"]["povm"]["sha256"], io::sha256_hex(io::read_file(kPovm)));
}

TEST(Cli, ExitCodeTwoOnBadInput) {
  EXPECT_EQ(run("lfp /no/such/file.json").exit_code, 2);
  EXPECT_EQ(run("lfp " + temp_file("broken.json", "{\"dimension\": 2,")).exit_code, 2);
  EXPECT_EQ(run("lfp " + kProblem + " --no-such-flag").exit_code, 2);
  EXPECT_EQ(run("lfp " + kProblem + " --tol -1").exit_code, 2);
  EXPECT_EQ(run("bayes " + kProblem + " --prior 0.5,0.5").exit_code, 2);
  EXPECT_EQ(run("nonsense").exit_code, 2);
  EXPECT_EQ(run("").exit_code, 2);
  const std::string non_psd = temp_file("non_psd.json", R"({"dimension": 2, "states": [
    {"label": "up", "matrix": [[1.01, 0], [0, -0.01]]},
    {"label": "down", "matrix": [[0, 0], [0, 1]]}],
    "decisions": ["up", "down"], "loss": [[0, 1], [1, 0]]})");
  EXPECT_EQ(run("lfp " + non_psd).exit_code, 2);
  EXPECT_EQ(run("oracle " + kProblem).exit_code, 2);  // not a qubit problem
}

TEST(Cli, ExitCodeThreeStillWritesReport) {
  const CliRun r = run("lfp " + kProblem + " --tol 1e-12 --max-rounds 1");
  ASSERT_EQ(r.exit_code, 3);
  const io::Json j = report(r);
  EXPECT_EQ(j["status"], "max_rounds");
  EXPECT_EQ(j["result"]["rounds"], 1);
  EXPECT_GT(j["result"]["gap"].get<double>(), 1e-12);

  const CliRun b = run("bayes " + kProblem + " --prior 0.4,0.4,0.2 --tol 1e-14 --max-iter 2");
  ASSERT_EQ(b.exit_code, 3);
  EXPECT_EQ(report(b)["status"], "max_iterations");
}

TEST(Cli, ExitCodeFourWhenReportCannotBeWritten) {
  EXPECT_EQ(run("random --dim 2 --states 2 --decisions 2 --seed 1", "> /dev/full").exit_code, 4);
}

TEST(Cli, OutFileMatchesStdout) {
  const std::string path = (std::filesystem::path(::testing::TempDir()) / "report.json").string();
  const CliRun a = run("risk " + kProblem + " --povm " + kPovm);
  const CliRun b = run("risk " + kProblem + " --povm " + kPovm + " --out " + path);
  ASSERT_EQ(b.exit_code, 0);
  EXPECT_TRUE(b.out.empty());
  // Only the echoed arguments differ.
  io::Json ja = report(a), jb = io::Json::parse(io::read_file(path));
  ja.erase("arguments");
  jb.erase("arguments");
  EXPECT_EQ(ja.dump(), jb.dump());
}

TEST(Cli, TableOutput) {
  const CliRun r = run("lfp " + kProblem + " --output table");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("value"), std::string::npos);
}

TEST(Cli, RandomFeedsBackIntoSolvers) {
  const CliRun g = run("random --dim 3 --states 4 --decisions 4 --seed 7");
  ASSERT_EQ(g.exit_code, 0);
  const std::string path = temp_file("random.json", g.out);
  EXPECT_EQ(run("lfp " + path).exit_code, 0);
}

TEST(Cli, EqualityBatchIgnoresThreadCount) {
  const CliRun a = run("equality --instances 6 --seed 40 --jobs 1");
  const CliRun b = run("equality --instances 6 --seed 40 --jobs 4");
  ASSERT_EQ(a.exit_code, 0);
  ASSERT_EQ(b.exit_code, 0);
  EXPECT_EQ(report(a)["result"].dump(), report(b)["result"].dump());
  const io::Json& inst = report(a)["result"]["instances"];
  for (std::size_t k = 0; k < inst.size(); ++k) EXPECT_EQ(inst[k]["seed"], 40 + k);
}

class Determinism : public ::testing::TestWithParam<std::string> {};

TEST_P(Determinism, TwoRunsAreByteIdentical) {
  const std::string args = GetParam() + " --output json";
  const CliRun a = run(args), b = run(args);
  EXPECT_EQ(a.exit_code, 0);
  EXPECT_FALSE(a.out.empty());
  EXPECT_EQ(a.out, b.out);
}

INSTANTIATE_TEST_SUITE_P(
    Commands, Determinism,
    ::testing::Values("risk " + kProblem + " --povm " + kPovm + " --prior 0.2,0.3,0.5",
                      "bayes " + kProblem + " --prior 0.2,0.3,0.5", "lfp " + kProblem,
                      "certify " + kProblem + " --povm " + kPovm + " --prior 0.5,0.5,0",
                      "equality --instances 4 --seed 11", "equality " + kProblem,
                      "random --dim 3 --states 4 --decisions 4 --seed 7",
                      "oracle " + kData + "/qubit_pair.json --resolution 50"),
    [](const ::testing::TestParamInfo<std::string>& info) {
      return info.param.substr(0, info.param.find(' ')) + std::to_string(info.index);
    });
