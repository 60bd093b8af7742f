#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sciss/io.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace sciss;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sciss_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
    std::ofstream f(path("data.csv"));
    write_dataset(f, sciss::testing::preset_data("gauss-c1", 1, 150, 400));
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Runs the CLI with stdout captured; returns the exit status.
  int run(const std::string& args) {
    const std::string cmd = std::string(SCISS_CLI_PATH) + " " + args + " > " + path("stdout.txt") + " 2> " + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    out_ = slurp(path("stdout.txt"));
    err_ = slurp(path("stderr.txt"));
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::string out_, err_;
};

}  // namespace

TEST_F(Cli, FitSl) {
  ASSERT_EQ(run("fit " + path("data.csv") + " --method sl --out " + path("r.json")), 0) << err_;
  EXPECT_NE(out_.find("theta12"), std::string::npos);
  const auto reports = read_reports(slurp(path("r.json")));
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].method, Method::SL);
  EXPECT_EQ(reports[0].n_labeled, 150u);
}

TEST_F(Cli, FitSeveralMethodsWithFamilies) {
  ASSERT_EQ(run("fit " + path("data.csv") + " --method sciss-pos,es,intr --family gaussian --out " + path("r.json")), 0)
      << err_;
  const auto reports = read_reports(slurp(path("r.json")));
  ASSERT_EQ(reports.size(), 3u);
  EXPECT_EQ(reports[0].method, Method::SCISS_PoS);
  EXPECT_EQ(reports[1].method, Method::ES);
  EXPECT_EQ(reports[2].method, Method::INTR);
}

TEST_F(Cli, InputErrorsExitOne) {
  EXPECT_EQ(run("fit " + path("data.csv") + " --method bogus"), 1);
  EXPECT_EQ(run("fit " + path("data.csv") + " --method sciss-pos --family binomial"), 1);
  std::ofstream(path("bad.csv")) << "y1,y2,x1\n1,,0.5\n";
  EXPECT_EQ(run("fit " + path("bad.csv")), 1);
  EXPECT_NE(err_.find("line 2"), std::string::npos);
}

TEST_F(Cli, EstimationFailureExitsTwo) {
  std::ofstream f(path("const.csv"));
  f << "y1,y2,x1\n";
  for (int i = 0; i < 20; ++i) f << "1," << (i % 2) << "," << i << "\n";
  f << ",,0.5\n";
  f.close();
  EXPECT_EQ(run("fit " + path("const.csv") + " --method sl"), 2);
  EXPECT_NE(err_.find("node 1"), std::string::npos);
}

TEST_F(Cli, SimulateOneReplication) {
  ASSERT_EQ(run("simulate --preset gauss-c1 --reps 1 --seed 5 --n 100 --N 200 --out " + path("s.json") +
                " --table-out " + path("t.txt")),
            0)
      << err_;
  EXPECT_NE(out_.find("Bias"), std::string::npos);
  EXPECT_NE(err_.find("warning"), std::string::npos);
  const SimSummary s = summary_from_json(Json::parse(slurp(path("s.json"))));
  EXPECT_EQ(s.reps_used, 1);
  EXPECT_EQ(slurp(path("t.txt")), out_);
  EXPECT_EQ(run("simulate --preset gauss-c9 --reps 1"), 1);
}

TEST_F(Cli, Contrast) {
  ASSERT_EQ(run("fit " + path("data.csv") + " --method sl,sciss-aug --out " + path("a.json")), 0) << err_;
  ASSERT_EQ(run("contrast " + path("a.json") + " " + path("a.json") + " --method sl"), 0) << err_;
  EXPECT_NE(out_.find("1.0000"), std::string::npos);
  ASSERT_EQ(run("contrast " + path("a.json") + " " + path("a.json") + " --pair 2,2"), 0) << err_;
  EXPECT_NE(out_.find("theta22"), std::string::npos);
  std::ofstream(path("v2.json")) << R"({"schema_version": 2, "reports": []})";
  EXPECT_EQ(run("contrast " + path("a.json") + " " + path("v2.json")), 1);
}
