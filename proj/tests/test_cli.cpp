#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("lindml_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliRun run(const std::string& args) const {
    const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + LINDML_CLI_PATH + "' " +
                            args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(path("stdout.txt"));
    r.err = slurp(path("stderr.txt"));
    return r;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  void make_data() const {
    ASSERT_EQ(run("synth --classes 8 --per-class 12 --feat-dim 6 --seed 1 --out train.csv "
                  "--test-out test.csv")
                  .code,
              0);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenCentroidsOneHot) {
  const CliRun r = run("gen-centroids --strategy one-hot --classes 8 --out c.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("c.json")));
  EXPECT_EQ(j.at("centroids").size(), 8u);
  const auto stats = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(stats.at("kappa_min").get<double>(), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(stats.at("kappa_max").get<double>(), std::sqrt(2.0));
  EXPECT_EQ(stats.at("std").get<double>(), 0.0);
}

TEST_F(Cli, UsageErrors) {
  const CliRun missing = run("gen-centroids --strategy one-hot");
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--classes"), std::string::npos);
  EXPECT_EQ(run("gen-centroids --strategy spiral --classes 4").code, 2);
  EXPECT_EQ(run("gen-centroids --classes 1").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST_F(Cli, TrainEvalRoundTrip) {
  make_data();
  const CliRun tr = run("train --data train.csv --epochs 2 --batch 16 --hidden 32 --out ck.json");
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_TRUE(fs::exists(path("ck.json")));
  std::ifstream log(path("ck.json.log.ndjson"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("mean_loss"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);

  const CliRun ev = run("eval --checkpoint ck.json --data test.csv --out report.json");
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto rep = nlohmann::json::parse(ev.out);
  double prev = 0.0;
  for (const char* k : {"1", "2", "4", "8"}) {
    const double v = rep.at("recall_at").at(k).get<double>();
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_EQ(nlohmann::json::parse(slurp(path("report.json"))), rep);
}

TEST_F(Cli, TrainIsDeterministic) {
  make_data();
  const std::string common = "train --data train.csv --epochs 2 --batch 16 --hidden 16 --seed 5 ";
  ASSERT_EQ(run(common + "--out a.json --no-log-timing").code, 0);
  ASSERT_EQ(run(common + "--out b.json --no-log-timing").code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.json.log.ndjson")), slurp(path("b.json.log.ndjson")));
}

TEST_F(Cli, TripletBaselineDispatch) {
  make_data();
  const CliRun r = run("train --data train.csv --epochs 1 --batch 8 --hidden 16 --loss triplet --out t.json");
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream log(path("t.json.log.ndjson"));
  std::string line;
  std::getline(log, line);
  EXPECT_GT(nlohmann::json::parse(line).at("triplets").get<std::uint64_t>(), 0u);
}

TEST_F(Cli, DataErrors) {
  make_data();
  ASSERT_EQ(run("gen-centroids --strategy one-hot --classes 3 --out c3.json").code, 0);
  EXPECT_EQ(run("train --data train.csv --centroids c3.json --epochs 1 --batch 16 --out x.json").code, 3);
  {
    std::ofstream(path("bad.csv")) << "label,f1\na,1\nb,oops\n";
  }
  EXPECT_EQ(run("eval --random-init --data bad.csv").code, 3);
  {
    std::ofstream(path("bad.json")) << "{";
  }
  EXPECT_EQ(run("eval --checkpoint bad.json --data test.csv").code, 3);
  ASSERT_EQ(run("synth --classes 4 --per-class 6 --feat-dim 3 --out other.csv").code, 0);
  ASSERT_EQ(run("train --data train.csv --epochs 1 --batch 16 --hidden 8 --out ck.json").code, 0);
  EXPECT_EQ(run("eval --checkpoint ck.json --data other.csv").code, 3);
}

TEST_F(Cli, VerifyBound) {
  const CliRun r = run("verify-bound --classes 4 --per-class 6 --random-init --hidden 16");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_GE(j.at("gap").get<double>(), 0.0);
  EXPECT_LE(j.at("gap").get<double>(), j.at("lemma_bound").get<double>());

  {
    std::ofstream f(path("pinned.csv"));
    f << "label,f1,f2,f3\n";
    for (int rep = 0; rep < 2; ++rep) f << "a,1,0,0\nb,0,1,0\nc,0,0,1\n";
  }
  const CliRun pinned = run("verify-bound --data pinned.csv");
  ASSERT_EQ(pinned.code, 0) << pinned.err;
  const auto p = nlohmann::json::parse(pinned.out);
  EXPECT_NEAR(p.at("gap").get<double>(), 0.0, 1e-12);
  EXPECT_EQ(p.at("lemma_bound").get<double>(), 0.0);

  EXPECT_EQ(run("verify-bound --classes 4 --per-class 2500").code, 2);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  make_data();
  {
    std::ofstream(path("cfg.json")) << R"({"train": {"data": "train.csv", "epochs": 3, "batch": 16,
                                           "hidden": 16, "out": "cfg_ck.json"}})";
  }
  ASSERT_EQ(run("train --config cfg.json --epochs 1").code, 0);
  std::ifstream log(path("cfg_ck.json.log.ndjson"));
  int lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  EXPECT_EQ(lines, 1);
  {
    std::ofstream(path("typo.json")) << R"({"train": {"data": "train.csv", "epochz": 3}})";
  }
  EXPECT_EQ(run("train --config typo.json").code, 2);
}

TEST_F(Cli, BenchWritesCsv) {
  const CliRun r = run("bench --classes 2 --batch 8 --sizes 16,32 --class-ladder 2,4 "
                    "--triplet-batches 8,16 --feat-dim 3 --hidden 8 --repeats 1 --out b.csv");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("b.csv"));
  EXPECT_EQ(csv.rfind("sweep,loss,n", 0), 0u);
  EXPECT_TRUE(nlohmann::json::parse(r.err).contains("exponent_discriminative_vs_n"));
}
