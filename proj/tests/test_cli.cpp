#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tomolab/cli.hpp"

using namespace tomolab;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int status = cli_dispatch(args, out, err);
  return {status, out.str(), err.str()};
}

/// Value printed after `key ` on its own line.
std::string value_of(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tomolab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, StatePrintsPhotonTail) {
  CliRun r = run({"state", "--family", "nearly-vacuum", "--purity", "0.9", "--tail-above", "10"});
  ASSERT_EQ(r.status, 0) << r.err;
  double tail = *parse_double(value_of(r.out, "tail_above_10"));
  EXPECT_NEAR(tail / 1.15e-5, 1.0, 0.05);
  EXPECT_NEAR(*parse_double(value_of(r.out, "purity")), 0.9, 1e-12);
  EXPECT_NE(r.out.find("photon_distribution"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).status, 2);
  EXPECT_EQ(run({"frobnicate"}).status, 2);
  CliRun r = run({"state", "--bogus-flag", "1"});
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"estimate"}).status, 2);  // --in is required
  EXPECT_EQ(run({"--help"}).status, 0);
}

TEST_F(CliTest, DomainErrorsExitOne) {
  CliRun r = run({"state", "--family", "highly-squeezed", "--purity", "0.5"});
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_EQ(run({"state", "--family", "cat"}).status, 1);
  EXPECT_EQ(run({"estimate", "--in", path("missing.csv")}).status, 1);
  EXPECT_EQ(run({"simulate", "--n", "10"}).status, 1);  // no --out
}

TEST_F(CliTest, SimulateThenEstimateIsReproducible) {
  const std::string data = path("d.csv");
  ASSERT_EQ(run({"--seed", "5", "--out", data, "simulate", "--purity", "0.95", "--n", "1500"}).status, 0);
  std::string first = slurp(data);
  ASSERT_EQ(run({"--seed", "5", "--out", data, "simulate", "--purity", "0.95", "--n", "1500"}).status, 0);
  EXPECT_EQ(slurp(data), first);

  CliRun a = run({"estimate", "--in", data});
  CliRun b = run({"estimate", "--in", data});
  ASSERT_EQ(a.status, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(value_of(a.out, "converged"), "true");
  EXPECT_EQ(value_of(a.out, "records"), "1500");
  double p = *parse_double(value_of(a.out, "purity"));
  EXPECT_GT(p, 0.8);
  EXPECT_LE(p, 1.0);

  EXPECT_EQ(run({"--nmax", "12", "estimate", "--in", data}).status, 1);
}

TEST_F(CliTest, SeedFromEnvironment) {
  ::setenv("TOMOLAB_SEED", "5", 1);
  ASSERT_EQ(run({"--out", path("env.csv"), "simulate", "--n", "50"}).status, 0);
  ::unsetenv("TOMOLAB_SEED");
  ASSERT_EQ(run({"--seed", "5", "--out", path("flag.csv"), "simulate", "--n", "50"}).status, 0);
  EXPECT_EQ(slurp(path("env.csv")), slurp(path("flag.csv")));
}

TEST_F(CliTest, BiasAtUnitPurityIsNegative) {
  const std::string out = path("bias.csv");
  CliRun r = run({"--seed", "1", "--out", out, "bias", "--family", "nearly-vacuum", "--purity", "1", "--n", "1000",
               "--strategy", "random", "--nmax", "10", "--reps", "50"});
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream in(slurp(out));
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, kResultsHeader);
  std::vector<std::string> cols;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cols.push_back(c);
  ASSERT_EQ(cols.size(), 13u);
  EXPECT_LT(*parse_double(cols[9]), 0.0);
  EXPECT_EQ(cols[7], "50");
  RunManifest m = parse_manifest(slurp(manifest_path_for(out)));
  EXPECT_EQ(m.master_seed, 1u);
  ASSERT_EQ(m.cells.size(), 1u);
  EXPECT_EQ(m.cells[0].trials.size(), 50u);
}

TEST_F(CliTest, EvenlySpacedStrategy) {
  CliRun r = run({"--seed", "2", "bias", "--purity", "0.95", "--n", "300", "--strategy", "even", "--phases", "6",
               "--reps", "3", "--nmax", "6"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find(",evenly-spaced,6,6,"), std::string::npos);
  EXPECT_EQ(run({"bias", "--n", "3", "--strategy", "even", "--phases", "6", "--reps", "3"}).status, 1);
}

TEST_F(CliTest, SweepFromConfig) {
  const std::string cfg = path("sweep.json");
  std::ofstream(cfg) << R"({"defaults": {"n_reps": 3, "n_max": 6, "n_measurements": 300},
                            "grid": {"purity": [0.95, 1.0]}})";
  const std::string out = path("sweep.csv");
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  CliRun a = run({"--seed", "9", "--out", out, "sweep", "--config", cfg});
  ASSERT_EQ(a.status, 0) << a.err;
  std::string results = slurp(out), manifest = slurp(manifest_path_for(out));
  CliRun b = run({"--seed", "9", "--out", out, "sweep", "--config", cfg});
  ::unsetenv("SOURCE_DATE_EPOCH");
  ASSERT_EQ(b.status, 0);
  EXPECT_EQ(slurp(out), results);
  EXPECT_EQ(slurp(manifest_path_for(out)), manifest);
  EXPECT_EQ(std::count(results.begin(), results.end(), '\n'), 3);

  std::ofstream(cfg) << "{ not json";
  EXPECT_EQ(run({"sweep", "--config", cfg}).status, 1);
}
