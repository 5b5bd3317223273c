#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "test_util.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(FEDKAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, GenerateTrainCompare) {
  testutil::TempDir dir;
  const auto beams = dir / "beams";
  ASSERT_EQ(run("generate --seed 7 --hours 743 --beams 4 --out " + beams.string()), 0);
  for (int b = 0; b < 4; ++b) EXPECT_TRUE(std::filesystem::exists(beams / ("beam_" + std::to_string(b) + ".csv")));

  testutil::write_file(dir / "cfg.json", R"({
    "output_dir": "run",
    "federation": {"rounds": 1, "local_epochs": 1},
    "data": {"files": ["beams/beam_0.csv", "beams/beam_1.csv"]}
  })");
  ASSERT_EQ(run("train --config " + (dir / "cfg.json").string()), 0);
  const std::string report = testutil::read_file(dir / "run" / "report.csv");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'),
            std::count(report.begin(), report.end(), '#') + 2);

  ASSERT_EQ(run("compare --parallel-clients --seed 3 --config " + (dir / "cfg.json").string() +
                " --out " + (dir / "cmp").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "cmp" / "comparison.csv"));
}

TEST(Cli, ExitCodes) {
  testutil::TempDir dir;
  testutil::write_file(dir / "bad.json", R"({"federation": {"batch_size": 0}, "data": {"synthetic": {}}})");
  EXPECT_EQ(run("train --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run("train --config " + (dir / "missing.json").string()), 3);
  testutil::write_file(dir / "beam.csv", "hour,downlink\n0,1\n");
  testutil::write_file(dir / "badcsv.json", R"({"data": {"files": ["beam.csv"]}})");
  EXPECT_EQ(run("train --config " + (dir / "badcsv.json").string()), 3);
  testutil::write_file(dir / "ok.json", R"({"data": {"synthetic": {"hours": 50, "beams": 1}}, "federation": {"rounds": 1, "local_epochs": 1}})");
  EXPECT_EQ(run("train --availability 0 --config " + (dir / "ok.json").string()), 2);
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_FALSE(std::filesystem::exists(dir / "fedkan_out"));
}

TEST(Cli, NumericFailureExitCode) {
  testutil::TempDir dir;
  // A huge learning rate with no effective clipping drives the loss to inf.
  testutil::write_file(dir / "nan.json", R"({
    "output_dir": "out",
    "model": {"kind": "fed_mlp", "dropout_p": 0.0},
    "federation": {"rounds": 3, "local_epochs": 5, "learning_rate": 1e300, "max_norm": 1e300},
    "data": {"synthetic": {"hours": 120, "beams": 1}}
  })");
  EXPECT_EQ(run("train --config " + (dir / "nan.json").string()), 4);
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
}
