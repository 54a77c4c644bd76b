#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "romilab/core/container.h"

namespace fs = std::filesystem;
using romilab::read_text_file;
using romilab::write_text_file;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("romilab_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = std::string(ROMILAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string small_config(const fs::path& dir) {
  const nlohmann::json j = {{"data", {{"size", 1500}}},
                            {"model", {{"holdout_size", 100}}},
                            {"rollout", {{"n_rollouts", 300}}},
                            {"learner", {{"steps", 2000}}},
                            {"eval", {{"episodes", 10}, {"reference_episodes", 10}}}};
  const auto path = (dir / "small.json").string();
  write_text_file(path, j.dump(2));
  return path;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run("gen-data --bogus-flag"), 2);
}

TEST(Cli, ConfigErrorsExitTwo) {
  auto d = scratch("cfg");
  EXPECT_EQ(run("gen-data --size 0 --out " + (d / "a").string()), 2);
  EXPECT_EQ(run("pipeline --eta 1.5 --out " + (d / "b").string()), 2);
  EXPECT_EQ(run("pipeline --direction sideways --out " + (d / "c").string()), 2);
  write_text_file((d / "bad.json").string(), "{\"learner\": {\"stepz\": 1}}");
  EXPECT_EQ(run("pipeline --config " + (d / "bad.json").string() + " --out " + (d / "d").string()), 2);
  write_text_file((d / "broken.json").string(), "{ not json");
  EXPECT_EQ(run("pipeline --config " + (d / "broken.json").string() + " --out " + (d / "e").string()), 2);
  EXPECT_EQ(run("ablate --preset nope --out " + (d / "f").string()), 2);
  fs::remove_all(d);
}

TEST(Cli, GenDataIsByteIdenticalPerSeed) {
  auto d = scratch("gen");
  ASSERT_EQ(run("gen-data --size 1800 --seed 4 --out " + (d / "a").string()), 0);
  ASSERT_EQ(run("gen-data --size 1800 --seed 4 --out " + (d / "b").string()), 0);
  ASSERT_EQ(run("gen-data --size 1800 --seed 5 --out " + (d / "c").string()), 0);
  const auto a = read_text_file((d / "a" / "dataset.bin").string());
  EXPECT_EQ(a, read_text_file((d / "b" / "dataset.bin").string()));
  EXPECT_NE(a, read_text_file((d / "c" / "dataset.bin").string()));
  auto m = nlohmann::json::parse(read_text_file((d / "a" / "manifest.json").string()));
  EXPECT_EQ(m.at("transitions"), 1800);
  EXPECT_EQ(m.at("collisions"), 0);
  fs::remove_all(d);
}

TEST(Cli, StagewiseCommandsChain) {
  auto d = scratch("stages");
  const auto cfg = small_config(d);
  const std::string common = " --config " + cfg + " --seed 1";
  ASSERT_EQ(run("gen-data" + common + " --out " + (d / "data").string()), 0);
  const auto ds = (d / "data" / "dataset.bin").string();
  ASSERT_EQ(run("fit-model" + common + " --dataset " + ds + " --out " + (d / "fit").string()), 0);
  EXPECT_TRUE(fs::exists(d / "fit" / "model_reverse.bin"));
  EXPECT_TRUE(fs::exists(d / "fit" / "model_error.csv"));
  ASSERT_EQ(run("imagine" + common + " --dataset " + ds + " --model " + (d / "fit" / "model_reverse.bin").string() +
                " --out " + (d / "img").string()),
            0);
  EXPECT_TRUE(fs::exists(d / "img" / "imagined.bin"));
  ASSERT_EQ(run("train" + common + " --dataset " + ds + " --imagined " + (d / "img" / "imagined.bin").string() +
                " --out " + (d / "train").string()),
            0);
  const auto q = (d / "train" / "qtable.json").string();
  ASSERT_TRUE(fs::exists(q));
  ASSERT_EQ(run("eval" + common + " --dataset " + ds + " --qtable " + q + " --out " + (d / "eval").string()), 0);
  EXPECT_TRUE(fs::exists(d / "eval" / "eval.csv"));
  fs::remove_all(d);
}

TEST(Cli, StageFailureExitsThree) {
  auto d = scratch("stage");
  EXPECT_EQ(run("train --dataset " + (d / "missing.bin").string() + " --out " + (d / "t").string()), 3);
  write_text_file((d / "q.json").string(), "{ not json");
  EXPECT_EQ(run("eval --qtable " + (d / "q.json").string() + " --out " + (d / "e").string()), 3);
  fs::remove_all(d);
}

TEST(Cli, PipelineArtifactsAndDeterminism) {
  auto d = scratch("pipe");
  const auto cfg = small_config(d);
  ASSERT_EQ(run("pipeline --config " + cfg + " --seed 2 --out " + (d / "a").string()), 0);
  ASSERT_EQ(run("pipeline --config " + cfg + " --seed 2 --jobs 2 --out " + (d / "b").string()), 0);
  for (const char* f : {"eval.csv", "resolved_config.json"}) EXPECT_TRUE(fs::exists(d / "a" / f)) << f;
  for (const char* f : {"dataset.bin", "qtable.json", "imagined.bin", "model_forward.bin", "model_reverse.bin",
                        "episodes.csv", "trajectories.svg"})
    EXPECT_TRUE(fs::exists(d / "a" / "seed_2" / f)) << f;
  EXPECT_EQ(read_text_file((d / "a" / "eval.csv").string()), read_text_file((d / "b" / "eval.csv").string()));
  auto resolved = nlohmann::json::parse(read_text_file((d / "a" / "resolved_config.json").string()));
  EXPECT_EQ(resolved.at("seeds"), nlohmann::json::array({2}));
  EXPECT_EQ(resolved.at("data").at("size"), 1500);
  fs::remove_all(d);
}

TEST(Cli, AblateAssertionAndCellFailures) {
  auto d = scratch("ablate");
  const nlohmann::json base = {{"data", {{"size", 1500}}},
                               {"model", {{"holdout_size", 100}}},
                               {"rollout", {{"n_rollouts", 300}}},
                               {"learner", {{"steps", 2000}}},
                               {"eval", {{"episodes", 10}, {"reference_episodes", 10}}}};
  nlohmann::json plan = {{"name", "tiny"},
                         {"base", base},
                         {"seeds", {0}},
                         {"arms", {{{"label", "romi"}}, {{"label", "base"}, {"eta", 0.0}}}},
                         {"assert", {{{"lhs", "romi.success_rate"}, {"op", ">"}, {"rhs", 2.0}}}}};
  write_text_file((d / "assert.json").string(), plan.dump());
  EXPECT_EQ(run("ablate --config " + (d / "assert.json").string() + " --out " + (d / "a").string()), 4);
  EXPECT_TRUE(fs::exists(d / "a" / "grid.csv"));
  EXPECT_TRUE(fs::exists(d / "a" / "assertions.txt"));
  EXPECT_EQ(read_text_file((d / "a" / "assertions.txt").string()).rfind("FAIL", 0), 0u);

  plan["assert"] = nlohmann::json::array();
  plan["arms"].push_back({{"label", "broken"}, {"learner", {{"lr", 5.0}, {"init_value", 1.0}, {"gamma", 0.999}}}});
  write_text_file((d / "fail.json").string(), plan.dump());
  EXPECT_EQ(run("ablate --config " + (d / "fail.json").string() + " --out " + (d / "b").string()), 3);
  EXPECT_NE(read_text_file((d / "b" / "grid.csv").string()).find("train: "), std::string::npos);

  EXPECT_EQ(run("ablate --preset rollout-length --print-config"), 0);
  fs::remove_all(d);
}
