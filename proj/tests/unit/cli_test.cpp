// SPDX-License-Identifier: Apache-2.0
// Drives the kanli executable end to end and checks exit codes.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kanli/harness/task.hpp"
#include "kanli/kb/lexicon.hpp"
#include "kanli/matrix/knowledge_matrix.hpp"
#include "kanli/model/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kanli_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = std::string(KANLI_CLI) + " " + args + " >" + path("stdout") + " 2>" +
                            path("stderr");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string slurp(const std::string& name) const {
    std::ifstream in(path(name));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }
  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }
  // Small task and model so a training run takes well under a second.
  std::string small_config() const {
    const std::string p = path("cfg.json");
    std::ofstream(p) << R"({"train": {"epochs": 1},
      "task": {"vocab_size": 90, "num_relation_pairs": 30, "train_examples": 60,
               "test_examples": 30}})";
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(slurp("stdout").find("build-matrix"), std::string::npos);
  EXPECT_EQ(run("train --help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("train --bogus"), 1);
  EXPECT_EQ(run("build-matrix --lexicon x --input y --out z --n 3"), 1);
}

TEST_F(Cli, IngestWritesLexiconAndStats) {
  write("wn.tsv",
        "dog\tHypernym\tcanine\ncanine\tHypernym\tanimal\nhot\tAntonym\tcold\nbroken line\n");
  write("cn.tsv", "car\t/r/IsA\tvehicle\nbank\t/r/AtLocation\tcity\nhot dog\t/r/IsA\tfood\n");
  ASSERT_EQ(run("ingest --wordnet " + path("wn.tsv") + " --conceptnet " + path("cn.tsv") +
                " --out " + path("lex.kal") + " --stats " + path("stats.tsv")),
            0)
      << slurp("stderr");
  const auto lex = kanli::kb::load_lexicon(path("lex.kal"));
  EXPECT_DOUBLE_EQ(lex.lookup("dog", "animal")[kanli::kb::Relation::kHypernymy], 0.75);
  EXPECT_GT(lex.lookup("vehicle", "car")[kanli::kb::Relation::kHypernymy], 0.0);
  EXPECT_TRUE(lex.lookup("bank", "city").is_zero());
  EXPECT_EQ(slurp("stats.tsv").rfind("relation\twordnet\tconceptnet\n", 0), 0u);
  EXPECT_NE(slurp("stderr").find("1 malformed"), std::string::npos);
}

TEST_F(Cli, IngestMissingFileIsIoError) {
  EXPECT_EQ(run("ingest --wordnet " + path("absent.tsv") + " --out " + path("lex.kal")), 2);
}

TEST_F(Cli, BuildMatrix) {
  write("wn.tsv", "hot\tAntonym\tcold\n");
  ASSERT_EQ(run("ingest --wordnet " + path("wn.tsv") + " --out " + path("lex.kal")), 0);
  write("pairs.tsv", "premise\thypothesis\tlabel\nit is hot\tit is cold\tcontradiction\na b\tc\n");
  ASSERT_EQ(run("build-matrix --lexicon " + path("lex.kal") + " --input " + path("pairs.tsv") +
                " --n 10 --out " + path("e.bin")),
            0)
      << slurp("stderr");
  std::ifstream in(path("e.bin"), std::ios::binary);
  const auto batch = kanli::matrix::read_batch(in);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[0].at(3, 7, static_cast<std::size_t>(kanli::kb::Relation::kAntonymy)), 1.0);

  write("junk.kal", "not a lexicon");
  EXPECT_EQ(run("build-matrix --lexicon " + path("junk.kal") + " --input " + path("pairs.tsv") +
                " --out " + path("e.bin")),
            2);
  write("bad.tsv", "only one field\n");
  EXPECT_EQ(run("build-matrix --lexicon " + path("lex.kal") + " --input " + path("bad.tsv") +
                " --out " + path("e.bin")),
            2);
}

TEST_F(Cli, GenTaskTrainEval) {
  const auto cfg = small_config();
  ASSERT_EQ(run("gen-task --config " + cfg + " --seed 4 --out-dir " + path("task")), 0)
      << slurp("stderr");
  const auto test = kanli::harness::load_examples(path("task/test.tsv"));
  EXPECT_EQ(test.size(), 30u);
  EXPECT_FALSE(kanli::kb::load_lexicon(path("task/lexicon.kal")).empty());

  ASSERT_EQ(run("train --config " + cfg + " --seed 4 --m2 --train " + path("task/train.tsv") +
                " --test " + path("task/test.tsv") + " --lexicon " + path("task/lexicon.kal") +
                " --out " + path("model.kam") + " --metrics " + path("metrics.json")),
            0)
      << slurp("stderr");
  const auto metrics = nlohmann::json::parse(slurp("metrics.json"));
  EXPECT_EQ(metrics["test"]["count"], 30);
  EXPECT_FALSE(metrics["config"]["model"]["m1_enabled"].get<bool>());
  EXPECT_TRUE(metrics["config"]["model"]["m2_enabled"].get<bool>());
  EXPECT_EQ(metrics["train"]["loss_curve"].size(), 1u);

  ASSERT_EQ(run("eval --checkpoint " + path("model.kam") + " --data " + path("task/test.tsv") +
                " --lexicon " + path("task/lexicon.kal")),
            0)
      << slurp("stderr");
  const auto scored = nlohmann::json::parse(slurp("stdout"));
  EXPECT_EQ(scored["accuracy"], metrics["test"]["accuracy"]);

  write("broken.kam", "KAM1 but truncated");
  EXPECT_EQ(run("eval --checkpoint " + path("broken.kam") + " --data " + path("task/test.tsv")),
            2);
}

TEST_F(Cli, TrainSynthesizedAndNoMechanismFlags) {
  const auto cfg = small_config();
  ASSERT_EQ(run("train --config " + cfg + " --no-m1 --no-m2 --no-m3 --metrics " +
                path("m.json")),
            0)
      << slurp("stderr");
  const auto m = nlohmann::json::parse(slurp("m.json"));
  EXPECT_FALSE(m["config"]["model"]["m3_enabled"].get<bool>());
  EXPECT_NE(slurp("stderr").find("epoch 1"), std::string::npos);
}

TEST_F(Cli, ConfigErrorsExitOne) {
  write("bad.json", R"({"train": {"epochs": 0}})");
  EXPECT_EQ(run("train --config " + path("bad.json")), 1);
  write("unknown.json", R"({"trainer": {}})");
  EXPECT_EQ(run("train --config " + path("unknown.json")), 1);
  EXPECT_EQ(run("train --config " + small_config() + " --knowledge-fraction 1.5"), 1);
  EXPECT_EQ(run("sweep --kind nothing"), 1);
  EXPECT_EQ(run("sweep --kind data_fraction --grid 0.5,x"), 1);
}

TEST_F(Cli, SweepCsvDeterministic) {
  const auto cfg = small_config();
  const std::string args = "sweep --config " + cfg + " --kind data_fraction --grid 0.5,1 --seeds 2";
  ASSERT_EQ(run(args + " --out " + path("a.csv")), 0) << slurp("stderr");
  ASSERT_EQ(run(args + " --workers 2 --out " + path("b.csv")), 0);
  EXPECT_EQ(slurp("a.csv"), slurp("b.csv"));
  EXPECT_EQ(slurp("a.csv").rfind("sweep,point,condition,accuracy,seed\n", 0), 0u);
}

TEST_F(Cli, GradcheckPasses) {
  ASSERT_EQ(run("gradcheck"), 0) << slurp("stdout");
  EXPECT_NE(slurp("stdout").find("PASS"), std::string::npos);
}

}  // namespace
