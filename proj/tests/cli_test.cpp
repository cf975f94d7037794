#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cli/cli.hpp"
#include "cli/config.hpp"
#include "coherence/error.hpp"
#include "test_util.hpp"

namespace coherence::cli {
namespace {

const std::filesystem::path kFixtures = COHERENCE_FIXTURES;

struct Outcome {
  int code = 0;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool has_line(const std::string& text, const std::string& line) {
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) {
    if (l == line) return true;
  }
  return false;
}

const std::vector<std::string> kTiny = {"--embed-dim", "4", "--hidden-dim", "4", "--epochs", "2"};

std::vector<std::string> with(std::vector<std::string> args, const std::vector<std::string>& extra) {
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

TEST(Cli, GradcheckPassesForEveryModel) {
  const auto r = run({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.err;
  for (const char* m : {"lm", "seq2seq", "hmmlda-gm", "vlv", "discrim", "adversary"}) {
    EXPECT_NE(r.out.find(std::string(m) + "\tmax-rel-error\t"), std::string::npos) << m;
    EXPECT_TRUE(has_line(r.out, std::string(m) + "\tstatus\tpass")) << m;
  }
}

TEST(Cli, GradcheckUnknownModelFails) {
  EXPECT_EQ(run({"gradcheck", "--model", "markov"}).code, 1);
}

TEST(Cli, OracleFixtureBinaryAccuracy) {
  const auto r = run({"eval-binary", "--mode", "oracle", "--pairs", (kFixtures / "oracle_pairs.txt").string(),
                      "--vocab", (kFixtures / "vocab.txt").string(), "--config", (kFixtures / "oracle.conf").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(has_line(r.out, "summary\taccuracy\t1.000000")) << r.out;
  EXPECT_TRUE(has_line(r.out, "pair0\toriginal\t1.000000")) << r.out;
}

TEST(Cli, FlagsOverrideConfigFile) {
  const auto r = run({"eval-binary", "--mode", "oracle", "--pairs", (kFixtures / "oracle_pairs.txt").string(),
                      "--vocab", (kFixtures / "vocab.txt").string(), "--config", (kFixtures / "oracle.conf").string(),
                      "--classes", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(has_line(r.out, "summary\taccuracy\t1.000000")) << r.out;
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"gradcheck", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"score", "--mode", "telepathy"}).code, 2);
  EXPECT_EQ(run({"generate", "--turns", "4", "--forward", "x"}).code, 2);
  const auto r = run({"frobnicate"});
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, RuntimeErrorsExitOne) {
  testing::TempDir dir;
  const auto r = run({"ingest", "--corpus", (dir / "missing.txt").string(), "--out", (dir / "d").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, SynthHonorsSeed) {
  testing::TempDir dir;
  ASSERT_EQ(run({"synth", "--count", "3", "--out", (dir / "a.txt").string(), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"synth", "--count", "3", "--out", (dir / "b.txt").string(), "--seed", "1"}).code, 0);
  ASSERT_EQ(run({"synth", "--count", "3", "--out", (dir / "c.txt").string(), "--seed", "2"}).code, 0);
  EXPECT_EQ(read_bytes(dir / "a.txt"), read_bytes(dir / "b.txt"));
  EXPECT_NE(read_bytes(dir / "a.txt"), read_bytes(dir / "c.txt"));
}

class Pipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = (dir_ / "data").string();
    ASSERT_EQ(run({"ingest", "--corpus", (kFixtures / "ordered.txt").string(), "--out", data_}).code, 0);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  Outcome train(const std::string& model, const std::string& out, const std::vector<std::string>& extra = {}) const {
    const std::vector<std::string> seed = extra.empty() ? std::vector<std::string>{"--seed", "3"} : extra;
    return run(with(with({"train", "--model", model, "--data", data_, "--out", path(out)}, kTiny), seed));
  }

  testing::TempDir dir_;
  std::string data_;
};

TEST_F(Pipeline, TrainScoreReconstructGenerate) {
  ASSERT_EQ(train("s2s-fwd", "fwd.ckpt").code, 0);
  ASSERT_EQ(train("s2s-bwd", "bwd.ckpt").code, 0);
  ASSERT_EQ(train("lm", "lm.ckpt").code, 0);
  const std::vector<std::string> models = {"--forward", path("fwd.ckpt"), "--backward", path("bwd.ckpt"), "--lm",
                                           path("lm.ckpt")};
  for (const char* mode : {"uni", "bi", "mmi"}) {
    const auto s = run(with({"score", "--mode", mode, "--data", data_}, models));
    EXPECT_EQ(s.code, 0) << s.err;
    EXPECT_NE(s.out.find("p0\tscore-" + std::string(mode) + "\t"), std::string::npos) << s.out;
  }
  const auto b = run(with({"eval-binary", "--mode", "bi", "--data", data_}, models));
  EXPECT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("summary\taccuracy\t"), std::string::npos);
  const auto r = run(with({"reconstruct", "--mode", "uni", "--data", data_, "--standard-tau"}, models));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"metric\":\"tau\""), std::string::npos) << r.out;
  const auto g = run(with({"generate", "--turns", "2", "--rerank", "mmi", "--data", data_, "--max-len", "6"}, models));
  EXPECT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("p0\tturn-2\t"), std::string::npos) << g.out;
}

TEST_F(Pipeline, ScoreReportsPairTerms) {
  ASSERT_EQ(train("s2s-fwd", "fwd.ckpt").code, 0);
  ASSERT_EQ(train("s2s-bwd", "bwd.ckpt").code, 0);
  ASSERT_EQ(train("lm", "lm.ckpt").code, 0);
  const auto s = run({"score", "--mode", "mmi", "--data", data_, "--forward", path("fwd.ckpt"), "--backward",
                      path("bwd.ckpt"), "--lm", path("lm.ckpt")});
  ASSERT_EQ(s.code, 0) << s.err;
  std::istringstream lines(s.out);
  double pair_sum = 0.0, document = 0.0;
  std::size_t pairs = 0;
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("p0.", 0) == 0) {
      double value, fwd, bwd, lp, ln;
      std::size_t np, nn;
      ASSERT_EQ(std::sscanf(line.c_str(), "p0.%*u\tpair-mmi\t%lf\tfwd=%lf;bwd=%lf;lm_prev=%lf;lm_next=%lf;n_prev=%zu;n_next=%zu",
                            &value, &fwd, &bwd, &lp, &ln, &np, &nn),
                7)
          << line;
      EXPECT_NEAR(value, (bwd - lp) / static_cast<double>(np) + (fwd - ln) / static_cast<double>(nn), 1e-5);
      pair_sum += value;
      ++pairs;
    }
    if (line.rfind("p0\tscore-mmi\t", 0) == 0) document = std::stod(line.substr(line.rfind('\t') + 1));
  }
  ASSERT_GT(pairs, 0u);
  EXPECT_NEAR(pair_sum / static_cast<double>(pairs), document, 1e-5);
}

TEST_F(Pipeline, IdenticalRunsAreBitwiseIdentical) {
  ASSERT_EQ(train("s2s-fwd", "a.ckpt").code, 0);
  ASSERT_EQ(train("s2s-fwd", "b.ckpt").code, 0);
  EXPECT_EQ(read_bytes(path("a.ckpt")), read_bytes(path("b.ckpt")));
  const auto x = run({"score", "--mode", "uni", "--data", data_, "--forward", path("a.ckpt")});
  const auto y = run({"score", "--mode", "uni", "--data", data_, "--forward", path("b.ckpt")});
  EXPECT_EQ(x.code, 0);
  EXPECT_EQ(x.out, y.out);
  ASSERT_EQ(train("s2s-fwd", "c.ckpt", {"--seed", "4"}).code, 0);
  EXPECT_NE(read_bytes(path("a.ckpt")), read_bytes(path("c.ckpt")));
}

TEST_F(Pipeline, WrongCheckpointKindRejected) {
  ASSERT_EQ(train("lm", "lm.ckpt").code, 0);
  const auto r = run({"score", "--mode", "uni", "--data", data_, "--forward", path("lm.ckpt")});
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Pipeline, DiscriminativeAndCosineModes) {
  ASSERT_EQ(train("discrim", "d.ckpt").code, 0);
  const auto d = run({"eval-binary", "--mode", "discrim", "--data", data_, "--discrim", path("d.ckpt")});
  EXPECT_EQ(d.code, 0) << d.err;
  testing::write_file(dir_ / "emb.txt", "c0w1 1 0\nc1w2 0 1\nc2w0 1 1\n");
  const auto c = run({"score", "--mode", "cosine", "--data", data_, "--embeddings", path("emb.txt")});
  EXPECT_EQ(c.code, 0) << c.err;
}

TEST(ConfigTest, PrecedenceDefaultsFileFlags) {
  Config c;
  EXPECT_EQ(c.str("seed"), "42");
  EXPECT_EQ(c.size("classes"), 24u);
  c.load_file(kFixtures / "oracle.conf");
  EXPECT_EQ(c.size("classes"), 5u);
  EXPECT_EQ(c.u64("seed"), 7u);
  c.set("classes", "9");
  EXPECT_EQ(c.size("classes"), 9u);
  EXPECT_EQ(c.train().seed, 7u);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  Config c;
  EXPECT_THROW(c.set("colour", "red"), Error);
  c.set("epochs", "many");
  EXPECT_THROW(c.size("epochs"), Error);
  testing::TempDir dir;
  testing::write_file(dir / "bad.conf", "epochs 3\n");
  EXPECT_THROW(c.load_file(dir / "bad.conf"), Error);
}

TEST(ConfigTest, DumpIsSortedKeyValueLines) {
  Config c;
  const std::string d = c.dump();
  EXPECT_NE(d.find("seed=42\n"), std::string::npos);
  EXPECT_LT(d.find("alpha="), d.find("beta="));
}

}  // namespace
}  // namespace coherence::cli
