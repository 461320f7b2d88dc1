#include "ncdre/cli.hpp"
#include "ncdre/corpus.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace ncdre {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ncdre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("ncdre_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

void replace(std::string& s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  ASSERT_NE(at, std::string::npos) << from;
  s.replace(at, from.size(), to);
}

// synth_default shrunk to a handful of documents
fs::path small_synth_config(const fs::path& dir) {
  auto text = slurp(fs::path(NCDRE_CONFIG_DIR) / "synth_default.cfg");
  replace(text, "documents = 200", "documents = 8");
  replace(text, "dev_documents = 100", "dev_documents = 3");
  write(dir / "synth.cfg", text);
  return dir / "synth.cfg";
}

fs::path tiny_train_config(const fs::path& dir) {
  write(dir / "train.cfg",
        "d_model = 12\nencoder_layers = 1\nencoder_heads = 2\nencoder_ff = 16\nmax_length = 256\n"
        "decoder_layers = 1\ncross_heads = 6\ndecoder_ff = 16\nepochs = 1\nbatch_size = 4\n");
  return dir / "train.cfg";
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--data", "x"}).code, kExitUsage);
  const auto dir = scratch("usage");
  write(dir / "empty.cfg", "# nothing here\n");
  const auto r = cli({"synth", "--config", (dir / "empty.cfg").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("error[usage]"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
  const auto dir = scratch("config");
  write(dir / "bad.cfg", "d_model = 12\nbogus_key = 3\n");
  auto r = cli({"train", "--config", (dir / "bad.cfg").string(), "--data", dir.string(), "--out",
                (dir / "o").string()});
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("bogus_key"), std::string::npos);
  r = cli({"synth", "--config", (dir / "missing.cfg").string(), "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kExitConfig);
}

TEST(Cli, DataAndIoErrors) {
  const auto dir = scratch("data");
  const auto cfg = tiny_train_config(dir);
  auto r = cli({"train", "--config", cfg.string(), "--data", (dir / "nowhere").string(), "--out",
                (dir / "o").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("train.json"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "o" / "manifest.json"));
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "o" / "manifest.json"))["exit_code"].get<int>(), kExitData);

  write(dir / "blocker", "a file, not a directory\n");
  r = cli({"synth", "--config", small_synth_config(dir).string(), "--out", (dir / "blocker" / "sub").string()});
  EXPECT_EQ(r.code, kExitIo);
}

TEST(Cli, SynthTrainEvalExplain) {
  const auto dir = scratch("flow");
  const auto synth_cfg = small_synth_config(dir);
  ASSERT_EQ(cli({"synth", "--config", synth_cfg.string(), "--seed", "4", "--out", (dir / "a").string()}).code,
            kExitOk);
  ASSERT_EQ(cli({"synth", "--config", synth_cfg.string(), "--seed", "4", "--out", (dir / "b").string()}).code,
            kExitOk);
  for (const char* f : {"train.json", "dev.json", "rel_info.json", "schema.txt"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  const auto relations = load_rel_info(dir / "a" / "rel_info.json");
  const auto train_docs = load_docred(dir / "a" / "train.json", relations);
  EXPECT_EQ(train_docs.size(), 8u);
  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "synth");
  EXPECT_EQ(manifest["seed"].get<long long>(), 4);

  const auto train_cfg = tiny_train_config(dir);
  auto r = cli({"train", "--config", train_cfg.string(), "--data", (dir / "a").string(), "--out",
                (dir / "run").string(), "--quiet", "--no-c-msa"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const char* f : {"model.ckpt", "best.ckpt", "last.ckpt", "history.jsonl", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
  }

  r = cli({"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data", (dir / "a" / "dev.json").string(),
           "--out", (dir / "eval").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("Ign-F1 omitted"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "predictions.json"));
  const auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  EXPECT_TRUE(report.contains("overall"));

  r = cli({"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data", (dir / "a" / "dev.json").string(),
           "--train-facts", (dir / "a" / "train.json").string(), "--out", (dir / "eval2").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.err.find("Ign-F1 omitted"), std::string::npos);

  const auto title = train_docs.front().doc_id;
  r = cli({"explain", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data",
           (dir / "a" / "train.json").string(), "--doc", title, "--head", "0", "--tail", "1", "--out",
           (dir / "explain").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto heat = nlohmann::json::parse(slurp(dir / "explain" / "heatmap.json"));
  double total = 0;
  for (const auto& tok : heat.at("tokens")) total += tok.at("weight").get<double>();
  EXPECT_NEAR(total, 1.0, 1e-9);

  r = cli({"explain", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data",
           (dir / "a" / "train.json").string(), "--doc", title, "--head", "0", "--tail", "0", "--out",
           (dir / "explain").string()});
  EXPECT_EQ(r.code, kExitData);
  r = cli({"explain", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data",
           (dir / "a" / "train.json").string(), "--doc", "no-such-title", "--head", "0", "--tail", "1", "--out",
           (dir / "explain").string()});
  EXPECT_EQ(r.code, kExitData);

  // A corpus with a foreign entity type cannot be scored by this checkpoint.
  auto foreign = slurp(dir / "a" / "dev.json");
  const auto at = foreign.find("\"type\":\"");
  ASSERT_NE(at, std::string::npos);
  foreign.insert(at + 8, "ALIEN");
  write(dir / "foreign.json", foreign);
  r = cli({"eval", "--checkpoint", (dir / "run" / "model.ckpt").string(), "--data",
           (dir / "foreign.json").string(), "--out", (dir / "eval3").string()});
  EXPECT_EQ(r.code, kExitVocabulary) << r.err;
}

TEST(Cli, ExitCategories) {
  EXPECT_STREQ(exit_category(kExitVocabulary), "vocabulary");
  EXPECT_STREQ(exit_category(kExitNumeric), "numeric");
}

}  // namespace
}  // namespace ncdre
