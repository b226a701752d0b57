#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gatae/autoencoder.hpp"
#include "gatae/cli.hpp"
#include "gatae/io.hpp"
#include "json.hpp"
#include "test_util.hpp"

namespace gatae {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines_with(const std::string& text, const std::string& needle) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (line.find(needle) != std::string::npos) ++n;
  return n;
}

std::string value_of(const std::string& text, const std::string& step) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(step, 0) == 0) {
      const auto pos = line.find_first_not_of(' ', step.size());
      return pos == std::string::npos ? "" : line.substr(pos);
    }
  return "";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("gatae_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Two listings of striped images: horizontal stripes versus vertical.
  fs::path write_images() {
    const fs::path root = dir_ / "images";
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> jitter(0, 30);
    for (int listing = 0; listing < 2; ++listing) {
      fs::create_directories(root / ("listing" + std::to_string(listing)));
      for (int i = 0; i < 2; ++i) {
        GrayImage img{32, 32, std::vector<std::uint8_t>(32 * 32)};
        for (std::size_t y = 0; y < 32; ++y)
          for (std::size_t x = 0; x < 32; ++x) {
            const std::size_t t = listing == 0 ? y : x;
            img.pixels[y * 32 + x] = static_cast<std::uint8_t>(((t / 4) % 2 ? 200 : 40) + jitter(rng));
          }
        save_pgm(img, root / ("listing" + std::to_string(listing)) / ("img" + std::to_string(i) + ".pgm"));
      }
    }
    return root;
  }

  fs::path write_clusters(std::size_t held_out = 0) {
    const auto data = testing::gaussian_clusters(4, 20, 32, held_out, 3);
    save_features(data.train, dir_ / "train.fvec");
    if (held_out) save_features(data.held_out, dir_ / "held.fvec");
    return dir_ / "train.fvec";
  }

  CliResult train_index(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"train", "--features", (dir_ / "train.fvec").string(), "--index",
                                  (dir_ / name).string(), "--k", "5", "--latent", "8", "--threads", "1"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  fs::path dir_;
};

TEST_F(CliTest, ExtractBuildsLabelledFeatures) {
  const fs::path root = write_images();
  const fs::path out = dir_ / "feat.fvec";
  const CliResult r = run_cli({"extract", "--input", root.string(), "--output", out.string(),
                               "--resize", "32"});
  ASSERT_EQ(r.code, 0) << r.err;
  const FeatureSet fs = load_features(out);
  EXPECT_EQ(fs.matrix.rows(), 4u);
  EXPECT_EQ(fs.matrix.cols(), hog_descriptor_length(32, 32, HogConfig{}));
  EXPECT_EQ(fs.items[0].listing, "listing0");
  EXPECT_EQ(fs.items[3].listing, "listing1");
  EXPECT_EQ(fs.items[1].path, "listing0/img1.pgm");

  const auto first = io::read_file(out);
  ASSERT_EQ(run_cli({"extract", "--input", root.string(), "--output", out.string(), "--resize", "32"}).code, 0);
  EXPECT_EQ(io::read_file(out), first);
}

TEST_F(CliTest, ExtractEmptyDirectoryFails) {
  fs::create_directories(dir_ / "empty");
  const CliResult r = run_cli({"extract", "--input", (dir_ / "empty").string(), "--output",
                               (dir_ / "x.fvec").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "x.fvec"));
}

TEST_F(CliTest, ExtractSkipsUnreadableFiles) {
  const fs::path root = write_images();
  std::ofstream(root / "listing0" / "broken.pgm") << "P5\n2 2\n255\n";  // truncated payload
  const CliResult r = run_cli({"extract", "--input", root.string(), "--output",
                               (dir_ / "feat.fvec").string(), "--resize", "32"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning: skipping"), std::string::npos);
  EXPECT_EQ(load_features(dir_ / "feat.fvec").matrix.rows(), 4u);
}

TEST_F(CliTest, TrainPrintsLogAndWritesIndex) {
  write_clusters();
  const CliResult r = train_index("index");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "Loaded images"), "80 images from 4 folders");
  EXPECT_EQ(value_of(r.out, "KNN graph"), "Built with 400 edges");
  EXPECT_EQ(count_lines_with(r.out, "Epoch "), 5u);
  EXPECT_NE(value_of(r.out, "Epoch 200").find("Loss: "), std::string::npos);
  EXPECT_EQ(value_of(r.out, "Representatives"), "Saved representative vectors for each folder");
  for (const char* f : {"model.ckpt", "features.fvec", "latents.fvec", "graph.txt", "index.meta",
                        "reps.fvec", "loss.log"}) {
    EXPECT_TRUE(fs::exists(dir_ / "index" / f)) << f;
  }
}

TEST_F(CliTest, TrainTwoEpochsLogsOnce) {
  write_clusters();
  const CliResult r = train_index("index", {"--epochs", "2", "--log-every", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines_with(r.out, "Epoch "), 1u);
  EXPECT_NE(r.out.find("Epoch 2"), std::string::npos);
}

TEST_F(CliTest, TrainIsReproducible) {
  write_clusters();
  ASSERT_EQ(train_index("a", {"--epochs", "20", "--seed", "7"}).code, 0);
  ASSERT_EQ(train_index("b", {"--epochs", "20", "--seed", "7"}).code, 0);
  EXPECT_EQ(io::read_file(dir_ / "a" / "model.ckpt"), io::read_file(dir_ / "b" / "model.ckpt"));
  EXPECT_EQ(io::read_file(dir_ / "a" / "loss.log"), io::read_file(dir_ / "b" / "loss.log"));
  ASSERT_EQ(train_index("c", {"--epochs", "20", "--seed", "8"}).code, 0);
  EXPECT_NE(io::read_file(dir_ / "a" / "model.ckpt"), io::read_file(dir_ / "c" / "model.ckpt"));
}

TEST_F(CliTest, TrainValidatesBeforeCompute) {
  write_clusters();
  const CliResult r = train_index("index", {"--k", "200"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_FALSE(fs::exists(dir_ / "index" / "model.ckpt"));
  const CliResult latent = run_cli({"train", "--features", (dir_ / "train.fvec").string(), "--index",
                                    (dir_ / "index").string(), "--latent", "32"});
  EXPECT_NE(latent.code, 0);
  EXPECT_NE(latent.err.find("latent_dim"), std::string::npos);
}

TEST_F(CliTest, QueryBothFlows) {
  const fs::path features = write_clusters();
  ASSERT_EQ(train_index("index").code, 0);
  const std::vector<std::string> base{"query", "--index", (dir_ / "index").string(), "--features",
                                      features.string(), "--row", "25", "--k", "5"};
  const CliResult one = run_cli(base);
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_EQ(value_of(one.out, "Closest similarity"), "1.0000");
  EXPECT_EQ(value_of(one.out, "Predicted category"), "c1");
  EXPECT_EQ(value_of(one.out, "Closest image"), "c1/img5");
  EXPECT_EQ(count_lines_with(one.out, "Similarity to ("), 4u);

  auto args = base;
  args.insert(args.end(), {"--flow", "approach2", "--format", "json"});
  const CliResult two = run_cli(args);
  ASSERT_EQ(two.code, 0) << two.err;
  const auto j = nlohmann::json::parse(two.out);
  EXPECT_EQ(j.at("flow"), "approach2");
  EXPECT_EQ(j.at("predicted"), "c1");
  EXPECT_GE(j.at("best_match").at("similarity").get<double>(), 0.95);
  EXPECT_EQ(j.at("scores").size(), 4u);
}

TEST_F(CliTest, QueryErrors) {
  const fs::path features = write_clusters();
  ASSERT_EQ(train_index("index").code, 0);
  const std::string index = (dir_ / "index").string();
  const CliResult cat = run_cli({"query", "--index", index, "--features", features.string(),
                                 "--row", "0", "--category", "hats"});
  EXPECT_NE(cat.code, 0);
  EXPECT_NE(cat.err.find("hats"), std::string::npos);

  FeatureSet narrow;
  narrow.matrix = Matrix(1, 7, 1.0);
  narrow.items.push_back({"x/0", "x"});
  save_features(narrow, dir_ / "narrow.fvec");
  const CliResult dim = run_cli({"query", "--index", index, "--features",
                                 (dir_ / "narrow.fvec").string()});
  EXPECT_NE(dim.code, 0);
  EXPECT_NE(dim.err.find("7"), std::string::npos);
  EXPECT_NE(dim.err.find("32"), std::string::npos);
  EXPECT_EQ(std::count(dim.err.begin(), dim.err.end(), '\n'), 1);

  const CliResult none = run_cli({"query", "--index", index});
  EXPECT_NE(none.code, 0);
  EXPECT_EQ(none.err.rfind("error: ", 0), 0u);
}

TEST_F(CliTest, QueryRejectsIndexFromAnotherModel) {
  write_clusters();
  ASSERT_EQ(train_index("a", {"--epochs", "2"}).code, 0);
  ASSERT_EQ(train_index("b", {"--epochs", "3"}).code, 0);
  fs::copy_file(dir_ / "b" / "model.ckpt", dir_ / "a" / "model.ckpt",
                fs::copy_options::overwrite_existing);
  const CliResult r = run_cli({"query", "--index", (dir_ / "a").string(), "--features",
                               (dir_ / "train.fvec").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("fingerprint"), std::string::npos);
}

TEST_F(CliTest, MergeListingMatrix) {
  std::ofstream(dir_ / "sim.json") << R"({"labels": ["listing1", "listing2", "listing3"],
    "matrix": [[1.0, 0.6733398628234863, 0.8103391471657959],
               [0.6733398628234863, 1.0, 0.6957497596740723],
               [0.8103391471657959, 0.6957497596740723, 1.0]]})";
  const std::string sim = (dir_ / "sim.json").string();
  const CliResult r = run_cli({"merge", "--similarity", sim, "--threshold", "0.8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("{listing1, listing3}"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("{listing2}"), std::string::npos);

  const CliResult high = run_cli({"merge", "--similarity", sim, "--threshold", "1.0", "--format", "json"});
  ASSERT_EQ(high.code, 0);
  EXPECT_EQ(nlohmann::json::parse(high.out).at("components").size(), 3u);
  const CliResult low = run_cli({"merge", "--similarity", sim, "--threshold", "-1", "--format", "json"});
  ASSERT_EQ(low.code, 0);
  EXPECT_EQ(nlohmann::json::parse(low.out).at("components").size(), 1u);
}

TEST_F(CliTest, MergeFromIndexRepresentatives) {
  write_clusters();
  ASSERT_EQ(train_index("index", {"--epochs", "5"}).code, 0);
  const CliResult r = run_cli({"merge", "--index", (dir_ / "index").string(), "--threshold", "-1",
                               "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("labels").size(), 4u);
  EXPECT_EQ(j.at("components").size(), 1u);
}

TEST_F(CliTest, EvalPrintsMetricsTable) {
  write_clusters(10);
  ASSERT_EQ(train_index("index").code, 0);
  const CliResult r = run_cli({"eval", "--index", (dir_ / "index").string(), "--queries",
                               (dir_ / "held.fvec").string(), "--k", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(value_of(r.out, "Categorization accuracy").find("%"), std::string::npos);
  EXPECT_EQ(value_of(r.out, "Class"), "Precision / Recall / F1-score");
  EXPECT_FALSE(value_of(r.out, "Macro average").empty());
  EXPECT_FALSE(value_of(r.out, "Weighted average").empty());
  const CliResult j = run_cli({"eval", "--index", (dir_ / "index").string(), "--queries",
                               (dir_ / "held.fvec").string(), "--k", "5", "--format", "json"});
  EXPECT_GE(nlohmann::json::parse(j.out).at("accuracy").get<double>(), 0.95);
}

TEST_F(CliTest, EvalEmptyQuerySetFails) {
  write_clusters();
  ASSERT_EQ(train_index("index", {"--epochs", "2"}).code, 0);
  std::vector<std::uint8_t> empty;
  const std::string magic = "FVEC1\n";
  empty.assign(magic.begin(), magic.end());
  for (int i = 0; i < 8; ++i) empty.push_back(i == 4 ? 32 : 0);
  io::atomic_write(dir_ / "empty.fvec", std::string(empty.begin(), empty.end()));
  io::atomic_write(dir_ / "empty.fvec.manifest.json", "[]");
  const CliResult r = run_cli({"eval", "--index", (dir_ / "index").string(), "--queries",
                               (dir_ / "empty.fvec").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST_F(CliTest, GradCheckPasses) {
  for (const char* combine : {"concat", "average"}) {
    const CliResult r = run_cli({"gradcheck", "--heads", "2", "--combine", combine, "--seed", "3"});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_EQ(value_of(r.out, "Result"), "PASS");
    EXPECT_NE(value_of(r.out, "Max relative error").find("e-"), std::string::npos);
  }
}

TEST_F(CliTest, ConfigFileWithFlagOverride) {
  write_clusters();
  std::ofstream(dir_ / "cfg.json") << R"({"graph.k": 3, "train.epochs": 4, "train.log_every": 2,
                                         "model.latent_dim": 8})";
  const std::vector<std::string> base{"train", "--config", (dir_ / "cfg.json").string(), "--features",
                                      (dir_ / "train.fvec").string(), "--index", (dir_ / "i").string()};
  const CliResult r = run_cli(base);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(value_of(r.out, "KNN graph"), "Built with 240 edges");
  EXPECT_EQ(count_lines_with(r.out, "Epoch "), 2u);
  auto args = base;
  args.insert(args.end(), {"--k", "6"});
  const CliResult o = run_cli(args);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_EQ(value_of(o.out, "KNN graph"), "Built with 480 edges");

  std::ofstream(dir_ / "bad.json") << R"({"graph.kk": 3})";
  const CliResult bad = run_cli({"train", "--config", (dir_ / "bad.json").string(), "--features",
                                 (dir_ / "train.fvec").string(), "--index", (dir_ / "j").string()});
  EXPECT_NE(bad.code, 0);
  EXPECT_NE(bad.err.find("graph.kk"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsArePrefixed) {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"bogus"}, {"train", "--flow", "approach3"}, {"train", "--features", "/nonexistent"}}) {
    const CliResult r = run_cli(args);
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  }
}

}  // namespace
}  // namespace gatae
