#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "gatae/autoencoder.hpp"
#include "gatae/error.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gatae {
namespace {

namespace fs = std::filesystem;

ModelConfig small_config(std::size_t d = 6, std::uint64_t seed = 0) {
  ModelConfig c;
  c.input_dim = d;
  c.enc1_dim = 4;
  c.enc2_dim = 4;
  c.latent_dim = 3;
  c.dec_hidden_dim = 5;
  c.seed = seed;
  return c;
}

void zero_biases(GatAutoencoder& m) {
  for (auto* layer : {&m.latent, &m.dec_hidden, &m.dec_out})
    for (double& b : layer->bias) b = 0.0;
}

Matrix affine(const AffineLayer& l, const Matrix& x) {
  Matrix y = oracle::naive_matmul(x, l.weight.transposed());
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += l.bias[c];
  return y;
}

SimilarityGraph knn_for(const Matrix& x, std::size_t k) { return build_knn_graph(x, k); }

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gatae_ae_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TEST(ModelConfig, RejectsLatentNotSmallerThanInput) {
  ModelConfig c = small_config();
  c.latent_dim = 6;
  EXPECT_THROW(c.validate(), ArgumentError);
  EXPECT_THROW(GatAutoencoder::init(c), ArgumentError);
}

TEST(ModelConfig, DefaultsForImageDescriptors) {
  const ModelConfig c = ModelConfig::for_input(512);
  EXPECT_EQ(c.enc1_dim, 256u);
  EXPECT_EQ(c.enc2_dim, 256u);
  EXPECT_EQ(c.latent_dim, 256u);
  EXPECT_EQ(c.dec_hidden_dim, 384u);
  EXPECT_EQ(c.heads, 1u);
}

TEST(Encode, SelfLoopRowsIndependent) {
  std::mt19937_64 rng(1);
  const GatAutoencoder m = GatAutoencoder::init(small_config());
  Matrix x = testing::random_matrix(5, 6, rng);
  const Matrix before = encode(m, x, build_self_loop_graph(5));
  x(3, 0) += 1.0;
  const Matrix after = encode(m, x, build_self_loop_graph(5));
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      if (r != 3) {
        EXPECT_EQ(before(r, c), after(r, c));
      }
}

TEST(Encode, ZeroInputZeroBiasesGivesZeroLatent) {
  GatAutoencoder m = GatAutoencoder::init(small_config());
  zero_biases(m);
  std::mt19937_64 rng(2);
  const SimilarityGraph g = knn_for(testing::random_matrix(4, 6, rng), 2);
  const Matrix z = encode(m, Matrix(4, 6), g);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  const Matrix y = decode(m, Matrix(4, 3));
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Encode, MatchesLayerCompositionOracle) {
  std::mt19937_64 rng(3);
  for (auto combine : {HeadCombine::concat, HeadCombine::average}) {
    ModelConfig c = small_config(6, 4);
    c.heads = 2;
    c.combine = combine;
    const GatAutoencoder m = GatAutoencoder::init(c);
    const Matrix x = testing::random_matrix(5, 6, rng);
    const SimilarityGraph g = knn_for(x, 2);
    const Matrix h1 = oracle::gat_forward(m.enc1, x, g);
    const Matrix h2 = oracle::gat_forward(m.enc2, h1, g);
    const Matrix z = affine(m.latent, h2);
    const Matrix got = encode(m, x, g);
    ASSERT_EQ(got.rows(), 5u);
    ASSERT_EQ(got.cols(), 3u);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(got.data()[i], z.data()[i], 1e-10);
  }
}

TEST(Encode, ShapeMismatch) {
  const GatAutoencoder m = GatAutoencoder::init(small_config());
  EXPECT_THROW(encode(m, Matrix(3, 5, 1.0), build_self_loop_graph(3)), ShapeError);
  EXPECT_THROW(encode(m, Matrix(3, 6, 1.0), build_self_loop_graph(4)), ShapeError);
  EXPECT_THROW(decode(m, Matrix(3, 2)), ShapeError);
}

TEST(Encode, SubsetCommutesOnSelfLoopGraphs) {
  std::mt19937_64 rng(5);
  const GatAutoencoder m = GatAutoencoder::init(small_config());
  const Matrix x = testing::random_matrix(8, 6, rng);
  const Matrix full = encode(m, x, build_self_loop_graph(8));
  const std::vector<std::size_t> subset{6, 1, 4};
  const Matrix part = encode(m, x.select_rows(subset), build_self_loop_graph(3));
  EXPECT_EQ(part, full.select_rows(subset));
}

TEST(Decode, ScalarChainByHand) {
  ModelConfig c;
  c.input_dim = 2;
  c.enc1_dim = c.enc2_dim = 1;
  c.latent_dim = 1;
  c.dec_hidden_dim = 2;
  GatAutoencoder m = GatAutoencoder::init(c);
  m.dec_hidden.weight = Matrix(2, 1, {2.0, -1.0});
  m.dec_hidden.bias = {0.5, 0.25};
  m.dec_out.weight = Matrix(2, 2, {1.0, 3.0, -2.0, 0.5});
  m.dec_out.bias = {0.1, -0.1};
  // z = 1: hidden = relu(2.5, -0.75) = (2.5, 0); out = (2.6, -5.1)
  const Matrix out = decode(m, Matrix(1, 1, {1.0}));
  EXPECT_DOUBLE_EQ(out(0, 0), 2.6);
  EXPECT_DOUBLE_EQ(out(0, 1), -5.1);
}

TEST(Decode, MatchesCompositionOracle) {
  std::mt19937_64 rng(6);
  const GatAutoencoder m = GatAutoencoder::init(small_config(6, 7));
  const Matrix z = testing::random_matrix(7, 3, rng);
  Matrix hidden = affine(m.dec_hidden, z);
  for (double& v : hidden.data()) v = std::max(0.0, v);
  const Matrix ref = affine(m.dec_out, hidden);
  const Matrix got = decode(m, z);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got.data()[i], ref.data()[i], 1e-10);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Vector p{1.0, -2.0, 3.0};
  const Vector g(3, 0.0);
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  AdamState state;
  adam_step(params, grads, state, TrainConfig{});
  EXPECT_EQ(p, (Vector{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Vector p{1.0, 1.0, 1.0};
  const Vector g{0.3, -50.0, 1e-3};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  AdamState state;
  TrainConfig cfg;
  adam_step(params, grads, state, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(1.0 - p[i], cfg.learning_rate * (g[i] > 0 ? 1.0 : -1.0), 1e-8);
  }
}

TEST(Adam, QuadraticMatchesScalarOracle) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Vector p{1.0};
  Vector g(1);
  std::vector<std::span<double>> params{p};
  AdamState state;
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 10; ++t) {
    g[0] = 2.0 * p[0];
    std::vector<std::span<const double>> grads{g};
    adam_step(params, grads, state, cfg);
    const double gt = 2.0 * theta;
    m = cfg.beta1 * m + (1 - cfg.beta1) * gt;
    v = cfg.beta2 * v + (1 - cfg.beta2) * gt * gt;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    theta -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
    EXPECT_NEAR(p[0], theta, 1e-12) << "step " << t;
  }
  EXPECT_EQ(state.step, 10u);
}

TEST(Adam, MismatchedTensorsRejected) {
  Vector p{1.0, 2.0};
  const Vector g{1.0};
  std::vector<std::span<double>> params{p};
  std::vector<std::span<const double>> grads{g};
  AdamState state;
  EXPECT_THROW(adam_step(params, grads, state, TrainConfig{}), ShapeError);
}

TEST(Train, SingleEpochRecordsPostStepLoss) {
  const auto data = testing::gaussian_clusters(2, 5, 6, 0, 8);
  const GatAutoencoder m = GatAutoencoder::init(small_config());
  const SimilarityGraph g = knn_for(data.train.matrix, 3);
  TrainConfig cfg;
  cfg.epochs = 1;
  const TrainResult r = train(m, data.train.matrix, g, cfg);
  ASSERT_EQ(r.loss_history.size(), 1u);
  EXPECT_EQ(r.loss_history[0], reconstruction_loss(r.model, data.train.matrix, g));
  EXPECT_NE(r.model.fingerprint(), m.fingerprint());
}

TEST(Train, ThreeClustersConverge) {
  const auto data = testing::gaussian_clusters(3, 20, 32, 0, 9);
  ModelConfig c = ModelConfig::for_input(32);
  c.latent_dim = 8;
  const SimilarityGraph g = knn_for(data.train.matrix, 5);
  std::vector<std::pair<std::size_t, double>> logged;
  const TrainResult r = train(GatAutoencoder::init(c), data.train.matrix, g, TrainConfig{},
                              [&](std::size_t e, double loss) {
                                if (is_logged_epoch(e, 50)) logged.emplace_back(e, loss);
                              });
  ASSERT_EQ(r.loss_history.size(), 200u);
  ASSERT_EQ(logged.size(), 5u);
  EXPECT_EQ(logged.front().first, 2u);
  EXPECT_EQ(logged.back().first, 200u);
  for (std::size_t i = 1; i < logged.size(); ++i) EXPECT_LT(logged[i].second, logged[i - 1].second);
  EXPECT_LE(r.loss_history[199], 0.25 * r.loss_history[1]);
  for (double l : r.loss_history) EXPECT_GE(l, 0.0);
}

TEST(Train, BitwiseDeterministic) {
  const auto data = testing::gaussian_clusters(2, 6, 8, 0, 10);
  ModelConfig c = ModelConfig::for_input(8);
  c.seed = 42;
  const SimilarityGraph g = knn_for(data.train.matrix, 3);
  TrainConfig cfg;
  cfg.epochs = 15;
  const TrainResult a = train(GatAutoencoder::init(c), data.train.matrix, g, cfg);
  const TrainResult b = train(GatAutoencoder::init(c), data.train.matrix, g, cfg);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
}

TEST(Train, NonFiniteParameterAbortsNamingEpoch) {
  const auto data = testing::gaussian_clusters(2, 4, 6, 0, 11);
  GatAutoencoder m = GatAutoencoder::init(small_config());
  m.dec_out.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 3;
  try {
    train(m, data.train.matrix, knn_for(data.train.matrix, 2), cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(Train, LoggedEpochs) {
  EXPECT_TRUE(is_logged_epoch(2, 50));
  EXPECT_TRUE(is_logged_epoch(50, 50));
  EXPECT_TRUE(is_logged_epoch(200, 50));
  EXPECT_FALSE(is_logged_epoch(1, 50));
  EXPECT_FALSE(is_logged_epoch(51, 50));
}

TEST(GradCheck, FixedSeedSmallModel) {
  std::mt19937_64 rng(12);
  GatAutoencoder m = GatAutoencoder::init(small_config(6, 13));
  testing::randomize_biases(m, rng);
  const Matrix x = testing::random_matrix(8, 6, rng);
  const GradCheckReport r = grad_check(m, x, knn_for(x, 3));
  EXPECT_TRUE(r.passed) << r.worst_tensor << " " << r.max_relative_error;
  EXPECT_LT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.checked, m.parameter_count());
}

TEST(GradCheck, LinearConfigNearMachinePrecision) {
  std::mt19937_64 rng(14);
  ModelConfig c = small_config(6, 15);
  c.encoder_activation = Activation::identity;
  c.decoder_activation = Activation::identity;
  const GatAutoencoder m = GatAutoencoder::init(c);
  const Matrix x = testing::random_matrix(6, 6, rng);
  // Self-loops only: attention is constant, so the model is linear in each
  // weight and central differences are exact up to rounding.
  const GradCheckReport r = grad_check(m, x, build_self_loop_graph(6));
  EXPECT_LT(r.max_relative_error, 1e-7);
}

TEST(GradCheck, ReportNamesWorstTensor) {
  std::mt19937_64 rng(16);
  GatAutoencoder m = GatAutoencoder::init(small_config(6, 17));
  testing::randomize_biases(m, rng);
  const Matrix x = testing::random_matrix(5, 6, rng);
  const GradCheckReport r = grad_check(m, x, knn_for(x, 2));
  ASSERT_FALSE(r.worst_tensor.empty());
  bool found = false;
  for (const auto& [name, err] : r.per_tensor) {
    EXPECT_LE(err, r.max_relative_error);
    if (name == r.worst_tensor) {
      found = true;
      EXPECT_EQ(err, r.max_relative_error);
    }
  }
  EXPECT_TRUE(found);
}

class GradCheckSeeds : public ::testing::TestWithParam<std::tuple<int, HeadCombine>> {};

TEST_P(GradCheckSeeds, Passes) {
  const auto [seed, combine] = GetParam();
  std::mt19937_64 rng(300 + seed);
  ModelConfig c = small_config(6, 400 + seed);
  c.heads = 1 + seed % 2;
  c.combine = combine;
  GatAutoencoder m = GatAutoencoder::init(c);
  testing::randomize_biases(m, rng);
  const Matrix x = testing::random_matrix(8, 6, rng);
  const GradCheckReport r = grad_check(m, x, knn_for(x, 3));
  EXPECT_TRUE(r.passed) << r.worst_tensor << "[" << r.worst_index << "] " << r.max_relative_error;
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradCheckSeeds,
                         ::testing::Combine(::testing::Range(0, 10),
                                            ::testing::Values(HeadCombine::concat,
                                                              HeadCombine::average)));

TEST(Checkpoint, RoundTripIsExact) {
  ModelConfig c = small_config(6, 18);
  c.heads = 2;
  c.combine = HeadCombine::average;
  const GatAutoencoder m = GatAutoencoder::init(c);
  const auto bytes = encode_checkpoint(m);
  const GatAutoencoder back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  EXPECT_EQ(back.fingerprint(), m.fingerprint());
  EXPECT_EQ(back.config.heads, 2u);
  EXPECT_EQ(back.config.combine, HeadCombine::average);
}

TEST(Checkpoint, CorruptInputsRejected) {
  const auto bytes = encode_checkpoint(GatAutoencoder::init(small_config()));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), ParseError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 8);
  EXPECT_THROW(decode_checkpoint(truncated), ParseError);
  EXPECT_THROW(decode_checkpoint({}), ParseError);
}

TEST(Checkpoint, SaveLoadFile) {
  const fs::path dir = temp_dir("ckpt");
  const GatAutoencoder m = GatAutoencoder::init(small_config(6, 19));
  save_checkpoint(m, dir / "model.ckpt");
  EXPECT_EQ(load_checkpoint(dir / "model.ckpt").fingerprint(), m.fingerprint());
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), std::runtime_error);
  fs::remove_all(dir);
}

TEST(LatentIndex, SaveLoadRoundTrip) {
  const auto data = testing::gaussian_clusters(3, 4, 6, 0, 20);
  const GatAutoencoder m = GatAutoencoder::init(small_config(6, 21));
  const SimilarityGraph g = knn_for(data.train.matrix, 3);
  const LatentIndex index = build_latent_index(m, data.train, g);
  EXPECT_EQ(index.latents, encode(m, data.train.matrix, g));
  EXPECT_EQ(index.labels(), (std::vector<std::string>{"c0", "c1", "c2"}));
  EXPECT_EQ(index.rows_of("c1"), (std::vector<std::size_t>{4, 5, 6, 7}));
  const fs::path dir = temp_dir("index");
  save_latent_index(index, dir);
  const LatentIndex back = load_latent_index(dir);
  // FVEC stores f32.
  ASSERT_EQ(back.latents.size(), index.latents.size());
  for (std::size_t i = 0; i < back.latents.size(); ++i) {
    EXPECT_EQ(back.latents.data()[i], static_cast<double>(static_cast<float>(index.latents.data()[i])));
    EXPECT_EQ(back.features.data()[i % back.features.size()],
              static_cast<double>(static_cast<float>(index.features.data()[i % back.features.size()])));
  }
  EXPECT_EQ(back.graph, index.graph);
  EXPECT_EQ(back.model_fingerprint, index.model_fingerprint);
  ASSERT_EQ(back.items.size(), index.items.size());
  EXPECT_EQ(back.items[5].path, index.items[5].path);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace gatae
