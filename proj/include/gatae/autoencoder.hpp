#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gatae/features.hpp"
#include "gatae/gat.hpp"
#include "gatae/graph.hpp"
#include "gatae/linalg.hpp"

namespace gatae {

struct ModelConfig {
  std::size_t input_dim = 512;
  std::size_t enc1_dim = 256;  // per head
  std::size_t enc2_dim = 256;  // per head
  std::size_t latent_dim = 256;
  std::size_t dec_hidden_dim = 384;
  std::size_t heads = 1;
  HeadCombine combine = HeadCombine::concat;
  double leaky_slope = 0.2;
  Activation encoder_activation = Activation::relu;
  Activation decoder_activation = Activation::relu;
  std::uint64_t seed = 0;

  // Widths scaled from the 512 -> 256 -> 256 -> 256 | 384 -> 512 layout.
  static ModelConfig for_input(std::size_t input_dim);
  void validate() const;
};

// y = x W^T + b
struct AffineLayer {
  Matrix weight;  // out x in
  Vector bias;
};

struct GatAutoencoder {
  ModelConfig config;
  GatLayer enc1;
  GatLayer enc2;
  AffineLayer latent;
  AffineLayer dec_hidden;
  AffineLayer dec_out;

  static GatAutoencoder init(const ModelConfig& config);
  // Same shapes, all parameters zero.
  GatAutoencoder zeros_like() const;

  struct Tensor {
    std::string name;
    std::span<double> values;
  };
  struct ConstTensor {
    std::string name;
    std::span<const double> values;
  };
  // Parameter tensors in declaration order: enc1 weights then attention per
  // head, enc2 likewise, then latent, dec_hidden, dec_out weight and bias.
  std::vector<Tensor> tensors();
  std::vector<ConstTensor> tensors() const;
  std::size_t parameter_count() const;
  std::uint64_t fingerprint() const;
};

Matrix encode(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g);
Matrix decode(const GatAutoencoder& m, const Matrix& z);

struct LossAndGradients {
  double loss = 0.0;
  GatAutoencoder gradients;  // same layout as the model
};

// Reconstruction MSE of x and its analytic gradient for every parameter.
double reconstruction_loss(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g);
LossAndGradients loss_and_gradients(const GatAutoencoder& m, const Matrix& x,
                                    const SimilarityGraph& g);

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::size_t log_every = 50;

  void validate() const;
};

// True for the epochs reported in the training log: epoch 2 and every
// multiple of log_every.
bool is_logged_epoch(std::size_t epoch, std::size_t log_every);

struct AdamState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update over matching parameter/gradient tensors.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
  GatAutoencoder model;
  // loss_history[e] is the loss of the model after e + 1 updates.
  std::vector<double> loss_history;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Full-batch Adam on the reconstruction loss. The callback sees every epoch.
TrainResult train(GatAutoencoder m, const Matrix& x, const SimilarityGraph& g,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::vector<std::pair<std::string, double>> per_tensor;  // max relative error per tensor
  std::size_t checked = 0;
  bool passed = false;
};

// Central finite differences of the total loss against the analytic gradient.
// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport grad_check(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g,
                           double eps = 1e-5, double tol = 1e-4);

// Checkpoint: "GATAE1\n", one line of JSON header, then every tensor as
// little-endian f64 in declaration order.
std::vector<std::uint8_t> encode_checkpoint(const GatAutoencoder& m);
GatAutoencoder decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const GatAutoencoder& m, const std::filesystem::path& path);
GatAutoencoder load_checkpoint(const std::filesystem::path& path);

// Context-aware latents of every indexed image, with the feature rows and
// graph they were computed over.
struct LatentIndex {
  Matrix features;
  Matrix latents;
  std::vector<FeatureItem> items;
  SimilarityGraph graph;
  std::string model_fingerprint;

  std::vector<std::string> labels() const;  // sorted, unique
  std::vector<std::size_t> rows_of(const std::string& label) const;
};

LatentIndex build_latent_index(const GatAutoencoder& m, const FeatureSet& fs,
                               const SimilarityGraph& g);

// Directory layout: features.fvec, latents.fvec (each with manifest) and
// index.meta holding the model fingerprint and graph parameters.
void save_latent_index(const LatentIndex& index, const std::filesystem::path& dir);
LatentIndex load_latent_index(const std::filesystem::path& dir);

}  // namespace gatae
