#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gatae/graph.hpp"
#include "gatae/linalg.hpp"

namespace gatae {

enum class HeadCombine { concat, average };
enum class Activation { relu, identity };

std::string to_string(HeadCombine c);
std::string to_string(Activation a);
HeadCombine parse_head_combine(const std::string& s);
Activation parse_activation(const std::string& s);

// One graph attention layer with K heads. Head k transforms inputs with
// weight[k] (out_dim x in_dim) and scores edge (u -> v) with
// LeakyReLU(attention[k] . [W h_v || W h_u]).
struct GatLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::size_t heads = 1;
  HeadCombine combine = HeadCombine::concat;
  std::vector<Matrix> weight;
  std::vector<Vector> attention;  // length 2 * out_dim: target half, then source half
  double leaky_slope = 0.2;
  Activation activation = Activation::relu;

  // Glorot-uniform weights and attention vectors.
  static GatLayer glorot(std::size_t in_dim, std::size_t out_dim, std::size_t heads,
                         HeadCombine combine, Activation activation, double leaky_slope,
                         std::mt19937_64& rng);

  std::size_t output_dim() const { return combine == HeadCombine::concat ? heads * out_dim : out_dim; }
  void validate() const;
  std::uint64_t fingerprint() const;
};

// Normalized attention per head, one entry per in-edge slot of the
// destination-grouped adjacency.
struct AttentionRecord {
  InAdjacency adjacency;
  std::vector<std::vector<double>> alpha;  // [head][slot]

  // (neighbour, alpha) pairs for node v under head k, ordered by neighbour.
  std::vector<std::pair<std::size_t, double>> neighbours(std::size_t head, std::size_t v) const;
  // Largest |sum_u alpha_vu - 1| over all heads and nodes.
  double max_normalization_error() const;
};

struct GatCache {
  std::uint64_t layer_fingerprint = 0;
  Matrix input;
  std::vector<Matrix> transformed;           // per head: N x out_dim, rows W h_u
  std::vector<std::vector<double>> logits;   // per head, per slot, pre-LeakyReLU
  Matrix pre_activation;                     // N x output_dim
  AttentionRecord attention;
  OutAdjacency out_adjacency;
  std::vector<std::size_t> slot_of_edge;
};

struct GatForward {
  Matrix out;
  GatCache cache;
  const AttentionRecord& attention() const { return cache.attention; }
};

struct GatGradients {
  std::vector<Matrix> weight;
  std::vector<Vector> attention;
  Matrix input;
};

GatForward gat_forward(const GatLayer& layer, const Matrix& h, const SimilarityGraph& g);
GatGradients gat_backward(const GatLayer& layer, const GatCache& cache, const Matrix& grad_out);

// Process-wide record of attention normalization over every forward pass.
struct AttentionStats {
  std::uint64_t forward_passes = 0;
  double max_sum_error = 0.0;
};
AttentionStats attention_stats();
void reset_attention_stats();

}  // namespace gatae
