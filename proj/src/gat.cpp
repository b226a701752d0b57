#include "gatae/gat.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "gatae/error.hpp"
#include "gatae/io.hpp"

namespace gatae {

std::string to_string(HeadCombine c) { return c == HeadCombine::concat ? "concat" : "average"; }
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

HeadCombine parse_head_combine(const std::string& s) {
  if (s == "concat") return HeadCombine::concat;
  if (s == "average") return HeadCombine::average;
  throw ArgumentError("unknown head combine '" + s + "' (expected concat or average)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ArgumentError("unknown activation '" + s + "' (expected relu or identity)");
}

namespace {

std::mutex stats_mutex;
AttentionStats stats;

// Portable uniform in [-limit, limit).
double uniform(std::mt19937_64& rng, double limit) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * limit;
}

inline double activate(Activation a, double x) { return a == Activation::relu ? relu(x) : x; }
inline double activate_grad(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? 1.0 : 0.0) : 1.0;
}

}  // namespace

GatLayer GatLayer::glorot(std::size_t in_dim, std::size_t out_dim, std::size_t heads,
                          HeadCombine combine, Activation activation, double leaky_slope,
                          std::mt19937_64& rng) {
  GatLayer layer{in_dim, out_dim, heads, combine, {}, {}, leaky_slope, activation};
  const double w_limit = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  const double a_limit = std::sqrt(6.0 / static_cast<double>(1 + 2 * out_dim));
  for (std::size_t k = 0; k < heads; ++k) {
    Matrix w(out_dim, in_dim);
    for (double& v : w.data()) v = uniform(rng, w_limit);
    Vector a(2 * out_dim);
    for (double& v : a) v = uniform(rng, a_limit);
    layer.weight.push_back(std::move(w));
    layer.attention.push_back(std::move(a));
  }
  layer.validate();
  return layer;
}

void GatLayer::validate() const {
  if (heads < 1) throw ArgumentError("gat: heads must be >= 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ArgumentError("gat: leaky_slope must lie in (0, 1)");
  }
  if (weight.size() != heads || attention.size() != heads) {
    throw ShapeError("gat: expected " + std::to_string(heads) + " heads of parameters");
  }
  for (std::size_t k = 0; k < heads; ++k) {
    if (weight[k].rows() != out_dim || weight[k].cols() != in_dim) {
      throw ShapeError("gat: head " + std::to_string(k) + " weight is " +
                       weight[k].shape_string() + ", expected " +
                       shape_string(out_dim, in_dim));
    }
    if (attention[k].size() != 2 * out_dim) {
      throw ShapeError("gat: head " + std::to_string(k) + " attention vector has length " +
                       std::to_string(attention[k].size()) + ", expected " +
                       std::to_string(2 * out_dim));
    }
  }
}

std::uint64_t GatLayer::fingerprint() const {
  std::uint64_t h = io::fnv1a(nullptr, 0);
  for (std::size_t k = 0; k < heads; ++k) {
    const auto w = weight[k].data();
    h = io::fnv1a(reinterpret_cast<const std::uint8_t*>(w.data()), w.size_bytes(), h);
    h = io::fnv1a(reinterpret_cast<const std::uint8_t*>(attention[k].data()),
                  attention[k].size() * sizeof(double), h);
  }
  return h;
}

std::vector<std::pair<std::size_t, double>> AttentionRecord::neighbours(std::size_t head,
                                                                        std::size_t v) const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t s = adjacency.offsets[v]; s < adjacency.offsets[v + 1]; ++s) {
    out.emplace_back(adjacency.src[s], alpha[head][s]);
  }
  return out;
}

double AttentionRecord::max_normalization_error() const {
  double worst = 0.0;
  const std::size_t n = adjacency.offsets.size() - 1;
  for (const auto& a : alpha) {
    for (std::size_t v = 0; v < n; ++v) {
      double sum = 0.0;
      for (std::size_t s = adjacency.offsets[v]; s < adjacency.offsets[v + 1]; ++s) sum += a[s];
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  }
  return worst;
}

AttentionStats attention_stats() {
  std::lock_guard lock(stats_mutex);
  return stats;
}

void reset_attention_stats() {
  std::lock_guard lock(stats_mutex);
  stats = {};
}

GatForward gat_forward(const GatLayer& layer, const Matrix& h, const SimilarityGraph& g) {
  layer.validate();
  if (h.cols() != layer.in_dim) {
    throw ShapeError("gat_forward: input is " + h.shape_string() + " but layer expects " +
                     std::to_string(layer.in_dim) + " columns");
  }
  if (h.rows() != g.num_nodes) {
    throw ShapeError("gat_forward: input has " + std::to_string(h.rows()) + " rows but graph has " +
                     std::to_string(g.num_nodes) + " nodes");
  }
  const std::size_t n = h.rows(), out_dim = layer.out_dim, heads = layer.heads;

  GatForward fwd;
  GatCache& c = fwd.cache;
  c.layer_fingerprint = layer.fingerprint();
  c.input = h;
  c.attention.adjacency = InAdjacency::build(g);
  c.out_adjacency = OutAdjacency::build(g);
  const InAdjacency& adj = c.attention.adjacency;
  for (std::size_t v = 0; v < n; ++v) {
    if (adj.degree(v) == 0) {
      throw ArgumentError("gat_forward: node " + std::to_string(v) + " has no in-edges");
    }
  }
  c.slot_of_edge.resize(g.edges.size());
  for (std::size_t s = 0; s < adj.edge.size(); ++s) c.slot_of_edge[adj.edge[s]] = s;

  const std::size_t slots = adj.src.size();
  c.pre_activation = Matrix(n, layer.output_dim());
  c.transformed.resize(heads);
  c.logits.assign(heads, std::vector<double>(slots));
  c.attention.alpha.assign(heads, std::vector<double>(slots));
  const double head_scale = layer.combine == HeadCombine::average ? 1.0 / static_cast<double>(heads) : 1.0;
  const auto nn = static_cast<std::ptrdiff_t>(n);

  for (std::size_t k = 0; k < heads; ++k) {
    c.transformed[k] = matmul_transposed(h, layer.weight[k]);
    const Matrix& wh = c.transformed[k];
    const std::span<const double> a_dst(layer.attention[k].data(), out_dim);
    const std::span<const double> a_src(layer.attention[k].data() + out_dim, out_dim);
    Vector s_dst(n), s_src(n);
    for (std::size_t v = 0; v < n; ++v) {
      s_dst[v] = dot(a_dst, wh.row(v));
      s_src[v] = dot(a_src, wh.row(v));
    }
    auto& logits = c.logits[k];
    auto& alpha = c.attention.alpha[k];
    const std::size_t col0 = layer.combine == HeadCombine::concat ? k * out_dim : 0;
#pragma omp parallel for schedule(static) if (n * out_dim >= 4096)
    for (std::ptrdiff_t vi = 0; vi < nn; ++vi) {
      const auto v = static_cast<std::size_t>(vi);
      const std::size_t begin = adj.offsets[v], end = adj.offsets[v + 1];
      Vector scores(end - begin);
      for (std::size_t s = begin; s < end; ++s) {
        logits[s] = s_dst[v] + s_src[adj.src[s]];
        scores[s - begin] = leaky_relu(logits[s], layer.leaky_slope);
      }
      const Vector att = softmax(scores);
      auto pre = c.pre_activation.row(v);
      for (std::size_t s = begin; s < end; ++s) {
        alpha[s] = att[s - begin];
        const double weight = alpha[s] * head_scale;
        auto src_row = wh.row(adj.src[s]);
        for (std::size_t d = 0; d < out_dim; ++d) pre[col0 + d] += weight * src_row[d];
      }
    }
  }

  fwd.out = c.pre_activation;
  for (double& v : fwd.out.data()) v = activate(layer.activation, v);

  const double err = c.attention.max_normalization_error();
  {
    std::lock_guard lock(stats_mutex);
    ++stats.forward_passes;
    stats.max_sum_error = std::max(stats.max_sum_error, err);
  }
  if (err > 1e-10) {
    throw NumericalError("gat_forward: attention rows deviate from 1 by " + std::to_string(err));
  }
  return fwd;
}

GatGradients gat_backward(const GatLayer& layer, const GatCache& cache, const Matrix& grad_out) {
  if (cache.layer_fingerprint != layer.fingerprint() || cache.input.cols() != layer.in_dim ||
      cache.transformed.size() != layer.heads) {
    throw ArgumentError("gat_backward: stale cache (layer parameters changed since forward)");
  }
  const Matrix& h = cache.input;
  const std::size_t n = h.rows(), out_dim = layer.out_dim, heads = layer.heads;
  if (grad_out.rows() != n || grad_out.cols() != layer.output_dim()) {
    throw ShapeError("gat_backward: grad_out is " + grad_out.shape_string() + ", expected " +
                     shape_string(n, layer.output_dim()));
  }
  const InAdjacency& adj = cache.attention.adjacency;
  const OutAdjacency& out_adj = cache.out_adjacency;
  const std::size_t slots = adj.src.size();

  Matrix g_pre(n, layer.output_dim());
  for (std::size_t i = 0; i < g_pre.size(); ++i) {
    g_pre.data()[i] = grad_out.data()[i] * activate_grad(layer.activation, cache.pre_activation.data()[i]);
  }
  const double head_scale = layer.combine == HeadCombine::average ? 1.0 / static_cast<double>(heads) : 1.0;
  const auto nn = static_cast<std::ptrdiff_t>(n);

  GatGradients grads;
  grads.input = Matrix(n, layer.in_dim);
  for (std::size_t k = 0; k < heads; ++k) {
    const Matrix& wh = cache.transformed[k];
    const auto& alpha = cache.attention.alpha[k];
    const auto& logits = cache.logits[k];
    const std::size_t col0 = layer.combine == HeadCombine::concat ? k * out_dim : 0;
    const auto g_agg = [&](std::size_t v) { return g_pre.row(v).subspan(col0, out_dim); };
    const std::span<const double> a_dst(layer.attention[k].data(), out_dim);
    const std::span<const double> a_src(layer.attention[k].data() + out_dim, out_dim);

    // Per slot gradient of the pre-LeakyReLU logit, grouped by destination.
    std::vector<double> g_logit(slots);
    Vector g_s_dst(n, 0.0);
#pragma omp parallel for schedule(static) if (n * out_dim >= 4096)
    for (std::ptrdiff_t vi = 0; vi < nn; ++vi) {
      const auto v = static_cast<std::size_t>(vi);
      const std::size_t begin = adj.offsets[v], end = adj.offsets[v + 1];
      const auto gv = g_agg(v);
      double weighted = 0.0;
      for (std::size_t s = begin; s < end; ++s) {
        g_logit[s] = head_scale * dot(gv, wh.row(adj.src[s]));  // dL/dalpha
        weighted += alpha[s] * g_logit[s];
      }
      double total = 0.0;
      for (std::size_t s = begin; s < end; ++s) {
        const double g_score = alpha[s] * (g_logit[s] - weighted);
        g_logit[s] = g_score * (logits[s] > 0.0 ? 1.0 : layer.leaky_slope);
        total += g_logit[s];
      }
      g_s_dst[v] = total;
    }

    // Gradient w.r.t. W h_u, gathered over the out-edges of u.
    Matrix g_wh(n, out_dim);
    Vector g_s_src(n, 0.0);
#pragma omp parallel for schedule(static) if (n * out_dim >= 4096)
    for (std::ptrdiff_t ui = 0; ui < nn; ++ui) {
      const auto u = static_cast<std::size_t>(ui);
      auto row = g_wh.row(u);
      double src_total = 0.0;
      for (std::size_t o = out_adj.offsets[u]; o < out_adj.offsets[u + 1]; ++o) {
        const std::size_t s = cache.slot_of_edge[out_adj.edge[o]];
        // Destination of slot s is the node whose in-range contains it.
        const auto v = static_cast<std::size_t>(
            std::upper_bound(adj.offsets.begin(), adj.offsets.end(), s) - adj.offsets.begin() - 1);
        const double weight = alpha[s] * head_scale;
        const auto gv = g_agg(v);
        for (std::size_t d = 0; d < out_dim; ++d) row[d] += weight * gv[d];
        src_total += g_logit[s];
      }
      g_s_src[u] = src_total;
      for (std::size_t d = 0; d < out_dim; ++d) {
        row[d] += g_s_src[u] * a_src[d] + g_s_dst[u] * a_dst[d];
      }
    }

    Vector g_att(2 * out_dim, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
      auto whv = wh.row(v);
      for (std::size_t d = 0; d < out_dim; ++d) {
        g_att[d] += g_s_dst[v] * whv[d];
        g_att[out_dim + d] += g_s_src[v] * whv[d];
      }
    }

    grads.weight.push_back(transposed_matmul(g_wh, h));
    grads.attention.push_back(std::move(g_att));
    const Matrix g_h = matmul(g_wh, layer.weight[k]);
    for (std::size_t i = 0; i < g_h.size(); ++i) grads.input.data()[i] += g_h.data()[i];
  }
  return grads;
}

}  // namespace gatae
