#include "gatae/graph.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "gatae/error.hpp"

namespace gatae {

std::string to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::knn: return "knn";
    case GraphKind::full: return "full";
    case GraphKind::self_only: return "self_only";
    case GraphKind::augmented: return "augmented";
  }
  return "unknown";
}

GraphKind parse_graph_kind(const std::string& s) {
  if (s == "knn") return GraphKind::knn;
  if (s == "full") return GraphKind::full;
  if (s == "self_only") return GraphKind::self_only;
  if (s == "augmented") return GraphKind::augmented;
  throw ArgumentError("unknown graph kind '" + s + "' (expected knn, full or self_only)");
}

std::size_t SimilarityGraph::non_self_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.src != e.dst; }));
}

void SimilarityGraph::validate() const {
  std::vector<std::size_t> self(num_nodes, 0), in_degree(num_nodes, 0);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw ShapeError("graph edge (" + std::to_string(e.src) + ", " + std::to_string(e.dst) +
                       ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (i > 0 && !(edges[i - 1] < e)) throw ArgumentError("graph edges not sorted and unique");
    if (e.src == e.dst) ++self[e.src];
    else ++in_degree[e.dst];
  }
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (self[v] != 1) throw ArgumentError("node " + std::to_string(v) + " lacks its self-loop");
    if (kind == GraphKind::knn && in_degree[v] != k) {
      throw ArgumentError("knn node " + std::to_string(v) + " has " +
                          std::to_string(in_degree[v]) + " in-neighbours, expected " +
                          std::to_string(k));
    }
  }
}

std::string SimilarityGraph::dump() const {
  std::ostringstream os;
  os << "nodes " << num_nodes << "\n";
  for (const Edge& e : edges) os << e.src << " " << e.dst << "\n";
  return os.str();
}

InAdjacency InAdjacency::build(const SimilarityGraph& g) {
  InAdjacency adj;
  adj.offsets.assign(g.num_nodes + 1, 0);
  for (const Edge& e : g.edges) ++adj.offsets[e.dst + 1];
  std::partial_sum(adj.offsets.begin(), adj.offsets.end(), adj.offsets.begin());
  adj.src.resize(g.edges.size());
  adj.edge.resize(g.edges.size());
  std::vector<std::size_t> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  // Edges are sorted by src, so each in-list ends up ordered by src.
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const std::size_t slot = fill[g.edges[i].dst]++;
    adj.src[slot] = g.edges[i].src;
    adj.edge[slot] = i;
  }
  return adj;
}

OutAdjacency OutAdjacency::build(const SimilarityGraph& g) {
  OutAdjacency adj;
  adj.offsets.assign(g.num_nodes + 1, 0);
  for (const Edge& e : g.edges) ++adj.offsets[e.src + 1];
  std::partial_sum(adj.offsets.begin(), adj.offsets.end(), adj.offsets.begin());
  adj.edge.resize(g.edges.size());
  std::iota(adj.edge.begin(), adj.edge.end(), std::size_t{0});
  return adj;
}

namespace {

void check_k(std::size_t n, std::size_t k) {
  if (k < 1 || k + 1 > n) {
    throw ArgumentError("knn: k=" + std::to_string(k) + " out of range [1, " +
                        (n == 0 ? std::string("-1") : std::to_string(n - 1)) + "] for " +
                        std::to_string(n) + " nodes");
  }
}

// Top-k of `scores` excluding `skip`, best first, ties to the lower index.
std::vector<std::size_t> top_k(std::span<const double> scores, std::size_t k, std::size_t skip) {
  std::vector<std::size_t> idx;
  idx.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != skip) idx.push_back(i);
  const auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

SimilarityGraph knn_from_neighbours(std::size_t n, std::size_t k,
                                    const std::vector<std::vector<std::size_t>>& nbrs) {
  SimilarityGraph g{n, {}, GraphKind::knn, k};
  g.edges.reserve(n * (k + 1));
  for (std::size_t j = 0; j < n; ++j) {
    g.edges.push_back({j, j});
    for (std::size_t i : nbrs[j]) g.edges.push_back({i, j});
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace

SimilarityGraph build_knn_graph(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  check_k(n, k);
  const Matrix s = cosine_similarity_matrix(x);
  std::vector<std::vector<std::size_t>> nbrs(n);
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n >= 64)
  for (std::ptrdiff_t j = 0; j < nn; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    nbrs[jj] = top_k(s.row(jj), k, jj);
  }
  return knn_from_neighbours(n, k, nbrs);
}

SimilarityGraph build_full_graph(std::size_t n) {
  if (n == 0) throw ArgumentError("build_full_graph: n must be >= 1");
  SimilarityGraph g{n, {}, GraphKind::full, 0};
  g.edges.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g.edges.push_back({i, j});
  return g;
}

SimilarityGraph build_self_loop_graph(std::size_t n) {
  if (n == 0) throw ArgumentError("build_self_loop_graph: n must be >= 1");
  SimilarityGraph g{n, {}, GraphKind::self_only, 0};
  for (std::size_t i = 0; i < n; ++i) g.edges.push_back({i, i});
  return g;
}

std::vector<std::size_t> nearest_rows(const Matrix& x, std::span<const double> q, std::size_t k) {
  if (k > x.rows()) {
    throw ArgumentError("nearest_rows: k=" + std::to_string(k) + " exceeds " +
                        std::to_string(x.rows()) + " rows");
  }
  const Vector sims = cosine_similarity_to(x, q);
  return top_k(sims, k, x.rows());
}

SimilarityGraph insert_query_node(const SimilarityGraph& g, const Matrix& x,
                                  std::span<const double> q, std::size_t k) {
  if (q.size() != x.cols()) {
    throw ShapeError("insert_query_node: query dim " + std::to_string(q.size()) +
                     " vs feature dim " + std::to_string(x.cols()));
  }
  if (x.rows() != g.num_nodes) {
    throw ShapeError("insert_query_node: graph has " + std::to_string(g.num_nodes) +
                     " nodes but features have " + std::to_string(x.rows()) + " rows");
  }
  if (g.kind == GraphKind::augmented) {
    throw ArgumentError("insert_query_node: graph already carries a query node");
  }
  const std::size_t n = g.num_nodes;
  if (g.kind == GraphKind::full) k = n;
  if (k < 1 || k > n) {
    throw ArgumentError("insert_query_node: k=" + std::to_string(k) + " out of range [1, " +
                        std::to_string(n) + "]");
  }
  SimilarityGraph out{n + 1, g.edges, GraphKind::augmented, g.k};
  for (std::size_t i : nearest_rows(x, q, k)) {
    out.edges.push_back({i, n});
    out.edges.push_back({n, i});
  }
  out.edges.push_back({n, n});
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

std::vector<std::size_t> degree_centrality(const Matrix& s, double threshold) {
  if (s.rows() != s.cols()) {
    throw ShapeError("degree_centrality: similarity matrix must be square, got " +
                     s.shape_string());
  }
  std::vector<std::size_t> deg(s.rows(), 0);
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (i != j && s(i, j) >= threshold) ++deg[i];
  return deg;
}

namespace serial {

SimilarityGraph build_knn_graph(const Matrix& x, std::size_t k) {
  const std::size_t n = x.rows();
  check_k(n, k);
  const Matrix s = serial::cosine_similarity_matrix(x);
  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t j = 0; j < n; ++j) nbrs[j] = top_k(s.row(j), k, j);
  return knn_from_neighbours(n, k, nbrs);
}

}  // namespace serial

}  // namespace gatae
