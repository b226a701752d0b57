#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gatae/linalg.hpp"

namespace gatae {

enum class GraphKind {
  knn,        // k most similar in-neighbours per node
  full,       // every ordered pair
  self_only,  // self-loops only
  augmented,  // a knn/full graph with a query node inserted
};

std::string to_string(GraphKind kind);
GraphKind parse_graph_kind(const std::string& s);

struct Edge {
  std::size_t src = 0;  // message sender
  std::size_t dst = 0;  // aggregating node
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Directed edge set with a self-loop on every node. Edges are kept sorted by
// (src, dst) and are unique.
struct SimilarityGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  GraphKind kind = GraphKind::self_only;
  std::size_t k = 0;  // neighbours per node for knn; 0 otherwise

  std::size_t non_self_edge_count() const;
  // Throws if any structural invariant is violated.
  void validate() const;
  // "nodes N" followed by one "src dst" line per edge.
  std::string dump() const;

  friend bool operator==(const SimilarityGraph&, const SimilarityGraph&) = default;
};

// In-neighbourhoods grouped by destination (CSR), with each entry keeping the
// index of its edge in SimilarityGraph::edges.
struct InAdjacency {
  std::vector<std::size_t> offsets;  // num_nodes + 1
  std::vector<std::size_t> src;
  std::vector<std::size_t> edge;

  static InAdjacency build(const SimilarityGraph& g);
  std::size_t degree(std::size_t v) const { return offsets[v + 1] - offsets[v]; }
};

// Out-neighbourhoods grouped by source; edge indices refer to g.edges.
struct OutAdjacency {
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> edge;

  static OutAdjacency build(const SimilarityGraph& g);
};

// For each j, edges (i, j) from the k rows most cosine-similar to row j
// (i != j, ties to the lower index), plus (j, j).
SimilarityGraph build_knn_graph(const Matrix& x, std::size_t k);
SimilarityGraph build_full_graph(std::size_t n);
SimilarityGraph build_self_loop_graph(std::size_t n);

// Indices of the k rows of x most cosine-similar to q, best first, ties to the
// lower index.
std::vector<std::size_t> nearest_rows(const Matrix& x, std::span<const double> q, std::size_t k);

// Returns a new graph with node N = x.rows() linked in both directions to its
// k nearest existing rows (all rows for a full graph) plus its self-loop.
SimilarityGraph insert_query_node(const SimilarityGraph& g, const Matrix& x,
                                  std::span<const double> q, std::size_t k);

// Row sums of A where A[i][j] = 1 iff s[i][j] >= threshold and i != j.
std::vector<std::size_t> degree_centrality(const Matrix& s, double threshold);

namespace serial {
SimilarityGraph build_knn_graph(const Matrix& x, std::size_t k);
}  // namespace serial

}  // namespace gatae
