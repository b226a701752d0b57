#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gatae/autoencoder.hpp"
#include "gatae/representatives.hpp"

namespace gatae {

enum class Flow { approach1, approach2 };

std::string to_string(Flow flow);
Flow parse_flow(const std::string& s);

struct CategoryScore {
  std::string label;
  double similarity = 0.0;
};

struct Categorization {
  std::vector<CategoryScore> scores;  // descending, ties by label
  std::string predicted;
};

Categorization categorize(std::span<const double> query_latent,
                          const std::vector<Representative>& reps);

// Latent of the query over a one-node self-loop graph.
Vector embed_query_context_free(const GatAutoencoder& m, std::span<const double> q_features);

// Inserts the query into g_category and returns its latent from encoding the
// augmented graph.
Vector embed_query_in_context(const GatAutoencoder& m, const Matrix& x_category,
                              const SimilarityGraph& g_category, std::span<const double> q_features,
                              std::size_t k);

struct BestMatch {
  std::size_t index = 0;  // row in the LatentIndex
  std::string path;
  double similarity = 0.0;
};

BestMatch retrieve(std::span<const double> query_latent, const LatentIndex& index,
                   const std::string& category);

struct QueryOptions {
  Flow flow = Flow::approach1;
  std::size_t k = 10;                   // neighbours for graph insertion
  std::optional<std::string> category;  // retrieve inside this category instead of the predicted one
};

struct QueryResult {
  std::vector<CategoryScore> scores;
  std::string predicted;
  BestMatch best_match;
  Flow flow = Flow::approach1;
  // Set when the query features equal an indexed row exactly.
  std::optional<std::size_t> in_dataset_row;
};

// Row whose features equal q exactly, if any.
std::optional<std::size_t> find_indexed_row(const LatentIndex& index, std::span<const double> q);

// Approach I: context-aware latent (the stored latent for an indexed image,
// otherwise the query is inserted into the index graph), categorized and
// retrieved with that one latent.
// Approach II: context-free latent for categorization, then the query is
// inserted into a k-NN graph over the predicted category for retrieval.
QueryResult answer_query(const GatAutoencoder& m, const LatentIndex& index,
                         const std::vector<Representative>& reps, std::span<const double> q_features,
                         const QueryOptions& options);

struct ClassMetrics {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<ClassMetrics> per_class;  // sorted by label
  ClassMetrics macro;
  ClassMetrics weighted;
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  std::size_t total = 0;
};

// Precision/recall/F1 per class with zero for empty denominators.
EvalReport compute_metrics(const std::vector<std::string>& truth,
                           const std::vector<std::string>& predicted);

EvalReport evaluate(const GatAutoencoder& m, const LatentIndex& index,
                    const std::vector<Representative>& reps, const FeatureSet& queries,
                    const QueryOptions& options);

}  // namespace gatae
