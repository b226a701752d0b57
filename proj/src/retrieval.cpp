#include "gatae/retrieval.hpp"

#include <algorithm>
#include <set>

#include "gatae/error.hpp"

namespace gatae {

std::string to_string(Flow flow) { return flow == Flow::approach1 ? "approach1" : "approach2"; }

Flow parse_flow(const std::string& s) {
  if (s == "approach1") return Flow::approach1;
  if (s == "approach2") return Flow::approach2;
  throw ArgumentError("unknown flow '" + s + "' (expected approach1 or approach2)");
}

Categorization categorize(std::span<const double> query_latent,
                          const std::vector<Representative>& reps) {
  if (reps.empty()) throw ArgumentError("categorize: no representatives");
  Categorization out;
  for (const auto& r : reps) {
    if (r.vector.size() != query_latent.size()) {
      throw ShapeError("categorize: query dim " + std::to_string(query_latent.size()) +
                       " vs representative '" + r.label + "' dim " +
                       std::to_string(r.vector.size()));
    }
    out.scores.push_back({r.label, cosine_similarity(query_latent, r.vector)});
  }
  std::sort(out.scores.begin(), out.scores.end(), [](const auto& a, const auto& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.label < b.label);
  });
  out.predicted = out.scores.front().label;
  return out;
}

Vector embed_query_context_free(const GatAutoencoder& m, std::span<const double> q_features) {
  if (q_features.size() != m.config.input_dim) {
    throw ShapeError("query has " + std::to_string(q_features.size()) +
                     " features but the model expects " + std::to_string(m.config.input_dim));
  }
  Matrix x(1, q_features.size(), Vector(q_features.begin(), q_features.end()));
  return encode(m, x, build_self_loop_graph(1)).row_vector(0);
}

Vector embed_query_in_context(const GatAutoencoder& m, const Matrix& x_category,
                              const SimilarityGraph& g_category, std::span<const double> q_features,
                              std::size_t k) {
  if (q_features.size() != m.config.input_dim) {
    throw ShapeError("query has " + std::to_string(q_features.size()) +
                     " features but the model expects " + std::to_string(m.config.input_dim));
  }
  const SimilarityGraph g = insert_query_node(g_category, x_category, q_features, k);
  Matrix x = x_category;
  x.append_row(q_features);
  return encode(m, x, g).row_vector(x.rows() - 1);
}

BestMatch retrieve(std::span<const double> query_latent, const LatentIndex& index,
                   const std::string& category) {
  const auto rows = index.rows_of(category);
  if (rows.empty()) {
    std::string known;
    for (const auto& l : index.labels()) known += (known.empty() ? "" : ", ") + l;
    throw ArgumentError("unknown category '" + category + "' (known: " + known + ")");
  }
  BestMatch best{rows.front(), index.items[rows.front()].path, -2.0};
  for (std::size_t r : rows) {
    const double sim = cosine_similarity(query_latent, index.latents.row(r));
    if (sim > best.similarity) best = {r, index.items[r].path, sim};
  }
  return best;
}

std::optional<std::size_t> find_indexed_row(const LatentIndex& index, std::span<const double> q) {
  if (q.size() != index.features.cols()) return std::nullopt;
  for (std::size_t i = 0; i < index.features.rows(); ++i) {
    const auto r = index.features.row(i);
    if (std::equal(r.begin(), r.end(), q.begin())) return i;
  }
  return std::nullopt;
}

namespace {

Vector embed_in_category(const GatAutoencoder& m, const LatentIndex& index,
                         const std::string& category, std::span<const double> q,
                         std::size_t k) {
  const auto rows = index.rows_of(category);
  if (rows.empty()) throw ArgumentError("unknown category '" + category + "'");
  const Matrix x = index.features.select_rows(rows);
  const SimilarityGraph g = x.rows() >= 2 ? build_knn_graph(x, std::min(k, x.rows() - 1))
                                          : build_self_loop_graph(1);
  return embed_query_in_context(m, x, g, q, std::min(k, x.rows()));
}

}  // namespace

QueryResult answer_query(const GatAutoencoder& m, const LatentIndex& index,
                         const std::vector<Representative>& reps, std::span<const double> q_features,
                         const QueryOptions& options) {
  if (q_features.size() != m.config.input_dim) {
    throw ShapeError("query has " + std::to_string(q_features.size()) +
                     " features but the model expects " + std::to_string(m.config.input_dim));
  }
  if (options.category && index.rows_of(*options.category).empty()) {
    retrieve(index.latents.row(0), index, *options.category);  // throws with known labels
  }
  QueryResult result;
  result.flow = options.flow;
  result.in_dataset_row = find_indexed_row(index, q_features);

  if (options.flow == Flow::approach1) {
    Vector latent;
    if (result.in_dataset_row) {
      latent = index.latents.row_vector(*result.in_dataset_row);
    } else {
      const std::size_t k = std::min(options.k, index.features.rows());
      latent = embed_query_in_context(m, index.features, index.graph, q_features, k);
    }
    Categorization cat = categorize(latent, reps);
    result.scores = std::move(cat.scores);
    result.predicted = std::move(cat.predicted);
    result.best_match = retrieve(latent, index, options.category.value_or(result.predicted));
  } else {
    Categorization cat = categorize(embed_query_context_free(m, q_features), reps);
    result.scores = std::move(cat.scores);
    result.predicted = std::move(cat.predicted);
    const std::string target = options.category.value_or(result.predicted);
    const Vector latent = embed_in_category(m, index, target, q_features, options.k);
    result.best_match = retrieve(latent, index, target);
  }
  return result;
}

EvalReport compute_metrics(const std::vector<std::string>& truth,
                           const std::vector<std::string>& predicted) {
  if (truth.empty()) throw ArgumentError("evaluate: empty query set");
  if (truth.size() != predicted.size()) {
    throw ShapeError("evaluate: " + std::to_string(truth.size()) + " labels vs " +
                     std::to_string(predicted.size()) + " predictions");
  }
  std::set<std::string> all(truth.begin(), truth.end());
  all.insert(predicted.begin(), predicted.end());
  EvalReport rep;
  rep.classes.assign(all.begin(), all.end());
  const std::size_t c = rep.classes.size();
  const auto idx = [&](const std::string& l) {
    return static_cast<std::size_t>(std::lower_bound(rep.classes.begin(), rep.classes.end(), l) -
                                    rep.classes.begin());
  };
  rep.confusion.assign(c, std::vector<std::size_t>(c, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) ++rep.confusion[idx(truth[i])][idx(predicted[i])];
  rep.total = truth.size();

  std::size_t correct = 0;
  for (std::size_t i = 0; i < c; ++i) correct += rep.confusion[i][i];
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(rep.total);

  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  rep.macro.label = "macro";
  rep.weighted.label = "weighted";
  for (std::size_t i = 0; i < c; ++i) {
    std::size_t col = 0, row = 0;
    for (std::size_t j = 0; j < c; ++j) {
      col += rep.confusion[j][i];
      row += rep.confusion[i][j];
    }
    ClassMetrics m{rep.classes[i], ratio(rep.confusion[i][i], col), ratio(rep.confusion[i][i], row),
                   0.0, row};
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    const double w = static_cast<double>(row) / static_cast<double>(rep.total);
    rep.macro.precision += m.precision / static_cast<double>(c);
    rep.macro.recall += m.recall / static_cast<double>(c);
    rep.macro.f1 += m.f1 / static_cast<double>(c);
    rep.weighted.precision += w * m.precision;
    rep.weighted.recall += w * m.recall;
    rep.weighted.f1 += w * m.f1;
    rep.per_class.push_back(m);
  }
  rep.macro.support = rep.weighted.support = rep.total;
  return rep;
}

EvalReport evaluate(const GatAutoencoder& m, const LatentIndex& index,
                    const std::vector<Representative>& reps, const FeatureSet& queries,
                    const QueryOptions& options) {
  if (queries.matrix.rows() == 0) throw ArgumentError("evaluate: empty query set");
  std::set<std::string> known;
  for (const auto& r : reps) known.insert(r.label);
  std::vector<std::string> truth, predicted;
  for (std::size_t i = 0; i < queries.matrix.rows(); ++i) {
    if (!known.contains(queries.items[i].listing)) {
      throw ArgumentError("evaluate: label '" + queries.items[i].listing +
                          "' is absent from the index");
    }
    QueryOptions opts = options;
    opts.category.reset();
    truth.push_back(queries.items[i].listing);
    predicted.push_back(answer_query(m, index, reps, queries.matrix.row(i), opts).predicted);
  }
  return compute_metrics(truth, predicted);
}

}  // namespace gatae
