#include "gatae/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gatae/error.hpp"
#include "gatae/io.hpp"
#include "json.hpp"

namespace gatae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void ProjectConfig::apply_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config: expected a JSON object of dotted keys");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "paths.data") data_dir = v.get<std::string>();
      else if (key == "paths.index") index_dir = v.get<std::string>();
      else if (key == "graph.kind") graph_kind = parse_graph_kind(v.get<std::string>());
      else if (key == "graph.k") k = v.get<std::size_t>();
      else if (key == "model.enc1_dim") enc1_dim = v.get<std::size_t>();
      else if (key == "model.enc2_dim") enc2_dim = v.get<std::size_t>();
      else if (key == "model.latent_dim") latent_dim = v.get<std::size_t>();
      else if (key == "model.dec_hidden_dim") dec_hidden_dim = v.get<std::size_t>();
      else if (key == "model.heads") heads = v.get<std::size_t>();
      else if (key == "model.combine") combine = parse_head_combine(v.get<std::string>());
      else if (key == "model.slope") leaky_slope = v.get<double>();
      else if (key == "train.epochs") train.epochs = v.get<std::size_t>();
      else if (key == "train.learning_rate") train.learning_rate = v.get<double>();
      else if (key == "train.beta1") train.beta1 = v.get<double>();
      else if (key == "train.beta2") train.beta2 = v.get<double>();
      else if (key == "train.epsilon") train.epsilon = v.get<double>();
      else if (key == "train.seed") train.seed = v.get<std::uint64_t>();
      else if (key == "train.log_every") train.log_every = v.get<std::size_t>();
      else if (key == "rep.mode") rep_mode = parse_representative_mode(v.get<std::string>());
      else if (key == "rep.degree_threshold") degree_threshold = v.get<double>();
      else if (key == "hog.orientations") hog.orientations = v.get<std::size_t>();
      else if (key == "hog.pixels_per_cell") hog.pixels_per_cell = v.get<std::size_t>();
      else if (key == "hog.cells_per_block") hog.cells_per_block = v.get<std::size_t>();
      else if (key == "hog.clip") hog.clip = v.get<double>();
      else if (key == "resize.width") resize_width = v.get<std::size_t>();
      else if (key == "resize.height") resize_height = v.get<std::size_t>();
      else if (key == "merge.threshold") merge_threshold = v.get<double>();
      else if (key == "query.flow") flow = parse_flow(v.get<std::string>());
      else if (key == "threads") threads = v.get<int>();
      else throw ParseError("config: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw ParseError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

ModelConfig ProjectConfig::model_for(std::size_t input_dim) const {
  ModelConfig m = ModelConfig::for_input(input_dim);
  if (enc1_dim) m.enc1_dim = *enc1_dim;
  if (enc2_dim) m.enc2_dim = *enc2_dim;
  if (latent_dim) m.latent_dim = *latent_dim;
  if (dec_hidden_dim) m.dec_hidden_dim = *dec_hidden_dim;
  m.heads = heads;
  m.combine = combine;
  m.leaky_slope = leaky_slope;
  m.seed = train.seed;
  m.validate();
  return m;
}

namespace {

// Flag storage; only flags actually passed override the config file.
struct Flags {
  std::string config;
  std::string input, output, features, index, image, queries, category, similarity;
  std::string flow, rep_mode, format = "table", graph, combine;
  std::uint64_t seed = 0;
  std::size_t k = 0, epochs = 0, log_every = 0, row = 0, resize = 0, heads = 0;
  std::size_t latent = 0, enc1 = 0, enc2 = 0, dec_hidden = 0, nodes = 8, dim = 6;
  double threshold = 0.0, lr = 0.0, eps = 1e-5, tol = 1e-4;
  int threads = 0;
};

void row_line(std::ostream& out, const std::string& step, const std::string& output) {
  out << std::left << std::setw(26) << step << output << "\n";
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string scientific(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(3) << v;
  return os.str();
}

fs::path require_dir(const fs::path& p, const char* what) {
  if (p.empty()) throw ArgumentError(std::string("missing ") + what);
  if (!fs::is_directory(p)) throw ArgumentError(std::string(what) + " '" + p.string() + "' is not a directory");
  return p;
}

fs::path require_file(const fs::path& p, const char* what) {
  if (p.empty()) throw ArgumentError(std::string("missing ") + what);
  if (!fs::is_regular_file(p)) throw ArgumentError(std::string(what) + " '" + p.string() + "' not found");
  return p;
}

SimilarityGraph build_graph(GraphKind kind, const Matrix& x, std::size_t k) {
  switch (kind) {
    case GraphKind::knn: return build_knn_graph(x, k);
    case GraphKind::full: return build_full_graph(x.rows());
    case GraphKind::self_only: return build_self_loop_graph(x.rows());
    case GraphKind::augmented: break;
  }
  throw ArgumentError("graph kind must be knn, full or self_only");
}

std::vector<std::string> listing_labels(const std::vector<FeatureItem>& items) {
  std::vector<std::string> labels;
  for (const auto& i : items) labels.push_back(i.listing);
  return labels;
}

int cmd_extract(const ProjectConfig& cfg, const Flags& flags, std::ostream& out, std::ostream& err) {
  const fs::path input = require_dir(flags.input.empty() ? cfg.data_dir : fs::path(flags.input),
                                     "input directory (--input)");
  if (flags.output.empty()) throw ArgumentError("missing --output");
  std::vector<fs::path> listings;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_directory()) listings.push_back(e.path());
  std::sort(listings.begin(), listings.end());

  std::vector<GrayImage> images;
  std::vector<FeatureItem> items;
  std::size_t failures = 0;
  for (const auto& dir : listings) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        images.push_back(load_image(f));
        items.push_back({(dir.filename() / f.filename()).generic_string(), dir.filename().string()});
      } catch (const std::exception& e) {
        ++failures;
        err << "warning: skipping " << f.string() << ": " << e.what() << "\n";
      }
    }
  }
  if (images.empty()) {
    throw ArgumentError(failures ? "no readable images under '" + input.string() + "'"
                                 : "no images found under '" + input.string() + "'");
  }
  Matrix descriptors = hog_extract_batch(images, cfg.hog, cfg.resize_width, cfg.resize_height);
  FeatureSet fset;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (l2_norm(descriptors.row(i)) == 0.0) {
      err << "warning: skipping " << items[i].path << ": flat image gives a zero descriptor\n";
      continue;
    }
    fset.matrix.append_row(descriptors.row(i));
    fset.items.push_back(items[i]);
  }
  if (fset.items.empty()) throw ArgumentError("every image produced a zero descriptor");
  save_features(fset, flags.output);
  std::set<std::string> labels;
  for (const auto& i : fset.items) labels.insert(i.listing);
  out << "Extracted " << fset.items.size() << " descriptors of dimension " << fset.matrix.cols()
      << " from " << labels.size() << " listings to " << flags.output << "\n";
  return 0;
}

int cmd_train(const ProjectConfig& cfg, const Flags& flags, std::ostream& out) {
  const fs::path features_path = require_file(flags.features, "feature file (--features)");
  const fs::path index_dir = flags.index.empty() ? cfg.index_dir : fs::path(flags.index);
  if (index_dir.empty()) throw ArgumentError("missing index directory (--index)");
  cfg.train.validate();

  const FeatureSet fset = load_features(features_path);
  const ModelConfig model_cfg = cfg.model_for(fset.matrix.cols());
  if (cfg.graph_kind == GraphKind::knn && (cfg.k < 1 || cfg.k + 1 > fset.matrix.rows())) {
    throw ArgumentError("k=" + std::to_string(cfg.k) + " out of range for " +
                        std::to_string(fset.matrix.rows()) + " images");
  }
  std::set<std::string> folders;
  for (const auto& i : fset.items) folders.insert(i.listing);

  std::ostringstream loss_log;
  row_line(out, "Loaded images", std::to_string(fset.matrix.rows()) + " images from " +
                                     std::to_string(folders.size()) + " folders");
  const SimilarityGraph g = build_graph(cfg.graph_kind, fset.matrix, cfg.k);
  const std::string graph_name = cfg.graph_kind == GraphKind::knn ? "KNN graph"
                                 : cfg.graph_kind == GraphKind::full ? "Full graph"
                                                                     : "Self-loop graph";
  row_line(out, graph_name, "Built with " + std::to_string(g.non_self_edge_count()) + " edges");
  row_line(out, "Training", "GAT autoencoder...");
  const TrainResult result =
      train(GatAutoencoder::init(model_cfg), fset.matrix, g, cfg.train,
            [&](std::size_t epoch, double loss) {
              std::ostringstream l;
              l << std::setprecision(17) << epoch << " " << loss << "\n";
              loss_log << l.str();
              if (is_logged_epoch(epoch, cfg.train.log_every)) {
                row_line(out, "Epoch " + std::to_string(epoch), "Loss: " + fixed(loss, 6));
              }
            });

  const LatentIndex index = build_latent_index(result.model, fset, g);
  const auto reps = build_representatives(index.latents, listing_labels(index.items), cfg.rep_mode,
                                          cfg.degree_threshold);
  save_checkpoint(result.model, index_dir / "model.ckpt");
  save_latent_index(index, index_dir);
  save_representatives(reps, index_dir / "reps.fvec");
  io::atomic_write(index_dir / "loss.log", loss_log.str());
  row_line(out, "Representatives", "Saved representative vectors for each folder");
  return 0;
}

struct LoadedIndex {
  GatAutoencoder model;
  LatentIndex index;
  std::vector<Representative> reps;
};

LoadedIndex load_index(const ProjectConfig& cfg, const Flags& flags) {
  const fs::path dir = require_dir(flags.index.empty() ? cfg.index_dir : fs::path(flags.index),
                                   "index directory (--index)");
  LoadedIndex li{load_checkpoint(dir / "model.ckpt"), load_latent_index(dir),
                 load_representatives(dir / "reps.fvec")};
  if (io::hex64(li.model.fingerprint()) != li.index.model_fingerprint) {
    throw ParseError("index was built by a different model (fingerprint mismatch)");
  }
  return li;
}

json result_json(const QueryResult& r) {
  json scores = json::array();
  for (const auto& s : r.scores) scores.push_back({{"label", s.label}, {"similarity", s.similarity}});
  return {{"flow", to_string(r.flow)},
          {"scores", scores},
          {"predicted", r.predicted},
          {"best_match", {{"path", r.best_match.path}, {"similarity", r.best_match.similarity}}}};
}

int cmd_query(const ProjectConfig& cfg, const Flags& flags, std::ostream& out) {
  const LoadedIndex li = load_index(cfg, flags);
  Vector q;
  if (!flags.image.empty()) {
    const GrayImage img = resize_nearest(load_image(require_file(flags.image, "query image")),
                                         cfg.resize_width, cfg.resize_height);
    q = hog_extract(img, cfg.hog);
  } else if (!flags.features.empty()) {
    const FeatureSet qs = load_features(require_file(flags.features, "query features"));
    if (flags.row >= qs.matrix.rows()) {
      throw ArgumentError("--row " + std::to_string(flags.row) + " out of range for " +
                          std::to_string(qs.matrix.rows()) + " rows");
    }
    q = qs.matrix.row_vector(flags.row);
  } else {
    throw ArgumentError("query needs --image or --features");
  }
  if (q.size() != li.model.config.input_dim) {
    throw ShapeError("query has dimension " + std::to_string(q.size()) +
                     " but the model expects " + std::to_string(li.model.config.input_dim));
  }
  QueryOptions opts{cfg.flow, cfg.k, std::nullopt};
  if (!flags.category.empty()) opts.category = flags.category;
  const QueryResult r = answer_query(li.model, li.index, li.reps, q, opts);
  if (flags.format == "json") {
    out << result_json(r).dump(2) << "\n";
    return 0;
  }
  row_line(out, "Steps", "Output");
  for (const auto& s : r.scores) row_line(out, "Similarity to (" + s.label + ")", fixed(s.similarity, 4));
  row_line(out, "Predicted category", r.predicted);
  row_line(out, "Closest image", r.best_match.path);
  row_line(out, "Closest similarity", fixed(r.best_match.similarity, 4));
  return 0;
}

int cmd_merge(const ProjectConfig& cfg, const Flags& flags, std::ostream& out) {
  std::vector<std::string> labels;
  Matrix sim;
  if (!flags.similarity.empty()) {
    const json j = json::parse(io::read_text_file(require_file(flags.similarity, "similarity file")));
    labels = j.at("labels").get<std::vector<std::string>>();
    sim = Matrix::from_rows(j.at("matrix").get<std::vector<Vector>>());
  } else {
    std::vector<Representative> reps;
    if (!flags.features.empty()) {
      // Direct-feature prototypes, one per listing.
      const FeatureSet fset = load_features(require_file(flags.features, "feature file"));
      reps = build_representatives(fset.matrix, listing_labels(fset.items), cfg.rep_mode,
                                   cfg.degree_threshold);
    } else {
      const fs::path dir = require_dir(flags.index.empty() ? cfg.index_dir : fs::path(flags.index),
                                       "index directory (--index)");
      reps = load_representatives(dir / "reps.fvec");
    }
    for (const auto& r : reps) labels.push_back(r.label);
    sim = representative_similarity(reps);
  }
  const Partition parts = merge_by_similarity(labels, sim, cfg.merge_threshold);
  if (flags.format == "json") {
    json matrix = json::array();
    for (std::size_t i = 0; i < sim.rows(); ++i) matrix.push_back(sim.row_vector(i));
    out << json{{"labels", labels}, {"matrix", matrix}, {"threshold", cfg.merge_threshold},
                {"components", parts}}
               .dump(2)
        << "\n";
    return 0;
  }
  out << "Similarity matrix:\n";
  for (std::size_t i = 0; i < sim.rows(); ++i) {
    out << std::left << std::setw(16) << labels[i];
    for (std::size_t j = 0; j < sim.cols(); ++j) out << " " << std::setprecision(8) << sim(i, j);
    out << "\n";
  }
  out << "Components at threshold " << cfg.merge_threshold << ":\n";
  for (const auto& c : parts) {
    out << "  {";
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? ", " : "") << c[i];
    out << "}\n";
  }
  return 0;
}

int cmd_eval(const ProjectConfig& cfg, const Flags& flags, std::ostream& out) {
  const LoadedIndex li = load_index(cfg, flags);
  const FeatureSet queries = load_features(require_file(flags.queries, "query set (--queries)"));
  const EvalReport rep = evaluate(li.model, li.index, li.reps, queries, {cfg.flow, cfg.k, std::nullopt});
  if (flags.format == "json") {
    json rows = json::array();
    for (const auto& c : rep.per_class) {
      rows.push_back({{"label", c.label}, {"precision", c.precision}, {"recall", c.recall},
                      {"f1", c.f1}, {"support", c.support}});
    }
    const auto avg = [](const ClassMetrics& m) {
      return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    };
    out << json{{"accuracy", rep.accuracy}, {"classes", rows}, {"macro", avg(rep.macro)},
                {"weighted", avg(rep.weighted)}, {"confusion", rep.confusion},
                {"labels", rep.classes}}
               .dump(2)
        << "\n";
    return 0;
  }
  const auto triple = [](const ClassMetrics& m) {
    return fixed(m.precision, 2) + " / " + fixed(m.recall, 2) + " / " + fixed(m.f1, 2);
  };
  row_line(out, "Metric", "Value");
  row_line(out, "Categorization accuracy",
           fixed(100.0 * rep.accuracy, 0) + "% (" + fixed(rep.accuracy, 4) + ")");
  row_line(out, "Class", "Precision / Recall / F1-score");
  for (const auto& c : rep.per_class) row_line(out, c.label, triple(c));
  row_line(out, "Macro average", triple(rep.macro));
  row_line(out, "Weighted average", triple(rep.weighted));
  return 0;
}

int cmd_gradcheck(const ProjectConfig& cfg, const Flags& flags, std::ostream& out) {
  ModelConfig mc;
  mc.input_dim = flags.dim;
  mc.enc1_dim = cfg.enc1_dim.value_or(4);
  mc.enc2_dim = cfg.enc2_dim.value_or(4);
  mc.latent_dim = cfg.latent_dim.value_or(3);
  mc.dec_hidden_dim = cfg.dec_hidden_dim.value_or(5);
  mc.heads = cfg.heads;
  mc.combine = cfg.combine;
  mc.leaky_slope = cfg.leaky_slope;
  mc.seed = cfg.train.seed;
  GatAutoencoder m = GatAutoencoder::init(mc);
  std::mt19937_64 rng(cfg.train.seed ^ 0x9e3779b97f4a7c15ull);
  const auto uniform = [&](double scale) {
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale;
  };
  // Nonzero biases keep dead ReLU units off the kink at exactly zero.
  for (auto* layer : {&m.latent, &m.dec_hidden, &m.dec_out})
    for (double& b : layer->bias) b = uniform(0.1);
  Matrix x(flags.nodes, flags.dim);
  for (double& v : x.data()) v = uniform(1.0);
  const std::size_t k = std::min<std::size_t>(cfg.k, flags.nodes - 1);
  const SimilarityGraph g = flags.nodes > 1 ? build_knn_graph(x, std::max<std::size_t>(k, 1))
                                            : build_self_loop_graph(1);
  const GradCheckReport r = grad_check(m, x, g, flags.eps, flags.tol);
  for (const auto& [name, e] : r.per_tensor) row_line(out, name, scientific(e));
  row_line(out, "Parameters checked", std::to_string(r.checked));
  row_line(out, "Max relative error", scientific(r.max_relative_error));
  row_line(out, "Worst tensor", r.worst_tensor + "[" + std::to_string(r.worst_index) + "]");
  row_line(out, "Result", r.passed ? "PASS" : "FAIL");
  return r.passed ? 0 : 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Representative-centric image categorization and retrieval with a graph attention autoencoder",
               "gatae"};
  app.require_subcommand(1);
  Flags f;

  const auto shared = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON config with flat dotted keys");
    sub->add_option("--seed", f.seed, "Random seed");
    sub->add_option("--k", f.k, "Neighbours per node in the k-NN graph");
    sub->add_option("--epochs", f.epochs, "Training epochs");
    sub->add_option("--flow", f.flow, "approach1 | approach2")
        ->check(CLI::IsMember({"approach1", "approach2"}));
    sub->add_option("--rep-mode", f.rep_mode, "central | centroid | nearest-centroid | degree")
        ->check(CLI::IsMember({"central", "centroid", "nearest-centroid", "degree"}));
    sub->add_option("--threshold", f.threshold, "Merge threshold or degree threshold");
    sub->add_option("--format", f.format, "json | table")->check(CLI::IsMember({"json", "table"}));
    sub->add_option("--threads", f.threads, "OpenMP threads (1 for single-threaded runs)");
  };

  auto* extract = app.add_subcommand("extract", "HOG descriptors for <dir>/<listing>/<image> trees");
  shared(extract);
  extract->add_option("--input", f.input, "Image root directory");
  extract->add_option("--output", f.output, "Output FVEC file");
  extract->add_option("--resize", f.resize, "Square resize target before HOG");

  auto* train_cmd = app.add_subcommand("train", "Train the autoencoder and build the index");
  shared(train_cmd);
  train_cmd->add_option("--features", f.features, "Input FVEC file");
  train_cmd->add_option("--index", f.index, "Output index directory");
  train_cmd->add_option("--graph", f.graph, "knn | full | self_only")
      ->check(CLI::IsMember({"knn", "full", "self_only"}));
  train_cmd->add_option("--lr", f.lr, "Adam learning rate");
  train_cmd->add_option("--log-every", f.log_every, "Log interval in epochs");
  train_cmd->add_option("--latent", f.latent, "Latent width");
  train_cmd->add_option("--enc1", f.enc1, "First GAT layer width per head");
  train_cmd->add_option("--enc2", f.enc2, "Second GAT layer width per head");
  train_cmd->add_option("--dec-hidden", f.dec_hidden, "Decoder hidden width");
  train_cmd->add_option("--heads", f.heads, "Attention heads");
  train_cmd->add_option("--combine", f.combine, "concat | average")
      ->check(CLI::IsMember({"concat", "average"}));

  auto* query = app.add_subcommand("query", "Categorize a query and retrieve its best match");
  shared(query);
  query->add_option("--index", f.index, "Index directory");
  query->add_option("--image", f.image, "Query image (PGM/PPM)");
  query->add_option("--features", f.features, "FVEC file holding the query");
  query->add_option("--row", f.row, "Row of --features to use");
  query->add_option("--category", f.category, "Retrieve inside this category");

  auto* merge = app.add_subcommand("merge", "Merge listings whose representatives are similar");
  shared(merge);
  merge->add_option("--index", f.index, "Index directory (uses its representatives)");
  merge->add_option("--features", f.features, "Build representatives straight from features");
  merge->add_option("--similarity", f.similarity, "JSON {labels, matrix} similarity matrix");

  auto* eval = app.add_subcommand("eval", "Categorization metrics over a labelled query set");
  shared(eval);
  eval->add_option("--index", f.index, "Index directory");
  eval->add_option("--queries", f.queries, "Labelled query FVEC file");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  shared(gradcheck);
  gradcheck->add_option("--nodes", f.nodes, "Graph size");
  gradcheck->add_option("--dim", f.dim, "Feature dimension");
  gradcheck->add_option("--heads", f.heads, "Attention heads");
  gradcheck->add_option("--combine", f.combine, "concat | average")
      ->check(CLI::IsMember({"concat", "average"}));
  gradcheck->add_option("--eps", f.eps, "Finite-difference step");
  gradcheck->add_option("--tol", f.tol, "Relative error tolerance");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const auto given = [&](const char* name) { return sub->count(name) > 0; };
  try {
    ProjectConfig cfg;
    if (given("--config")) cfg.apply_json(io::read_text_file(f.config));
    if (given("--seed")) cfg.train.seed = f.seed;
    if (given("--k")) cfg.k = f.k;
    if (given("--epochs")) cfg.train.epochs = f.epochs;
    if (given("--flow")) cfg.flow = parse_flow(f.flow);
    if (given("--rep-mode")) cfg.rep_mode = parse_representative_mode(f.rep_mode);
    if (given("--threshold")) cfg.merge_threshold = cfg.degree_threshold = f.threshold;
    if (given("--threads")) cfg.threads = f.threads;
    if (sub == extract && given("--resize")) cfg.resize_width = cfg.resize_height = f.resize;
    if (sub == train_cmd) {
      if (given("--graph")) cfg.graph_kind = parse_graph_kind(f.graph);
      if (given("--lr")) cfg.train.learning_rate = f.lr;
      if (given("--log-every")) cfg.train.log_every = f.log_every;
      if (given("--latent")) cfg.latent_dim = f.latent;
      if (given("--enc1")) cfg.enc1_dim = f.enc1;
      if (given("--enc2")) cfg.enc2_dim = f.enc2;
      if (given("--dec-hidden")) cfg.dec_hidden_dim = f.dec_hidden;
    }
    if ((sub == train_cmd || sub == gradcheck) && given("--heads")) cfg.heads = f.heads;
    if ((sub == train_cmd || sub == gradcheck) && given("--combine")) {
      cfg.combine = parse_head_combine(f.combine);
    }
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);

    if (sub == extract) return cmd_extract(cfg, f, out, err);
    if (sub == train_cmd) return cmd_train(cfg, f, out);
    if (sub == query) return cmd_query(cfg, f, out);
    if (sub == merge) return cmd_merge(cfg, f, out);
    if (sub == eval) return cmd_eval(cfg, f, out);
    return cmd_gradcheck(cfg, f, out);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << "\n";
    return 1;
  }
}

}  // namespace gatae::cli
