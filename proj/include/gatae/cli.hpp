#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gatae/autoencoder.hpp"
#include "gatae/features.hpp"
#include "gatae/representatives.hpp"
#include "gatae/retrieval.hpp"

namespace gatae::cli {

// Every knob a command may read. Loaded from a JSON object of flat dotted
// keys ("graph.k": 10, "train.epochs": 200, ...) and then overridden by flags.
struct ProjectConfig {
  std::filesystem::path data_dir;
  std::filesystem::path index_dir;
  GraphKind graph_kind = GraphKind::knn;
  std::size_t k = 10;
  // Unset widths fall back to ModelConfig::for_input(feature dim).
  std::optional<std::size_t> enc1_dim, enc2_dim, latent_dim, dec_hidden_dim;
  std::size_t heads = 1;
  HeadCombine combine = HeadCombine::concat;
  double leaky_slope = 0.2;
  TrainConfig train;
  RepresentativeMode rep_mode = RepresentativeMode::centroid;
  double degree_threshold = 0.5;
  HogConfig hog;
  std::size_t resize_width = 128;
  std::size_t resize_height = 128;
  double merge_threshold = 0.8;
  Flow flow = Flow::approach1;
  int threads = 0;  // 0: OpenMP default

  void apply_json(const std::string& json_text);
  ModelConfig model_for(std::size_t input_dim) const;
};

// Runs one command (args excludes the program name). Returns the exit code.
// Failures print a single "error: ..." line to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gatae::cli
