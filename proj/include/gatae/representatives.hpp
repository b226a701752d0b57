#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gatae/linalg.hpp"

namespace gatae {

enum class RepresentativeMode { central_image, centroid, nearest_to_centroid, degree_central };

std::string to_string(RepresentativeMode mode);
// Accepts both the persisted names and the CLI spellings
// (central, centroid, nearest-centroid, degree).
RepresentativeMode parse_representative_mode(const std::string& s);

struct Representative {
  std::string label;
  Vector vector;
  RepresentativeMode mode = RepresentativeMode::centroid;
  std::optional<std::size_t> source_index;  // row within the listing, for image-valued modes
};

struct CentralityEntry {
  std::size_t index = 0;
  double total_similarity = 0.0;
  double z_score = 0.0;
};

// Descending by total similarity, ties to the lower index.
using RankedCentrality = std::vector<CentralityEntry>;

// Scores each row by the sum of its cosine similarities to all rows (itself
// included, a constant shift) and ranks them. Population z-scores; all zero
// when the scores have no spread.
RankedCentrality central_representative(const Matrix& z);
Vector centroid_representative(const Matrix& z);
std::size_t nearest_to_centroid(const Matrix& z);
std::size_t degree_central_representative(const Matrix& z, double threshold);

// One representative for the rows of z, by the requested strategy.
Representative make_representative(const std::string& label, const Matrix& z,
                                   RepresentativeMode mode, double degree_threshold = 0.5);

// Representatives for every distinct label, ordered by label.
std::vector<Representative> build_representatives(const Matrix& z,
                                                  const std::vector<std::string>& labels,
                                                  RepresentativeMode mode,
                                                  double degree_threshold = 0.5);

using Partition = std::vector<std::vector<std::string>>;

// Connected components of the graph linking labels whose similarity is at
// least `threshold`. Members sorted, components ordered by first member.
Partition merge_by_similarity(const std::vector<std::string>& labels, const Matrix& similarity,
                              double threshold);
Partition merge_listings(const std::vector<Representative>& reps, double threshold);

Matrix representative_similarity(const std::vector<Representative>& reps);

// The most central listing representative of each merged category, labelled
// with the component's members joined by '+'.
std::vector<Representative> category_representatives(const std::vector<Representative>& reps,
                                                     const Partition& partition);

// FVEC rows plus a manifest of {"label", "mode", "source_index"}.
void save_representatives(const std::vector<Representative>& reps, const std::filesystem::path& path);
std::vector<Representative> load_representatives(const std::filesystem::path& path);

}  // namespace gatae
