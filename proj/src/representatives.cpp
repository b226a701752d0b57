#include "gatae/representatives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gatae/error.hpp"
#include "gatae/features.hpp"
#include "gatae/graph.hpp"
#include "gatae/io.hpp"
#include "json.hpp"

namespace gatae {

std::string to_string(RepresentativeMode mode) {
  switch (mode) {
    case RepresentativeMode::central_image: return "central_image";
    case RepresentativeMode::centroid: return "centroid";
    case RepresentativeMode::nearest_to_centroid: return "nearest_to_centroid";
    case RepresentativeMode::degree_central: return "degree_central";
  }
  return "unknown";
}

RepresentativeMode parse_representative_mode(const std::string& s) {
  if (s == "central" || s == "central_image") return RepresentativeMode::central_image;
  if (s == "centroid") return RepresentativeMode::centroid;
  if (s == "nearest-centroid" || s == "nearest_to_centroid") {
    return RepresentativeMode::nearest_to_centroid;
  }
  if (s == "degree" || s == "degree_central") return RepresentativeMode::degree_central;
  throw ArgumentError("unknown representative mode '" + s +
                      "' (expected central, centroid, nearest-centroid or degree)");
}

namespace {

void require_rows(const Matrix& z, const char* op) {
  if (z.rows() == 0) throw ArgumentError(std::string(op) + ": no rows");
}

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

RankedCentrality central_representative(const Matrix& z) {
  require_rows(z, "central_representative");
  const Matrix s = cosine_similarity_matrix(z);
  const std::size_t n = z.rows();
  RankedCentrality ranked(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += s(i, j);
    ranked[i] = {i, total, 0.0};
  }
  double mean = 0.0;
  for (const auto& e : ranked) mean += e.total_similarity;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& e : ranked) var += (e.total_similarity - mean) * (e.total_similarity - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  if (sd > 1e-12) {
    for (auto& e : ranked) e.z_score = (e.total_similarity - mean) / sd;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.total_similarity > b.total_similarity;
  });
  return ranked;
}

Vector centroid_representative(const Matrix& z) {
  require_rows(z, "centroid_representative");
  Vector mean(z.cols(), 0.0);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t j = 0; j < z.cols(); ++j) mean[j] += r[j];
  }
  for (double& v : mean) v /= static_cast<double>(z.rows());
  if (l2_norm(mean) == 0.0) throw ZeroVectorError("centroid_representative: centroid has zero norm");
  return mean;
}

std::size_t nearest_to_centroid(const Matrix& z) {
  const Vector c = centroid_representative(z);
  return argmax_lowest(cosine_similarity_to(z, c));
}

std::size_t degree_central_representative(const Matrix& z, double threshold) {
  require_rows(z, "degree_central_representative");
  const auto deg = degree_centrality(cosine_similarity_matrix(z), threshold);
  std::size_t best = 0;
  for (std::size_t i = 1; i < deg.size(); ++i)
    if (deg[i] > deg[best]) best = i;
  if (deg[best] == 0 && z.rows() > 1) {
    throw ArgumentError("degree_central_representative: threshold isolates all nodes");
  }
  if (z.rows() == 1 && threshold > 1.0) {
    throw ArgumentError("degree_central_representative: threshold isolates all nodes");
  }
  return best;
}

Representative make_representative(const std::string& label, const Matrix& z,
                                   RepresentativeMode mode, double degree_threshold) {
  Representative rep{label, {}, mode, std::nullopt};
  switch (mode) {
    case RepresentativeMode::central_image:
      rep.source_index = central_representative(z).front().index;
      break;
    case RepresentativeMode::centroid:
      rep.vector = centroid_representative(z);
      return rep;
    case RepresentativeMode::nearest_to_centroid:
      rep.source_index = nearest_to_centroid(z);
      break;
    case RepresentativeMode::degree_central:
      rep.source_index = degree_central_representative(z, degree_threshold);
      break;
  }
  rep.vector = z.row_vector(*rep.source_index);
  return rep;
}

std::vector<Representative> build_representatives(const Matrix& z,
                                                  const std::vector<std::string>& labels,
                                                  RepresentativeMode mode,
                                                  double degree_threshold) {
  if (labels.size() != z.rows()) {
    throw ShapeError("build_representatives: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(z.rows()) + " rows");
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<Representative> reps;
  for (const auto& [label, rows] : groups) {
    reps.push_back(make_representative(label, z.select_rows(rows), mode, degree_threshold));
  }
  return reps;
}

Partition merge_by_similarity(const std::vector<std::string>& labels, const Matrix& similarity,
                              double threshold) {
  const std::size_t n = labels.size();
  if (n == 0) throw ArgumentError("merge_listings: no representatives");
  if (similarity.rows() != n || similarity.cols() != n) {
    throw ShapeError("merge_listings: similarity matrix " + similarity.shape_string() + " for " +
                     std::to_string(n) + " labels");
  }
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (similarity(i, j) >= threshold) parent[find(i)] = find(j);
  std::map<std::size_t, std::vector<std::string>> comps;
  for (std::size_t i = 0; i < n; ++i) comps[find(i)].push_back(labels[i]);
  Partition out;
  for (auto& [root, members] : comps) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return out;
}

Matrix representative_similarity(const std::vector<Representative>& reps) {
  Matrix m;
  for (const auto& r : reps) m.append_row(r.vector);
  return cosine_similarity_matrix(m);
}

Partition merge_listings(const std::vector<Representative>& reps, double threshold) {
  std::vector<std::string> labels;
  for (const auto& r : reps) labels.push_back(r.label);
  return merge_by_similarity(labels, representative_similarity(reps), threshold);
}

std::vector<Representative> category_representatives(const std::vector<Representative>& reps,
                                                     const Partition& partition) {
  std::map<std::string, const Representative*> by_label;
  for (const auto& r : reps) by_label[r.label] = &r;
  std::vector<Representative> out;
  for (const auto& members : partition) {
    Matrix z;
    std::string joined;
    for (const auto& label : members) {
      const auto it = by_label.find(label);
      if (it == by_label.end()) throw ArgumentError("category_representatives: unknown label " + label);
      z.append_row(it->second->vector);
      joined += (joined.empty() ? "" : "+") + label;
    }
    const std::size_t best = central_representative(z).front().index;
    Representative rep = *by_label[members[best]];
    rep.label = joined;
    out.push_back(std::move(rep));
  }
  return out;
}

void save_representatives(const std::vector<Representative>& reps,
                          const std::filesystem::path& path) {
  if (reps.empty()) throw ArgumentError("save_representatives: nothing to save");
  Matrix m;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& r : reps) {
    m.append_row(r.vector);
    nlohmann::json entry{{"label", r.label}, {"mode", to_string(r.mode)}};
    entry["source_index"] = r.source_index ? nlohmann::json(*r.source_index) : nlohmann::json();
    manifest.push_back(std::move(entry));
  }
  io::atomic_write(path, encode_fvec(m));
  io::atomic_write(manifest_path(path), manifest.dump(1) + "\n");
}

std::vector<Representative> load_representatives(const std::filesystem::path& path) {
  const Matrix m = decode_fvec(io::read_file(path));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text_file(manifest_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("representatives manifest: " + std::string(e.what()));
  }
  if (!manifest.is_array() || manifest.size() != m.rows()) {
    throw ParseError("representatives manifest lists " +
                     std::to_string(manifest.is_array() ? manifest.size() : 0) +
                     " entries but matrix has " + std::to_string(m.rows()) + " rows");
  }
  std::vector<Representative> reps;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto& e = manifest[i];
    Representative r;
    r.label = e.at("label").get<std::string>();
    r.mode = parse_representative_mode(e.at("mode").get<std::string>());
    if (!e.at("source_index").is_null()) r.source_index = e["source_index"].get<std::size_t>();
    r.vector = m.row_vector(i);
    reps.push_back(std::move(r));
  }
  return reps;
}

}  // namespace gatae
