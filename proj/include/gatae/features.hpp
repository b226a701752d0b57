#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gatae/linalg.hpp"

namespace gatae {

using FeatureMatrix = Matrix;

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, width * height

  std::uint8_t at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

// Binary PGM (P5) passes through; binary PPM (P6) is converted to luminance
// round(0.299 R + 0.587 G + 0.114 B). Only maxval 255 is accepted.
GrayImage load_image(const std::filesystem::path& path);
GrayImage decode_image(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void save_pgm(const GrayImage& img, const std::filesystem::path& path);

// Nearest-neighbour resampling with source index floor((i + 0.5) * src / dst).
GrayImage resize_nearest(const GrayImage& img, std::size_t target_w, std::size_t target_h);

struct HogConfig {
  std::size_t orientations = 9;
  std::size_t pixels_per_cell = 8;
  std::size_t cells_per_block = 3;
  double clip = 0.2;
};

// Number of entries hog_extract produces for an image of the given size.
std::size_t hog_descriptor_length(std::size_t width, std::size_t height, const HogConfig& cfg);

// Histogram of oriented gradients with unsigned orientation, nearest-bin
// voting, 1-cell block stride and L2-Hys block normalization.
Vector hog_extract(const GrayImage& img, const HogConfig& cfg = {});

// Resizes every image to the same target before extraction, in parallel.
Matrix hog_extract_batch(const std::vector<GrayImage>& images, const HogConfig& cfg,
                         std::size_t target_w, std::size_t target_h);

struct FeatureItem {
  std::string path;
  std::string listing;
  friend bool operator==(const FeatureItem&, const FeatureItem&) = default;
};

struct FeatureSet {
  FeatureMatrix matrix;
  std::vector<FeatureItem> items;
};

// Throws unless items match rows, rows are nonzero and labels nonempty.
void validate(const FeatureSet& fs);

// FVEC: "FVEC1\n", u32 N, u32 D (little endian), N*D little-endian f32,
// plus a JSON manifest at <path>.manifest.json.
std::vector<std::uint8_t> encode_fvec(const Matrix& m);
Matrix decode_fvec(const std::vector<std::uint8_t>& bytes);
std::filesystem::path manifest_path(const std::filesystem::path& fvec_path);

void save_features(const FeatureSet& fs, const std::filesystem::path& path);
FeatureSet load_features(const std::filesystem::path& path);

namespace serial {
Matrix hog_extract_batch(const std::vector<GrayImage>& images, const HogConfig& cfg,
                         std::size_t target_w, std::size_t target_h);
}  // namespace serial

}  // namespace gatae
