#include "gatae/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>

#include "gatae/error.hpp"
#include "gatae/io.hpp"
#include "json.hpp"

namespace gatae {

namespace {

class PnmReader {
 public:
  explicit PnmReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1u << 24)) throw ParseError(std::string("pnm: ") + field + " too large at byte " +
                                           std::to_string(start));
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("pnm: expected ") + field + " at byte " +
                       std::to_string(start));
    }
    return v;
  }

  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("pnm: expected whitespace after header at byte " + std::to_string(pos_));
    }
    ++pos_;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("pnm: unsupported magic number at byte 0 (expected P5 or P6)");
  }
  const bool color = bytes[1] == '6';
  // Header offsets below are relative to the byte after the magic.
  const std::vector<std::uint8_t> rest(bytes.begin() + 2, bytes.end());
  PnmReader hdr(rest);
  const std::size_t width = hdr.read_uint("width");
  const std::size_t height = hdr.read_uint("height");
  const std::size_t maxval_offset = hdr.offset() + 2;
  const std::size_t maxval = hdr.read_uint("maxval");
  if (maxval != 255) {
    throw ParseError("pnm: maxval " + std::to_string(maxval) + " unsupported (need 255) near byte " +
                     std::to_string(maxval_offset));
  }
  hdr.expect_single_whitespace();
  const std::size_t data_start = hdr.offset() + 2;
  if (width == 0 || height == 0) throw ParseError("pnm: zero image dimension");
  const std::size_t channels = color ? 3 : 1;
  const std::size_t need = width * height * channels;
  if (bytes.size() - data_start < need) {
    throw ParseError("pnm: truncated payload at byte " + std::to_string(bytes.size()) +
                     " (expected " + std::to_string(need) + " bytes from byte " +
                     std::to_string(data_start) + ")");
  }
  GrayImage img{width, height, std::vector<std::uint8_t>(width * height)};
  const std::uint8_t* p = bytes.data() + data_start;
  if (!color) {
    std::copy_n(p, width * height, img.pixels.begin());
  } else {
    for (std::size_t i = 0; i < width * height; ++i) {
      const double y = 0.299 * p[3 * i] + 0.587 * p[3 * i + 1] + 0.114 * p[3 * i + 2];
      img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
    }
  }
  return img;
}

GrayImage load_image(const std::filesystem::path& path) { return decode_image(io::read_file(path)); }

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  io::Bytes out;
  io::put_string(out, "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                          "\n255\n");
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void save_pgm(const GrayImage& img, const std::filesystem::path& path) {
  io::atomic_write(path, encode_pgm(img));
}

GrayImage resize_nearest(const GrayImage& img, std::size_t target_w, std::size_t target_h) {
  if (target_w == 0 || target_h == 0) throw ArgumentError("resize_nearest: zero target size");
  GrayImage out{target_w, target_h, std::vector<std::uint8_t>(target_w * target_h)};
  const auto src_index = [](std::size_t i, std::size_t src, std::size_t dst) {
    const auto idx = static_cast<std::size_t>(
        std::floor((static_cast<double>(i) + 0.5) * static_cast<double>(src) /
                   static_cast<double>(dst)));
    return std::min(idx, src - 1);
  };
  for (std::size_t y = 0; y < target_h; ++y) {
    const std::size_t sy = src_index(y, img.height, target_h);
    for (std::size_t x = 0; x < target_w; ++x) {
      out.pixels[y * target_w + x] = img.at(src_index(x, img.width, target_w), sy);
    }
  }
  return out;
}

namespace {

void check_hog(const GrayImage& img, const HogConfig& cfg) {
  if (cfg.orientations == 0 || cfg.pixels_per_cell == 0 || cfg.cells_per_block == 0) {
    throw ArgumentError("hog: orientations, pixels_per_cell and cells_per_block must be >= 1");
  }
  const std::size_t block_px = cfg.pixels_per_cell * cfg.cells_per_block;
  if (img.width < block_px || img.height < block_px) {
    throw ArgumentError("hog: image " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + " smaller than one block of " +
                        std::to_string(block_px) + " pixels");
  }
}

}  // namespace

std::size_t hog_descriptor_length(std::size_t width, std::size_t height, const HogConfig& cfg) {
  const std::size_t cx = width / cfg.pixels_per_cell;
  const std::size_t cy = height / cfg.pixels_per_cell;
  if (cx < cfg.cells_per_block || cy < cfg.cells_per_block) return 0;
  const std::size_t bx = cx - cfg.cells_per_block + 1;
  const std::size_t by = cy - cfg.cells_per_block + 1;
  return bx * by * cfg.cells_per_block * cfg.cells_per_block * cfg.orientations;
}

Vector hog_extract(const GrayImage& img, const HogConfig& cfg) {
  check_hog(img, cfg);
  const std::size_t w = img.width, h = img.height;
  const std::size_t cell = cfg.pixels_per_cell;
  const std::size_t cells_x = w / cell, cells_y = h / cell;
  const std::size_t nbins = cfg.orientations;
  const double bin_width = 180.0 / static_cast<double>(nbins);

  // Per-cell orientation histograms over the covered region.
  std::vector<double> hist(cells_x * cells_y * nbins, 0.0);
  for (std::size_t y = 0; y < cells_y * cell; ++y) {
    const std::size_t ym = y == 0 ? 0 : y - 1;
    const std::size_t yp = std::min(y + 1, h - 1);
    for (std::size_t x = 0; x < cells_x * cell; ++x) {
      const std::size_t xm = x == 0 ? 0 : x - 1;
      const std::size_t xp = std::min(x + 1, w - 1);
      const double gx = static_cast<double>(img.at(xp, y)) - static_cast<double>(img.at(xm, y));
      const double gy = static_cast<double>(img.at(x, yp)) - static_cast<double>(img.at(x, ym));
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      const auto bin = std::min(static_cast<std::size_t>(angle / bin_width), nbins - 1);
      hist[((y / cell) * cells_x + x / cell) * nbins + bin] += mag;
    }
  }

  const std::size_t cpb = cfg.cells_per_block;
  const std::size_t blocks_x = cells_x - cpb + 1, blocks_y = cells_y - cpb + 1;
  const std::size_t block_len = cpb * cpb * nbins;
  constexpr double eps = 1e-5;
  Vector out;
  out.reserve(blocks_x * blocks_y * block_len);
  std::vector<double> block(block_len);
  for (std::size_t by = 0; by < blocks_y; ++by) {
    for (std::size_t bx = 0; bx < blocks_x; ++bx) {
      std::size_t k = 0;
      for (std::size_t cy = by; cy < by + cpb; ++cy)
        for (std::size_t cx = bx; cx < bx + cpb; ++cx)
          for (std::size_t b = 0; b < nbins; ++b) block[k++] = hist[(cy * cells_x + cx) * nbins + b];
      // L2-Hys: normalize, clip, renormalize.
      double norm = std::sqrt(dot(block, block) + eps * eps);
      for (double& v : block) v = std::min(v / norm, cfg.clip);
      norm = std::sqrt(dot(block, block) + eps * eps);
      for (double& v : block) v /= norm;
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  return out;
}

Matrix hog_extract_batch(const std::vector<GrayImage>& images, const HogConfig& cfg,
                         std::size_t target_w, std::size_t target_h) {
  const std::size_t dim = hog_descriptor_length(target_w, target_h, cfg);
  Matrix out(images.size(), dim);
  const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Vector d = hog_extract(resize_nearest(images[i], target_w, target_h), cfg);
    std::copy(d.begin(), d.end(), out.row(static_cast<std::size_t>(i)).begin());
  }
  return out;
}

namespace serial {

Matrix hog_extract_batch(const std::vector<GrayImage>& images, const HogConfig& cfg,
                         std::size_t target_w, std::size_t target_h) {
  Matrix out;
  for (const auto& img : images) out.append_row(hog_extract(resize_nearest(img, target_w, target_h), cfg));
  return out;
}

}  // namespace serial

void validate(const FeatureSet& fs) {
  if (fs.matrix.rows() == 0) throw ParseError("empty feature set");
  if (fs.items.size() != fs.matrix.rows()) {
    throw ParseError("manifest lists " + std::to_string(fs.items.size()) +
                     " items but matrix has " + std::to_string(fs.matrix.rows()) + " rows");
  }
  for (std::size_t i = 0; i < fs.matrix.rows(); ++i) {
    if (l2_norm(fs.matrix.row(i)) == 0.0) {
      throw ZeroVectorError("feature row " + std::to_string(i) + " (" + fs.items[i].path +
                            ") has zero norm");
    }
    if (fs.items[i].listing.empty()) {
      throw ParseError("feature row " + std::to_string(i) + " has an empty listing label");
    }
  }
  require_finite(fs.matrix.data(), "feature matrix");
}

namespace {
constexpr std::string_view kFvecMagic = "FVEC1\n";
constexpr std::size_t kFvecHeader = 6 + 4 + 4;
}  // namespace

std::vector<std::uint8_t> encode_fvec(const Matrix& m) {
  io::Bytes out;
  out.reserve(kFvecHeader + 4 * m.size());
  io::put_string(out, kFvecMagic);
  io::put_u32_le(out, static_cast<std::uint32_t>(m.rows()));
  io::put_u32_le(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) io::put_f32_le(out, static_cast<float>(v));
  return out;
}

Matrix decode_fvec(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFvecHeader ||
      !std::equal(kFvecMagic.begin(), kFvecMagic.end(), bytes.begin())) {
    throw ParseError("fvec: bad magic (expected \"FVEC1\\n\")");
  }
  const std::size_t n = io::get_u32_le(bytes.data() + 6);
  const std::size_t d = io::get_u32_le(bytes.data() + 10);
  if (n == 0) throw ParseError("empty feature set");
  const std::size_t payload = bytes.size() - kFvecHeader;
  if (payload != n * d * 4) {
    throw ParseError("fvec: header declares " + std::to_string(n) + "x" + std::to_string(d) +
                     " (" + std::to_string(n * d * 4) + " bytes) but payload has " +
                     std::to_string(payload) + " bytes");
  }
  Matrix m(n, d);
  auto data = m.data();
  for (std::size_t i = 0; i < n * d; ++i) {
    data[i] = io::get_f32_le(bytes.data() + kFvecHeader + 4 * i);
  }
  return m;
}

std::filesystem::path manifest_path(const std::filesystem::path& fvec_path) {
  auto p = fvec_path;
  p += ".manifest.json";
  return p;
}

void save_features(const FeatureSet& fs, const std::filesystem::path& path) {
  validate(fs);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& item : fs.items) manifest.push_back({{"path", item.path}, {"listing", item.listing}});
  io::atomic_write(path, encode_fvec(fs.matrix));
  io::atomic_write(manifest_path(path), manifest.dump(1) + "\n");
}

FeatureSet load_features(const std::filesystem::path& path) {
  FeatureSet fs;
  fs.matrix = decode_fvec(io::read_file(path));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text_file(manifest_path(path)));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + manifest_path(path).string() + ": " + e.what());
  }
  if (!manifest.is_array()) throw ParseError("manifest must be a JSON array");
  for (const auto& entry : manifest) {
    if (!entry.is_object() || !entry.contains("path") || !entry.contains("listing") ||
        !entry["path"].is_string() || !entry["listing"].is_string()) {
      throw ParseError("manifest entries must be {\"path\": string, \"listing\": string}");
    }
    fs.items.push_back({entry["path"].get<std::string>(), entry["listing"].get<std::string>()});
  }
  validate(fs);
  return fs;
}

}  // namespace gatae
