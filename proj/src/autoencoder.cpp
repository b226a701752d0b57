#include "gatae/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gatae/error.hpp"
#include "gatae/io.hpp"
#include "json.hpp"

namespace gatae {

ModelConfig ModelConfig::for_input(std::size_t input_dim) {
  ModelConfig c;
  c.input_dim = input_dim;
  c.enc1_dim = std::max<std::size_t>(1, input_dim / 2);
  c.enc2_dim = std::max<std::size_t>(1, input_dim / 2);
  c.latent_dim = std::max<std::size_t>(1, input_dim / 2);
  c.dec_hidden_dim = std::max<std::size_t>(1, input_dim * 3 / 4);
  return c;
}

void ModelConfig::validate() const {
  if (input_dim == 0 || enc1_dim == 0 || enc2_dim == 0 || latent_dim == 0 || dec_hidden_dim == 0) {
    throw ArgumentError("model: all layer widths must be >= 1");
  }
  if (latent_dim >= input_dim) {
    throw ArgumentError("model: latent_dim (" + std::to_string(latent_dim) +
                        ") must be smaller than input_dim (" + std::to_string(input_dim) + ")");
  }
  if (heads < 1) throw ArgumentError("model: heads must be >= 1");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) {
    throw ArgumentError("model: leaky_slope must lie in (0, 1)");
  }
}

namespace {

AffineLayer glorot_affine(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  AffineLayer layer{Matrix(out, in), Vector(out, 0.0)};
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : layer.weight.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = (2.0 * u - 1.0) * limit;
  }
  return layer;
}

Matrix affine_forward(const AffineLayer& layer, const Matrix& x) {
  Matrix y = matmul_transposed(x, layer.weight);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += layer.bias[j];
  }
  return y;
}

// Accumulates weight/bias gradients into `grad` and returns dL/dx.
Matrix affine_backward(const AffineLayer& layer, const Matrix& x, const Matrix& g_y,
                       AffineLayer& grad) {
  grad.weight = transposed_matmul(g_y, x);
  grad.bias.assign(layer.bias.size(), 0.0);
  for (std::size_t i = 0; i < g_y.rows(); ++i) {
    auto r = g_y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) grad.bias[j] += r[j];
  }
  return matmul(g_y, layer.weight);
}

void apply(Activation a, Matrix& m) {
  if (a == Activation::relu)
    for (double& v : m.data()) v = relu(v);
}

void check_input(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g) {
  if (x.cols() != m.config.input_dim) {
    throw ShapeError("encode: features have " + std::to_string(x.cols()) +
                     " columns but the model expects " + std::to_string(m.config.input_dim));
  }
  if (x.rows() != g.num_nodes) {
    throw ShapeError("encode: " + std::to_string(x.rows()) + " feature rows for a graph of " +
                     std::to_string(g.num_nodes) + " nodes");
  }
}

}  // namespace

GatAutoencoder GatAutoencoder::init(const ModelConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  GatAutoencoder m;
  m.config = config;
  m.enc1 = GatLayer::glorot(config.input_dim, config.enc1_dim, config.heads, config.combine,
                            config.encoder_activation, config.leaky_slope, rng);
  m.enc2 = GatLayer::glorot(m.enc1.output_dim(), config.enc2_dim, config.heads, config.combine,
                            config.encoder_activation, config.leaky_slope, rng);
  m.latent = glorot_affine(m.enc2.output_dim(), config.latent_dim, rng);
  m.dec_hidden = glorot_affine(config.latent_dim, config.dec_hidden_dim, rng);
  m.dec_out = glorot_affine(config.dec_hidden_dim, config.input_dim, rng);
  return m;
}

GatAutoencoder GatAutoencoder::zeros_like() const {
  GatAutoencoder z = *this;
  for (auto& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  return z;
}

std::vector<GatAutoencoder::Tensor> GatAutoencoder::tensors() {
  std::vector<Tensor> out;
  const auto add_gat = [&](const std::string& prefix, GatLayer& layer) {
    for (std::size_t k = 0; k < layer.heads; ++k) {
      out.push_back({prefix + ".weight[" + std::to_string(k) + "]", layer.weight[k].data()});
    }
    for (std::size_t k = 0; k < layer.heads; ++k) {
      out.push_back({prefix + ".attention[" + std::to_string(k) + "]", layer.attention[k]});
    }
  };
  const auto add_affine = [&](const std::string& prefix, AffineLayer& layer) {
    out.push_back({prefix + ".weight", layer.weight.data()});
    out.push_back({prefix + ".bias", layer.bias});
  };
  add_gat("enc1", enc1);
  add_gat("enc2", enc2);
  add_affine("latent", latent);
  add_affine("dec_hidden", dec_hidden);
  add_affine("dec_out", dec_out);
  return out;
}

std::vector<GatAutoencoder::ConstTensor> GatAutoencoder::tensors() const {
  std::vector<ConstTensor> out;
  for (auto& t : const_cast<GatAutoencoder*>(this)->tensors()) out.push_back({t.name, t.values});
  return out;
}

std::size_t GatAutoencoder::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.values.size();
  return n;
}

std::uint64_t GatAutoencoder::fingerprint() const {
  const auto bytes = encode_checkpoint(*this);
  return io::fnv1a(bytes.data(), bytes.size());
}

Matrix encode(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g) {
  check_input(m, x, g);
  const GatForward f1 = gat_forward(m.enc1, x, g);
  const GatForward f2 = gat_forward(m.enc2, f1.out, g);
  return affine_forward(m.latent, f2.out);
}

Matrix decode(const GatAutoencoder& m, const Matrix& z) {
  if (z.cols() != m.config.latent_dim) {
    throw ShapeError("decode: latent has " + std::to_string(z.cols()) +
                     " columns but the model expects " + std::to_string(m.config.latent_dim));
  }
  Matrix hidden = affine_forward(m.dec_hidden, z);
  apply(m.config.decoder_activation, hidden);
  return affine_forward(m.dec_out, hidden);
}

double reconstruction_loss(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g) {
  return mse(decode(m, encode(m, x, g)), x);
}

LossAndGradients loss_and_gradients(const GatAutoencoder& m, const Matrix& x,
                                    const SimilarityGraph& g) {
  check_input(m, x, g);
  const GatForward f1 = gat_forward(m.enc1, x, g);
  const GatForward f2 = gat_forward(m.enc2, f1.out, g);
  const Matrix z = affine_forward(m.latent, f2.out);
  const Matrix hidden_pre = affine_forward(m.dec_hidden, z);
  Matrix hidden = hidden_pre;
  apply(m.config.decoder_activation, hidden);
  const Matrix recon = affine_forward(m.dec_out, hidden);

  LossAndGradients out;
  out.loss = mse(recon, x);
  out.gradients = m;

  Matrix g_recon(recon.rows(), recon.cols());
  const double scale = 2.0 / static_cast<double>(recon.size());
  for (std::size_t i = 0; i < recon.size(); ++i) {
    g_recon.data()[i] = scale * (recon.data()[i] - x.data()[i]);
  }
  GatAutoencoder& gm = out.gradients;
  Matrix g_hidden = affine_backward(m.dec_out, hidden, g_recon, gm.dec_out);
  if (m.config.decoder_activation == Activation::relu) {
    for (std::size_t i = 0; i < g_hidden.size(); ++i) {
      if (!(hidden_pre.data()[i] > 0.0)) g_hidden.data()[i] = 0.0;
    }
  }
  const Matrix g_z = affine_backward(m.dec_hidden, z, g_hidden, gm.dec_hidden);
  const Matrix g_f2 = affine_backward(m.latent, f2.out, g_z, gm.latent);
  GatGradients g2 = gat_backward(m.enc2, f2.cache, g_f2);
  GatGradients g1 = gat_backward(m.enc1, f1.cache, g2.input);
  gm.enc2.weight = std::move(g2.weight);
  gm.enc2.attention = std::move(g2.attention);
  gm.enc1.weight = std::move(g1.weight);
  gm.enc1.attention = std::move(g1.attention);
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ArgumentError("train: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("train: learning_rate must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ArgumentError("train: Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ArgumentError("train: Adam epsilon must be > 0");
  if (log_every < 1) throw ArgumentError("train: log_every must be >= 1");
}

bool is_logged_epoch(std::size_t epoch, std::size_t log_every) {
  return epoch == 2 || (log_every > 0 && epoch % log_every == 0);
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state,
               const TrainConfig& cfg) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter tensors but " +
                     std::to_string(grads.size()) + " gradient tensors");
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size()) {
      throw ShapeError("adam_step: tensor " + std::to_string(i) + " size mismatch");
    }
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double g = grads[i][j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      params[i][j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

TrainResult train(GatAutoencoder m, const Matrix& x, const SimilarityGraph& g,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  check_input(m, x, g);
  TrainResult result;
  AdamState state;
  const auto record = [&](std::size_t epoch, double loss) {
    if (!std::isfinite(loss)) {
      throw NumericalError("train: loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss);
  };
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    LossAndGradients lg = loss_and_gradients(m, x, g);
    // The forward pass of this epoch measures the model produced by the previous update.
    if (epoch > 1) record(epoch - 1, lg.loss);
    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> grads;
    for (auto& t : m.tensors()) params.push_back(t.values);
    for (const auto& t : std::as_const(lg.gradients).tensors()) grads.push_back(t.values);
    adam_step(params, grads, state, cfg);
    for (const auto& t : std::as_const(m).tensors()) {
      if (!all_finite(t.values)) {
        throw NumericalError("train: parameter " + t.name + " became non-finite at epoch " +
                             std::to_string(epoch));
      }
    }
  }
  record(cfg.epochs, reconstruction_loss(m, x, g));
  result.model = std::move(m);
  return result;
}

GradCheckReport grad_check(const GatAutoencoder& m, const Matrix& x, const SimilarityGraph& g,
                           double eps, double tol) {
  const LossAndGradients analytic = loss_and_gradients(m, x, g);
  const auto grads = analytic.gradients.tensors();
  GatAutoencoder probe = m;
  auto params = probe.tensors();
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    double tensor_worst = 0.0;
    for (std::size_t i = 0; i < params[t].values.size(); ++i) {
      double& p = params[t].values[i];
      const double saved = p;
      p = saved + eps;
      const double up = reconstruction_loss(probe, x, g);
      p = saved - eps;
      const double down = reconstruction_loss(probe, x, g);
      p = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[t].values[i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      ++report.checked;
      tensor_worst = std::max(tensor_worst, rel);
      if (report.worst_tensor.empty() || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_tensor = params[t].name;
        report.worst_index = i;
      }
    }
    report.per_tensor.emplace_back(params[t].name, tensor_worst);
  }
  report.passed = report.max_relative_error < tol;
  return report;
}

namespace {
constexpr std::string_view kCheckpointMagic = "GATAE1\n";

nlohmann::json header_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"enc1_dim", c.enc1_dim},
          {"enc2_dim", c.enc2_dim},
          {"latent_dim", c.latent_dim},
          {"dec_hidden_dim", c.dec_hidden_dim},
          {"heads", c.heads},
          {"combine", to_string(c.combine)},
          {"slope", c.leaky_slope},
          {"encoder_activation", to_string(c.encoder_activation)},
          {"decoder_activation", to_string(c.decoder_activation)},
          {"seed", c.seed}};
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const GatAutoencoder& m) {
  io::Bytes out;
  io::put_string(out, kCheckpointMagic);
  io::put_string(out, header_json(m.config).dump());
  out.push_back('\n');
  for (const auto& t : m.tensors())
    for (double v : t.values) io::put_f64_le(out, v);
  return out;
}

GatAutoencoder decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      !std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin())) {
    throw ParseError("checkpoint: bad magic (expected \"GATAE1\\n\")");
  }
  const auto header_begin = bytes.begin() + static_cast<std::ptrdiff_t>(kCheckpointMagic.size());
  const auto header_end = std::find(header_begin, bytes.end(), '\n');
  if (header_end == bytes.end()) throw ParseError("checkpoint: unterminated JSON header");
  ModelConfig c;
  try {
    const auto h = nlohmann::json::parse(header_begin, header_end);
    c.input_dim = h.at("input_dim").get<std::size_t>();
    c.enc1_dim = h.at("enc1_dim").get<std::size_t>();
    c.enc2_dim = h.at("enc2_dim").get<std::size_t>();
    c.latent_dim = h.at("latent_dim").get<std::size_t>();
    c.dec_hidden_dim = h.at("dec_hidden_dim").get<std::size_t>();
    c.heads = h.at("heads").get<std::size_t>();
    c.combine = parse_head_combine(h.at("combine").get<std::string>());
    c.leaky_slope = h.at("slope").get<double>();
    c.encoder_activation = parse_activation(h.at("encoder_activation").get<std::string>());
    c.decoder_activation = parse_activation(h.at("decoder_activation").get<std::string>());
    c.seed = h.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: bad header: ") + e.what());
  }
  GatAutoencoder m = GatAutoencoder::init(c);
  const std::size_t offset = static_cast<std::size_t>(header_end - bytes.begin()) + 1;
  const std::size_t expected = offset + 8 * m.parameter_count();
  if (bytes.size() != expected) {
    throw ParseError("checkpoint: expected " + std::to_string(expected) + " bytes, found " +
                     std::to_string(bytes.size()));
  }
  std::size_t pos = offset;
  for (auto& t : m.tensors()) {
    for (double& v : t.values) {
      v = io::get_f64_le(bytes.data() + pos);
      pos += 8;
    }
    if (!all_finite(t.values)) throw ParseError("checkpoint: tensor " + t.name + " is not finite");
  }
  return m;
}

void save_checkpoint(const GatAutoencoder& m, const std::filesystem::path& path) {
  io::atomic_write(path, encode_checkpoint(m));
}

GatAutoencoder load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

std::vector<std::string> LatentIndex::labels() const {
  std::set<std::string> s;
  for (const auto& item : items) s.insert(item.listing);
  return {s.begin(), s.end()};
}

std::vector<std::size_t> LatentIndex::rows_of(const std::string& label) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].listing == label) rows.push_back(i);
  return rows;
}

LatentIndex build_latent_index(const GatAutoencoder& m, const FeatureSet& fs,
                               const SimilarityGraph& g) {
  validate(fs);
  LatentIndex index;
  index.features = fs.matrix;
  index.latents = encode(m, fs.matrix, g);
  index.items = fs.items;
  index.graph = g;
  index.model_fingerprint = io::hex64(m.fingerprint());
  return index;
}

void save_latent_index(const LatentIndex& index, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_features({index.features, index.items}, dir / "features.fvec");
  save_features({index.latents, index.items}, dir / "latents.fvec");
  io::atomic_write(dir / "graph.txt", index.graph.dump());
  std::ostringstream meta;
  meta << "model " << index.model_fingerprint << "\n"
       << "graph " << to_string(index.graph.kind) << "\n"
       << "k " << index.graph.k << "\n";
  io::atomic_write(dir / "index.meta", meta.str());
}

LatentIndex load_latent_index(const std::filesystem::path& dir) {
  LatentIndex index;
  const FeatureSet features = load_features(dir / "features.fvec");
  const FeatureSet latents = load_features(dir / "latents.fvec");
  if (features.items != latents.items) {
    throw ParseError("index: features and latents manifests disagree");
  }
  index.features = features.matrix;
  index.latents = latents.matrix;
  index.items = features.items;

  std::istringstream meta(io::read_text_file(dir / "index.meta"));
  std::string key, value;
  while (meta >> key >> value) {
    if (key == "model") index.model_fingerprint = value;
    else if (key == "graph") index.graph.kind = parse_graph_kind(value);
    else if (key == "k") index.graph.k = std::stoul(value);
  }
  if (index.model_fingerprint.empty()) throw ParseError("index.meta: missing model fingerprint");

  std::istringstream graph(io::read_text_file(dir / "graph.txt"));
  std::string word;
  if (!(graph >> word >> index.graph.num_nodes) || word != "nodes") {
    throw ParseError("graph.txt: expected 'nodes N' header");
  }
  Edge e;
  while (graph >> e.src >> e.dst) index.graph.edges.push_back(e);
  index.graph.validate();
  if (index.graph.num_nodes != index.items.size()) {
    throw ParseError("index: graph has " + std::to_string(index.graph.num_nodes) +
                     " nodes for " + std::to_string(index.items.size()) + " items");
  }
  return index;
}

}  // namespace gatae
