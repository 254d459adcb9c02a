// Copyright 2026 The viplab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "viplab/encoder.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <stdexcept>

#include "viplab/errors.h"

namespace viplab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'I', 'P', 'E', 'N', 'C', '1', '\n'};

std::vector<std::size_t> layer_dims(const EncoderConfig& c) {
  std::vector<std::size_t> dims{c.input_dim};
  dims.insert(dims.end(), c.hidden_widths.begin(), c.hidden_widths.end());
  dims.push_back(c.output_dim);
  return dims;
}

std::vector<grad::Parameter> zero_params(const EncoderConfig& c) {
  std::vector<grad::Parameter> params;
  const auto dims = layer_dims(c);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    params.push_back({prefix + ".weight",
                      grad::Tensor::zeros({dims[l + 1], dims[l]})});
    params.push_back({prefix + ".bias", grad::Tensor::zeros({dims[l + 1]})});
  }
  return params;
}

}  // namespace

const char* to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void EncoderConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("encoder dims must be >= 1");
  }
  for (std::size_t w : hidden_widths) {
    if (w < 1) throw std::invalid_argument("hidden widths must be >= 1");
  }
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"input_dim", c.input_dim},
                     {"hidden_widths", c.hidden_widths},
                     {"output_dim", c.output_dim},
                     {"activation", to_string(c.activation)},
                     {"init_seed", c.init_seed}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
}

Encoder Encoder::zeros(const EncoderConfig& config) {
  config.validate();
  Encoder e;
  e.config_ = config;
  e.params_ = zero_params(config);
  return e;
}

Encoder Encoder::init(const EncoderConfig& config) {
  Encoder e = zeros(config);
  Rng rng(config.init_seed);
  for (std::size_t l = 0; l < e.num_layers(); ++l) {
    grad::Tensor& w = e.params_[2 * l].value;
    const double fan_out = static_cast<double>(w.shape[0]);
    const double fan_in = static_cast<double>(w.shape[1]);
    const double stddev = config.activation == Activation::kRelu
                              ? std::sqrt(2.0 / fan_in)
                              : std::sqrt(2.0 / (fan_in + fan_out));
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : w.data) v = dist(rng);
  }
  return e;
}

Encoder Encoder::identity(std::size_t dim) {
  EncoderConfig c;
  c.input_dim = dim;
  c.hidden_widths = {};
  c.output_dim = dim;
  Encoder e = zeros(c);
  for (std::size_t i = 0; i < dim; ++i) e.params_[0].value.data[i * dim + i] = 1.0;
  return e;
}

std::size_t Encoder::num_weights() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void Encoder::check_input(std::size_t n) const {
  if (n != config_.input_dim) {
    throw std::invalid_argument("encoder: observation has " +
                                std::to_string(n) + " dims, encoder expects " +
                                std::to_string(config_.input_dim));
  }
}

void Encoder::embed_into(std::span<const double> obs,
                         std::span<double> out) const {
  check_input(obs.size());
  if (out.size() != config_.output_dim) {
    throw std::invalid_argument("encoder: output buffer has wrong size");
  }
  std::vector<double> cur(obs.begin(), obs.end());
  std::vector<double> next;
  const std::size_t layers = num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const grad::Tensor& w = params_[2 * l].value;
    const grad::Tensor& b = params_[2 * l + 1].value;
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    next.assign(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = &w.data[i * cols];
      double acc = 0.0;
      for (std::size_t j = 0; j < cols; ++j) acc += row[j] * cur[j];
      double v = acc + b.data[i];
      if (l + 1 < layers) {
        v = config_.activation == Activation::kRelu ? (v > 0.0 ? v : 0.0)
                                                    : std::tanh(v);
      }
      next[i] = v;
    }
    cur.swap(next);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

std::vector<double> Encoder::embed(std::span<const double> obs) const {
  std::vector<double> out(config_.output_dim);
  embed_into(obs, out);
  return out;
}

Matrix Encoder::embed_batch(const Matrix& obs, Exec exec) const {
  check_input(obs.cols);
  Matrix out(obs.rows, config_.output_dim);
  const auto n = static_cast<std::int64_t>(obs.rows);
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) embed_into(obs.row(i), out.row(i));
  } else {
    for (std::int64_t i = 0; i < n; ++i) embed_into(obs.row(i), out.row(i));
  }
  return out;
}

void Encoder::backprop_batch(
    const Matrix& x,
    const std::function<void(std::size_t, std::span<const double>,
                             std::span<double>)>& grad_out,
    std::vector<std::vector<double>>& grads) const {
  check_input(x.cols);
  if (grads.size() != params_.size()) {
    throw std::invalid_argument("backprop_batch: gradient count mismatch");
  }
  const std::size_t layers = num_layers();
  const std::size_t batch = x.rows;
  const bool relu = config_.activation == Activation::kRelu;
  // acts[l] is the input to layer l; acts[layers] the output.
  std::vector<Matrix> acts;
  acts.reserve(layers + 1);
  acts.push_back(x);
  for (std::size_t l = 0; l < layers; ++l) {
    const grad::Tensor& w = params_[2 * l].value;
    const grad::Tensor& b = params_[2 * l + 1].value;
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    const Matrix& in = acts.back();
    Matrix out(batch, rows);
    // Row-outer so each weight row is reused across the batch from cache.
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = &w.data[i * cols];
      for (std::size_t e = 0; e < batch; ++e) {
        const double* h = &in.data[e * cols];
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * h[j];
        double v = acc + b.data[i];
        if (l + 1 < layers) v = relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
        out.data[e * rows + i] = v;
      }
    }
    acts.push_back(std::move(out));
  }

  Matrix delta(batch, config_.output_dim);
  for (std::size_t e = 0; e < batch; ++e) {
    grad_out(e, acts[layers].row(e), delta.row(e));
  }
  for (std::size_t l = layers; l-- > 0;) {
    const grad::Tensor& w = params_[2 * l].value;
    const std::size_t rows = w.shape[0], cols = w.shape[1];
    const Matrix& in = acts[l];
    std::vector<double>& dw = grads[2 * l];
    std::vector<double>& db = grads[2 * l + 1];
    for (std::size_t i = 0; i < rows; ++i) {
      double* drow = &dw[i * cols];
      for (std::size_t e = 0; e < batch; ++e) {
        const double g = delta.data[e * rows + i];
        if (g == 0.0) continue;
        db[i] += g;
        const double* h = &in.data[e * cols];
        for (std::size_t j = 0; j < cols; ++j) drow[j] += g * h[j];
      }
    }
    if (l == 0) break;
    Matrix prev(batch, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = &w.data[i * cols];
      for (std::size_t e = 0; e < batch; ++e) {
        const double g = delta.data[e * rows + i];
        if (g == 0.0) continue;
        double* dh = &prev.data[e * cols];
        for (std::size_t j = 0; j < cols; ++j) dh[j] += g * row[j];
      }
    }
    for (std::size_t e = 0; e < batch; ++e) {
      double* dh = &prev.data[e * cols];
      const double* h = &in.data[e * cols];
      for (std::size_t j = 0; j < cols; ++j) {
        dh[j] *= relu ? (h[j] > 0.0 ? 1.0 : 0.0) : 1.0 - h[j] * h[j];
      }
    }
    delta = std::move(prev);
  }
}

Encoder::Bound Encoder::bind(grad::Tape& tape) const {
  Bound b;
  b.params.reserve(params_.size());
  for (const auto& p : params_) b.params.push_back(tape.leaf(p.value, true));
  return b;
}

grad::Var Encoder::forward(const Bound& bound, grad::Tape& tape,
                           std::span<const double> obs) const {
  check_input(obs.size());
  grad::Var h = tape.constant(obs);
  const std::size_t layers = num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    h = grad::add(grad::matvec(bound.params[2 * l], h), bound.params[2 * l + 1]);
    if (l + 1 < layers) {
      h = config_.activation == Activation::kRelu ? grad::relu(h)
                                                  : grad::tanh(h);
    }
  }
  return h;
}

std::vector<std::vector<double>> Encoder::gradients(
    const Bound& bound, const grad::Tape& tape) const {
  std::vector<std::vector<double>> grads;
  grads.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& g = tape.grad(bound.params[i]);
    if (g.empty()) {
      grads.emplace_back(params_[i].value.size(), 0.0);
    } else {
      grads.push_back(g);
    }
  }
  return grads;
}

// --- persistence -------------------------------------------------------------

void save_encoder(const Encoder& encoder, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = encoder.config();
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < encoder.num_layers(); ++l) {
    const auto& w = encoder.parameters()[2 * l].value;
    layers.push_back({w.shape[0], w.shape[1]});
  }
  header["layers"] = layers;
  header["blob_bytes"] = encoder.num_weights() * sizeof(double);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : encoder.parameters()) {
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) {
    throw FormatError(FormatErrorCode::kIo, "write failed: " + path.string());
  }
}

Encoder load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError(FormatErrorCode::kIo, "cannot open " + path.string());
  }
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(FormatErrorCode::kBadMagic, path.string());
  }
  std::size_t pos = sizeof(kMagic);
  std::uint32_t len = 0;
  if (bytes.size() < pos + sizeof(len)) {
    throw FormatError(FormatErrorCode::kTruncated, "missing header length");
  }
  std::memcpy(&len, bytes.data() + pos, sizeof(len));
  pos += sizeof(len);
  if (bytes.size() < pos + len) {
    throw FormatError(FormatErrorCode::kTruncated, "header cut short");
  }
  nlohmann::json header;
  EncoderConfig config;
  std::size_t blob_bytes = 0;
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, len));
    config = header.at("config").get<EncoderConfig>();
    config.validate();
    blob_bytes = header.at("blob_bytes").get<std::size_t>();
    for (const auto& l : header.at("layers")) {
      shapes.emplace_back(l.at(0).get<std::size_t>(), l.at(1).get<std::size_t>());
    }
  } catch (const std::exception& e) {
    throw FormatError(FormatErrorCode::kBadHeader, e.what());
  }
  pos += len;

  Encoder encoder = Encoder::zeros(config);
  const std::size_t expected = encoder.num_weights() * sizeof(double);
  bool shapes_ok = shapes.size() == encoder.num_layers();
  for (std::size_t l = 0; shapes_ok && l < shapes.size(); ++l) {
    const auto& w = encoder.parameters()[2 * l].value;
    shapes_ok = shapes[l].first == w.shape[0] && shapes[l].second == w.shape[1];
  }
  if (!shapes_ok || blob_bytes != expected) {
    throw FormatError(FormatErrorCode::kSizeMismatch,
                      "header declares " + std::to_string(blob_bytes) +
                          " blob bytes, config implies " +
                          std::to_string(expected));
  }
  const std::size_t remaining = bytes.size() - pos;
  if (remaining < blob_bytes) {
    throw FormatError(FormatErrorCode::kTruncated,
                      "blob has " + std::to_string(remaining) + " of " +
                          std::to_string(blob_bytes) + " bytes");
  }
  if (remaining > blob_bytes) {
    throw FormatError(FormatErrorCode::kSizeMismatch,
                      std::to_string(remaining - blob_bytes) +
                          " trailing bytes after blob");
  }
  for (auto& p : encoder.parameters()) {
    const std::size_t n = p.value.size() * sizeof(double);
    std::memcpy(p.value.data.data(), bytes.data() + pos, n);
    pos += n;
  }
  return encoder;
}

}  // namespace viplab
