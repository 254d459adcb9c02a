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
// The embedding map: a configurable MLP from observation vectors to K-dim
// embeddings, with a tape-bound forward pass for training and a plain,
// thread-safe forward pass for frozen use.

#ifndef VIPLAB_ENCODER_H_
#define VIPLAB_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "viplab/gradcore.h"
#include "viplab/matrix.h"
#include "viplab/parallel.h"

namespace viplab {

enum class Activation { kRelu, kTanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct EncoderConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden_widths = {64, 64};
  std::size_t output_dim = 2;
  Activation activation = Activation::kRelu;
  std::uint64_t init_seed = 0;

  void validate() const;  // throws std::invalid_argument
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

class Encoder {
 public:
  // Kaiming fan-in scaling for relu, Xavier for tanh; zero biases.
  static Encoder init(const EncoderConfig& config);
  // All weights and biases zero: every input embeds to the origin.
  static Encoder zeros(const EncoderConfig& config);
  // phi(x) = x. A single square linear layer with W = I.
  static Encoder identity(std::size_t dim);

  const EncoderConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t output_dim() const { return config_.output_dim; }
  std::size_t num_layers() const { return params_.size() / 2; }

  std::vector<grad::Parameter>& parameters() { return params_; }
  const std::vector<grad::Parameter>& parameters() const { return params_; }
  std::size_t num_weights() const;

  // Thread-safe for a frozen encoder. Throws std::invalid_argument when
  // obs.size() != input_dim.
  std::vector<double> embed(std::span<const double> obs) const;
  void embed_into(std::span<const double> obs, std::span<double> out) const;

  // Row i of the result is embed(obs.row(i)).
  Matrix embed_batch(const Matrix& obs, Exec exec = Exec::kParallel) const;

  // Batched forward over the rows of x followed by a manual backward pass:
  // grad_out(row, y, dy) supplies dL/dy for each output row and the weight
  // gradients are added to grads (one vector per parameter, in parameters()
  // order). Returns nothing; grads must already be sized.
  void backprop_batch(
      const Matrix& x,
      const std::function<void(std::size_t row, std::span<const double> y,
                               std::span<double> dy)>& grad_out,
      std::vector<std::vector<double>>& grads) const;

  // Tape binding for training.
  struct Bound {
    std::vector<grad::Var> params;
  };
  Bound bind(grad::Tape& tape) const;
  grad::Var forward(const Bound& bound, grad::Tape& tape,
                    std::span<const double> obs) const;
  // Per-parameter gradients after tape.backward(); zero-filled where the
  // tape never reached a parameter.
  std::vector<std::vector<double>> gradients(const Bound& bound,
                                             const grad::Tape& tape) const;

 private:
  void check_input(std::size_t n) const;

  EncoderConfig config_;
  std::vector<grad::Parameter> params_;  // W0, b0, W1, b1, ...
};

// Checkpoint format (little endian):
//   "VIPENC1\n" | u32 header_len | JSON header | f64 blob
// The header carries the config, the layer shapes and blob_bytes; the blob
// holds W0, b0, W1, b1, ... row-major.
void save_encoder(const Encoder& encoder, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace viplab

#endif  // VIPLAB_ENCODER_H_
