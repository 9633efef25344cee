#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nial/kv_config.hpp"
#include "nial/ops.hpp"

namespace nial {

struct ConvBlockConfig {
  Index out_channels = 32;
  Index kernel = 5;
  Index stride = 1;
  Index padding = 2;
  Index pool_window = 2;
  Index pool_stride = 2;

  bool operator==(const ConvBlockConfig&) const = default;
};

// Architecture description. Defaults are the reference MIT-BIH configuration;
// the binary task uses the same with n_classes = 1 (single-logit head).
struct ModelConfig {
  Index input_len = 187;
  std::vector<ConvBlockConfig> conv_blocks = {{32, 5, 1, 2, 2, 2}, {64, 5, 1, 2, 2, 2}};
  Index d_model = 64;
  Index n_heads = 4;
  Index ff_dim = 128;
  Index n_attn_layers = 2;
  double dropout_p = 0.1;
  Index head_hidden = 64;
  Index n_classes = 5;

  // BuildError naming the offending stage when a shape invariant fails.
  void validate() const;

  // Sequence length after the conv/pool stack (validates on the way).
  Index seq_len() const;

  // Canonical key-value text; from_kv(to_kv()) == *this and the byte form is
  // stable, so it can serve as the checkpoint config snapshot.
  std::string to_kv() const;
  static ModelConfig from_kv(const KvConfig& kv);

  bool operator==(const ModelConfig&) const = default;
};

// Sinusoidal position table [t_len x d_model]:
// pe(t, 2i) = sin(t / 10000^(2i/d)), pe(t, 2i+1) = cos(t / 10000^(2i/d)).
Tensor positional_encoding(Index t_len, Index d_model);

// The assembled network: conv/pool stack, pre-norm residual attention layers
// over the downsampled sequence, mean pooling, classifier head emitting raw
// logits ([B x n_classes], or [B x 1] for the binary task).
class NialModel {
 public:
  NialModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  void set_training(bool flag) { training_ = flag; }
  bool training() const { return training_; }

  // Parameters in registration order; names are unique and stable across
  // save/load. The Tensor handles share storage with the model.
  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  Tensor parameter(const std::string& name) const;
  void zero_grad();

  // batch [B x 1 x input_len] -> logits [B x n_classes]
  Tensor forward(const Tensor& batch);

  // Positional encoding once, then every attention layer; x [B x T x d_model].
  Tensor attention_block(const Tensor& x);

  // One multi-head self-attention sublayer applied directly to x (no norm, no
  // residual); captures the attention weights for attention_weights().
  Tensor self_attention(const Tensor& x, Index layer);

  // [B x n_heads x T x T], row-stochastic; from the most recent forward or
  // self_attention call through that layer.
  const Tensor& attention_weights(Index layer) const;

  void save(const std::string& path) const;
  static NialModel load(const std::string& path);

 private:
  Tensor register_param(const std::string& name, Shape shape);
  Tensor dropped(const Tensor& x);

  ModelConfig config_;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<Tensor> last_attention_;
  Rng dropout_rng_;
  bool training_ = false;
};

}  // namespace nial
