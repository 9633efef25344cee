#include "nial/model.hpp"

#include <cmath>
#include <sstream>

namespace nial {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string conv_blocks_to_string(const std::vector<ConvBlockConfig>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const ConvBlockConfig& b = blocks[i];
    if (i) out += ',';
    out += std::to_string(b.out_channels) + ':' + std::to_string(b.kernel) + ':' +
           std::to_string(b.stride) + ':' + std::to_string(b.padding) + ':' +
           std::to_string(b.pool_window) + ':' + std::to_string(b.pool_stride);
  }
  return out;
}

std::vector<ConvBlockConfig> conv_blocks_from_string(const std::string& text) {
  std::vector<ConvBlockConfig> blocks;
  if (text.empty()) return blocks;
  for (const std::string& part : split(text, ',')) {
    const std::vector<std::string> f = split(part, ':');
    if (f.size() != 6) {
      throw ConfigError("conv block '" + part +
                        "' wants 6 fields out:kernel:stride:padding:pool_window:pool_stride");
    }
    ConvBlockConfig b;
    b.out_channels = parse_int(f[0], "conv block out_channels");
    b.kernel = parse_int(f[1], "conv block kernel");
    b.stride = parse_int(f[2], "conv block stride");
    b.padding = parse_int(f[3], "conv block padding");
    b.pool_window = parse_int(f[4], "conv block pool_window");
    b.pool_stride = parse_int(f[5], "conv block pool_stride");
    blocks.push_back(b);
  }
  return blocks;
}

const std::uint64_t kDropoutStream = 0x6472;  // dropout draws come from their own stream

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

Index ModelConfig::seq_len() const {
  Index t = input_len;
  for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
    const ConvBlockConfig& b = conv_blocks[i];
    const std::string stage = "conv block " + std::to_string(i);
    if (b.out_channels < 1 || b.kernel < 1 || b.stride < 1 || b.padding < 0 ||
        b.pool_window < 1 || b.pool_stride < 1) {
      throw BuildError(stage + ": all fields must be positive (padding may be 0)");
    }
    if (b.kernel > t + 2 * b.padding) {
      throw BuildError(stage + ": kernel " + std::to_string(b.kernel) +
                       " exceeds padded length " + std::to_string(t + 2 * b.padding));
    }
    t = (t + 2 * b.padding - b.kernel) / b.stride + 1;
    if (b.pool_window > t) {
      throw BuildError(stage + ": pool window " + std::to_string(b.pool_window) +
                       " exceeds sequence length " + std::to_string(t));
    }
    t = (t - b.pool_window) / b.pool_stride + 1;
  }
  return t;
}

void ModelConfig::validate() const {
  if (input_len < 1) throw BuildError("input_len must be >= 1");
  if (d_model < 1 || n_heads < 1) throw BuildError("d_model and n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    throw BuildError("d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                     std::to_string(n_heads));
  }
  if (ff_dim < 1) throw BuildError("ff_dim must be >= 1");
  if (n_attn_layers < 0) throw BuildError("n_attn_layers must be >= 0");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw BuildError("dropout_p must be in [0,1)");
  if (head_hidden < 1) throw BuildError("head_hidden must be >= 1");
  if (n_classes < 1) throw BuildError("n_classes must be >= 1");
  seq_len();
}

std::string ModelConfig::to_kv() const {
  std::ostringstream out;
  out << "model.input_len = " << input_len << '\n'
      << "model.conv_blocks = " << conv_blocks_to_string(conv_blocks) << '\n'
      << "model.d_model = " << d_model << '\n'
      << "model.n_heads = " << n_heads << '\n'
      << "model.ff_dim = " << ff_dim << '\n'
      << "model.n_attn_layers = " << n_attn_layers << '\n'
      << "model.dropout_p = " << format_double(dropout_p) << '\n'
      << "model.head_hidden = " << head_hidden << '\n'
      << "model.n_classes = " << n_classes << '\n';
  return out.str();
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv) {
  ModelConfig cfg;
  cfg.input_len = kv.get_int("model.input_len", cfg.input_len);
  if (kv.has("model.conv_blocks")) {
    cfg.conv_blocks = conv_blocks_from_string(kv.get_string("model.conv_blocks", ""));
  }
  cfg.d_model = kv.get_int("model.d_model", cfg.d_model);
  cfg.n_heads = kv.get_int("model.n_heads", cfg.n_heads);
  cfg.ff_dim = kv.get_int("model.ff_dim", cfg.ff_dim);
  cfg.n_attn_layers = kv.get_int("model.n_attn_layers", cfg.n_attn_layers);
  cfg.dropout_p = kv.get_double("model.dropout_p", cfg.dropout_p);
  cfg.head_hidden = kv.get_int("model.head_hidden", cfg.head_hidden);
  cfg.n_classes = kv.get_int("model.n_classes", cfg.n_classes);
  return cfg;
}

// ---------------------------------------------------------------------------
// positional encoding
// ---------------------------------------------------------------------------

Tensor positional_encoding(Index t_len, Index d_model) {
  Tensor pe = Tensor::zeros({t_len, d_model});
  for (Index t = 0; t < t_len; ++t) {
    for (Index i = 0; i < d_model; i += 2) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * rate;
      pe.values()[t * d_model + i] = std::sin(angle);
      if (i + 1 < d_model) pe.values()[t * d_model + i + 1] = std::cos(angle);
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// NialModel
// ---------------------------------------------------------------------------

NialModel::NialModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), dropout_rng_(mix_seed(seed, kDropoutStream)) {
  config_.validate();
  Rng init(seed);

  auto he_normal = [&](Tensor& t, Index fan_in) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = init.gaussian(0.0, std_dev);
  };
  auto uniform_fan = [&](Tensor& t, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) t.values()[i] = init.uniform(-bound, bound);
  };

  Index channels = 1;
  for (std::size_t i = 0; i < config_.conv_blocks.size(); ++i) {
    const ConvBlockConfig& b = config_.conv_blocks[i];
    const std::string base = "conv" + std::to_string(i);
    Tensor w = register_param(base + ".w", {b.out_channels, channels, b.kernel});
    he_normal(w, channels * b.kernel);
    register_param(base + ".b", {b.out_channels});
    channels = b.out_channels;
  }

  Tensor proj_w = register_param("proj.w", {channels, config_.d_model});
  he_normal(proj_w, channels);
  register_param("proj.b", {config_.d_model});

  for (Index l = 0; l < config_.n_attn_layers; ++l) {
    const std::string base = "layer" + std::to_string(l);
    register_param(base + ".ln1.gamma", {config_.d_model}).values() = 1.0;
    register_param(base + ".ln1.beta", {config_.d_model});
    for (const char* head : {".q", ".k", ".v", ".o"}) {
      Tensor w = register_param(base + head + ".w", {config_.d_model, config_.d_model});
      uniform_fan(w, config_.d_model);
      register_param(base + head + ".b", {config_.d_model});
    }
    register_param(base + ".ln2.gamma", {config_.d_model}).values() = 1.0;
    register_param(base + ".ln2.beta", {config_.d_model});
    Tensor ff1 = register_param(base + ".ff1.w", {config_.d_model, config_.ff_dim});
    he_normal(ff1, config_.d_model);
    register_param(base + ".ff1.b", {config_.ff_dim});
    Tensor ff2 = register_param(base + ".ff2.w", {config_.ff_dim, config_.d_model});
    he_normal(ff2, config_.ff_dim);
    register_param(base + ".ff2.b", {config_.d_model});
  }

  Tensor head_w = register_param("head.h.w", {config_.d_model, config_.head_hidden});
  he_normal(head_w, config_.d_model);
  register_param("head.h.b", {config_.head_hidden});
  Tensor out_w = register_param("head.out.w", {config_.head_hidden, config_.n_classes});
  he_normal(out_w, config_.head_hidden);
  register_param("head.out.b", {config_.n_classes});

  last_attention_.resize(static_cast<std::size_t>(config_.n_attn_layers));
}

Tensor NialModel::register_param(const std::string& name, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  params_.emplace_back(name, t);
  return t;
}

Tensor NialModel::parameter(const std::string& name) const {
  for (const auto& [n, t] : params_) {
    if (n == name) return t;
  }
  throw ContractError("unknown parameter: " + name);
}

void NialModel::zero_grad() {
  for (auto& [name, t] : params_) t.zero_grad();
}

Tensor NialModel::dropped(const Tensor& x) {
  return dropout(x, config_.dropout_p, dropout_rng_, training_);
}

Tensor NialModel::self_attention(const Tensor& x, Index layer) {
  if (layer < 0 || layer >= config_.n_attn_layers) {
    throw ContractError("self_attention: layer " + std::to_string(layer) + " out of range");
  }
  if (x.rank() != 3 || x.dim(2) != config_.d_model) {
    throw DimensionError("self_attention: want [B x T x " + std::to_string(config_.d_model) +
                         "], got " + shape_str(x.shape()));
  }
  const Index b = x.dim(0), t = x.dim(1);
  const Index heads = config_.n_heads;
  const Index dk = config_.d_model / heads;
  const std::string base = "layer" + std::to_string(layer);

  auto heads_view = [&](const char* which) {
    Tensor y = linear(x, parameter(base + which + ".w"), parameter(base + which + ".b"));
    return transpose(reshape(y, {b, t, heads, dk}), 1, 2);  // [B x H x T x dk]
  };
  Tensor q = heads_view(".q");
  Tensor k = heads_view(".k");
  Tensor v = heads_view(".v");

  Tensor scores = scale(bmm(q, transpose(k, 2, 3)), 1.0 / std::sqrt(static_cast<double>(dk)));
  Tensor attn = softmax(scores, 3);  // [B x H x T x T]
  last_attention_[static_cast<std::size_t>(layer)] = attn;

  Tensor ctx = reshape(transpose(bmm(attn, v), 1, 2), {b, t, config_.d_model});
  return linear(ctx, parameter(base + ".o.w"), parameter(base + ".o.b"));
}

const Tensor& NialModel::attention_weights(Index layer) const {
  if (layer < 0 || layer >= config_.n_attn_layers) {
    throw ContractError("attention_weights: layer " + std::to_string(layer) + " out of range");
  }
  const Tensor& t = last_attention_[static_cast<std::size_t>(layer)];
  if (!t.defined()) {
    throw ContractError("attention_weights: no forward pass has run through layer " +
                        std::to_string(layer));
  }
  return t;
}

Tensor NialModel::attention_block(const Tensor& x) {
  if (x.rank() != 3 || x.dim(2) != config_.d_model) {
    throw DimensionError("attention_block: want [B x T x " + std::to_string(config_.d_model) +
                         "], got " + shape_str(x.shape()));
  }
  Tensor h = add_bcast(x, positional_encoding(x.dim(1), config_.d_model));
  for (Index l = 0; l < config_.n_attn_layers; ++l) {
    const std::string base = "layer" + std::to_string(l);
    Tensor normed1 = layernorm(h, parameter(base + ".ln1.gamma"), parameter(base + ".ln1.beta"));
    h = add(h, dropped(self_attention(normed1, l)));
    Tensor normed2 = layernorm(h, parameter(base + ".ln2.gamma"), parameter(base + ".ln2.beta"));
    Tensor ff = linear(relu(linear(normed2, parameter(base + ".ff1.w"),
                                   parameter(base + ".ff1.b"))),
                       parameter(base + ".ff2.w"), parameter(base + ".ff2.b"));
    h = add(h, dropped(ff));
  }
  return h;
}

Tensor NialModel::forward(const Tensor& batch) {
  if (batch.rank() != 3 || batch.dim(1) != 1 || batch.dim(2) != config_.input_len) {
    throw DimensionError("forward: want [B x 1 x " + std::to_string(config_.input_len) +
                         "], got " + shape_str(batch.shape()));
  }
  Tensor x = batch;
  for (std::size_t i = 0; i < config_.conv_blocks.size(); ++i) {
    const ConvBlockConfig& blk = config_.conv_blocks[i];
    const std::string base = "conv" + std::to_string(i);
    x = conv1d(x, parameter(base + ".w"), parameter(base + ".b"), blk.stride, blk.padding);
    x = relu(x);
    x = maxpool1d(x, blk.pool_window, blk.pool_stride);
  }
  x = transpose(x, 1, 2);  // [B x T x C]
  x = linear(x, parameter("proj.w"), parameter("proj.b"));
  x = attention_block(x);
  x = mean_axis(x, 1);  // [B x d_model]
  x = relu(linear(x, parameter("head.h.w"), parameter("head.h.b")));
  x = dropped(x);
  return linear(x, parameter("head.out.w"), parameter("head.out.b"));
}

}  // namespace nial
