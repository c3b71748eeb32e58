#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lcnr/errors.hpp"
#include "lcnr/rng.hpp"
#include "lcnr/tensor.hpp"

namespace lcnr::nn {

enum class LayerKind { conv1d, dense, relu, flatten };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0;       // channels (conv) or features (dense)
  std::size_t out = 0;      // channels (conv) or features (dense)
  std::size_t kernel = 0;   // conv only
  long stride = 1;          // conv only
  ad::Padding padding = ad::Padding::same;  // conv only

  static LayerSpec conv(std::size_t in_ch, std::size_t out_ch, std::size_t k, ad::Padding pad = ad::Padding::same,
                        long stride = 1) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.in = in_ch;
    s.out = out_ch;
    s.kernel = k;
    s.stride = stride;
    s.padding = pad;
    return s;
  }
  static LayerSpec dense(std::size_t in_f, std::size_t out_f) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in_f;
    s.out = out_f;
    return s;
  }
  static LayerSpec activation() { return LayerSpec{}; }
  static LayerSpec flat() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }

  std::string to_string() const {
    switch (kind) {
      case LayerKind::relu: return "relu";
      case LayerKind::flatten: return "flatten";
      case LayerKind::dense: return "dense:" + std::to_string(in) + ":" + std::to_string(out);
      case LayerKind::conv1d:
        return "conv1d:" + std::to_string(in) + ":" + std::to_string(out) + ":" + std::to_string(kernel) + ":" +
               (padding == ad::Padding::same ? "same" : "valid") +
               (stride != 1 ? ":" + std::to_string(stride) : "");
    }
    throw ContractError("unknown layer kind");
  }
};

// Feature-vector shape as it flows between layers.
struct FlowShape {
  bool spatial = false;      // true while [C, W], false once [F]
  std::size_t channels = 0;  // or features when !spatial
  std::size_t width = 0;
};

struct Architecture {
  std::vector<LayerSpec> layers;
  std::size_t input_features = 8;

  std::string to_string() const {
    std::string out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (i) out += ",";
      out += layers[i].to_string();
    }
    return out;
  }

  static Architecture parse(const std::string& text, std::size_t input_features = 8) {
    Architecture arch;
    arch.input_features = input_features;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t comma = text.find(',', pos);
      if (comma == std::string::npos) comma = text.size();
      const std::string item = text.substr(pos, comma - pos);
      pos = comma + 1;
      if (item.empty()) {
        if (text.empty()) break;
        throw ConfigError("architecture: empty layer entry in '" + text + "'");
      }
      arch.layers.push_back(parse_layer(item));
      if (comma == text.size()) break;
    }
    if (arch.layers.empty()) throw ConfigError("architecture: no layers in '" + text + "'");
    arch.validate();
    return arch;
  }

  // Walks the shape through every layer; throws ShapeError on any mismatch.
  std::vector<FlowShape> trace_shapes() const {
    std::vector<FlowShape> out;
    FlowShape cur;
    const bool starts_conv = !layers.empty() && layers.front().kind == LayerKind::conv1d;
    if (starts_conv) {
      cur.spatial = true;
      cur.channels = 1;
      cur.width = input_features;
    } else {
      cur.spatial = false;
      cur.channels = input_features;
    }
    for (const auto& l : layers) {
      switch (l.kind) {
        case LayerKind::relu: break;
        case LayerKind::flatten:
          if (cur.spatial) {
            cur.channels = cur.channels * cur.width;
            cur.width = 0;
            cur.spatial = false;
          }
          break;
        case LayerKind::dense:
          if (cur.spatial)
            throw ShapeError("dense layer after spatial output; add flatten first");
          if (cur.channels != l.in)
            throw ShapeError("dense layer expects " + std::to_string(l.in) + " inputs, gets " +
                             std::to_string(cur.channels));
          cur.channels = l.out;
          break;
        case LayerKind::conv1d: {
          if (!cur.spatial) throw ShapeError("conv1d layer needs a spatial input");
          if (cur.channels != l.in)
            throw ShapeError("conv1d layer expects " + std::to_string(l.in) + " channels, gets " +
                             std::to_string(cur.channels));
          const ad::kernel::ConvPlan p =
              ad::kernel::conv1d_plan({1, cur.channels, cur.width}, {l.out, l.in, l.kernel}, l.stride, l.padding);
          cur.channels = l.out;
          cur.width = p.out_width;
          break;
        }
      }
      out.push_back(cur);
    }
    return out;
  }

  void validate() const {
    const auto shapes = trace_shapes();
    const FlowShape& final = shapes.back();
    if (final.spatial || final.channels != 1)
      throw ShapeError("architecture must end in a single regression output");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
      if (l.kind == LayerKind::conv1d) n += l.out * l.in * l.kernel + l.out;
      if (l.kind == LayerKind::dense) n += l.in * l.out + l.out;
    }
    return n;
  }

 private:
  static LayerSpec parse_layer(const std::string& item) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
      std::size_t colon = item.find(':', pos);
      if (colon == std::string::npos) {
        parts.push_back(item.substr(pos));
        break;
      }
      parts.push_back(item.substr(pos, colon - pos));
      pos = colon + 1;
    }
    const auto to_n = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size() || v <= 0) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        throw ConfigError("architecture: bad number '" + s + "' in layer '" + item + "'");
      }
    };
    if (parts[0] == "relu") {
      if (parts.size() != 1) throw ConfigError("architecture: relu takes no arguments");
      return LayerSpec::activation();
    }
    if (parts[0] == "flatten") {
      if (parts.size() != 1) throw ConfigError("architecture: flatten takes no arguments");
      return LayerSpec::flat();
    }
    if (parts[0] == "dense") {
      if (parts.size() != 3) throw ConfigError("architecture: dense needs dense:IN:OUT, got '" + item + "'");
      return LayerSpec::dense(to_n(parts[1]), to_n(parts[2]));
    }
    if (parts[0] == "conv1d") {
      if (parts.size() < 5 || parts.size() > 6)
        throw ConfigError("architecture: conv1d needs conv1d:IN:OUT:K:PAD[:STRIDE], got '" + item + "'");
      ad::Padding pad;
      if (parts[4] == "same")
        pad = ad::Padding::same;
      else if (parts[4] == "valid")
        pad = ad::Padding::valid;
      else
        throw ConfigError("architecture: padding must be same|valid, got '" + parts[4] + "'");
      const long stride = parts.size() == 6 ? static_cast<long>(to_n(parts[5])) : 1;
      return LayerSpec::conv(to_n(parts[1]), to_n(parts[2]), to_n(parts[3]), pad, stride);
    }
    throw ConfigError("architecture: unknown layer '" + parts[0] + "'");
  }
};

// Eight RFS features in, one crack position out.
inline Architecture lcnr_default() {
  Architecture arch;
  arch.input_features = 8;
  arch.layers = {LayerSpec::conv(1, 32, 3), LayerSpec::activation(), LayerSpec::conv(32, 64, 3),
                 LayerSpec::activation(), LayerSpec::flat(),         LayerSpec::dense(512, 64),
                 LayerSpec::activation(), LayerSpec::dense(64, 1)};
  arch.validate();
  return arch;
}

// Plain fully connected baseline with a matching parameter budget.
inline Architecture dnn_baseline() {
  Architecture arch;
  arch.input_features = 8;
  arch.layers = {LayerSpec::dense(8, 192),   LayerSpec::activation(), LayerSpec::dense(192, 192),
                 LayerSpec::activation(), LayerSpec::dense(192, 1)};
  arch.validate();
  return arch;
}

class Model {
 public:
  explicit Model(Architecture arch) : arch_(std::move(arch)) {
    arch_.validate();
    for (const auto& l : arch_.layers) {
      if (l.kind == LayerKind::conv1d) {
        weights_.push_back(ad::Tensor::zeros({l.out, l.in, l.kernel}));
        biases_.push_back(ad::Tensor::zeros({l.out}));
      } else if (l.kind == LayerKind::dense) {
        weights_.push_back(ad::Tensor::zeros({l.in, l.out}));
        biases_.push_back(ad::Tensor::zeros({l.out}));
      } else {
        weights_.emplace_back();
        biases_.emplace_back();
      }
    }
  }

  const Architecture& architecture() const { return arch_; }

  void init_glorot(rng::Engine& engine) {
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerSpec& l = arch_.layers[i];
      if (l.kind != LayerKind::conv1d && l.kind != LayerKind::dense) continue;
      const double fan_in = l.kind == LayerKind::conv1d ? static_cast<double>(l.in * l.kernel)
                                                        : static_cast<double>(l.in);
      const double fan_out = l.kind == LayerKind::conv1d ? static_cast<double>(l.out * l.kernel)
                                                         : static_cast<double>(l.out);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : weights_[i].data) v = engine.next_uniform(-limit, limit);
      for (double& v : biases_[i].data) v = 0.0;
    }
  }

  std::vector<ad::Tensor*> parameters() {
    std::vector<ad::Tensor*> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i].size() == 0) continue;
      out.push_back(&weights_[i]);
      out.push_back(&biases_[i]);
    }
    return out;
  }
  std::vector<const ad::Tensor*> parameters() const {
    std::vector<const ad::Tensor*> out;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i].size() == 0) continue;
      out.push_back(&weights_[i]);
      out.push_back(&biases_[i]);
    }
    return out;
  }

  std::size_t parameter_count() const { return arch_.parameter_count(); }

  std::vector<double> flatten_parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const ad::Tensor* p : parameters()) out.insert(out.end(), p->data.begin(), p->data.end());
    return out;
  }

  void load_parameters(const std::vector<double>& flat) {
    std::size_t cursor = 0;
    for (ad::Tensor* p : parameters()) {
      if (cursor + p->size() > flat.size())
        throw ValidationError("parameter blob too short for architecture " + arch_.to_string());
      std::copy(flat.begin() + static_cast<long>(cursor), flat.begin() + static_cast<long>(cursor + p->size()),
                p->data.begin());
      cursor += p->size();
    }
    if (cursor != flat.size())
      throw ValidationError("parameter blob has " + std::to_string(flat.size()) + " values, architecture needs " +
                            std::to_string(cursor));
  }

  struct Bound {
    std::vector<ad::NodeRef> params;  // aligned with parameters()
    ad::NodeRef output;
  };

  // Build the differentiable forward pass; features arrive as [B, F].
  Bound bind_forward(ad::Graph& g, ad::NodeRef features) const {
    Bound bound;
    ad::NodeRef x = features;
    const bool starts_conv = arch_.layers.front().kind == LayerKind::conv1d;
    if (starts_conv) x = ad::reshape(x, {features.value().shape[0], 1, arch_.input_features});
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerSpec& l = arch_.layers[i];
      switch (l.kind) {
        case LayerKind::relu: x = ad::relu(x); break;
        case LayerKind::flatten: x = ad::flatten(x); break;
        case LayerKind::dense: {
          ad::NodeRef w = g.input(weights_[i]);
          ad::NodeRef b = g.input(biases_[i]);
          bound.params.push_back(w);
          bound.params.push_back(b);
          x = ad::bias_add(ad::matmul(x, w), b);
          break;
        }
        case LayerKind::conv1d: {
          ad::NodeRef w = g.input(weights_[i]);
          ad::NodeRef b = g.input(biases_[i]);
          bound.params.push_back(w);
          bound.params.push_back(b);
          x = ad::bias_add(ad::conv1d(x, w, l.stride, l.padding), b);
          break;
        }
      }
    }
    bound.output = x;
    return bound;
  }

  // Tape-free inference over the same kernels as the graph path.
  ad::Tensor predict(const ad::Tensor& features) const {
    if (features.rank() != 2 || features.shape[1] != arch_.input_features)
      throw ShapeError("predict: expected [B," + std::to_string(arch_.input_features) + "], got " +
                       ad::shape_str(features.shape));
    ad::Tensor x = features;
    if (arch_.layers.front().kind == LayerKind::conv1d)
      x = ad::Tensor({features.shape[0], 1, arch_.input_features}, features.data);
    for (std::size_t i = 0; i < arch_.layers.size(); ++i) {
      const LayerSpec& l = arch_.layers[i];
      switch (l.kind) {
        case LayerKind::relu: x = ad::kernel::relu_all(x); break;
        case LayerKind::flatten: {
          std::size_t rest = 1;
          for (std::size_t d = 1; d < x.rank(); ++d) rest *= x.shape[d];
          x = ad::Tensor({x.shape[0], rest}, x.data);
          break;
        }
        case LayerKind::dense: x = ad::kernel::bias_add(ad::kernel::matmul(x, weights_[i]), biases_[i]); break;
        case LayerKind::conv1d:
          x = ad::kernel::bias_add(ad::kernel::conv1d(x, weights_[i], l.stride, l.padding), biases_[i]);
          break;
      }
    }
    return x;
  }

 private:
  Architecture arch_;
  std::vector<ad::Tensor> weights_;  // empty tensor for parameterless layers
  std::vector<ad::Tensor> biases_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState(const std::vector<ad::Tensor*>& params, AdamConfig cfg) : cfg_(cfg) {
    for (const ad::Tensor* p : params) {
      m_.push_back(std::vector<double>(p->size(), 0.0));
      v_.push_back(std::vector<double>(p->size(), 0.0));
    }
  }

  // One update; grads aligned with the params vector passed at construction.
  void step(const std::vector<ad::Tensor*>& params, const std::vector<const ad::Tensor*>& grads) {
    if (params.size() != m_.size() || grads.size() != m_.size())
      throw ContractError("adam: parameter list changed size");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      ad::Tensor& p = *params[i];
      const ad::Tensor& g = *grads[i];
      if (g.size() != p.size()) throw ContractError("adam: gradient shape mismatch");
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double gj = g.data[j];
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
      }
    }
  }

  long step_count() const { return t_; }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace lcnr::nn
