#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lcnr/errors.hpp"

namespace lcnr::ad {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape))
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not fill shape " +
                       shape_str(shape));
  }

  static Tensor zeros(Shape s) {
    const std::size_t n = shape_size(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }
  static Tensor full(Shape s, double v) {
    const std::size_t n = shape_size(s);
    return Tensor(std::move(s), std::vector<double>(n, v));
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }
  double item() const {
    if (!is_scalar()) throw ShapeError("item() on non-scalar tensor of shape " + shape_str(shape));
    return data[0];
  }
};

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
}

enum class Padding { valid, same };

// ---------------------------------------------------------------------------
// Raw kernels. The graph ops below and the tape-free inference path both call
// these, so the two paths produce bit-identical values.
namespace kernel {

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// out[b,n] = sum_m a[b,m] * w[m,n]
inline Tensor matmul(const Tensor& a, const Tensor& w) {
  if (a.rank() != 2 || w.rank() != 2 || a.shape[1] != w.shape[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape) + " and " + shape_str(w.shape));
  const std::size_t B = a.shape[0], M = a.shape[1], N = w.shape[1];
  Tensor out = Tensor::zeros({B, N});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t m = 0; m < M; ++m) {
      const double av = a.data[b * M + m];
      if (av == 0.0) continue;
      const double* wrow = &w.data[m * N];
      double* orow = &out.data[b * N];
      for (std::size_t n = 0; n < N; ++n) orow[n] += av * wrow[n];
    }
  return out;
}

struct ConvPlan {
  std::size_t batch, in_channels, in_width, out_channels, kernel, out_width;
  long stride, pad_left;
};

inline ConvPlan conv1d_plan(const Shape& x, const Shape& w, long stride, Padding pad) {
  if (x.size() != 3 || w.size() != 3)
    throw ShapeError("conv1d: need input [B,C,W] and weight [O,C,K], got " + shape_str(x) + " and " + shape_str(w));
  if (x[1] != w[1])
    throw ShapeError("conv1d: channel mismatch between input " + shape_str(x) + " and weight " + shape_str(w));
  if (stride < 1) throw ShapeError("conv1d: stride must be >= 1");
  ConvPlan p{};
  p.batch = x[0];
  p.in_channels = x[1];
  p.in_width = x[2];
  p.out_channels = w[0];
  p.kernel = w[2];
  p.stride = stride;
  const std::size_t s = static_cast<std::size_t>(stride);
  if (pad == Padding::valid) {
    if (p.in_width < p.kernel)
      throw ShapeError("conv1d: input " + shape_str(x) + " narrower than kernel " + shape_str(w));
    p.out_width = (p.in_width - p.kernel) / s + 1;
    p.pad_left = 0;
  } else {
    p.out_width = (p.in_width + s - 1) / s;
    const long total =
        std::max<long>(0, static_cast<long>((p.out_width - 1) * s + p.kernel) - static_cast<long>(p.in_width));
    p.pad_left = total / 2;
  }
  return p;
}

inline Tensor conv1d(const Tensor& x, const Tensor& w, long stride, Padding pad) {
  const ConvPlan p = conv1d_plan(x.shape, w.shape, stride, pad);
  Tensor out = Tensor::zeros({p.batch, p.out_channels, p.out_width});
  for (std::size_t b = 0; b < p.batch; ++b)
    for (std::size_t co = 0; co < p.out_channels; ++co)
      for (std::size_t ow = 0; ow < p.out_width; ++ow) {
        double acc = 0.0;
        for (std::size_t ci = 0; ci < p.in_channels; ++ci)
          for (std::size_t k = 0; k < p.kernel; ++k) {
            const long iw = static_cast<long>(ow) * p.stride + static_cast<long>(k) - p.pad_left;
            if (iw < 0 || iw >= static_cast<long>(p.in_width)) continue;
            acc += x.data[(b * p.in_channels + ci) * p.in_width + static_cast<std::size_t>(iw)] *
                   w.data[(co * p.in_channels + ci) * p.kernel + k];
          }
        out.data[(b * p.out_channels + co) * p.out_width + ow] = acc;
      }
  return out;
}

// bias over the channel axis: x [B,N] + b [N], or x [B,C,W] + b [C]
inline Tensor bias_add(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1)
    throw ShapeError("bias_add: bias must be rank 1, got " + shape_str(b.shape));
  Tensor out = x;
  if (x.rank() == 2 && x.shape[1] == b.shape[0]) {
    const std::size_t B = x.shape[0], N = x.shape[1];
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t n = 0; n < N; ++n) out.data[i * N + n] += b.data[n];
    return out;
  }
  if (x.rank() == 3 && x.shape[1] == b.shape[0]) {
    const std::size_t B = x.shape[0], C = x.shape[1], W = x.shape[2];
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t w = 0; w < W; ++w) out.data[(i * C + c) * W + w] += b.data[c];
    return out;
  }
  throw ShapeError("bias_add: shapes " + shape_str(x.shape) + " and " + shape_str(b.shape) + " do not align");
}

inline Tensor relu_all(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.data) v = relu(v);
  return out;
}

}  // namespace kernel

// ---------------------------------------------------------------------------
// Reverse-mode graph

class Graph;

struct NodeRef {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
};

class Graph {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Graph&, std::size_t)> backward;  // pulls this node's grad into its parents
  };

  NodeRef input(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}});
    return NodeRef{this, nodes_.size() - 1};
  }
  NodeRef constant(Tensor value) { return input(std::move(value)); }

  NodeRef make(Tensor value, std::function<void(Graph&, std::size_t)> backward) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
    return NodeRef{this, nodes_.size() - 1};
  }

  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t node_count() const { return nodes_.size(); }

  Tensor& grad_of(std::size_t id) { return nodes_[id].grad; }

  // Zero every gradient, seed the root with 1, then sweep the tape in
  // reverse creation order (creation order is already topological).
  void backward(NodeRef root) {
    if (root.graph != this) throw ContractError("backward: node belongs to a different graph");
    if (!nodes_[root.id].value.is_scalar())
      throw ShapeError("backward: root must be scalar, got " + shape_str(nodes_[root.id].value.shape));
    for (auto& n : nodes_) {
      n.grad = Tensor::zeros(n.value.shape);
    }
    nodes_[root.id].grad.data[0] = 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this, i);
    }
  }

 private:
  std::vector<Node> nodes_;
};

inline const Tensor& NodeRef::value() const { return graph->node(id).value; }
inline const Tensor& NodeRef::grad() const { return graph->node(id).grad; }

namespace detail {
inline Graph& same_graph(NodeRef a, NodeRef b, const char* op) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw ContractError(std::string(op) + ": operands come from different graphs");
  return *a.graph;
}
}  // namespace detail

// Elementwise binary ops accept identical shapes, or a scalar on either side.
namespace detail {

enum class Broadcast { none, left_scalar, right_scalar };

inline Broadcast binary_mode(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape == b.shape) return Broadcast::none;
  if (a.is_scalar()) return Broadcast::left_scalar;
  if (b.is_scalar()) return Broadcast::right_scalar;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " + shape_str(b.shape) + " differ");
  }

template <class Fwd, class Back>
NodeRef binary_op(const char* name, NodeRef a, NodeRef b, Fwd fwd, Back back) {
  Graph& g = same_graph(a, b, name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = binary_mode(name, av, bv);
  const Tensor& big = mode == Broadcast::left_scalar ? bv : av;
  Tensor out = Tensor::zeros(big.shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = mode == Broadcast::left_scalar ? av.data[0] : av.data[i];
    const double y = mode == Broadcast::right_scalar ? bv.data[0] : bv.data[i];
    out.data[i] = fwd(x, y);
  }
  const std::size_t aid = a.id, bid = b.id;
  return g.make(std::move(out), [aid, bid, mode, back](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& av2 = gr.node(aid).value;
    const Tensor& bv2 = gr.node(bid).value;
    Tensor& ga = gr.grad_of(aid);
    Tensor& gb = gr.grad_of(bid);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const double x = mode == Broadcast::left_scalar ? av2.data[0] : av2.data[i];
      const double y = mode == Broadcast::right_scalar ? bv2.data[0] : bv2.data[i];
      const auto [dx, dy] = back(x, y);
      const double gi = go.data[i];
      ga.data[mode == Broadcast::left_scalar ? 0 : i] += gi * dx;
      gb.data[mode == Broadcast::right_scalar ? 0 : i] += gi * dy;
    }
  });
}

template <class Fwd, class Back>
NodeRef unary_op(NodeRef a, Fwd fwd, Back back) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  Tensor out = Tensor::zeros(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = fwd(av.data[i]);
  const std::size_t aid = a.id;
  return g.make(std::move(out), [aid, back](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& av2 = gr.node(aid).value;
    Tensor& ga = gr.grad_of(aid);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i] * back(av2.data[i]);
  });
}

}  // namespace detail

inline NodeRef add(NodeRef a, NodeRef b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

inline NodeRef sub(NodeRef a, NodeRef b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

inline NodeRef mul(NodeRef a, NodeRef b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

inline NodeRef div(NodeRef a, NodeRef b) {
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double x, double y) { return std::pair<double, double>{1.0 / y, -x / (y * y)}; });
}

// scale * x + shift with compile-time constants
inline NodeRef affine(NodeRef a, double scale, double shift) {
  return detail::unary_op(
      a, [scale, shift](double x) { return scale * x + shift; }, [scale](double) { return scale; });
}

inline NodeRef neg(NodeRef a) { return affine(a, -1.0, 0.0); }

// gradient conventions at kinks and boundaries: abs' = 0 at 0, relu' = 0 at 0,
// sqrt' = 0 at 0, pow' = 0 at base 0 unless the exponent is exactly 1
inline NodeRef abs(NodeRef a) {
  return detail::unary_op(
      a, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline NodeRef relu(NodeRef a) {
  return detail::unary_op(
      a, [](double x) { return kernel::relu(x); }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline NodeRef sqrt(NodeRef a) {
  return detail::unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double x) { return x > 0.0 ? 0.5 / std::sqrt(x) : 0.0; });
}

inline NodeRef exp(NodeRef a) {
  return detail::unary_op(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

inline NodeRef pow(NodeRef a, double exponent) {
  return detail::unary_op(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x) {
        if (x == 0.0) return exponent == 1.0 ? 1.0 : 0.0;
        return exponent * std::pow(x, exponent - 1.0);
      });
}

inline NodeRef matmul(NodeRef a, NodeRef w) {
  Graph& g = detail::same_graph(a, w, "matmul");
  Tensor out = kernel::matmul(a.value(), w.value());
  const std::size_t aid = a.id, wid = w.id;
  return g.make(std::move(out), [aid, wid](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& av = gr.node(aid).value;
    const Tensor& wv = gr.node(wid).value;
    Tensor& ga = gr.grad_of(aid);
    Tensor& gw = gr.grad_of(wid);
    const std::size_t B = av.shape[0], M = av.shape[1], N = wv.shape[1];
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t n = 0; n < N; ++n) {
        const double gv = go.data[b * N + n];
        if (gv == 0.0) continue;
        for (std::size_t m = 0; m < M; ++m) {
          ga.data[b * M + m] += gv * wv.data[m * N + n];
          gw.data[m * N + n] += gv * av.data[b * M + m];
        }
      }
  });
}

inline NodeRef bias_add(NodeRef x, NodeRef b) {
  Graph& g = detail::same_graph(x, b, "bias_add");
  Tensor out = kernel::bias_add(x.value(), b.value());
  const std::size_t xid = x.id, bid = b.id;
  return g.make(std::move(out), [xid, bid](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& xv = gr.node(xid).value;
    const Tensor& bv = gr.node(bid).value;
    Tensor& gx = gr.grad_of(xid);
    Tensor& gb = gr.grad_of(bid);
    for (std::size_t i = 0; i < go.size(); ++i) gx.data[i] += go.data[i];
    if (xv.rank() == 2) {
      const std::size_t B = xv.shape[0], N = xv.shape[1];
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t n = 0; n < N; ++n) gb.data[n] += go.data[i * N + n];
    } else {
      const std::size_t B = xv.shape[0], C = bv.shape[0], W = xv.shape[2];
      for (std::size_t i = 0; i < B; ++i)
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t w = 0; w < W; ++w) gb.data[c] += go.data[(i * C + c) * W + w];
    }
  });
}

inline NodeRef conv1d(NodeRef x, NodeRef w, long stride, Padding pad) {
  Graph& g = detail::same_graph(x, w, "conv1d");
  Tensor out = kernel::conv1d(x.value(), w.value(), stride, pad);
  const std::size_t xid = x.id, wid = w.id;
  return g.make(std::move(out), [xid, wid, stride, pad](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    const Tensor& xv = gr.node(xid).value;
    const Tensor& wv = gr.node(wid).value;
    Tensor& gx = gr.grad_of(xid);
    Tensor& gw = gr.grad_of(wid);
    const kernel::ConvPlan p = kernel::conv1d_plan(xv.shape, wv.shape, stride, pad);
    for (std::size_t b = 0; b < p.batch; ++b)
      for (std::size_t co = 0; co < p.out_channels; ++co)
        for (std::size_t ow = 0; ow < p.out_width; ++ow) {
          const double gv = go.data[(b * p.out_channels + co) * p.out_width + ow];
          if (gv == 0.0) continue;
          for (std::size_t ci = 0; ci < p.in_channels; ++ci)
            for (std::size_t k = 0; k < p.kernel; ++k) {
              const long iw = static_cast<long>(ow) * p.stride + static_cast<long>(k) - p.pad_left;
              if (iw < 0 || iw >= static_cast<long>(p.in_width)) continue;
              const std::size_t xi = (b * p.in_channels + ci) * p.in_width + static_cast<std::size_t>(iw);
              const std::size_t wi = (co * p.in_channels + ci) * p.kernel + k;
              gx.data[xi] += gv * wv.data[wi];
              gw.data[wi] += gv * xv.data[xi];
            }
        }
  });
}

inline NodeRef reshape(NodeRef a, Shape new_shape) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  if (shape_size(new_shape) != av.size())
    throw ShapeError("reshape: cannot view " + shape_str(av.shape) + " as " + shape_str(new_shape));
  Tensor out(new_shape, av.data);
  const std::size_t aid = a.id;
  return g.make(std::move(out), [aid](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    Tensor& ga = gr.grad_of(aid);
    for (std::size_t i = 0; i < go.size(); ++i) ga.data[i] += go.data[i];
  });
}

// [B, C, W] or [B, F] -> [B, C*W]
inline NodeRef flatten(NodeRef a) {
  const Shape& s = a.value().shape;
  if (s.empty()) throw ShapeError("flatten: rank-0 tensor");
  std::size_t rest = 1;
  for (std::size_t i = 1; i < s.size(); ++i) rest *= s[i];
  return reshape(a, {s[0], rest});
}

inline NodeRef sum_all(NodeRef a) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  double total = 0.0;
  for (double v : av.data) total += v;
  const std::size_t aid = a.id;
  return g.make(Tensor::scalar(total), [aid](Graph& gr, std::size_t self) {
    const double gv = gr.node(self).grad.data[0];
    Tensor& ga = gr.grad_of(aid);
    for (double& v : ga.data) v += gv;
  });
}

inline NodeRef mean_all(NodeRef a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean_all: empty tensor");
  return affine(sum_all(a), 1.0 / static_cast<double>(n), 0.0);
}

// row sums: [B, F] -> [B]
inline NodeRef sum_axis1(NodeRef a) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  if (av.rank() != 2) throw ShapeError("sum_axis1: need rank-2 input, got " + shape_str(av.shape));
  const std::size_t B = av.shape[0], F = av.shape[1];
  Tensor out = Tensor::zeros({B});
  for (std::size_t b = 0; b < B; ++b) {
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) acc += av.data[b * F + f];
    out.data[b] = acc;
  }
  const std::size_t aid = a.id;
  return g.make(std::move(out), [aid, F](Graph& gr, std::size_t self) {
    const Tensor& go = gr.node(self).grad;
    Tensor& ga = gr.grad_of(aid);
    for (std::size_t b = 0; b < go.size(); ++b)
      for (std::size_t f = 0; f < F; ++f) ga.data[b * F + f] += go.data[b];
  });
}

}  // namespace lcnr::ad
