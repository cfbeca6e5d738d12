#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "lidkit/common.hpp"
#include "lidkit/linalg.hpp"
#include "lidkit/rng.hpp"

namespace lidkit {

struct LinearLayer {
  Matrix weights;  // out_dim x in_dim
  Vec bias;        // out_dim

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }
};

// Affine chain with ReLU between layers; the final layer emits raw values.
// relu_on_output is set when the chain is used as a shared trunk, so the
// representation handed to the heads is itself rectified.
// An Mlp with no layers acts as the identity (used for trunkless models).
struct Mlp {
  std::vector<LinearLayer> layers;
  bool relu_on_output = false;

  std::size_t in_dim() const {
    return layers.empty() ? 0 : layers.front().in_dim();
  }
  std::size_t out_dim() const {
    return layers.empty() ? 0 : layers.back().out_dim();
  }
};

inline void validate(const Mlp& m) {
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
    if (m.layers[l].out_dim() != m.layers[l + 1].in_dim())
      fail_input("mlp: layer ", l, " out dim ", m.layers[l].out_dim(),
                 " != layer ", l + 1, " in dim ", m.layers[l + 1].in_dim());
}

// Glorot-uniform weights, zero biases. dims chains layer sizes, so
// {4, 8, 3} builds two layers 4->8->3.
inline Mlp init(const std::vector<std::size_t>& dims, std::uint64_t seed,
                bool relu_on_output = false) {
  if (dims.size() < 2) fail_input("mlp init: need at least 2 dims, got ",
                                  dims.size());
  for (std::size_t d : dims)
    if (d == 0) fail_input("mlp init: zero layer size");
  Mlp m;
  m.relu_on_output = relu_on_output;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    LinearLayer layer;
    layer.weights = Matrix(dims[l + 1], dims[l]);
    layer.bias.assign(dims[l + 1], 0.0);
    double bound = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
    for (double& w : layer.weights.a) w = rng.uniform(-bound, bound);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

// Everything forward() computed, kept for the backward pass:
// post[0] is the input batch, pre[l] the affine output of layer l,
// post[l+1] its activation (or the raw values for the final layer).
struct Activations {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

inline Activations forward(const Mlp& m, const Matrix& x) {
  if (!m.layers.empty() && x.cols != m.in_dim())
    fail_input("mlp forward: input dim ", x.cols, " != expected ", m.in_dim());
  Activations acts;
  acts.post.push_back(x);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const LinearLayer& layer = m.layers[l];
    const Matrix& in = acts.post.back();
    Matrix z = matmul_nt(in, layer.weights);
    for (std::size_t r = 0; r < z.rows; ++r)
      for (std::size_t c = 0; c < z.cols; ++c) z(r, c) += layer.bias[c];
    acts.pre.push_back(z);
    bool rectify = (l + 1 < m.layers.size()) || m.relu_on_output;
    if (rectify)
      for (double& v : z.a) v = v > 0.0 ? v : 0.0;  // ReLU, subgradient 0 at 0
    acts.post.push_back(std::move(z));
  }
  return acts;
}

struct LayerGrad {
  Matrix d_weights;
  Vec d_bias;
};

using GradientBundle = std::vector<LayerGrad>;

struct BackwardResult {
  GradientBundle grads;      // one entry per layer, shape-congruent
  Matrix input_grad;         // gradient wrt the input batch
};

// Exact reverse-mode gradients of the scalar loss whose gradient wrt the
// Mlp output is output_grad. Sums over the batch; any 1/n or weight
// factors must already be folded into output_grad.
inline BackwardResult backward(const Mlp& m, const Activations& acts,
                               const Matrix& output_grad) {
  if (acts.post.size() != m.layers.size() + 1)
    fail_input("mlp backward: activations do not match model depth");
  const Matrix& out = acts.post.back();
  if (output_grad.rows != out.rows || output_grad.cols != out.cols)
    fail_input("mlp backward: output grad is ", output_grad.rows, "x",
               output_grad.cols, ", expected ", out.rows, "x", out.cols);
  BackwardResult res;
  res.grads.resize(m.layers.size());
  Matrix g = output_grad;
  for (std::size_t li = m.layers.size(); li-- > 0;) {
    const LinearLayer& layer = m.layers[li];
    bool rectified = (li + 1 < m.layers.size()) || m.relu_on_output;
    if (rectified) {
      const Matrix& z = acts.pre[li];
      for (std::size_t i = 0; i < g.a.size(); ++i)
        if (z.a[i] <= 0.0) g.a[i] = 0.0;
    }
    const Matrix& in = acts.post[li];
    LayerGrad& lg = res.grads[li];
    lg.d_weights = matmul_tn(g, in);         // out_dim x in_dim
    lg.d_bias.assign(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) lg.d_bias[c] += g(r, c);
    g = matmul(g, layer.weights);            // gradient wrt layer input
  }
  res.input_grad = std::move(g);
  return res;
}

// Numerically stable softmax (max subtraction). Errors on NaN input.
inline Vec softmax(const Vec& logits) {
  if (logits.empty()) fail_input("softmax: empty logits");
  double mx = logits[0];
  for (double v : logits) {
    if (std::isnan(v)) fail_numeric("softmax: NaN logit");
    if (v > mx) mx = v;
  }
  Vec p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    double mx = logits(r, 0);
    for (std::size_t c = 0; c < logits.cols; ++c) {
      double v = logits(r, c);
      if (std::isnan(v)) fail_numeric("softmax: NaN logit at row ", r);
      if (v > mx) mx = v;
    }
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) {
      double e = std::exp(logits(r, c) - mx);
      p(r, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < logits.cols; ++c) p(r, c) /= z;
  }
  return p;
}

// Flat parameter order: per layer, weights row-major then bias. This order
// is shared by the optimizer, checkpoints, and the checkpoint file format.
inline std::size_t param_count(const Mlp& m) {
  std::size_t n = 0;
  for (const auto& l : m.layers) n += l.weights.a.size() + l.bias.size();
  return n;
}

inline void append_params(const Mlp& m, Vec& out) {
  for (const auto& l : m.layers) {
    out.insert(out.end(), l.weights.a.begin(), l.weights.a.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
}

inline void append_grads(const GradientBundle& g, Vec& out) {
  for (const auto& l : g) {
    out.insert(out.end(), l.d_weights.a.begin(), l.d_weights.a.end());
    out.insert(out.end(), l.d_bias.begin(), l.d_bias.end());
  }
}

inline void read_params(Mlp& m, const Vec& flat, std::size_t& cursor) {
  for (auto& l : m.layers) {
    if (cursor + l.weights.a.size() + l.bias.size() > flat.size())
      fail_input("mlp: parameter vector too short");
    for (double& w : l.weights.a) w = flat[cursor++];
    for (double& b : l.bias) b = flat[cursor++];
  }
}

}  // namespace lidkit
