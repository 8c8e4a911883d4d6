#pragma once

// Two fully connected layers on top of raw features, then unit normalization:
//
//   input (F) -> affine -> ReLU -> hidden (H, default 256) -> affine -> z (C) -> z/|z|
//
// The hidden activation is what retrieval evaluates on; the normalized C-d
// output is what the loss sees.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lindml/numeric.hpp"

namespace lindml {

struct EmbedNetShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 256;
  std::size_t output_dim = 0;  // number of training classes
};

struct DenseLayer {
  Matrix weights;  // fan_out x fan_in: one row of incoming weights per unit
  Vector bias;
  Matrix grad_weights;
  Vector grad_bias;

  DenseLayer() = default;
  DenseLayer(std::size_t fan_in, std::size_t fan_out)
      : weights(fan_out, fan_in), bias(fan_out), grad_weights(fan_out, fan_in), grad_bias(fan_out) {}

  std::size_t fan_in() const noexcept { return weights.cols(); }
  std::size_t fan_out() const noexcept { return weights.rows(); }

  /// Weight from input i to unit o.
  double weight(std::size_t i, std::size_t o) const noexcept { return weights(o, i); }

  Vector apply(const Vector& x) const {
    detail::require_same_dim(fan_in(), x.size(), "dense layer input");
    const std::size_t n_in = fan_in();
    const std::size_t n_out = fan_out();
    Vector out = bias;
    const double* w = weights.flat().data();
    for (std::size_t o = 0; o < n_out; ++o) out[o] += detail::dot(w + o * n_in, x.data(), n_in);
    return out;
  }

  // Accumulates parameter gradients; returns d(loss)/d(input) when asked for it.
  // Units with zero upstream gradient (e.g. inactive ReLUs) are skipped.
  Vector backprop(const Vector& x, const Vector& grad_out, bool want_input_grad = true) {
    const std::size_t n_in = fan_in();
    const std::size_t n_out = fan_out();
    Vector grad_in;
    if (want_input_grad) grad_in = Vector(n_in, 0.0);
    double* gw = grad_weights.flat().data();
    const double* w = weights.flat().data();
    for (std::size_t o = 0; o < n_out; ++o) {
      const double g = grad_out[o];
      if (g == 0.0) continue;
      grad_bias[o] += g;
      detail::axpy(g, x.data(), gw + o * n_in, n_in);
      if (want_input_grad) detail::axpy(g, w + o * n_in, grad_in.data(), n_in);
    }
    return grad_in;
  }
};

/// Activations recorded by forward() and consumed by backward().
struct Tape {
  Vector input;
  Vector pre_activation;  // layer1 output before ReLU
  Vector hidden;          // after ReLU
  Vector projection;      // layer2 output, pre-normalization
  Vector embedding;       // projection / |projection|
};

/// Same as Tape for a whole batch, one sample per row, plus scratch space so
/// repeated batches of one shape do not reallocate.
struct BatchWorkspace {
  Matrix input;
  Matrix hidden;  // post-ReLU; hidden > 0 marks the active units
  Matrix projection;
  Matrix embedding;

  // scratch
  Matrix w1_t, w2_t, grad_proj, grad_proj_t, grad_hidden, input_t, grad_w1_t;
};

namespace detail {

inline void fill_bias_rows(const DenseLayer& l, std::size_t n, Matrix& out) {
  out.reshape(n, l.fan_out());
  for (std::size_t r = 0; r < n; ++r) std::copy(l.bias.begin(), l.bias.end(), out.row(r).begin());
}

inline void add_column_sums(const Matrix& m, Vector& into) {
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r).data(), into.data(), m.cols());
}

}  // namespace detail

class EmbedNet {
 public:
  EmbedNet() = default;
  explicit EmbedNet(const EmbedNetShape& shape)
      : layer1_(shape.input_dim, shape.hidden_dim), layer2_(shape.hidden_dim, shape.output_dim) {}

  /// He-scaled normal weights (variance 2/fan_in), zero biases.
  static EmbedNet init_params(const EmbedNetShape& shape, std::uint64_t seed) {
    if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.output_dim == 0) {
      fail(ErrorKind::invalid_argument, "network dimensions must be positive");
    }
    EmbedNet net(shape);
    net.seed_ = seed;
    SeededRng rng(seed);
    for (DenseLayer* layer : {&net.layer1_, &net.layer2_}) {
      const double scale = std::sqrt(2.0 / static_cast<double>(layer->fan_in()));
      for (double& w : layer->weights.flat()) w = scale * rng.normal();
    }
    return net;
  }

  EmbedNetShape shape() const noexcept {
    return {layer1_.fan_in(), layer1_.fan_out(), layer2_.fan_out()};
  }
  std::size_t input_dim() const noexcept { return layer1_.fan_in(); }
  std::size_t hidden_dim() const noexcept { return layer1_.fan_out(); }
  std::size_t output_dim() const noexcept { return layer2_.fan_out(); }

  Tape forward(const Vector& input) const {
    detail::require_same_dim(input_dim(), input.size(), "network input");
    Tape t;
    t.input = input;
    t.pre_activation = layer1_.apply(input);
    t.hidden = t.pre_activation;
    for (double& h : t.hidden) h = h > 0.0 ? h : 0.0;
    t.projection = layer2_.apply(t.hidden);
    t.embedding = unit_normalize(t.projection);
    return t;
  }

  /// Batched forward pass over the rows of ws.input; fills the other activations.
  /// Throws degenerate (naming the row) if a projection is too small to normalize.
  void forward_batch(BatchWorkspace& ws) const {
    detail::require_same_dim(input_dim(), ws.input.cols(), "network input");
    const std::size_t n = ws.input.rows();
    layer1_.weights.transpose_into(ws.w1_t);
    layer2_.weights.transpose_into(ws.w2_t);
    detail::fill_bias_rows(layer1_, n, ws.hidden);
    detail::matmul_add(ws.input.flat().data(), ws.w1_t.flat().data(), ws.hidden.flat().data(), n,
                       input_dim(), hidden_dim());
    for (double& h : ws.hidden.flat()) h = h > 0.0 ? h : 0.0;
    detail::fill_bias_rows(layer2_, n, ws.projection);
    detail::matmul_add(ws.hidden.flat().data(), ws.w2_t.flat().data(),
                       ws.projection.flat().data(), n, hidden_dim(), output_dim());
    ws.embedding = ws.projection;
    for (std::size_t r = 0; r < n; ++r) {
      auto row = ws.embedding.row(r);
      const double len = std::sqrt(detail::dot(row.data(), row.data(), row.size()));
      if (!(len >= kNormalizationFloor)) {
        fail(ErrorKind::degenerate, "row " + std::to_string(r) + ": projection norm " +
                                        std::to_string(len) +
                                        " is below the normalization floor (dead activation)");
      }
      for (double& v : row) v /= len;
    }
  }

  BatchWorkspace forward_batch(const Matrix& inputs) const {
    BatchWorkspace ws;
    ws.input = inputs;
    forward_batch(ws);
    return ws;
  }

  /// Batched backward(): accumulates the gradients of sum_r loss_r, where
  /// row r of `upstream` is d(loss_r)/d(embedding_r).
  void backward_batch(BatchWorkspace& ws, const Matrix& upstream) {
    const std::size_t n = ws.input.rows();
    if (ws.input.cols() != input_dim() || ws.projection.rows() != n ||
        ws.projection.cols() != output_dim()) {
      fail(ErrorKind::dimension_mismatch, "backward: tape does not match the network");
    }
    if (upstream.rows() != n || upstream.cols() != output_dim()) {
      fail(ErrorKind::dimension_mismatch, "backward: upstream gradient shape");
    }
    Matrix& gp = ws.grad_proj;
    gp.reshape(n, output_dim());
    for (std::size_t r = 0; r < n; ++r) {
      const auto z = ws.projection.row(r);
      const auto g = upstream.row(r);
      const double inv = 1.0 / std::sqrt(detail::dot(z.data(), z.data(), z.size()));
      const double xg = detail::dot(z.data(), g.data(), z.size()) * inv;
      for (std::size_t i = 0; i < z.size(); ++i) gp(r, i) = (g[i] - z[i] * inv * xg) * inv;
    }
    detail::add_column_sums(gp, layer2_.grad_bias);
    gp.transpose_into(ws.grad_proj_t);
    detail::matmul_add(ws.grad_proj_t.flat().data(), ws.hidden.flat().data(),
                       layer2_.grad_weights.flat().data(), output_dim(), n, hidden_dim());

    Matrix& gh = ws.grad_hidden;
    gh.reshape(n, hidden_dim());
    gh.fill(0.0);
    detail::matmul_add(gp.flat().data(), layer2_.weights.flat().data(), gh.flat().data(), n,
                       output_dim(), hidden_dim());
    const auto h = ws.hidden.flat();
    const auto g = gh.flat();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (h[i] <= 0.0) g[i] = 0.0;
    }
    detail::add_column_sums(gh, layer1_.grad_bias);
    // X^T * grad_hidden (input x hidden) avoids transposing the wide matrix
    ws.input.transpose_into(ws.input_t);
    ws.grad_w1_t.reshape(input_dim(), hidden_dim());
    ws.grad_w1_t.fill(0.0);
    detail::matmul_add(ws.input_t.flat().data(), gh.flat().data(), ws.grad_w1_t.flat().data(),
                       input_dim(), n, hidden_dim());
    for (std::size_t i = 0; i < input_dim(); ++i) {
      for (std::size_t o = 0; o < hidden_dim(); ++o) {
        layer1_.grad_weights(o, i) += ws.grad_w1_t(i, o);
      }
    }
  }

  /// Unit-normalized hidden activation, used for retrieval.
  Vector embed_hidden(const Vector& input) const {
    detail::require_same_dim(input_dim(), input.size(), "network input");
    Vector h = layer1_.apply(input);
    for (double& v : h) v = v > 0.0 ? v : 0.0;
    return unit_normalize(h);
  }

  Vector embed_output(const Vector& input) const { return forward(input).embedding; }

  /// Accumulates parameter gradients given d(loss)/d(embedding).
  void backward(const Tape& tape, const Vector& upstream) {
    if (tape.input.size() != input_dim() || tape.projection.size() != output_dim()) {
      fail(ErrorKind::dimension_mismatch, "backward: tape does not match the network");
    }
    detail::require_same_dim(output_dim(), upstream.size(), "backward upstream gradient");
    const Vector grad_proj = apply_unit_normalize_jacobian(tape.projection, upstream);
    Vector grad_hidden = layer2_.backprop(tape.hidden, grad_proj);
    for (std::size_t h = 0; h < grad_hidden.size(); ++h) {
      if (tape.pre_activation[h] <= 0.0) grad_hidden[h] = 0.0;
    }
    layer1_.backprop(tape.input, grad_hidden, false);
  }

  void zero_grad() noexcept {
    for (DenseLayer* layer : {&layer1_, &layer2_}) {
      layer->grad_weights.fill(0.0);
      for (double& g : layer->grad_bias) g = 0.0;
    }
  }

  /// Parameter blocks in fixed order: W1, b1, W2, b2.
  std::array<std::span<double>, 4> parameters() noexcept {
    return {layer1_.weights.flat(), layer1_.bias.span(), layer2_.weights.flat(),
            layer2_.bias.span()};
  }
  std::array<std::span<const double>, 4> parameters() const noexcept {
    return {layer1_.weights.flat(), layer1_.bias.span(), layer2_.weights.flat(),
            layer2_.bias.span()};
  }
  std::array<std::span<const double>, 4> gradients() const noexcept {
    return {layer1_.grad_weights.flat(), layer1_.grad_bias.span(), layer2_.grad_weights.flat(),
            layer2_.grad_bias.span()};
  }

  const DenseLayer& layer1() const noexcept { return layer1_; }
  const DenseLayer& layer2() const noexcept { return layer2_; }
  DenseLayer& layer1() noexcept { return layer1_; }
  DenseLayer& layer2() noexcept { return layer2_; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  std::uint64_t content_hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto block : parameters()) h = fnv1a(block, h);
    return h;
  }

  friend nlohmann::json to_json(const EmbedNet& net);
  friend EmbedNet embed_net_from_json(const nlohmann::json& j);

 private:
  DenseLayer layer1_;
  DenseLayer layer2_;
  std::uint64_t seed_ = 0;
  std::uint64_t step_ = 0;
};

namespace detail {

// On disk: shape [fan_in, fan_out] and weights row-major in that shape.
inline nlohmann::json layer_json(const DenseLayer& l) {
  std::vector<double> w;
  w.reserve(l.fan_in() * l.fan_out());
  for (std::size_t i = 0; i < l.fan_in(); ++i) {
    for (std::size_t o = 0; o < l.fan_out(); ++o) w.push_back(l.weight(i, o));
  }
  return {{"shape", {l.fan_in(), l.fan_out()}}, {"weights", std::move(w)}, {"bias", l.bias.values()}};
}

inline DenseLayer layer_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) fail(ErrorKind::parse, "checkpoint: layer shape must have 2 entries");
  const std::size_t fan_in = shape[0];
  const std::size_t fan_out = shape[1];
  DenseLayer l(fan_in, fan_out);
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != fan_in * fan_out) fail(ErrorKind::parse, "checkpoint: weight count does not match shape");
  for (std::size_t i = 0; i < fan_in; ++i) {
    for (std::size_t o = 0; o < fan_out; ++o) {
      const double v = w[i * fan_out + o];
      if (!std::isfinite(v)) fail(ErrorKind::parse, "checkpoint: non-finite weight");
      l.weights(o, i) = v;
    }
  }
  Vector bias(j.at("bias").get<std::vector<double>>());
  detail::require_same_dim(fan_out, bias.size(), "checkpoint bias");
  l.bias = std::move(bias);
  return l;
}

}  // namespace detail

inline nlohmann::json to_json(const EmbedNet& net) {
  return {{"layer1", detail::layer_json(net.layer1_)},
          {"layer2", detail::layer_json(net.layer2_)},
          {"seed", net.seed_},
          {"step", net.step_}};
}

inline EmbedNet embed_net_from_json(const nlohmann::json& j) {
  try {
    EmbedNet net;
    net.layer1_ = detail::layer_from_json(j.at("layer1"));
    net.layer2_ = detail::layer_from_json(j.at("layer2"));
    detail::require_same_dim(net.layer1_.fan_out(), net.layer2_.fan_in(), "checkpoint layers");
    net.seed_ = j.at("seed").get<std::uint64_t>();
    net.step_ = j.at("step").get<std::uint64_t>();
    return net;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const EmbedNet& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::invalid_argument, "cannot write " + path);
  out << to_json(net).dump() << '\n';
}

inline EmbedNet load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::invalid_argument, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, path + ": " + e.what());
  }
  return embed_net_from_json(j);
}

}  // namespace lindml
