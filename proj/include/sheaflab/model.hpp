// Copyright 2026 The sheaflab Authors.
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

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sheaflab/error.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/laplacian.hpp"
#include "sheaflab/random.hpp"

namespace sheaflab {

enum class Activation { relu, tanh, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw UsageError("unknown activation '" + std::string(s) + "'");
}

inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::relu: return y.cwiseMax(0.0);
    case Activation::tanh: return y.array().tanh().matrix();
    case Activation::identity: return y;
  }
  return y;
}

/// Elementwise derivative of the activation at the pre-activation y.
inline Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& y) {
  switch (a) {
    case Activation::relu: return (y.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - y.array().tanh().square()).matrix();
    case Activation::identity: return Eigen::MatrixXd::Ones(y.rows(), y.cols());
  }
  return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

// ---------------------------------------------------------------------------
// Fixed-sheaf diffusion network
// ---------------------------------------------------------------------------

struct LayerWeights {
  Eigen::MatrixXd w1;  // d x d, acts on stalk coordinates
  Eigen::MatrixXd w2;  // f x f, mixes channels
};

/// Encoder, T diffusion layers and decoder of the sheaf diffusion classifier.
struct ModelParams {
  Eigen::Index d = 1;
  Eigen::Index f = 1;
  int depth = 1;
  bool tied = false;
  Activation activation = Activation::relu;
  Eigen::MatrixXd w_in;              // (d*f) x p
  std::vector<LayerWeights> layers;  // depth entries, or one when tied
  Eigen::MatrixXd w_out;             // C x (d*f)

  const LayerWeights& layer(int t) const { return layers.at(tied ? 0 : static_cast<std::size_t>(t)); }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.d != b.d || a.f != b.f || a.depth != b.depth || a.tied != b.tied || a.activation != b.activation ||
        a.layers.size() != b.layers.size())
      return false;
    for (std::size_t t = 0; t < a.layers.size(); ++t)
      if (a.layers[t].w1 != b.layers[t].w1 || a.layers[t].w2 != b.layers[t].w2) return false;
    return a.w_in == b.w_in && a.w_out == b.w_out;
  }
};

/// Uniform(-a, a) initialisation with a = sqrt(1 / fan_in).
inline ModelParams init_params(Eigen::Index p, int classes, Eigen::Index d, Eigen::Index f, int depth,
                               Activation activation, bool tied, std::uint64_t seed) {
  if (p < 1 || classes < 1 || d < 1 || f < 1 || depth < 1) throw DataError("invalid model dimensions");
  Rng rng(mix_seed(seed, 0x5eedULL));
  ModelParams m;
  m.d = d;
  m.f = f;
  m.depth = depth;
  m.tied = tied;
  m.activation = activation;
  auto bound = [](Eigen::Index fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); };
  m.w_in = uniform_matrix(d * f, p, bound(p), rng);
  const int stored = tied ? 1 : depth;
  for (int t = 0; t < stored; ++t) {
    LayerWeights lw;
    lw.w1 = uniform_matrix(d, d, bound(d), rng);
    lw.w2 = uniform_matrix(f, f, bound(f), rng);
    m.layers.push_back(std::move(lw));
  }
  m.w_out = uniform_matrix(classes, d * f, bound(d * f), rng);
  return m;
}

/// Lifts n x p features into the 0-cochain matrix X (nd x f): node v's
/// block is W_in x_v reshaped row-major to d x f.
inline Eigen::MatrixXd encode(const Eigen::MatrixXd& features, const Eigen::MatrixXd& w_in, Eigen::Index d,
                              Eigen::Index f) {
  detail::require_shape(w_in.rows() == d * f && w_in.cols() == features.cols(), "encode: W_in shape mismatch");
  const Eigen::MatrixXd lifted = features * w_in.transpose();  // n x (d*f)
  const Eigen::Index n = features.rows();
  Eigen::MatrixXd x(n * d, f);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index a = 0; a < d; ++a) x.row(v * d + a) = lifted.row(v).segment(a * f, f);
  return x;
}

/// Inverse of the block reshape used by encode: nd x f -> n x (d*f).
inline Eigen::MatrixXd flatten_stalks(const Eigen::MatrixXd& x, Eigen::Index d) {
  const Eigen::Index f = x.cols();
  const Eigen::Index n = x.rows() / d;
  Eigen::MatrixXd h(n, d * f);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index a = 0; a < d; ++a) h.row(v).segment(a * f, f) = x.row(v * d + a);
  return h;
}

inline Eigen::MatrixXd unflatten_stalks(const Eigen::MatrixXd& h, Eigen::Index d) {
  const Eigen::Index f = h.cols() / d;
  const Eigen::Index n = h.rows();
  Eigen::MatrixXd x(n * d, f);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index a = 0; a < d; ++a) x.row(v * d + a) = h.row(v).segment(a * f, f);
  return x;
}

/// (I_n kron W) X: left-multiplies every d-row block of X by W.
inline Eigen::MatrixXd blockwise_left(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x) {
  const Eigen::Index d = w.cols();
  detail::require_shape(x.rows() % d == 0, "block product: rows not a multiple of d");
  Eigen::MatrixXd out(w.rows() * (x.rows() / d), x.cols());
  for (Eigen::Index v = 0; v < x.rows() / d; ++v)
    out.middleRows(v * w.rows(), w.rows()).noalias() = w * x.middleRows(v * d, d);
  return out;
}

/// One diffusion layer: X - sigma(Delta (I kron W1) X W2).
inline Eigen::MatrixXd sheaf_layer(const BlockLaplacian& delta, const Eigen::MatrixXd& x, const Eigen::MatrixXd& w1,
                                   const Eigen::MatrixXd& w2, Activation activation) {
  detail::require_shape(w1.rows() == delta.d && w1.cols() == delta.d, "sheaf layer: W1 must be d x d");
  detail::require_shape(w2.rows() == x.cols() && w2.cols() == x.cols(), "sheaf layer: W2 must be f x f");
  const Eigen::MatrixXd propagated = apply(delta, blockwise_left(w1, x));
  return x - activate(activation, propagated * w2);
}

/// Intermediates kept by forward for the reverse pass.
struct ForwardCache {
  Eigen::MatrixXd features;
  std::vector<Eigen::MatrixXd> states;      // X_0 .. X_T
  std::vector<Eigen::MatrixXd> propagated;  // Delta (I kron W1) X_t
  std::vector<Eigen::MatrixXd> pre;         // propagated_t * W2
  Eigen::MatrixXd hidden;                   // flattened X_T, n x (d*f)
  ModelParams params;

  std::size_t depth() const { return pre.size(); }
};

struct ForwardResult {
  Eigen::MatrixXd logits;
  ForwardCache cache;
};

namespace detail {

inline void check_params(const ModelParams& m, const BlockLaplacian& delta, Eigen::Index p) {
  require_shape(m.d == delta.d, "model stalk dimension does not match the Laplacian");
  require_shape(m.w_in.rows() == m.d * m.f && m.w_in.cols() == p, "W_in shape mismatch");
  require_shape(m.w_out.cols() == m.d * m.f, "W_out shape mismatch");
  require_shape(m.depth >= 1 && m.layers.size() == static_cast<std::size_t>(m.tied ? 1 : m.depth),
                "layer count mismatch");
  for (const auto& lw : m.layers)
    require_shape(lw.w1.rows() == m.d && lw.w1.cols() == m.d && lw.w2.rows() == m.f && lw.w2.cols() == m.f,
                  "layer weight shape mismatch");
}

}  // namespace detail

inline ForwardResult forward(const ModelParams& params, const BlockLaplacian& delta, const Eigen::MatrixXd& features) {
  detail::check_params(params, delta, features.cols());
  detail::require_shape(static_cast<std::size_t>(features.rows()) == delta.n, "feature rows must equal node count");

  ForwardResult r;
  auto& c = r.cache;
  c.features = features;
  c.params = params;
  c.states.push_back(encode(features, params.w_in, params.d, params.f));
  for (int t = 0; t < params.depth; ++t) {
    const auto& lw = params.layer(t);
    const Eigen::MatrixXd& x = c.states.back();
    c.propagated.push_back(apply(delta, blockwise_left(lw.w1, x)));
    c.pre.push_back(c.propagated.back() * lw.w2);
    c.states.push_back(x - activate(params.activation, c.pre.back()));
  }
  c.hidden = flatten_stalks(c.states.back(), params.d);
  r.logits = c.hidden * params.w_out.transpose();
  return r;
}

/// Gradients laid out like ModelParams.
struct ParamGrads {
  Eigen::MatrixXd w_in;
  std::vector<LayerWeights> layers;
  Eigen::MatrixXd w_out;
};

/// Reverse pass through decoder, layers and encoder. Delta is a constant
/// and symmetric, so its adjoint is itself.
inline ParamGrads backward(const ModelParams& params, const BlockLaplacian& delta, const ForwardCache& cache,
                           const Eigen::MatrixXd& logits_grad) {
  if (!(cache.params == params) || cache.depth() != static_cast<std::size_t>(params.depth))
    throw Error("stale forward cache: parameters changed since forward");
  detail::require_shape(logits_grad.rows() == cache.hidden.rows() && logits_grad.cols() == params.w_out.rows(),
                        "logit gradient shape mismatch");

  ParamGrads g;
  g.w_out = logits_grad.transpose() * cache.hidden;
  Eigen::MatrixXd grad_x = unflatten_stalks(logits_grad * params.w_out, params.d);

  g.layers.assign(params.layers.size(), LayerWeights{Eigen::MatrixXd::Zero(params.d, params.d),
                                                     Eigen::MatrixXd::Zero(params.f, params.f)});
  for (int t = params.depth - 1; t >= 0; --t) {
    const auto& lw = params.layer(t);
    auto& gl = g.layers[params.tied ? 0 : static_cast<std::size_t>(t)];
    const auto ti = static_cast<std::size_t>(t);
    const Eigen::MatrixXd grad_pre =
        -(grad_x.array() * activation_derivative(params.activation, cache.pre[ti]).array()).matrix();
    gl.w2.noalias() += cache.propagated[ti].transpose() * grad_pre;
    const Eigen::MatrixXd grad_z = apply(delta, grad_pre * lw.w2.transpose());
    const Eigen::MatrixXd& x = cache.states[ti];
    for (Eigen::Index v = 0; v < x.rows() / params.d; ++v)
      gl.w1.noalias() += grad_z.middleRows(v * params.d, params.d) * x.middleRows(v * params.d, params.d).transpose();
    grad_x += blockwise_left(lw.w1.transpose(), grad_z);
  }
  g.w_in = flatten_stalks(grad_x, params.d).transpose() * cache.features;
  return g;
}

// ---------------------------------------------------------------------------
// Loss and metrics
// ---------------------------------------------------------------------------

namespace detail {

inline void check_mask(std::span<const std::size_t> mask, const Eigen::MatrixXd& logits,
                       const std::vector<int>& labels) {
  if (mask.empty()) throw DataError("empty evaluation mask");
  for (auto v : mask) {
    if (v >= static_cast<std::size_t>(logits.rows()) || v >= labels.size()) throw DataError("mask index out of range");
    if (labels[v] < 0 || labels[v] >= logits.cols()) throw DataError("label out of range");
  }
}

inline double log_sum_exp(const Eigen::RowVectorXd& row) {
  const double m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

}  // namespace detail

/// Mean negative log-softmax of the true class over the mask.
inline double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                            std::span<const std::size_t> mask) {
  detail::check_mask(mask, logits, labels);
  double total = 0.0;
  for (auto v : mask) {
    const auto row = static_cast<Eigen::Index>(v);
    total += detail::log_sum_exp(logits.row(row)) - logits(row, labels[v]);
  }
  return total / static_cast<double>(mask.size());
}

inline Eigen::MatrixXd cross_entropy_grad(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                                          std::span<const std::size_t> mask) {
  detail::check_mask(mask, logits, labels);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(mask.size());
  for (auto v : mask) {
    const auto row = static_cast<Eigen::Index>(v);
    const double lse = detail::log_sum_exp(logits.row(row));
    g.row(row) = (logits.row(row).array() - lse).exp().matrix() * scale;
    g(row, labels[v]) -= scale;
  }
  return g;
}

/// Argmax with ties going to the lowest class id.
inline int predict_class(const Eigen::RowVectorXd& row) {
  int best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c)
    if (row(c) > row(best)) best = static_cast<int>(c);
  return best;
}

inline double accuracy(const Eigen::MatrixXd& logits, const std::vector<int>& labels,
                       std::span<const std::size_t> mask) {
  detail::check_mask(mask, logits, labels);
  std::size_t hits = 0;
  for (auto v : mask) hits += predict_class(logits.row(static_cast<Eigen::Index>(v))) == labels[v];
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

inline double evaluate(const ModelParams& params, const BlockLaplacian& delta, const Eigen::MatrixXd& features,
                       const std::vector<int>& labels, std::span<const std::size_t> mask) {
  return accuracy(forward(params, delta, features).logits, labels, mask);
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.
inline Eigen::SparseMatrix<double> gcn_propagation(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(g.num_nodes() + 2 * g.num_edges());
  auto inv_sqrt_deg = [&](NodeId v) { return 1.0 / std::sqrt(static_cast<double>(g.degree(v) + 1)); };
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    const double s = inv_sqrt_deg(v);
    triplets.emplace_back(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(v), s * s);
  }
  for (const Edge& e : g.edges()) {
    const double w = inv_sqrt_deg(e.u) * inv_sqrt_deg(e.v);
    triplets.emplace_back(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v), w);
    triplets.emplace_back(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u), w);
  }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

/// sigma(A_hat H W).
inline Eigen::MatrixXd gcn_forward(const Eigen::SparseMatrix<double>& propagation, const Eigen::MatrixXd& h,
                                   const Eigen::MatrixXd& w, Activation activation) {
  detail::require_shape(h.rows() == propagation.rows() && h.cols() == w.rows(), "gcn layer: shape mismatch");
  return activate(activation, Eigen::MatrixXd(propagation * h) * w);
}

inline Eigen::MatrixXd gcn_forward(const Graph& g, const Eigen::MatrixXd& h, const Eigen::MatrixXd& w,
                                   Activation activation) {
  return gcn_forward(gcn_propagation(g), h, w, activation);
}

/// Two-layer perceptron applied per node: sigma(X W0) W1.
inline Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& features, const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                                   Activation activation) {
  detail::require_shape(features.cols() == w0.rows() && w0.cols() == w1.rows(), "mlp: shape mismatch");
  return activate(activation, features * w0) * w1;
}

}  // namespace sheaflab
