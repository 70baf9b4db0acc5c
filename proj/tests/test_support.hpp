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
#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sheaflab/sheaflab.hpp"

namespace sheaflab::testing {

/// Erdos-Renyi graph with Gaussian features; random edge directions and a
/// few duplicates/self-loops so canonicalisation is exercised.
inline Graph random_graph(std::size_t n, double p_edge, Eigen::Index feature_dim, Rng& rng, int classes = 0) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> raw;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (coin(rng) < p_edge) {
        if (coin(rng) < 0.5) raw.emplace_back(u, v);
        else raw.emplace_back(v, u);
        if (coin(rng) < 0.1) raw.emplace_back(u, v);
      }
  if (n > 0 && coin(rng) < 0.5) raw.emplace_back(0, 0);
  std::optional<std::vector<int>> labels;
  if (classes > 0) {
    std::uniform_int_distribution<int> pick(0, classes - 1);
    labels.emplace(n);
    for (auto& l : *labels) l = pick(rng);
  }
  return from_edge_list(n, raw, gaussian_matrix(static_cast<Eigen::Index>(n), feature_dim, rng), labels);
}

inline Graph path_graph(std::size_t n, Eigen::MatrixXd features) {
  std::vector<std::pair<NodeId, NodeId>> raw;
  for (NodeId v = 0; v + 1 < n; ++v) raw.emplace_back(v, v + 1);
  return from_edge_list(n, raw, std::move(features));
}

inline Graph triangle(Eigen::Index feature_dim = 1) {
  return from_edge_list(3, {{0, 1}, {1, 2}, {0, 2}}, Eigen::MatrixXd::Zero(3, feature_dim));
}

/// Dense oracle for one diffusion layer: explicit Kronecker product I_n (x) W1.
inline Eigen::MatrixXd dense_sheaf_layer(const Eigen::MatrixXd& delta_dense, const Eigen::MatrixXd& x,
                                         const Eigen::MatrixXd& w1, const Eigen::MatrixXd& w2, Activation act) {
  const Eigen::Index d = w1.rows();
  const Eigen::Index n = x.rows() / d;
  Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Eigen::Index v = 0; v < n; ++v)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = 0; b < d; ++b) kron(v * d + a, v * d + b) = w1(a, b);
  const Eigen::MatrixXd y = delta_dense * kron * x * w2;
  Eigen::MatrixXd s = y;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const double v = y(i, j);
      s(i, j) = act == Activation::relu ? (v > 0 ? v : 0.0) : act == Activation::tanh ? std::tanh(v) : v;
    }
  return x - s;
}

/// Block-diagonal matrix of per-node d x d blocks.
inline Eigen::MatrixXd block_diagonal(const std::vector<Eigen::MatrixXd>& blocks) {
  const Eigen::Index d = blocks.empty() ? 0 : blocks.front().rows();
  const auto n = static_cast<Eigen::Index>(blocks.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * d, n * d);
  for (Eigen::Index v = 0; v < n; ++v) m.block(v * d, v * d, d, d) = blocks[static_cast<std::size_t>(v)];
  return m;
}

/// Every trainable matrix of a model, in a fixed order.
inline std::vector<Eigen::MatrixXd*> parameter_list(ModelParams& m) {
  std::vector<Eigen::MatrixXd*> out{&m.w_in};
  for (auto& lw : m.layers) {
    out.push_back(&lw.w1);
    out.push_back(&lw.w2);
  }
  out.push_back(&m.w_out);
  return out;
}

inline std::vector<Eigen::MatrixXd> gradient_list(ParamGrads g) {
  std::vector<Eigen::MatrixXd> out{std::move(g.w_in)};
  for (auto& lw : g.layers) {
    out.push_back(std::move(lw.w1));
    out.push_back(std::move(lw.w2));
  }
  out.push_back(std::move(g.w_out));
  return out;
}

/// Largest per-entry relative error between the analytic cross-entropy
/// gradient and central differences with step h. Entries where both are
/// below `floor` are compared against the floor instead.
inline double max_gradient_error(ModelParams params, const BlockLaplacian& delta, const Eigen::MatrixXd& x,
                                 const std::vector<int>& labels, const std::vector<std::size_t>& mask,
                                 double h = 1e-5, double floor = 1e-4) {
  const auto fwd = forward(params, delta, x);
  const auto analytic = gradient_list(backward(params, delta, fwd.cache, cross_entropy_grad(fwd.logits, labels, mask)));
  auto loss = [&](const ModelParams& p) { return cross_entropy(forward(p, delta, x).logits, labels, mask); };
  auto slots = parameter_list(params);
  double worst = 0.0;
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Eigen::MatrixXd& w = *slots[k];
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double orig = w.data()[i];
      w.data()[i] = orig + h;
      const double up = loss(params);
      w.data()[i] = orig - h;
      const double down = loss(params);
      w.data()[i] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k].data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  return worst;
}

inline std::vector<std::size_t> all_nodes(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t v = 0; v < n; ++v) out[v] = v;
  return out;
}

}  // namespace sheaflab::testing
