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

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sheaflab/error.hpp"

namespace sheaflab {

using NodeId = std::size_t;

/// Canonical undirected edge, always stored with u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Simple undirected attributed graph. Immutable once built by from_edge_list.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return n_; }
  std::size_t num_edges() const { return edges_.size(); }
  Eigen::Index feature_dim() const { return features_.cols(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::MatrixXd& features() const { return features_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }

  /// Neighbours of i in ascending order.
  const std::vector<NodeId>& neighbours(NodeId i) const {
    check_node(i);
    return adjacency_[i];
  }

  std::size_t degree(NodeId i) const { return neighbours(i).size(); }

  bool has_edge(NodeId a, NodeId b) const {
    check_node(a);
    check_node(b);
    const auto& nb = adjacency_[a];
    return std::binary_search(nb.begin(), nb.end(), b);
  }

  void check_node(NodeId i) const {
    if (i >= n_) throw DataError("node index " + std::to_string(i) + " out of range");
  }

  friend Graph from_edge_list(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& raw_edges,
                              Eigen::MatrixXd features, std::optional<std::vector<int>> labels,
                              std::optional<int> num_classes);

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> adjacency_;
  Eigen::MatrixXd features_;
  std::optional<std::vector<int>> labels_;
};

/// Builds a simple undirected graph: self-loops are dropped, reversed and
/// repeated pairs collapse, edges end up in lexicographic (u, v) order.
inline Graph from_edge_list(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& raw_edges,
                            Eigen::MatrixXd features, std::optional<std::vector<int>> labels = std::nullopt,
                            std::optional<int> num_classes = std::nullopt) {
  if (static_cast<std::size_t>(features.rows()) != n)
    throw DataError("feature row count " + std::to_string(features.rows()) + " does not match node count " +
                    std::to_string(n));
  if (labels) {
    if (labels->size() != n) throw DataError("label count does not match node count");
    for (int c : *labels) {
      if (c < 0 || (num_classes && c >= *num_classes))
        throw DataError("label " + std::to_string(c) + " out of class range");
    }
  }

  Graph g;
  g.n_ = n;
  g.edges_.reserve(raw_edges.size());
  for (auto [a, b] : raw_edges) {
    if (a >= n || b >= n) throw DataError("edge endpoint out of range");
    if (a == b) continue;
    g.edges_.push_back(Edge{std::min(a, b), std::max(a, b)});
  }
  std::sort(g.edges_.begin(), g.edges_.end());
  g.edges_.erase(std::unique(g.edges_.begin(), g.edges_.end()), g.edges_.end());

  g.adjacency_.assign(n, {});
  for (const Edge& e : g.edges_) {
    g.adjacency_[e.u].push_back(e.v);
    g.adjacency_[e.v].push_back(e.u);
  }
  for (auto& nb : g.adjacency_) std::sort(nb.begin(), nb.end());

  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  return g;
}

inline std::vector<NodeId> one_hop_neighbourhood(const Graph& g, NodeId i) { return g.neighbours(i); }

inline std::size_t degree(const Graph& g, NodeId i) { return g.degree(i); }

/// Fraction of edges whose endpoints share a label.
inline double homophily(const Graph& g, const std::vector<int>& labels) {
  if (labels.size() != g.num_nodes()) throw DataError("labels missing for some nodes");
  if (g.num_edges() == 0) throw DataError("homophily undefined on an empty edge set");
  std::size_t same = 0;
  for (const Edge& e : g.edges()) same += labels[e.u] == labels[e.v];
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

inline double homophily(const Graph& g) {
  if (!g.labels()) throw DataError("graph has no labels");
  return homophily(g, *g.labels());
}

/// Combinatorial Laplacian D - A.
inline Eigen::MatrixXd graph_laplacian(const Graph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const Edge& e : g.edges()) {
    const auto u = static_cast<Eigen::Index>(e.u);
    const auto v = static_cast<Eigen::Index>(e.v);
    L(u, v) -= 1.0;
    L(v, u) -= 1.0;
    L(u, u) += 1.0;
    L(v, v) += 1.0;
  }
  return L;
}

/// Class count implied by the labels (max label + 1).
inline int num_classes(const std::vector<int>& labels) {
  int c = 0;
  for (int l : labels) c = std::max(c, l + 1);
  return c;
}

}  // namespace sheaflab
