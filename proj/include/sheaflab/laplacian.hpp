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
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "sheaflab/error.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/sheaf.hpp"
#include "sheaflab/text.hpp"

namespace sheaflab {

/// Block-sparse coboundary: one block row per edge, two nonzero blocks each.
///
/// Row e with tail u and head v computes (delta x)_e = H x_v - T x_u.
struct Coboundary {
  struct Row {
    NodeId tail = 0;
    NodeId head = 0;
    Eigen::MatrixXd tail_map;
    Eigen::MatrixXd head_map;
  };

  std::size_t n = 0;
  Eigen::Index d = 1;
  std::vector<Row> rows;

  Eigen::Index cochain_size() const { return static_cast<Eigen::Index>(n) * d; }

  /// Reverses the orientation of edge e; the row changes sign.
  void flip(std::size_t e) {
    auto& r = rows.at(e);
    std::swap(r.tail, r.head);
    std::swap(r.tail_map, r.head_map);
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    detail::require_shape(x.size() == cochain_size(), "coboundary: cochain length mismatch");
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()) * d);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      const auto& r = rows[e];
      out.segment(static_cast<Eigen::Index>(e) * d, d) =
          r.head_map * x.segment(static_cast<Eigen::Index>(r.head) * d, d) -
          r.tail_map * x.segment(static_cast<Eigen::Index>(r.tail) * d, d);
    }
    return out;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()) * d, cochain_size());
    for (std::size_t e = 0; e < rows.size(); ++e) {
      const auto& r = rows[e];
      const auto row = static_cast<Eigen::Index>(e) * d;
      m.block(row, static_cast<Eigen::Index>(r.head) * d, d, d) += r.head_map;
      m.block(row, static_cast<Eigen::Index>(r.tail) * d, d, d) -= r.tail_map;
    }
    return m;
  }
};

/// Symmetric nd x nd operator in d x d blocks. Off-diagonal blocks are
/// stored once per canonical edge (u, v) as block (u, v); block (v, u) is
/// its transpose.
struct BlockLaplacian {
  std::size_t n = 0;
  Eigen::Index d = 1;
  bool normalised = false;
  std::vector<Eigen::MatrixXd> diagonal;
  std::vector<Edge> edges;
  std::vector<Eigen::MatrixXd> upper;

  Eigen::Index size() const { return static_cast<Eigen::Index>(n) * d; }
};

namespace detail {

inline void check_sheaf_matches(const Sheaf& s, const Graph& g) {
  if (s.n != g.num_nodes() || s.transports.size() != g.num_edges())
    throw DataError("sheaf was not built over this graph");
  for (std::size_t k = 0; k < s.transports.size(); ++k) {
    const auto& t = s.transports[k];
    if (t.edge != g.edges()[k] || t.map.rows() != s.d || t.map.cols() != s.d)
      throw DataError("sheaf was not built over this graph");
  }
}

}  // namespace detail

/// Coboundary with restriction maps F_{u<e} = O_uv^T and F_{v<e} = I for each
/// canonical edge oriented u -> v.
inline Coboundary coboundary(const Sheaf& s, const Graph& g) {
  detail::check_sheaf_matches(s, g);
  Coboundary c;
  c.n = s.n;
  c.d = s.d;
  c.rows.reserve(s.transports.size());
  for (const auto& t : s.transports)
    c.rows.push_back({t.edge.u, t.edge.v, t.map.transpose(), Eigen::MatrixXd::Identity(s.d, s.d)});
  return c;
}

/// Direct block assembly: diagonal deg(v) I, block (u, v) = -O_uv.
inline BlockLaplacian sheaf_laplacian(const Sheaf& s, const Graph& g) {
  detail::check_sheaf_matches(s, g);
  BlockLaplacian L;
  L.n = s.n;
  L.d = s.d;
  L.diagonal.reserve(s.n);
  for (NodeId v = 0; v < s.n; ++v)
    L.diagonal.push_back(static_cast<double>(g.degree(v)) * Eigen::MatrixXd::Identity(s.d, s.d));
  L.edges = g.edges();
  L.upper.reserve(s.transports.size());
  for (const auto& t : s.transports) L.upper.push_back(-t.map);
  return L;
}

inline Eigen::MatrixXd to_dense(const BlockLaplacian& L) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(L.size(), L.size());
  const Eigen::Index d = L.d;
  for (std::size_t v = 0; v < L.n; ++v) {
    const auto o = static_cast<Eigen::Index>(v) * d;
    m.block(o, o, d, d) = L.diagonal[v];
  }
  for (std::size_t k = 0; k < L.edges.size(); ++k) {
    const auto u = static_cast<Eigen::Index>(L.edges[k].u) * d;
    const auto v = static_cast<Eigen::Index>(L.edges[k].v) * d;
    m.block(u, v, d, d) = L.upper[k];
    m.block(v, u, d, d) = L.upper[k].transpose();
  }
  return m;
}

/// delta^T delta through dense products.
inline BlockLaplacian laplacian_from_coboundary(const Coboundary& c) {
  const Eigen::MatrixXd delta = c.to_dense();
  const Eigen::MatrixXd full = delta.transpose() * delta;
  const Eigen::Index d = c.d;

  BlockLaplacian L;
  L.n = c.n;
  L.d = d;
  for (std::size_t v = 0; v < c.n; ++v) {
    const auto o = static_cast<Eigen::Index>(v) * d;
    L.diagonal.push_back(full.block(o, o, d, d));
  }
  for (const auto& r : c.rows) L.edges.push_back(Edge{std::min(r.tail, r.head), std::max(r.tail, r.head)});
  std::sort(L.edges.begin(), L.edges.end());
  for (const Edge& e : L.edges)
    L.upper.push_back(full.block(static_cast<Eigen::Index>(e.u) * d, static_cast<Eigen::Index>(e.v) * d, d, d));

  // Everything outside the edge pattern must vanish.
  Eigen::MatrixXd rest = full;
  for (std::size_t v = 0; v < c.n; ++v) rest.block(static_cast<Eigen::Index>(v) * d, static_cast<Eigen::Index>(v) * d, d, d).setZero();
  for (const Edge& e : L.edges) {
    rest.block(static_cast<Eigen::Index>(e.u) * d, static_cast<Eigen::Index>(e.v) * d, d, d).setZero();
    rest.block(static_cast<Eigen::Index>(e.v) * d, static_cast<Eigen::Index>(e.u) * d, d, d).setZero();
  }
  if (rest.size() > 0 && rest.cwiseAbs().maxCoeff() > 0.0)
    throw NumericalGuard("coboundary has blocks off the graph pattern");
  return L;
}

/// D^{-1/2} L D^{-1/2} with D the block diagonal; zero diagonal blocks
/// (isolated nodes) use the identity.
inline BlockLaplacian normalise(const BlockLaplacian& L) {
  std::vector<Eigen::MatrixXd> inv_sqrt;
  inv_sqrt.reserve(L.n);
  for (const auto& block : L.diagonal) {
    if (block.isZero(0.0)) {
      inv_sqrt.push_back(Eigen::MatrixXd::Identity(L.d, L.d));
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(block);
    if (eig.eigenvalues().minCoeff() <= 0.0) throw NumericalGuard("diagonal block is not positive definite");
    inv_sqrt.push_back(eig.operatorInverseSqrt());
  }

  BlockLaplacian out = L;
  out.normalised = true;
  for (std::size_t v = 0; v < L.n; ++v) out.diagonal[v] = inv_sqrt[v] * L.diagonal[v] * inv_sqrt[v];
  for (std::size_t k = 0; k < L.edges.size(); ++k)
    out.upper[k] = inv_sqrt[L.edges[k].u] * L.upper[k] * inv_sqrt[L.edges[k].v];
  return out;
}

/// Block-sparse product L X for X of shape nd x f.
inline Eigen::MatrixXd apply(const BlockLaplacian& L, const Eigen::MatrixXd& x) {
  detail::require_shape(x.rows() == L.size(), "laplacian apply: row count must equal n*d");
  const Eigen::Index d = L.d;
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (std::size_t v = 0; v < L.n; ++v) {
    const auto o = static_cast<Eigen::Index>(v) * d;
    out.middleRows(o, d).noalias() = L.diagonal[v] * x.middleRows(o, d);
  }
  for (std::size_t k = 0; k < L.edges.size(); ++k) {
    const auto u = static_cast<Eigen::Index>(L.edges[k].u) * d;
    const auto v = static_cast<Eigen::Index>(L.edges[k].v) * d;
    out.middleRows(u, d).noalias() += L.upper[k] * x.middleRows(v, d);
    out.middleRows(v, d).noalias() += L.upper[k].transpose() * x.middleRows(u, d);
  }
  return out;
}

/// x^T L x.
inline double dirichlet_energy(const BlockLaplacian& L, const Eigen::VectorXd& x) {
  detail::require_shape(x.size() == L.size(), "dirichlet energy: vector length must equal n*d");
  return x.dot(apply(L, Eigen::MatrixXd(x)).col(0));
}

inline constexpr Eigen::Index kMaxDenseSpectrumSize = 5000;

/// Ascending eigenvalues of the symmetrised dense operator.
inline Eigen::VectorXd spectrum(const BlockLaplacian& L, Eigen::Index max_size = kMaxDenseSpectrumSize) {
  if (L.size() > max_size)
    throw NumericalGuard("operator of size " + std::to_string(L.size()) + " exceeds dense eigensolver limit " +
                         std::to_string(max_size));
  if (L.size() == 0) return {};
  const Eigen::MatrixXd m = to_dense(L);
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

/// Unit-step explicit Euler: X <- (I - L) X, `steps` times.
inline Eigen::MatrixXd euler_diffusion(const BlockLaplacian& L, Eigen::MatrixXd x, int steps) {
  if (steps < 0) throw DataError("diffusion step count must be non-negative");
  detail::require_shape(x.rows() == L.size(), "euler diffusion: row count must equal n*d");
  for (int t = 0; t < steps; ++t) x -= apply(L, x);
  return x;
}

/// Coordinate triplets "i j value", sorted, after the header
/// "nd=<nd> d=<d> normalised=<0|1>". Exact zeros are omitted.
inline void write_laplacian_triplets(std::ostream& os, const BlockLaplacian& L) {
  using Triplet = std::tuple<Eigen::Index, Eigen::Index, double>;
  std::vector<Triplet> entries;
  const Eigen::Index d = L.d;
  auto add_block = [&](Eigen::Index r0, Eigen::Index c0, const Eigen::MatrixXd& b) {
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        if (b(i, j) != 0.0) entries.emplace_back(r0 + i, c0 + j, b(i, j));
  };
  for (std::size_t v = 0; v < L.n; ++v) {
    const auto o = static_cast<Eigen::Index>(v) * d;
    add_block(o, o, L.diagonal[v]);
  }
  for (std::size_t k = 0; k < L.edges.size(); ++k) {
    const auto u = static_cast<Eigen::Index>(L.edges[k].u) * d;
    const auto v = static_cast<Eigen::Index>(L.edges[k].v) * d;
    add_block(u, v, L.upper[k]);
    add_block(v, u, L.upper[k].transpose());
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  os << "nd=" << L.size() << " d=" << d << " normalised=" << (L.normalised ? 1 : 0) << '\n';
  for (const auto& [i, j, value] : entries) os << i << ' ' << j << ' ' << text::format_double(value) << '\n';
}

}  // namespace sheaflab
