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
#include <istream>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sheaflab/error.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/random.hpp"
#include "sheaflab/text.hpp"

namespace sheaflab {

enum class SheafKind { connection, trivial, rand_edge, rand_node };

inline std::string to_string(SheafKind kind) {
  switch (kind) {
    case SheafKind::connection: return "connection";
    case SheafKind::trivial: return "trivial";
    case SheafKind::rand_edge: return "rand-edge";
    case SheafKind::rand_node: return "rand-node";
  }
  return "unknown";
}

inline SheafKind parse_sheaf_kind(std::string_view s) {
  if (s == "connection") return SheafKind::connection;
  if (s == "trivial") return SheafKind::trivial;
  if (s == "rand-edge") return SheafKind::rand_edge;
  if (s == "rand-node") return SheafKind::rand_node;
  throw UsageError("unknown sheaf kind '" + std::string(s) + "'");
}

/// Orthonormal p x d frame of the estimated tangent space at one node.
struct TangentBasis {
  NodeId node = 0;
  Eigen::MatrixXd basis;
  /// Numerical rank of the centred neighbourhood before completion.
  Eigen::Index rank = 0;
};

/// Orthogonal d x d map attached to a canonical edge (u, v).
///
/// `map` is the Procrustes solution of B_u * O ~ B_v, so it carries
/// coordinates in v's stalk to coordinates in u's stalk; the opposite
/// direction is its transpose.
struct TransportMap {
  Edge edge;
  Eigen::MatrixXd map;
};

struct SheafDiagnostics {
  std::size_t padded_nodes = 0;
  std::size_t rank_completed_bases = 0;
  std::size_t singular_alignments = 0;
  std::vector<Edge> singular_edges;
};

/// Discrete O(d)-bundle over a graph: one orthogonal transport per edge.
struct Sheaf {
  std::size_t n = 0;
  Eigen::Index d = 0;
  SheafKind kind = SheafKind::trivial;
  std::vector<TransportMap> transports;
  std::optional<std::vector<TangentBasis>> bases;
  SheafDiagnostics diagnostics;
};

inline constexpr double kRankCompletionThreshold = 1e-8;
inline constexpr double kSingularAlignmentThreshold = 1e-8;

namespace detail {

inline void check_stalk_dim(Eigen::Index d, Eigen::Index p) {
  if (d < 1) throw DataError("stalk dimension must be at least 1");
  if (d > p) throw DataError("stalk dimension exceeds feature dimension");
}

// Column-wise sign gauge: largest |entry| (first on ties) made non-negative.
inline void canonicalise_column(Eigen::Ref<Eigen::VectorXd> col) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (std::abs(col(i)) > best_abs) {
      best_abs = std::abs(col(i));
      best = i;
    }
  }
  if (col(best) < 0.0) col = -col;
}

inline bool lexicographically_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) > b(i);
  }
  return false;
}

}  // namespace detail

inline void canonicalise_signs(Eigen::MatrixXd& basis) {
  for (Eigen::Index k = 0; k < basis.cols(); ++k) detail::canonicalise_column(basis.col(k));
}

/// 1-hop neighbours (ascending), padded with the nearest non-neighbours in
/// feature space when fewer than d exist.
inline std::vector<NodeId> neighbourhood_with_padding(const Graph& g, const Eigen::MatrixXd& features, NodeId i,
                                                     Eigen::Index d) {
  g.check_node(i);
  if (d < 1) throw DataError("stalk dimension must be at least 1");
  const std::size_t n = g.num_nodes();
  const auto need = static_cast<std::size_t>(d);
  if (n <= need) throw DataError("not enough nodes to pad a neighbourhood of size " + std::to_string(d));
  if (static_cast<std::size_t>(features.rows()) != n) throw ShapeError("feature rows do not match node count");

  std::vector<NodeId> out = g.neighbours(i);
  if (out.size() >= need) return out;

  struct Candidate {
    double dist2;
    NodeId id;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(n);
  for (NodeId j = 0; j < n; ++j) {
    if (j == i || g.has_edge(i, j)) continue;
    candidates.push_back({(features.row(j) - features.row(i)).squaredNorm(), j});
  }
  const std::size_t missing = need - out.size();
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(missing), candidates.end(),
                    [](const Candidate& a, const Candidate& b) {
                      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.id < b.id);
                    });
  for (std::size_t k = 0; k < missing; ++k) out.push_back(candidates[k].id);
  return out;
}

/// Tangent frame at `centre` from the left singular vectors of the centred
/// neighbour differences (identity weighting).
///
/// Columns are ordered by decreasing singular value and sign-canonical.
/// Tied singular values are ordered by descending lexicographic column
/// order. If the neighbourhood has rank below d, the frame is completed by
/// Gram-Schmidt over e_1, e_2, ... skipping near-dependent candidates.
inline TangentBasis local_pca(const Eigen::MatrixXd& features, NodeId centre, std::span<const NodeId> neighbours,
                              Eigen::Index d) {
  const Eigen::Index p = features.cols();
  detail::check_stalk_dim(d, p);
  if (neighbours.empty()) throw DataError("local PCA needs at least one neighbour");
  if (centre >= static_cast<NodeId>(features.rows())) throw DataError("centre node out of range");

  const auto count = static_cast<Eigen::Index>(neighbours.size());
  Eigen::MatrixXd centred(p, count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const NodeId j = neighbours[static_cast<std::size_t>(k)];
    if (j >= static_cast<NodeId>(features.rows())) throw DataError("neighbour node out of range");
    centred.col(k) = (features.row(static_cast<Eigen::Index>(j)) - features.row(static_cast<Eigen::Index>(centre)))
                         .transpose();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinU);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  const double rank_tol = static_cast<double>(std::max(p, count)) * std::numeric_limits<double>::epsilon() * sigma_max;
  Eigen::Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > rank_tol) ++rank;
  const Eigen::Index kept = std::min(rank, d);

  TangentBasis out;
  out.node = centre;
  out.rank = rank;
  out.basis = Eigen::MatrixXd::Zero(p, d);
  out.basis.leftCols(kept) = svd.matrixU().leftCols(kept);
  for (Eigen::Index k = 0; k < kept; ++k) detail::canonicalise_column(out.basis.col(k));

  const double tie_tol = 1e-10 * sigma_max;
  for (Eigen::Index start = 0; start < kept;) {
    Eigen::Index end = start + 1;
    while (end < kept && std::abs(sigma(end) - sigma(start)) <= tie_tol) ++end;
    if (end - start > 1) {
      std::vector<Eigen::VectorXd> group;
      for (Eigen::Index k = start; k < end; ++k) group.emplace_back(out.basis.col(k));
      std::stable_sort(group.begin(), group.end(), detail::lexicographically_greater);
      for (Eigen::Index k = start; k < end; ++k) out.basis.col(k) = group[static_cast<std::size_t>(k - start)];
    }
    start = end;
  }

  Eigen::Index filled = kept;
  for (Eigen::Index axis = 0; axis < p && filled < d; ++axis) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(p, axis);
    for (int pass = 0; pass < 2; ++pass) {
      const auto q = out.basis.leftCols(filled);
      v -= q * (q.transpose() * v);
    }
    const double norm = v.norm();
    if (norm <= kRankCompletionThreshold) continue;
    out.basis.col(filled) = v / norm;
    detail::canonicalise_column(out.basis.col(filled));
    ++filled;
  }
  return out;
}

inline TangentBasis local_pca(const Eigen::MatrixXd& features, NodeId centre, const std::vector<NodeId>& neighbours,
                              Eigen::Index d) {
  return local_pca(features, centre, std::span<const NodeId>(neighbours), d);
}

namespace detail {

struct Alignment {
  Eigen::MatrixXd map;
  double sigma_min = 0.0;
};

inline Alignment align_frames(const Eigen::MatrixXd& bi, const Eigen::MatrixXd& bj) {
  if (bi.rows() != bj.rows() || bi.cols() != bj.cols())
    throw ShapeError("tangent bases have mismatched dimensions");
  const Eigen::MatrixXd cross = bi.transpose() * bj;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Alignment out;
  out.map = svd.matrixU() * svd.matrixV().transpose();
  const auto& s = svd.singularValues();
  out.sigma_min = s.size() > 0 ? s(s.size() - 1) : 0.0;
  return out;
}

}  // namespace detail

/// Orthogonal Procrustes: the O minimising ||B_i O - B_j||_F, i.e. U V^T
/// from the SVD of B_i^T B_j.
inline Eigen::MatrixXd align(const Eigen::MatrixXd& bi, const Eigen::MatrixXd& bj) {
  return detail::align_frames(bi, bj).map;
}

inline Eigen::MatrixXd align(const TangentBasis& bi, const TangentBasis& bj) { return align(bi.basis, bj.basis); }

/// Local PCA and alignment over graph neighbourhoods.
inline Sheaf build_connection_sheaf(const Graph& g, Eigen::Index d) {
  const Eigen::MatrixXd& x = g.features();
  detail::check_stalk_dim(d, x.cols());
  if (g.num_nodes() <= static_cast<std::size_t>(d))
    throw DataError("node count must exceed the stalk dimension");

  Sheaf s;
  s.n = g.num_nodes();
  s.d = d;
  s.kind = SheafKind::connection;

  std::vector<TangentBasis> bases;
  bases.reserve(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    const auto nb = neighbourhood_with_padding(g, x, i, d);
    if (g.degree(i) < static_cast<std::size_t>(d)) ++s.diagnostics.padded_nodes;
    bases.push_back(local_pca(x, i, nb, d));
    if (bases.back().rank < d) ++s.diagnostics.rank_completed_bases;
  }

  s.transports.reserve(g.num_edges());
  for (const Edge& e : g.edges()) {
    auto a = detail::align_frames(bases[e.u].basis, bases[e.v].basis);
    if (a.sigma_min < kSingularAlignmentThreshold) {
      ++s.diagnostics.singular_alignments;
      s.diagnostics.singular_edges.push_back(e);
    }
    s.transports.push_back({e, std::move(a.map)});
  }
  s.bases = std::move(bases);
  return s;
}

inline Sheaf trivial_sheaf(const Graph& g, Eigen::Index d) {
  if (d < 1) throw DataError("stalk dimension must be at least 1");
  Sheaf s;
  s.n = g.num_nodes();
  s.d = d;
  s.kind = SheafKind::trivial;
  s.transports.reserve(g.num_edges());
  for (const Edge& e : g.edges()) s.transports.push_back({e, Eigen::MatrixXd::Identity(d, d)});
  return s;
}

/// Haar-distributed element of O(d): QR of a Gaussian matrix with the
/// columns of Q rescaled by sign(R_kk).
inline Eigen::MatrixXd haar_orthogonal(Eigen::Index d, Rng& rng) {
  if (d < 1) throw DataError("dimension must be at least 1");
  const Eigen::MatrixXd gauss = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (Eigen::Index k = 0; k < d; ++k) {
    if (r(k, k) < 0.0) q.col(k) = -q.col(k);
  }
  return q;
}

/// Independent Haar transport per edge; edge k draws from sub-stream k.
inline Sheaf random_edge_sheaf(const Graph& g, Eigen::Index d, std::uint64_t seed) {
  Sheaf s = trivial_sheaf(g, d);
  s.kind = SheafKind::rand_edge;
  for (std::size_t k = 0; k < s.transports.size(); ++k) {
    Rng rng = sub_rng(seed, k);
    s.transports[k].map = haar_orthogonal(d, rng);
  }
  return s;
}

/// Transports Q_u^T Q_v from given per-node frames.
inline Sheaf random_node_sheaf_from_frames(const Graph& g, const std::vector<Eigen::MatrixXd>& frames) {
  if (frames.size() != g.num_nodes()) throw ShapeError("one frame per node required");
  const Eigen::Index d = frames.empty() ? 1 : frames.front().rows();
  Sheaf s = trivial_sheaf(g, d);
  s.kind = SheafKind::rand_node;
  for (auto& t : s.transports) t.map = frames[t.edge.u].transpose() * frames[t.edge.v];
  return s;
}

inline Sheaf random_node_sheaf(const Graph& g, Eigen::Index d, std::uint64_t seed) {
  if (d < 1) throw DataError("stalk dimension must be at least 1");
  std::vector<Eigen::MatrixXd> frames;
  frames.reserve(g.num_nodes());
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    Rng rng = sub_rng(seed, i);
    frames.push_back(haar_orthogonal(d, rng));
  }
  Sheaf s = random_node_sheaf_from_frames(g, frames);
  s.d = d;
  return s;
}

inline Sheaf build_sheaf(const Graph& g, SheafKind kind, Eigen::Index d, std::uint64_t seed) {
  switch (kind) {
    case SheafKind::connection: return build_connection_sheaf(g, d);
    case SheafKind::trivial: return trivial_sheaf(g, d);
    case SheafKind::rand_edge: return random_edge_sheaf(g, d, seed);
    case SheafKind::rand_node: return random_node_sheaf(g, d, seed);
  }
  throw UsageError("unknown sheaf kind");
}

/// Largest ||O^T O - I||_F over all transports.
inline double max_orthogonality_defect(const Sheaf& s) {
  double worst = 0.0;
  for (const auto& t : s.transports) {
    const auto eye = Eigen::MatrixXd::Identity(t.map.cols(), t.map.cols());
    worst = std::max(worst, (t.map.transpose() * t.map - eye).norm());
  }
  return worst;
}

// CSV export: header "n=<n>,d=<d>,kind=<kind>", then "u,v,o_00,...,o_{d-1,d-1}"
// per edge in canonical order, row-major.
inline void write_sheaf_csv(std::ostream& os, const Sheaf& s) {
  os << "n=" << s.n << ",d=" << s.d << ",kind=" << to_string(s.kind) << '\n';
  for (const auto& t : s.transports) {
    os << t.edge.u << ',' << t.edge.v;
    for (Eigen::Index r = 0; r < s.d; ++r)
      for (Eigen::Index c = 0; c < s.d; ++c) os << ',' << text::format_double(t.map(r, c));
    os << '\n';
  }
}

inline Sheaf read_sheaf_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("sheaf CSV: missing header");
  Sheaf s;
  bool have_n = false, have_d = false, have_kind = false;
  for (auto field : text::split(text::trim(line), ',')) {
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw DataError("sheaf CSV: malformed header");
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "n") {
      s.n = text::parse_int<std::size_t>(value, "sheaf CSV header");
      have_n = true;
    } else if (key == "d") {
      s.d = text::parse_int<Eigen::Index>(value, "sheaf CSV header");
      have_d = true;
    } else if (key == "kind") {
      s.kind = parse_sheaf_kind(value);
      have_kind = true;
    } else {
      throw DataError("sheaf CSV: unknown header key '" + std::string(key) + "'");
    }
  }
  if (!have_n || !have_d || !have_kind || s.d < 1) throw DataError("sheaf CSV: incomplete header");

  const auto width = static_cast<std::size_t>(2 + s.d * s.d);
  while (std::getline(is, line)) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(text::trim(line), ',');
    if (fields.size() != width) throw DataError("sheaf CSV: wrong field count");
    TransportMap t;
    t.edge.u = text::parse_int<NodeId>(fields[0], "sheaf CSV");
    t.edge.v = text::parse_int<NodeId>(fields[1], "sheaf CSV");
    t.map.resize(s.d, s.d);
    for (Eigen::Index r = 0; r < s.d; ++r)
      for (Eigen::Index c = 0; c < s.d; ++c)
        t.map(r, c) = text::parse_double(fields[static_cast<std::size_t>(2 + r * s.d + c)], "sheaf CSV");
    s.transports.push_back(std::move(t));
  }
  return s;
}

}  // namespace sheaflab
