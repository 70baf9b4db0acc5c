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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "sheaflab/error.hpp"
#include "sheaflab/graph.hpp"
#include "sheaflab/random.hpp"
#include "sheaflab/text.hpp"

namespace sheaflab {

/// Disjoint train/val/test node sets covering every node.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  friend bool operator==(const Split&, const Split&) = default;
};

struct Dataset {
  std::string name;
  Graph graph;
  int num_classes = 0;
  std::vector<Split> splits;

  const std::vector<int>& labels() const { return *graph.labels(); }
};

/// Throws "split overlap" / coverage errors unless the split partitions [0, n).
inline void validate_split(const Split& s, std::size_t n) {
  std::vector<char> seen(n, 0);
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (auto v : *part) {
      if (v >= n) throw DataError("split index out of range");
      if (seen[v]) throw DataError("split overlap");
      seen[v] = 1;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) throw DataError("split does not cover all nodes");
}

/// Per class: floor(48%) train, floor(32%) val, remainder test, drawn by a
/// shuffle seeded with seed + k for split k.
inline std::vector<Split> generate_splits(const std::vector<int>& labels, std::uint64_t seed, int count = 10) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] < 0) throw DataError("negative class label");
    by_class[labels[v]].push_back(v);
  }
  for (const auto& [c, members] : by_class)
    if (members.size() < 3) throw DataError("class " + std::to_string(c) + " too small to split (needs >= 3 nodes)");

  std::vector<Split> splits;
  for (int k = 0; k < count; ++k) {
    Rng rng(seed + static_cast<std::uint64_t>(k));
    Split s;
    for (auto [c, members] : by_class) {
      std::shuffle(members.begin(), members.end(), rng);
      const std::size_t nc = members.size();
      const std::size_t n_train = 48 * nc / 100;
      const std::size_t n_val = 32 * nc / 100;
      s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
      s.val.insert(s.val.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                   members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
      s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), members.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

struct SbmParams {
  std::size_t n = 200;
  int classes = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  Eigen::Index feature_dim = 0;  // 0 selects one dimension per class
  double separation = 2.0;
  std::uint64_t seed = 0;
};

/// Balanced stochastic block model with Gaussian class-conditional features.
/// Class c has mean (separation / sqrt 2) e_c, so class means sit at mutual
/// distance `separation`; covariance is the identity.
inline Dataset synth_sbm(SbmParams prm) {
  if (prm.feature_dim == 0) prm.feature_dim = prm.classes;
  if (prm.classes < 1) throw DataError("need at least one class");
  if (!(prm.p_in >= 0.0 && prm.p_in <= 1.0 && prm.p_out >= 0.0 && prm.p_out <= 1.0))
    throw DataError("edge probabilities must lie in [0, 1]");
  if (prm.n < static_cast<std::size_t>(prm.classes)) throw DataError("fewer nodes than classes");
  if (prm.feature_dim < prm.classes) throw DataError("feature dimension must be at least the class count");
  if (!std::isfinite(prm.separation) || prm.separation < 0.0) throw DataError("class separation must be >= 0");

  const std::size_t n = prm.n;
  const auto classes = static_cast<std::size_t>(prm.classes);
  std::vector<int> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<int>(v * classes / n);

  Rng edge_rng(mix_seed(prm.seed, 1));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) {
      const double p = labels[u] == labels[v] ? prm.p_in : prm.p_out;
      if (coin(edge_rng) < p) edges.emplace_back(u, v);
    }

  Rng feature_rng(mix_seed(prm.seed, 2));
  Eigen::MatrixXd x = gaussian_matrix(static_cast<Eigen::Index>(n), prm.feature_dim, feature_rng);
  const double offset = prm.separation / std::sqrt(2.0);
  for (std::size_t v = 0; v < n; ++v) x(static_cast<Eigen::Index>(v), labels[v]) += offset;

  Dataset ds;
  ds.name = "sbm";
  ds.num_classes = prm.classes;
  ds.splits = generate_splits(labels, prm.seed);
  ds.graph = from_edge_list(n, edges, std::move(x), std::move(labels), prm.classes);
  return ds;
}

/// Closed-form expected homophily of a balanced SBM.
inline double expected_sbm_homophily(int classes, double p_in, double p_out) {
  const double denom = p_in + (classes - 1) * p_out;
  return denom > 0.0 ? p_in / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Directory format: nodes.csv, edges.csv, splits.json
// ---------------------------------------------------------------------------

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file " + path.string());
  return in;
}

inline std::vector<std::size_t> parse_index_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) throw DataError(std::string("splits.json: missing array '") + key + "'");
  std::vector<std::size_t> out;
  for (const auto& x : j.at(key)) {
    if (!x.is_number_integer() || x.get<long long>() < 0) throw DataError("splits.json: indices must be non-negative integers");
    out.push_back(x.get<std::size_t>());
  }
  return out;
}

}  // namespace detail

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::string line;

  auto nodes_in = detail::open_input(dir / "nodes.csv");
  if (!std::getline(nodes_in, line)) throw DataError("nodes.csv: missing header");
  const auto header = text::split(text::trim(line), ',');
  if (header.size() < 2 || header.front() != "id" || header.back() != "label")
    throw DataError("nodes.csv: header must be id,f_0,...,label");
  const std::size_t p = header.size() - 2;
  for (std::size_t k = 0; k < p; ++k)
    if (header[k + 1] != "f_" + std::to_string(k)) throw DataError("nodes.csv: header must be id,f_0,...,label");

  std::vector<std::pair<std::size_t, std::vector<double>>> rows;
  std::vector<int> row_labels;
  std::size_t line_no = 1;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(text::trim(line), ',');
    const std::string ctx = "nodes.csv line " + std::to_string(line_no);
    if (fields.size() != p + 2) throw DataError(ctx + ": malformed row");
    std::vector<double> feat(p);
    for (std::size_t k = 0; k < p; ++k) feat[k] = text::parse_double(fields[k + 1], ctx);
    rows.emplace_back(text::parse_int<std::size_t>(fields[0], ctx), std::move(feat));
    row_labels.push_back(text::parse_int<int>(fields.back(), ctx));
  }
  const std::size_t n = rows.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  std::vector<int> labels(n, -1);
  std::vector<char> seen(n, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t id = rows[r].first;
    if (id >= n || seen[id]) throw DataError("nodes.csv: ids must be contiguous 0..n-1");
    seen[id] = 1;
    for (std::size_t k = 0; k < p; ++k) x(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(k)) = rows[r].second[k];
    labels[id] = row_labels[r];
  }

  auto edges_in = detail::open_input(dir / "edges.csv");
  if (!std::getline(edges_in, line) || text::trim(line) != "u,v") throw DataError("edges.csv: header must be u,v");
  std::vector<std::pair<NodeId, NodeId>> edges;
  line_no = 1;
  while (std::getline(edges_in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(text::trim(line), ',');
    const std::string ctx = "edges.csv line " + std::to_string(line_no);
    if (fields.size() != 2) throw DataError(ctx + ": malformed row");
    edges.emplace_back(text::parse_int<NodeId>(fields[0], ctx), text::parse_int<NodeId>(fields[1], ctx));
  }

  auto splits_in = detail::open_input(dir / "splits.json");
  nlohmann::json j;
  try {
    splits_in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("splits.json: ") + e.what());
  }
  if (!j.is_array()) throw DataError("splits.json: top level must be an array");

  Dataset ds;
  ds.name = dir.filename().string();
  if (ds.name.empty()) ds.name = dir.parent_path().filename().string();
  ds.num_classes = num_classes(labels);
  for (const auto& entry : j) {
    if (!entry.is_object()) throw DataError("splits.json: entries must be objects");
    Split s{detail::parse_index_array(entry, "train"), detail::parse_index_array(entry, "val"),
            detail::parse_index_array(entry, "test")};
    validate_split(s, n);
    ds.splits.push_back(std::move(s));
  }
  ds.graph = from_edge_list(n, edges, std::move(x), std::move(labels), ds.num_classes);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& g = ds.graph;
  const auto& x = g.features();
  {
    std::ofstream out(dir / "nodes.csv");
    if (!out) throw DataError("cannot write " + (dir / "nodes.csv").string());
    out << "id";
    for (Eigen::Index k = 0; k < x.cols(); ++k) out << ",f_" << k;
    out << ",label\n";
    for (Eigen::Index v = 0; v < x.rows(); ++v) {
      out << v;
      for (Eigen::Index k = 0; k < x.cols(); ++k) out << ',' << text::format_double(x(v, k));
      out << ',' << (*g.labels())[static_cast<std::size_t>(v)] << '\n';
    }
  }
  {
    std::ofstream out(dir / "edges.csv");
    if (!out) throw DataError("cannot write " + (dir / "edges.csv").string());
    out << "u,v\n";
    for (const Edge& e : g.edges()) out << e.u << ',' << e.v << '\n';
  }
  {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : ds.splits) j.push_back({{"train", s.train}, {"val", s.val}, {"test", s.test}});
    std::ofstream out(dir / "splits.json");
    if (!out) throw DataError("cannot write " + (dir / "splits.json").string());
    out << j.dump() << '\n';
  }
}

}  // namespace sheaflab
