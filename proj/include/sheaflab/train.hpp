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

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "sheaflab/data_io.hpp"
#include "sheaflab/error.hpp"
#include "sheaflab/laplacian.hpp"
#include "sheaflab/model.hpp"
#include "sheaflab/random.hpp"
#include "sheaflab/sheaf.hpp"

namespace sheaflab {

enum class Optimiser { sgd, adam };
enum class ModelKind { nsd, gcn, mlp };

inline std::string to_string(Optimiser o) { return o == Optimiser::sgd ? "sgd" : "adam"; }

inline Optimiser parse_optimiser(std::string_view s) {
  if (s == "sgd") return Optimiser::sgd;
  if (s == "adam") return Optimiser::adam;
  throw UsageError("unknown optimiser '" + std::string(s) + "'");
}

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::nsd: return "nsd";
    case ModelKind::gcn: return "gcn";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "nsd") return ModelKind::nsd;
  if (s == "gcn") return ModelKind::gcn;
  if (s == "mlp") return ModelKind::mlp;
  throw UsageError("unknown model '" + std::string(s) + "'");
}

struct TrainConfig {
  Eigen::Index d = 2;       // stalk dimension
  Eigen::Index f = 8;       // channels per stalk
  int layers = 2;           // diffusion depth T
  Eigen::Index hidden = 32; // GCN / MLP width
  double lr = 0.01;
  int epochs = 200;
  double weight_decay = 5e-4;
  Optimiser optimiser = Optimiser::adam;
  std::uint64_t seed = 0;
  bool use_normalised = true;
  int patience = 100;       // 0 disables early stopping
  Activation activation = Activation::relu;
  bool tied_weights = false;
  double dropout = 0.0;     // input-feature dropout, training only

  void validate() const {
    if (d < 1 || f < 1 || layers < 1 || hidden < 1) throw UsageError("model dimensions must be positive");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw UsageError("learning rate must be >= 0");
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (!(weight_decay >= 0.0)) throw UsageError("weight decay must be >= 0");
    if (patience < 0) throw UsageError("patience must be >= 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_acc = -1.0;
  double test_acc_at_best = 0.0;
  double sheaf_build_seconds = 0.0;

  double mean_epoch_seconds() const {
    if (epochs.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : epochs) s += e.seconds;
    return s / static_cast<double>(epochs.size());
  }

  double std_epoch_seconds() const {
    if (epochs.size() < 2) return 0.0;
    const double m = mean_epoch_seconds();
    double s = 0.0;
    for (const auto& e : epochs) s += (e.seconds - m) * (e.seconds - m);
    return std::sqrt(s / static_cast<double>(epochs.size() - 1));
  }
};

// ---------------------------------------------------------------------------
// Optimisers
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
        v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * grads[k];
      v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * grads[k].cwiseProduct(grads[k]);
      params[k]->array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

class Sgd {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(const std::vector<Eigen::MatrixXd*>& params, const std::vector<Eigen::MatrixXd>& grads) {
    for (std::size_t k = 0; k < params.size(); ++k) *params[k] -= lr_ * grads[k];
  }

 private:
  double lr_;
};

// ---------------------------------------------------------------------------
// Trainable models
// ---------------------------------------------------------------------------

template <class M>
concept Trainable = requires(M m, const M cm, const Eigen::MatrixXd& x, const typename M::Cache& cache) {
  { cm.forward(x) } -> std::same_as<std::pair<Eigen::MatrixXd, typename M::Cache>>;
  { cm.backward(cache, x) } -> std::same_as<std::vector<Eigen::MatrixXd>>;
  { cm.predict(x) } -> std::same_as<Eigen::MatrixXd>;
  { m.parameters() } -> std::same_as<std::vector<Eigen::MatrixXd*>>;
};

/// Sheaf diffusion classifier over a fixed, precomputed Laplacian.
class SheafDiffusionNet {
 public:
  using Cache = ForwardCache;

  SheafDiffusionNet(BlockLaplacian delta, ModelParams params) : delta_(std::move(delta)), params_(std::move(params)) {}

  std::pair<Eigen::MatrixXd, Cache> forward(const Eigen::MatrixXd& x) const {
    auto r = sheaflab::forward(params_, delta_, x);
    return {std::move(r.logits), std::move(r.cache)};
  }

  std::vector<Eigen::MatrixXd> backward(const Cache& cache, const Eigen::MatrixXd& logits_grad) const {
    auto g = sheaflab::backward(params_, delta_, cache, logits_grad);
    std::vector<Eigen::MatrixXd> out;
    out.push_back(std::move(g.w_in));
    for (auto& lw : g.layers) {
      out.push_back(std::move(lw.w1));
      out.push_back(std::move(lw.w2));
    }
    out.push_back(std::move(g.w_out));
    return out;
  }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return sheaflab::forward(params_, delta_, x).logits; }

  std::vector<Eigen::MatrixXd*> parameters() {
    std::vector<Eigen::MatrixXd*> out{&params_.w_in};
    for (auto& lw : params_.layers) {
      out.push_back(&lw.w1);
      out.push_back(&lw.w2);
    }
    out.push_back(&params_.w_out);
    return out;
  }

  const ModelParams& params() const { return params_; }
  const BlockLaplacian& laplacian() const { return delta_; }

 private:
  BlockLaplacian delta_;
  ModelParams params_;
};

/// Two-layer GCN: A_hat sigma(A_hat X W0) W1.
class GcnNet {
 public:
  struct Cache {
    Eigen::MatrixXd propagated_input;  // A_hat X
    Eigen::MatrixXd pre;               // A_hat X W0
    Eigen::MatrixXd hidden;            // sigma(pre)
    Eigen::MatrixXd propagated_hidden; // A_hat hidden
  };

  GcnNet(const Graph& g, Eigen::Index hidden, int classes, Activation activation, std::uint64_t seed)
      : propagation_(gcn_propagation(g)), activation_(activation) {
    Rng rng(mix_seed(seed, 0x5eedULL));
    const Eigen::Index p = g.feature_dim();
    w0_ = uniform_matrix(p, hidden, std::sqrt(1.0 / static_cast<double>(p)), rng);
    w1_ = uniform_matrix(hidden, classes, std::sqrt(1.0 / static_cast<double>(hidden)), rng);
  }

  std::pair<Eigen::MatrixXd, Cache> forward(const Eigen::MatrixXd& x) const {
    Cache c;
    c.propagated_input = propagation_ * x;
    c.pre = c.propagated_input * w0_;
    c.hidden = activate(activation_, c.pre);
    c.propagated_hidden = propagation_ * c.hidden;
    Eigen::MatrixXd logits = c.propagated_hidden * w1_;
    return {std::move(logits), std::move(c)};
  }

  std::vector<Eigen::MatrixXd> backward(const Cache& c, const Eigen::MatrixXd& logits_grad) const {
    std::vector<Eigen::MatrixXd> out(2);
    out[1] = c.propagated_hidden.transpose() * logits_grad;
    const Eigen::MatrixXd grad_hidden = propagation_ * (logits_grad * w1_.transpose());
    const Eigen::MatrixXd grad_pre =
        (grad_hidden.array() * activation_derivative(activation_, c.pre).array()).matrix();
    out[0] = c.propagated_input.transpose() * grad_pre;
    return out;
  }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return forward(x).first; }
  std::vector<Eigen::MatrixXd*> parameters() { return {&w0_, &w1_}; }

 private:
  Eigen::SparseMatrix<double> propagation_;
  Activation activation_;
  Eigen::MatrixXd w0_, w1_;
};

/// Two-layer perceptron on node features only.
class MlpNet {
 public:
  struct Cache {
    Eigen::MatrixXd input;
    Eigen::MatrixXd pre;
    Eigen::MatrixXd hidden;
  };

  MlpNet(Eigen::Index p, Eigen::Index hidden, int classes, Activation activation, std::uint64_t seed)
      : activation_(activation) {
    Rng rng(mix_seed(seed, 0x5eedULL));
    w0_ = uniform_matrix(p, hidden, std::sqrt(1.0 / static_cast<double>(p)), rng);
    w1_ = uniform_matrix(hidden, classes, std::sqrt(1.0 / static_cast<double>(hidden)), rng);
  }

  std::pair<Eigen::MatrixXd, Cache> forward(const Eigen::MatrixXd& x) const {
    Cache c{x, x * w0_, {}};
    c.hidden = activate(activation_, c.pre);
    Eigen::MatrixXd logits = c.hidden * w1_;
    return {std::move(logits), std::move(c)};
  }

  std::vector<Eigen::MatrixXd> backward(const Cache& c, const Eigen::MatrixXd& logits_grad) const {
    std::vector<Eigen::MatrixXd> out(2);
    out[1] = c.hidden.transpose() * logits_grad;
    const Eigen::MatrixXd grad_pre =
        ((logits_grad * w1_.transpose()).array() * activation_derivative(activation_, c.pre).array()).matrix();
    out[0] = c.input.transpose() * grad_pre;
    return out;
  }

  Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const { return mlp_forward(x, w0_, w1_, activation_); }
  std::vector<Eigen::MatrixXd*> parameters() { return {&w0_, &w1_}; }

 private:
  Activation activation_;
  Eigen::MatrixXd w0_, w1_;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline Eigen::MatrixXd drop_features(const Eigen::MatrixXd& x, double rate, Rng& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  Eigen::MatrixXd out = x;
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = keep(rng) ? out(i, j) * scale : 0.0;
  return out;
}

}  // namespace detail

/// Full-batch training on one split. Leaves `model` holding the parameters
/// of the best-validation epoch (first one on ties).
template <Trainable Model>
TrainHistory fit(Model& model, const Dataset& ds, const Split& split, const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty() || split.val.empty() || split.test.empty())
    throw DataError("train, val and test sets must be non-empty");
  const Eigen::MatrixXd& x = ds.graph.features();
  const std::vector<int>& labels = ds.labels();

  const auto params = model.parameters();
  std::vector<Eigen::MatrixXd> best;
  for (auto* p : params) best.push_back(*p);

  Adam adam(cfg.lr);
  Sgd sgd(cfg.lr);
  Rng dropout_rng(mix_seed(cfg.seed, 0xd409ULL));

  TrainHistory h;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;

    const auto [logits, cache] =
        cfg.dropout > 0.0 ? model.forward(detail::drop_features(x, cfg.dropout, dropout_rng)) : model.forward(x);
    rec.train_loss = cross_entropy(logits, labels, split.train);
    auto grads = model.backward(cache, cross_entropy_grad(logits, labels, split.train));
    if (cfg.weight_decay > 0.0)
      for (std::size_t k = 0; k < params.size(); ++k) grads[k] += cfg.weight_decay * *params[k];
    if (cfg.optimiser == Optimiser::adam)
      adam.step(params, grads);
    else
      sgd.step(params, grads);

    const Eigen::MatrixXd eval = model.predict(x);
    rec.train_acc = accuracy(eval, labels, split.train);
    rec.val_acc = accuracy(eval, labels, split.val);
    rec.test_acc = accuracy(eval, labels, split.test);
    rec.seconds = detail::seconds_since(t0);
    h.epochs.push_back(rec);

    if (rec.val_acc > h.best_val_acc) {
      h.best_val_acc = rec.val_acc;
      h.best_epoch = epoch;
      h.test_acc_at_best = rec.test_acc;
      for (std::size_t k = 0; k < params.size(); ++k) best[k] = *params[k];
    } else if (cfg.patience > 0 && epoch - h.best_epoch >= cfg.patience) {
      break;
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) *params[k] = best[k];
  return h;
}

/// Sheaf plus the (optionally normalised) Laplacian the model diffuses with.
struct PreparedSheaf {
  Sheaf sheaf;
  BlockLaplacian laplacian;
  double seconds = 0.0;
};

inline PreparedSheaf prepare_sheaf(const Graph& g, SheafKind kind, Eigen::Index d, std::uint64_t seed,
                                   bool normalised) {
  const auto t0 = std::chrono::steady_clock::now();
  PreparedSheaf out;
  out.sheaf = build_sheaf(g, kind, d, seed);
  out.laplacian = sheaf_laplacian(out.sheaf, g);
  if (normalised) out.laplacian = normalise(out.laplacian);
  out.seconds = detail::seconds_since(t0);
  return out;
}

inline const Split& split_at(const Dataset& ds, std::size_t index) {
  if (index >= ds.splits.size()) throw UsageError("split out of range");
  return ds.splits[index];
}

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Builds the sheaf (timed separately) and trains the diffusion classifier.
inline TrainResult train(const Dataset& ds, SheafKind kind, const TrainConfig& cfg, std::size_t split_index = 0) {
  cfg.validate();
  const Split& split = split_at(ds, split_index);
  auto prepared = prepare_sheaf(ds.graph, kind, cfg.d, cfg.seed, cfg.use_normalised);
  SheafDiffusionNet net(std::move(prepared.laplacian),
                        init_params(ds.graph.feature_dim(), ds.num_classes, cfg.d, cfg.f, cfg.layers, cfg.activation,
                                    cfg.tied_weights, cfg.seed));
  TrainResult r;
  r.history = fit(net, ds, split, cfg);
  r.history.sheaf_build_seconds = prepared.seconds;
  r.params = net.params();
  return r;
}

/// GCN or MLP baseline through the same loop.
inline TrainHistory train_baseline(const Dataset& ds, ModelKind model, const TrainConfig& cfg,
                                   std::size_t split_index = 0) {
  cfg.validate();
  const Split& split = split_at(ds, split_index);
  switch (model) {
    case ModelKind::gcn: {
      GcnNet net(ds.graph, cfg.hidden, ds.num_classes, cfg.activation, cfg.seed);
      return fit(net, ds, split, cfg);
    }
    case ModelKind::mlp: {
      MlpNet net(ds.graph.feature_dim(), cfg.hidden, ds.num_classes, cfg.activation, cfg.seed);
      return fit(net, ds, split, cfg);
    }
    case ModelKind::nsd: break;
  }
  throw UsageError("train_baseline expects gcn or mlp");
}

struct BenchResult {
  double sheaf_build_seconds = 0.0;
  double mean_epoch_seconds = 0.0;
  double std_epoch_seconds = 0.0;
  int epochs = 0;
};

/// Runtime profile: one sheaf precompute followed by at least 20 timed
/// epochs with early stopping disabled.
inline BenchResult bench(const Dataset& ds, SheafKind kind, TrainConfig cfg, std::size_t split_index = 0) {
  cfg.patience = 0;
  cfg.epochs = std::max(cfg.epochs, 20);
  const auto r = train(ds, kind, cfg, split_index);
  BenchResult b;
  b.sheaf_build_seconds = r.history.sheaf_build_seconds;
  b.mean_epoch_seconds = r.history.mean_epoch_seconds();
  b.std_epoch_seconds = r.history.std_epoch_seconds();
  b.epochs = static_cast<int>(r.history.epochs.size());
  return b;
}

}  // namespace sheaflab
