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

// sheaflab command-line driver. Metrics go to stdout as JSON lines,
// diagnostics and errors to stderr.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sheaflab/sheaflab.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sheaflab;

namespace {

struct Common {
  std::string dataset;
  std::string config;
  std::string kind = "connection";
  std::optional<Eigen::Index> d;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string out;
};

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : load_config(c.config);
  if (c.d) cfg.d = *c.d;
  if (c.seed) cfg.seed = *c.seed;
  if (c.epochs) cfg.epochs = *c.epochs;
  cfg.validate();
  return cfg;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void emit(const json& j) { std::cout << j.dump() << '\n'; }

int cmd_build_sheaf(const Common& c, const std::string& laplacian_out, bool unnormalised) {
  const auto ds = load_dataset(c.dataset);
  const auto kind = parse_sheaf_kind(c.kind);
  const Eigen::Index d = c.d.value_or(TrainConfig{}.d);
  const std::uint64_t seed = c.seed.value_or(0);

  const auto t0 = std::chrono::steady_clock::now();
  const Sheaf s = build_sheaf(ds.graph, kind, d, seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    auto out = open_output(c.out);
    write_sheaf_csv(out, s);
  }
  if (!laplacian_out.empty()) {
    auto L = sheaf_laplacian(s, ds.graph);
    if (!unnormalised) L = normalise(L);
    auto out = open_output(laplacian_out);
    write_laplacian_triplets(out, L);
  }
  const json diag{{"record", "diagnostics"},
                  {"kind", to_string(kind)},
                  {"d", d},
                  {"n", ds.graph.num_nodes()},
                  {"edges", ds.graph.num_edges()},
                  {"padded_nodes", s.diagnostics.padded_nodes},
                  {"rank_completed_bases", s.diagnostics.rank_completed_bases},
                  {"singular_alignments", s.diagnostics.singular_alignments},
                  {"max_orthogonality_defect", max_orthogonality_defect(s)},
                  {"build_seconds", seconds}};
  open_output(c.out + ".diagnostics.json") << diag.dump(2) << '\n';
  emit(diag);
  return 0;
}

int cmd_train(const Common& c, const std::string& split_arg, const std::string& model_arg, bool quiet) {
  const auto ds = load_dataset(c.dataset);
  const auto cfg = resolve_config(c);
  const auto model = parse_model_kind(model_arg);
  const auto kind = parse_sheaf_kind(c.kind);

  std::vector<std::size_t> indices;
  if (split_arg == "all") {
    for (std::size_t k = 0; k < ds.splits.size(); ++k) indices.push_back(k);
  } else {
    std::size_t k = 0;
    try {
      k = text::parse_int<std::size_t>(split_arg, "--split");
    } catch (const DataError&) {
      throw UsageError("--split must be an index or 'all'");
    }
    split_at(ds, k);
    indices.push_back(k);
  }
  if (indices.empty()) throw DataError("dataset has no splits");

  std::vector<double> test_accs;
  for (auto k : indices) {
    const TrainHistory h =
        model == ModelKind::nsd ? train(ds, kind, cfg, k).history : train_baseline(ds, model, cfg, k);
    if (!quiet)
      for (const auto& e : h.epochs) emit(epoch_record(e, k));
    json summary = summary_record(h, k);
    summary["model"] = to_string(model);
    if (model == ModelKind::nsd) summary["kind"] = to_string(kind);
    emit(summary);
    test_accs.push_back(h.test_acc_at_best);
  }

  if (split_arg == "all") {
    double mean = 0.0;
    for (double a : test_accs) mean += a;
    mean /= static_cast<double>(test_accs.size());
    double var = 0.0;
    for (double a : test_accs) var += (a - mean) * (a - mean);
    const double sd = test_accs.size() > 1 ? std::sqrt(var / static_cast<double>(test_accs.size() - 1)) : 0.0;
    emit({{"record", "aggregate"},
          {"model", to_string(model)},
          {"splits", test_accs.size()},
          {"mean_test_acc", mean},
          {"std_test_acc", sd},
          {"test_accs", test_accs}});
  }
  return 0;
}

int cmd_spectrum(const Common& c, bool unnormalised) {
  const auto ds = load_dataset(c.dataset);
  const auto kind = parse_sheaf_kind(c.kind);
  const Eigen::Index d = c.d.value_or(TrainConfig{}.d);
  const Sheaf s = build_sheaf(ds.graph, kind, d, c.seed.value_or(0));
  auto L = sheaf_laplacian(s, ds.graph);
  if (!unnormalised) L = normalise(L);
  const Eigen::VectorXd ev = spectrum(L);
  auto out = open_output(c.out);
  out << "eigenvalue\n";
  for (Eigen::Index i = 0; i < ev.size(); ++i) out << text::format_double(ev(i)) << '\n';
  emit({{"record", "spectrum"},
        {"kind", to_string(kind)},
        {"size", ev.size()},
        {"min", ev.size() ? ev.minCoeff() : 0.0},
        {"max", ev.size() ? ev.maxCoeff() : 0.0}});
  return 0;
}

int cmd_bench(const Common& c, std::size_t split) {
  const auto ds = load_dataset(c.dataset);
  const auto cfg = resolve_config(c);
  const auto kind = parse_sheaf_kind(c.kind);
  const auto b = bench(ds, kind, cfg, split);
  emit({{"record", "bench"},
        {"kind", to_string(kind)},
        {"n", ds.graph.num_nodes()},
        {"epochs", b.epochs},
        {"sheaf_build_seconds", b.sheaf_build_seconds},
        {"mean_epoch_seconds", b.mean_epoch_seconds},
        {"std_epoch_seconds", b.std_epoch_seconds}});
  return 0;
}

int cmd_synth(const SbmParams& p, const std::string& out) {
  const auto ds = synth_sbm(p);
  save_dataset(ds, out);
  emit({{"record", "synth"},
        {"n", ds.graph.num_nodes()},
        {"edges", ds.graph.num_edges()},
        {"classes", ds.num_classes},
        {"feature_dim", ds.graph.feature_dim()},
        {"homophily", homophily(ds.graph)},
        {"expected_homophily", expected_sbm_homophily(p.classes, p.p_in, p.p_out)}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Connection-sheaf diffusion on graphs"};
  app.require_subcommand(1);

  Common c;
  auto add_dataset = [&](CLI::App* sub) { sub->add_option("--dataset", c.dataset, "dataset directory")->required(); };
  auto add_kind = [&](CLI::App* sub) {
    sub->add_option("--kind", c.kind, "connection, trivial, rand-edge or rand-node")->capture_default_str();
  };
  auto add_d = [&](CLI::App* sub) { sub->add_option("--d", c.d, "stalk dimension"); };
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", c.seed, "random seed"); };

  std::string laplacian_out;
  bool unnormalised = false;
  auto* build = app.add_subcommand("build-sheaf", "build a sheaf and export its transport maps");
  add_dataset(build);
  add_d(build);
  add_kind(build);
  add_seed(build);
  build->add_option("--out", c.out, "sheaf CSV path")->required();
  build->add_option("--laplacian-out", laplacian_out, "also export the Laplacian as triplets");
  build->add_flag("--unnormalised", unnormalised, "export L instead of the normalised operator");

  std::string split_arg = "0";
  std::string model_arg = "nsd";
  bool quiet = false;
  auto* tr = app.add_subcommand("train", "train a classifier on one split or all of them");
  add_dataset(tr);
  tr->add_option("--config", c.config, "JSON config file");
  add_d(tr);
  add_kind(tr);
  add_seed(tr);
  tr->add_option("--epochs", c.epochs, "override epoch count");
  tr->add_option("--split", split_arg, "split index or 'all'")->capture_default_str();
  tr->add_option("--model", model_arg, "nsd, gcn or mlp")->capture_default_str();
  tr->add_flag("--quiet", quiet, "only print summaries");

  auto* spec_cmd = app.add_subcommand("spectrum", "eigenvalues of the sheaf Laplacian");
  add_dataset(spec_cmd);
  add_d(spec_cmd);
  add_kind(spec_cmd);
  add_seed(spec_cmd);
  spec_cmd->add_option("--out", c.out, "eigenvalue CSV path")->required();
  spec_cmd->add_flag("--unnormalised", unnormalised, "use L instead of the normalised operator");

  std::size_t bench_split = 0;
  auto* be = app.add_subcommand("bench", "time sheaf construction and training epochs");
  add_dataset(be);
  be->add_option("--config", c.config, "JSON config file");
  add_d(be);
  add_kind(be);
  add_seed(be);
  be->add_option("--epochs", c.epochs, "epochs to time (at least 20)");
  be->add_option("--split", bench_split, "split index")->capture_default_str();

  SbmParams sbm;
  std::string synth_out;
  auto* sy = app.add_subcommand("synth", "write a stochastic block model dataset");
  sy->add_option("--out", synth_out, "output directory")->required();
  sy->add_option("--n", sbm.n, "node count")->capture_default_str();
  sy->add_option("--classes", sbm.classes, "class count")->capture_default_str();
  sy->add_option("--p-in", sbm.p_in, "within-class edge probability")->capture_default_str();
  sy->add_option("--p-out", sbm.p_out, "between-class edge probability")->capture_default_str();
  sy->add_option("--features", sbm.feature_dim, "feature dimension (default: class count)");
  sy->add_option("--mu", sbm.separation, "distance between class means")->capture_default_str();
  sy->add_option("--seed", sbm.seed, "random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*build) return cmd_build_sheaf(c, laplacian_out, unnormalised);
    if (*tr) return cmd_train(c, split_arg, model_arg, quiet);
    if (*spec_cmd) return cmd_spectrum(c, unnormalised);
    if (*be) return cmd_bench(c, bench_split);
    if (*sy) return cmd_synth(sbm, synth_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalGuard& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
