// Copyright 2026 The protoclass Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "protoclass/episode.hpp"
#include "protoclass/head.hpp"
#include "protoclass/inference.hpp"
#include "protoclass/run_config.hpp"
#include "protoclass/store.hpp"
#include "protoclass/synth.hpp"
#include "protoclass/trainer.hpp"

namespace protoclass::cli {

namespace {

namespace fs = std::filesystem;

// Key/value pairs from a config file that apply to `command`: top-level
// scalars plus everything inside a table named after the command.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path.string() + "'");
  std::vector<std::pair<std::string, std::string>> out;

  if (path.extension() == ".json") {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed JSON config: " + std::string(e.what()));
    }
    auto scalar = [](const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_array()) {
        std::string joined;
        for (const auto& e : v) {
          if (!joined.empty()) joined += ',';
          joined += e.is_string() ? e.get<std::string>() : e.dump();
        }
        return joined;
      }
      return v.dump();
    };
    for (const auto& [key, value] : doc.items()) {
      if (value.is_object()) {
        if (key != command) continue;
        for (const auto& [k, v] : value.items()) out.emplace_back(k, scalar(v));
      } else {
        out.emplace_back(key, scalar(value));
      }
    }
    return out;
  }

  CLI::ConfigTOML toml;
  for (const auto& item : toml.from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents.front() == command)) continue;
    std::string joined;
    for (const auto& v : item.inputs) {
      if (!joined.empty()) joined += ',';
      joined += v;
    }
    out.emplace_back(item.name, joined);
  }
  return out;
}

// Splices config-file values in front of command-line flags; a flag given on
// the command line wins.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  auto it = std::find_if(args.begin(), args.end(),
                         [](const std::string& a) { return a == "--config" || a.rfind("--config=", 0) == 0; });
  if (it == args.end() || args.empty()) return args;
  std::string path;
  if (*it == "--config") {
    if (std::next(it) == args.end()) throw Error("--config needs a path");
    path = *std::next(it);
    args.erase(it, std::next(it, 2));
  } else {
    path = it->substr(std::string("--config=").size());
    args.erase(it);
  }
  if (args.empty()) return args;
  const std::string command = args.front();
  std::vector<std::string> injected;
  for (const auto& [key, value] : read_config(path, command)) {
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) injected.push_back(flag + "=" + value);
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto k = std::stoul(item, &used);
    if (used != item.size() || k == 0) throw Error("invalid k value '" + item + "'");
    ks.push_back(k);
  }
  if (ks.empty()) throw Error("k list is empty");
  return ks;
}

Metric parse_metric(const std::string& text) {
  if (text == "cosine") return Metric::Cosine;
  if (text == "sqeuclidean" || text == "euclidean") return Metric::NegSqEuclidean;
  throw Error("unknown metric '" + text + "'");
}

Method parse_method(const std::string& text) {
  if (text == "proto" || text == "prototype") return Method::Prototype;
  if (text == "nn") return Method::NearestNeighbor;
  throw Error("unknown method '" + text + "'");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_run_sidecar(const fs::path& output, const RunConfig& run) {
  nlohmann::json j = {{"config_digest", run.digest()}, {"run_config", run.document()}};
  write_text(fs::path(output.string() + ".run.json"), j.dump(2) + "\n");
}

fs::path checkpoint_path(const fs::path& out, std::size_t episode) {
  auto p = out;
  p.replace_filename(out.stem().string() + ".ep" + std::to_string(episode) + out.extension().string());
  return p;
}

void write_head_with_sidecar(const fs::path& path, const ProjectionHead& head, std::size_t episode,
                             std::uint64_t snapshots, const RunConfig& run) {
  save_head(head, path);
  if (!(load_head(path) == head)) throw Error("checkpoint '" + path.string() + "' did not read back identically");
  nlohmann::json j = {{"episode", episode},
                      {"config_digest", run.digest()},
                      {"snapshot_count", snapshots},
                      {"run_config", run.document()}};
  write_text(fs::path(path.string() + ".json"), j.dump(2) + "\n");
}

struct EvalFlags {
  std::string store;
  std::string head;
  std::string method = "proto";
  std::string splits = "train";
  std::string test_split = "test";
  std::string k = "5,10";
  std::string metric = "cosine";
  bool normalize_inputs = true;
  bool normalize_prototypes = false;

  EvalOptions options() const {
    EvalOptions o;
    o.method = parse_method(method);
    o.bank.splits = SplitSet::parse(splits);
    o.bank.normalize_inputs = normalize_inputs;
    o.bank.normalize_prototypes = normalize_prototypes;
    o.test_split = parse_split(test_split);
    o.k_list = parse_k_list(k);
    o.metric = parse_metric(metric);
    return o;
  }
};

void add_eval_flags(CLI::App* cmd, EvalFlags& f, bool with_head) {
  cmd->add_option("--store", f.store, "FSEB embedding store")->required();
  if (with_head) cmd->add_option("--head", f.head, "FSHD head checkpoint")->required();
  cmd->add_option("--method", f.method, "proto | nn")->capture_default_str();
  cmd->add_option("--splits", f.splits, "support splits, e.g. train,val")->capture_default_str();
  cmd->add_option("--test-split", f.test_split, "split to classify")->capture_default_str();
  cmd->add_option("--k", f.k, "comma-separated k values")->capture_default_str();
  cmd->add_option("--metric", f.metric, "cosine | sqeuclidean")->capture_default_str();
  cmd->add_option("--normalize-inputs", f.normalize_inputs, "L2-normalize embeddings before the head")
      ->capture_default_str();
  cmd->add_option("--normalize-prototypes", f.normalize_prototypes, "L2-normalize prototypes after averaging")
      ->capture_default_str();
}

int run_eval(const EvalFlags& f, const ProjectionHead& head, const std::string& command,
             const std::string& report_path, const std::string& predictions_path, std::ostream& out) {
  const auto options = f.options();
  const auto store = load_store(f.store, StoreFormat::Binary);
  RunConfig run(command, to_json(options));
  run.add_input("store", f.store);
  if (!f.head.empty()) run.add_input("head", f.head);

  const auto result = evaluate(store, head, options);
  const auto json = report_to_json(result.report, {{"config_digest", run.digest()}});
  if (!report_path.empty()) write_text(report_path, json);
  if (!predictions_path.empty()) {
    std::ostringstream csv;
    write_predictions_csv(result.predictions, csv);
    write_text(predictions_path, csv.str());
  }
  out << "digest " << run.digest() << "\n";
  for (const auto& [k, v] : result.report.recall_at) out << "recall@" << k << " " << v << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Few-shot prototype classification over precomputed embeddings", "protoclass"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "random seed")->envname("PROTOCLASS_SEED")->capture_default_str();
  };

  // ingest
  std::string ingest_csv, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Convert a CSV fixture into an FSEB store");
  ingest->add_option("--csv", ingest_csv, "input CSV")->required();
  ingest->add_option("--out", ingest_out, "output FSEB path")->required();

  // synth
  SynthConfig synth_cfg;
  std::string synth_law = "longtail", synth_out;
  std::size_t law_min = 1, law_max = 4, law_count = 4;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic long-tailed embedding store");
  synth->add_option("--classes", synth_cfg.num_classes)->capture_default_str();
  synth->add_option("--dim", synth_cfg.dimension)->capture_default_str();
  synth->add_option("--law", synth_law, "longtail | uniform")->capture_default_str();
  synth->add_option("--min", law_min, "long-tail minimum count")->capture_default_str();
  synth->add_option("--max", law_max, "long-tail maximum count")->capture_default_str();
  synth->add_option("--count", law_count, "uniform per-class count")->capture_default_str();
  synth->add_option("--sigma", synth_cfg.sigma)->capture_default_str();
  synth->add_option("--val-fraction", synth_cfg.val_fraction)->capture_default_str();
  synth->add_option("--test-per-class", synth_cfg.test_per_class)->capture_default_str();
  synth->add_option("--out", synth_out, "output FSEB path")->required();
  add_seed(synth);

  // train
  TrainConfig train_cfg;
  std::string train_store, train_out, train_log, train_init, train_splits = "train", train_opt = "adam";
  std::string train_arch = "affine";
  std::size_t swa_start = 0, hidden = 0, out_dim = 0;
  auto* train_cmd = app.add_subcommand("train", "Episodic prototypical training of a projection head");
  train_cmd->add_option("--store", train_store, "FSEB embedding store")->required();
  train_cmd->add_option("--out", train_out, "output FSHD head checkpoint")->required();
  train_cmd->add_option("--log", train_log, "training log CSV (default <out>.log.csv)");
  train_cmd->add_option("--init", train_init, "initial head checkpoint (default identity)");
  train_cmd->add_option("--ways", train_cfg.episode.ways, "classes per episode (K)")->capture_default_str();
  train_cmd->add_option("--shots", train_cfg.episode.shots, "support samples per class (S)")->capture_default_str();
  train_cmd->add_option("--queries", train_cfg.episode.queries, "query samples per class (Q)")->capture_default_str();
  train_cmd->add_option("--episodes", train_cfg.episodes)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.base_lr, "learning rate before SWA")->capture_default_str();
  train_cmd->add_option("--swa-lr", train_cfg.swa_lr, "learning rate once SWA starts")->capture_default_str();
  auto* swa_opt = train_cmd->add_option("--swa-start", swa_start, "first averaged episode (default episodes-100)");
  train_cmd->add_option("--optimizer", train_opt, "adam | sgd")->capture_default_str();
  train_cmd->add_option("--beta1", train_cfg.adam.beta1)->capture_default_str();
  train_cmd->add_option("--beta2", train_cfg.adam.beta2)->capture_default_str();
  train_cmd->add_option("--eps", train_cfg.adam.epsilon)->capture_default_str();
  train_cmd->add_option("--arch", train_arch, "affine | mlp")->capture_default_str();
  train_cmd->add_option("--hidden", hidden, "MLP hidden width (default input dim)");
  train_cmd->add_option("--out-dim", out_dim, "head output dim (default input dim)");
  train_cmd->add_option("--splits", train_splits, "episode source splits")->capture_default_str();
  train_cmd->add_option("--normalize-inputs", train_cfg.normalize_inputs)->capture_default_str();
  train_cmd->add_option("--checkpoint-every", train_cfg.checkpoint_every)->capture_default_str();
  add_seed(train_cmd);

  // eval / baseline / predict
  EvalFlags eval_flags;
  std::string eval_report, eval_predictions;
  auto* eval_cmd = app.add_subcommand("eval", "Recall@k of a trained head");
  add_eval_flags(eval_cmd, eval_flags, true);
  eval_cmd->add_option("--report", eval_report, "EvalReport JSON output");
  eval_cmd->add_option("--predictions", eval_predictions, "predictions CSV output");

  EvalFlags base_flags;
  std::string base_report, base_predictions;
  auto* base_cmd = app.add_subcommand("baseline", "Recall@k of the untrained (identity) head");
  add_eval_flags(base_cmd, base_flags, false);
  base_cmd->add_option("--report", base_report, "EvalReport JSON output");
  base_cmd->add_option("--predictions", base_predictions, "predictions CSV output");

  EvalFlags pred_flags;
  pred_flags.k = "5";
  std::string pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "Ranked top-k labels for a split");
  add_eval_flags(pred_cmd, pred_flags, false);
  pred_cmd->add_option("--head", pred_flags.head, "FSHD head checkpoint (default identity)");
  pred_cmd->add_option("--out", pred_out, "predictions CSV output")->required();

  try {
    auto args = apply_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (ingest->parsed()) {
      RunConfig run("ingest", nlohmann::json::object());
      run.add_input("csv", ingest_csv);
      const auto store = load_store(ingest_csv, StoreFormat::Csv);
      save_store(store, ingest_out);
      if (!(load_store(ingest_out, StoreFormat::Binary) == store)) throw Error("written store did not read back");
      write_run_sidecar(ingest_out, run);
      out << "digest " << run.digest() << "\n";
      out << "wrote " << store.size() << " records of dimension " << store.dimension() << " to " << ingest_out << "\n";
      return 0;
    }

    if (synth->parsed()) {
      synth_cfg.seed = seed;
      if (synth_law == "longtail") {
        synth_cfg.count_law = LongTailCount{law_min, law_max};
      } else if (synth_law == "uniform") {
        synth_cfg.count_law = UniformCount{law_count};
      } else {
        throw Error("unknown count law '" + synth_law + "'");
      }
      RunConfig run("synth", to_json(synth_cfg));
      const auto store = generate(synth_cfg);
      save_store(store, synth_out);
      if (!(load_store(synth_out, StoreFormat::Binary) == store)) throw Error("written store did not read back");
      write_run_sidecar(synth_out, run);
      out << "digest " << run.digest() << "\n";
      out << "wrote " << store.size() << " records to " << synth_out << "\n";
      return 0;
    }

    if (train_cmd->parsed()) {
      train_cfg.episode.seed = seed;
      train_cfg.episode.source_splits = SplitSet::parse(train_splits);
      if (swa_opt->count() > 0) train_cfg.swa_start_episode = swa_start;
      if (train_opt == "adam") {
        train_cfg.optimizer = OptimizerKind::Adam;
      } else if (train_opt == "sgd") {
        train_cfg.optimizer = OptimizerKind::Sgd;
      } else {
        throw Error("unknown optimizer '" + train_opt + "'");
      }
      const auto store = load_store(train_store, StoreFormat::Binary);
      const std::size_t dim = store.dimension();
      ProjectionHead initial = ProjectionHead::identity(dim);
      nlohmann::json params = to_json(train_cfg);
      if (!train_init.empty()) {
        initial = load_head(train_init);
        params["init"] = "file";
      } else if (train_arch == "mlp") {
        initial = ProjectionHead::mlp_random(dim, hidden ? hidden : dim, out_dim ? out_dim : dim, seed);
        params["init"] = "mlp_random";
        params["hidden"] = initial.hidden_dim();
        params["out_dim"] = initial.output_dim();
      } else if (train_arch == "affine") {
        if (out_dim && out_dim != dim) {
          throw Error("an affine head with --out-dim != input dim has no identity initialization");
        }
        params["init"] = "identity";
      } else {
        throw Error("unknown architecture '" + train_arch + "'");
      }
      RunConfig run("train", params);
      run.add_input("store", train_store);
      if (!train_init.empty()) run.add_input("init", train_init);

      const auto result = train(store, train_cfg, initial, [&](const Checkpoint& c) {
        write_head_with_sidecar(checkpoint_path(train_out, c.episode), c.head, c.episode, c.snapshot_count, run);
      });
      write_head_with_sidecar(train_out, result.head, train_cfg.episodes, result.swa.snapshot_count, run);
      std::ostringstream log;
      write_train_log_csv(result.log, log);
      write_text(train_log.empty() ? train_out + ".log.csv" : train_log, log.str());
      out << "digest " << run.digest() << "\n";
      if (!result.log.empty()) {
        out << "final episode loss " << result.log.back().loss << ", swa snapshots " << result.swa.snapshot_count
            << "\n";
      }
      return 0;
    }

    if (eval_cmd->parsed()) {
      if (!fs::exists(eval_flags.head)) throw Error("head checkpoint '" + eval_flags.head + "' does not exist");
      return run_eval(eval_flags, load_head(eval_flags.head), "eval", eval_report, eval_predictions, out);
    }

    if (base_cmd->parsed()) {
      const auto store = load_store(base_flags.store, StoreFormat::Binary);
      return run_eval(base_flags, ProjectionHead::identity(store.dimension()), "baseline", base_report,
                      base_predictions, out);
    }

    if (pred_cmd->parsed()) {
      const auto options = pred_flags.options();
      const auto store = load_store(pred_flags.store, StoreFormat::Binary);
      const auto head = pred_flags.head.empty() ? ProjectionHead::identity(store.dimension()) : load_head(pred_flags.head);
      RunConfig run("predict", to_json(options));
      run.add_input("store", pred_flags.store);
      if (!pred_flags.head.empty()) run.add_input("head", pred_flags.head);
      const std::size_t k = *std::max_element(options.k_list.begin(), options.k_list.end());
      const auto predictions = predict(store, head, options, k);
      std::ostringstream csv;
      write_predictions_csv(predictions, csv);
      write_text(pred_out, csv.str());
      write_run_sidecar(pred_out, run);
      out << "digest " << run.digest() << "\n";
      out << "wrote " << predictions.size() << " predictions to " << pred_out << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace protoclass::cli
