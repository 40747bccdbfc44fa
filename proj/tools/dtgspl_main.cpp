// Copyright 2026 The dtgspl Authors
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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtgspl/harness.hpp"
#include "dtgspl/lattice.hpp"
#include "dtgspl/metrics.hpp"
#include "dtgspl/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dtgspl;

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  int64_t seed = -1;
};

harness::RunConfig load_config(const CommonOpts& opts) {
  harness::RunConfig cfg = opts.config.empty()
                               ? harness::RunConfig{}
                               : harness::RunConfig::from_file(opts.config);
  if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
  return cfg;
}

json interval_json(const Interval& iv) { return json::array({iv.start(), iv.end()}); }

void cmd_gen(const CommonOpts& opts, bool split) {
  const harness::RunConfig cfg = load_config(opts);
  const synth::Dataset ds = synth::gen_dataset(cfg.gen, cfg.seed);
  fs::create_directories(opts.out);
  if (split) {
    synth::save_jsonl((fs::path(opts.out) / "train.jsonl").string(), ds, false);
    synth::save_jsonl((fs::path(opts.out) / "oracle.jsonl").string(), ds, true);
  } else {
    synth::save_jsonl((fs::path(opts.out) / "dataset.jsonl").string(), ds, true);
  }
  std::ofstream meta(fs::path(opts.out) / "gen_meta.json", std::ios::binary);
  meta << json{{"config", cfg.to_json()}, {"seed", cfg.seed}}.dump(2) << "\n";
}

void cmd_lattice_dump(int n, int base) {
  const auto set = lattice::ProposalSet::build(n, base);
  for (const auto& p : set.items()) {
    std::printf("%d %d %.8f %.8f\n", p.a, p.b, p.span.start(), p.span.end());
  }
}

void write_metrics_csv(const std::string& path, harness::RunConfig& cfg,
                       nn::ParamStore& params,
                       const std::vector<synth::TrainSample>& data,
                       const harness::OracleMap* oracle) {
  std::vector<metrics::MetricReport> rows;
  if (oracle) {
    rows = harness::evaluate(params, cfg, data, *oracle);
  } else {
    const auto records = harness::predict_records(params, cfg, data);
    for (const int n : {1, 5}) {
      for (const double alpha : {0.3, 0.5, 0.7}) {
        rows.push_back(metrics::MetricReport{
            "R@N", n, 0, alpha, 0.0, metrics::recall_single(records, n, alpha),
            static_cast<int>(records.size()), 0});
      }
    }
  }
  metrics::write_report_csv(path, rows);
}

void cmd_train(const CommonOpts& opts, const std::string& data_path,
               const std::string& oracle_path) {
  const harness::RunConfig cfg = load_config(opts);
  const auto data = synth::load_train_jsonl(data_path);
  harness::OracleMap oracle;
  if (!oracle_path.empty()) oracle = synth::load_oracle_jsonl(oracle_path);
  harness::TrainResult result =
      harness::train(cfg, data, oracle_path.empty() ? nullptr : &oracle);
  fs::create_directories(opts.out);
  harness::save_checkpoint((fs::path(opts.out) / "checkpoint.json").string(),
                           result.params, cfg, cfg.epochs);
  harness::write_epoch_log_csv((fs::path(opts.out) / "epoch_log.csv").string(),
                               result.logs);
  write_metrics_csv((fs::path(opts.out) / "metrics.csv").string(), result.cfg,
                    result.params, data, oracle_path.empty() ? nullptr : &oracle);
}

void cmd_estimate(const std::string& ckpt_path, const std::string& data_path,
                  const std::string& out_path) {
  harness::Checkpoint ckpt = harness::load_checkpoint(ckpt_path);
  const auto data = synth::load_train_jsonl(data_path);
  const auto pseudo =
      harness::estimate_all(ckpt.params, ckpt.cfg, data, ckpt.epochs_trained);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (size_t i = 0; i < data.size(); ++i) {
    json spans = json::array();
    json scores = json::array();
    for (const auto& item : pseudo[i].items) {
      spans.push_back(interval_json(item.span));
      scores.push_back(json::array({item.s_match, item.s_semantic}));
    }
    out << json{{"id", data[i].id},
                {"pseudo", std::move(spans)},
                {"scores", std::move(scores)},
                {"epoch", pseudo[i].epoch}}
               .dump()
        << "\n";
  }
}

void cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                 const std::string& out_path) {
  harness::Checkpoint ckpt = harness::load_checkpoint(ckpt_path);
  const auto data = synth::load_train_jsonl(data_path);
  const auto all = harness::predict_all(ckpt.params, ckpt.cfg, data);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  for (const auto& sp : all) {
    json se = json::array();
    json cw = json::array();
    for (const auto& p : sp.preds.outputs) {
      se.push_back(interval_json(p.se));
      cw.push_back(json::array({p.cw.center, p.cw.width}));
    }
    out << json{{"id", sp.id}, {"predictions", std::move(se)}, {"cw", std::move(cw)}}
               .dump()
        << "\n";
  }
}

void cmd_eval(const std::string& records_path, const std::string& out_path, int n,
              int g, bool per_sample) {
  const auto records = metrics::load_records_jsonl(records_path);
  if (records.empty()) throw std::runtime_error("eval: no records in " + records_path);
  const auto agg = per_sample ? metrics::MultiAgg::PerSample : metrics::MultiAgg::Pooled;
  std::vector<metrics::MetricReport> rows;
  bool single = true;
  for (const auto& r : records) single = single && r.annotations.size() == 1;
  if (single) {
    for (const int nn : {1, n}) {
      for (const double alpha : {0.3, 0.5, 0.7}) {
        rows.push_back(metrics::MetricReport{
            "R@N", nn, 0, alpha, 0.0, metrics::recall_single(records, nn, alpha),
            static_cast<int>(records.size()), 0});
      }
    }
  }
  rows.push_back(metrics::MetricReport{"R@(N;G)", n, g, 0.5, 0.0,
                                       metrics::recall_multi(records, n, g, 0.5, agg),
                                       static_cast<int>(records.size()), 0});
  for (const double beta : {0.5, 0.4}) {
    int filtered = 0;
    const double v =
        metrics::recall_multi_filtered(records, n, g, 0.5, beta, agg, &filtered);
    rows.push_back(metrics::MetricReport{"R_b@(N;G)", n, g, 0.5, beta, v,
                                         static_cast<int>(records.size()) - filtered,
                                         filtered});
  }
  metrics::write_report_csv(out_path, rows);
}

void cmd_ablate(const CommonOpts& opts, const std::string& mode,
                const std::string& data_path, const std::string& oracle_path) {
  const harness::RunConfig cfg = load_config(opts);
  const auto data = synth::load_train_jsonl(data_path);
  const auto oracle = synth::load_oracle_jsonl(oracle_path);
  const harness::AblationResult res = harness::ablate(cfg, mode, data, oracle);
  fs::create_directories(opts.out);
  std::ofstream out(fs::path(opts.out) / ("ablation_" + mode + ".csv"),
                    std::ios::binary);
  out << "metric,n,g,alpha,beta,full,variant,samples\n";
  char buf[200];
  for (size_t i = 0; i < res.full.size(); ++i) {
    const auto& f = res.full[i];
    const auto& v = res.variant[i];
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.2f,%.2f,%.4f,%.4f,%d\n",
                  f.metric.c_str(), f.n, f.g, f.alpha, f.beta, f.value, v.value,
                  f.samples);
    out << buf;
  }
  harness::write_epoch_log_csv((fs::path(opts.out) / "full_epoch_log.csv").string(),
                               res.full_logs);
  harness::write_epoch_log_csv(
      (fs::path(opts.out) / (mode + "_epoch_log.csv")).string(), res.variant_logs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diverse temporal grounding under single positive labels"};
  app.require_subcommand(1);

  CommonOpts gen_opts;
  bool gen_split = false;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--config", gen_opts.config, "key = value config file");
  gen->add_option("--seed", gen_opts.seed, "seed override");
  gen->add_option("--out", gen_opts.out, "output directory")->required();
  gen->add_flag("--split", gen_split, "write train.jsonl (no oracle labels) + oracle.jsonl");

  auto* lat = app.add_subcommand("lattice", "proposal lattice tools");
  int lat_n = 16, lat_base = 16;
  auto* lat_dump = lat->add_subcommand("dump", "print one 'a b start end' row per proposal");
  lat_dump->add_option("--n", lat_n, "proposal granularity");
  lat_dump->add_option("--base", lat_base, "stride base block");

  CommonOpts train_opts;
  std::string train_data, train_oracle;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", train_opts.config, "key = value config file");
  train->add_option("--seed", train_opts.seed, "seed override");
  train->add_option("--data", train_data, "training JSONL")->required();
  train->add_option("--oracle", train_oracle, "oracle JSONL for diagnostics");
  train->add_option("--out", train_opts.out, "output directory")->required();

  std::string est_ckpt, est_data, est_out;
  auto* est = app.add_subcommand("estimate", "extract pseudo-labels per sample");
  est->add_option("--checkpoint", est_ckpt)->required();
  est->add_option("--data", est_data)->required();
  est->add_option("--out", est_out)->required();

  std::string pred_ckpt, pred_data, pred_out;
  auto* pred = app.add_subcommand("predict", "emit ranked moment predictions");
  pred->add_option("--checkpoint", pred_ckpt)->required();
  pred->add_option("--data", pred_data)->required();
  pred->add_option("--out", pred_out)->required();

  std::string eval_records, eval_out;
  int eval_n = 5, eval_g = 5;
  bool eval_per_sample = false;
  auto* eval = app.add_subcommand("eval", "score prediction records");
  eval->add_option("--records", eval_records, "JSONL with predictions + annotations")
      ->required();
  eval->add_option("--out", eval_out, "CSV report path")->required();
  eval->add_option("--n", eval_n, "top-N predictions");
  eval->add_option("--g", eval_g, "annotations per record");
  eval->add_flag("--per-sample", eval_per_sample,
                 "aggregate per record instead of pooling annotations");

  CommonOpts abl_opts;
  std::string abl_mode, abl_data, abl_oracle;
  auto* abl = app.add_subcommand("ablate", "train a variant against the full model");
  abl->add_option("--config", abl_opts.config, "key = value config file");
  abl->add_option("--seed", abl_opts.seed, "seed override");
  abl->add_option("--mode", abl_mode,
                  "no_epr | no_matching | no_reconstruction | no_augmenting")
      ->required();
  abl->add_option("--data", abl_data)->required();
  abl->add_option("--oracle", abl_oracle)->required();
  abl->add_option("--out", abl_opts.out)->required();

  std::string rep_run, rep_out;
  auto* rep = app.add_subcommand("report", "summarize a finished run directory");
  rep->add_option("--run", rep_run)->required();
  rep->add_option("--out", rep_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) cmd_gen(gen_opts, gen_split);
    if (lat->parsed()) {
      if (!lat_dump->parsed()) throw std::runtime_error("lattice: expected 'dump'");
      cmd_lattice_dump(lat_n, lat_base);
    }
    if (train->parsed()) cmd_train(train_opts, train_data, train_oracle);
    if (est->parsed()) cmd_estimate(est_ckpt, est_data, est_out);
    if (pred->parsed()) cmd_predict(pred_ckpt, pred_data, pred_out);
    if (eval->parsed()) cmd_eval(eval_records, eval_out, eval_n, eval_g, eval_per_sample);
    if (abl->parsed()) cmd_ablate(abl_opts, abl_mode, abl_data, abl_oracle);
    if (rep->parsed()) harness::report(rep_run, rep_out);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
