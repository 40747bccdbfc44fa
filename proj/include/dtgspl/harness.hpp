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

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtgspl/dmr.hpp"
#include "dtgspl/metrics.hpp"
#include "dtgspl/nn.hpp"
#include "dtgspl/pme.hpp"
#include "dtgspl/synth.hpp"

namespace dtgspl::harness {

// Everything one run needs, with the defaults the benchmarks use.
struct RunConfig {
  synth::GenConfig gen;

  // model
  int d_m = 32;
  int d_l = 16;
  int layers = 1;
  int ffn_hidden = 64;

  // proposals
  int proposal_n = 16;
  int proposal_base = 16;

  // heads and losses
  int n_outputs = 5;
  double k = 5.0;  // expected positives per sample; tracks n_outputs by default
  double gamma1 = 0.1;
  double gamma2 = 0.05;
  double lambda = 0.5;
  double t_thresh = 0.5;
  double nms_thresh = 0.5;
  int n_s = 5;
  int t_s = 2;

  // optimization
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch = 16;
  int epochs = 30;
  uint64_t seed = 7;

  // ablations and options
  bool no_epr = false;
  bool no_matching = false;
  bool no_reconstruction = false;
  bool no_augmenting = false;
  bool semantic_vs_query = false;
  metrics::MultiAgg agg = metrics::MultiAgg::Pooled;
  double oracle_match_iou = 0.5;  // pseudo-label diagnostic threshold

  // Key-value config file: one `key = value` per line, `#` comments.
  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);
  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch = 0;
  double l_total = 0, l_pme = 0, l_match = 0, l_semantic = 0, l_dmr = 0;
  double score_sum = 0;      // mean over samples of sum(s_match)
  double pseudo_used = 0;    // mean pseudo-labels consumed in this epoch
  double pseudo_count = 0;   // mean pseudo-labels estimated at epoch end
  double pseudo_precision = -1, pseudo_recall = -1;  // -1 without an oracle
  double r1_iou05 = 0, r5_iou05 = 0;  // vs the observed label
  double rm55_iou05 = -1;             // vs oracle positives, -1 without one
};

using OracleMap = std::map<std::string, std::vector<Interval>>;

struct TrainResult {
  nn::ParamStore params;
  std::vector<EpochLog> logs;
  RunConfig cfg;
};

// End-to-end schedule: PME and DMR are optimized jointly under
// L = L_PME + L_DMR; pseudo-labels are re-estimated after every epoch and
// consumed by DMR in the next one, so epoch 1 trains on the observed label
// alone. The oracle, when given, feeds diagnostics only.
TrainResult train(const RunConfig& cfg, const std::vector<synth::TrainSample>& data,
                  const OracleMap* oracle = nullptr);

struct SamplePredictions {
  std::string id;
  dmr::PredictionSet preds;
};

// Full decoder outputs per sample, output 1 first.
std::vector<SamplePredictions> predict_all(nn::ParamStore& ps, const RunConfig& cfg,
                                           const std::vector<synth::TrainSample>& data);

// Ranked moment predictions per sample; annotations hold the observed label.
std::vector<metrics::EvalRecord> predict_records(
    nn::ParamStore& ps, const RunConfig& cfg,
    const std::vector<synth::TrainSample>& data);

// Per-sample pseudo-label extraction under the current parameters.
std::vector<pme::PseudoLabelSet> estimate_all(
    nn::ParamStore& ps, const RunConfig& cfg,
    const std::vector<synth::TrainSample>& data, int epoch);

// Single-label metrics against the observed labels plus multi-label metrics
// against the oracle annotations. Throws when a sample id is missing from
// the oracle.
std::vector<metrics::MetricReport> evaluate(nn::ParamStore& ps,
                                            const RunConfig& cfg,
                                            const std::vector<synth::TrainSample>& data,
                                            const OracleMap& oracle);

struct AblationResult {
  std::vector<metrics::MetricReport> full;
  std::vector<metrics::MetricReport> variant;
  std::vector<EpochLog> full_logs;
  std::vector<EpochLog> variant_logs;
};

// Trains the named variant (no_epr / no_matching / no_reconstruction /
// no_augmenting) and the full model under the same seed and data order.
AblationResult ablate(const RunConfig& cfg, const std::string& mode,
                      const std::vector<synth::TrainSample>& data,
                      const OracleMap& oracle);

void save_checkpoint(const std::string& path, const nn::ParamStore& ps,
                     const RunConfig& cfg, int epochs_trained);

struct Checkpoint {
  nn::ParamStore params;
  RunConfig cfg;
  int epochs_trained = 0;
};

Checkpoint load_checkpoint(const std::string& path);

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& logs);
std::vector<EpochLog> read_epoch_log_csv(const std::string& path);

// Turns a finished run directory (epoch_log.csv, metrics.csv,
// checkpoint.json) into plot-ready CSVs plus a summary JSON written under
// out_dir; returns the summary. Throws listing any missing inputs.
nlohmann::json report(const std::string& run_dir, const std::string& out_dir);
bool validate_summary(const nlohmann::json& summary);

}  // namespace dtgspl::harness
