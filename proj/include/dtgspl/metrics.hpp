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

#include <string>
#include <vector>

#include "dtgspl/temporal.hpp"

namespace dtgspl::metrics {

struct EvalRecord {
  std::string id;
  std::vector<Interval> predictions;  // ranked, best first
  std::vector<Interval> annotations;  // 1 for single-label, up to G otherwise
};

struct MetricReport {
  std::string metric;
  int n = 0;
  int g = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double value = 0.0;  // percentage
  int samples = 0;
  int filtered = 0;  // records dropped by the beta filter
};

// How multi-label recall is aggregated: over all counted annotations
// (pooled) or as the mean of per-record fractions.
enum class MultiAgg { Pooled, PerSample };

// Percentage of records whose single annotation is matched (IoU >= alpha) by
// one of the top-n predictions. Records must have exactly one annotation.
double recall_single(const std::vector<EvalRecord>& records, int n, double alpha);

// Percentage of the first g annotations per record matched by at least one
// of the top-n predictions.
double recall_multi(const std::vector<EvalRecord>& records, int n, int g,
                    double alpha, MultiAgg agg = MultiAgg::Pooled);

// recall_multi over the records whose annotations agree well enough: a
// record is dropped when the mean pairwise IoU among its annotations is
// below beta. Records with fewer than two annotations have no pairs and
// always pass. Throws when every record is filtered out.
double recall_multi_filtered(const std::vector<EvalRecord>& records, int n, int g,
                             double alpha, double beta,
                             MultiAgg agg = MultiAgg::Pooled,
                             int* filtered_out = nullptr);

// Mean IoU over all unordered annotation pairs; needs >= 2 annotations.
double avg_pairwise_iou(const std::vector<Interval>& annotations);

// {"id", "predictions": [[s,e]...], "annotations": [[s,e]...]} per line.
std::vector<EvalRecord> load_records_jsonl(const std::string& path);
void save_records_jsonl(const std::string& path,
                        const std::vector<EvalRecord>& records);

// CSV rows: metric,n,g,alpha,beta,value,samples
void write_report_csv(const std::string& path,
                      const std::vector<MetricReport>& reports);

}  // namespace dtgspl::metrics
