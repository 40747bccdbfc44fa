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

#include "dtgspl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dtgspl::metrics {

using nlohmann::json;

namespace {

bool matched(const Interval& annotation, const std::vector<Interval>& predictions,
             int n, double alpha) {
  const int top = std::min<int>(n, static_cast<int>(predictions.size()));
  for (int i = 0; i < top; ++i) {
    if (iou(predictions[i], annotation) >= alpha) return true;
  }
  return false;
}

}  // namespace

double recall_single(const std::vector<EvalRecord>& records, int n, double alpha) {
  if (records.empty()) throw std::invalid_argument("recall_single: no records");
  int hits = 0;
  for (const auto& r : records) {
    if (r.annotations.size() != 1) {
      throw std::invalid_argument("recall_single: record " + r.id +
                                  " must have exactly one annotation");
    }
    hits += matched(r.annotations[0], r.predictions, n, alpha);
  }
  return 100.0 * hits / records.size();
}

double recall_multi(const std::vector<EvalRecord>& records, int n, int g,
                    double alpha, MultiAgg agg) {
  if (records.empty()) throw std::invalid_argument("recall_multi: no records");
  long counted = 0;
  long hits = 0;
  double per_sample_sum = 0.0;
  for (const auto& r : records) {
    if (r.annotations.empty()) {
      throw std::invalid_argument("recall_multi: record " + r.id +
                                  " has no annotations");
    }
    const int take = std::min<int>(g, static_cast<int>(r.annotations.size()));
    int local = 0;
    for (int a = 0; a < take; ++a) {
      local += matched(r.annotations[a], r.predictions, n, alpha);
    }
    counted += take;
    hits += local;
    per_sample_sum += static_cast<double>(local) / take;
  }
  if (agg == MultiAgg::Pooled) return 100.0 * hits / counted;
  return 100.0 * per_sample_sum / records.size();
}

double recall_multi_filtered(const std::vector<EvalRecord>& records, int n, int g,
                             double alpha, double beta, MultiAgg agg,
                             int* filtered_out) {
  std::vector<EvalRecord> kept;
  for (const auto& r : records) {
    if (r.annotations.size() >= 2 && avg_pairwise_iou(r.annotations) < beta) continue;
    kept.push_back(r);
  }
  if (filtered_out) *filtered_out = static_cast<int>(records.size() - kept.size());
  if (kept.empty()) throw std::runtime_error("recall_multi_filtered: empty evaluation set");
  return recall_multi(kept, n, g, alpha, agg);
}

double avg_pairwise_iou(const std::vector<Interval>& annotations) {
  const int n = static_cast<int>(annotations.size());
  if (n < 2) throw std::invalid_argument("avg_pairwise_iou: need >= 2 annotations");
  double sum = 0.0;
  int pairs = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      sum += iou(annotations[i], annotations[j]);
      ++pairs;
    }
  }
  return sum / pairs;
}

namespace {

std::vector<Interval> intervals_from_json(const json& arr) {
  std::vector<Interval> out;
  for (const auto& iv : arr) {
    out.emplace_back(iv.at(0).get<double>(), iv.at(1).get<double>());
  }
  return out;
}

json intervals_to_json(const std::vector<Interval>& ivs) {
  json arr = json::array();
  for (const auto& iv : ivs) arr.push_back(json::array({iv.start(), iv.end()}));
  return arr;
}

}  // namespace

std::vector<EvalRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    out.push_back(EvalRecord{j.at("id").get<std::string>(),
                             intervals_from_json(j.at("predictions")),
                             intervals_from_json(j.at("annotations"))});
  }
  return out;
}

void save_records_jsonl(const std::string& path,
                        const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& r : records) {
    const json j = {{"id", r.id},
                    {"predictions", intervals_to_json(r.predictions)},
                    {"annotations", intervals_to_json(r.annotations)}};
    out << j.dump() << "\n";
  }
}

void write_report_csv(const std::string& path,
                      const std::vector<MetricReport>& reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "metric,n,g,alpha,beta,value,samples\n";
  char buf[160];
  for (const auto& r : reports) {
    std::string name = r.metric;  // keep the field count intact
    for (auto& c : name) {
      if (c == ',') c = ';';
    }
    std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.2f,%.2f,%.4f,%d\n", name.c_str(),
                  r.n, r.g, r.alpha, r.beta, r.value, r.samples);
    out << buf;
  }
}

}  // namespace dtgspl::metrics
