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

#include "dtgspl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dtgspl::synth {

using nlohmann::json;

Vocabulary Vocabulary::default_vocab() {
  Vocabulary v;
  v.verbs = {"open", "close", "lift", "drop", "push", "pull", "spin", "shake"};
  v.nouns = {"door", "box", "cup", "chair", "book", "ball", "bag", "lamp"};
  v.fillers = {"person", "the", "a", "then"};
  // Verbs and nouns are shared across templates so neither word alone
  // identifies the event.
  v.templates = {{0, 0}, {1, 0}, {0, 1}, {2, 1}, {3, 2}, {4, 3},
                 {5, 6}, {6, 5}, {7, 7}, {2, 4}, {1, 1}, {3, 5}};
  return v;
}

void Vocabulary::build_index() const {
  all_.clear();
  ids_.clear();
  for (const auto& t : verbs) all_.push_back(t);
  for (const auto& t : nouns) all_.push_back(t);
  for (const auto& t : fillers) all_.push_back(t);
  for (size_t i = 0; i < all_.size(); ++i) ids_[all_[i]] = static_cast<int>(i);
}

const std::vector<std::string>& Vocabulary::all_tokens() const {
  if (all_.empty()) build_index();
  return all_;
}

int Vocabulary::token_id(const std::string& tok) const {
  if (all_.empty()) build_index();
  const auto it = ids_.find(tok);
  if (it == ids_.end()) throw std::invalid_argument("unknown token: " + tok);
  return it->second;
}

int Vocabulary::size() const { return static_cast<int>(all_tokens().size()); }

std::string Vocabulary::verb_of(int template_id) const {
  return verbs.at(templates.at(template_id).first);
}

std::string Vocabulary::noun_of(int template_id) const {
  return nouns.at(templates.at(template_id).second);
}

namespace {

struct Prototypes {
  std::vector<Eigen::VectorXd> event;  // one per template
  Eigen::VectorXd background;
};

Prototypes draw_prototypes(const Vocabulary& vocab, int d_v, uint64_t seed) {
  Rng rng(Rng::derive(seed, "prototypes"));
  Prototypes p;
  p.event.reserve(vocab.templates.size());
  for (size_t t = 0; t < vocab.templates.size(); ++t) {
    Eigen::VectorXd v(d_v);
    for (int i = 0; i < d_v; ++i) v(i) = rng.normal();
    p.event.push_back(std::move(v));
  }
  p.background.resize(d_v);
  for (int i = 0; i < d_v; ++i) p.background(i) = rng.normal();
  return p;
}

// Non-overlapping instance placement in clip units: widths are shrunk to fit
// when necessary, remaining slack is split across the gaps.
std::vector<std::pair<int, int>> place_instances(const GenConfig& cfg, int count,
                                                 Rng& rng) {
  const int gap_min = 2 * static_cast<int>(std::ceil(cfg.jitter_clips)) + 1;
  std::vector<int> widths(count);
  for (auto& w : widths) w = rng.uniform_int(cfg.min_width_clips, cfg.max_width_clips);
  const auto total = [&] {
    int t = (count - 1) * gap_min;
    for (const int w : widths) t += w;
    return t;
  };
  while (total() > cfg.t_v) {
    auto widest = std::max_element(widths.begin(), widths.end());
    if (*widest <= cfg.min_width_clips) {
      throw std::invalid_argument("infeasible packing: " + std::to_string(count) +
                                  " instances do not fit in " +
                                  std::to_string(cfg.t_v) + " clips");
    }
    --*widest;
  }
  int slack = cfg.t_v - total();
  std::vector<double> cuts(count + 1);
  double sum = 0.0;
  for (auto& c : cuts) {
    c = rng.exponential();
    sum += c;
  }
  std::vector<int> extra(count + 1, 0);
  int used = 0;
  for (int i = 0; i <= count; ++i) {
    extra[i] = static_cast<int>(std::floor(cuts[i] / sum * slack));
    used += extra[i];
  }
  extra[count] += slack - used;
  std::vector<std::pair<int, int>> spans;
  int cur = extra[0];
  for (int i = 0; i < count; ++i) {
    spans.emplace_back(cur, cur + widths[i]);
    cur += widths[i];
    if (i + 1 < count) cur += gap_min + extra[i + 1];
  }
  return spans;
}

Interval jitter_label(const std::pair<int, int>& span, const GenConfig& cfg,
                      Rng& rng) {
  const double t_v = cfg.t_v;
  const double j = cfg.jitter_clips / t_v;
  double s = span.first / t_v + rng.uniform(-j, j);
  double e = span.second / t_v + rng.uniform(-j, j);
  s = std::clamp(s, 0.0, 1.0);
  e = std::clamp(e, 0.0, 1.0);
  const double min_w = 1.0 / t_v;
  if (e - s < min_w) {
    const double c = 0.5 * (s + e);
    s = std::clamp(c - 0.5 * min_w, 0.0, 1.0 - min_w);
    e = s + min_w;
  }
  return Interval(s, e);
}

}  // namespace

Dataset gen_dataset(const GenConfig& cfg, uint64_t seed) {
  if (cfg.t_v < 1 || cfg.d_v < 1 || cfg.samples < 1 || cfg.min_positives < 1 ||
      cfg.max_positives < cfg.min_positives ||
      cfg.min_width_clips < 1 || cfg.max_width_clips < cfg.min_width_clips) {
    throw std::invalid_argument("gen_dataset: invalid config");
  }
  const Vocabulary vocab = Vocabulary::default_vocab();
  const Prototypes protos = draw_prototypes(vocab, cfg.d_v, seed);

  Dataset ds;
  ds.cfg = cfg;
  ds.seed = seed;
  ds.samples.reserve(cfg.samples);
  for (int s = 0; s < cfg.samples; ++s) {
    Rng rng(Rng::derive(Rng::derive(seed, "sample"), static_cast<uint64_t>(s)));
    const int tmpl = rng.uniform_int(0, static_cast<int>(vocab.templates.size()) - 1);
    const int count = rng.uniform_int(cfg.min_positives, cfg.max_positives);
    const auto spans = place_instances(cfg, count, rng);

    Eigen::MatrixXd clips(cfg.t_v, cfg.d_v);
    for (int j = 0; j < cfg.t_v; ++j) {
      bool inside = false;
      for (const auto& sp : spans) {
        if (j >= sp.first && j < sp.second) {
          inside = true;
          break;
        }
      }
      const Eigen::VectorXd& proto = inside ? protos.event[tmpl] : protos.background;
      for (int d = 0; d < cfg.d_v; ++d) {
        clips(j, d) = proto(d) + cfg.noise * rng.normal();
      }
    }

    std::vector<Interval> positives;
    positives.reserve(spans.size());
    for (const auto& sp : spans) positives.push_back(jitter_label(sp, cfg, rng));

    const Interval observed = expose_single_positive(positives, rng);

    std::vector<Token> query;
    query.push_back({vocab.fillers[0], "other"});
    query.push_back({vocab.verb_of(tmpl), "verb"});
    query.push_back({vocab.fillers[1], "other"});
    query.push_back({vocab.noun_of(tmpl), "noun"});
    for (int d = 0; d < cfg.distractor_tokens; ++d) {
      const int f = rng.uniform_int(0, static_cast<int>(vocab.fillers.size()) - 1);
      query.push_back({vocab.fillers[f], "other"});
    }

    char id[16];
    std::snprintf(id, sizeof(id), "s%05d", s);
    ds.samples.push_back(
        Sample{id, std::move(clips), std::move(query), std::move(positives),
               observed, tmpl});
  }
  return ds;
}

Interval expose_single_positive(const std::vector<Interval>& positives, Rng& rng) {
  if (positives.empty()) {
    throw std::invalid_argument("expose_single_positive: no positives");
  }
  return positives[rng.uniform_int(0, static_cast<int>(positives.size()) - 1)];
}

Interval expose_single_positive(const Sample& sample, uint64_t seed) {
  Rng rng(seed);
  return expose_single_positive(sample.full_positives, rng);
}

std::vector<uint8_t> oracle_labels(const Sample& sample,
                                   const lattice::ProposalSet& set,
                                   double iou_pos) {
  std::vector<uint8_t> y(set.size(), 0);
  for (int i = 0; i < set.size(); ++i) {
    for (const auto& pos : sample.full_positives) {
      if (iou(set[i].span, pos) >= iou_pos) {
        y[i] = 1;
        break;
      }
    }
  }
  return y;
}

std::vector<TrainSample> train_view(const Dataset& ds) {
  std::vector<TrainSample> out;
  out.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    out.push_back(TrainSample{s.id, s.clips, s.query, s.observed});
  }
  return out;
}

namespace {

json interval_to_json(const Interval& iv) { return json::array({iv.start(), iv.end()}); }

Interval interval_from_json(const json& j) {
  return Interval(j.at(0).get<double>(), j.at(1).get<double>());
}

json sample_to_json(const Sample& s, bool with_positives) {
  json clips = json::array();
  for (int r = 0; r < s.clips.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < s.clips.cols(); ++c) row.push_back(s.clips(r, c));
    clips.push_back(std::move(row));
  }
  json query = json::array();
  for (const auto& t : s.query) query.push_back({{"tok", t.tok}, {"pos", t.pos}});
  json out = {{"id", s.id},
              {"clips", std::move(clips)},
              {"query", std::move(query)},
              {"observed", interval_to_json(s.observed)}};
  if (with_positives) {
    json fp = json::array();
    for (const auto& iv : s.full_positives) fp.push_back(interval_to_json(iv));
    out["full_positives"] = std::move(fp);
  }
  return out;
}

}  // namespace

void save_jsonl(const std::string& path, const Dataset& ds, bool with_positives) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& s : ds.samples) {
    out << sample_to_json(s, with_positives).dump() << "\n";
  }
}

std::vector<TrainSample> load_train_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<TrainSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const auto& jclips = j.at("clips");
    const int rows = static_cast<int>(jclips.size());
    const int cols = rows > 0 ? static_cast<int>(jclips.at(0).size()) : 0;
    Eigen::MatrixXd clips(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) clips(r, c) = jclips.at(r).at(c).get<double>();
    }
    std::vector<Token> query;
    for (const auto& t : j.at("query")) {
      query.push_back({t.at("tok").get<std::string>(), t.at("pos").get<std::string>()});
    }
    out.push_back(TrainSample{j.at("id").get<std::string>(), std::move(clips),
                              std::move(query),
                              interval_from_json(j.at("observed"))});
  }
  return out;
}

std::map<std::string, std::vector<Interval>> load_oracle_jsonl(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::map<std::string, std::vector<Interval>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    std::vector<Interval> positives;
    for (const auto& iv : j.at("full_positives")) {
      positives.push_back(interval_from_json(iv));
    }
    out[j.at("id").get<std::string>()] = std::move(positives);
  }
  return out;
}

}  // namespace dtgspl::synth
