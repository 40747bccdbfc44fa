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

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dtgspl/lattice.hpp"
#include "dtgspl/rng.hpp"
#include "dtgspl/temporal.hpp"

namespace dtgspl::synth {

struct Token {
  std::string tok;
  std::string pos;  // "verb" | "noun" | "other"
};

// Closed token inventory for the synthetic queries plus the (verb, noun)
// event templates videos are built from.
struct Vocabulary {
  std::vector<std::string> verbs;
  std::vector<std::string> nouns;
  std::vector<std::string> fillers;
  std::vector<std::pair<int, int>> templates;  // (verb index, noun index)

  static Vocabulary default_vocab();

  // Stable token order: verbs, nouns, fillers.
  const std::vector<std::string>& all_tokens() const;
  int token_id(const std::string& tok) const;  // throws on unknown token
  int size() const;
  std::string verb_of(int template_id) const;
  std::string noun_of(int template_id) const;

 private:
  mutable std::vector<std::string> all_;
  mutable std::map<std::string, int> ids_;
  void build_index() const;
};

struct GenConfig {
  int t_v = 32;
  int d_v = 16;
  int samples = 500;
  int min_positives = 1;
  int max_positives = 5;
  int min_width_clips = 4;
  int max_width_clips = 8;
  double noise = 0.5;
  double jitter_clips = 1.0;
  int distractor_tokens = 2;
};

// One video-query pair. full_positives is the oracle's multi-label ground
// truth; training code only ever sees the TrainSample view below.
struct Sample {
  std::string id;
  Eigen::MatrixXd clips;  // t_v x d_v
  std::vector<Token> query;
  std::vector<Interval> full_positives;
  Interval observed;
  int template_id;
};

// What the learner is allowed to look at: the oracle labels are stripped at
// the type level, not by convention.
struct TrainSample {
  std::string id;
  Eigen::MatrixXd clips;
  std::vector<Token> query;
  Interval observed;
};

struct Dataset {
  std::vector<Sample> samples;
  GenConfig cfg;
  uint64_t seed = 0;
};

// Plants 1..max_positives non-overlapping instances of one event template
// per sample. Clip features are the template prototype plus Gaussian noise
// inside instances and a background prototype plus noise elsewhere; label
// boundaries get uniform jitter of up to jitter_clips clips. Throws when the
// requested instances cannot be packed into t_v clips.
Dataset gen_dataset(const GenConfig& cfg, uint64_t seed);

// Uniform choice among the sample's positives (Rng-driven core plus the
// seed-based convenience used by tooling).
Interval expose_single_positive(const std::vector<Interval>& positives, Rng& rng);
Interval expose_single_positive(const Sample& sample, uint64_t seed);

// Full proposal-level target: y_i = 1 iff some true positive overlaps
// proposal i with IoU >= iou_pos. Evaluation-only.
std::vector<uint8_t> oracle_labels(const Sample& sample,
                                   const lattice::ProposalSet& set,
                                   double iou_pos = 0.7);

std::vector<TrainSample> train_view(const Dataset& ds);

// Line-delimited JSON, one sample per line. full_positives appears only when
// with_positives is set (oracle files).
void save_jsonl(const std::string& path, const Dataset& ds, bool with_positives);
std::vector<TrainSample> load_train_jsonl(const std::string& path);
std::map<std::string, std::vector<Interval>> load_oracle_jsonl(const std::string& path);

}  // namespace dtgspl::synth
