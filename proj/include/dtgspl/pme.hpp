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

#include <map>
#include <string>
#include <vector>

#include "dtgspl/lattice.hpp"
#include "dtgspl/nn.hpp"
#include "dtgspl/rng.hpp"
#include "dtgspl/synth.hpp"
#include "dtgspl/temporal.hpp"

namespace dtgspl::pme {

using nn::Mat;
using nn::Vec;

// A pseudo-positive interval with the scores that justified keeping it.
struct PseudoLabel {
  Interval span;
  double s_match;
  double s_semantic;
};

struct PseudoLabelSet {
  std::vector<PseudoLabel> items;
  int epoch = 0;

  int size() const { return static_cast<int>(items.size()); }
  bool empty() const { return items.empty(); }
};

struct GeneratorConfig {
  int t_s = 2;  // max emission steps
  int n_s = 5;  // augmentation count
};

// Two-layer scoring head: per-proposal sigmoid(w2 . tanh(W1 f + b1) + b2).
class MatchingHead {
 public:
  MatchingHead(nn::ParamStore& ps, int d_m, const std::string& prefix = "pme.match.");

  struct Cache {
    nn::AffineCache a1, a2;
    Mat h;       // tanh output
    Mat scores;  // C x 1
  };

  Vec forward(const nn::ParamStore& ps, const Mat& features,
              Cache* cache = nullptr) const;
  // d_scores is dL/ds; returns dL/dfeatures.
  Mat backward(nn::ParamStore& ps, const Cache& cache, const Vec& d_scores) const;

 private:
  size_t w1_, b1_, w2_, b2_;
};

struct ScoreLoss {
  double loss;
  Vec d_scores;
};

// Positive-only log loss plus the expected-positive penalty
// gamma1 * (sum(s) - k)^2. Unobserved entries contribute no log term.
ScoreLoss epr_loss(const Vec& scores, int positive_index, double k, double gamma1);

// Assume-negative binary cross-entropy over all proposals (the ablation
// baseline): every unobserved entry is treated as a negative.
ScoreLoss bce_negative_loss(const Vec& scores, int positive_index);

struct Augmented {
  Mat features;              // n_s x d
  std::vector<int> members;  // clip indices inside the interval
  Mat weights;               // n_s x members, rows sum to 1
};

// Random weighted averages (flat Dirichlet) of the clip features inside z.
Augmented augment_interval_features(const Mat& clips, const Interval& z, int n_s,
                                    Rng& rng);
Augmented augment_interval_features(const Mat& clips, const Interval& z, int n_s,
                                    uint64_t seed);
// The no-augmentation variant: one plain mean feature.
Augmented mean_interval_feature(const Mat& clips, const Interval& z);

// Conditioned step-wise emitter: h0 = affine(feature),
// h_t = tanh(affine(h_{t-1}, embed(x_{t-1}))), p_t = softmax(affine(h_t)).
class SemanticGenerator {
 public:
  SemanticGenerator(nn::ParamStore& ps, const synth::Vocabulary& vocab, int d_feat,
                    int d_h, GeneratorConfig cfg,
                    const std::string& prefix = "pme.gen.");

  struct Cache;

  // Mean negative log-likelihood of the target words under teacher forcing,
  // normalized by (rows(feats) * steps). Throws on empty or unknown targets.
  double reconstruct_loss(const nn::ParamStore& ps, const Mat& feats,
                          const std::vector<int>& targets,
                          Cache* cache = nullptr) const;
  // Accumulates parameter grads for d_loss * reconstruct_loss and, if
  // d_feats is non-null, writes dL/dfeats into it.
  void backward(nn::ParamStore& ps, const Cache& cache, double d_loss,
                Mat* d_feats) const;

  // Greedy decode of t_s tokens from one feature vector.
  std::vector<int> decode(const nn::ParamStore& ps, const Vec& feat) const;

  const GeneratorConfig& config() const { return cfg_; }
  int vocab_size() const { return vocab_size_; }

 private:
  size_t embed_, wi_, bi_, wh_, we_, bh_, wo_, bo_;
  int vocab_size_;
  int bos_;
  GeneratorConfig cfg_;
};

struct SemanticGenerator::Cache {
  Mat feats;
  std::vector<int> targets;
  int steps = 0;
  // per feature row, per step
  std::vector<std::vector<Mat>> h;      // hidden states h_0..h_T (1 x d_h)
  std::vector<std::vector<Mat>> probs;  // p_1..p_T (1 x V)
  std::vector<std::vector<int>> prev;   // input token per step
};

// Clipped unigram precision times brevity penalty. Empty candidate scores 0;
// an empty reference is a contract violation.
double bleu1(const std::vector<int>& candidate, const std::vector<int>& reference);
double bleu1(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference);

// Greedy-decodes every proposal and the labeled moment and compares word
// overlap with BLEU-1. When query_targets is given, proposals are compared
// against the query's own noun/verb tokens instead of the generated ones.
Vec semantic_scores(const nn::ParamStore& ps, const SemanticGenerator& gen,
                    const lattice::ProposalSet& set, const Mat& clips,
                    const Interval& z,
                    const std::vector<int>* query_targets = nullptr);

// Threshold + NMS + truncation: keep proposals with max(s_match, s_semantic)
// >= t_thresh, rank by s_match (or s_semantic for the no-matching ablation),
// suppress overlaps above nms_thresh, return at most n_outputs - 1 labels.
PseudoLabelSet estimate_positives(const Vec& match_scores, const Vec& semantic_scores,
                                  const lattice::ProposalSet& set, double t_thresh,
                                  double nms_thresh, int n_outputs,
                                  bool rank_by_semantic = false, int epoch = 0);

// L_PME = L_match + gamma2 * L_semantic.
double pme_loss(double match_loss, double semantic_loss, double gamma2);

}  // namespace dtgspl::pme
