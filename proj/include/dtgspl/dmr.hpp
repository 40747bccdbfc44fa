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
#include <string>
#include <vector>

#include "dtgspl/nn.hpp"
#include "dtgspl/pme.hpp"
#include "dtgspl/synth.hpp"
#include "dtgspl/temporal.hpp"

namespace dtgspl::dmr {

using nn::Mat;
using nn::Vec;

namespace detail {

// Q/K/V/O projected scaled dot-product attention block.
struct AttnParams {
  size_t wq, bq, wk, bk, wv, bv, wo, bo;
};

struct AttnBlockCache {
  nn::AffineCache qc, kc, vc, oc;
  nn::AttentionCache att;
};

struct FfnParams {
  size_t w1, b1, w2, b2;
};

struct FfnCache {
  nn::AffineCache a1, a2;
  Mat hidden;
};

struct LnParams {
  size_t g, b;
};

}  // namespace detail

struct EncoderConfig {
  int d_v = 16;
  int d_l = 16;
  int d_m = 32;
  int layers = 1;
  int ffn_hidden = 64;
};

// Dual cross-attention interaction trunk: both modalities are projected to
// d_m and given a fixed sinusoidal position signal, then each layer lets
// video positions attend over query tokens and vice versa, with residual
// layer-norm and a feed-forward block per side.
class InteractionEncoder {
 public:
  InteractionEncoder(nn::ParamStore& ps, const synth::Vocabulary& vocab,
                     const EncoderConfig& cfg, const std::string& prefix = "enc.");

  struct LayerCache {
    detail::AttnBlockCache v_att, q_att;
    nn::LayerNormCache v_ln1, v_ln2, q_ln1, q_ln2;
    detail::FfnCache v_ffn, q_ffn;
  };

  struct Cache {
    std::vector<int> token_ids;
    nn::AffineCache vproj, qproj;
    std::vector<LayerCache> layers;
  };

  // clips: t_v x d_v. Returns (video t_v x d_m, query t_l x d_m). Throws on
  // an empty query or empty clip sequence.
  std::pair<Mat, Mat> forward(const nn::ParamStore& ps, const Mat& clips,
                              const std::vector<int>& token_ids,
                              Cache* cache = nullptr) const;
  void backward(nn::ParamStore& ps, const Cache& cache, const Mat& d_video,
                const Mat& d_query) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  struct LayerParams {
    detail::AttnParams v_att, q_att;
    detail::LnParams v_ln1, v_ln2, q_ln1, q_ln2;
    detail::FfnParams v_ffn, q_ffn;
  };

  EncoderConfig cfg_;
  size_t tok_embed_;
  size_t vproj_w_, vproj_b_, qproj_w_, qproj_b_;
  std::vector<LayerParams> layers_;
};

// One ranked output of the decoder.
struct Prediction {
  Interval se;
  CenterWidth cw;
  Vec attention;  // row-stochastic over t_v clips
};

// Output 1 (index 0) is the single-positive head; the rest are the diverse
// outputs matched against pseudo-labels.
struct PredictionSet {
  std::vector<Prediction> outputs;

  int size() const { return static_cast<int>(outputs.size()); }
};

// N learnable output queries, conditioned by adding the pooled query
// feature, cross-attend over the encoded video; two affine heads emit
// (start, end) and (center, width) through a sigmoid squash. Start/end are
// reordered when inverted and widened to a minimum width of 1e-3.
class MomentDecoder {
 public:
  MomentDecoder(nn::ParamStore& ps, int d_m, int n_outputs, int ffn_hidden,
                const std::string& prefix = "dec.");

  struct Cache {
    int t_l = 0;
    detail::AttnBlockCache att;
    nn::LayerNormCache ln1, ln2;
    detail::FfnCache ffn;
    nn::AffineCache se_c, cw_c;
    Mat se_sig, cw_sig;  // n x 2 sigmoid outputs
    std::vector<uint8_t> swapped, widened, clamp_lo, clamp_hi;
  };

  PredictionSet forward(const nn::ParamStore& ps, const Mat& video, const Mat& query,
                        Cache* cache = nullptr) const;
  // Gradients arrive wrt the final (start,end), (center,width) and attention
  // coefficient values; d_video/d_query must be pre-sized and are
  // accumulated into.
  void backward(nn::ParamStore& ps, const Cache& cache, const Mat& d_se,
                const Mat& d_cw, const Mat& d_att, Mat& d_video,
                Mat& d_query) const;

  int n_outputs() const { return n_; }

 private:
  int n_;
  size_t queries_;
  detail::AttnParams att_;
  detail::LnParams ln1_, ln2_;
  detail::FfnParams ffn_;
  size_t se_w_, se_b_, cw_w_, cw_b_;
};

// Injective min-cost assignment of rows to columns (rows <= cols). Among all
// optimal assignments the lexicographically smallest (row -> column)
// sequence is returned.
std::vector<int> min_cost_assignment(const Mat& cost);

// Mapping from diverse outputs (2..N, index 0 = output 2) to pseudo-label
// indices; -1 marks an unmatched output.
struct MatchAssignment {
  std::vector<int> pseudo_for_output;
  double total_cost = 0.0;

  int matched_count() const;
};

// Hungarian matching with cost = l1(se) + l1(cw) between each diverse output
// and each pseudo-label.
MatchAssignment hungarian_match(const pme::PseudoLabelSet& pseudo,
                                const PredictionSet& preds);

// Mask-normalized negative log attention mass inside the target interval.
double attention_loss(const Vec& a, const ClipMask& m, Vec* d_a = nullptr);

struct DmrLossResult {
  double loss = 0.0;
  Mat d_se;   // N x 2
  Mat d_cw;   // N x 2
  Mat d_att;  // N x t_v
};

// Output 1 regresses the observed label; matched diverse outputs regress
// their assigned pseudo-labels, averaged over N-1 and weighted by lambda.
// Unmatched outputs contribute nothing.
DmrLossResult dmr_loss(const PredictionSet& preds, const Interval& z,
                       const pme::PseudoLabelSet& pseudo,
                       const MatchAssignment& assignment, double lambda, int t_v);

}  // namespace dtgspl::dmr
