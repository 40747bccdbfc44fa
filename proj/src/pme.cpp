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

#include "dtgspl/pme.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtgspl::pme {

namespace {
constexpr double kLogEps = 1e-12;
}

MatchingHead::MatchingHead(nn::ParamStore& ps, int d_m, const std::string& prefix) {
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d_m));
  w1_ = ps.ensure(prefix + "W1", d_m, d_m, nn::Init::Gaussian, s1);
  b1_ = ps.ensure(prefix + "b1", 1, d_m, nn::Init::Zero);
  w2_ = ps.ensure(prefix + "W2", d_m, 1, nn::Init::Gaussian, s1);
  b2_ = ps.ensure(prefix + "b2", 1, 1, nn::Init::Zero);
}

Vec MatchingHead::forward(const nn::ParamStore& ps, const Mat& features,
                          Cache* cache) const {
  Cache local;
  Cache& c = cache ? *cache : local;
  const Mat pre = nn::affine(ps.at(w1_), ps.at(b1_), features, &c.a1);
  c.h = nn::tanh_fwd(pre);
  const Mat logits = nn::affine(ps.at(w2_), ps.at(b2_), c.h, &c.a2);
  c.scores = nn::sigmoid(logits);
  return c.scores.col(0);
}

Mat MatchingHead::backward(nn::ParamStore& ps, const Cache& cache,
                           const Vec& d_scores) const {
  const Mat dlogits = nn::sigmoid_backward(cache.scores, d_scores);
  const Mat dh = nn::affine_backward(ps.at(w2_), ps.at(b2_), cache.a2, dlogits);
  const Mat dpre = nn::tanh_backward(cache.h, dh);
  return nn::affine_backward(ps.at(w1_), ps.at(b1_), cache.a1, dpre);
}

ScoreLoss epr_loss(const Vec& scores, int positive_index, double k, double gamma1) {
  if (positive_index < 0 || positive_index >= scores.size()) {
    throw std::invalid_argument("epr_loss: positive index out of range");
  }
  const double sj = std::max(scores(positive_index), kLogEps);
  const double sum = scores.sum();
  ScoreLoss out;
  out.loss = -std::log(sj) + gamma1 * (sum - k) * (sum - k);
  out.d_scores = Vec::Constant(scores.size(), 2.0 * gamma1 * (sum - k));
  out.d_scores(positive_index) += -1.0 / sj;
  return out;
}

ScoreLoss bce_negative_loss(const Vec& scores, int positive_index) {
  if (positive_index < 0 || positive_index >= scores.size()) {
    throw std::invalid_argument("bce_negative_loss: positive index out of range");
  }
  ScoreLoss out;
  out.loss = 0.0;
  out.d_scores = Vec::Zero(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (i == positive_index) {
      const double s = std::max(scores(i), kLogEps);
      out.loss -= std::log(s);
      out.d_scores(i) = -1.0 / s;
    } else {
      const double q = std::max(1.0 - scores(i), kLogEps);
      out.loss -= std::log(q);
      out.d_scores(i) = 1.0 / q;
    }
  }
  return out;
}

Augmented augment_interval_features(const Mat& clips, const Interval& z, int n_s,
                                    Rng& rng) {
  if (n_s < 1) throw std::invalid_argument("augment: n_s must be >= 1");
  Augmented out;
  out.members = interval_mask(z, static_cast<int>(clips.rows())).members();
  const int m = static_cast<int>(out.members.size());
  out.weights.resize(n_s, m);
  out.features.resize(n_s, clips.cols());
  for (int i = 0; i < n_s; ++i) {
    const auto w = rng.dirichlet_flat(m);
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(clips.cols());
    for (int j = 0; j < m; ++j) {
      out.weights(i, j) = w[j];
      f += w[j] * clips.row(out.members[j]);
    }
    out.features.row(i) = f;
  }
  return out;
}

Augmented augment_interval_features(const Mat& clips, const Interval& z, int n_s,
                                    uint64_t seed) {
  Rng rng(seed);
  return augment_interval_features(clips, z, n_s, rng);
}

Augmented mean_interval_feature(const Mat& clips, const Interval& z) {
  Augmented out;
  out.members = interval_mask(z, static_cast<int>(clips.rows())).members();
  const int m = static_cast<int>(out.members.size());
  out.weights = Mat::Constant(1, m, 1.0 / m);
  out.features.resize(1, clips.cols());
  Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(clips.cols());
  for (const int j : out.members) f += clips.row(j);
  out.features.row(0) = f / m;
  return out;
}

SemanticGenerator::SemanticGenerator(nn::ParamStore& ps,
                                     const synth::Vocabulary& vocab, int d_feat,
                                     int d_h, GeneratorConfig cfg,
                                     const std::string& prefix)
    : vocab_size_(vocab.size()), bos_(vocab.size()), cfg_(cfg) {
  if (cfg.t_s < 1 || cfg.n_s < 1) {
    throw std::invalid_argument("SemanticGenerator: t_s and n_s must be >= 1");
  }
  const double sh = 1.0 / std::sqrt(static_cast<double>(d_h));
  const double sf = 1.0 / std::sqrt(static_cast<double>(d_feat));
  embed_ = ps.ensure(prefix + "embed", vocab_size_ + 1, d_h, nn::Init::Gaussian, sh);
  wi_ = ps.ensure(prefix + "init.W", d_feat, d_h, nn::Init::Gaussian, sf);
  bi_ = ps.ensure(prefix + "init.b", 1, d_h, nn::Init::Zero);
  wh_ = ps.ensure(prefix + "rec.Wh", d_h, d_h, nn::Init::Gaussian, sh);
  we_ = ps.ensure(prefix + "rec.We", d_h, d_h, nn::Init::Gaussian, sh);
  bh_ = ps.ensure(prefix + "rec.b", 1, d_h, nn::Init::Zero);
  wo_ = ps.ensure(prefix + "out.W", d_h, vocab_size_, nn::Init::Gaussian, sh);
  bo_ = ps.ensure(prefix + "out.b", 1, vocab_size_, nn::Init::Zero);
}

double SemanticGenerator::reconstruct_loss(const nn::ParamStore& ps, const Mat& feats,
                                           const std::vector<int>& targets,
                                           Cache* cache) const {
  if (targets.empty()) throw std::invalid_argument("reconstruct_loss: no targets");
  for (const int t : targets) {
    if (t < 0 || t >= vocab_size_) {
      throw std::invalid_argument("reconstruct_loss: target token out of vocabulary");
    }
  }
  const int steps = std::min<int>(cfg_.t_s, static_cast<int>(targets.size()));
  const int n = static_cast<int>(feats.rows());
  Cache local;
  Cache& c = cache ? *cache : local;
  c.feats = feats;
  c.targets = targets;
  c.steps = steps;
  c.h.assign(n, {});
  c.probs.assign(n, {});
  c.prev.assign(n, {});

  const Mat& emb = ps.at(embed_).value;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Mat h = feats.row(i) * ps.at(wi_).value + ps.at(bi_).value;
    c.h[i].push_back(h);
    for (int t = 0; t < steps; ++t) {
      const int prev = t == 0 ? bos_ : targets[t - 1];
      c.prev[i].push_back(prev);
      const Mat pre =
          h * ps.at(wh_).value + emb.row(prev) * ps.at(we_).value + ps.at(bh_).value;
      h = nn::tanh_fwd(pre);
      c.h[i].push_back(h);
      const Mat logits = h * ps.at(wo_).value + ps.at(bo_).value;
      const Mat p = nn::softmax_rows(logits);
      c.probs[i].push_back(p);
      total += -std::log(std::max(p(0, targets[t]), kLogEps));
    }
  }
  return total / (n * steps);
}

void SemanticGenerator::backward(nn::ParamStore& ps, const Cache& cache,
                                 double d_loss, Mat* d_feats) const {
  const int n = static_cast<int>(cache.feats.rows());
  const double scale = d_loss / (n * cache.steps);
  if (d_feats) *d_feats = Mat::Zero(cache.feats.rows(), cache.feats.cols());

  const Mat& emb = ps.at(embed_).value;
  for (int i = 0; i < n; ++i) {
    Mat dh = Mat::Zero(1, cache.h[i][0].cols());
    for (int t = cache.steps - 1; t >= 0; --t) {
      Mat dlogits = cache.probs[i][t] * scale;
      dlogits(0, cache.targets[t]) -= scale;
      const Mat& ht = cache.h[i][t + 1];
      ps.at(wo_).grad += ht.transpose() * dlogits;
      ps.at(bo_).grad += dlogits;
      dh += dlogits * ps.at(wo_).value.transpose();
      const Mat dpre = nn::tanh_backward(ht, dh);
      const Mat& hprev = cache.h[i][t];
      const int prev = cache.prev[i][t];
      ps.at(wh_).grad += hprev.transpose() * dpre;
      ps.at(we_).grad += emb.row(prev).transpose() * dpre;
      ps.at(bh_).grad += dpre;
      ps.at(embed_).grad.row(prev) += dpre * ps.at(we_).value.transpose();
      dh = dpre * ps.at(wh_).value.transpose();
    }
    // h_0 = affine(feature)
    ps.at(wi_).grad += cache.feats.row(i).transpose() * dh;
    ps.at(bi_).grad += dh;
    if (d_feats) d_feats->row(i) = dh * ps.at(wi_).value.transpose();
  }
}

std::vector<int> SemanticGenerator::decode(const nn::ParamStore& ps,
                                           const Vec& feat) const {
  const Mat& emb = ps.at(embed_).value;
  Mat h = feat.transpose() * ps.at(wi_).value + ps.at(bi_).value;
  std::vector<int> out;
  int prev = bos_;
  for (int t = 0; t < cfg_.t_s; ++t) {
    const Mat pre =
        h * ps.at(wh_).value + emb.row(prev) * ps.at(we_).value + ps.at(bh_).value;
    h = nn::tanh_fwd(pre);
    const Mat logits = h * ps.at(wo_).value + ps.at(bo_).value;
    int best = 0;
    for (int v = 1; v < vocab_size_; ++v) {
      if (logits(0, v) > logits(0, best)) best = v;
    }
    out.push_back(best);
    prev = best;
  }
  return out;
}

namespace {

template <typename T>
double bleu1_impl(const std::vector<T>& cand, const std::vector<T>& ref) {
  if (ref.empty()) throw std::invalid_argument("bleu1: empty reference");
  if (cand.empty()) return 0.0;
  std::map<T, int> ref_counts;
  for (const auto& t : ref) ++ref_counts[t];
  std::map<T, int> cand_counts;
  for (const auto& t : cand) ++cand_counts[t];
  int clipped = 0;
  for (const auto& [tok, cnt] : cand_counts) {
    const auto it = ref_counts.find(tok);
    if (it != ref_counts.end()) clipped += std::min(cnt, it->second);
  }
  const double precision = static_cast<double>(clipped) / cand.size();
  const double bp = std::exp(std::min(
      0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
  return precision * bp;
}

}  // namespace

double bleu1(const std::vector<int>& candidate, const std::vector<int>& reference) {
  return bleu1_impl(candidate, reference);
}

double bleu1(const std::vector<std::string>& candidate,
             const std::vector<std::string>& reference) {
  return bleu1_impl(candidate, reference);
}

Vec semantic_scores(const nn::ParamStore& ps, const SemanticGenerator& gen,
                    const lattice::ProposalSet& set, const Mat& clips,
                    const Interval& z, const std::vector<int>* query_targets) {
  const std::vector<int> reference =
      query_targets ? *query_targets : gen.decode(ps, lattice::pool_features(clips, z));
  Vec scores(set.size());
  for (int i = 0; i < set.size(); ++i) {
    const auto words = gen.decode(ps, lattice::pool_features(clips, set[i].span));
    scores(i) = bleu1(words, reference);
  }
  return scores;
}

PseudoLabelSet estimate_positives(const Vec& match_scores, const Vec& semantic_scores,
                                  const lattice::ProposalSet& set, double t_thresh,
                                  double nms_thresh, int n_outputs,
                                  bool rank_by_semantic, int epoch) {
  if (match_scores.size() != set.size() || semantic_scores.size() != set.size()) {
    throw std::invalid_argument("estimate_positives: score/set size mismatch");
  }
  std::vector<int> kept;
  for (int i = 0; i < set.size(); ++i) {
    if (std::max(match_scores(i), semantic_scores(i)) >= t_thresh) kept.push_back(i);
  }
  const auto key = [&](int i) {
    return rank_by_semantic ? semantic_scores(i) : match_scores(i);
  };
  std::sort(kept.begin(), kept.end(), [&](int a, int b) {
    if (key(a) != key(b)) return key(a) > key(b);
    const Interval& ia = set[a].span;
    const Interval& ib = set[b].span;
    if (ia.start() != ib.start()) return ia.start() < ib.start();
    return ia.length() < ib.length();
  });
  PseudoLabelSet out;
  out.epoch = epoch;
  const int limit = std::max(0, n_outputs - 1);
  for (const int i : kept) {
    if (out.size() >= limit) break;
    bool suppressed = false;
    for (const auto& item : out.items) {
      if (iou(set[i].span, item.span) > nms_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      out.items.push_back(PseudoLabel{set[i].span, match_scores(i), semantic_scores(i)});
    }
  }
  return out;
}

double pme_loss(double match_loss, double semantic_loss, double gamma2) {
  if (!std::isfinite(match_loss) || !std::isfinite(semantic_loss)) {
    throw std::invalid_argument("pme_loss: non-finite component");
  }
  return match_loss + gamma2 * semantic_loss;
}

}  // namespace dtgspl::pme
