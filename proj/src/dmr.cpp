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

#include "dtgspl/dmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dtgspl::dmr {

namespace {

constexpr double kMinWidth = 1e-3;
constexpr double kLogEps = 1e-12;

using detail::AttnBlockCache;
using detail::AttnParams;
using detail::FfnCache;
using detail::FfnParams;
using detail::LnParams;

AttnParams add_attn(nn::ParamStore& ps, const std::string& prefix, int d_m) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d_m));
  AttnParams p;
  p.wq = ps.ensure(prefix + "Wq", d_m, d_m, nn::Init::Gaussian, s);
  p.bq = ps.ensure(prefix + "bq", 1, d_m, nn::Init::Zero);
  p.wk = ps.ensure(prefix + "Wk", d_m, d_m, nn::Init::Gaussian, s);
  p.bk = ps.ensure(prefix + "bk", 1, d_m, nn::Init::Zero);
  p.wv = ps.ensure(prefix + "Wv", d_m, d_m, nn::Init::Gaussian, s);
  p.bv = ps.ensure(prefix + "bv", 1, d_m, nn::Init::Zero);
  p.wo = ps.ensure(prefix + "Wo", d_m, d_m, nn::Init::Gaussian, s);
  p.bo = ps.ensure(prefix + "bo", 1, d_m, nn::Init::Zero);
  return p;
}

FfnParams add_ffn(nn::ParamStore& ps, const std::string& prefix, int d_m, int hidden) {
  FfnParams p;
  p.w1 = ps.ensure(prefix + "W1", d_m, hidden, nn::Init::Gaussian,
                1.0 / std::sqrt(static_cast<double>(d_m)));
  p.b1 = ps.ensure(prefix + "b1", 1, hidden, nn::Init::Zero);
  p.w2 = ps.ensure(prefix + "W2", hidden, d_m, nn::Init::Gaussian,
                1.0 / std::sqrt(static_cast<double>(hidden)));
  p.b2 = ps.ensure(prefix + "b2", 1, d_m, nn::Init::Zero);
  return p;
}

LnParams add_ln(nn::ParamStore& ps, const std::string& prefix, int d_m) {
  LnParams p;
  p.g = ps.ensure(prefix + "g", 1, d_m, nn::Init::One);
  p.b = ps.ensure(prefix + "b", 1, d_m, nn::Init::Zero);
  return p;
}

Mat attn_block(const nn::ParamStore& ps, const AttnParams& p, const Mat& x_q,
               const Mat& x_kv, AttnBlockCache& c) {
  const Mat q = nn::affine(ps.at(p.wq), ps.at(p.bq), x_q, &c.qc);
  const Mat k = nn::affine(ps.at(p.wk), ps.at(p.bk), x_kv, &c.kc);
  const Mat v = nn::affine(ps.at(p.wv), ps.at(p.bv), x_kv, &c.vc);
  const nn::AttentionOut att = nn::attention(q, k, v, &c.att);
  return nn::affine(ps.at(p.wo), ps.at(p.bo), att.output, &c.oc);
}

void attn_block_backward(nn::ParamStore& ps, const AttnParams& p,
                         const AttnBlockCache& c, const Mat& d_out,
                         const Mat& d_coeffs, Mat& d_xq, Mat& d_xkv) {
  const Mat d_attout = nn::affine_backward(ps.at(p.wo), ps.at(p.bo), c.oc, d_out);
  Mat dq, dk, dv;
  nn::attention_backward(c.att, d_attout, d_coeffs, dq, dk, dv);
  d_xq += nn::affine_backward(ps.at(p.wq), ps.at(p.bq), c.qc, dq);
  d_xkv += nn::affine_backward(ps.at(p.wk), ps.at(p.bk), c.kc, dk);
  d_xkv += nn::affine_backward(ps.at(p.wv), ps.at(p.bv), c.vc, dv);
}

Mat ffn_block(const nn::ParamStore& ps, const FfnParams& p, const Mat& x,
              FfnCache& c) {
  c.hidden = nn::relu(nn::affine(ps.at(p.w1), ps.at(p.b1), x, &c.a1));
  return nn::affine(ps.at(p.w2), ps.at(p.b2), c.hidden, &c.a2);
}

Mat ffn_block_backward(nn::ParamStore& ps, const FfnParams& p, const FfnCache& c,
                       const Mat& dy) {
  const Mat dh = nn::affine_backward(ps.at(p.w2), ps.at(p.b2), c.a2, dy);
  const Mat dpre = nn::relu_backward(c.hidden, dh);
  return nn::affine_backward(ps.at(p.w1), ps.at(p.b1), c.a1, dpre);
}

double l1_pair(double a0, double a1, double b0, double b1) {
  return std::abs(a0 - b0) + std::abs(a1 - b1);
}

// Fixed sinusoidal position signal added after projection. The attention
// blocks are permutation-invariant without it, and the decoder regresses
// positions from the attended features.
void add_positional(Mat& x) {
  const int d = static_cast<int>(x.cols());
  for (int r = 0; r < x.rows(); ++r) {
    for (int c = 0; c < d; ++c) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (c / 2)) / d);
      x(r, c) += (c % 2 == 0) ? std::sin(r * rate) : std::cos(r * rate);
    }
  }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

InteractionEncoder::InteractionEncoder(nn::ParamStore& ps,
                                       const synth::Vocabulary& vocab,
                                       const EncoderConfig& cfg,
                                       const std::string& prefix)
    : cfg_(cfg) {
  if (cfg.d_v < 1 || cfg.d_l < 1 || cfg.d_m < 1 || cfg.layers < 1 ||
      cfg.ffn_hidden < 1) {
    throw std::invalid_argument("InteractionEncoder: invalid config");
  }
  tok_embed_ = ps.ensure(prefix + "tok_embed", vocab.size(), cfg.d_l,
                      nn::Init::Gaussian, 1.0);
  const double sv = 1.0 / std::sqrt(static_cast<double>(cfg.d_v));
  const double sq = 1.0 / std::sqrt(static_cast<double>(cfg.d_l));
  vproj_w_ = ps.ensure(prefix + "vproj.W", cfg.d_v, cfg.d_m, nn::Init::Gaussian, sv);
  vproj_b_ = ps.ensure(prefix + "vproj.b", 1, cfg.d_m, nn::Init::Zero);
  qproj_w_ = ps.ensure(prefix + "qproj.W", cfg.d_l, cfg.d_m, nn::Init::Gaussian, sq);
  qproj_b_ = ps.ensure(prefix + "qproj.b", 1, cfg.d_m, nn::Init::Zero);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string lp = prefix + "l" + std::to_string(l) + ".";
    LayerParams layer;
    layer.v_att = add_attn(ps, lp + "vatt.", cfg.d_m);
    layer.q_att = add_attn(ps, lp + "qatt.", cfg.d_m);
    layer.v_ln1 = add_ln(ps, lp + "vln1.", cfg.d_m);
    layer.v_ln2 = add_ln(ps, lp + "vln2.", cfg.d_m);
    layer.q_ln1 = add_ln(ps, lp + "qln1.", cfg.d_m);
    layer.q_ln2 = add_ln(ps, lp + "qln2.", cfg.d_m);
    layer.v_ffn = add_ffn(ps, lp + "vffn.", cfg.d_m, cfg.ffn_hidden);
    layer.q_ffn = add_ffn(ps, lp + "qffn.", cfg.d_m, cfg.ffn_hidden);
    layers_.push_back(layer);
  }
}

std::pair<Mat, Mat> InteractionEncoder::forward(const nn::ParamStore& ps,
                                                const Mat& clips,
                                                const std::vector<int>& token_ids,
                                                Cache* cache) const {
  if (token_ids.empty()) throw std::invalid_argument("encoder: empty query");
  if (clips.rows() == 0) throw std::invalid_argument("encoder: empty clip sequence");
  if (clips.cols() != cfg_.d_v) throw std::invalid_argument("encoder: bad clip dim");

  Cache local;
  Cache& c = cache ? *cache : local;
  c.token_ids = token_ids;
  c.layers.resize(layers_.size());

  const Mat& emb = ps.at(tok_embed_).value;
  Mat q_tokens(static_cast<int>(token_ids.size()), cfg_.d_l);
  for (size_t i = 0; i < token_ids.size(); ++i) {
    q_tokens.row(static_cast<int>(i)) = emb.row(token_ids[i]);
  }

  Mat v = nn::affine(ps.at(vproj_w_), ps.at(vproj_b_), clips, &c.vproj);
  Mat q = nn::affine(ps.at(qproj_w_), ps.at(qproj_b_), q_tokens, &c.qproj);
  add_positional(v);
  add_positional(q);

  for (size_t l = 0; l < layers_.size(); ++l) {
    const LayerParams& lp = layers_[l];
    LayerCache& lc = c.layers[l];
    // Both directions read the previous layer's (v, q).
    const Mat v_att = attn_block(ps, lp.v_att, v, q, lc.v_att);
    const Mat q_att = attn_block(ps, lp.q_att, q, v, lc.q_att);
    const Mat v_mid =
        nn::layer_norm(ps.at(lp.v_ln1.g), ps.at(lp.v_ln1.b), v + v_att, &lc.v_ln1);
    const Mat q_mid =
        nn::layer_norm(ps.at(lp.q_ln1.g), ps.at(lp.q_ln1.b), q + q_att, &lc.q_ln1);
    const Mat v_ffn = ffn_block(ps, lp.v_ffn, v_mid, lc.v_ffn);
    const Mat q_ffn = ffn_block(ps, lp.q_ffn, q_mid, lc.q_ffn);
    v = nn::layer_norm(ps.at(lp.v_ln2.g), ps.at(lp.v_ln2.b), v_mid + v_ffn, &lc.v_ln2);
    q = nn::layer_norm(ps.at(lp.q_ln2.g), ps.at(lp.q_ln2.b), q_mid + q_ffn, &lc.q_ln2);
  }
  return {v, q};
}

void InteractionEncoder::backward(nn::ParamStore& ps, const Cache& cache,
                                  const Mat& d_video, const Mat& d_query) const {
  Mat dv = d_video;
  Mat dq = d_query;
  const Mat no_coeff_grad;
  for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
    const LayerParams& lp = layers_[l];
    const LayerCache& lc = cache.layers[l];

    const Mat d_v_r2 =
        nn::layer_norm_backward(ps.at(lp.v_ln2.g), ps.at(lp.v_ln2.b), lc.v_ln2, dv);
    const Mat d_q_r2 =
        nn::layer_norm_backward(ps.at(lp.q_ln2.g), ps.at(lp.q_ln2.b), lc.q_ln2, dq);
    const Mat d_v_mid = d_v_r2 + ffn_block_backward(ps, lp.v_ffn, lc.v_ffn, d_v_r2);
    const Mat d_q_mid = d_q_r2 + ffn_block_backward(ps, lp.q_ffn, lc.q_ffn, d_q_r2);
    const Mat d_v_r1 =
        nn::layer_norm_backward(ps.at(lp.v_ln1.g), ps.at(lp.v_ln1.b), lc.v_ln1, d_v_mid);
    const Mat d_q_r1 =
        nn::layer_norm_backward(ps.at(lp.q_ln1.g), ps.at(lp.q_ln1.b), lc.q_ln1, d_q_mid);

    // Residual split plus both attention paths.
    Mat dv_in = d_v_r1;
    Mat dq_in = d_q_r1;
    attn_block_backward(ps, lp.v_att, lc.v_att, d_v_r1, no_coeff_grad, dv_in, dq_in);
    attn_block_backward(ps, lp.q_att, lc.q_att, d_q_r1, no_coeff_grad, dq_in, dv_in);
    dv = dv_in;
    dq = dq_in;
  }
  const Mat d_clips_unused =
      nn::affine_backward(ps.at(vproj_w_), ps.at(vproj_b_), cache.vproj, dv);
  const Mat d_tokens =
      nn::affine_backward(ps.at(qproj_w_), ps.at(qproj_b_), cache.qproj, dq);
  Mat& emb_grad = ps.at(tok_embed_).grad;
  for (size_t i = 0; i < cache.token_ids.size(); ++i) {
    emb_grad.row(cache.token_ids[i]) += d_tokens.row(static_cast<int>(i));
  }
}

MomentDecoder::MomentDecoder(nn::ParamStore& ps, int d_m, int n_outputs,
                             int ffn_hidden, const std::string& prefix)
    : n_(n_outputs) {
  if (n_outputs < 1) throw std::invalid_argument("MomentDecoder: n_outputs must be >= 1");
  const double s = 1.0 / std::sqrt(static_cast<double>(d_m));
  queries_ = ps.ensure(prefix + "queries", n_outputs, d_m, nn::Init::Gaussian, 1.0);
  att_ = add_attn(ps, prefix + "att.", d_m);
  ln1_ = add_ln(ps, prefix + "ln1.", d_m);
  ln2_ = add_ln(ps, prefix + "ln2.", d_m);
  ffn_ = add_ffn(ps, prefix + "ffn.", d_m, ffn_hidden);
  se_w_ = ps.ensure(prefix + "se.W", d_m, 2, nn::Init::Gaussian, s);
  se_b_ = ps.ensure(prefix + "se.b", 1, 2, nn::Init::Zero);
  cw_w_ = ps.ensure(prefix + "cw.W", d_m, 2, nn::Init::Gaussian, s);
  cw_b_ = ps.ensure(prefix + "cw.b", 1, 2, nn::Init::Zero);
}

PredictionSet MomentDecoder::forward(const nn::ParamStore& ps, const Mat& video,
                                     const Mat& query, Cache* cache) const {
  if (video.rows() == 0 || query.rows() == 0) {
    throw std::invalid_argument("decoder: empty encoded inputs");
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c.t_l = static_cast<int>(query.rows());

  const Eigen::RowVectorXd qbar = query.colwise().mean();
  Mat u = ps.at(queries_).value;
  u.rowwise() += qbar;

  const Mat att_out = attn_block(ps, att_, u, video, c.att);
  const Mat x1 = nn::layer_norm(ps.at(ln1_.g), ps.at(ln1_.b), u + att_out, &c.ln1);
  const Mat x2 = nn::layer_norm(ps.at(ln2_.g), ps.at(ln2_.b),
                                x1 + ffn_block(ps, ffn_, x1, c.ffn), &c.ln2);

  c.se_sig = nn::sigmoid(nn::affine(ps.at(se_w_), ps.at(se_b_), x2, &c.se_c));
  c.cw_sig = nn::sigmoid(nn::affine(ps.at(cw_w_), ps.at(cw_b_), x2, &c.cw_c));
  c.swapped.assign(n_, 0);
  c.widened.assign(n_, 0);
  c.clamp_lo.assign(n_, 0);
  c.clamp_hi.assign(n_, 0);

  PredictionSet out;
  out.outputs.reserve(n_);
  const Mat& coeffs = c.att.att.coeffs;
  for (int i = 0; i < n_; ++i) {
    double s = c.se_sig(i, 0);
    double e = c.se_sig(i, 1);
    if (s > e) {
      std::swap(s, e);
      c.swapped[i] = 1;
    }
    if (e - s < kMinWidth) {
      c.widened[i] = 1;
      const double mid = 0.5 * (s + e);
      s = mid - 0.5 * kMinWidth;
      if (s < 0.0) {
        s = 0.0;
        c.clamp_lo[i] = 1;
      } else if (s > 1.0 - kMinWidth) {
        s = 1.0 - kMinWidth;
        c.clamp_hi[i] = 1;
      }
      e = s + kMinWidth;
    }
    out.outputs.push_back(Prediction{Interval(s, e),
                                     CenterWidth{c.cw_sig(i, 0), c.cw_sig(i, 1)},
                                     coeffs.row(i).transpose()});
  }
  return out;
}

void MomentDecoder::backward(nn::ParamStore& ps, const Cache& c, const Mat& d_se,
                             const Mat& d_cw, const Mat& d_att, Mat& d_video,
                             Mat& d_query) const {
  // Undo the order fix: route (d_s, d_e) back onto the two sigmoid outputs.
  Mat d_sig(n_, 2);
  for (int i = 0; i < n_; ++i) {
    double ds = d_se(i, 0);
    double de = d_se(i, 1);
    if (c.widened[i]) {
      // s = clamp(mid - w/2), e = s + w with mid = (s0 + e0) / 2.
      const double dmid = (c.clamp_lo[i] || c.clamp_hi[i]) ? 0.0 : ds + de;
      ds = 0.5 * dmid;
      de = 0.5 * dmid;
    }
    if (c.swapped[i]) std::swap(ds, de);
    d_sig(i, 0) = ds;
    d_sig(i, 1) = de;
  }
  const Mat d_se_raw = nn::sigmoid_backward(c.se_sig, d_sig);
  const Mat d_cw_raw = nn::sigmoid_backward(c.cw_sig, d_cw);

  Mat dx2 = nn::affine_backward(ps.at(se_w_), ps.at(se_b_), c.se_c, d_se_raw);
  dx2 += nn::affine_backward(ps.at(cw_w_), ps.at(cw_b_), c.cw_c, d_cw_raw);

  const Mat d_r2 = nn::layer_norm_backward(ps.at(ln2_.g), ps.at(ln2_.b), c.ln2, dx2);
  const Mat dx1 = d_r2 + ffn_block_backward(ps, ffn_, c.ffn, d_r2);
  const Mat d_r1 = nn::layer_norm_backward(ps.at(ln1_.g), ps.at(ln1_.b), c.ln1, dx1);

  Mat du = d_r1;
  attn_block_backward(ps, att_, c.att, d_r1, d_att, du, d_video);

  ps.at(queries_).grad += du;
  const Eigen::RowVectorXd dqbar = du.colwise().sum();
  d_query.rowwise() += dqbar / static_cast<double>(c.t_l);
}

namespace {

// O(n^3) Hungarian algorithm with potentials; rows <= cols required.
std::vector<int> hungarian_base(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

double assignment_cost(const Mat& cost, const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (size_t r = 0; r < row_to_col.size(); ++r) total += cost(r, row_to_col[r]);
  return total;
}

}  // namespace

std::vector<int> min_cost_assignment(const Mat& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0) return {};
  if (n > m) throw std::invalid_argument("min_cost_assignment: more rows than columns");
  const double optimum = assignment_cost(cost, hungarian_base(cost));
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

  // Lock rows in order to the smallest column consistent with optimality.
  std::vector<int> result(n, -1);
  std::vector<char> col_used(m, false);
  double locked = 0.0;
  for (int r = 0; r < n; ++r) {
    for (int col = 0; col < m; ++col) {
      if (col_used[col]) continue;
      double remainder = 0.0;
      const int rows_left = n - r - 1;
      if (rows_left > 0) {
        Mat sub(rows_left, m - 1);
        int cc = 0;
        std::vector<int> dummy;
        for (int c2 = 0; c2 < m; ++c2) {
          if (col_used[c2] || c2 == col) continue;
          for (int r2 = 0; r2 < rows_left; ++r2) sub(r2, cc) = cost(r + 1 + r2, c2);
          ++cc;
        }
        Mat subm = sub.leftCols(cc);
        remainder = assignment_cost(subm, hungarian_base(subm));
      }
      if (locked + cost(r, col) + remainder <= optimum + tol) {
        result[r] = col;
        col_used[col] = true;
        locked += cost(r, col);
        break;
      }
    }
    if (result[r] < 0) throw std::runtime_error("min_cost_assignment: internal error");
  }
  return result;
}

int MatchAssignment::matched_count() const {
  int n = 0;
  for (const int j : pseudo_for_output) n += j >= 0;
  return n;
}

MatchAssignment hungarian_match(const pme::PseudoLabelSet& pseudo,
                                const PredictionSet& preds) {
  const int k = preds.size() - 1;  // diverse outputs 2..N
  if (pseudo.size() > k) {
    throw std::invalid_argument("hungarian_match: more pseudo-labels than outputs");
  }
  MatchAssignment out;
  out.pseudo_for_output.assign(std::max(k, 0), -1);
  if (pseudo.empty() || k <= 0) return out;

  Mat cost(pseudo.size(), k);
  for (int j = 0; j < pseudo.size(); ++j) {
    const Interval& y = pseudo.items[j].span;
    const CenterWidth ycw = se_to_cw(y);
    for (int i = 0; i < k; ++i) {
      const Prediction& p = preds.outputs[i + 1];
      cost(j, i) = l1_pair(p.se.start(), p.se.end(), y.start(), y.end()) +
                   l1_pair(p.cw.center, p.cw.width, ycw.center, ycw.width);
    }
  }
  const std::vector<int> row_to_col = min_cost_assignment(cost);
  for (int j = 0; j < pseudo.size(); ++j) {
    out.pseudo_for_output[row_to_col[j]] = j;
    out.total_cost += cost(j, row_to_col[j]);
  }
  return out;
}

double attention_loss(const Vec& a, const ClipMask& m, Vec* d_a) {
  if (static_cast<int>(m.bits.size()) != a.size()) {
    throw std::invalid_argument("attention_loss: mask/coefficient size mismatch");
  }
  const int total = m.ones();
  if (total == 0) throw std::invalid_argument("attention_loss: empty mask");
  double loss = 0.0;
  if (d_a) *d_a = Vec::Zero(a.size());
  for (int j = 0; j < a.size(); ++j) {
    if (!m.bits[j]) continue;
    const double aj = std::max(a(j), kLogEps);
    loss -= std::log(aj);
    if (d_a && a(j) >= kLogEps) (*d_a)(j) = -1.0 / (total * aj);
  }
  return loss / total;
}

DmrLossResult dmr_loss(const PredictionSet& preds, const Interval& z,
                       const pme::PseudoLabelSet& pseudo,
                       const MatchAssignment& assignment, double lambda, int t_v) {
  const int n = preds.size();
  if (n < 1) throw std::invalid_argument("dmr_loss: empty prediction set");
  if (static_cast<int>(assignment.pseudo_for_output.size()) != n - 1) {
    throw std::invalid_argument("dmr_loss: assignment size mismatch");
  }
  DmrLossResult out;
  out.d_se = Mat::Zero(n, 2);
  out.d_cw = Mat::Zero(n, 2);
  out.d_att = Mat::Zero(n, t_v);

  const auto add_terms = [&](int i, const Interval& y, double weight) {
    const Prediction& p = preds.outputs[i];
    const CenterWidth ycw = se_to_cw(y);
    out.loss += weight * (l1_pair(p.se.start(), p.se.end(), y.start(), y.end()) +
                          l1_pair(p.cw.center, p.cw.width, ycw.center, ycw.width));
    out.d_se(i, 0) += weight * sign(p.se.start() - y.start());
    out.d_se(i, 1) += weight * sign(p.se.end() - y.end());
    out.d_cw(i, 0) += weight * sign(p.cw.center - ycw.center);
    out.d_cw(i, 1) += weight * sign(p.cw.width - ycw.width);
    Vec d_a;
    out.loss += weight * attention_loss(p.attention, interval_mask(y, t_v), &d_a);
    out.d_att.row(i) += weight * d_a.transpose();
  };

  add_terms(0, z, 1.0);
  if (n > 1 && lambda != 0.0) {
    const double w = lambda / (n - 1);
    for (int i = 1; i < n; ++i) {
      const int j = assignment.pseudo_for_output[i - 1];
      if (j >= 0) add_terms(i, pseudo.items[j].span, w);
    }
  }
  return out;
}

}  // namespace dtgspl::dmr
