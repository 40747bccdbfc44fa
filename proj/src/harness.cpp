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

#include "dtgspl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "dtgspl/lattice.hpp"
#include "dtgspl/rng.hpp"

namespace dtgspl::harness {

using nn::Mat;
using nn::Vec;
using nlohmann::json;

// ---- configuration ----

namespace {

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean value '" + v + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "t_v") gen.t_v = std::stoi(value);
  else if (key == "d_v") gen.d_v = std::stoi(value);
  else if (key == "samples") gen.samples = std::stoi(value);
  else if (key == "min_positives") gen.min_positives = std::stoi(value);
  else if (key == "max_positives") gen.max_positives = std::stoi(value);
  else if (key == "min_width_clips") gen.min_width_clips = std::stoi(value);
  else if (key == "max_width_clips") gen.max_width_clips = std::stoi(value);
  else if (key == "noise") gen.noise = std::stod(value);
  else if (key == "jitter_clips") gen.jitter_clips = std::stod(value);
  else if (key == "distractor_tokens") gen.distractor_tokens = std::stoi(value);
  else if (key == "d_m") d_m = std::stoi(value);
  else if (key == "d_l") d_l = std::stoi(value);
  else if (key == "layers") layers = std::stoi(value);
  else if (key == "ffn_hidden") ffn_hidden = std::stoi(value);
  else if (key == "proposal_n") proposal_n = std::stoi(value);
  else if (key == "proposal_base") proposal_base = std::stoi(value);
  else if (key == "n_outputs") n_outputs = std::stoi(value);
  else if (key == "k") k = std::stod(value);
  else if (key == "gamma1") gamma1 = std::stod(value);
  else if (key == "gamma2") gamma2 = std::stod(value);
  else if (key == "lambda") lambda = std::stod(value);
  else if (key == "t_thresh") t_thresh = std::stod(value);
  else if (key == "nms_thresh") nms_thresh = std::stod(value);
  else if (key == "n_s") n_s = std::stoi(value);
  else if (key == "t_s") t_s = std::stoi(value);
  else if (key == "lr") lr = std::stod(value);
  else if (key == "beta1") beta1 = std::stod(value);
  else if (key == "beta2") beta2 = std::stod(value);
  else if (key == "batch") batch = std::stoi(value);
  else if (key == "epochs") epochs = std::stoi(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "no_epr") no_epr = parse_bool(value);
  else if (key == "no_matching") no_matching = parse_bool(value);
  else if (key == "no_reconstruction") no_reconstruction = parse_bool(value);
  else if (key == "no_augmenting") no_augmenting = parse_bool(value);
  else if (key == "semantic_vs_query") semantic_vs_query = parse_bool(value);
  else if (key == "multi_agg") {
    if (value == "pooled") agg = metrics::MultiAgg::Pooled;
    else if (value == "per_sample") agg = metrics::MultiAgg::PerSample;
    else throw std::invalid_argument("config: multi_agg must be pooled or per_sample");
  } else if (key == "oracle_match_iou") oracle_match_iou = std::stod(value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  RunConfig cfg;
  bool k_given = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config " + path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    cfg.set(key, value);
    if (key == "k") k_given = true;
  }
  if (!k_given) cfg.k = cfg.n_outputs;  // k tracks N unless pinned
  return cfg;
}

json RunConfig::to_json() const {
  return json{{"t_v", gen.t_v},
              {"d_v", gen.d_v},
              {"samples", gen.samples},
              {"min_positives", gen.min_positives},
              {"max_positives", gen.max_positives},
              {"min_width_clips", gen.min_width_clips},
              {"max_width_clips", gen.max_width_clips},
              {"noise", gen.noise},
              {"jitter_clips", gen.jitter_clips},
              {"distractor_tokens", gen.distractor_tokens},
              {"d_m", d_m},
              {"d_l", d_l},
              {"layers", layers},
              {"ffn_hidden", ffn_hidden},
              {"proposal_n", proposal_n},
              {"proposal_base", proposal_base},
              {"n_outputs", n_outputs},
              {"k", k},
              {"gamma1", gamma1},
              {"gamma2", gamma2},
              {"lambda", lambda},
              {"t_thresh", t_thresh},
              {"nms_thresh", nms_thresh},
              {"n_s", n_s},
              {"t_s", t_s},
              {"lr", lr},
              {"beta1", beta1},
              {"beta2", beta2},
              {"batch", batch},
              {"epochs", epochs},
              {"seed", seed},
              {"no_epr", no_epr},
              {"no_matching", no_matching},
              {"no_reconstruction", no_reconstruction},
              {"no_augmenting", no_augmenting},
              {"semantic_vs_query", semantic_vs_query},
              {"multi_agg", agg == metrics::MultiAgg::Pooled ? "pooled" : "per_sample"},
              {"oracle_match_iou", oracle_match_iou}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  cfg.gen.t_v = j.at("t_v");
  cfg.gen.d_v = j.at("d_v");
  cfg.gen.samples = j.at("samples");
  cfg.gen.min_positives = j.at("min_positives");
  cfg.gen.max_positives = j.at("max_positives");
  cfg.gen.min_width_clips = j.at("min_width_clips");
  cfg.gen.max_width_clips = j.at("max_width_clips");
  cfg.gen.noise = j.at("noise");
  cfg.gen.jitter_clips = j.at("jitter_clips");
  cfg.gen.distractor_tokens = j.at("distractor_tokens");
  cfg.d_m = j.at("d_m");
  cfg.d_l = j.at("d_l");
  cfg.layers = j.at("layers");
  cfg.ffn_hidden = j.at("ffn_hidden");
  cfg.proposal_n = j.at("proposal_n");
  cfg.proposal_base = j.at("proposal_base");
  cfg.n_outputs = j.at("n_outputs");
  cfg.k = j.at("k");
  cfg.gamma1 = j.at("gamma1");
  cfg.gamma2 = j.at("gamma2");
  cfg.lambda = j.at("lambda");
  cfg.t_thresh = j.at("t_thresh");
  cfg.nms_thresh = j.at("nms_thresh");
  cfg.n_s = j.at("n_s");
  cfg.t_s = j.at("t_s");
  cfg.lr = j.at("lr");
  cfg.beta1 = j.at("beta1");
  cfg.beta2 = j.at("beta2");
  cfg.batch = j.at("batch");
  cfg.epochs = j.at("epochs");
  cfg.seed = j.at("seed");
  cfg.no_epr = j.at("no_epr");
  cfg.no_matching = j.at("no_matching");
  cfg.no_reconstruction = j.at("no_reconstruction");
  cfg.no_augmenting = j.at("no_augmenting");
  cfg.semantic_vs_query = j.at("semantic_vs_query");
  cfg.agg = j.at("multi_agg") == "per_sample" ? metrics::MultiAgg::PerSample
                                              : metrics::MultiAgg::Pooled;
  cfg.oracle_match_iou = j.at("oracle_match_iou");
  return cfg;
}

// ---- model bundle ----

namespace {

struct Model {
  synth::Vocabulary vocab;
  dmr::InteractionEncoder enc;
  std::optional<pme::MatchingHead> match;
  std::optional<pme::SemanticGenerator> gen;
  dmr::MomentDecoder dec;
};

Model build_model(nn::ParamStore& ps, const RunConfig& cfg, int d_v) {
  const synth::Vocabulary vocab = synth::Vocabulary::default_vocab();
  dmr::EncoderConfig ec;
  ec.d_v = d_v;
  ec.d_l = cfg.d_l;
  ec.d_m = cfg.d_m;
  ec.layers = cfg.layers;
  ec.ffn_hidden = cfg.ffn_hidden;
  Model m{vocab,
          dmr::InteractionEncoder(ps, vocab, ec),
          std::nullopt,
          std::nullopt,
          dmr::MomentDecoder(ps, cfg.d_m, cfg.n_outputs, cfg.ffn_hidden)};
  if (!cfg.no_matching) m.match.emplace(ps, cfg.d_m);
  if (!cfg.no_reconstruction) {
    m.gen.emplace(ps, vocab, cfg.d_m, cfg.d_m,
                  pme::GeneratorConfig{cfg.t_s, cfg.no_augmenting ? 1 : cfg.n_s});
  }
  return m;
}

struct SampleCtx {
  std::vector<int> token_ids;
  std::vector<int> target_ids;  // noun/verb tokens in query order
  int positive_proposal = 0;
};

std::vector<SampleCtx> build_contexts(const Model& model,
                                      const lattice::ProposalSet& props,
                                      const std::vector<synth::TrainSample>& data) {
  std::vector<SampleCtx> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    SampleCtx ctx;
    for (const auto& t : s.query) {
      ctx.token_ids.push_back(model.vocab.token_id(t.tok));
      if (t.pos == "verb" || t.pos == "noun") {
        ctx.target_ids.push_back(model.vocab.token_id(t.tok));
      }
    }
    ctx.positive_proposal =
        lattice::assign_single_positive(props, s.observed).positive_index();
    out.push_back(std::move(ctx));
  }
  return out;
}

Mat pool_all(const Mat& vf, const std::vector<std::vector<int>>& members) {
  Mat pooled(static_cast<int>(members.size()), vf.cols());
  for (size_t p = 0; p < members.size(); ++p) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(vf.cols());
    for (const int j : members[p]) sum += vf.row(j);
    pooled.row(static_cast<int>(p)) = sum / static_cast<double>(members[p].size());
  }
  return pooled;
}

void pool_all_backward(const Mat& d_pooled,
                       const std::vector<std::vector<int>>& members, Mat& d_vf) {
  for (size_t p = 0; p < members.size(); ++p) {
    const double inv = 1.0 / static_cast<double>(members[p].size());
    for (const int j : members[p]) {
      d_vf.row(j) += inv * d_pooled.row(static_cast<int>(p));
    }
  }
}

struct StepLosses {
  double match = 0, semantic = 0, pme = 0, dmr = 0, total = 0;
};

// One sample's joint forward/backward; gradients accumulate into the store.
StepLosses sample_step(nn::ParamStore& ps, const Model& model, const RunConfig& cfg,
                       const std::vector<std::vector<int>>& members,
                       const synth::TrainSample& sample, const SampleCtx& ctx,
                       const pme::PseudoLabelSet& pseudo, uint64_t aug_seed) {
  StepLosses losses;
  const int t_v = static_cast<int>(sample.clips.rows());

  dmr::InteractionEncoder::Cache enc_cache;
  const auto [vf, qf] = model.enc.forward(ps, sample.clips, ctx.token_ids, &enc_cache);
  Mat d_vf = Mat::Zero(vf.rows(), vf.cols());
  Mat d_qf = Mat::Zero(qf.rows(), qf.cols());

  // PME: proposal matching.
  pme::MatchingHead::Cache match_cache;
  if (model.match) {
    const Mat pooled = pool_all(vf, members);
    const Vec scores = model.match->forward(ps, pooled, &match_cache);
    const pme::ScoreLoss sl =
        cfg.no_epr ? pme::bce_negative_loss(scores, ctx.positive_proposal)
                   : pme::epr_loss(scores, ctx.positive_proposal, cfg.k, cfg.gamma1);
    losses.match = sl.loss;
    const Mat d_pooled = model.match->backward(ps, match_cache, sl.d_scores);
    pool_all_backward(d_pooled, members, d_vf);
  }

  // PME: semantic reconstruction from the observed moment.
  if (model.gen) {
    const pme::Augmented aug =
        cfg.no_augmenting ? pme::mean_interval_feature(vf, sample.observed)
                          : pme::augment_interval_features(vf, sample.observed,
                                                           cfg.n_s, aug_seed);
    pme::SemanticGenerator::Cache gen_cache;
    losses.semantic = model.gen->reconstruct_loss(ps, aug.features, ctx.target_ids,
                                                  &gen_cache);
    Mat d_feats;
    model.gen->backward(ps, gen_cache, cfg.gamma2, &d_feats);
    for (int i = 0; i < aug.features.rows(); ++i) {
      for (size_t j = 0; j < aug.members.size(); ++j) {
        d_vf.row(aug.members[j]) += aug.weights(i, static_cast<int>(j)) * d_feats.row(i);
      }
    }
  }
  losses.pme = pme::pme_loss(losses.match, losses.semantic, cfg.gamma2);

  // DMR with the previous epoch's pseudo-labels.
  dmr::MomentDecoder::Cache dec_cache;
  const dmr::PredictionSet preds = model.dec.forward(ps, vf, qf, &dec_cache);
  const dmr::MatchAssignment assignment = dmr::hungarian_match(pseudo, preds);
  const dmr::DmrLossResult dl =
      dmr::dmr_loss(preds, sample.observed, pseudo, assignment, cfg.lambda, t_v);
  losses.dmr = dl.loss;
  model.dec.backward(ps, dec_cache, dl.d_se, dl.d_cw, dl.d_att, d_vf, d_qf);

  model.enc.backward(ps, enc_cache, d_vf, d_qf);
  losses.total = losses.pme + losses.dmr;
  if (!std::isfinite(losses.total)) {
    throw std::runtime_error("non-finite loss on sample " + sample.id);
  }
  return losses;
}

pme::PseudoLabelSet estimate_sample(const nn::ParamStore& ps, const Model& model,
                                    const RunConfig& cfg,
                                    const lattice::ProposalSet& props,
                                    const std::vector<std::vector<int>>& members,
                                    const synth::TrainSample& sample,
                                    const SampleCtx& ctx, int epoch,
                                    double* score_sum) {
  const auto [vf, qf] = model.enc.forward(ps, sample.clips, ctx.token_ids);
  Vec m_scores = Vec::Zero(props.size());
  if (model.match) {
    m_scores = model.match->forward(ps, pool_all(vf, members));
  }
  if (score_sum) *score_sum += m_scores.sum();
  Vec s_scores = Vec::Zero(props.size());
  if (model.gen) {
    s_scores = pme::semantic_scores(ps, *model.gen, props, vf, sample.observed,
                                    cfg.semantic_vs_query ? &ctx.target_ids : nullptr);
  }
  return pme::estimate_positives(m_scores, s_scores, props, cfg.t_thresh,
                                 cfg.nms_thresh, cfg.n_outputs,
                                 /*rank_by_semantic=*/cfg.no_matching, epoch);
}

struct PseudoQuality {
  double count = 0;
  double precision = -1;
  double recall = -1;
};

PseudoQuality pseudo_quality(const std::vector<pme::PseudoLabelSet>& pseudo,
                             const std::vector<synth::TrainSample>& data,
                             const OracleMap* oracle, double match_iou) {
  PseudoQuality q;
  long total_pseudo = 0;
  for (const auto& ps : pseudo) total_pseudo += ps.size();
  q.count = static_cast<double>(total_pseudo) / static_cast<double>(pseudo.size());
  if (!oracle) return q;
  long matched_pseudo = 0, total_pos = 0, matched_pos = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    const auto it = oracle->find(data[i].id);
    if (it == oracle->end()) continue;
    const auto& positives = it->second;
    for (const auto& item : pseudo[i].items) {
      for (const auto& pos : positives) {
        if (iou(item.span, pos) >= match_iou) {
          ++matched_pseudo;
          break;
        }
      }
    }
    for (const auto& pos : positives) {
      ++total_pos;
      for (const auto& item : pseudo[i].items) {
        if (iou(item.span, pos) >= match_iou) {
          ++matched_pos;
          break;
        }
      }
    }
  }
  q.precision = total_pseudo > 0
                    ? static_cast<double>(matched_pseudo) / total_pseudo
                    : 0.0;
  q.recall = total_pos > 0 ? static_cast<double>(matched_pos) / total_pos : 0.0;
  return q;
}

std::vector<metrics::EvalRecord> records_with_oracle(
    const std::vector<metrics::EvalRecord>& records, const OracleMap& oracle) {
  std::vector<metrics::EvalRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto it = oracle.find(r.id);
    if (it == oracle.end()) {
      throw std::runtime_error("oracle file is missing sample id " + r.id);
    }
    out.push_back(metrics::EvalRecord{r.id, r.predictions, it->second});
  }
  return out;
}

}  // namespace

// ---- training ----

TrainResult train(const RunConfig& cfg, const std::vector<synth::TrainSample>& data,
                  const OracleMap* oracle) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.epochs < 1 || cfg.batch < 1) throw std::invalid_argument("train: bad schedule");
  const int t_v = static_cast<int>(data[0].clips.rows());
  const int d_v = static_cast<int>(data[0].clips.cols());
  for (const auto& s : data) {
    if (s.clips.rows() != t_v || s.clips.cols() != d_v) {
      throw std::invalid_argument("train: inconsistent clip shapes in dataset");
    }
  }

  const lattice::ProposalSet props =
      lattice::ProposalSet::build(cfg.proposal_n, cfg.proposal_base);
  const auto members = lattice::proposal_members(props, t_v);

  nn::ParamStore ps(cfg.seed);
  const Model model = build_model(ps, cfg, d_v);
  nn::Adam adam(cfg.lr, cfg.beta1, cfg.beta2);
  const auto ctxs = build_contexts(model, props, data);

  Rng shuffle_rng(Rng::derive(cfg.seed, "shuffle"));
  const uint64_t aug_base = Rng::derive(cfg.seed, "augment");

  std::vector<pme::PseudoLabelSet> pseudo(data.size());
  std::vector<EpochLog> logs;
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    const uint64_t epoch_aug = Rng::derive(aug_base, static_cast<uint64_t>(epoch));
    for (size_t start = 0; start < order.size(); start += cfg.batch) {
      const size_t stop = std::min(order.size(), start + cfg.batch);
      ps.zero_grad();
      for (size_t b = start; b < stop; ++b) {
        const int idx = order[b];
        log.pseudo_used += static_cast<double>(pseudo[idx].size());
        const StepLosses l = sample_step(
            ps, model, cfg, members, data[idx], ctxs[idx], pseudo[idx],
            Rng::derive(epoch_aug, static_cast<uint64_t>(idx)));
        log.l_match += l.match;
        log.l_semantic += l.semantic;
        log.l_pme += l.pme;
        log.l_dmr += l.dmr;
        log.l_total += l.total;
      }
      ps.scale_grad(1.0 / static_cast<double>(stop - start));
      adam.step(ps);
    }
    const double inv_n = 1.0 / static_cast<double>(data.size());
    log.pseudo_used *= inv_n;
    log.l_match *= inv_n;
    log.l_semantic *= inv_n;
    log.l_pme *= inv_n;
    log.l_dmr *= inv_n;
    log.l_total *= inv_n;

    // Refresh pseudo-labels for the next epoch.
    double score_sum = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
      pseudo[i] = estimate_sample(ps, model, cfg, props, members, data[i], ctxs[i],
                                  epoch, &score_sum);
    }
    log.score_sum = score_sum * inv_n;

    const PseudoQuality q =
        pseudo_quality(pseudo, data, oracle, cfg.oracle_match_iou);
    log.pseudo_count = q.count;
    log.pseudo_precision = q.precision;
    log.pseudo_recall = q.recall;

    const auto records = predict_records(ps, cfg, data);
    log.r1_iou05 = metrics::recall_single(records, 1, 0.5);
    log.r5_iou05 = metrics::recall_single(records, 5, 0.5);
    if (oracle) {
      const auto multi = records_with_oracle(records, *oracle);
      log.rm55_iou05 = metrics::recall_multi(multi, 5, 5, 0.5, cfg.agg);
    }
    logs.push_back(log);
  }
  return TrainResult{std::move(ps), std::move(logs), cfg};
}

std::vector<SamplePredictions> predict_all(nn::ParamStore& ps, const RunConfig& cfg,
                                           const std::vector<synth::TrainSample>& data) {
  if (data.empty()) return {};
  const Model model = build_model(ps, cfg, static_cast<int>(data[0].clips.cols()));
  std::vector<SamplePredictions> out;
  out.reserve(data.size());
  for (const auto& s : data) {
    std::vector<int> token_ids;
    for (const auto& t : s.query) token_ids.push_back(model.vocab.token_id(t.tok));
    const auto [vf, qf] = model.enc.forward(ps, s.clips, token_ids);
    out.push_back(SamplePredictions{s.id, model.dec.forward(ps, vf, qf)});
  }
  return out;
}

std::vector<metrics::EvalRecord> predict_records(
    nn::ParamStore& ps, const RunConfig& cfg,
    const std::vector<synth::TrainSample>& data) {
  const auto all = predict_all(ps, cfg, data);
  std::vector<metrics::EvalRecord> out;
  out.reserve(all.size());
  for (size_t i = 0; i < all.size(); ++i) {
    std::vector<Interval> ranked;
    for (const auto& p : all[i].preds.outputs) ranked.push_back(p.se);
    out.push_back(
        metrics::EvalRecord{all[i].id, std::move(ranked), {data[i].observed}});
  }
  return out;
}

std::vector<pme::PseudoLabelSet> estimate_all(
    nn::ParamStore& ps, const RunConfig& cfg,
    const std::vector<synth::TrainSample>& data, int epoch) {
  if (data.empty()) return {};
  const Model model = build_model(ps, cfg, static_cast<int>(data[0].clips.cols()));
  const lattice::ProposalSet props =
      lattice::ProposalSet::build(cfg.proposal_n, cfg.proposal_base);
  const auto members =
      lattice::proposal_members(props, static_cast<int>(data[0].clips.rows()));
  const auto ctxs = build_contexts(model, props, data);
  std::vector<pme::PseudoLabelSet> out;
  out.reserve(data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    out.push_back(estimate_sample(ps, model, cfg, props, members, data[i], ctxs[i],
                                  epoch, nullptr));
  }
  return out;
}

std::vector<metrics::MetricReport> evaluate(nn::ParamStore& ps,
                                            const RunConfig& cfg,
                                            const std::vector<synth::TrainSample>& data,
                                            const OracleMap& oracle) {
  const auto records = predict_records(ps, cfg, data);
  const auto multi = records_with_oracle(records, oracle);
  std::vector<metrics::MetricReport> out;
  const int samples = static_cast<int>(records.size());
  for (const int n : {1, 5}) {
    for (const double alpha : {0.3, 0.5, 0.7}) {
      out.push_back(metrics::MetricReport{"R@N", n, 0, alpha, 0.0,
                                          metrics::recall_single(records, n, alpha),
                                          samples, 0});
    }
  }
  const int g = 5;
  const int n = 5;
  out.push_back(metrics::MetricReport{
      "R@(N;G)", n, g, 0.5, 0.0, metrics::recall_multi(multi, n, g, 0.5, cfg.agg),
      samples, 0});
  for (const double beta : {0.5, 0.4}) {
    int filtered = 0;
    const double v =
        metrics::recall_multi_filtered(multi, n, g, 0.5, beta, cfg.agg, &filtered);
    out.push_back(metrics::MetricReport{"R_b@(N;G)", n, g, 0.5, beta, v,
                                        samples - filtered, filtered});
  }
  return out;
}

AblationResult ablate(const RunConfig& cfg, const std::string& mode,
                      const std::vector<synth::TrainSample>& data,
                      const OracleMap& oracle) {
  RunConfig variant = cfg;
  if (mode == "no_epr") variant.no_epr = true;
  else if (mode == "no_matching") variant.no_matching = true;
  else if (mode == "no_reconstruction") variant.no_reconstruction = true;
  else if (mode == "no_augmenting") variant.no_augmenting = true;
  else throw std::invalid_argument("ablate: unknown mode '" + mode + "'");

  TrainResult full_run = train(cfg, data, &oracle);
  TrainResult variant_run = train(variant, data, &oracle);
  AblationResult out;
  out.full = evaluate(full_run.params, cfg, data, oracle);
  out.variant = evaluate(variant_run.params, variant, data, oracle);
  out.full_logs = std::move(full_run.logs);
  out.variant_logs = std::move(variant_run.logs);
  return out;
}

// ---- artifacts ----

void save_checkpoint(const std::string& path, const nn::ParamStore& ps,
                     const RunConfig& cfg, int epochs_trained) {
  json j = {{"format", "dtgspl-checkpoint"},
            {"version", 1},
            {"epochs_trained", epochs_trained},
            {"config", cfg.to_json()},
            {"store", ps.to_json()}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", "") != "dtgspl-checkpoint" || j.value("version", 0) != 1) {
    throw std::runtime_error(path + " is not a version-1 dtgspl checkpoint");
  }
  return Checkpoint{nn::ParamStore::from_json(j.at("store")),
                    RunConfig::from_json(j.at("config")),
                    j.at("epochs_trained").get<int>()};
}

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLog>& logs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,l_total,l_pme,l_match,l_semantic,l_dmr,score_sum,pseudo_used,"
         "pseudo_count,pseudo_precision,pseudo_recall,r1_iou05,r5_iou05,"
         "rm55_iou05\n";
  char buf[384];
  for (const auto& l : logs) {
    std::snprintf(
        buf, sizeof(buf),
        "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.4f,%.4f,%.4f\n",
        l.epoch, l.l_total, l.l_pme, l.l_match, l.l_semantic, l.l_dmr, l.score_sum,
        l.pseudo_used, l.pseudo_count, l.pseudo_precision, l.pseudo_recall,
        l.r1_iou05, l.r5_iou05, l.rm55_iou05);
    out << buf;
  }
}

std::vector<EpochLog> read_epoch_log_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<EpochLog> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != 14) throw std::runtime_error("bad epoch log row in " + path);
    EpochLog l;
    l.epoch = static_cast<int>(v[0]);
    l.l_total = v[1];
    l.l_pme = v[2];
    l.l_match = v[3];
    l.l_semantic = v[4];
    l.l_dmr = v[5];
    l.score_sum = v[6];
    l.pseudo_used = v[7];
    l.pseudo_count = v[8];
    l.pseudo_precision = v[9];
    l.pseudo_recall = v[10];
    l.r1_iou05 = v[11];
    l.r5_iou05 = v[12];
    l.rm55_iou05 = v[13];
    out.push_back(l);
  }
  return out;
}

json report(const std::string& run_dir, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path run(run_dir);
  const std::vector<std::string> required = {"epoch_log.csv", "metrics.csv",
                                             "checkpoint.json"};
  std::string missing;
  for (const auto& f : required) {
    if (!fs::exists(run / f)) missing += missing.empty() ? f : ", " + f;
  }
  if (!missing.empty()) {
    throw std::runtime_error("report: missing run artifacts in " + run_dir + ": " +
                             missing);
  }
  fs::create_directories(out_dir);
  const auto logs = read_epoch_log_csv((run / "epoch_log.csv").string());
  if (logs.empty()) throw std::runtime_error("report: epoch log is empty");
  const Checkpoint ckpt = load_checkpoint((run / "checkpoint.json").string());

  {
    std::ofstream losses(fs::path(out_dir) / "losses.csv", std::ios::binary);
    losses << "epoch,l_total,l_pme,l_match,l_semantic,l_dmr\n";
    char buf[256];
    for (const auto& l : logs) {
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", l.epoch,
                    l.l_total, l.l_pme, l.l_match, l.l_semantic, l.l_dmr);
      losses << buf;
    }
  }
  {
    std::ofstream q(fs::path(out_dir) / "pseudo_quality.csv", std::ios::binary);
    q << "epoch,score_sum,pseudo_count,pseudo_precision,pseudo_recall\n";
    char buf[256];
    for (const auto& l : logs) {
      std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f\n", l.epoch,
                    l.score_sum, l.pseudo_count, l.pseudo_precision, l.pseudo_recall);
      q << buf;
    }
  }
  // Copy the metric table verbatim; it is already plot-ready CSV.
  fs::copy_file(run / "metrics.csv", fs::path(out_dir) / "metrics.csv",
                fs::copy_options::overwrite_existing);

  std::vector<json> metric_rows;
  {
    std::ifstream m(run / "metrics.csv");
    std::string line;
    std::getline(m, line);
    while (std::getline(m, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string metric, cell;
      std::getline(ss, metric, ',');
      std::vector<double> v;
      while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
      if (v.size() != 6) throw std::runtime_error("report: bad metrics row");
      metric_rows.push_back(json{{"metric", metric},
                                 {"n", static_cast<int>(v[0])},
                                 {"g", static_cast<int>(v[1])},
                                 {"alpha", v[2]},
                                 {"beta", v[3]},
                                 {"value", v[4]},
                                 {"samples", static_cast<int>(v[5])}});
    }
  }

  const EpochLog& last = logs.back();
  json summary = {
      {"format", "dtgspl-summary"},
      {"version", 1},
      {"epochs", static_cast<int>(logs.size())},
      {"final_losses",
       {{"total", last.l_total},
        {"pme", last.l_pme},
        {"match", last.l_match},
        {"semantic", last.l_semantic},
        {"dmr", last.l_dmr}}},
      {"final_pseudo",
       {{"count", last.pseudo_count},
        {"precision", last.pseudo_precision},
        {"recall", last.pseudo_recall}}},
      {"metrics", metric_rows},
      {"config", ckpt.cfg.to_json()}};
  if (!validate_summary(summary)) {
    throw std::runtime_error("report: generated summary failed validation");
  }
  std::ofstream sj(fs::path(out_dir) / "summary.json", std::ios::binary);
  sj << summary.dump(2) << "\n";
  return summary;
}

bool validate_summary(const json& s) {
  if (!s.is_object()) return false;
  if (s.value("format", "") != "dtgspl-summary" || s.value("version", 0) != 1) {
    return false;
  }
  if (!s.contains("epochs") || !s.at("epochs").is_number_integer()) return false;
  for (const char* key : {"final_losses", "final_pseudo", "config"}) {
    if (!s.contains(key) || !s.at(key).is_object()) return false;
  }
  if (!s.contains("metrics") || !s.at("metrics").is_array()) return false;
  for (const auto& row : s.at("metrics")) {
    for (const char* key : {"metric", "n", "g", "alpha", "beta", "value", "samples"}) {
      if (!row.contains(key)) return false;
    }
  }
  for (const char* key : {"total", "pme", "match", "semantic", "dmr"}) {
    if (!s.at("final_losses").contains(key)) return false;
  }
  return true;
}

}  // namespace dtgspl::harness
