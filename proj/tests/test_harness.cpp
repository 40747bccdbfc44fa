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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dtgspl/harness.hpp"
#include "dtgspl/lattice.hpp"
#include "dtgspl/rng.hpp"

using namespace dtgspl;
using harness::RunConfig;
using nn::Mat;

namespace {

namespace fs = std::filesystem;

// A configuration small enough to train in well under a second per epoch.
RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.gen.t_v = 16;
  cfg.gen.d_v = 6;
  cfg.gen.samples = 16;
  cfg.gen.min_width_clips = 2;
  cfg.gen.max_width_clips = 4;
  cfg.gen.max_positives = 3;
  cfg.d_m = 8;
  cfg.d_l = 6;
  cfg.ffn_hidden = 12;
  cfg.proposal_n = 8;
  cfg.batch = 8;
  cfg.epochs = 2;
  cfg.seed = 3;
  return cfg;
}

struct TinyData {
  std::vector<synth::TrainSample> train;
  harness::OracleMap oracle;
};

TinyData make_data(const RunConfig& cfg) {
  const auto ds = synth::gen_dataset(cfg.gen, cfg.seed);
  TinyData out;
  out.train = synth::train_view(ds);
  for (const auto& s : ds.samples) out.oracle[s.id] = s.full_positives;
  return out;
}

std::string write_tmp(const std::string& name, const std::string& content) {
  const auto dir = fs::temp_directory_path() / "dtgspl_harness_test";
  fs::create_directories(dir);
  const std::string path = (dir / name).string();
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

}  // namespace

TEST_CASE("config file parsing") {
  const std::string path = write_tmp("cfg.txt",
                                     "# comment\n"
                                     "samples = 42\n"
                                     "n_outputs = 7   # trailing comment\n"
                                     "gamma1 = 0.2\n"
                                     "no_epr = true\n"
                                     "multi_agg = per_sample\n");
  const RunConfig cfg = RunConfig::from_file(path);
  CHECK(cfg.gen.samples == 42);
  CHECK(cfg.n_outputs == 7);
  CHECK(cfg.k == doctest::Approx(7.0));  // k tracks n_outputs unless pinned
  CHECK(cfg.gamma1 == doctest::Approx(0.2));
  CHECK(cfg.no_epr);
  CHECK(cfg.agg == metrics::MultiAgg::PerSample);

  const std::string pinned = write_tmp("cfg2.txt", "n_outputs = 7\nk = 3\n");
  CHECK(RunConfig::from_file(pinned).k == doctest::Approx(3.0));

  const std::string bad = write_tmp("cfg3.txt", "unknown_key = 1\n");
  CHECK_THROWS_AS(RunConfig::from_file(bad), std::invalid_argument);
  const std::string malformed = write_tmp("cfg4.txt", "just words\n");
  CHECK_THROWS_AS(RunConfig::from_file(malformed), std::runtime_error);
}

TEST_CASE("config json round trip") {
  RunConfig cfg = tiny_cfg();
  cfg.no_reconstruction = true;
  cfg.lambda = 0.25;
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("defaults follow the published configuration") {
  const RunConfig cfg;
  CHECK(cfg.n_outputs == 5);
  CHECK(cfg.k == doctest::Approx(5.0));
  CHECK(cfg.gamma1 == doctest::Approx(0.1));
  CHECK(cfg.gamma2 == doctest::Approx(0.05));
  CHECK(cfg.lambda == doctest::Approx(0.5));
  CHECK(cfg.t_thresh == doctest::Approx(0.5));
  CHECK(cfg.n_s == 5);
  CHECK(cfg.proposal_n == 16);
}

TEST_CASE("training schedule: epoch 1 consumes no pseudo-labels") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  const auto result = harness::train(cfg, data.train, &data.oracle);
  REQUIRE(result.logs.size() == 2);
  CHECK(result.logs[0].pseudo_used == 0.0);
  CHECK(result.logs[0].epoch == 1);
  // Whatever epoch 1 estimated is what epoch 2 consumes.
  CHECK(result.logs[1].pseudo_used ==
        doctest::Approx(result.logs[0].pseudo_count));
}

TEST_CASE("joint loss is the sum of its parts") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  const auto result = harness::train(cfg, data.train, &data.oracle);
  for (const auto& log : result.logs) {
    CHECK(log.l_total == doctest::Approx(log.l_pme + log.l_dmr).epsilon(1e-12));
    CHECK(log.l_pme ==
          doctest::Approx(log.l_match + cfg.gamma2 * log.l_semantic).epsilon(1e-12));
    CHECK(std::isfinite(log.l_total));
  }
}

TEST_CASE("training is deterministic given config and seed") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  const auto a = harness::train(cfg, data.train, &data.oracle);
  const auto b = harness::train(cfg, data.train, &data.oracle);
  REQUIRE(a.logs.size() == b.logs.size());
  for (size_t i = 0; i < a.logs.size(); ++i) {
    CHECK(a.logs[i].l_total == b.logs[i].l_total);  // bitwise
    CHECK(a.logs[i].r1_iou05 == b.logs[i].r1_iou05);
    CHECK(a.logs[i].pseudo_count == b.logs[i].pseudo_count);
  }
  REQUIRE(a.params.size() == b.params.size());
  for (size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params.at(i).value == b.params.at(i).value);
  }
}

TEST_CASE("ablation variants share data order and reject unknown modes") {
  RunConfig cfg = tiny_cfg();
  cfg.epochs = 1;
  const TinyData data = make_data(cfg);
  CHECK_THROWS_AS(harness::ablate(cfg, "no_such_mode", data.train, data.oracle),
                  std::invalid_argument);
  const auto res = harness::ablate(cfg, "no_reconstruction", data.train, data.oracle);
  CHECK(res.full.size() == res.variant.size());
  REQUIRE(!res.full_logs.empty());
  // The no-reconstruction variant trains without a semantic branch.
  CHECK(res.variant_logs[0].l_semantic == 0.0);
  CHECK(res.full_logs[0].l_semantic > 0.0);
}

TEST_CASE("predict, evaluate, and the oracle id check") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  auto result = harness::train(cfg, data.train, &data.oracle);

  const auto records = harness::predict_records(result.params, cfg, data.train);
  REQUIRE(records.size() == data.train.size());
  for (const auto& r : records) {
    CHECK(static_cast<int>(r.predictions.size()) == cfg.n_outputs);
    REQUIRE(r.annotations.size() == 1);
  }

  const auto reports = harness::evaluate(result.params, cfg, data.train, data.oracle);
  CHECK(reports.size() == 9);  // 6 single-label rows + R@(5,5) + two filtered rows
  for (const auto& rep : reports) {
    CHECK(rep.value >= 0.0);
    CHECK(rep.value <= 100.0);
  }

  harness::OracleMap broken = data.oracle;
  broken.erase(broken.begin());
  CHECK_THROWS_AS(harness::evaluate(result.params, cfg, data.train, broken),
                  std::runtime_error);
}

TEST_CASE("a perfect predictor scores 100 across the board") {
  // Inject oracle intervals as predictions: every metric must saturate.
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  std::vector<metrics::EvalRecord> single, multi;
  for (const auto& s : data.train) {
    const auto& positives = data.oracle.at(s.id);
    // the top-1 head mirrors the observed label; the rest cover the oracle
    std::vector<Interval> preds = {s.observed};
    for (const auto& p : positives) {
      if (!(p == s.observed)) preds.push_back(p);
    }
    while (static_cast<int>(preds.size()) < cfg.n_outputs) preds.push_back(s.observed);
    single.push_back({s.id, preds, {s.observed}});
    multi.push_back({s.id, preds, positives});
  }
  CHECK(metrics::recall_single(single, 1, 0.7) == doctest::Approx(100.0));
  CHECK(metrics::recall_multi(multi, 5, 5, 0.7) == doctest::Approx(100.0));
  int filtered = 0;
  CHECK(metrics::recall_multi_filtered(multi, 5, 5, 0.7, 0.0, cfg.agg, &filtered) ==
        doctest::Approx(100.0));
}

TEST_CASE("checkpoint round trip preserves behavior exactly") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  auto result = harness::train(cfg, data.train, &data.oracle);
  const std::string path = write_tmp("ckpt.json", "");
  harness::save_checkpoint(path, result.params, cfg, cfg.epochs);
  auto ckpt = harness::load_checkpoint(path);
  CHECK(ckpt.epochs_trained == cfg.epochs);
  CHECK(ckpt.cfg.to_json() == cfg.to_json());
  REQUIRE(ckpt.params.size() == result.params.size());
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK(ckpt.params.at(i).value == result.params.at(i).value);
  }
  const auto before = harness::predict_records(result.params, cfg, data.train);
  const auto after = harness::predict_records(ckpt.params, ckpt.cfg, data.train);
  REQUIRE(before.size() == after.size());
  for (size_t i = 0; i < before.size(); ++i) {
    for (size_t p = 0; p < before[i].predictions.size(); ++p) {
      CHECK(before[i].predictions[p] == after[i].predictions[p]);
    }
  }
}

TEST_CASE("estimate_all stamps the epoch and respects the budget") {
  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  auto result = harness::train(cfg, data.train, &data.oracle);
  const auto pseudo = harness::estimate_all(result.params, cfg, data.train, 9);
  REQUIRE(pseudo.size() == data.train.size());
  for (const auto& p : pseudo) {
    CHECK(p.epoch == 9);
    CHECK(p.size() <= cfg.n_outputs - 1);
  }
}

TEST_CASE("joint per-sample loss gradient survives the checker end to end") {
  // Wire encoder -> {matching head, generator, decoder} exactly like the
  // trainer and gradient-check the whole thing on tiny dimensions.
  RunConfig cfg = tiny_cfg();
  cfg.gen.samples = 1;
  const auto ds = synth::gen_dataset(cfg.gen, 11);
  const auto& sample = ds.samples[0];
  const auto vocab = synth::Vocabulary::default_vocab();
  const auto props = lattice::ProposalSet::build(cfg.proposal_n, cfg.proposal_base);
  const auto members =
      lattice::proposal_members(props, static_cast<int>(sample.clips.rows()));

  nn::ParamStore ps(21);
  dmr::EncoderConfig ec{cfg.gen.d_v, cfg.d_l, cfg.d_m, 1, cfg.ffn_hidden};
  dmr::InteractionEncoder enc(ps, vocab, ec);
  pme::MatchingHead head(ps, cfg.d_m);
  pme::SemanticGenerator gen(ps, vocab, cfg.d_m, cfg.d_m, pme::GeneratorConfig{2, 2});
  dmr::MomentDecoder dec(ps, cfg.d_m, 3, cfg.ffn_hidden);
  ps.at("dec.se.b").value << -1.2, 1.2;

  std::vector<int> token_ids, target_ids;
  for (const auto& t : sample.query) {
    token_ids.push_back(vocab.token_id(t.tok));
    if (t.pos != "other") target_ids.push_back(vocab.token_id(t.tok));
  }
  const int positive =
      lattice::assign_single_positive(props, sample.observed).positive_index();
  pme::PseudoLabelSet pseudo;
  pseudo.items = {{Interval(0.05, 0.3), 0.8, 0.4}};

  const auto forward = [&](bool with_grad) {
    dmr::InteractionEncoder::Cache enc_cache;
    const auto [vf, qf] = enc.forward(ps, sample.clips, token_ids, &enc_cache);
    Mat pooled(props.size(), vf.cols());
    for (size_t p = 0; p < members.size(); ++p) {
      Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(vf.cols());
      for (const int j : members[p]) sum += vf.row(j);
      pooled.row(static_cast<int>(p)) = sum / members[p].size();
    }
    pme::MatchingHead::Cache head_cache;
    const nn::Vec scores = head.forward(ps, pooled, &head_cache);
    const auto epr = pme::epr_loss(scores, positive, cfg.k, cfg.gamma1);

    const auto aug =
        pme::augment_interval_features(vf, sample.observed, 2, uint64_t{99});
    pme::SemanticGenerator::Cache gen_cache;
    const double sem = gen.reconstruct_loss(ps, aug.features, target_ids, &gen_cache);

    dmr::MomentDecoder::Cache dec_cache;
    const auto preds = dec.forward(ps, vf, qf, &dec_cache);
    const auto assign = dmr::hungarian_match(pseudo, preds);
    const auto dl = dmr::dmr_loss(preds, sample.observed, pseudo, assign,
                                  cfg.lambda, cfg.gen.t_v);
    const double total = epr.loss + cfg.gamma2 * sem + dl.loss;
    if (!with_grad) return total;

    Mat d_vf = Mat::Zero(vf.rows(), vf.cols());
    Mat d_qf = Mat::Zero(qf.rows(), qf.cols());
    const Mat d_pooled = head.backward(ps, head_cache, epr.d_scores);
    for (size_t p = 0; p < members.size(); ++p) {
      for (const int j : members[p]) {
        d_vf.row(j) += d_pooled.row(static_cast<int>(p)) / members[p].size();
      }
    }
    Mat d_feats;
    gen.backward(ps, gen_cache, cfg.gamma2, &d_feats);
    for (int i = 0; i < aug.features.rows(); ++i) {
      for (size_t j = 0; j < aug.members.size(); ++j) {
        d_vf.row(aug.members[j]) +=
            aug.weights(i, static_cast<int>(j)) * d_feats.row(i);
      }
    }
    dec.backward(ps, dec_cache, dl.d_se, dl.d_cw, dl.d_att, d_vf, d_qf);
    enc.backward(ps, enc_cache, d_vf, d_qf);
    return total;
  };

  ps.zero_grad();
  forward(true);
  const auto loss = [&] { return forward(false); };
  CHECK(nn::grad_check(ps, loss, 1e-5, 40) < 1e-4);
}

TEST_CASE("report pipeline and summary validation") {
  const auto dir = fs::temp_directory_path() / "dtgspl_report_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "run");

  CHECK_THROWS_WITH_AS(harness::report((dir / "run").string(), (dir / "out").string()),
                       doctest::Contains("epoch_log.csv"),
                       std::runtime_error);

  const RunConfig cfg = tiny_cfg();
  const TinyData data = make_data(cfg);
  auto result = harness::train(cfg, data.train, &data.oracle);
  harness::write_epoch_log_csv((dir / "run" / "epoch_log.csv").string(), result.logs);
  metrics::write_report_csv(
      (dir / "run" / "metrics.csv").string(),
      harness::evaluate(result.params, cfg, data.train, data.oracle));
  harness::save_checkpoint((dir / "run" / "checkpoint.json").string(), result.params,
                           cfg, cfg.epochs);

  const auto summary = harness::report((dir / "run").string(), (dir / "out").string());
  CHECK(harness::validate_summary(summary));
  CHECK(summary.at("epochs").get<int>() == cfg.epochs);
  CHECK(fs::exists(dir / "out" / "losses.csv"));
  CHECK(fs::exists(dir / "out" / "pseudo_quality.csv"));
  CHECK(fs::exists(dir / "out" / "summary.json"));

  std::ifstream losses(dir / "out" / "losses.csv");
  std::string line;
  int rows = -1;  // header
  while (std::getline(losses, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == cfg.epochs);

  // round trip through the epoch log reader
  const auto logs = harness::read_epoch_log_csv((dir / "run" / "epoch_log.csv").string());
  REQUIRE(logs.size() == result.logs.size());
  CHECK(logs[0].epoch == 1);
  CHECK(logs[0].l_total == doctest::Approx(result.logs[0].l_total));

  nlohmann::json bad = summary;
  bad.erase("final_losses");
  CHECK(!harness::validate_summary(bad));
  fs::remove_all(dir);
}
