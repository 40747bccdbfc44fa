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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "dtgspl/synth.hpp"

using namespace dtgspl;
using synth::GenConfig;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

GenConfig small_cfg() {
  GenConfig cfg;
  cfg.t_v = 32;
  cfg.d_v = 8;
  cfg.samples = 40;
  return cfg;
}

}  // namespace

TEST_CASE("default vocabulary is well formed") {
  const auto v = synth::Vocabulary::default_vocab();
  CHECK(v.templates.size() >= 8);
  std::set<std::string> uniq(v.all_tokens().begin(), v.all_tokens().end());
  CHECK(uniq.size() == v.all_tokens().size());
  CHECK(v.token_id(v.verbs[0]) == 0);
  CHECK_THROWS_AS(v.token_id("no-such-token"), std::invalid_argument);
  for (size_t t = 0; t < v.templates.size(); ++t) {
    CHECK_NOTHROW(v.token_id(v.verb_of(static_cast<int>(t))));
    CHECK_NOTHROW(v.token_id(v.noun_of(static_cast<int>(t))));
  }
}

TEST_CASE("generation is a pure function of config and seed") {
  const GenConfig cfg = small_cfg();
  const auto a = synth::gen_dataset(cfg, 123);
  const auto b = synth::gen_dataset(cfg, 123);
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].clips == b.samples[i].clips);  // bitwise
    CHECK(a.samples[i].observed == b.samples[i].observed);
    CHECK(a.samples[i].template_id == b.samples[i].template_id);
    REQUIRE(a.samples[i].full_positives.size() == b.samples[i].full_positives.size());
  }
  const auto c = synth::gen_dataset(cfg, 124);
  CHECK(a.samples[0].clips != c.samples[0].clips);
}

TEST_CASE("single-positive configuration pins the observed label") {
  GenConfig cfg = small_cfg();
  cfg.min_positives = cfg.max_positives = 1;
  const auto ds = synth::gen_dataset(cfg, 5);
  for (const auto& s : ds.samples) {
    REQUIRE(s.full_positives.size() == 1);
    CHECK(s.observed == s.full_positives[0]);
  }
}

TEST_CASE("planted instances are disjoint, wide enough, and counted") {
  GenConfig cfg = small_cfg();
  cfg.samples = 200;
  cfg.min_positives = cfg.max_positives = 3;
  const auto ds = synth::gen_dataset(cfg, 7);
  double total = 0;
  for (const auto& s : ds.samples) {
    total += static_cast<double>(s.full_positives.size());
    bool observed_found = false;
    for (const auto& p : s.full_positives) {
      CHECK(p.length() >= 1.0 / cfg.t_v - 1e-12);
      observed_found = observed_found || (p == s.observed);
    }
    CHECK(observed_found);
    for (size_t i = 0; i < s.full_positives.size(); ++i) {
      for (size_t j = i + 1; j < s.full_positives.size(); ++j) {
        CHECK(iou(s.full_positives[i], s.full_positives[j]) == 0.0);
      }
    }
  }
  CHECK(total / 200.0 == doctest::Approx(3.0));
}

TEST_CASE("uniform positives-per-sample averages out") {
  GenConfig cfg = small_cfg();
  cfg.samples = 400;
  cfg.min_positives = 1;
  cfg.max_positives = 5;
  const auto ds = synth::gen_dataset(cfg, 11);
  double total = 0;
  for (const auto& s : ds.samples) total += static_cast<double>(s.full_positives.size());
  CHECK(total / 400.0 == doctest::Approx(3.0).epsilon(0.1));
}

TEST_CASE("expose_single_positive is uniform over the positives") {
  GenConfig cfg = small_cfg();
  cfg.min_positives = cfg.max_positives = 3;
  cfg.samples = 1;
  const auto ds = synth::gen_dataset(cfg, 3);
  const auto& sample = ds.samples[0];
  std::map<double, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Interval z = synth::expose_single_positive(sample, 1000 + i);
    bool member = false;
    for (const auto& p : sample.full_positives) member = member || p == z;
    CHECK(member);
    ++counts[z.start()];
  }
  REQUIRE(counts.size() == 3);
  for (const auto& [start, count] : counts) {
    CHECK(static_cast<double>(count) / draws ==
          doctest::Approx(1.0 / 3.0).epsilon(0.05));
  }
  CHECK_THROWS_AS(
      [] {
        Rng rng(1);
        synth::expose_single_positive(std::vector<Interval>{}, rng);
      }(),
      std::invalid_argument);
}

TEST_CASE("oracle proposal labels via exhaustive IoU") {
  const auto set = lattice::ProposalSet::build(16);
  synth::Sample s{"fix",
                  Eigen::MatrixXd::Zero(32, 4),
                  {},
                  {Interval(0.0, 0.25), Interval(0.5, 0.75)},
                  Interval(0.0, 0.25),
                  0};
  const auto y = synth::oracle_labels(s, set, 0.7);
  // Hand enumeration at iou_pos = 0.7: each planted moment keeps its exact
  // 4-cell proposal, the two 3-cell subsets (0.75) and the 5-cell covers
  // (0.8). [0, 0.25] has one cover only since the left extension falls off
  // the video; [0.5, 0.75] has both.
  std::set<std::pair<int, int>> expected = {{0, 3}, {0, 2}, {1, 3}, {0, 4},
                                            {8, 11}, {8, 10}, {9, 11}, {8, 12},
                                            {7, 11}};
  std::set<std::pair<int, int>> got;
  for (int i = 0; i < set.size(); ++i) {
    if (y[i]) got.insert({set[i].a, set[i].b});
  }
  CHECK(got == expected);

  // iou_pos = 1.0 keeps only exact matches.
  const auto strict = synth::oracle_labels(s, set, 1.0);
  std::set<std::pair<int, int>> exact;
  for (int i = 0; i < set.size(); ++i) {
    if (strict[i]) exact.insert({set[i].a, set[i].b});
  }
  CHECK(exact == std::set<std::pair<int, int>>{{0, 3}, {8, 11}});
}

TEST_CASE("infeasible packing is rejected") {
  GenConfig cfg = small_cfg();
  cfg.t_v = 8;
  cfg.min_positives = cfg.max_positives = 5;
  cfg.min_width_clips = 4;
  cfg.max_width_clips = 4;
  CHECK_THROWS_AS(synth::gen_dataset(cfg, 1), std::invalid_argument);
}

TEST_CASE("train view and jsonl round trip") {
  namespace fs = std::filesystem;
  const GenConfig cfg = small_cfg();
  const auto ds = synth::gen_dataset(cfg, 77);
  const auto view = synth::train_view(ds);
  REQUIRE(view.size() == ds.samples.size());

  const auto dir = fs::temp_directory_path() / "dtgspl_synth_test";
  fs::create_directories(dir);
  const std::string train_path = (dir / "train.jsonl").string();
  const std::string oracle_path = (dir / "oracle.jsonl").string();
  synth::save_jsonl(train_path, ds, false);
  synth::save_jsonl(oracle_path, ds, true);

  // Training files must not leak the oracle labels.
  CHECK(slurp(train_path).find("full_positives") == std::string::npos);

  const auto loaded = synth::load_train_jsonl(train_path);
  REQUIRE(loaded.size() == ds.samples.size());
  for (size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].id == ds.samples[i].id);
    CHECK(loaded[i].observed == ds.samples[i].observed);
    CHECK(loaded[i].clips == ds.samples[i].clips);  // exact via shortest round trip
    REQUIRE(loaded[i].query.size() == ds.samples[i].query.size());
    for (size_t t = 0; t < loaded[i].query.size(); ++t) {
      CHECK(loaded[i].query[t].tok == ds.samples[i].query[t].tok);
      CHECK(loaded[i].query[t].pos == ds.samples[i].query[t].pos);
    }
  }

  const auto oracle = synth::load_oracle_jsonl(oracle_path);
  REQUIRE(oracle.size() == ds.samples.size());
  for (const auto& s : ds.samples) {
    const auto it = oracle.find(s.id);
    REQUIRE(it != oracle.end());
    REQUIRE(it->second.size() == s.full_positives.size());
    for (size_t i = 0; i < it->second.size(); ++i) {
      CHECK(it->second[i] == s.full_positives[i]);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("saved jsonl is byte-stable across runs") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "dtgspl_synth_bytes";
  fs::create_directories(dir);
  const GenConfig cfg = small_cfg();
  const std::string p1 = (dir / "a.jsonl").string();
  const std::string p2 = (dir / "b.jsonl").string();
  synth::save_jsonl(p1, synth::gen_dataset(cfg, 9), true);
  synth::save_jsonl(p2, synth::gen_dataset(cfg, 9), true);
  CHECK(slurp(p1) == slurp(p2));
  fs::remove_all(dir);
}

TEST_CASE("queries carry tagged verb and noun plus distractors") {
  const auto vocab = synth::Vocabulary::default_vocab();
  const auto ds = synth::gen_dataset(small_cfg(), 13);
  for (const auto& s : ds.samples) {
    int verbs = 0, nouns = 0;
    for (const auto& t : s.query) {
      if (t.pos == "verb") {
        ++verbs;
        CHECK(t.tok == vocab.verb_of(s.template_id));
      } else if (t.pos == "noun") {
        ++nouns;
        CHECK(t.tok == vocab.noun_of(s.template_id));
      }
    }
    CHECK(verbs == 1);
    CHECK(nouns == 1);
    CHECK(s.query.size() >= 4);
  }
}
