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

#include <algorithm>

#include "dtgspl/rng.hpp"
#include "dtgspl/temporal.hpp"

using namespace dtgspl;

namespace {

Interval random_interval(Rng& rng) {
  const double a = rng.uniform(0.0, 0.99);
  const double b = rng.uniform(a + 0.005, 1.0);
  return Interval(a, std::min(b, 1.0));
}

std::string mask_string(const ClipMask& m) {
  std::string s;
  for (const auto b : m.bits) s += b ? '1' : '0';
  return s;
}

}  // namespace

TEST_CASE("interval invariants") {
  CHECK_THROWS_AS(Interval(0.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Interval(0.6, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Interval(-0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(Interval(0.1, 1.5), std::invalid_argument);
  const Interval ok(0.0, 1.0);
  CHECK(ok.length() == doctest::Approx(1.0));
}

TEST_CASE("iou fixtures") {
  CHECK(iou(Interval(0.2, 0.4), Interval(0.2, 0.4)) == doctest::Approx(1.0));
  CHECK(iou(Interval(0.0, 0.2), Interval(0.3, 0.5)) == doctest::Approx(0.0));
  // intersection 0.25, union 0.75
  CHECK(iou(Interval(0.0, 0.5), Interval(0.25, 0.75)) ==
        doctest::Approx(0.25 / 0.75).epsilon(1e-9));
}

TEST_CASE("iou properties on random pairs") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Interval a = random_interval(rng);
    const Interval b = random_interval(rng);
    const double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    if (a == b) {
      CHECK(ab == doctest::Approx(1.0));
    } else {
      CHECK(ab < 1.0);
    }
    CHECK(iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("nms fixtures") {
  // IoU(first two) = 0.28/0.30 > 0.5, so the second is suppressed.
  std::vector<ScoredInterval> items = {{Interval(0.0, 0.3), 0.9},
                                       {Interval(0.02, 0.3), 0.8},
                                       {Interval(0.6, 0.9), 0.7}};
  const auto kept = nms(items, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].first == Interval(0.0, 0.3));
  CHECK(kept[1].first == Interval(0.6, 0.9));

  const auto one = nms({{Interval(0.1, 0.2), 1.0}}, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].second == 1.0);

  const auto disjoint =
      nms({{Interval(0.0, 0.2), 0.5}, {Interval(0.5, 0.7), 0.4}}, 0.5);
  CHECK(disjoint.size() == 2);

  CHECK(nms({}, 0.5).empty());
}

TEST_CASE("nms is input-order independent") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredInterval> items;
    const int n = rng.uniform_int(1, 10);
    for (int i = 0; i < n; ++i) {
      items.emplace_back(random_interval(rng), rng.uniform(0.0, 1.0));
    }
    const auto base = nms(items, 0.4);
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      rng.shuffle(items);
      const auto again = nms(items, 0.4);
      REQUIRE(again.size() == base.size());
      for (size_t i = 0; i < base.size(); ++i) {
        CHECK(again[i].first == base[i].first);
        CHECK(again[i].second == base[i].second);
      }
    }
  }
}

TEST_CASE("center-width conversions") {
  const CenterWidth cw = se_to_cw(Interval(0.2, 0.6));
  CHECK(cw.center == doctest::Approx(0.4));
  CHECK(cw.width == doctest::Approx(0.4));

  const Interval rt = cw_to_se(se_to_cw(Interval(0.1, 0.9)));
  CHECK(rt.start() == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rt.end() == doctest::Approx(0.9).epsilon(1e-12));

  // clamped conversion
  const Interval clamped = cw_to_se(CenterWidth{0.05, 0.2});
  CHECK(clamped.start() == doctest::Approx(0.0));
  CHECK(clamped.end() == doctest::Approx(0.15));

  CHECK_THROWS_AS(cw_to_se(CenterWidth{0.5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(cw_to_se(CenterWidth{0.5, -0.2}), std::invalid_argument);
}

TEST_CASE("cw roundtrip on non-clamping samples") {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const double width = rng.uniform(0.01, 0.9);
    const double center = rng.uniform(width / 2, 1.0 - width / 2);
    const CenterWidth cw{center, width};
    const CenterWidth back = se_to_cw(cw_to_se(cw));
    CHECK(std::abs(back.center - cw.center) < 1e-12);
    CHECK(std::abs(back.width - cw.width) < 1e-12);
  }
}

TEST_CASE("interval_mask fixtures") {
  CHECK(mask_string(interval_mask(Interval(0.0, 1.0), 4)) == "1111");
  // centers 0.625 and 0.875 fall inside [0.5, 1.0]
  CHECK(mask_string(interval_mask(Interval(0.5, 1.0), 4)) == "0011");
  // no clip center inside; midpoint 0.265 lies in clip 1
  CHECK(mask_string(interval_mask(Interval(0.26, 0.27), 4)) == "0100");
  CHECK_THROWS_AS(interval_mask(Interval(0.1, 0.2), 0), std::invalid_argument);
}

TEST_CASE("interval_mask of the full span is all ones") {
  for (int t = 1; t <= 64; ++t) {
    CHECK(interval_mask(Interval(0.0, 1.0), t).ones() == t);
  }
}

TEST_CASE("interval_mask is never empty") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Interval iv = random_interval(rng);
    const int t = rng.uniform_int(1, 64);
    CHECK(interval_mask(iv, t).ones() >= 1);
  }
}
