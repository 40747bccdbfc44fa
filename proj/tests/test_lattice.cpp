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

#include <set>

#include "dtgspl/lattice.hpp"
#include "dtgspl/rng.hpp"

using namespace dtgspl;
using lattice::ProposalSet;

namespace {

// Brute-force argmax-IoU over a set, replicating the documented tie-break.
int brute_force_closest(const ProposalSet& set, const Interval& z) {
  int best = -1;
  double best_v = -1.0;
  for (int i = 0; i < set.size(); ++i) {
    const double v = iou(set[i].span, z);
    if (best < 0 || v > best_v) {
      best = i;
      best_v = v;
    } else if (v == best_v) {
      const Interval& p = set[i].span;
      const Interval& q = set[best].span;
      if (p.start() < q.start() ||
          (p.start() == q.start() && p.length() < q.length())) {
        best = i;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("lattice counts match the published configurations") {
  CHECK(ProposalSet::build(16).size() == 136);
  CHECK(ProposalSet::build(32).size() == 428);
  CHECK(ProposalSet::build(64).size() == 1104);
}

TEST_CASE("n=16 is the full upper triangle") {
  const auto set = ProposalSet::build(16);
  CHECK(set.size() == 16 * 17 / 2);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : set.items()) seen.insert({p.a, p.b});
  CHECK(static_cast<int>(seen.size()) == set.size());
}

TEST_CASE("lattice structural invariants") {
  for (const int n : {16, 32, 64}) {
    const auto set = ProposalSet::build(n);
    CHECK(set.min_frac() == doctest::Approx(1.0 / n));
    std::set<std::pair<int, int>> seen;
    double shortest = 1.0;
    for (const auto& p : set.items()) {
      CHECK(p.a >= 0);
      CHECK(p.b >= p.a);
      CHECK(p.b < n);
      CHECK(p.span.start() == doctest::Approx(static_cast<double>(p.a) / n));
      CHECK(p.span.end() == doctest::Approx(static_cast<double>(p.b + 1) / n));
      seen.insert({p.a, p.b});
      shortest = std::min(shortest, p.span.length());
    }
    CHECK(static_cast<int>(seen.size()) == set.size());
    CHECK(shortest == doctest::Approx(1.0 / n));
  }
  CHECK_THROWS_AS(ProposalSet::build(0), std::invalid_argument);
}

TEST_CASE("single positive assignment: exact lattice moment") {
  const auto set = ProposalSet::build(16);
  // z identical to proposal (a=4, b=7) -> that proposal wins with IoU 1.
  const auto labels = lattice::assign_single_positive(set, Interval(0.25, 0.5));
  const auto& p = set[labels.positive_index()];
  CHECK(p.a == 4);
  CHECK(p.b == 7);
  int positives = 0;
  for (int i = 0; i < labels.size(); ++i) positives += labels.is_positive(i);
  CHECK(positives == 1);
}

TEST_CASE("single positive assignment matches brute force") {
  const auto set = ProposalSet::build(16);

  // z = [0, 0.125] is exactly proposal (0, 1).
  const auto l1 = lattice::assign_single_positive(set, Interval(0.0, 0.125));
  CHECK(set[l1.positive_index()].a == 0);
  CHECK(set[l1.positive_index()].b == 1);

  // z = [0.49, 0.51]: brute-force enumeration picks the two-cell cover (7, 8).
  const Interval mid(0.49, 0.51);
  const auto l2 = lattice::assign_single_positive(set, mid);
  CHECK(l2.positive_index() == brute_force_closest(set, mid));
  CHECK(set[l2.positive_index()].a == 7);
  CHECK(set[l2.positive_index()].b == 8);

  Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(0.0, 0.95);
    const double b = rng.uniform(a + 0.01, 1.0);
    const Interval z(a, std::min(b, 1.0));
    CHECK(lattice::assign_single_positive(set, z).positive_index() ==
          brute_force_closest(set, z));
  }
}

TEST_CASE("assignment tie-break prefers earlier start, then shorter") {
  // Exact equal-IoU tie (both 1/3, exactly representable): earlier start wins.
  const std::vector<lattice::Proposal> mirrored = {
      {2, 3, Interval(0.5, 1.0)},
      {0, 1, Interval(0.0, 0.5)},
  };
  const Interval z1(0.25, 0.75);
  CHECK(iou(mirrored[0].span, z1) == iou(mirrored[1].span, z1));
  const auto l1 = lattice::assign_single_positive(ProposalSet(4, 16, mirrored), z1);
  CHECK(ProposalSet(4, 16, mirrored)[l1.positive_index()].span == Interval(0.0, 0.5));

  // Same start, exact equal IoU (both 1/2): the shorter proposal wins.
  const std::vector<lattice::Proposal> nested = {
      {0, 3, Interval(0.0, 1.0)},
      {0, 0, Interval(0.0, 0.25)},
  };
  const Interval z2(0.0, 0.5);
  CHECK(iou(nested[0].span, z2) == iou(nested[1].span, z2));
  const auto l2 = lattice::assign_single_positive(ProposalSet(4, 16, nested), z2);
  CHECK(ProposalSet(4, 16, nested)[l2.positive_index()].span == Interval(0.0, 0.25));
}

TEST_CASE("exactly one positive across random observed moments") {
  const auto set = ProposalSet::build(32);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.0, 0.9);
    const Interval z(a, std::min(1.0, a + rng.uniform(0.02, 0.3)));
    const auto labels = lattice::assign_single_positive(set, z);
    int count = 0;
    for (int j = 0; j < labels.size(); ++j) count += labels.is_positive(j);
    CHECK(count == 1);
  }
}

TEST_CASE("feature pooling") {
  Eigen::MatrixXd clips(2, 2);
  clips << 1.0, 0.0, 0.0, 1.0;
  const Eigen::VectorXd both = lattice::pool_features(clips, Interval(0.0, 1.0));
  CHECK(both(0) == doctest::Approx(0.5));
  CHECK(both(1) == doctest::Approx(0.5));

  Eigen::MatrixXd same(4, 3);
  for (int r = 0; r < 4; ++r) same.row(r) << 2.0, -1.0, 0.25;
  const Eigen::VectorXd pooled = lattice::pool_features(same, Interval(0.1, 0.8));
  CHECK(pooled(0) == doctest::Approx(2.0));
  CHECK(pooled(1) == doctest::Approx(-1.0));
  CHECK(pooled(2) == doctest::Approx(0.25));

  // global mean over [0,1]
  Eigen::MatrixXd two(2, 1);
  two << 1.0, 3.0;
  CHECK(lattice::pool_features(two, Interval(0.0, 1.0))(0) == doctest::Approx(2.0));
}

TEST_CASE("proposal members align with interval_mask") {
  const auto set = ProposalSet::build(16);
  const auto members = lattice::proposal_members(set, 32);
  REQUIRE(static_cast<int>(members.size()) == set.size());
  for (int i = 0; i < set.size(); ++i) {
    CHECK(!members[i].empty());
    CHECK(members[i] == interval_mask(set[i].span, 32).members());
  }
}
