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

#include "dtgspl/lattice.hpp"

#include <stdexcept>

namespace dtgspl::lattice {

namespace {

int stride_for_length(int length, int base) {
  int s = 1;
  while (base * s < length) s <<= 1;
  return s;
}

}  // namespace

ProposalSet ProposalSet::build(int n, int base) {
  if (n < 1) throw std::invalid_argument("ProposalSet: n must be >= 1");
  if (base < 1) throw std::invalid_argument("ProposalSet: base must be >= 1");
  std::vector<Proposal> items;
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      const int s = stride_for_length(b - a + 1, base);
      if (a % s != 0 || (b + 1) % s != 0) continue;
      items.push_back(Proposal{
          a, b, Interval(static_cast<double>(a) / n, static_cast<double>(b + 1) / n)});
    }
  }
  return ProposalSet(n, base, std::move(items));
}

ProposalLabels::ProposalLabels(int positive_index, int size)
    : positive_(positive_index), size_(size) {
  if (size < 1 || positive_index < 0 || positive_index >= size) {
    throw std::invalid_argument("ProposalLabels: positive index out of range");
  }
}

ProposalLabels assign_single_positive(const ProposalSet& set, const Interval& z) {
  if (set.size() == 0) throw std::invalid_argument("assign_single_positive: empty set");
  int best = -1;
  double best_iou = -1.0;
  for (int i = 0; i < set.size(); ++i) {
    const Interval& p = set[i].span;
    const double v = iou(p, z);
    bool better;
    if (best < 0 || v != best_iou) {
      better = v > best_iou;
    } else {
      const Interval& q = set[best].span;
      better = p.start() < q.start() ||
               (p.start() == q.start() && p.length() < q.length());
    }
    if (better) {
      best = i;
      best_iou = v;
    }
  }
  return ProposalLabels(best, set.size());
}

Eigen::VectorXd pool_features(const Eigen::MatrixXd& clips, const Interval& p) {
  const ClipMask mask = interval_mask(p, static_cast<int>(clips.rows()));
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(clips.cols());
  int count = 0;
  for (int j = 0; j < static_cast<int>(mask.bits.size()); ++j) {
    if (mask.bits[j]) {
      sum += clips.row(j).transpose();
      ++count;
    }
  }
  return sum / count;
}

std::vector<std::vector<int>> proposal_members(const ProposalSet& set, int t_v) {
  std::vector<std::vector<int>> out;
  out.reserve(set.size());
  for (const auto& p : set.items()) {
    out.push_back(interval_mask(p.span, t_v).members());
  }
  return out;
}

}  // namespace dtgspl::lattice
