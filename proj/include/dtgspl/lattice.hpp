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

#include <Eigen/Dense>
#include <vector>

#include "dtgspl/temporal.hpp"

namespace dtgspl::lattice {

// One multi-scale candidate: clip-index pair [a, b] on the n-grid, plus its
// normalized span [a/n, (b+1)/n].
struct Proposal {
  int a;
  int b;
  Interval span;
};

// The sparse multi-scale candidate set over an n-clip grid. Longer proposals
// are sampled at coarser strides: length l uses stride s(l), the smallest
// power of two with base * s >= l. This reproduces C = 136 / 428 / 1104
// candidates for n = 16 / 32 / 64 at base 16.
class ProposalSet {
 public:
  static ProposalSet build(int n, int base = 16);

  // For hand-built fixtures.
  ProposalSet(int n, int base, std::vector<Proposal> items)
      : n_(n), base_(base), items_(std::move(items)) {}

  int size() const { return static_cast<int>(items_.size()); }
  const Proposal& operator[](int i) const { return items_[i]; }
  const std::vector<Proposal>& items() const { return items_; }
  int n() const { return n_; }
  int base() const { return base_; }
  double min_frac() const { return 1.0 / n_; }

 private:
  int n_;
  int base_;
  std::vector<Proposal> items_;
};

// Single-positive supervision over a proposal set: exactly one entry is
// positive, every other entry is unobserved (never negative).
class ProposalLabels {
 public:
  ProposalLabels(int positive_index, int size);

  int positive_index() const { return positive_; }
  int size() const { return size_; }
  bool is_positive(int i) const { return i == positive_; }

 private:
  int positive_;
  int size_;
};

// Marks the max-IoU proposal for the observed moment as the one positive.
// Ties break to the earlier start, then the shorter proposal.
ProposalLabels assign_single_positive(const ProposalSet& set, const Interval& z);

// Mean of the clip feature rows selected by interval_mask(p, rows(clips)).
Eigen::VectorXd pool_features(const Eigen::MatrixXd& clips, const Interval& p);

// Member clip indices of every proposal at clip resolution t_v.
std::vector<std::vector<int>> proposal_members(const ProposalSet& set, int t_v);

}  // namespace dtgspl::lattice
