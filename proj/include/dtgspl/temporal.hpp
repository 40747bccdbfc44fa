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
#include <utility>
#include <vector>

namespace dtgspl {

// Normalized temporal segment with 0 <= start < end <= 1. The single unit
// used for labels, proposals and predictions; seconds never appear.
class Interval {
 public:
  Interval(double start, double end);

  double start() const { return start_; }
  double end() const { return end_; }
  double length() const { return end_ - start_; }
  double mid() const { return 0.5 * (start_ + end_); }

  bool operator==(const Interval& o) const {
    return start_ == o.start_ && end_ == o.end_;
  }

 private:
  double start_;
  double end_;
};

// (center, width) parameterization; width > 0.
struct CenterWidth {
  double center;
  double width;
};

// Per-clip membership bits for an interval at a given clip count.
struct ClipMask {
  std::vector<uint8_t> bits;

  int ones() const;
  std::vector<int> members() const;
};

using ScoredInterval = std::pair<Interval, double>;

// Temporal intersection-over-union; 0 for disjoint intervals.
double iou(const Interval& a, const Interval& b);

// Greedy descending-score suppression: any two kept intervals have
// IoU <= iou_thresh. Ties are broken by earlier start, then shorter width,
// so the result does not depend on input order.
std::vector<ScoredInterval> nms(std::vector<ScoredInterval> items,
                                double iou_thresh);

CenterWidth se_to_cw(const Interval& a);

// Inverse of se_to_cw, clamped into [0,1]. Throws if width <= 0.
Interval cw_to_se(const CenterWidth& c);

// Clip j belongs to the mask iff its center (j + 0.5) / t_v lies inside the
// interval. An interval too narrow to cover any center falls back to the
// single clip containing its midpoint, so masks are never empty.
ClipMask interval_mask(const Interval& a, int t_v);

}  // namespace dtgspl
