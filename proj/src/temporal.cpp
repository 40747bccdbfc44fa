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

#include "dtgspl/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dtgspl {

Interval::Interval(double start, double end) : start_(start), end_(end) {
  if (!(start >= 0.0 && start < end && end <= 1.0)) {
    throw std::invalid_argument("invalid interval [" + std::to_string(start) +
                                ", " + std::to_string(end) + "]");
  }
}

int ClipMask::ones() const {
  int n = 0;
  for (const uint8_t b : bits) n += b != 0;
  return n;
}

std::vector<int> ClipMask::members() const {
  std::vector<int> idx;
  for (size_t j = 0; j < bits.size(); ++j) {
    if (bits[j]) idx.push_back(static_cast<int>(j));
  }
  return idx;
}

double iou(const Interval& a, const Interval& b) {
  const double inter = std::min(a.end(), b.end()) - std::max(a.start(), b.start());
  if (inter <= 0.0) return 0.0;
  const double uni = a.length() + b.length() - inter;
  return inter / uni;
}

namespace {

bool score_order(const ScoredInterval& a, const ScoredInterval& b) {
  if (a.second != b.second) return a.second > b.second;
  if (a.first.start() != b.first.start()) return a.first.start() < b.first.start();
  return a.first.length() < b.first.length();
}

}  // namespace

std::vector<ScoredInterval> nms(std::vector<ScoredInterval> items,
                                double iou_thresh) {
  for (const auto& it : items) {
    if (!std::isfinite(it.second)) throw std::invalid_argument("nms: non-finite score");
  }
  std::sort(items.begin(), items.end(), score_order);
  std::vector<ScoredInterval> kept;
  for (const auto& cand : items) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (iou(cand.first, k.first) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

CenterWidth se_to_cw(const Interval& a) {
  return CenterWidth{0.5 * (a.start() + a.end()), a.length()};
}

Interval cw_to_se(const CenterWidth& c) {
  if (!(c.width > 0.0)) throw std::invalid_argument("cw_to_se: width must be positive");
  const double s = std::max(0.0, c.center - 0.5 * c.width);
  const double e = std::min(1.0, c.center + 0.5 * c.width);
  return Interval(s, e);
}

ClipMask interval_mask(const Interval& a, int t_v) {
  if (t_v < 1) throw std::invalid_argument("interval_mask: t_v must be >= 1");
  ClipMask m;
  m.bits.assign(static_cast<size_t>(t_v), 0);
  bool any = false;
  for (int j = 0; j < t_v; ++j) {
    const double center = (j + 0.5) / t_v;
    if (center >= a.start() && center <= a.end()) {
      m.bits[j] = 1;
      any = true;
    }
  }
  if (!any) {
    int j = static_cast<int>(a.mid() * t_v);
    j = std::clamp(j, 0, t_v - 1);
    m.bits[j] = 1;
  }
  return m;
}

}  // namespace dtgspl
