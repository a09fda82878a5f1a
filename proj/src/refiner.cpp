/* Copyright 2026 The lsched Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lsched/refiner.hpp"

#include <algorithm>
#include <cstdlib>

#include "lsched/planner.hpp"

namespace lsched {

void sort_by_length(std::vector<RequestShape>& shapes) {
  std::sort(shapes.begin(), shapes.end(),
            [](const RequestShape& a, const RequestShape& b) {
              if (a.seq_len != b.seq_len) return a.seq_len < b.seq_len;
              return a.input_len < b.input_len;
            });
}

std::vector<RequestShape> average_successor_load(
    std::span<const std::vector<RequestShape>> successor_sets) {
  std::vector<RequestShape> merged;
  for (const auto& set : successor_sets) {
    merged.insert(merged.end(), set.begin(), set.end());
  }
  if (successor_sets.empty() || merged.empty()) return {};
  sort_by_length(merged);
  return canonical_subset<RequestShape>(merged,
                                        static_cast<int>(successor_sets.size()));
}

namespace {

BatchFeatures minus(const BatchFeatures& a, const BatchFeatures& b) {
  BatchFeatures out;
  out.count = a.count - b.count;
  out.input_sum = a.input_sum - b.input_sum;
  out.input_sq_sum = a.input_sq_sum - b.input_sq_sum;
  out.seq_sum = a.seq_sum - b.seq_sum;
  return out;
}

}  // namespace

size_t optimal_split(std::span<const RequestShape> merged_sorted,
                     const QoeParams& params) {
  if (merged_sorted.empty()) {
    throw Error(ErrorKind::kEmptyList, "optimal_split on an empty list");
  }
  const BatchFeatures total = batch_features(merged_sorted);
  BatchFeatures prefix;
  size_t best = 0;
  double best_value = 0.0;
  for (size_t i = 0; i < merged_sorted.size(); ++i) {
    const double value =
        batch_qoe(prefix, params) + batch_qoe(minus(total, prefix), params);
    if (i == 0 || value < best_value) {
      best = i;
      best_value = value;
    }
    prefix.add(merged_sorted[i]);
  }
  return best;
}

size_t balanced_split(std::span<const RequestShape> merged_sorted,
                      RefinePolicy policy) {
  if (merged_sorted.empty()) {
    throw Error(ErrorKind::kEmptyList, "balanced_split on an empty list");
  }
  int64_t total = 0;
  for (const auto& s : merged_sorted) {
    total += policy == RefinePolicy::kMemory ? s.seq_len : 1;
  }
  int64_t prefix = 0;
  size_t best = 0;
  int64_t best_gap = 0;
  for (size_t i = 0; i < merged_sorted.size(); ++i) {
    const int64_t gap = std::llabs(prefix - (total - prefix));
    if (i == 0 || gap < best_gap) {
      best = i;
      best_gap = gap;
    }
    prefix += policy == RefinePolicy::kMemory ? merged_sorted[i].seq_len : 1;
  }
  return best;
}

RefineOutcome refine(const BoundaryState& current,
                     std::span<const RequestShape> local,
                     std::span<const std::vector<RequestShape>> successor_sets,
                     const QoeParams& params, RefinePolicy policy) {
  RefineOutcome out;
  out.state = current;
  std::vector<RequestShape> merged = average_successor_load(successor_sets);
  if (static_cast<int>(local.size() + merged.size()) < current.min_traffic ||
      local.size() + merged.size() == 0) {
    return out;
  }
  merged.insert(merged.end(), local.begin(), local.end());
  sort_by_length(merged);
  const size_t b = policy == RefinePolicy::kQoe ? optimal_split(merged, params)
                                                : balanced_split(merged, policy);
  out.raw = static_cast<double>(merged[b].seq_len);
  out.state.boundary =
      current.ema_alpha * out.raw + (1.0 - current.ema_alpha) * current.boundary;
  out.applied = true;
  return out;
}

}  // namespace lsched
