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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsched/cost_model.hpp"
#include "lsched/workload.hpp"

namespace lsched {

// Length range [lo, hi) served by `instance_count` instances.
struct Stage {
  int64_t lo = 0;
  int64_t hi = 1;
  int instance_count = 1;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct PipelinePlan {
  std::vector<Stage> stages;
  double predicted_quality = 0.0;

  int total_instances() const;
};

struct PlanInput {
  std::vector<LengthPair> requests;
  int instances = 1;
  double bandwidth = 1.0;  // bytes per second
  double kv_bytes_per_token = 1.0;
  QoeParams params;
  // Upper end of the length axis; 0 means the longest request's final length.
  int64_t max_len = 0;

  int64_t resolved_max_len() const;
};

struct PlannerOptions {
  // Also run the exact DP when instances <= this and keep the better plan.
  int exact_threshold = 8;
};

// Sorted-set division. Subset 0 is the canonical one: it starts at index
// floor(n/2) (0-based) and takes every n-th element; subset k starts at
// (floor(n/2) + k) mod n. Sizes differ by at most one.
template <typename T>
std::vector<std::vector<T>> split_evenly(std::span<const T> sorted, int n) {
  std::vector<std::vector<T>> out(static_cast<size_t>(n));
  const size_t stride = static_cast<size_t>(n);
  for (int k = 0; k < n; ++k) {
    const size_t start = (stride / 2 + static_cast<size_t>(k)) % stride;
    for (size_t i = start; i < sorted.size(); i += stride) {
      out[k].push_back(sorted[i]);
    }
  }
  return out;
}

template <typename T>
std::vector<T> canonical_subset(std::span<const T> sorted, int n) {
  std::vector<T> out;
  const size_t stride = static_cast<size_t>(n);
  for (size_t i = stride / 2; i < sorted.size(); i += stride) {
    out.push_back(sorted[i]);
  }
  return out;
}

// Delay of moving every sequence that straddles `cut` (input_len <= cut <
// input_len + output_len): each carries exactly `cut` tokens of KV cache.
double migration_cost(int64_t cut, std::span<const LengthPair> requests,
                      double bandwidth, double kv_bytes_per_token);

// Optimal plan over stage counts, allocations and bucket-aligned cuts.
PipelinePlan plan_exact(const PlanInput& input, std::span<const int64_t> edges);

// One instance per stage, cuts chosen optimally. When there are more
// instances than buckets the surplus is handed out one at a time to the
// stage whose quality term drops most.
PipelinePlan plan_chain(const PlanInput& input, std::span<const int64_t> edges);

// Repeatedly merges the adjacent pair with the largest positive gain.
PipelinePlan greedy_merge(const PipelinePlan& plan, const PlanInput& input,
                          std::span<const int64_t> edges);

// Chain + merge, cross-checked against the exact DP for small clusters.
PipelinePlan plan(const PlanInput& input, const PlannerOptions& options = {});

// Recomputes a plan's objective from scratch: per-stage quality terms plus
// the migration cost at every interior boundary.
double evaluate_plan(const PipelinePlan& plan, const PlanInput& input);

// Contiguity, positive widths and instance conservation.
bool is_valid_plan(const PipelinePlan& plan, int instances,
                   std::string* why = nullptr);

std::string plan_to_json(const PipelinePlan& plan);

}  // namespace lsched
