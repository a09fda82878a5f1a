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
#include <vector>

#include "lsched/cost_model.hpp"

namespace lsched {

// How a stage boundary is recomputed from observed lengths.
enum class RefinePolicy {
  kQoe,       // argmin of the two-part batch QoE
  kMemory,    // equalize summed sequence length on both sides
  kQuantity,  // equalize request counts
};

struct RefineConfig {
  double ema_alpha = 0.3;
  double interval_s = 2.0;
  int min_traffic = 5;
  RefinePolicy policy = RefinePolicy::kQoe;
};

struct BoundaryState {
  double boundary = 0.0;  // smoothed; rounded when applied
  double ema_alpha = 0.3;
  int min_traffic = 5;
};

// Orders by current length, then prompt length.
void sort_by_length(std::vector<RequestShape>& shapes);

// Per-successor average: the canonical subset of the sorted union divided
// by the number of successors.
std::vector<RequestShape> average_successor_load(
    std::span<const std::vector<RequestShape>> successor_sets);

// Smallest b in [0, N) minimizing batch_qoe(R[:b]) + batch_qoe(R[b:]).
// Throws kEmptyList for an empty list.
size_t optimal_split(std::span<const RequestShape> merged_sorted,
                     const QoeParams& params);

// Split index for the non-QoE refinement policies (same tie rule).
size_t balanced_split(std::span<const RequestShape> merged_sorted,
                      RefinePolicy policy);

struct RefineOutcome {
  BoundaryState state;
  bool applied = false;  // false when traffic was below min_traffic
  double raw = 0.0;      // unsmoothed split length when applied
};

RefineOutcome refine(const BoundaryState& current,
                     std::span<const RequestShape> local,
                     std::span<const std::vector<RequestShape>> successor_sets,
                     const QoeParams& params,
                     RefinePolicy policy = RefinePolicy::kQoe);

}  // namespace lsched
