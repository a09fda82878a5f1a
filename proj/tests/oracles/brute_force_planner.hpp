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

// Exhaustive reference for the stage partition objective. It shares only the
// QoE arithmetic with the library; membership, subset selection, cut costs
// and the search itself are written out from the definitions.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "lsched/cost_model.hpp"
#include "lsched/planner.hpp"

namespace lsched::testing {

struct BruteForceResult {
  double quality = std::numeric_limits<double>::infinity();
  std::vector<int> cuts;         // edge positions between stages
  std::vector<int> allocation;   // instances per stage
  int64_t plans_seen = 0;
};

// Requests whose final length falls in bucket positions [a, b); the last
// bucket also holds anything past the final edge.
inline std::vector<RequestShape> members(const std::vector<LengthPair>& requests,
                                         const std::vector<int64_t>& edges, int a,
                                         int b) {
  const int last = static_cast<int>(edges.size()) - 1;
  std::vector<RequestShape> out;
  for (const auto& r : requests) {
    const int64_t len = r.input_len + r.output_len;
    int bucket = 0;
    while (bucket + 1 < last && len >= edges[bucket + 1]) ++bucket;
    if (bucket >= a && bucket < b) out.push_back({r.input_len, len});
  }
  std::sort(out.begin(), out.end(), [](const RequestShape& x, const RequestShape& y) {
    if (x.seq_len != y.seq_len) return x.seq_len < y.seq_len;
    return x.input_len < y.input_len;
  });
  return out;
}

// m times the QoE of the batch holding every m-th request from m/2 on.
inline double brute_stage_term(const std::vector<RequestShape>& sorted, int m,
                               const QoeParams& params) {
  BatchFeatures f;
  for (size_t i = static_cast<size_t>(m / 2); i < sorted.size(); i += static_cast<size_t>(m)) {
    f.add(sorted[i]);
  }
  return static_cast<double>(m) * batch_qoe(f, params);
}

inline double brute_cut_cost(int64_t cut, const std::vector<LengthPair>& requests,
                             double bandwidth, double bytes_per_token) {
  int64_t tokens = 0;
  for (const auto& r : requests) {
    if (r.input_len <= cut && cut < r.input_len + r.output_len) tokens += cut;
  }
  return static_cast<double>(tokens) * bytes_per_token / bandwidth;
}

// Every stage count, every set of cut positions and every allocation of
// `input.instances` into positive parts.
inline BruteForceResult brute_force_plan(const PlanInput& input,
                                         const std::vector<int64_t>& edges) {
  const int buckets = static_cast<int>(edges.size()) - 1;
  const int instances = input.instances;
  BruteForceResult best;

  std::vector<int> cuts;
  std::vector<int> alloc;
  auto score = [&](const std::vector<int>& bounds) {
    // bounds: 0 = p0 < p1 < ... < pS = buckets
    const int stages = static_cast<int>(bounds.size()) - 1;
    std::function<void(int, int)> assign = [&](int stage, int left) {
      if (stage == stages - 1) {
        alloc.push_back(left);
        double total = 0.0;
        for (int s = 0; s < stages; ++s) {
          const double term = brute_stage_term(
              members(input.requests, edges, bounds[s], bounds[s + 1]), alloc[s],
              input.params);
          if (s == 0) {
            total = term;
          } else {
            total = total + term +
                    brute_cut_cost(edges[bounds[s]], input.requests, input.bandwidth,
                                   input.kv_bytes_per_token);
          }
        }
        ++best.plans_seen;
        if (total < best.quality) {
          best.quality = total;
          best.cuts.assign(bounds.begin() + 1, bounds.end() - 1);
          best.allocation = alloc;
        }
        alloc.pop_back();
        return;
      }
      for (int m = 1; m <= left - (stages - 1 - stage); ++m) {
        alloc.push_back(m);
        assign(stage + 1, left - m);
        alloc.pop_back();
      }
    };
    assign(0, instances);
  };

  // Cut positions as subsets of {1, ..., buckets - 1}.
  const int inner = buckets - 1;
  for (uint32_t mask = 0; mask < (1u << inner); ++mask) {
    std::vector<int> bounds{0};
    for (int p = 1; p <= inner; ++p) {
      if (mask & (1u << (p - 1))) bounds.push_back(p);
    }
    bounds.push_back(buckets);
    if (static_cast<int>(bounds.size()) - 1 > instances) continue;
    score(bounds);
  }
  return best;
}

}  // namespace lsched::testing
