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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lsched/balancer.hpp"
#include "lsched/cost_model.hpp"
#include "lsched/event_log.hpp"
#include "lsched/metrics.hpp"
#include "lsched/oracle.hpp"
#include "lsched/planner.hpp"
#include "lsched/refiner.hpp"
#include "lsched/workload.hpp"

namespace lsched {

enum class Policy {
  kL4,              // planned pipeline, QoE refinement, bid-ask balancing
  kRoundRobin,      // one pool, rotating dispatch, no migration
  kNoPipeline,      // one pool with load-aware dispatch and rebalancing
  kChain,           // one instance per stage
  kMemoryBalanced,  // planned pipeline, boundaries equalize memory
};

const char* to_string(Policy policy);
Policy policy_from_string(const std::string& text);

struct PlannerSettings {
  int exact_threshold = 8;
  // Size of the request population handed to the planner.
  int population = 2048;
  // Sample sequences at a uniformly random point of their decode instead of
  // attributing each request to its final length.
  bool occupancy_weighted = true;
};

struct MetricsSettings {
  double warmup_fraction = 0.1;
  std::vector<double> slo_scales{5.0, 10.0, 20.0};
};

struct SimConfig {
  HardwareOracle oracle;
  int instances = 16;
  int64_t kv_capacity_tokens = 400000;
  double bandwidth = 50e9;              // bytes per second between instances
  double kv_bytes_per_token = 114688.0;
  int64_t max_context = kDefaultMaxContext;
  int batch_cap = 1024;
  // Admission keeps this share of KV space free for decode growth.
  double admission_watermark = 0.05;
  double heartbeat_s = 0.001;
  double message_latency_s = 0.0001;
  // Each message adds a seeded uniform delay in [0, jitter] so concurrent
  // replies reach the asker in a definite order.
  double message_jitter_s = 0.00005;
  // Hard stop; 0 picks a generous multiple of the trace span.
  double horizon_s = 0.0;
  RefineConfig refine;
  BalancerConfig balance;
  PlannerSettings planner;
  MetricsSettings metrics;
  Policy policy = Policy::kL4;
  uint64_t seed = 1;
  // Overrides the policy's own layout when non-empty.
  std::vector<Stage> layout;
  // Re-validates ownership and KV accounting after every event (slow).
  bool check_invariants = false;
};

struct SimCounters {
  int64_t events = 0;
  int64_t asks = 0;
  int64_t bid_timeouts = 0;
  int64_t stale_confirms = 0;
  int64_t starvation_notices = 0;
  int64_t transfers_started = 0;
  int64_t transfers_aborted = 0;
  int64_t destination_full = 0;
  int64_t preemptions = 0;
  int64_t refines = 0;
  int64_t boundary_clamps = 0;
  int64_t invariant_checks = 0;
  int peak_transfers = 0;
  // Longest run of consecutive pumps that passed over one ticket.
  int max_failed_attempts = 0;
  bool drained = true;
};

struct SimResult {
  MetricsReport report;
  EventLog events;
  PipelinePlan plan;
  QoeParams params;
  SimCounters counters;
  std::vector<int64_t> final_boundaries;
};

// First stage with lo <= len < hi. Throws kNoCoveringStage otherwise.
int covering_stage(std::span<const Stage> stages, int64_t len);

// Initial layout a policy starts from.
PipelinePlan initial_layout(const SimConfig& config,
                            std::span<const TraceRequest> trace,
                            const QoeParams& params);

// Planner population drawn from a trace's length distribution.
std::vector<LengthPair> planner_population(std::span<const TraceRequest> trace,
                                           const PlannerSettings& settings,
                                           uint64_t seed);

// TTFT and TPOT of a single median-sized request on an idle instance.
SloBaseline calibrate_slo_baseline(const SimConfig& config,
                                   std::span<const TraceRequest> trace);

struct ProfilingSettings {
  std::vector<int64_t> input_buckets{64, 256, 1024, 4096, 16384};
  std::vector<int> batch_sizes{1, 4, 16, 64};
  int completions_per_run = 48;
  uint64_t seed = 7;
};

struct ProfilingData {
  std::vector<ProfilingSample> samples;
  std::vector<PrefillTiming> prefill;
  std::vector<DecodeTiming> decode;
};

// Closed-loop runs of one instance per (prompt bucket, concurrency) pair.
// Each completed request yields its lifetime-averaged batch features and
// normalized latency.
ProfilingData profile_oracle(const SimConfig& config,
                             const EmpiricalLengthSampler& outputs,
                             const ProfilingSettings& settings = {});

// Profiles the oracle and fits the QoE parameters.
QoeParams calibrate_params(const SimConfig& config,
                           std::span<const TraceRequest> trace);

// Runs a trace to completion. `params` is fitted when absent and a policy
// needs it; `baseline` is calibrated when absent.
SimResult simulate(const SimConfig& config, std::span<const TraceRequest> trace,
                   const std::optional<QoeParams>& params = std::nullopt,
                   const std::optional<SloBaseline>& baseline = std::nullopt);

}  // namespace lsched
