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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lsched/event_log.hpp"

namespace lsched {

// Lifecycle timestamps of one request in microseconds; -1 when not reached.
struct RequestTimeline {
  int64_t id = 0;
  int64_t arrival_us = -1;
  int64_t first_token_us = -1;
  int64_t completion_us = -1;
  int64_t output_len = 0;
  int migrations = 0;
};

struct RequestMetrics {
  int64_t id = 0;
  double ttft = 0.0;
  // Mean gap between consecutive tokens after the first. Zero, and left out
  // of TPOT aggregates, for single-token outputs.
  double tpot_mean = 0.0;
  bool has_tpot = false;
  double normalized_latency = 0.0;  // end-to-end latency / output tokens
  int64_t output_len = 0;
  int64_t completion_us = 0;
};

// Throws kIncompleteRequest unless the request has a first token and a
// completion.
RequestMetrics per_request_metrics(const RequestTimeline& timeline);

// Nearest-rank percentile, p in (0, 100]. Zero for an empty sample.
double percentile(std::vector<double> values, double p);

// Per-instance reference latencies of an unloaded system.
struct SloBaseline {
  double ttft = 0.0;
  double tpot = 0.0;
};

// Share of requests with ttft <= scale * ttft0 and tpot <= scale * tpot0.
double slo_attainment(std::span<const RequestMetrics> requests,
                      const SloBaseline& baseline, double scale);

// Population coefficient of variation of each stage's per-instance token
// counts; 0 for a stage whose mean is 0.
std::vector<double> stage_cv(std::span<const std::vector<int64_t>> per_stage);

struct Summary {
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

Summary summarize(const std::vector<double>& values);

struct MetricsReport {
  std::string policy;
  uint64_t seed = 0;
  int64_t requests = 0;
  int64_t completed = 0;
  int64_t rejected = 0;
  int64_t migrations = 0;
  Summary ttft;
  Summary tpot;
  Summary normalized_latency;
  // Output tokens of requests finishing inside the window, per second.
  double throughput = 0.0;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  int64_t window_tokens = 0;
  SloBaseline slo_baseline;
  std::map<double, double> slo;  // scale -> attainment
  std::vector<double> stage_cv;
  double mean_stage_cv = 0.0;
  std::vector<int64_t> instance_tokens;
  std::vector<int> instance_stage;
};

// Rebuilds every metric from an event log alone. Both the simulator and the
// `report` command go through this.
MetricsReport compute_report(const EventLog& log);

std::vector<RequestTimeline> request_timelines(const EventLog& log);

std::string report_to_json(const MetricsReport& report);

// `id,arrival,ttft,tpot_mean,migrations,normalized_latency`, seconds.
std::string per_request_csv(const EventLog& log);

}  // namespace lsched
