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
#include <string>
#include <vector>

#include "lsched/simulator.hpp"

namespace lsched {

// Synthetic trace used when no trace file is given.
struct WorkloadSettings {
  double rate = 20.0;       // requests per second
  double duration = 60.0;   // seconds of arrivals
  uint64_t seed = 1;        // arrival process and sampling
  size_t pool_size = 20000;
  uint64_t pool_seed = 1;   // the synthetic dataset itself
  std::string pool_path;    // CSV of (input_len, output_len); synthetic if empty
};

struct RunConfig {
  SimConfig sim;
  WorkloadSettings workload;
  std::optional<QoeParams> params;
};

// Parses a JSON run configuration on top of the defaults. Unknown keys and
// ill-typed values throw kConfigError.
RunConfig run_config_from_json(const std::string& text);
RunConfig read_run_config(const std::string& path);

// Fully resolved configuration, suitable for reading back.
std::string run_config_to_json(const RunConfig& config);

std::vector<TraceRequest> synthesize_trace(const WorkloadSettings& workload,
                                           int64_t max_context);

}  // namespace lsched
