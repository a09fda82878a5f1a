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

namespace lsched {

// Iteration-time model of one serving instance. Prefill is quadratic in the
// prompt; a decode step is linear in batch size and summed length, scaled by
// a penalty that grows with how uneven the batch's lengths are (the longest
// sequence holds the others back).
struct HardwareOracle {
  double a0 = 1e-3;   // prefill: a0 + a1 I + a2 I^2
  double a1 = 5e-7;
  double a2 = 1e-11;
  double b0 = 6e-3;   // decode: (b0 + b1 n + b2 sum L) * h
  double b1 = 2e-5;
  double b2 = 1e-7;
  double gamma = 0.10408163265306122;  // see calibrate_gamma
  double penalty_cap = 2.1;

  // h = min(cap, 1 + gamma (max L / mean L - 1)).
  double penalty(int64_t max_len, double mean_len) const;
  double prefill_time(int64_t input_len) const;
  double decode_step_time(int64_t batch_size, int64_t seq_sum,
                          int64_t max_len) const;
  double decode_step_time(std::span<const int64_t> seq_lens) const;
};

// Gamma that makes a batch with `long_fraction` of its members at
// `long_len` and the rest at `short_len` decode `target` times slower than
// a uniform one.
double calibrate_gamma(double short_len, double long_len, double long_fraction,
                       double target);

}  // namespace lsched
