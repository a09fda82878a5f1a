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

#include "lsched/oracle.hpp"

#include <algorithm>

namespace lsched {

double HardwareOracle::penalty(int64_t max_len, double mean_len) const {
  if (mean_len <= 0.0) return 1.0;
  const double ratio = static_cast<double>(max_len) / mean_len;
  return std::min(penalty_cap, 1.0 + gamma * (ratio - 1.0));
}

double HardwareOracle::prefill_time(int64_t input_len) const {
  const double i = static_cast<double>(input_len);
  return a0 + a1 * i + a2 * i * i;
}

double HardwareOracle::decode_step_time(int64_t batch_size, int64_t seq_sum,
                                        int64_t max_len) const {
  if (batch_size <= 0) return 0.0;
  const double n = static_cast<double>(batch_size);
  const double sum = static_cast<double>(seq_sum);
  return (b0 + b1 * n + b2 * sum) * penalty(max_len, sum / n);
}

double HardwareOracle::decode_step_time(std::span<const int64_t> seq_lens) const {
  int64_t sum = 0;
  int64_t longest = 0;
  for (int64_t l : seq_lens) {
    sum += l;
    longest = std::max(longest, l);
  }
  return decode_step_time(static_cast<int64_t>(seq_lens.size()), sum, longest);
}

double calibrate_gamma(double short_len, double long_len, double long_fraction,
                       double target) {
  const double mean = long_fraction * long_len + (1.0 - long_fraction) * short_len;
  return (target - 1.0) / (long_len / mean - 1.0);
}

}  // namespace lsched
