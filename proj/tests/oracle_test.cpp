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

#include <gtest/gtest.h>

#include <vector>

namespace lsched {
namespace {

TEST(Prefill, QuadraticTermDominatesDoubling) {
  HardwareOracle o;
  for (int64_t len : {10, 1000, 50000}) {
    const double i = static_cast<double>(len);
    const double lhs = o.prefill_time(2 * len) - 4.0 * o.prefill_time(len);
    EXPECT_NEAR(lhs, o.a0 * (1 - 4) + o.a1 * (2 * i - 4 * i), 1e-15 * o.prefill_time(2 * len));
  }
  HardwareOracle unit;
  unit.a0 = 0;
  unit.a1 = 0;
  unit.a2 = 1;
  EXPECT_DOUBLE_EQ(unit.prefill_time(100), 10000.0);
}

TEST(Penalty, UniformBatchIsUnpenalized) {
  HardwareOracle o;
  const std::vector<int64_t> lens(8, 4096);
  EXPECT_DOUBLE_EQ(o.penalty(4096, 4096.0), 1.0);
  EXPECT_DOUBLE_EQ(o.decode_step_time(lens), o.b0 + o.b1 * 8 + o.b2 * 8 * 4096);
}

TEST(Penalty, SpansTheCalibratedEnvelope) {
  const double gamma = calibrate_gamma(1000, 50000, 0.5, 1.1);
  HardwareOracle o;
  EXPECT_NEAR(o.gamma, gamma, 1e-15);
  // Half short, half long: exactly the low end of the envelope.
  EXPECT_NEAR(o.penalty(50000, 25500.0), 1.1, 1e-12);
  // A single long sequence among many short ones hits the cap.
  std::vector<int64_t> lens(1000, 100);
  lens.push_back(131072);
  int64_t sum = 0;
  for (int64_t l : lens) sum += l;
  EXPECT_DOUBLE_EQ(o.penalty(131072, static_cast<double>(sum) / lens.size()), 2.1);
  EXPECT_GE(o.penalty(2, 1.0), 1.0);
}

TEST(Penalty, GrowsWithHeterogeneity) {
  HardwareOracle o;
  double previous = 0.0;
  for (int64_t longest : {1000, 2000, 8000, 32000, 128000}) {
    const std::vector<int64_t> lens{1000, 1000, 1000, longest};
    const double t = o.decode_step_time(lens);
    EXPECT_GT(t, previous);
    previous = t;
  }
}

TEST(Decode, EmptyBatchTakesNoTime) {
  HardwareOracle o;
  EXPECT_EQ(o.decode_step_time(0, 0, 0), 0.0);
  EXPECT_EQ(o.decode_step_time(std::vector<int64_t>{}), 0.0);
}

}  // namespace
}  // namespace lsched
