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
#include <random>
#include <span>
#include <string>
#include <vector>

namespace lsched {

inline constexpr int64_t kDefaultMaxContext = 131072;

struct TraceRequest {
  int64_t id = 0;
  double arrival_s = 0.0;
  int64_t input_len = 1;
  // Ground truth for the simulator; scheduling policies never read it.
  int64_t output_len = 1;

  int64_t total_len() const { return input_len + output_len; }
};

struct LengthPair {
  int64_t input_len = 1;
  int64_t output_len = 1;
};

struct LengthHistogram {
  std::vector<int64_t> bucket_edges;  // buckets are [edge[i], edge[i+1])
  std::vector<int64_t> counts;        // one per bucket
};

// Exponential tiers 1, 2, 4, ... ending at the first power of two >= max_len.
// Always yields at least one bucket.
std::vector<int64_t> bucketize(int64_t max_len);

// Bucket holding `len`; the top bucket is closed so that len == last edge
// still maps into it, and lengths below 1 map to bucket 0.
int bucket_index(std::span<const int64_t> edges, int64_t len);

LengthHistogram length_histogram(std::span<const TraceRequest> requests,
                                 std::span<const int64_t> edges);

// Seedable generator with a fixed algorithm (64-bit Mersenne Twister, whose
// output sequence the standard pins down) and hand-written transforms, so a
// seed reproduces the same trace on every platform and standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);
  double exponential(double rate);
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Resamples (input, output) pairs with replacement, keeping each pair intact.
class EmpiricalLengthSampler {
 public:
  explicit EmpiricalLengthSampler(std::vector<LengthPair> pool);

  LengthPair sample(Rng& rng) const;
  std::span<const LengthPair> pool() const { return pool_; }

 private:
  std::vector<LengthPair> pool_;
};

// Stand-in for a recorded dialogue dataset: a body of short and medium chat
// turns plus a sparse long-context tail. Pairs with total length above
// `max_context` are never produced.
std::vector<LengthPair> synthetic_length_pool(size_t size, uint64_t seed,
                                              int64_t max_context = kDefaultMaxContext);

// Reads (input_len, output_len) pairs from a CSV with that header.
std::vector<LengthPair> read_length_pool(const std::string& path);

std::vector<TraceRequest> generate_poisson(double rate, double duration,
                                           const EmpiricalLengthSampler& lengths,
                                           uint64_t seed);

struct LoadedTrace {
  std::vector<TraceRequest> requests;
  int64_t dropped = 0;  // rows longer than the context cap
};

// JSON Lines `{id, arrival_s, input_len, output_len}` or CSV with the same
// columns (chosen by a `.csv` extension). Rows whose total length exceeds
// `max_context` are dropped and counted.
LoadedTrace load_trace(const std::string& path,
                       int64_t max_context = kDefaultMaxContext);

void write_trace_jsonl(const std::string& path,
                       std::span<const TraceRequest> requests);

}  // namespace lsched
