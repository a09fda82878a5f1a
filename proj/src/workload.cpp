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

#include "lsched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "lsched/csv.hpp"
#include "lsched/error.hpp"

namespace lsched {

std::vector<int64_t> bucketize(int64_t max_len) {
  std::vector<int64_t> edges{1, 2};
  while (edges.back() < max_len) edges.push_back(edges.back() * 2);
  return edges;
}

int bucket_index(std::span<const int64_t> edges, int64_t len) {
  const int buckets = static_cast<int>(edges.size()) - 1;
  if (len < edges.front()) return 0;
  auto it = std::upper_bound(edges.begin(), edges.end(), len);
  int idx = static_cast<int>(it - edges.begin()) - 1;
  return std::min(idx, buckets - 1);
}

LengthHistogram length_histogram(std::span<const TraceRequest> requests,
                                 std::span<const int64_t> edges) {
  LengthHistogram h;
  h.bucket_edges.assign(edges.begin(), edges.end());
  h.counts.assign(edges.size() - 1, 0);
  for (const auto& r : requests) ++h.counts[bucket_index(edges, r.total_len())];
  return h;
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint64_t Rng::below(uint64_t n) {
  // Rejection sampling keeps the draw unbiased for any n.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::exponential(double rate) {
  return -std::log1p(-uniform()) / rate;
}

double Rng::normal() {
  // Box-Muller, one variate per call.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

EmpiricalLengthSampler::EmpiricalLengthSampler(std::vector<LengthPair> pool)
    : pool_(std::move(pool)) {
  if (pool_.empty()) {
    throw Error(ErrorKind::kEmptyTrace, "length pool is empty");
  }
}

LengthPair EmpiricalLengthSampler::sample(Rng& rng) const {
  return pool_[rng.below(pool_.size())];
}

namespace {

int64_t lognormal_len(Rng& rng, double median, double sigma, int64_t lo,
                      int64_t hi) {
  const double v = median * std::exp(sigma * rng.normal());
  return std::clamp(static_cast<int64_t>(std::llround(v)), lo, hi);
}

}  // namespace

std::vector<LengthPair> synthetic_length_pool(size_t size, uint64_t seed,
                                              int64_t max_context) {
  Rng rng(seed);
  std::vector<LengthPair> pool;
  pool.reserve(size);
  while (pool.size() < size) {
    LengthPair p;
    if (rng.uniform() < 0.08) {
      // Long-context tail: log-uniform prompts between 8K and 64K tokens.
      const double lo = std::log(8000.0), hi = std::log(64000.0);
      p.input_len = static_cast<int64_t>(std::exp(lo + (hi - lo) * rng.uniform()));
      p.output_len = lognormal_len(rng, 300.0, 0.7, 4, 2048);
    } else {
      p.input_len = lognormal_len(rng, 400.0, 1.1, 8, 16000);
      p.output_len = lognormal_len(rng, 220.0, 0.8, 4, 2048);
    }
    if (p.input_len + p.output_len <= max_context) pool.push_back(p);
  }
  return pool;
}

std::vector<LengthPair> read_length_pool(const std::string& path) {
  CsvReader reader(path);
  reader.expect_header({"input_len", "output_len"});
  std::vector<LengthPair> pool;
  std::vector<std::string> row;
  while (reader.next(row)) {
    LengthPair p{reader.parse_int(row[0], "input_len"),
                 reader.parse_int(row[1], "output_len")};
    if (p.input_len < 1 || p.output_len < 1) reader.fail("lengths must be >= 1");
    pool.push_back(p);
  }
  if (pool.empty()) throw Error(ErrorKind::kEmptyTrace, path + ": no rows");
  return pool;
}

std::vector<TraceRequest> generate_poisson(double rate, double duration,
                                           const EmpiricalLengthSampler& lengths,
                                           uint64_t seed) {
  std::vector<TraceRequest> out;
  if (!(rate > 0.0) || !(duration > 0.0)) return out;
  Rng rng(seed);
  double t = 0.0;
  int64_t id = 0;
  while (true) {
    t += rng.exponential(rate);
    if (t >= duration) break;
    const LengthPair p = lengths.sample(rng);
    out.push_back(TraceRequest{id++, t, p.input_len, p.output_len});
  }
  return out;
}

namespace {

bool looks_like_csv(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

void check_row(const TraceRequest& r, int line, const std::string& path) {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorKind::kParseError,
                path + ":" + std::to_string(line) + ": " + what);
  };
  if (r.input_len < 1) bad("input_len must be >= 1");
  if (r.output_len < 1) bad("output_len must be >= 1");
  if (!std::isfinite(r.arrival_s) || r.arrival_s < 0.0) {
    bad("arrival_s must be a finite non-negative number");
  }
}

}  // namespace

LoadedTrace load_trace(const std::string& path, int64_t max_context) {
  std::vector<std::pair<TraceRequest, int>> rows;
  if (looks_like_csv(path)) {
    CsvReader reader(path);
    reader.expect_header({"id", "arrival_s", "input_len", "output_len"});
    std::vector<std::string> row;
    while (reader.next(row)) {
      TraceRequest r{reader.parse_int(row[0], "id"),
                     reader.parse_double(row[1], "arrival_s"),
                     reader.parse_int(row[2], "input_len"),
                     reader.parse_int(row[3], "output_len")};
      check_row(r, reader.line(), path);
      rows.emplace_back(r, reader.line());
    }
  } else {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
    std::string text;
    int line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      TraceRequest r;
      try {
        const auto j = nlohmann::json::parse(text);
        r.id = j.at("id").get<int64_t>();
        r.arrival_s = j.at("arrival_s").get<double>();
        r.input_len = j.at("input_len").get<int64_t>();
        r.output_len = j.at("output_len").get<int64_t>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::kParseError,
                    path + ":" + std::to_string(line) + ": " + e.what());
      }
      check_row(r, line, path);
      rows.emplace_back(r, line);
    }
  }
  if (rows.empty()) throw Error(ErrorKind::kEmptyTrace, path + ": no requests");

  std::set<int64_t> ids;
  LoadedTrace out;
  for (const auto& [r, line] : rows) {
    if (!ids.insert(r.id).second) {
      throw Error(ErrorKind::kParseError, path + ":" + std::to_string(line) +
                                              ": duplicate id " +
                                              std::to_string(r.id));
    }
    if (r.total_len() > max_context) {
      ++out.dropped;
      continue;
    }
    out.requests.push_back(r);
  }
  std::stable_sort(out.requests.begin(), out.requests.end(),
                   [](const TraceRequest& a, const TraceRequest& b) {
                     return a.arrival_s < b.arrival_s;
                   });
  return out;
}

void write_trace_jsonl(const std::string& path,
                       std::span<const TraceRequest> requests) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  for (const auto& r : requests) {
    nlohmann::json j{{"id", r.id},
                     {"arrival_s", r.arrival_s},
                     {"input_len", r.input_len},
                     {"output_len", r.output_len}};
    out << j.dump() << '\n';
  }
}

}  // namespace lsched
