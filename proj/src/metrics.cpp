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

#include "lsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "lsched/error.hpp"

namespace lsched {

namespace {

constexpr double kMicro = 1e-6;

int64_t to_i64(const std::string& text, const std::string& key) {
  try {
    size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kParseError, "bad integer for " + key + ": '" + text + "'");
  }
}

double to_f64(const std::string& text, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kParseError, "bad number for " + key + ": '" + text + "'");
  }
}

const std::string& require(const std::map<std::string, std::string>& kv,
                           const std::string& key, const std::string& event) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw Error(ErrorKind::kParseError, "event '" + event + "' lacks " + key);
  }
  return it->second;
}

}  // namespace

RequestMetrics per_request_metrics(const RequestTimeline& t) {
  if (t.arrival_us < 0 || t.first_token_us < 0 || t.completion_us < 0 ||
      t.output_len < 1) {
    throw Error(ErrorKind::kIncompleteRequest,
                "request " + std::to_string(t.id) + " has not completed");
  }
  RequestMetrics m;
  m.id = t.id;
  m.output_len = t.output_len;
  m.completion_us = t.completion_us;
  m.ttft = static_cast<double>(t.first_token_us - t.arrival_us) * kMicro;
  if (t.output_len > 1) {
    m.has_tpot = true;
    m.tpot_mean = static_cast<double>(t.completion_us - t.first_token_us) *
                  kMicro / static_cast<double>(t.output_len - 1);
  }
  m.normalized_latency = static_cast<double>(t.completion_us - t.arrival_us) *
                         kMicro / static_cast<double>(t.output_len);
  return m;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const size_t idx = static_cast<size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

double slo_attainment(std::span<const RequestMetrics> requests,
                      const SloBaseline& baseline, double scale) {
  if (requests.empty()) return 0.0;
  int64_t ok = 0;
  for (const auto& r : requests) {
    if (r.ttft <= scale * baseline.ttft && r.tpot_mean <= scale * baseline.tpot) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(requests.size());
}

std::vector<double> stage_cv(std::span<const std::vector<int64_t>> per_stage) {
  std::vector<double> out;
  for (const auto& counts : per_stage) {
    if (counts.empty()) {
      out.push_back(0.0);
      continue;
    }
    double mean = 0.0;
    for (int64_t c : counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(counts.size());
    if (mean == 0.0) {
      out.push_back(0.0);
      continue;
    }
    double var = 0.0;
    for (int64_t c : counts) {
      const double d = static_cast<double>(c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(counts.size());
    out.push_back(std::sqrt(var) / mean);
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  double total = 0.0;
  for (double v : values) total += v;
  s.mean = total / static_cast<double>(values.size());
  s.p50 = percentile(values, 50);
  s.p90 = percentile(values, 90);
  s.p95 = percentile(values, 95);
  s.p99 = percentile(values, 99);
  return s;
}

std::vector<RequestTimeline> request_timelines(const EventLog& log) {
  std::map<int64_t, RequestTimeline> by_id;
  for (const auto& r : log.records()) {
    if (r.event == "arrive") {
      auto kv = parse_detail(r.detail);
      RequestTimeline& t = by_id[r.request_id];
      t.id = r.request_id;
      t.arrival_us = r.ts_us;
      t.output_len = to_i64(require(kv, "output", r.event), "output");
    } else if (r.event == "first_token") {
      by_id[r.request_id].first_token_us = r.ts_us;
    } else if (r.event == "complete") {
      by_id[r.request_id].completion_us = r.ts_us;
    } else if (r.event == "migrate_done") {
      ++by_id[r.request_id].migrations;
    }
  }
  std::vector<RequestTimeline> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) out.push_back(t);
  return out;
}

MetricsReport compute_report(const EventLog& log) {
  MetricsReport rep;
  std::vector<double> slo_scales;
  int64_t window_start_us = 0;
  int64_t window_end_us = 0;
  bool have_run = false;
  std::map<int, int> stage_of;
  std::map<int, int64_t> tokens_of;
  std::map<int, std::vector<int64_t>> tallies;
  for (const auto& r : log.records()) {
    if (r.event == "run") {
      auto kv = parse_detail(r.detail);
      rep.policy = require(kv, "policy", r.event);
      rep.seed = static_cast<uint64_t>(to_i64(require(kv, "seed", r.event), "seed"));
      window_start_us = to_i64(require(kv, "window_start_us", r.event), "window_start_us");
      window_end_us = to_i64(require(kv, "window_end_us", r.event), "window_end_us");
      rep.slo_baseline.ttft = to_f64(require(kv, "ttft0", r.event), "ttft0");
      rep.slo_baseline.tpot = to_f64(require(kv, "tpot0", r.event), "tpot0");
      const std::string& scales = require(kv, "slo", r.event);
      size_t start = 0;
      while (start < scales.size()) {
        size_t end = scales.find('|', start);
        if (end == std::string::npos) end = scales.size();
        slo_scales.push_back(to_f64(scales.substr(start, end - start), "slo"));
        start = end + 1;
      }
      have_run = true;
    } else if (r.event == "instance") {
      stage_of[r.src] = static_cast<int>(
          to_i64(require(parse_detail(r.detail), "stage", r.event), "stage"));
      tokens_of.emplace(r.src, 0);
    } else if (r.event == "complete" || r.event == "migrate_done" ||
               r.event == "inflight") {
      tokens_of[r.src] +=
          to_i64(require(parse_detail(r.detail), "tokens", r.event), "tokens");
    } else if (r.event == "tally") {
      tallies[r.src].push_back(
          to_i64(require(parse_detail(r.detail), "tokens", r.event), "tokens"));
    } else if (r.event == "reject") {
      ++rep.rejected;
    }
  }
  if (!have_run) throw Error(ErrorKind::kParseError, "event log has no run record");

  const std::vector<RequestTimeline> timelines = request_timelines(log);
  std::vector<RequestMetrics> done;
  std::vector<double> ttft, tpot, norm;
  for (const auto& t : timelines) {
    rep.migrations += t.migrations;
    if (t.completion_us < 0) continue;
    const RequestMetrics m = per_request_metrics(t);
    done.push_back(m);
    ttft.push_back(m.ttft);
    if (m.has_tpot) tpot.push_back(m.tpot_mean);
    norm.push_back(m.normalized_latency);
    if (t.completion_us >= window_start_us && t.completion_us <= window_end_us) {
      rep.window_tokens += t.output_len;
    }
  }
  rep.requests = static_cast<int64_t>(timelines.size());
  rep.completed = static_cast<int64_t>(done.size());
  rep.ttft = summarize(ttft);
  rep.tpot = summarize(tpot);
  rep.normalized_latency = summarize(norm);
  rep.window_start_s = static_cast<double>(window_start_us) * kMicro;
  rep.window_end_s = static_cast<double>(window_end_us) * kMicro;
  const double span = rep.window_end_s - rep.window_start_s;
  rep.throughput = span > 0.0 ? static_cast<double>(rep.window_tokens) / span : 0.0;
  for (double s : slo_scales) rep.slo[s] = slo_attainment(done, rep.slo_baseline, s);

  // Balance is judged on the window when the run recorded both edges of it.
  bool windowed = !tallies.empty();
  for (const auto& [id, tokens] : tokens_of) {
    auto it = tallies.find(id);
    if (it == tallies.end() || it->second.size() != 2) windowed = false;
  }
  if (windowed) {
    for (auto& [id, tokens] : tokens_of) tokens = tallies[id][1] - tallies[id][0];
  }

  int stages = 0;
  for (const auto& [id, s] : stage_of) stages = std::max(stages, s + 1);
  std::vector<std::vector<int64_t>> per_stage(static_cast<size_t>(stages));
  for (const auto& [id, tokens] : tokens_of) {
    rep.instance_tokens.push_back(tokens);
    auto it = stage_of.find(id);
    const int s = it == stage_of.end() ? -1 : it->second;
    rep.instance_stage.push_back(s);
    if (s >= 0) per_stage[static_cast<size_t>(s)].push_back(tokens);
  }
  rep.stage_cv = stage_cv(per_stage);
  if (!rep.stage_cv.empty()) {
    double total = 0.0;
    for (double v : rep.stage_cv) total += v;
    rep.mean_stage_cv = total / static_cast<double>(rep.stage_cv.size());
  }
  return rep;
}

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"p50", s.p50}, {"p90", s.p90}, {"p95", s.p95}, {"p99", s.p99}};
}

}  // namespace

std::string report_to_json(const MetricsReport& rep) {
  nlohmann::json slo = nlohmann::json::object();
  for (const auto& [scale, value] : rep.slo) slo[format_real(scale)] = value;
  nlohmann::json j = {
      {"policy", rep.policy},
      {"seed", rep.seed},
      {"requests", rep.requests},
      {"completed", rep.completed},
      {"rejected", rep.rejected},
      {"migrations", rep.migrations},
      {"ttft_s", summary_json(rep.ttft)},
      {"tpot_s", summary_json(rep.tpot)},
      {"normalized_latency_s", summary_json(rep.normalized_latency)},
      {"throughput_tokens_per_s", rep.throughput},
      {"window", {{"start_s", rep.window_start_s},
                  {"end_s", rep.window_end_s},
                  {"tokens", rep.window_tokens}}},
      {"slo_baseline", {{"ttft_s", rep.slo_baseline.ttft},
                        {"tpot_s", rep.slo_baseline.tpot}}},
      {"slo_attainment", slo},
      {"stage_cv", rep.stage_cv},
      {"mean_stage_cv", rep.mean_stage_cv},
      {"instance_tokens", rep.instance_tokens},
      {"instance_stage", rep.instance_stage},
  };
  return j.dump(2) + "\n";
}

std::string per_request_csv(const EventLog& log) {
  std::string out = "id,arrival,ttft,tpot_mean,migrations,normalized_latency\n";
  for (const auto& t : request_timelines(log)) {
    if (t.completion_us < 0) continue;
    const RequestMetrics m = per_request_metrics(t);
    out += std::to_string(t.id) + ',' +
           format_real(static_cast<double>(t.arrival_us) * kMicro) + ',' +
           format_real(m.ttft) + ',' + format_real(m.tpot_mean) + ',' +
           std::to_string(t.migrations) + ',' + format_real(m.normalized_latency) +
           '\n';
  }
  return out;
}

}  // namespace lsched
