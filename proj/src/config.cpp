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

#include "lsched/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <type_traits>

#include "lsched/error.hpp"

namespace lsched {

namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorKind::kConfigError, what);
}

// Reads known keys of one JSON object and rejects whatever is left over.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj.is_object()) config_error(where() + " must be an object");
    for (const auto& item : obj.items()) unread_.insert(item.key());
  }

  template <typename T>
  void get(const char* key, T& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v->is_boolean()) config_error(where(key) + " must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) config_error(where(key) + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v->is_number_integer() && !v->is_number_unsigned()) {
          config_error(where(key) + " must be non-negative");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v->is_number()) config_error(where(key) + " must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v->is_string()) config_error(where(key) + " must be a string");
    }
    out = v->get<T>();
  }

  const json* take(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return nullptr;
    unread_.erase(key);
    return &*it;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    if (!unread_.empty()) config_error("unknown key " + where(*unread_.begin()));
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> unread_;
};

void require(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

RefinePolicy refine_policy_from_string(const std::string& text) {
  if (text == "qoe") return RefinePolicy::kQoe;
  if (text == "memory") return RefinePolicy::kMemory;
  if (text == "quantity") return RefinePolicy::kQuantity;
  config_error("unknown refine policy '" + text + "'");
}

const char* to_string(RefinePolicy p) {
  switch (p) {
    case RefinePolicy::kQoe: return "qoe";
    case RefinePolicy::kMemory: return "memory";
    case RefinePolicy::kQuantity: return "quantity";
  }
  return "qoe";
}

void parse_oracle(const json& j, HardwareOracle& o) {
  Fields f(j, "oracle");
  f.get("a0", o.a0);
  f.get("a1", o.a1);
  f.get("a2", o.a2);
  f.get("b0", o.b0);
  f.get("b1", o.b1);
  f.get("b2", o.b2);
  f.get("gamma", o.gamma);
  f.get("penalty_cap", o.penalty_cap);
  f.finish();
  require(o.penalty_cap >= 1.0, "oracle.penalty_cap must be >= 1");
  require(o.gamma >= 0.0, "oracle.gamma must be >= 0");
}

void parse_refine(const json& j, RefineConfig& r) {
  Fields f(j, "refine");
  f.get("ema_alpha", r.ema_alpha);
  f.get("interval_s", r.interval_s);
  f.get("min_traffic", r.min_traffic);
  std::string policy;
  f.get("policy", policy);
  if (!policy.empty()) r.policy = refine_policy_from_string(policy);
  f.finish();
  require(r.ema_alpha > 0.0 && r.ema_alpha <= 1.0, "refine.ema_alpha must be in (0, 1]");
  require(r.interval_s > 0.0, "refine.interval_s must be positive");
}

void parse_balance(const json& j, BalancerConfig& b) {
  Fields f(j, "balance");
  f.get("overload_factor", b.overload_factor);
  f.get("starvation_threshold", b.starvation_threshold);
  f.get("max_concurrent", b.max_concurrent_transfers);
  f.get("rounds", b.migration_rounds);
  f.get("interval_s", b.interval_s);
  f.get("retry_s", b.retry_s);
  std::string mode;
  f.get("mode", mode);
  if (!mode.empty()) b.mode = balance_mode_from_string(mode);
  f.finish();
  require(b.max_concurrent_transfers >= 1, "balance.max_concurrent must be >= 1");
  require(b.migration_rounds >= 1, "balance.rounds must be >= 1");
  require(b.starvation_threshold >= 0, "balance.starvation_threshold must be >= 0");
  require(b.interval_s > 0.0, "balance.interval_s must be positive");
  require(b.retry_s > 0.0, "balance.retry_s must be positive");
}

void parse_planner(const json& j, PlannerSettings& p) {
  Fields f(j, "planner");
  f.get("exact_threshold", p.exact_threshold);
  f.get("population", p.population);
  f.get("occupancy_weighted", p.occupancy_weighted);
  f.finish();
  require(p.population >= 0, "planner.population must be >= 0");
}

void parse_metrics(const json& j, MetricsSettings& m) {
  Fields f(j, "metrics");
  f.get("warmup_fraction", m.warmup_fraction);
  if (const json* scales = f.take("slo_scales")) {
    require(scales->is_array(), "metrics.slo_scales must be an array");
    m.slo_scales.clear();
    for (const auto& s : *scales) {
      require(s.is_number() && s.get<double>() > 0.0,
              "metrics.slo_scales entries must be positive numbers");
      m.slo_scales.push_back(s.get<double>());
    }
  }
  f.finish();
  require(m.warmup_fraction >= 0.0 && m.warmup_fraction < 1.0,
          "metrics.warmup_fraction must be in [0, 1)");
}

void parse_sim(const json& j, SimConfig& s) {
  Fields f(j, "sim");
  f.get("heartbeat_s", s.heartbeat_s);
  f.get("message_latency_s", s.message_latency_s);
  f.get("message_jitter_s", s.message_jitter_s);
  f.get("horizon_s", s.horizon_s);
  f.get("check_invariants", s.check_invariants);
  f.finish();
  require(s.heartbeat_s > 0.0, "sim.heartbeat_s must be positive");
  require(s.message_latency_s >= 0.0, "sim.message_latency_s must be >= 0");
  require(s.message_jitter_s >= 0.0, "sim.message_jitter_s must be >= 0");
}

void parse_workload(const json& j, WorkloadSettings& w) {
  Fields f(j, "workload");
  f.get("rate", w.rate);
  f.get("duration", w.duration);
  f.get("seed", w.seed);
  f.get("pool_size", w.pool_size);
  f.get("pool_seed", w.pool_seed);
  f.get("pool_path", w.pool_path);
  f.finish();
  require(w.rate >= 0.0, "workload.rate must be >= 0");
  require(w.duration >= 0.0, "workload.duration must be >= 0");
}

std::vector<Stage> parse_layout(const json& j) {
  require(j.is_array(), "layout must be an array");
  std::vector<Stage> out;
  for (size_t k = 0; k < j.size(); ++k) {
    Fields f(j[k], "layout[" + std::to_string(k) + "]");
    Stage s;
    f.get("lo", s.lo);
    f.get("hi", s.hi);
    f.get("instances", s.instance_count);
    f.finish();
    out.push_back(s);
  }
  return out;
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc;
  SimConfig& s = rc.sim;
  Fields f(j, "");
  std::string policy;
  f.get("policy", policy);
  if (!policy.empty()) s.policy = policy_from_string(policy);
  f.get("seed", s.seed);
  f.get("instances", s.instances);
  f.get("kv_capacity_tokens", s.kv_capacity_tokens);
  f.get("bandwidth", s.bandwidth);
  f.get("kv_bytes_per_token", s.kv_bytes_per_token);
  f.get("max_context", s.max_context);
  f.get("batch_cap", s.batch_cap);
  f.get("admission_watermark", s.admission_watermark);
  if (const json* v = f.take("oracle")) parse_oracle(*v, s.oracle);
  if (const json* v = f.take("refine")) parse_refine(*v, s.refine);
  if (const json* v = f.take("balance")) parse_balance(*v, s.balance);
  if (const json* v = f.take("planner")) parse_planner(*v, s.planner);
  if (const json* v = f.take("metrics")) parse_metrics(*v, s.metrics);
  if (const json* v = f.take("sim")) parse_sim(*v, s);
  if (const json* v = f.take("workload")) parse_workload(*v, rc.workload);
  if (const json* v = f.take("layout")) s.layout = parse_layout(*v);
  if (const json* v = f.take("params")) {
    try {
      rc.params = params_from_json(v->dump());
    } catch (const Error& e) {
      config_error(std::string("params: ") + e.what());
    }
  }
  f.finish();
  require(s.instances >= 1, "instances must be >= 1");
  require(s.kv_capacity_tokens >= 1, "kv_capacity_tokens must be >= 1");
  require(s.bandwidth > 0.0, "bandwidth must be positive");
  require(s.kv_bytes_per_token > 0.0, "kv_bytes_per_token must be positive");
  require(s.max_context >= 2, "max_context must be >= 2");
  require(s.batch_cap >= 1, "batch_cap must be >= 1");
  require(s.admission_watermark >= 0.0 && s.admission_watermark < 1.0,
          "admission_watermark must be in [0, 1)");
  return rc;
}

RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

std::string run_config_to_json(const RunConfig& rc) {
  const SimConfig& s = rc.sim;
  const HardwareOracle& o = s.oracle;
  json layout = json::array();
  for (const auto& st : s.layout) {
    layout.push_back({{"lo", st.lo}, {"hi", st.hi}, {"instances", st.instance_count}});
  }
  json j = {
      {"policy", to_string(s.policy)},
      {"seed", s.seed},
      {"instances", s.instances},
      {"kv_capacity_tokens", s.kv_capacity_tokens},
      {"bandwidth", s.bandwidth},
      {"kv_bytes_per_token", s.kv_bytes_per_token},
      {"max_context", s.max_context},
      {"batch_cap", s.batch_cap},
      {"admission_watermark", s.admission_watermark},
      {"oracle",
       {{"a0", o.a0}, {"a1", o.a1}, {"a2", o.a2}, {"b0", o.b0}, {"b1", o.b1},
        {"b2", o.b2}, {"gamma", o.gamma}, {"penalty_cap", o.penalty_cap}}},
      {"refine",
       {{"ema_alpha", s.refine.ema_alpha},
        {"interval_s", s.refine.interval_s},
        {"min_traffic", s.refine.min_traffic},
        {"policy", to_string(s.refine.policy)}}},
      {"balance",
       {{"overload_factor", s.balance.overload_factor},
        {"starvation_threshold", s.balance.starvation_threshold},
        {"max_concurrent", s.balance.max_concurrent_transfers},
        {"rounds", s.balance.migration_rounds},
        {"interval_s", s.balance.interval_s},
        {"retry_s", s.balance.retry_s},
        {"mode", to_string(s.balance.mode)}}},
      {"planner",
       {{"exact_threshold", s.planner.exact_threshold},
        {"population", s.planner.population},
        {"occupancy_weighted", s.planner.occupancy_weighted}}},
      {"metrics",
       {{"warmup_fraction", s.metrics.warmup_fraction},
        {"slo_scales", s.metrics.slo_scales}}},
      {"sim",
       {{"heartbeat_s", s.heartbeat_s},
        {"message_latency_s", s.message_latency_s},
        {"message_jitter_s", s.message_jitter_s},
        {"horizon_s", s.horizon_s},
        {"check_invariants", s.check_invariants}}},
      {"workload",
       {{"rate", rc.workload.rate},
        {"duration", rc.workload.duration},
        {"seed", rc.workload.seed},
        {"pool_size", rc.workload.pool_size},
        {"pool_seed", rc.workload.pool_seed},
        {"pool_path", rc.workload.pool_path}}},
      {"layout", layout},
  };
  if (rc.params) j["params"] = json::parse(params_to_json(*rc.params));
  return j.dump(2) + "\n";
}

std::vector<TraceRequest> synthesize_trace(const WorkloadSettings& workload,
                                           int64_t max_context) {
  std::vector<LengthPair> pool =
      workload.pool_path.empty()
          ? synthetic_length_pool(workload.pool_size, workload.pool_seed, max_context)
          : read_length_pool(workload.pool_path);
  std::erase_if(pool, [&](const LengthPair& p) {
    return p.input_len + p.output_len > max_context;
  });
  if (pool.empty()) throw Error(ErrorKind::kEmptyTrace, "length pool is empty");
  return generate_poisson(workload.rate, workload.duration,
                          EmpiricalLengthSampler(std::move(pool)), workload.seed);
}

}  // namespace lsched
