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

// lsched: fit, plan, simulate, compare and report.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lsched/config.hpp"
#include "lsched/cost_model.hpp"
#include "lsched/error.hpp"
#include "lsched/event_log.hpp"
#include "lsched/metrics.hpp"
#include "lsched/planner.hpp"
#include "lsched/simulator.hpp"
#include "lsched/workload.hpp"

namespace fs = std::filesystem;

namespace lsched {
namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return 2;
    case ErrorKind::kInfeasiblePlan: return 4;
    default: return 3;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir + ": " + ec.message());
}

// ---- fit --------------------------------------------------------------------

struct FitArgs {
  std::string samples;
  std::string out;
  std::string config;
  std::string trace;
  std::string write_samples;
  bool profile = false;
  uint64_t seed = 1;
  double validation_fraction = 0.2;
};

int run_fit(const FitArgs& a) {
  std::vector<ProfilingSample> samples;
  if (a.profile) {
    RunConfig rc = a.config.empty() ? RunConfig{} : read_run_config(a.config);
    std::vector<LengthPair> pool;
    if (!a.trace.empty()) {
      for (const auto& r : load_trace(a.trace, rc.sim.max_context).requests) {
        pool.push_back(LengthPair{r.input_len, r.output_len});
      }
    } else {
      pool = synthetic_length_pool(rc.workload.pool_size, rc.workload.pool_seed,
                                   rc.sim.max_context);
    }
    samples = profile_oracle(rc.sim, EmpiricalLengthSampler(std::move(pool))).samples;
    if (!a.write_samples.empty()) write_samples_csv(a.write_samples, samples);
  } else {
    if (a.samples.empty()) {
      throw Error(ErrorKind::kConfigError, "fit needs --samples or --profile");
    }
    samples = read_samples_csv(a.samples);
  }

  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(a.seed);
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const size_t n_val = static_cast<size_t>(
      static_cast<double>(samples.size()) * a.validation_fraction);
  std::vector<ProfilingSample> fit_set, val_set;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < order.size() - n_val ? fit_set : val_set).push_back(samples[order[i]]);
  }
  const QoeParams params = fit_params(fit_set);
  if (!a.out.empty()) {
    write_params_json(a.out, params);
  } else {
    std::cout << params_to_json(params);
  }
  std::cout << "fit_samples=" << fit_set.size()
            << " validation_samples=" << val_set.size() << "\n";
  if (!val_set.empty()) {
    double mean = 0.0;
    for (const auto& s : fit_set) mean += s.normalized_latency;
    mean /= static_cast<double>(fit_set.size());
    std::cout << "validation_mean_relative_error="
              << format_real(prediction_error(params, val_set).mean_abs) << "\n"
              << "constant_mean_relative_error="
              << format_real(constant_predictor_error(mean, val_set)) << "\n";
  }
  return 0;
}

// ---- plan -------------------------------------------------------------------

struct PlanArgs {
  std::string trace;
  std::string params;
  std::string out;
  int instances = 1;
  double bandwidth = 50e9;
  double kv_bytes_per_token = 114688.0;
  int64_t max_len = 0;
  int64_t max_context = kDefaultMaxContext;
  int exact_threshold = 8;
};

int run_plan(const PlanArgs& a) {
  const LoadedTrace trace = load_trace(a.trace, a.max_context);
  PlanInput input;
  for (const auto& r : trace.requests) {
    input.requests.push_back(LengthPair{r.input_len, r.output_len});
  }
  input.instances = a.instances;
  input.bandwidth = a.bandwidth;
  input.kv_bytes_per_token = a.kv_bytes_per_token;
  input.params = read_params_json(a.params);
  input.max_len = a.max_len;
  const PipelinePlan p = plan(input, PlannerOptions{a.exact_threshold});
  const std::string json = plan_to_json(p);
  if (a.out.empty()) {
    std::cout << json;
  } else {
    write_file(a.out, json);
  }
  return 0;
}

// ---- simulate / compare -------------------------------------------------------

struct SimArgs {
  std::string config;
  std::string trace;
  std::string params;
  std::string out;
  std::string policy;
  std::optional<uint64_t> seed;
  std::optional<double> rate;
  std::optional<double> duration;
  std::optional<int64_t> max_context;
  bool check_invariants = false;
};

RunConfig resolve_config(const SimArgs& a) {
  RunConfig rc = a.config.empty() ? RunConfig{} : read_run_config(a.config);
  if (!a.policy.empty()) rc.sim.policy = policy_from_string(a.policy);
  if (a.seed) {
    rc.sim.seed = *a.seed;
    rc.workload.seed = *a.seed;
  }
  if (a.rate) rc.workload.rate = *a.rate;
  if (a.duration) rc.workload.duration = *a.duration;
  if (a.max_context) rc.sim.max_context = *a.max_context;
  if (a.check_invariants) rc.sim.check_invariants = true;
  if (!a.params.empty()) rc.params = read_params_json(a.params);
  return rc;
}

std::vector<TraceRequest> resolve_trace(const RunConfig& rc, const std::string& path) {
  if (path.empty()) return synthesize_trace(rc.workload, rc.sim.max_context);
  LoadedTrace t = load_trace(path, rc.sim.max_context);
  if (t.dropped > 0) {
    std::cerr << "dropped " << t.dropped << " requests longer than max context\n";
  }
  return std::move(t.requests);
}

void write_run(const fs::path& dir, const RunConfig& rc, const SimResult& result) {
  write_file(dir / "report.json", report_to_json(result.report));
  write_file(dir / "events.csv", result.events.to_csv());
  write_file(dir / "per_request.csv", per_request_csv(result.events));
  RunConfig resolved = rc;
  resolved.params = result.params;
  write_file(dir / "config.json", run_config_to_json(resolved));
  write_file(dir / "plan.json", plan_to_json(result.plan));
}

int run_simulate(const SimArgs& a) {
  const RunConfig rc = resolve_config(a);
  const std::vector<TraceRequest> trace = resolve_trace(rc, a.trace);
  ensure_dir(a.out);
  const SimResult result = simulate(rc.sim, trace, rc.params);
  write_run(a.out, rc, result);
  const MetricsReport& r = result.report;
  std::cout << "policy=" << r.policy << " completed=" << r.completed
            << " rejected=" << r.rejected
            << " mean_normalized_latency=" << format_real(r.normalized_latency.mean)
            << " throughput=" << format_real(r.throughput) << "\n";
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

struct CompareArgs {
  SimArgs sim;
  std::string policies;
  std::string seeds = "1";
};

int run_compare(const CompareArgs& a) {
  const std::vector<std::string> policies = split_list(a.policies);
  if (policies.size() < 2) {
    throw Error(ErrorKind::kConfigError, "compare needs at least two policies");
  }
  std::vector<uint64_t> seeds;
  for (const auto& s : split_list(a.seeds)) {
    try {
      seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfigError, "bad seed '" + s + "'");
    }
  }
  if (seeds.empty()) throw Error(ErrorKind::kConfigError, "no seeds given");
  for (const auto& p : policies) policy_from_string(p);

  ensure_dir(a.sim.out);
  std::string runs =
      "policy,seed,requests,completed,rejected,migrations,mean_normalized_latency,"
      "p95_ttft,mean_tpot,throughput,mean_stage_cv";
  RunConfig first = resolve_config(a.sim);
  for (double s : first.sim.metrics.slo_scales) runs += ",slo_" + format_real(s);
  runs += '\n';
  struct Acc {
    double latency = 0.0, ttft = 0.0, throughput = 0.0, cv = 0.0;
    int n = 0;
  };
  std::vector<Acc> acc(policies.size());
  for (uint64_t seed : seeds) {
    SimArgs base = a.sim;
    base.seed = seed;
    base.policy.clear();
    RunConfig rc = resolve_config(base);
    const std::vector<TraceRequest> trace = resolve_trace(rc, a.sim.trace);
    // One oracle, trace, parameter set and SLO baseline shared by all policies.
    if (!rc.params) rc.params = calibrate_params(rc.sim, trace);
    const SloBaseline baseline = calibrate_slo_baseline(rc.sim, trace);
    for (size_t k = 0; k < policies.size(); ++k) {
      RunConfig prc = rc;
      prc.sim.policy = policy_from_string(policies[k]);
      const SimResult result = simulate(prc.sim, trace, prc.params, baseline);
      const fs::path dir =
          fs::path(a.sim.out) / (policies[k] + "-seed" + std::to_string(seed));
      ensure_dir(dir.string());
      write_run(dir, prc, result);
      const MetricsReport& r = result.report;
      runs += policies[k] + ',' + std::to_string(seed) + ',' +
              std::to_string(r.requests) + ',' + std::to_string(r.completed) + ',' +
              std::to_string(r.rejected) + ',' + std::to_string(r.migrations) + ',' +
              format_real(r.normalized_latency.mean) + ',' + format_real(r.ttft.p95) +
              ',' + format_real(r.tpot.mean) + ',' + format_real(r.throughput) + ',' +
              format_real(r.mean_stage_cv);
      for (const auto& [scale, value] : r.slo) runs += ',' + format_real(value);
      runs += '\n';
      acc[k].latency += r.normalized_latency.mean;
      acc[k].ttft += r.ttft.p95;
      acc[k].throughput += r.throughput;
      acc[k].cv += r.mean_stage_cv;
      ++acc[k].n;
    }
  }
  write_file(fs::path(a.sim.out) / "runs.csv", runs);
  std::string agg =
      "policy,runs,mean_normalized_latency,p95_ttft,throughput,mean_stage_cv\n";
  for (size_t k = 0; k < policies.size(); ++k) {
    const double n = static_cast<double>(acc[k].n);
    agg += policies[k] + ',' + std::to_string(acc[k].n) + ',' +
           format_real(acc[k].latency / n) + ',' + format_real(acc[k].ttft / n) + ',' +
           format_real(acc[k].throughput / n) + ',' + format_real(acc[k].cv / n) + '\n';
  }
  write_file(fs::path(a.sim.out) / "aggregate.csv", agg);
  write_file(fs::path(a.sim.out) / "config.json", run_config_to_json(first));
  std::cout << agg;
  return 0;
}

// ---- report -------------------------------------------------------------------

int run_report(const std::string& events, const std::string& out) {
  const EventLog log = EventLog::read_csv(events);
  const std::string json = report_to_json(compute_report(log));
  if (out.empty()) {
    std::cout << json;
  } else {
    write_file(out, json);
  }
  return 0;
}

void add_sim_options(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("--config", a.config, "JSON run configuration");
  cmd->add_option("--trace", a.trace, "JSONL or CSV trace; synthetic when omitted");
  cmd->add_option("--params", a.params, "QoE parameters JSON; profiled when omitted");
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_option("--seed", a.seed, "Seed for the simulation and synthetic trace");
  cmd->add_option("--rate", a.rate, "Synthetic arrival rate (requests/s)");
  cmd->add_option("--duration", a.duration, "Synthetic arrival window (s)");
  cmd->add_option("--max-context", a.max_context, "Longest admissible request");
  cmd->add_flag("--check-invariants", a.check_invariants,
                "Validate ownership and KV accounting after every event");
}

}  // namespace
}  // namespace lsched

int main(int argc, char** argv) {
  using namespace lsched;
  CLI::App app{"Length-partitioned pipeline scheduling for LLM serving"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit QoE parameters from profiling samples");
  fit_cmd->add_option("--samples", fit.samples, "CSV with header q,f1,f2,f3,f4");
  fit_cmd->add_option("--out", fit.out, "Where to write the parameters JSON");
  fit_cmd->add_option("--seed", fit.seed, "Seed of the fit/validation split");
  fit_cmd->add_option("--validation-fraction", fit.validation_fraction)
      ->check(CLI::Range(0.0, 0.9));
  fit_cmd->add_flag("--profile", fit.profile, "Profile the configured oracle instead");
  fit_cmd->add_option("--config", fit.config, "Run configuration for --profile");
  fit_cmd->add_option("--trace", fit.trace, "Length source for --profile");
  fit_cmd->add_option("--write-samples", fit.write_samples,
                      "Save the profiled samples as CSV");

  PlanArgs pl;
  auto* plan_cmd = app.add_subcommand("plan", "Partition instances into pipeline stages");
  plan_cmd->add_option("--trace", pl.trace, "Trace whose lengths drive the plan")->required();
  plan_cmd->add_option("--instances", pl.instances, "Number of instances")->required();
  plan_cmd->add_option("--bandwidth", pl.bandwidth, "Bytes per second between instances");
  plan_cmd->add_option("--kv-bytes-per-token", pl.kv_bytes_per_token);
  plan_cmd->add_option("--params", pl.params, "QoE parameters JSON")->required();
  plan_cmd->add_option("--max-len", pl.max_len, "Length axis end; 0 = longest request");
  plan_cmd->add_option("--max-context", pl.max_context, "Drop longer requests");
  plan_cmd->add_option("--exact-threshold", pl.exact_threshold);
  plan_cmd->add_option("--out", pl.out, "Plan JSON path; stdout when omitted");

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one policy over a trace");
  add_sim_options(sim_cmd, sim);
  sim_cmd->add_option("--policy", sim.policy,
                      "l4, round-robin, no-pipeline, chain or memory-balanced");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Run several policies and seeds");
  add_sim_options(cmp_cmd, cmp.sim);
  cmp_cmd->add_option("--policies", cmp.policies, "Comma-separated policies")->required();
  cmp_cmd->add_option("--seeds", cmp.seeds, "Comma-separated seeds");

  std::string events, report_out;
  auto* rep_cmd = app.add_subcommand("report", "Recompute metrics from an event log");
  rep_cmd->add_option("--events", events, "events.csv")->required();
  rep_cmd->add_option("--out", report_out, "report.json path; stdout when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*plan_cmd) return run_plan(pl);
    if (*sim_cmd) return run_simulate(sim);
    if (*cmp_cmd) return run_compare(cmp);
    if (*rep_cmd) return run_report(events, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
