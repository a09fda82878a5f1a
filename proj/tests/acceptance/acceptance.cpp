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


// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lsched/config.hpp"
#include "lsched/cost_model.hpp"
#include "lsched/error.hpp"
#include "lsched/planner.hpp"
#include "lsched/refiner.hpp"
#include "lsched/simulator.hpp"
#include "lsched/workload.hpp"
#include "oracles/brute_force_planner.hpp"
#include "properties/protocol_properties.hpp"

namespace lsched {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---- planner ----------------------------------------------------------------

Outcome planner_optimality() {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  int matched = 0;
  int64_t plans_seen = 0;
  std::string first_mismatch;
  for (int trial = 0; trial < 50; ++trial) {
    PlanInput in;
    in.instances = 2 + static_cast<int>(rng.below(3));
    in.max_len = int64_t{1} << (2 + rng.below(5));  // 3 to 6 buckets
    in.bandwidth = 1e6;
    in.kv_bytes_per_token = 50.0 + 100.0 * rng.uniform();
    in.params.d << 0.01 + 0.02 * rng.uniform(), 1e-4 * rng.uniform(), 2e-6 * rng.uniform(),
        1e-9 * rng.uniform(), 5e-7 * rng.uniform();
    const int count = 1 + static_cast<int>(rng.below(40));
    for (int i = 0; i < count; ++i) {
      const int64_t total = 2 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(in.max_len - 1)));
      const int64_t input = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(total - 1)));
      in.requests.push_back({input, total - input});
    }
    const std::vector<int64_t> edges = bucketize(in.max_len);
    const PipelinePlan exact = plan_exact(in, edges);
    const auto brute = testing::brute_force_plan(in, edges);
    plans_seen += brute.plans_seen;
    if (exact.predicted_quality == brute.quality && is_valid_plan(exact, in.instances)) {
      ++matched;
    } else if (first_mismatch.empty()) {
      first_mismatch = "; trial " + std::to_string(trial) + " exact " +
                       fmt(exact.predicted_quality, 17) + " vs " + fmt(brute.quality, 17);
    }
  }
  const double secs = seconds_since(start);
  return {matched == 50 && secs < 10.0,
          std::to_string(matched) + "/50 exact matches over " + std::to_string(plans_seen) +
              " enumerated plans in " + fmt(secs, 3) + " s" + first_mismatch};
}

Outcome planner_speed(const QoeParams& params) {
  WorkloadSettings w;
  w.rate = 200.0;
  w.duration = 60.0;
  w.seed = 17;
  auto trace = synthesize_trace(w, kDefaultMaxContext);
  trace.resize(std::min<size_t>(trace.size(), 10000));
  PlanInput in;
  for (const auto& r : trace) in.requests.push_back({r.input_len, r.output_len});
  const SimConfig defaults;
  in.instances = 16;
  in.bandwidth = defaults.bandwidth;
  in.kv_bytes_per_token = defaults.kv_bytes_per_token;
  in.params = params;
  in.max_len = kDefaultMaxContext;
  const auto start = std::chrono::steady_clock::now();
  const PipelinePlan p = plan(in);
  const double secs = seconds_since(start);
  return {in.requests.size() == 10000 && secs < 1.0 && is_valid_plan(p, 16),
          std::to_string(in.requests.size()) + " requests, " + std::to_string(p.stages.size()) +
              " stages planned in " + fmt(secs, 3) + " s"};
}

// ---- cost model ---------------------------------------------------------------

std::vector<ProfilingSample> synthetic_samples(Rng& rng, int count, const QoeParams& truth,
                                               double noise) {
  std::vector<ProfilingSample> out;
  for (int i = 0; i < count; ++i) {
    const double n = 1.0 + static_cast<double>(rng.below(64));
    const double mean_in = 64.0 + rng.uniform() * 16000.0;
    const double spread = 0.5 + rng.uniform();
    ProfilingSample s;
    s.features << 1.0, n, n * mean_in, n * mean_in * mean_in * spread,
        n * (mean_in + rng.uniform() * 4000.0);
    s.normalized_latency = request_qoe<double>(s.features, truth) * (1.0 + noise * rng.normal());
    s.normalized_latency = std::max(s.normalized_latency, 1e-6);
    out.push_back(s);
  }
  return out;
}

Outcome cost_model_fit() {
  QoeParams truth;
  truth.d << 4e-3, 3e-5, 2e-8, 1e-12, 6e-9;
  Rng rng(29);
  const QoeParams clean = fit_params(synthetic_samples(rng, 400, truth, 0.0));
  double worst = 0.0;
  for (int k = 0; k < kNumFeatures; ++k) {
    worst = std::max(worst, std::abs(clean.d(k) - truth.d(k)) / std::abs(truth.d(k)));
  }
  auto noisy = synthetic_samples(rng, 1000, truth, 0.10);
  const std::vector<ProfilingSample> train(noisy.begin(), noisy.begin() + 800);
  const std::vector<ProfilingSample> valid(noisy.begin() + 800, noisy.end());
  const QoeParams fitted = fit_params(train);
  double mean = 0.0;
  for (const auto& s : train) mean += s.normalized_latency;
  mean /= static_cast<double>(train.size());
  const double model = prediction_error(fitted, valid).mean_abs;
  const double constant = constant_predictor_error(mean, valid);
  return {worst < 1e-6 && model < constant,
          "noiseless max rel err " + fmt(worst, 3) + "; noisy validation " + fmt(100 * model, 3) +
              "% vs constant " + fmt(100 * constant, 3) + "%"};
}

// ---- end to end ---------------------------------------------------------------

struct HeavyLoad {
  RunConfig base;
  double saturation = 0.0;
  double rate = 0.0;
  std::vector<TraceRequest> trace;
  QoeParams params;
  SloBaseline baseline;
  std::string sweep;
};

std::vector<TraceRequest> trace_at(const RunConfig& base, double rate) {
  WorkloadSettings w = base.workload;
  w.rate = rate;
  return synthesize_trace(w, base.sim.max_context);
}

// Round-robin throughput plateaus once the pool saturates. The saturation
// point is the lowest swept rate reaching 95% of the best throughput seen.
HeavyLoad find_heavy_load() {
  HeavyLoad h;
  h.base = run_config_from_json("{}");
  h.base.sim.seed = h.base.workload.seed;
  const auto reference = trace_at(h.base, 50.0);
  h.params = calibrate_params(h.base.sim, reference);
  h.baseline = calibrate_slo_baseline(h.base.sim, reference);
  SimConfig rr = h.base.sim;
  rr.policy = Policy::kRoundRobin;
  std::vector<std::pair<double, double>> points;
  for (double rate = 10.0; rate <= 100.0; rate += 5.0) {
    const SimResult res = simulate(rr, trace_at(h.base, rate), h.params, h.baseline);
    points.emplace_back(rate, res.report.throughput);
  }
  double peak = 0.0;
  for (const auto& [rate, tput] : points) peak = std::max(peak, tput);
  for (const auto& [rate, tput] : points) {
    if (tput >= 0.95 * peak) {
      h.saturation = rate;
      break;
    }
  }
  h.rate = 1.5 * h.saturation;
  h.trace = trace_at(h.base, h.rate);
  h.sweep = "saturation " + fmt(h.saturation) + " req/s (peak " + fmt(peak, 6) +
            " tok/s), heavy rate " + fmt(h.rate) + " req/s";
  return h;
}

SimResult run_policy(const HeavyLoad& h, Policy policy) {
  SimConfig cfg = h.base.sim;
  cfg.policy = policy;
  return simulate(cfg, h.trace, h.params, h.baseline);
}

Outcome end_to_end(const HeavyLoad& h, const SimResult& l4, const SimResult& rr,
                   const SimResult& no_pipeline, const SimResult& chain) {
  const double lat = l4.report.normalized_latency.mean;
  const double lat_rr = rr.report.normalized_latency.mean;
  const double latency_gain = 1.0 - lat / lat_rr;
  const double tput_gain = l4.report.throughput / rr.report.throughput - 1.0;
  const bool beats_others = lat < no_pipeline.report.normalized_latency.mean &&
                            lat < chain.report.normalized_latency.mean;
  return {latency_gain >= 0.15 && tput_gain >= 0.10 && beats_others,
          h.sweep + "; vs round-robin latency -" + fmt(100 * latency_gain, 3) +
              "%, throughput +" + fmt(100 * tput_gain, 3) + "%; mean normalized latency l4 " +
              fmt(lat) + " s, no-pipeline " + fmt(no_pipeline.report.normalized_latency.mean) +
              " s, chain " + fmt(chain.report.normalized_latency.mean) + " s"};
}

// Four equal stages of four instances, boundaries held fixed, so that every
// stage has peers to balance against and only the balancing mode varies.
Outcome load_balance(const HeavyLoad& h) {
  double cv[3];
  const BalanceMode modes[3] = {BalanceMode::kFull, BalanceMode::kInterStageOnly,
                                BalanceMode::kRoundRobin};
  for (int i = 0; i < 3; ++i) {
    SimConfig cfg = h.base.sim;
    cfg.policy = Policy::kL4;
    cfg.layout = {Stage{0, 1024, 4}, Stage{1024, 4096, 4}, Stage{4096, 16384, 4},
                  Stage{16384, cfg.max_context, 4}};
    cfg.refine.interval_s = 1e9;
    cfg.balance.mode = modes[i];
    cv[i] = simulate(cfg, h.trace, h.params, h.baseline).report.mean_stage_cv;
  }
  return {cv[0] < cv[1] && cv[1] < cv[2],
          "mean stage CV full " + fmt(cv[0]) + " < inter-stage " + fmt(cv[1]) +
              " < round-robin " + fmt(cv[2])};
}

Outcome slo_monotone(const SimResult& l4, const SimResult& rr) {
  bool ok = true;
  std::string detail;
  double prev_l4 = -1.0, prev_rr = -1.0;
  for (double n : {5.0, 10.0, 20.0}) {
    const double a = l4.report.slo.at(n);
    const double b = rr.report.slo.at(n);
    ok = ok && a >= prev_l4 && b >= prev_rr && a >= b;
    prev_l4 = a;
    prev_rr = b;
    detail += (detail.empty() ? "" : ", ") + std::string("N=") + fmt(n) + " l4 " + fmt(a, 3) +
              " rr " + fmt(b, 3);
  }
  return {ok, detail};
}

// ---- protocol and refiner -----------------------------------------------------

Outcome protocol_properties() {
  const auto select = testing::check_select_receiver(2000, 31);
  int peak = 0;
  const auto queues = testing::check_queue_discipline(2000, 37, &peak);
  int64_t migrations = 0;
  const auto sims = testing::check_forced_migrations(1000, 41, &migrations);
  std::string detail = "select " + std::to_string(select.cases) + ", queue " +
                       std::to_string(queues.cases) + " (peak in flight " +
                       std::to_string(peak) + "), simulations " + std::to_string(sims.cases) +
                       " (" + std::to_string(migrations) + " migrations)";
  for (const auto* r : {&select, &queues, &sims}) {
    if (!r->ok()) detail += "; " + r->first_failure;
  }
  return {select.ok() && queues.ok() && sims.ok() && select.cases >= 1000 &&
              queues.cases >= 1000 && sims.cases >= 1000 && migrations > 0,
          detail};
}

std::vector<RequestShape> random_shapes(Rng& rng, int count, int64_t lo, int64_t hi) {
  std::vector<RequestShape> out;
  for (int i = 0; i < count; ++i) {
    const int64_t len = lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(hi - lo)));
    out.push_back({1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(len))), len});
  }
  return out;
}

Outcome refiner_convergence(const QoeParams& params) {
  Rng rng(43);
  double worst = 0.0;
  int frozen = 0;
  const int streams = 20;
  for (int s = 0; s < streams; ++s) {
    const auto local = random_shapes(rng, 5 + static_cast<int>(rng.below(40)), 10, 4000);
    const std::vector<std::vector<RequestShape>> succ{
        random_shapes(rng, 5 + static_cast<int>(rng.below(40)), 4000, 100000),
        random_shapes(rng, 5 + static_cast<int>(rng.below(40)), 4000, 100000)};
    BoundaryState state;
    state.boundary = 1000.0 + 60000.0 * rng.uniform();
    state.ema_alpha = 0.05 + 0.9 * rng.uniform();
    const double start = state.boundary;
    double raw = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const RefineOutcome out = refine(state, local, succ, params);
      if (k == 1) raw = out.raw;
      state = out.state;
      const double expected = raw + std::pow(1.0 - state.ema_alpha, k) * (start - raw);
      worst = std::max(worst, std::abs(state.boundary - expected));
    }
    // Fewer than five requests in the window: nothing moves.
    const auto few_local = random_shapes(rng, static_cast<int>(rng.below(3)), 10, 4000);
    const std::vector<std::vector<RequestShape>> few_succ{
        random_shapes(rng, static_cast<int>(rng.below(2)), 4000, 100000)};
    BoundaryState held;
    held.boundary = 1000.0 + 60000.0 * rng.uniform();
    const RefineOutcome out = refine(held, few_local, few_succ, params);
    if (!out.applied && out.state.boundary == held.boundary) ++frozen;
  }
  return {worst <= 1e-9 && frozen == streams,
          "max deviation from geometric path " + fmt(worst, 3) + " over " +
              std::to_string(streams) + "x50 steps; frozen " + std::to_string(frozen) + "/" +
              std::to_string(streams)};
}

// ---- determinism ----------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(LSCHED_BINARY) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "lsched_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string sim_args = "simulate --rate 40 --duration 20 --seed 7 --out ";
  const std::string cmp_args =
      "compare --policies l4,round-robin,memory-balanced --seeds 3,4 --rate 40 --duration 20 "
      "--out ";
  bool ok = true;
  int files = 0;
  for (int i = 0; i < 2; ++i) {
    ok = ok && run_cli(sim_args + (root / ("sim" + std::to_string(i))).string()) == 0;
    ok = ok && run_cli(cmp_args + (root / ("cmp" + std::to_string(i))).string()) == 0;
  }
  std::vector<fs::path> rel{"report.json", "events.csv"};
  for (const char* policy : {"l4", "round-robin", "memory-balanced"}) {
    for (int seed : {3, 4}) {
      const std::string dir = std::string(policy) + "-seed" + std::to_string(seed);
      rel.push_back(fs::path(dir) / "report.json");
      rel.push_back(fs::path(dir) / "events.csv");
    }
  }
  for (const auto& r : rel) {
    const bool in_sim = r.parent_path().empty();
    const fs::path a = root / (in_sim ? "sim0" : "cmp0") / r;
    const fs::path b = root / (in_sim ? "sim1" : "cmp1") / r;
    const std::string left = slurp(a);
    ok = ok && fs::exists(a) && !left.empty() && left == slurp(b);
    ++files;
  }
  fs::remove_all(root);
  return {ok, std::to_string(files) + " artifacts byte-identical across reruns"};
}

// ---- driver ---------------------------------------------------------------------

Outcome guarded(const std::function<Outcome()>& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace
}  // namespace lsched

int main() {
  using namespace lsched;
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << name << ": " << o.detail
              << std::endl;
  };

  report(1, "planner optimality", guarded(planner_optimality));

  HeavyLoad heavy;
  bool have_heavy = true;
  std::string heavy_error;
  try {
    heavy = find_heavy_load();
  } catch (const std::exception& e) {
    have_heavy = false;
    heavy_error = std::string("error: ") + e.what();
  }
  report(2, "planner speed", guarded([&] {
           if (!have_heavy) return Outcome{false, heavy_error};
           return planner_speed(heavy.params);
         }));
  report(3, "cost model fit", guarded(cost_model_fit));

  SimResult l4, rr, no_pipeline, chain;
  bool have_runs = have_heavy;
  std::string run_error = heavy_error;
  if (have_heavy) {
    try {
      l4 = run_policy(heavy, Policy::kL4);
      rr = run_policy(heavy, Policy::kRoundRobin);
      no_pipeline = run_policy(heavy, Policy::kNoPipeline);
      chain = run_policy(heavy, Policy::kChain);
    } catch (const std::exception& e) {
      have_runs = false;
      run_error = std::string("error: ") + e.what();
    }
  }
  report(4, "end-to-end gain", guarded([&] {
           if (!have_runs) return Outcome{false, run_error};
           return end_to_end(heavy, l4, rr, no_pipeline, chain);
         }));
  report(5, "load balance", guarded([&] {
           if (!have_heavy) return Outcome{false, heavy_error};
           return load_balance(heavy);
         }));
  report(6, "protocol properties", guarded(protocol_properties));
  report(7, "refiner convergence", guarded([&] {
           if (!have_heavy) return Outcome{false, heavy_error};
           return refiner_convergence(heavy.params);
         }));
  report(8, "SLO monotonicity", guarded([&] {
           if (!have_runs) return Outcome{false, run_error};
           return slo_monotone(l4, rr);
         }));
  report(9, "determinism", guarded(determinism));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << " in " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
            << " s" << std::endl;
  return failures == 0 ? 0 : 1;
}
