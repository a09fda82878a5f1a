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

#include "lsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>

#include "lsched/error.hpp"

namespace lsched {

const char* to_string(Policy policy) {
  switch (policy) {
    case Policy::kL4: return "l4";
    case Policy::kRoundRobin: return "round-robin";
    case Policy::kNoPipeline: return "no-pipeline";
    case Policy::kChain: return "chain";
    case Policy::kMemoryBalanced: return "memory-balanced";
  }
  return "l4";
}

Policy policy_from_string(const std::string& text) {
  if (text == "l4") return Policy::kL4;
  if (text == "round-robin") return Policy::kRoundRobin;
  if (text == "no-pipeline") return Policy::kNoPipeline;
  if (text == "chain") return Policy::kChain;
  if (text == "memory-balanced") return Policy::kMemoryBalanced;
  throw Error(ErrorKind::kConfigError, "unknown policy '" + text + "'");
}

int covering_stage(std::span<const Stage> stages, int64_t len) {
  for (size_t s = 0; s < stages.size(); ++s) {
    if (len >= stages[s].lo && len < stages[s].hi) return static_cast<int>(s);
  }
  throw Error(ErrorKind::kNoCoveringStage,
              "no stage covers length " + std::to_string(len));
}

namespace {

int64_t to_us(double seconds) { return std::llround(seconds * 1e6); }

// Work never takes zero time on the integer clock.
int64_t duration_us(double seconds) {
  return std::max<int64_t>(1, std::llround(seconds * 1e6));
}

bool needs_params(Policy p) {
  return p == Policy::kL4 || p == Policy::kChain || p == Policy::kMemoryBalanced;
}

PipelinePlan single_stage(const SimConfig& config) {
  PipelinePlan plan;
  plan.stages.push_back(Stage{0, config.max_context, config.instances});
  return plan;
}

}  // namespace

std::vector<LengthPair> planner_population(std::span<const TraceRequest> trace,
                                           const PlannerSettings& settings,
                                           uint64_t seed) {
  std::vector<LengthPair> out;
  if (trace.empty() || settings.population <= 0) return out;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  if (!settings.occupancy_weighted) {
    for (int k = 0; k < settings.population; ++k) {
      const TraceRequest& r = trace[rng.below(trace.size())];
      out.push_back(LengthPair{r.input_len, r.output_len});
    }
    return out;
  }
  // A request is resident for as many decode steps as it has output tokens,
  // so a snapshot of the cluster sees it with probability proportional to
  // its output length, at a uniformly random point of its decode.
  std::vector<double> cumulative;
  cumulative.reserve(trace.size());
  double total = 0.0;
  for (const auto& r : trace) {
    total += static_cast<double>(r.output_len);
    cumulative.push_back(total);
  }
  for (int k = 0; k < settings.population; ++k) {
    const double u = rng.uniform() * total;
    size_t idx = static_cast<size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    idx = std::min(idx, trace.size() - 1);
    const TraceRequest& r = trace[idx];
    const int64_t produced =
        1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(r.output_len)));
    out.push_back(LengthPair{r.input_len, produced});
  }
  return out;
}

PipelinePlan initial_layout(const SimConfig& config,
                            std::span<const TraceRequest> trace,
                            const QoeParams& params) {
  if (!config.layout.empty()) {
    PipelinePlan plan;
    plan.stages = config.layout;
    std::string why;
    if (!is_valid_plan(plan, config.instances, &why)) {
      throw Error(ErrorKind::kConfigError, "layout: " + why);
    }
    return plan;
  }
  if (config.policy == Policy::kRoundRobin || config.policy == Policy::kNoPipeline) {
    return single_stage(config);
  }
  PlanInput input;
  input.requests = planner_population(trace, config.planner, config.seed);
  input.instances = config.instances;
  input.bandwidth = config.bandwidth;
  input.kv_bytes_per_token = config.kv_bytes_per_token;
  input.params = params;
  input.max_len = config.max_context;
  if (config.policy == Policy::kChain) {
    return plan_chain(input, bucketize(input.resolved_max_len()));
  }
  return plan(input, PlannerOptions{config.planner.exact_threshold});
}

SloBaseline calibrate_slo_baseline(const SimConfig& config,
                                   std::span<const TraceRequest> trace) {
  std::vector<int64_t> inputs, outputs;
  for (const auto& r : trace) {
    inputs.push_back(r.input_len);
    outputs.push_back(r.output_len);
  }
  auto median = [](std::vector<int64_t> v, int64_t fallback) {
    if (v.empty()) return fallback;
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
  };
  const int64_t input = median(inputs, 512);
  const int64_t output = std::max<int64_t>(2, median(outputs, 128));
  const HardwareOracle& o = config.oracle;
  // Same µs rounding as the simulator's iterations.
  const int64_t first =
      duration_us(o.prefill_time(input) + o.decode_step_time(1, input, input));
  int64_t rest = 0;
  for (int64_t k = 1; k < output; ++k) {
    rest += duration_us(o.decode_step_time(1, input + k, input + k));
  }
  SloBaseline b;
  b.ttft = static_cast<double>(first) * 1e-6;
  b.tpot = static_cast<double>(rest) * 1e-6 / static_cast<double>(output - 1);
  return b;
}

ProfilingData profile_oracle(const SimConfig& config,
                             const EmpiricalLengthSampler& outputs,
                             const ProfilingSettings& settings) {
  ProfilingData data;
  const HardwareOracle& o = config.oracle;
  Rng rng(settings.seed);
  int64_t max_output = 1;
  for (const auto& p : outputs.pool()) max_output = std::max(max_output, p.output_len);

  struct Live {
    int64_t input = 0;
    int64_t output = 0;
    int64_t generated = 0;
    double arrival = 0.0;
    Eigen::Matrix<double, 5, 1> start_sums;
  };

  for (int64_t lo : settings.input_buckets) {
    for (int requested : settings.batch_sizes) {
      const int64_t per_request = 2 * lo + max_output;
      const int batch = static_cast<int>(std::min<int64_t>(
          requested, std::max<int64_t>(1, config.kv_capacity_tokens / per_request)));
      double now = 0.0;
      // Running sums over iterations of (1, n, sum I, sum I^2, sum L).
      Eigen::Matrix<double, 5, 1> sums = Eigen::Matrix<double, 5, 1>::Zero();
      std::vector<Live> live;
      std::vector<Live> fresh;
      int completed = 0;
      auto inject = [&]() {
        Live l;
        l.input = lo + static_cast<int64_t>(rng.below(static_cast<uint64_t>(lo)));
        l.output = outputs.sample(rng).output_len;
        l.arrival = now;
        fresh.push_back(l);
      };
      for (int k = 0; k < batch; ++k) inject();
      while (completed < settings.completions_per_run) {
        double prefill = 0.0;
        for (auto& l : fresh) {
          const double t = o.prefill_time(l.input);
          data.prefill.push_back(PrefillTiming{l.input, t});
          prefill += t;
          l.start_sums = sums;
          live.push_back(l);
        }
        fresh.clear();
        std::vector<int64_t> lens;
        BatchFeatures f;
        for (const auto& l : live) {
          lens.push_back(l.input + l.generated);
          f.add(RequestShape{l.input, l.input + l.generated});
        }
        const double decode = o.decode_step_time(lens);
        data.decode.push_back(DecodeTiming{f.count, f.seq_sum, decode});
        now += prefill + decode;
        sums += f.vector<double>();
        std::vector<Live> next;
        for (auto& l : live) {
          ++l.generated;
          if (l.generated < l.output) {
            next.push_back(l);
            continue;
          }
          const Eigen::Matrix<double, 5, 1> span = sums - l.start_sums;
          ProfilingSample s;
          // span(0) counts the iterations the request took part in.
          s.features = span / span(0);
          s.normalized_latency = (now - l.arrival) / static_cast<double>(l.output);
          data.samples.push_back(s);
          ++completed;
          inject();
        }
        live = std::move(next);
      }
    }
  }
  return data;
}

QoeParams calibrate_params(const SimConfig& config,
                           std::span<const TraceRequest> trace) {
  std::vector<LengthPair> pool;
  for (const auto& r : trace) pool.push_back(LengthPair{r.input_len, r.output_len});
  if (pool.empty()) pool.push_back(LengthPair{512, 128});
  const ProfilingData data = profile_oracle(config, EmpiricalLengthSampler(pool));
  return fit_params(data.samples);
}

namespace {

enum class EvType : uint8_t {
  kArrival,
  kIterationDone,
  kHeartbeat,
  kBalanceTick,
  kRefineTick,
  kMessage,
  kBidDeadline,
  kRoundDone,
  kTally,
};

enum class MsgType : uint8_t {
  kAsk,
  kBid,
  kConfirm,
  kConfirmAck,
  kStaleConfirm,
  kStarvation,
  kCancel,
  kLoadReport,
  kBoundary,
};

struct Event {
  int64_t time = 0;
  uint64_t seq = 0;
  EvType type = EvType::kArrival;
  int target = -1;
  int64_t request = -1;
  uint64_t token = 0;  // message slot or transfer generation
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    return a.seq > b.seq;
  }
};

struct Message {
  MsgType type = MsgType::kAsk;
  int from = -1;
  int to = -1;
  int64_t request = -1;
  AskMsg ask;
  BidMsg bid;
  int64_t priority = 0;
  int64_t seq_len = 0;
};

enum class Phase : uint8_t { kPending, kWaiting, kActive, kDone, kRejected };

struct Req {
  TraceRequest trace;
  int64_t seq_len = 0;
  int64_t generated = 0;
  int64_t tokens_on_owner = 0;
  int64_t admit_order = 0;
  int owner = -1;
  Phase phase = Phase::kPending;
  bool paused = false;
  bool has_offer = false;
};

enum class OfferState : uint8_t {
  kPending,
  kAsking,
  kConfirming,
  kConfirmed,
  kTransferring,
};

struct Offer {
  int64_t request = -1;
  bool handover = true;
  int target_stage = 0;
  OfferState state = OfferState::kPending;
  int receiver = -1;
  int64_t next_try_us = 0;
};

struct LoadSnapshot {
  int64_t load = 0;
  int64_t resident = 0;  // KV held or reserved, without the waiting queue
  std::vector<RequestShape> shapes;
};

struct Instance {
  int id = 0;
  int stage = 0;
  std::deque<int64_t> waiting;
  int64_t waiting_tokens = 0;
  std::vector<int64_t> active;
  int64_t kv_used = 0;
  int64_t reserved = 0;
  bool busy = false;
  std::vector<int64_t> batch;
  int64_t iteration_us = 0;
  double throughput = 0.0;
  std::deque<std::pair<int64_t, int64_t>> recent;  // (tokens, µs)
  int64_t tokens = 0;

  std::vector<Offer> offers;
  BidCollector collector;
  int64_t outgoing = -1;
  int64_t incoming = -1;
  std::deque<std::pair<int64_t, int>> obligations;  // starved (request, receiver)
  ReceiverQueue tickets;
  bool pump_dirty = false;
  uint64_t pumped_epoch = 0;
};

struct Transfer {
  int64_t request = -1;
  int src = -1;
  int dst = -1;
  LiveMigration mig;
  uint64_t generation = 0;
};

constexpr int64_t kGrowthMarginPerRound = 32;

class Simulator {
 public:
  Simulator(const SimConfig& config, std::span<const TraceRequest> trace,
            const QoeParams& params, PipelinePlan layout,
            const SloBaseline& baseline)
      : cfg_(config),
        params_(params),
        plan_(std::move(layout)),
        baseline_(baseline),
        gate_(config.balance.max_concurrent_transfers),
        jitter_rng_(config.seed * 0x2545f4914f6cdd1dULL + 0x5851f42d4c957f2dULL) {
    reqs_.reserve(trace.size());
    for (const auto& t : trace) {
      Req r;
      r.trace = t;
      r.seq_len = t.input_len;
      reqs_.push_back(r);
      span_end_us_ = std::max(span_end_us_, to_us(t.arrival_s));
    }
    const int stages = static_cast<int>(plan_.stages.size());
    bounds_.push_back(plan_.stages.front().lo);
    for (const auto& s : plan_.stages) bounds_.push_back(s.hi);
    // The top edge is inclusive.
    bounds_.back() += 1;
    members_.resize(static_cast<size_t>(stages));
    int next = 0;
    for (int s = 0; s < stages; ++s) {
      for (int k = 0; k < plan_.stages[s].instance_count; ++k) {
        Instance in;
        in.id = next;
        in.stage = s;
        in.tickets = ReceiverQueue(cfg_.balance.starvation_threshold);
        inst_.push_back(std::move(in));
        members_[s].push_back(next++);
      }
    }
    rr_arrival_.assign(static_cast<size_t>(stages), 0);
    rr_migration_.assign(static_cast<size_t>(stages), 0);
    reported_.resize(inst_.size());
    pending_report_.resize(inst_.size());
    for (int s = 0; s + 1 < stages; ++s) {
      BoundaryState b;
      b.boundary = static_cast<double>(bounds_[s + 1]);
      b.ema_alpha = cfg_.refine.ema_alpha;
      b.min_traffic = cfg_.refine.min_traffic;
      boundary_state_.push_back(b);
    }
    mode_ = cfg_.policy == Policy::kRoundRobin ? BalanceMode::kRoundRobin
                                               : cfg_.balance.mode;
    migration_on_ = cfg_.policy != Policy::kRoundRobin;
    intra_on_ = migration_on_ && mode_ == BalanceMode::kFull;
    refine_on_ = stages > 1 && (cfg_.policy == Policy::kL4 ||
                                cfg_.policy == Policy::kChain ||
                                cfg_.policy == Policy::kMemoryBalanced);
    refine_policy_ = cfg_.policy == Policy::kMemoryBalanced ? RefinePolicy::kMemory
                                                            : RefinePolicy::kQoe;
    heartbeat_us_ = duration_us(cfg_.heartbeat_s);
    latency_us_ = std::max<int64_t>(0, to_us(cfg_.message_latency_s));
    jitter_us_ = std::max<int64_t>(0, to_us(cfg_.message_jitter_s));
    bid_wait_us_ = std::max(heartbeat_us_, 2 * (latency_us_ + jitter_us_) + 1);
    capacity_ = cfg_.kv_capacity_tokens;
    admit_limit_ = static_cast<int64_t>(
        std::floor(static_cast<double>(capacity_) * (1.0 - cfg_.admission_watermark)));
    growth_margin_ = kGrowthMarginPerRound * cfg_.balance.migration_rounds;
    const double span_s = static_cast<double>(span_end_us_) * 1e-6;
    horizon_us_ = cfg_.horizon_s > 0.0 ? to_us(cfg_.horizon_s)
                                       : to_us(span_s * 20.0 + 600.0);
  }

  SimResult run() {
    log_header();
    for (size_t i = 0; i < reqs_.size(); ++i) {
      push(to_us(reqs_[i].trace.arrival_s), EvType::kArrival, -1,
           static_cast<int64_t>(i));
    }
    if (!reqs_.empty()) {
      push(heartbeat_us_, EvType::kHeartbeat, -1, -1);
      push(duration_us(cfg_.balance.interval_s), EvType::kBalanceTick, -1, -1);
      if (refine_on_) push(duration_us(cfg_.refine.interval_s), EvType::kRefineTick, -1, -1);
      push(window_start_us(), EvType::kTally, -1, -1);
      push(span_end_us_, EvType::kTally, -1, -1);
    }
    while (!queue_.empty() && finished_ < static_cast<int64_t>(reqs_.size())) {
      const Event ev = queue_.top();
      queue_.pop();
      if (ev.time > horizon_us_) break;
      now_ = ev.time;
      dispatch(ev);
      ++counters_.events;
      if (cfg_.check_invariants) check_invariants();
    }
    counters_.drained = finished_ == static_cast<int64_t>(reqs_.size());
    for (size_t i = 0; i < reqs_.size(); ++i) {
      const Req& r = reqs_[i];
      if ((r.phase == Phase::kWaiting || r.phase == Phase::kActive) &&
          r.tokens_on_owner > 0) {
        log_.add(now_, "inflight", r.owner, -1, r.trace.id,
                 Detail().add("tokens", r.tokens_on_owner).str());
      }
    }
    counters_.peak_transfers = gate_.peak();

    SimResult result;
    result.report = compute_report(log_);
    result.events = std::move(log_);
    result.plan = plan_;
    result.params = params_;
    result.counters = counters_;
    result.final_boundaries = bounds_;
    return result;
  }

 private:
  // ---- scheduling primitives -------------------------------------------

  void push(int64_t time, EvType type, int target, int64_t request,
            uint64_t token = 0) {
    queue_.push(Event{time, next_seq_++, type, target, request, token});
  }

  void send(Message msg) {
    size_t slot;
    if (!free_slots_.empty()) {
      slot = free_slots_.back();
      free_slots_.pop_back();
      messages_[slot] = std::move(msg);
    } else {
      slot = messages_.size();
      messages_.push_back(std::move(msg));
    }
    int64_t delay = latency_us_;
    if (jitter_us_ > 0) {
      delay += static_cast<int64_t>(jitter_rng_.below(static_cast<uint64_t>(jitter_us_) + 1));
    }
    push(now_ + delay, EvType::kMessage, messages_[slot].to,
         messages_[slot].request, slot);
  }

  void dispatch(const Event& ev) {
    switch (ev.type) {
      case EvType::kArrival: on_arrival(ev.request); break;
      case EvType::kIterationDone: on_iteration_done(ev.target); break;
      case EvType::kHeartbeat: on_heartbeat(); break;
      case EvType::kBalanceTick: on_balance_tick(); break;
      case EvType::kRefineTick: on_refine_tick(); break;
      case EvType::kMessage: {
        Message msg = std::move(messages_[ev.token]);
        free_slots_.push_back(ev.token);
        on_message(msg);
        break;
      }
      case EvType::kBidDeadline: on_bid_deadline(ev.target, ev.request); break;
      case EvType::kRoundDone: on_round_done(ev.request, ev.token); break;
      case EvType::kTally: on_tally(); break;
    }
  }

  // ---- logging -----------------------------------------------------------

  int64_t window_start_us() const {
    return to_us(cfg_.metrics.warmup_fraction * static_cast<double>(span_end_us_) * 1e-6);
  }

  // Cumulative tokens per instance, logged at both edges of the window.
  void on_tally() {
    for (const auto& in : inst_) {
      log_.add(now_, "tally", in.id, -1, -1, Detail().add("tokens", in.tokens).str());
    }
  }

  void log_header() {
    const int64_t warm = window_start_us();
    std::string scales;
    for (double s : cfg_.metrics.slo_scales) {
      if (!scales.empty()) scales += '|';
      scales += format_real(s);
    }
    log_.add(0, "run", -1, -1, -1,
             Detail()
                 .add("policy", to_string(cfg_.policy))
                 .add("seed", static_cast<int64_t>(cfg_.seed))
                 .add("mode", to_string(mode_))
                 .add("window_start_us", warm)
                 .add("window_end_us", span_end_us_)
                 .add_real("ttft0", baseline_.ttft)
                 .add_real("tpot0", baseline_.tpot)
                 .add("slo", scales)
                 .str());
    const HardwareOracle& o = cfg_.oracle;
    log_.add(0, "oracle", -1, -1, -1,
             Detail()
                 .add_real("a0", o.a0).add_real("a1", o.a1).add_real("a2", o.a2)
                 .add_real("b0", o.b0).add_real("b1", o.b1).add_real("b2", o.b2)
                 .add_real("gamma", o.gamma).add_real("cap", o.penalty_cap)
                 .str());
    std::string stages;
    for (const auto& s : plan_.stages) {
      if (!stages.empty()) stages += '|';
      stages += std::to_string(s.lo) + ':' + std::to_string(s.hi) + ':' +
                std::to_string(s.instance_count);
    }
    log_.add(0, "plan", -1, -1, -1,
             Detail()
                 .add("stages", stages)
                 .add_real("quality", plan_.predicted_quality)
                 .str());
    for (const auto& in : inst_) {
      log_.add(0, "instance", in.id, -1, -1, Detail().add("stage", in.stage).str());
    }
  }

  // ---- instance accounting ----------------------------------------------

  int64_t load(const Instance& in) const {
    return resident(in) + in.waiting_tokens;
  }

  int64_t resident(const Instance& in) const { return in.kv_used + in.reserved; }

  // Free KV tokens, keeping room for one token per sequence of an iteration
  // already in flight.
  int64_t free_kv(const Instance& in) const {
    const int64_t growth = in.busy ? static_cast<int64_t>(in.batch.size()) : 0;
    return capacity_ - in.kv_used - in.reserved - growth;
  }

  int stage_for(int64_t len) const {
    const int stages = static_cast<int>(bounds_.size()) - 1;
    for (int s = 0; s < stages; ++s) {
      if (len >= bounds_[s] && len < bounds_[s + 1]) return s;
    }
    return -1;
  }

  Offer* find_offer(int owner, int64_t request) {
    for (auto& o : inst_[owner].offers) {
      if (o.request == request) return &o;
    }
    return nullptr;
  }

  void erase_offer(int owner, int64_t request) {
    auto& offers = inst_[owner].offers;
    std::erase_if(offers, [&](const Offer& o) { return o.request == request; });
    reqs_[request].has_offer = false;
  }

  // ---- arrivals and iterations -----------------------------------------

  void reject(int64_t id, const char* reason) {
    Req& r = reqs_[id];
    r.phase = Phase::kRejected;
    ++finished_;
    log_.add(now_, "reject", -1, -1, r.trace.id, Detail().add("reason", reason).str());
  }

  int dispatch_target(int stage) {
    const auto& members = members_[stage];
    // Only full balancing negotiates entry; the other modes rotate.
    if (mode_ != BalanceMode::kFull) {
      return members[rr_arrival_[stage]++ % members.size()];
    }
    std::vector<BidMsg> bids;
    for (int m : members) {
      const Instance& in = inst_[m];
      BidMsg b;
      b.receiver_id = m;
      b.load = load(in);
      const int64_t queued = in.waiting_tokens + in.tickets.buffered_tokens();
      b.earliest_start =
          queued == 0 ? 0.0
                      : static_cast<double>(queued) / std::max(in.throughput, 1.0);
      bids.push_back(b);
    }
    // Every stage member answers the router at the same instant, so equal
    // starts and replies fall back to the least-loaded member.
    return select_receiver(bids, TieBreak::kLoad);
  }

  void on_arrival(int64_t id) {
    Req& r = reqs_[id];
    log_.add(now_, "arrive", -1, -1, r.trace.id,
             Detail()
                 .add("input", r.trace.input_len)
                 .add("output", r.trace.output_len)
                 .str());
    const int stage = stage_for(r.trace.input_len);
    if (stage < 0 || r.trace.input_len > capacity_) {
      reject(id, stage < 0 ? "no_covering_stage" : "kv_capacity");
      return;
    }
    const int target = dispatch_target(stage);
    log_.add(now_, "route", -1, target, r.trace.id);
    Instance& in = inst_[target];
    r.owner = target;
    r.phase = Phase::kWaiting;
    in.waiting.push_back(id);
    in.waiting_tokens += r.seq_len;
    start_iteration(target);
  }

  void preempt(Instance& in, int64_t id) {
    Req& r = reqs_[id];
    std::erase(in.active, id);
    in.kv_used -= r.seq_len;
    if (r.has_offer) drop_offer(id, "preempted");
    r.phase = Phase::kWaiting;
    in.waiting.push_front(id);
    in.waiting_tokens += r.seq_len;
    ++counters_.preemptions;
    log_.add(now_, "preempt", in.id, -1, r.trace.id,
             Detail().add("seq", r.seq_len).str());
  }

  void start_iteration(int i) {
    Instance& in = inst_[i];
    if (in.busy) return;
    std::vector<std::pair<int64_t, int64_t>> prefill;  // (request, tokens)
    while (!in.waiting.empty() &&
           static_cast<int>(in.active.size()) < cfg_.batch_cap) {
      const int64_t id = in.waiting.front();
      Req& r = reqs_[id];
      const int64_t need = r.seq_len;
      const int64_t after = in.kv_used + in.reserved + need;
      const bool alone = in.active.empty() && after <= capacity_;
      if (after > admit_limit_ && !alone) break;
      in.waiting.pop_front();
      in.waiting_tokens -= need;
      r.phase = Phase::kActive;
      r.admit_order = ++admit_seq_;
      in.active.push_back(id);
      in.kv_used += need;
      prefill.emplace_back(id, need);
    }
    std::vector<int64_t> batch;
    for (int64_t id : in.active) {
      if (!reqs_[id].paused) batch.push_back(id);
    }
    while (!batch.empty() &&
           in.kv_used + in.reserved + static_cast<int64_t>(batch.size()) > capacity_) {
      int64_t victim = -1;
      for (int64_t id : batch) {
        if (transfers_.count(id)) continue;
        if (victim < 0 || reqs_[id].admit_order > reqs_[victim].admit_order) victim = id;
      }
      if (victim < 0) break;
      preempt(in, victim);
      std::erase(batch, victim);
      std::erase_if(prefill, [&](const auto& p) { return p.first == victim; });
    }
    if (prefill.empty() && batch.empty()) return;
    double seconds = 0.0;
    for (const auto& p : prefill) seconds += cfg_.oracle.prefill_time(p.second);
    std::vector<int64_t> lens;
    lens.reserve(batch.size());
    for (int64_t id : batch) lens.push_back(reqs_[id].seq_len);
    seconds += cfg_.oracle.decode_step_time(lens);
    in.busy = true;
    in.batch = std::move(batch);
    in.iteration_us = duration_us(seconds);
    push(now_ + in.iteration_us, EvType::kIterationDone, i, -1);
  }

  void on_iteration_done(int i) {
    Instance& in = inst_[i];
    in.busy = false;
    int64_t produced = 0;
    const std::vector<int64_t> batch = std::move(in.batch);
    in.batch.clear();
    for (int64_t id : batch) {
      Req& r = reqs_[id];
      // Requests that moved away or entered a stop round mid-iteration lose
      // this step's token.
      if (r.owner != i || r.phase != Phase::kActive || r.paused) continue;
      ++r.seq_len;
      ++r.generated;
      ++r.tokens_on_owner;
      ++in.kv_used;
      ++in.tokens;
      ++produced;
      if (r.generated == 1) log_.add(now_, "first_token", i, -1, r.trace.id);
      if (r.generated >= r.trace.output_len) {
        complete(in, id);
        continue;
      }
      maybe_handover(id);
    }
    in.recent.emplace_back(produced, in.iteration_us);
    if (in.recent.size() > 10) in.recent.pop_front();
    int64_t tok = 0, us = 0;
    for (const auto& [t, d] : in.recent) {
      tok += t;
      us += d;
    }
    const double rate = static_cast<double>(tok) / (static_cast<double>(us) * 1e-6);
    in.throughput = in.throughput == 0.0 ? rate : 0.3 * rate + 0.7 * in.throughput;
    start_iteration(i);
  }

  void complete(Instance& in, int64_t id) {
    Req& r = reqs_[id];
    std::erase(in.active, id);
    in.kv_used -= r.seq_len;
    r.phase = Phase::kDone;
    ++finished_;
    log_.add(now_, "complete", in.id, -1, r.trace.id,
             Detail().add("tokens", r.tokens_on_owner).str());
    if (r.has_offer) drop_offer(id, "completed");
  }

  void maybe_handover(int64_t id) {
    Req& r = reqs_[id];
    if (!migration_on_ || r.has_offer) return;
    const int stage = inst_[r.owner].stage;
    if (stage + 1 >= static_cast<int>(members_.size())) return;
    if (r.seq_len < bounds_[stage + 1]) return;
    int target = stage_for(r.seq_len);
    if (target < 0) target = static_cast<int>(members_.size()) - 1;
    add_offer(r.owner, id, true, target);
  }

  void add_offer(int owner, int64_t id, bool handover, int target_stage) {
    Offer o;
    o.request = id;
    o.handover = handover;
    o.target_stage = target_stage;
    o.next_try_us = now_;
    inst_[owner].offers.push_back(o);
    reqs_[id].has_offer = true;
    log_.add(now_, "offer", owner, -1, reqs_[id].trace.id,
             Detail()
                 .add("kind", handover ? "handover" : "intra")
                 .add("stage", target_stage)
                 .add("seq", reqs_[id].seq_len)
                 .str());
  }

  // The owner gives up an offer because the request finished or was
  // preempted; any receiver holding space for it is released.
  void drop_offer(int64_t id, const char* reason) {
    Req& r = reqs_[id];
    const int owner = r.owner;
    Offer* o = find_offer(owner, id);
    if (o == nullptr) {
      r.has_offer = false;
      return;
    }
    Instance& src = inst_[owner];
    if (o->state == OfferState::kConfirmed) {
      Message m;
      m.type = MsgType::kCancel;
      m.from = owner;
      m.to = o->receiver;
      m.request = id;
      send(m);
      std::erase_if(src.obligations, [&](const auto& p) { return p.first == id; });
    } else if (o->state == OfferState::kTransferring) {
      auto it = transfers_.find(id);
      if (it != transfers_.end()) {
        Instance& dst = inst_[it->second.dst];
        if (auto t = dst.tickets.take(id)) dst.reserved -= t->reserved;
        dst.pump_dirty = true;
        end_transfer(it->second);
        r.paused = false;
        ++counters_.transfers_aborted;
        log_.add(now_, "transfer_abort", owner, dst.id, r.trace.id,
                 Detail().add("reason", reason).str());
      }
    }
    erase_offer(owner, id);
  }

  // ---- periodic work ----------------------------------------------------

  void on_heartbeat() {
    for (auto& in : inst_) {
      serve_obligations(in.id);
      if (!in.collector.active()) try_ask(in.id);
      pump(in.id);
    }
    push(now_ + heartbeat_us_, EvType::kHeartbeat, -1, -1);
  }

  void on_balance_tick() {
    for (auto& in : inst_) {
      LoadSnapshot snap;
      snap.load = load(in);
      snap.resident = resident(in);
      for (int64_t id : in.active) {
        snap.shapes.push_back(RequestShape{reqs_[id].trace.input_len, reqs_[id].seq_len});
      }
      pending_report_[in.id] = std::move(snap);
      Message m;
      m.type = MsgType::kLoadReport;
      m.from = in.id;
      send(m);
    }
    if (intra_on_) {
      for (auto& in : inst_) check_overload(in.id);
    }
    push(now_ + duration_us(cfg_.balance.interval_s), EvType::kBalanceTick, -1, -1);
  }

  void check_overload(int i) {
    Instance& in = inst_[i];
    const auto& members = members_[in.stage];
    if (members.size() < 2) return;
    for (const auto& o : in.offers) {
      if (!o.handover) return;
    }
    std::vector<int64_t> loads;
    // Migrating active requests moves resident memory only, so the overload
    // test compares that part of the load.
    for (int m : members) loads.push_back(m == i ? resident(in) : reported_[m].resident);
    const int64_t mine = resident(in);
    if (!detect_overload(mine, loads, cfg_.balance.overload_factor)) return;
    double mean = 0.0;
    for (int64_t l : loads) mean += static_cast<double>(l);
    mean /= static_cast<double>(loads.size());
    double excess = static_cast<double>(mine) - mean;
    std::vector<int64_t> candidates;
    for (int64_t id : in.active) {
      if (!reqs_[id].paused && !reqs_[id].has_offer) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end(), [&](int64_t a, int64_t b) {
      if (reqs_[a].seq_len != reqs_[b].seq_len) return reqs_[a].seq_len > reqs_[b].seq_len;
      return a < b;
    });
    for (int64_t id : candidates) {
      const double len = static_cast<double>(reqs_[id].seq_len);
      if (len > excess) continue;
      add_offer(i, id, false, in.stage);
      excess -= len;
    }
  }

  void on_refine_tick() {
    std::vector<int64_t> work = bounds_;
    bool changed = false;
    for (size_t k = 0; k < boundary_state_.size(); ++k) {
      const Instance& leader = inst_[members_[k].front()];
      std::vector<RequestShape> local;
      for (int64_t id : leader.active) {
        local.push_back(RequestShape{reqs_[id].trace.input_len, reqs_[id].seq_len});
      }
      std::vector<std::vector<RequestShape>> successors;
      for (int m : members_[k + 1]) successors.push_back(reported_[m].shapes);
      const RefineOutcome out =
          refine(boundary_state_[k], local, successors, params_, refine_policy_);
      if (!out.applied) continue;
      const int64_t lo = work[k] + 1;
      const int64_t hi = work[k + 2] - 1;
      if (lo > hi) continue;
      const int64_t wanted = std::llround(out.state.boundary);
      const int64_t applied = std::clamp(wanted, lo, hi);
      if (applied != wanted) ++counters_.boundary_clamps;
      boundary_state_[k].boundary = static_cast<double>(applied);
      ++counters_.refines;
      if (work[k + 1] != applied) changed = true;
      work[k + 1] = applied;
      log_.add(now_, "refine", leader.id, -1, -1,
               Detail()
                   .add("stage", static_cast<int64_t>(k))
                   .add_real("raw", out.raw)
                   .add("boundary", applied)
                   .str());
    }
    if (changed) {
      pending_bounds_ = work;
      Message m;
      m.type = MsgType::kBoundary;
      m.from = members_.front().front();
      send(m);
    }
    push(now_ + duration_us(cfg_.refine.interval_s), EvType::kRefineTick, -1, -1);
  }

  // ---- bid-ask protocol -------------------------------------------------

  int64_t sender_load(const Instance& in) const {
    int64_t total = 0;
    for (const auto& o : in.offers) total += reqs_[o.request].seq_len;
    return total;
  }

  std::vector<int> candidates_for(const Offer& o, int self) const {
    std::vector<int> out;
    for (int m : members_[o.target_stage]) {
      if (m != self) out.push_back(m);
    }
    return out;
  }

  void send_confirm(int from, int to, int64_t id, int64_t priority) {
    Message m;
    m.type = MsgType::kConfirm;
    m.from = from;
    m.to = to;
    m.request = id;
    m.priority = priority;
    m.seq_len = reqs_[id].seq_len;
    send(m);
  }

  void try_ask(int i) {
    Instance& in = inst_[i];
    for (auto& o : in.offers) {
      if (o.state != OfferState::kPending || o.next_try_us > now_) continue;
      const std::vector<int> candidates = candidates_for(o, i);
      if (candidates.empty()) continue;
      const Req& r = reqs_[o.request];
      if (r.paused) continue;
      ++counters_.asks;
      if (mode_ == BalanceMode::kRoundRobin) {
        const int w = candidates[rr_migration_[o.target_stage]++ % candidates.size()];
        o.state = OfferState::kConfirming;
        o.receiver = w;
        send_confirm(i, w, o.request, sender_load(in));
        return;
      }
      AskMsg ask;
      ask.sender_id = i;
      ask.request_id = o.request;
      ask.sender_load = sender_load(in);
      ask.seq_len = r.seq_len;
      in.collector.reset(ask, static_cast<double>(now_ + bid_wait_us_) * 1e-6);
      o.state = OfferState::kAsking;
      for (int c : candidates) {
        Message m;
        m.type = MsgType::kAsk;
        m.from = i;
        m.to = c;
        m.request = o.request;
        m.ask = ask;
        send(m);
      }
      log_.add(now_, "ask", i, -1, r.trace.id,
               Detail().add("seq", r.seq_len).add("load", ask.sender_load).str());
      push(now_ + bid_wait_us_, EvType::kBidDeadline, i, o.request);
      return;
    }
  }

  void on_bid_deadline(int i, int64_t id) {
    Instance& in = inst_[i];
    if (!in.collector.active() || in.collector.ask().request_id != id) return;
    Offer* o = find_offer(i, id);
    if (o == nullptr || o->state != OfferState::kAsking) {
      in.collector.close();
      return;
    }
    const std::optional<int> w = in.collector.winner();
    if (!w) {
      o->state = OfferState::kPending;
      o->next_try_us = now_ + duration_us(cfg_.balance.retry_s);
      in.collector.close();
      ++counters_.bid_timeouts;
      log_.add(now_, "bid_timeout", i, -1, reqs_[id].trace.id);
      return;
    }
    o->state = OfferState::kConfirming;
    o->receiver = *w;
    send_confirm(i, *w, id, in.collector.ask().sender_load);
  }

  void on_message(const Message& msg) {
    switch (msg.type) {
      case MsgType::kAsk: on_ask(msg); break;
      case MsgType::kBid: {
        Instance& in = inst_[msg.to];
        if (in.collector.active() && in.collector.ask().request_id == msg.request) {
          in.collector.add(msg.bid);
        }
        break;
      }
      case MsgType::kConfirm: on_confirm(msg); break;
      case MsgType::kConfirmAck: on_confirm_ack(msg); break;
      case MsgType::kStaleConfirm: on_stale(msg); break;
      case MsgType::kStarvation:
        inst_[msg.to].obligations.emplace_back(msg.request, msg.from);
        break;
      case MsgType::kCancel: {
        Instance& in = inst_[msg.to];
        if (auto t = in.tickets.take(msg.request)) {
          in.reserved -= t->reserved;
          in.pump_dirty = true;
          log_.add(now_, "cancel", msg.from, msg.to, reqs_[msg.request].trace.id);
        }
        break;
      }
      case MsgType::kLoadReport:
        reported_[msg.from] = std::move(pending_report_[msg.from]);
        break;
      case MsgType::kBoundary:
        bounds_ = pending_bounds_;
        break;
    }
  }

  void on_ask(const Message& msg) {
    const Instance& in = inst_[msg.to];
    const int64_t buffered = in.waiting_tokens + in.tickets.buffered_tokens();
    const std::optional<BidMsg> bid =
        handle_ask(msg.ask, in.id, load(in), free_kv(in), growth_margin_, buffered,
                   in.throughput, static_cast<double>(now_) * 1e-6);
    if (!bid) return;
    Message m;
    m.type = MsgType::kBid;
    m.from = in.id;
    m.to = msg.from;
    m.request = msg.request;
    m.bid = *bid;
    send(m);
  }

  void on_confirm(const Message& msg) {
    Instance& in = inst_[msg.to];
    const Req& r = reqs_[msg.request];
    const int64_t need = msg.seq_len + growth_margin_;
    Message reply;
    reply.from = in.id;
    reply.to = msg.from;
    reply.request = msg.request;
    if (r.phase == Phase::kActive && r.owner == msg.from && free_kv(in) >= need) {
      MigrationTicket t;
      t.request_id = msg.request;
      t.priority = msg.priority;
      t.source_id = msg.from;
      t.seq_len = msg.seq_len;
      t.reserved = need;
      in.reserved += need;
      in.tickets.enqueue(t);
      in.pump_dirty = true;
      reply.type = MsgType::kConfirmAck;
      log_.add(now_, "confirm", msg.from, in.id, r.trace.id,
               Detail().add("priority", msg.priority).add("reserved", need).str());
    } else {
      reply.type = MsgType::kStaleConfirm;
    }
    send(reply);
  }

  void on_confirm_ack(const Message& msg) {
    Instance& in = inst_[msg.to];
    Offer* o = find_offer(msg.to, msg.request);
    if (o == nullptr || o->state != OfferState::kConfirming || o->receiver != msg.from) {
      Message cancel;
      cancel.type = MsgType::kCancel;
      cancel.from = msg.to;
      cancel.to = msg.from;
      cancel.request = msg.request;
      send(cancel);
      return;
    }
    o->state = OfferState::kConfirmed;
    if (in.collector.active() && in.collector.ask().request_id == msg.request) {
      in.collector.close();
    }
  }

  void on_stale(const Message& msg) {
    Instance& in = inst_[msg.to];
    ++counters_.stale_confirms;
    log_.add(now_, "stale_confirm", msg.to, msg.from, reqs_[msg.request].trace.id);
    Offer* o = find_offer(msg.to, msg.request);
    if (o == nullptr || o->state != OfferState::kConfirming || o->receiver != msg.from) {
      return;
    }
    if (in.collector.active() && in.collector.ask().request_id == msg.request) {
      in.collector.discard(msg.from);
      if (const std::optional<int> w = in.collector.winner()) {
        o->receiver = *w;
        send_confirm(msg.to, *w, msg.request, in.collector.ask().sender_load);
        return;
      }
      in.collector.close();
    }
    o->state = OfferState::kPending;
    o->next_try_us = now_ + duration_us(cfg_.balance.retry_s);
  }

  // ---- transfers ----------------------------------------------------------

  bool source_busy(int src) const {
    return inst_[src].outgoing >= 0 || !inst_[src].obligations.empty();
  }

  void pump(int i) {
    Instance& in = inst_[i];
    if (in.incoming >= 0 || in.tickets.empty()) return;
    if (!in.pump_dirty && in.pumped_epoch == epoch_) return;
    in.pump_dirty = false;
    in.pumped_epoch = epoch_;
    const PumpResult res = in.tickets.pump(
        [&](int src) { return source_busy(src); }, [&] { return gate_.available(); });
    for (const MigrationTicket* t : in.tickets.ordered()) {
      counters_.max_failed_attempts =
          std::max(counters_.max_failed_attempts, t->failed_attempts);
    }
    if (res.kind == PumpResult::Kind::kStart) {
      if (!start_transfer(res.request_id, res.source_id, i)) {
        if (auto t = in.tickets.take(res.request_id)) in.reserved -= t->reserved;
        in.pump_dirty = true;
      }
    } else if (res.kind == PumpResult::Kind::kStarvation) {
      ++counters_.starvation_notices;
      log_.add(now_, "starvation", res.source_id, i, reqs_[res.request_id].trace.id);
      Message m;
      m.type = MsgType::kStarvation;
      m.from = i;
      m.to = res.source_id;
      m.request = res.request_id;
      send(m);
    }
  }

  void serve_obligations(int i) {
    Instance& in = inst_[i];
    while (in.outgoing < 0 && !in.obligations.empty() && gate_.available()) {
      const auto [id, dst] = in.obligations.front();
      if (inst_[dst].incoming >= 0) return;
      in.obligations.pop_front();
      if (!start_transfer(id, i, dst)) {
        Instance& recv = inst_[dst];
        if (auto t = recv.tickets.take(id)) recv.reserved -= t->reserved;
        recv.pump_dirty = true;
      }
    }
  }

  bool start_transfer(int64_t id, int src, int dst) {
    Req& r = reqs_[id];
    if (r.phase != Phase::kActive || r.owner != src) return false;
    Offer* o = find_offer(src, id);
    if (o == nullptr || o->state != OfferState::kConfirmed || o->receiver != dst) {
      return false;
    }
    MigrationTicket* ticket = inst_[dst].tickets.find(id);
    if (ticket == nullptr || inst_[src].outgoing >= 0 || inst_[dst].incoming >= 0) {
      return false;
    }
    if (!gate_.acquire()) return false;
    ticket->state = TicketState::kTransferring;
    o->state = OfferState::kTransferring;
    inst_[src].outgoing = id;
    inst_[dst].incoming = id;
    ++epoch_;
    ++counters_.transfers_started;
    Transfer t{id, src, dst,
               LiveMigration(cfg_.balance.migration_rounds, cfg_.kv_bytes_per_token,
                             cfg_.bandwidth),
               ++generation_};
    auto [it, inserted] = transfers_.emplace(id, std::move(t));
    log_.add(now_, "transfer_start", src, dst, r.trace.id,
             Detail().add("seq", r.seq_len).str());
    begin_round(it->second);
    return true;
  }

  void begin_round(Transfer& t) {
    Req& r = reqs_[t.request];
    if (t.mig.round() + 1 == t.mig.rounds()) r.paused = true;
    const double seconds = t.mig.begin_round(r.seq_len);
    push(now_ + duration_us(seconds), EvType::kRoundDone, -1, t.request, t.generation);
  }

  void end_transfer(const Transfer& t) {
    inst_[t.src].outgoing = -1;
    inst_[t.dst].incoming = -1;
    inst_[t.dst].pump_dirty = true;
    gate_.release();
    ++epoch_;
    transfers_.erase(t.request);
  }

  void on_round_done(int64_t id, uint64_t generation) {
    auto it = transfers_.find(id);
    if (it == transfers_.end() || it->second.generation != generation) return;
    Transfer& t = it->second;
    Req& r = reqs_[id];
    log_.add(now_, "round", t.src, t.dst, r.trace.id,
             Detail()
                 .add("round", t.mig.round())
                 .add("tokens", t.mig.last_volume())
                 .add("stop", t.mig.in_stop_round() ? 1 : 0)
                 .str());
    if (!t.mig.in_stop_round()) {
      begin_round(t);
      return;
    }
    Instance& src = inst_[t.src];
    Instance& dst = inst_[t.dst];
    if (auto ticket = dst.tickets.take(id)) dst.reserved -= ticket->reserved;
    if (free_kv(dst) < r.seq_len) {
      ++counters_.destination_full;
      ++counters_.transfers_aborted;
      log_.add(now_, "transfer_abort", src.id, dst.id, r.trace.id,
               Detail().add("reason", "destination_full").str());
      const int src_id = src.id;
      end_transfer(t);
      r.paused = false;
      if (Offer* o = find_offer(src_id, id)) {
        o->state = OfferState::kPending;
        o->next_try_us = now_ + duration_us(cfg_.balance.retry_s);
      }
      start_iteration(src_id);
      return;
    }
    std::erase(src.active, id);
    src.kv_used -= r.seq_len;
    log_.add(now_, "migrate_done", src.id, dst.id, r.trace.id,
             Detail().add("tokens", r.tokens_on_owner).add("seq", r.seq_len).str());
    erase_offer(src.id, id);
    r.tokens_on_owner = 0;
    r.owner = dst.id;
    r.paused = false;
    r.admit_order = ++admit_seq_;
    dst.active.push_back(id);
    dst.kv_used += r.seq_len;
    const int src_id = src.id;
    const int dst_id = dst.id;
    end_transfer(t);
    start_iteration(dst_id);
    start_iteration(src_id);
    maybe_handover(id);
  }

  // ---- invariants ---------------------------------------------------------

  [[noreturn]] void violated(const std::string& what) const {
    throw Error(ErrorKind::kProtocol,
                "invariant violated at t=" + std::to_string(now_) + "us: " + what);
  }

  void check_invariants() {
    ++counters_.invariant_checks;
    std::vector<int> seen(reqs_.size(), 0);
    for (const auto& in : inst_) {
      int64_t kv = 0;
      for (int64_t id : in.active) {
        const Req& r = reqs_[id];
        if (r.phase != Phase::kActive || r.owner != in.id) violated("active ownership");
        kv += r.seq_len;
        ++seen[id];
      }
      int64_t waiting = 0;
      for (int64_t id : in.waiting) {
        const Req& r = reqs_[id];
        if (r.phase != Phase::kWaiting || r.owner != in.id) violated("waiting ownership");
        waiting += r.seq_len;
        ++seen[id];
      }
      if (kv != in.kv_used) violated("kv accounting on instance " + std::to_string(in.id));
      if (waiting != in.waiting_tokens) violated("waiting accounting");
      if (in.reserved < 0) violated("negative reservation");
      if (in.kv_used + in.reserved > capacity_) {
        violated("kv capacity exceeded on instance " + std::to_string(in.id));
      }
    }
    for (size_t id = 0; id < reqs_.size(); ++id) {
      const Req& r = reqs_[id];
      const bool live = r.phase == Phase::kWaiting || r.phase == Phase::kActive;
      if (seen[id] != (live ? 1 : 0)) {
        violated("request " + std::to_string(r.trace.id) + " held " +
                 std::to_string(seen[id]) + " times");
      }
      if (r.seq_len != r.trace.input_len + r.generated) violated("sequence length");
      if (r.generated > r.trace.output_len) violated("overgeneration");
    }
    if (gate_.in_flight() > gate_.capacity()) violated("transfer cap");
    if (gate_.in_flight() != static_cast<int>(transfers_.size())) violated("gate count");
    std::vector<int> out(inst_.size(), 0), in(inst_.size(), 0);
    for (const auto& [id, t] : transfers_) {
      if (++out[t.src] > 1 || ++in[t.dst] > 1) violated("concurrent transfers per instance");
    }
  }

  const SimConfig& cfg_;
  QoeParams params_;
  PipelinePlan plan_;
  SloBaseline baseline_;
  TransferGate gate_;

  std::vector<Req> reqs_;
  std::vector<Instance> inst_;
  std::vector<std::vector<int>> members_;
  std::vector<int64_t> bounds_;
  std::vector<int64_t> pending_bounds_;
  std::vector<BoundaryState> boundary_state_;
  std::vector<uint64_t> rr_arrival_;
  std::vector<uint64_t> rr_migration_;
  std::vector<LoadSnapshot> reported_;
  std::vector<LoadSnapshot> pending_report_;
  std::map<int64_t, Transfer> transfers_;

  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<Message> messages_;
  std::vector<size_t> free_slots_;
  uint64_t next_seq_ = 0;
  uint64_t generation_ = 0;
  uint64_t epoch_ = 1;
  int64_t admit_seq_ = 0;
  int64_t now_ = 0;
  int64_t finished_ = 0;
  int64_t span_end_us_ = 0;
  int64_t horizon_us_ = 0;
  int64_t heartbeat_us_ = 1000;
  int64_t latency_us_ = 100;
  int64_t jitter_us_ = 0;
  Rng jitter_rng_;
  int64_t bid_wait_us_ = 1000;
  int64_t capacity_ = 0;
  int64_t admit_limit_ = 0;
  int64_t growth_margin_ = 0;

  BalanceMode mode_ = BalanceMode::kFull;
  bool migration_on_ = true;
  bool intra_on_ = true;
  bool refine_on_ = false;
  RefinePolicy refine_policy_ = RefinePolicy::kQoe;

  EventLog log_;
  SimCounters counters_;
};

}  // namespace

SimResult simulate(const SimConfig& config, std::span<const TraceRequest> trace,
                   const std::optional<QoeParams>& params,
                   const std::optional<SloBaseline>& baseline) {
  if (config.instances < 1) {
    throw Error(ErrorKind::kConfigError, "instances must be at least 1");
  }
  QoeParams resolved;
  if (params) {
    resolved = *params;
  } else if (needs_params(config.policy)) {
    resolved = calibrate_params(config, trace);
  }
  PipelinePlan layout = initial_layout(config, trace, resolved);
  const SloBaseline slo = baseline ? *baseline : calibrate_slo_baseline(config, trace);
  Simulator sim(config, trace, resolved, std::move(layout), slo);
  return sim.run();
}

}  // namespace lsched
