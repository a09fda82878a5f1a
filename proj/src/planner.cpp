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

#include "lsched/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "json.hpp"
#include "lsched/error.hpp"

namespace lsched {

int PipelinePlan::total_instances() const {
  int total = 0;
  for (const auto& s : stages) total += s.instance_count;
  return total;
}

int64_t PlanInput::resolved_max_len() const {
  if (max_len > 0) return max_len;
  int64_t longest = 1;
  for (const auto& r : requests) {
    longest = std::max(longest, r.input_len + r.output_len);
  }
  return longest;
}

double migration_cost(int64_t cut, std::span<const LengthPair> requests,
                      double bandwidth, double kv_bytes_per_token) {
  int64_t tokens = 0;
  for (const auto& r : requests) {
    if (r.input_len <= cut && cut < r.input_len + r.output_len) tokens += cut;
  }
  return static_cast<double>(tokens) * kv_bytes_per_token / bandwidth;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Planning requests as QoE shapes, ordered by final length then prompt.
std::vector<RequestShape> sorted_shapes(std::span<const LengthPair> requests) {
  std::vector<RequestShape> shapes;
  shapes.reserve(requests.size());
  for (const auto& r : requests) {
    shapes.push_back({r.input_len, r.input_len + r.output_len});
  }
  std::sort(shapes.begin(), shapes.end(),
            [](const RequestShape& a, const RequestShape& b) {
              if (a.seq_len != b.seq_len) return a.seq_len < b.seq_len;
              return a.input_len < b.input_len;
            });
  return shapes;
}

double stage_term(std::span<const RequestShape> range, int instances,
                  const QoeParams& params) {
  BatchFeatures f;
  const size_t stride = static_cast<size_t>(instances);
  for (size_t i = stride / 2; i < range.size(); i += stride) f.add(range[i]);
  return static_cast<double>(instances) * batch_qoe(f, params);
}

// Positions 0..K index the bucket edges; a stage spanning positions [a, b)
// covers lengths [edges[a], edges[b]).
class PlanContext {
 public:
  PlanContext(const PlanInput& input, std::span<const int64_t> edges)
      : input_(input),
        edges_(edges.begin(), edges.end()),
        buckets_(static_cast<int>(edges.size()) - 1),
        shapes_(sorted_shapes(input.requests)) {
    if (input.instances < 1) {
      throw Error(ErrorKind::kInfeasiblePlan, "need at least one instance");
    }
    if (buckets_ < 1) {
      throw Error(ErrorKind::kInfeasiblePlan, "need at least one bucket");
    }
    begin_.assign(buckets_ + 1, shapes_.size());
    for (size_t i = shapes_.size(); i-- > 0;) {
      const int b = bucket_index(edges_, shapes_[i].seq_len);
      for (int j = 0; j <= b; ++j) begin_[j] = std::min(begin_[j], i);
    }
    begin_[buckets_] = shapes_.size();
    cut_.assign(buckets_ + 1, 0.0);
    for (int p = 1; p < buckets_; ++p) {
      cut_[p] = migration_cost(edges_[p], input.requests, input.bandwidth,
                               input.kv_bytes_per_token);
    }
    terms_.assign(static_cast<size_t>(buckets_ + 1) * (buckets_ + 1) *
                      (input.instances + 1),
                  std::numeric_limits<double>::quiet_NaN());
  }

  int buckets() const { return buckets_; }
  int instances() const { return input_.instances; }
  double cut(int p) const { return cut_[p]; }

  double term(int a, int b, int m) const {
    double& slot = terms_[(static_cast<size_t>(a) * (buckets_ + 1) + b) *
                              (input_.instances + 1) +
                          m];
    if (std::isnan(slot)) {
      std::span<const RequestShape> range(shapes_.data() + begin_[a],
                                          begin_[b] - begin_[a]);
      slot = stage_term(range, m, input_.params);
    }
    return slot;
  }

  Stage stage(int a, int b, int m) const {
    return Stage{a == 0 ? 0 : edges_[a], edges_[b], m};
  }

 private:
  const PlanInput& input_;
  std::vector<int64_t> edges_;
  int buckets_;
  std::vector<RequestShape> shapes_;
  std::vector<size_t> begin_;
  std::vector<double> cut_;
  mutable std::vector<double> terms_;
};

struct PosStage {
  int a;
  int b;
  int m;
};

double objective(const PlanContext& ctx, std::span<const PosStage> stages) {
  double total = 0.0;
  for (size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    if (i == 0) {
      total = ctx.term(s.a, s.b, s.m);
    } else {
      total = total + ctx.term(s.a, s.b, s.m) + ctx.cut(s.a);
    }
  }
  return total;
}

PipelinePlan to_plan(const PlanContext& ctx, std::span<const PosStage> stages) {
  PipelinePlan plan;
  for (const auto& s : stages) plan.stages.push_back(ctx.stage(s.a, s.b, s.m));
  plan.predicted_quality = objective(ctx, stages);
  return plan;
}

std::vector<PosStage> to_positions(const PipelinePlan& plan,
                                   std::span<const int64_t> edges) {
  std::vector<PosStage> out;
  auto pos = [&](int64_t len, bool is_lo) {
    if (is_lo && len == 0) return 0;
    auto it = std::lower_bound(edges.begin(), edges.end(), len);
    if (it == edges.end() || *it != len) {
      throw Error(ErrorKind::kInfeasiblePlan,
                  "stage boundary " + std::to_string(len) +
                      " is not a bucket edge");
    }
    return static_cast<int>(it - edges.begin());
  };
  for (const auto& s : plan.stages) {
    out.push_back({pos(s.lo, true), pos(s.hi, false), s.instance_count});
  }
  return out;
}

std::vector<PosStage> merge_positions(const PlanContext& ctx,
                                      std::vector<PosStage> stages) {
  const int n = static_cast<int>(stages.size());
  std::vector<int> next(n), prev(n);
  std::vector<uint64_t> version(n, 0);
  std::vector<bool> alive(n, true);
  for (int i = 0; i < n; ++i) {
    next[i] = i + 1 < n ? i + 1 : -1;
    prev[i] = i - 1;
  }
  struct Entry {
    double gain;
    int left;
    int right;
    uint64_t left_version;
    uint64_t right_version;
  };
  auto worse = [&](const Entry& x, const Entry& y) {
    if (x.gain != y.gain) return x.gain < y.gain;
    return stages[x.left].a > stages[y.left].a;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  auto push_pair = [&](int left) {
    const int right = next[left];
    if (right < 0) return;
    const auto& l = stages[left];
    const auto& r = stages[right];
    const double gain = ctx.term(l.a, l.b, l.m) + ctx.term(r.a, r.b, r.m) +
                        ctx.cut(r.a) - ctx.term(l.a, r.b, l.m + r.m);
    heap.push({gain, left, right, version[left], version[right]});
  };
  for (int i = 0; i + 1 < n; ++i) push_pair(i);

  while (!heap.empty()) {
    const Entry top = heap.top();
    heap.pop();
    if (!alive[top.left] || !alive[top.right] ||
        version[top.left] != top.left_version ||
        version[top.right] != top.right_version) {
      continue;
    }
    if (!(top.gain > 0.0)) break;
    auto& l = stages[top.left];
    l.b = stages[top.right].b;
    l.m += stages[top.right].m;
    ++version[top.left];
    alive[top.right] = false;
    next[top.left] = next[top.right];
    if (next[top.left] >= 0) prev[next[top.left]] = top.left;
    if (prev[top.left] >= 0) push_pair(prev[top.left]);
    push_pair(top.left);
  }
  std::vector<PosStage> out;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(stages[i]);
  }
  return out;
}

}  // namespace

PipelinePlan plan_exact(const PlanInput& input, std::span<const int64_t> edges) {
  PlanContext ctx(input, edges);
  const int E = ctx.instances();
  const int K = ctx.buckets();
  const int max_stages = std::min(E, K);

  // best[s][e][p]: optimal quality of s stages, e instances, ending at p.
  auto idx = [&](int s, int e, int p) {
    return (static_cast<size_t>(s) * (E + 1) + e) * (K + 1) + p;
  };
  const size_t cells = static_cast<size_t>(max_stages + 1) * (E + 1) * (K + 1);
  std::vector<double> best(cells, kInf);
  std::vector<int> from_e(cells, -1), from_p(cells, -1);

  for (int e = 1; e <= E; ++e) {
    for (int p = 1; p <= K; ++p) best[idx(1, e, p)] = ctx.term(0, p, e);
  }
  for (int s = 2; s <= max_stages; ++s) {
    for (int e = s; e <= E; ++e) {
      for (int p = s; p <= K; ++p) {
        double value = kInf;
        int arg_e = -1, arg_p = -1;
        for (int pe = s - 1; pe <= e - 1; ++pe) {
          for (int pp = s - 1; pp <= p - 1; ++pp) {
            const double prior = best[idx(s - 1, pe, pp)];
            if (prior == kInf) continue;
            const double v = prior + ctx.term(pp, p, e - pe) + ctx.cut(pp);
            if (v < value) {
              value = v;
              arg_e = pe;
              arg_p = pp;
            }
          }
        }
        best[idx(s, e, p)] = value;
        from_e[idx(s, e, p)] = arg_e;
        from_p[idx(s, e, p)] = arg_p;
      }
    }
  }

  int best_s = -1;
  double best_value = kInf;
  for (int s = 1; s <= max_stages; ++s) {
    if (best[idx(s, E, K)] < best_value) {
      best_value = best[idx(s, E, K)];
      best_s = s;
    }
  }
  if (best_s < 0) throw Error(ErrorKind::kInfeasiblePlan, "no feasible plan");

  std::vector<PosStage> stages;
  int e = E, p = K;
  for (int s = best_s; s >= 1; --s) {
    if (s == 1) {
      stages.push_back({0, p, e});
      break;
    }
    const int pe = from_e[idx(s, e, p)];
    const int pp = from_p[idx(s, e, p)];
    stages.push_back({pp, p, e - pe});
    e = pe;
    p = pp;
  }
  std::reverse(stages.begin(), stages.end());
  PipelinePlan out = to_plan(ctx, stages);
  out.predicted_quality = best_value;
  return out;
}

PipelinePlan plan_chain(const PlanInput& input, std::span<const int64_t> edges) {
  PlanContext ctx(input, edges);
  const int E = ctx.instances();
  const int K = ctx.buckets();
  const int S = std::min(E, K);

  auto idx = [&](int s, int p) { return static_cast<size_t>(s) * (K + 1) + p; };
  std::vector<double> best(static_cast<size_t>(S + 1) * (K + 1), kInf);
  std::vector<int> from(best.size(), -1);
  for (int p = 1; p <= K; ++p) best[idx(1, p)] = ctx.term(0, p, 1);
  for (int s = 2; s <= S; ++s) {
    for (int p = s; p <= K; ++p) {
      for (int pp = s - 1; pp <= p - 1; ++pp) {
        const double prior = best[idx(s - 1, pp)];
        if (prior == kInf) continue;
        const double v = prior + ctx.term(pp, p, 1) + ctx.cut(pp);
        if (v < best[idx(s, p)]) {
          best[idx(s, p)] = v;
          from[idx(s, p)] = pp;
        }
      }
    }
  }
  if (best[idx(S, K)] == kInf) {
    throw Error(ErrorKind::kInfeasiblePlan, "no feasible chain");
  }
  std::vector<PosStage> stages;
  int p = K;
  for (int s = S; s >= 1; --s) {
    const int pp = s == 1 ? 0 : from[idx(s, p)];
    stages.push_back({pp, p, 1});
    p = pp;
  }
  std::reverse(stages.begin(), stages.end());

  for (int extra = E - S; extra > 0; --extra) {
    size_t pick = 0;
    double pick_drop = -kInf;
    for (size_t i = 0; i < stages.size(); ++i) {
      const auto& s = stages[i];
      const double drop = ctx.term(s.a, s.b, s.m) - ctx.term(s.a, s.b, s.m + 1);
      if (drop > pick_drop) {
        pick_drop = drop;
        pick = i;
      }
    }
    ++stages[pick].m;
  }
  return to_plan(ctx, stages);
}

PipelinePlan greedy_merge(const PipelinePlan& plan, const PlanInput& input,
                          std::span<const int64_t> edges) {
  PlanContext ctx(input, edges);
  return to_plan(ctx, merge_positions(ctx, to_positions(plan, edges)));
}

PipelinePlan plan(const PlanInput& input, const PlannerOptions& options) {
  const std::vector<int64_t> edges = bucketize(input.resolved_max_len());
  if (input.requests.empty()) {
    if (input.instances < 1) {
      throw Error(ErrorKind::kInfeasiblePlan, "need at least one instance");
    }
    return PipelinePlan{{Stage{0, edges.back(), input.instances}}, 0.0};
  }
  PipelinePlan heuristic = greedy_merge(plan_chain(input, edges), input, edges);
  if (input.instances <= options.exact_threshold) {
    PipelinePlan exact = plan_exact(input, edges);
    if (exact.predicted_quality < heuristic.predicted_quality) return exact;
  }
  return heuristic;
}

double evaluate_plan(const PipelinePlan& plan, const PlanInput& input) {
  std::vector<std::vector<RequestShape>> members(plan.stages.size());
  for (const auto& shape : sorted_shapes(input.requests)) {
    size_t k = 0;
    while (k + 1 < plan.stages.size() && shape.seq_len >= plan.stages[k].hi) ++k;
    members[k].push_back(shape);
  }
  double total = 0.0;
  for (size_t k = 0; k < plan.stages.size(); ++k) {
    const double term =
        stage_term(members[k], plan.stages[k].instance_count, input.params);
    if (k == 0) {
      total = term;
    } else {
      total = total + term +
              migration_cost(plan.stages[k].lo, input.requests, input.bandwidth,
                             input.kv_bytes_per_token);
    }
  }
  return total;
}

bool is_valid_plan(const PipelinePlan& plan, int instances, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (plan.stages.empty()) return fail("no stages");
  if (plan.stages.front().lo > 1) return fail("first stage must start at 0 or 1");
  int total = 0;
  for (size_t k = 0; k < plan.stages.size(); ++k) {
    const auto& s = plan.stages[k];
    if (s.lo >= s.hi) return fail("stage " + std::to_string(k) + " is empty");
    if (s.instance_count < 1) {
      return fail("stage " + std::to_string(k) + " has no instances");
    }
    if (k + 1 < plan.stages.size() && s.hi != plan.stages[k + 1].lo) {
      return fail("stages " + std::to_string(k) + " and " +
                  std::to_string(k + 1) + " are not contiguous");
    }
    total += s.instance_count;
  }
  if (total != instances) {
    return fail("plan uses " + std::to_string(total) + " instances, expected " +
                std::to_string(instances));
  }
  return true;
}

std::string plan_to_json(const PipelinePlan& plan) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : plan.stages) {
    stages.push_back({{"lo", s.lo}, {"hi", s.hi}, {"instances", s.instance_count}});
  }
  nlohmann::json j{{"stages", stages}, {"predicted_quality", plan.predicted_quality}};
  return j.dump(2);
}

}  // namespace lsched
