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

#include "lsched/balancer.hpp"

#include <algorithm>
#include <cmath>

#include "lsched/error.hpp"

namespace lsched {

bool detect_overload(int64_t my_load, std::span<const int64_t> stage_loads,
                     double factor) {
  if (stage_loads.empty()) return false;
  double total = 0.0;
  for (int64_t l : stage_loads) total += static_cast<double>(l);
  const double mean = total / static_cast<double>(stage_loads.size());
  return static_cast<double>(my_load) > factor * mean;
}

namespace {

bool tie_before(const BidMsg& a, const BidMsg& b, TieBreak ties) {
  if (ties == TieBreak::kLoad && a.load != b.load) return a.load < b.load;
  return a.receiver_id < b.receiver_id;
}

}  // namespace

std::vector<int> receiver_shortlist(std::span<const BidMsg> bids, TieBreak ties) {
  std::vector<BidMsg> by_load(bids.begin(), bids.end());
  std::sort(by_load.begin(), by_load.end(), [](const BidMsg& a, const BidMsg& b) {
    if (a.load != b.load) return a.load < b.load;
    return a.receiver_id < b.receiver_id;
  });
  by_load.resize((by_load.size() + 1) / 2);
  std::sort(by_load.begin(), by_load.end(), [&](const BidMsg& a, const BidMsg& b) {
    if (a.earliest_start != b.earliest_start) {
      return a.earliest_start < b.earliest_start;
    }
    return tie_before(a, b, ties);
  });
  if (by_load.size() > 3) by_load.resize(3);
  std::vector<int> ids;
  for (const auto& b : by_load) ids.push_back(b.receiver_id);
  return ids;
}

int select_receiver(std::span<const BidMsg> bids, TieBreak ties) {
  if (bids.empty()) throw Error(ErrorKind::kProtocol, "no bids to select from");
  const std::vector<int> shortlist = receiver_shortlist(bids, ties);
  const BidMsg* best = nullptr;
  for (const auto& b : bids) {
    if (std::find(shortlist.begin(), shortlist.end(), b.receiver_id) ==
        shortlist.end()) {
      continue;
    }
    if (best == nullptr || b.reply_time < best->reply_time ||
        (b.reply_time == best->reply_time && tie_before(b, *best, ties))) {
      best = &b;
    }
  }
  return best->receiver_id;
}

std::optional<BidMsg> handle_ask(const AskMsg& ask, int receiver_id,
                                 int64_t load, int64_t free_kv_tokens,
                                 int64_t growth_margin, int64_t buffered_tokens,
                                 double measured_throughput, double now) {
  if (free_kv_tokens < ask.seq_len + growth_margin) return std::nullopt;
  BidMsg bid;
  bid.receiver_id = receiver_id;
  bid.load = load;
  bid.earliest_start =
      buffered_tokens == 0
          ? 0.0
          : static_cast<double>(buffered_tokens) / std::max(measured_throughput, 1.0);
  bid.reply_time = now;
  return bid;
}

void BidCollector::reset(const AskMsg& ask, double deadline) {
  ask_ = ask;
  deadline_ = deadline;
  bids_.clear();
  active_ = true;
}

void BidCollector::add(const BidMsg& bid) {
  if (active_) bids_.push_back(bid);
}

void BidCollector::discard(int receiver_id) {
  std::erase_if(bids_, [&](const BidMsg& b) { return b.receiver_id == receiver_id; });
}

std::optional<int> BidCollector::winner() const {
  if (bids_.empty()) return std::nullopt;
  return select_receiver(bids_);
}

void ReceiverQueue::enqueue(MigrationTicket ticket) {
  ticket.state = TicketState::kQueued;
  ticket.failed_attempts = 0;
  tickets_.push_back(ticket);
}

std::optional<MigrationTicket> ReceiverQueue::take(int64_t request_id) {
  auto it = std::find_if(tickets_.begin(), tickets_.end(),
                         [&](const MigrationTicket& t) { return t.request_id == request_id; });
  if (it == tickets_.end()) return std::nullopt;
  MigrationTicket out = *it;
  tickets_.erase(it);
  if (waiting_on_ == request_id) waiting_on_.reset();
  return out;
}

MigrationTicket* ReceiverQueue::find(int64_t request_id) {
  for (auto& t : tickets_) {
    if (t.request_id == request_id) return &t;
  }
  return nullptr;
}

int64_t ReceiverQueue::buffered_tokens() const {
  int64_t total = 0;
  for (const auto& t : tickets_) total += t.seq_len;
  return total;
}

namespace {

bool service_before(const MigrationTicket& a, const MigrationTicket& b) {
  if (a.priority != b.priority) return a.priority > b.priority;
  if (a.source_id != b.source_id) return a.source_id < b.source_id;
  return a.request_id < b.request_id;
}

}  // namespace

std::vector<const MigrationTicket*> ReceiverQueue::ordered() const {
  std::vector<const MigrationTicket*> out;
  for (const auto& t : tickets_) out.push_back(&t);
  std::sort(out.begin(), out.end(),
            [](const MigrationTicket* a, const MigrationTicket* b) {
              return service_before(*a, *b);
            });
  return out;
}

PumpResult ReceiverQueue::pump(const std::function<bool(int)>& source_busy,
                               const std::function<bool()>& transfer_slot_free) {
  PumpResult result;
  if (waiting_on_) {
    result.kind = PumpResult::Kind::kWaiting;
    result.request_id = *waiting_on_;
    return result;
  }
  std::vector<MigrationTicket*> order;
  for (auto& t : tickets_) {
    if (t.state == TicketState::kTransferring) return result;
    order.push_back(&t);
  }
  std::sort(order.begin(), order.end(),
            [](const MigrationTicket* a, const MigrationTicket* b) {
              return service_before(*a, *b);
            });
  for (MigrationTicket* t : order) {
    if (t->state != TicketState::kQueued) continue;
    if (source_busy(t->source_id)) {
      ++t->failed_attempts;
      ++result.skipped;
      if (t->failed_attempts > starvation_threshold_) {
        t->state = TicketState::kStarved;
        waiting_on_ = t->request_id;
        result.kind = PumpResult::Kind::kStarvation;
        result.request_id = t->request_id;
        result.source_id = t->source_id;
        return result;
      }
      continue;
    }
    result.request_id = t->request_id;
    result.source_id = t->source_id;
    if (!transfer_slot_free()) {
      result.kind = PumpResult::Kind::kDeferred;
      return result;
    }
    t->state = TicketState::kTransferring;
    result.kind = PumpResult::Kind::kStart;
    return result;
  }
  return result;
}

PumpResult pump_receiver(ReceiverQueue& queue,
                         const std::function<bool(int)>& source_busy,
                         const std::function<bool()>& transfer_slot_free) {
  return queue.pump(source_busy, transfer_slot_free);
}

bool TransferGate::acquire() {
  if (in_flight_ >= capacity_) return false;
  ++in_flight_;
  peak_ = std::max(peak_, in_flight_);
  return true;
}

void TransferGate::release() {
  if (in_flight_ <= 0) throw Error(ErrorKind::kProtocol, "transfer gate underflow");
  --in_flight_;
}

LiveMigration::LiveMigration(int rounds, double kv_bytes_per_token,
                             double bandwidth)
    : rounds_(std::max(rounds, 1)),
      seconds_per_token_(kv_bytes_per_token / bandwidth) {}

double LiveMigration::begin_round(int64_t seq_len) {
  ++round_;
  last_volume_ = std::max<int64_t>(seq_len - copied_, 0);
  copied_ += last_volume_;
  volumes_.push_back(last_volume_);
  return static_cast<double>(last_volume_) * seconds_per_token_;
}

std::vector<RoundRecord> live_migrate_schedule(int64_t seq_len, int rounds,
                                               double kv_bytes_per_token,
                                               double bandwidth,
                                               double decode_interval) {
  LiveMigration mig(rounds, kv_bytes_per_token, bandwidth);
  std::vector<RoundRecord> out;
  double t = 0.0;
  auto tokens_at = [&](double when) {
    return seq_len + static_cast<int64_t>(std::floor(when / decode_interval));
  };
  while (!mig.finished_rounds()) {
    RoundRecord r;
    r.start = t;
    const double duration = mig.begin_round(tokens_at(t));
    r.volume = mig.last_volume();
    r.stop = mig.in_stop_round();
    r.end = t + duration;
    t = r.end;
    out.push_back(r);
  }
  return out;
}

const char* to_string(BalanceMode mode) {
  switch (mode) {
    case BalanceMode::kFull: return "full";
    case BalanceMode::kInterStageOnly: return "inter-stage";
    case BalanceMode::kRoundRobin: return "round-robin";
  }
  return "full";
}

BalanceMode balance_mode_from_string(const std::string& text) {
  if (text == "full") return BalanceMode::kFull;
  if (text == "inter-stage") return BalanceMode::kInterStageOnly;
  if (text == "round-robin") return BalanceMode::kRoundRobin;
  throw Error(ErrorKind::kConfigError, "unknown balance mode '" + text + "'");
}

}  // namespace lsched
