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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsched {

// Which placements go through bid-ask.
enum class BalanceMode {
  kFull,            // arrivals, handovers and intra-stage overload offers
  kInterStageOnly,  // handovers only; arrivals rotate, no overload offers
  kRoundRobin,      // fixed rotation for arrivals and handovers
};

struct BalancerConfig {
  double overload_factor = 1.25;
  int starvation_threshold = 3;
  int max_concurrent_transfers = 3;
  int migration_rounds = 3;
  double interval_s = 0.05;  // load exchange and overload check period
  double retry_s = 0.01;     // back-off after an ask gathers no usable bid
  BalanceMode mode = BalanceMode::kFull;
};

struct AskMsg {
  int sender_id = 0;
  int64_t request_id = 0;
  int64_t sender_load = 0;  // total length of the sender's buffered requests
  int64_t seq_len = 0;      // length of the offered request
};

struct BidMsg {
  int receiver_id = 0;
  int64_t load = 0;
  double earliest_start = 0.0;  // buffered length / measured throughput
  double reply_time = 0.0;
};

enum class TicketState { kQueued, kTransferring, kStarved, kDone };

struct MigrationTicket {
  int64_t request_id = 0;
  int64_t priority = 0;  // sender load at ask time
  int source_id = 0;
  int failed_attempts = 0;
  TicketState state = TicketState::kQueued;
  int64_t seq_len = 0;   // length when confirmed
  int64_t reserved = 0;  // KV tokens held for it at the receiver
};

// Strictly above factor x stage mean; equality is not overloaded.
bool detect_overload(int64_t my_load, std::span<const int64_t> stage_loads,
                     double factor);

// How equal earliest starts and reply times are ordered.
enum class TieBreak {
  kId,    // receiver id ascending
  kLoad,  // lower load first, then receiver id
};

// Keeps the ceil(k/2) lowest-load bids, then the three earliest starts among
// them, then the first reply. The load filter always breaks ties by id.
int select_receiver(std::span<const BidMsg> bids, TieBreak ties = TieBreak::kId);

// The candidate set select_receiver draws from, exposed for auditing.
std::vector<int> receiver_shortlist(std::span<const BidMsg> bids,
                                    TieBreak ties = TieBreak::kId);

// Receiver side answer to an ask: a bid, or nothing when the free KV space
// cannot hold the offered request plus its growth margin.
std::optional<BidMsg> handle_ask(const AskMsg& ask, int receiver_id,
                                 int64_t load, int64_t free_kv_tokens,
                                 int64_t growth_margin, int64_t buffered_tokens,
                                 double measured_throughput, double now);

// Sender side: gathers bids for one outstanding ask and picks a winner.
class BidCollector {
 public:
  void reset(const AskMsg& ask, double deadline);
  void add(const BidMsg& bid);
  // Drops a bidder that answered a confirm with StaleConfirm.
  void discard(int receiver_id);
  std::optional<int> winner() const;

  bool active() const { return active_; }
  const AskMsg& ask() const { return ask_; }
  double deadline() const { return deadline_; }
  const std::vector<BidMsg>& bids() const { return bids_; }
  void close() { active_ = false; }

 private:
  AskMsg ask_;
  double deadline_ = 0.0;
  std::vector<BidMsg> bids_;
  bool active_ = false;
};

struct PumpResult {
  enum class Kind {
    kNone,        // queue empty or every source busy
    kStart,       // source idle: begin transfer of `request_id`
    kStarvation,  // notify the source; receiver now waits on `request_id`
    kDeferred,    // source idle but the transfer cap is reached
    kWaiting,     // already blocked on a starved ticket
  };
  Kind kind = Kind::kNone;
  int64_t request_id = -1;
  int source_id = -1;
  int skipped = 0;  // busy sources passed over during this pump
};

// Priority-ordered receive queue with starvation tracking.
class ReceiverQueue {
 public:
  explicit ReceiverQueue(int starvation_threshold = 3)
      : starvation_threshold_(starvation_threshold) {}

  void enqueue(MigrationTicket ticket);
  // Removes and returns the ticket for a request, if queued.
  std::optional<MigrationTicket> take(int64_t request_id);
  MigrationTicket* find(int64_t request_id);

  bool empty() const { return tickets_.empty(); }
  size_t size() const { return tickets_.size(); }
  // Sum of offered lengths, the basis of the bid's earliest start.
  int64_t buffered_tokens() const;
  // Tickets in service order: sender load descending, then source id and
  // request id ascending.
  std::vector<const MigrationTicket*> ordered() const;

  // Id of the starved ticket the receiver is blocked on, if any.
  std::optional<int64_t> waiting_on() const { return waiting_on_; }
  void clear_wait() { waiting_on_.reset(); }

  int starvation_threshold() const { return starvation_threshold_; }

  PumpResult pump(const std::function<bool(int)>& source_busy,
                  const std::function<bool()>& transfer_slot_free);

 private:
  std::vector<MigrationTicket> tickets_;
  std::optional<int64_t> waiting_on_;
  int starvation_threshold_;
};

// One pass over the queue in priority order. Busy sources cost their ticket
// a failed attempt; a ticket failing more than the threshold triggers a
// starvation notice and blocks the receiver on it.
PumpResult pump_receiver(ReceiverQueue& queue,
                         const std::function<bool(int)>& source_busy,
                         const std::function<bool()>& transfer_slot_free);

// System-wide cap on in-flight transfers.
class TransferGate {
 public:
  explicit TransferGate(int capacity) : capacity_(capacity) {}
  bool available() const { return in_flight_ < capacity_; }
  bool acquire();
  void release();
  int in_flight() const { return in_flight_; }
  int peak() const { return peak_; }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  int in_flight_ = 0;
  int peak_ = 0;
};

// Round bookkeeping of a multi-round live migration. Every round copies the
// KV tokens produced since the previous round began; the last round is the
// stop round, during which the source no longer decodes the request.
class LiveMigration {
 public:
  LiveMigration(int rounds, double kv_bytes_per_token, double bandwidth);

  // Starts the next round given the request's current length. Returns the
  // round's copy duration in seconds.
  double begin_round(int64_t seq_len);
  int round() const { return round_; }
  int rounds() const { return rounds_; }
  bool in_stop_round() const { return round_ == rounds_; }
  bool finished_rounds() const { return round_ >= rounds_; }
  int64_t copied_tokens() const { return copied_; }
  int64_t last_volume() const { return last_volume_; }
  const std::vector<int64_t>& volumes() const { return volumes_; }

 private:
  int rounds_;
  double seconds_per_token_;
  int round_ = 0;
  int64_t copied_ = 0;
  int64_t last_volume_ = 0;
  std::vector<int64_t> volumes_;
};

struct RoundRecord {
  double start = 0.0;
  double end = 0.0;
  int64_t volume = 0;
  bool stop = false;
};

// Closed-form schedule for a source that emits one token every
// `decode_interval` seconds (first token at t = decode_interval) while
// copying, starting at t = 0 with `seq_len` tokens cached.
std::vector<RoundRecord> live_migrate_schedule(int64_t seq_len, int rounds,
                                               double kv_bytes_per_token,
                                               double bandwidth,
                                               double decode_interval);

const char* to_string(BalanceMode mode);
BalanceMode balance_mode_from_string(const std::string& text);

}  // namespace lsched
