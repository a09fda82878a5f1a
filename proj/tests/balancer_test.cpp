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

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "lsched/error.hpp"
#include "properties/protocol_properties.hpp"

namespace lsched {
namespace {

TEST(Overload, StrictlyAboveFactorTimesMean) {
  const std::vector<int64_t> loads{100, 100, 100, 100};
  EXPECT_FALSE(detect_overload(125, loads, 1.25));
  EXPECT_TRUE(detect_overload(126, loads, 1.25));
  EXPECT_FALSE(detect_overload(0, std::vector<int64_t>{0, 0}, 1.25));
}

TEST(SelectReceiver, LoadHalfThenEarliestThenFirstReply) {
  std::vector<BidMsg> bids{
      {1, 100, 0.5, 0.3}, {2, 10, 0.9, 0.1}, {3, 20, 0.1, 0.4}, {4, 500, 0.0, 0.0}};
  // Load half {2, 3}; both within three earliest; 2 replied first.
  EXPECT_EQ(select_receiver(bids), 2);
  bids[1].reply_time = 0.5;
  EXPECT_EQ(select_receiver(bids), 3);
  auto shortlist = receiver_shortlist(bids);
  std::sort(shortlist.begin(), shortlist.end());
  EXPECT_EQ(shortlist, (std::vector<int>{2, 3}));
  EXPECT_THROW(select_receiver(std::vector<BidMsg>{}), Error);
}

TEST(SelectReceiver, LoadTieBreakPrefersLighter) {
  // Both survive the load half and tie on start and reply time.
  const std::vector<BidMsg> bids{
      {1, 40, 0.2, 0.1}, {2, 30, 0.2, 0.1}, {3, 100, 0.0, 0.0}, {4, 100, 0.0, 0.0}};
  EXPECT_EQ(select_receiver(bids, TieBreak::kId), 1);
  EXPECT_EQ(select_receiver(bids, TieBreak::kLoad), 2);
}

TEST(SelectReceiver, RandomizedProperties) {
  const auto rep = testing::check_select_receiver(2000, 11);
  EXPECT_EQ(rep.cases, 2000);
  EXPECT_TRUE(rep.ok()) << rep.first_failure;
}

TEST(HandleAsk, RefusesWithoutRoomForGrowth) {
  AskMsg ask{0, 7, 1000, 500};
  EXPECT_FALSE(handle_ask(ask, 3, 0, 531, 32, 0, 100.0, 0.0).has_value());
  const auto bid = handle_ask(ask, 3, 250, 532, 32, 400, 100.0, 1.5);
  ASSERT_TRUE(bid.has_value());
  EXPECT_EQ(bid->receiver_id, 3);
  EXPECT_EQ(bid->load, 250);
  EXPECT_DOUBLE_EQ(bid->earliest_start, 4.0);
}

TEST(ReceiverQueue, ServesHeaviestSenderFirst) {
  ReceiverQueue q;
  q.enqueue({1, 100, 2});
  q.enqueue({2, 300, 5});
  q.enqueue({3, 300, 1});
  const auto order = q.ordered();
  ASSERT_EQ(order.size(), 3u);
  EXPECT_EQ(order[0]->request_id, 3);
  EXPECT_EQ(order[1]->request_id, 2);
  EXPECT_EQ(order[2]->request_id, 1);
  const PumpResult r = q.pump([](int) { return false; }, [] { return true; });
  EXPECT_EQ(r.kind, PumpResult::Kind::kStart);
  EXPECT_EQ(r.request_id, 3);
}

TEST(ReceiverQueue, StarvationNoticeOnAttemptAfterThreshold) {
  ReceiverQueue q(3);
  q.enqueue({1, 100, 0});
  auto busy = [](int) { return true; };
  auto free = [] { return true; };
  for (int i = 0; i < 3; ++i) EXPECT_EQ(q.pump(busy, free).kind, PumpResult::Kind::kNone);
  const PumpResult r = q.pump(busy, free);
  EXPECT_EQ(r.kind, PumpResult::Kind::kStarvation);
  EXPECT_EQ(q.find(1)->failed_attempts, 4);
  EXPECT_EQ(q.waiting_on(), std::optional<int64_t>(1));
  EXPECT_EQ(q.pump(busy, free).kind, PumpResult::Kind::kWaiting);
}

TEST(ReceiverQueue, DefersWhenGateIsFull) {
  ReceiverQueue q;
  q.enqueue({1, 100, 0});
  EXPECT_EQ(q.pump([](int) { return false; }, [] { return false; }).kind,
            PumpResult::Kind::kDeferred);
  EXPECT_EQ(q.find(1)->failed_attempts, 0);
}

TEST(ReceiverQueue, RandomizedDiscipline) {
  int peak = 0;
  const auto rep = testing::check_queue_discipline(2000, 5, &peak);
  EXPECT_TRUE(rep.ok()) << rep.first_failure;
  EXPECT_GE(peak, 2);
}

TEST(TransferGate, CapsConcurrency) {
  TransferGate g(2);
  EXPECT_TRUE(g.acquire());
  EXPECT_TRUE(g.acquire());
  EXPECT_FALSE(g.acquire());
  EXPECT_EQ(g.peak(), 2);
  g.release();
  g.release();
  EXPECT_THROW(g.release(), Error);
}

TEST(LiveMigration, RoundsCopyOnlyNewTokens) {
  const auto rounds = live_migrate_schedule(1000, 3, 1000.0, 1e6, 0.1);
  ASSERT_EQ(rounds.size(), 3u);
  // 1000 tokens take 1 s, during which 10 new ones appear, which take 0.01 s.
  EXPECT_EQ(rounds[0].volume, 1000);
  EXPECT_EQ(rounds[1].volume, 10);
  EXPECT_EQ(rounds[2].volume, 0);
  EXPECT_TRUE(rounds[2].stop);
  EXPECT_FALSE(rounds[1].stop);
  int64_t total = 0;
  for (const auto& r : rounds) total += r.volume;
  EXPECT_EQ(total, 1010);
}

TEST(BalanceMode, StringRoundTrip) {
  for (BalanceMode m : {BalanceMode::kFull, BalanceMode::kInterStageOnly, BalanceMode::kRoundRobin}) {
    EXPECT_EQ(balance_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(balance_mode_from_string("none"), Error);
}

}  // namespace
}  // namespace lsched
