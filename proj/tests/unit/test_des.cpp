// Copyright 2026 The flchain-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "flchain/des.hpp"

#include <gtest/gtest.h>

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace flchain::des {
namespace {

TEST(Engine, SingleEventAdvancesClock) {
    Engine e;
    e.schedule_at(5.0, EventKind::MineBlock, 0);
    const auto ev = e.next();
    ASSERT_TRUE(ev);
    EXPECT_DOUBLE_EQ(ev->fire_time, 5.0);
    EXPECT_DOUBLE_EQ(e.now(), 5.0);
    EXPECT_FALSE(e.next());
}

TEST(Engine, EqualTimesPopInSchedulingOrder) {
    Engine e;
    e.schedule_at(5.0, EventKind::MineBlock, 1);  // A
    e.schedule_at(5.0, EventKind::MineBlock, 2);  // B
    EXPECT_EQ(e.next()->actor, 1u);
    EXPECT_EQ(e.next()->actor, 2u);
}

TEST(Engine, SchedulingInThePastFaults) {
    Engine e;
    EXPECT_THROW(e.schedule_at(-1.0, EventKind::MineBlock, 0), std::logic_error);
    e.schedule_at(3.0, EventKind::MineBlock, 0);
    e.next();
    EXPECT_THROW(e.schedule_at(2.999, EventKind::MineBlock, 0), std::logic_error);
    EXPECT_THROW(e.schedule_at(std::nan(""), EventKind::MineBlock, 0), std::logic_error);
    EXPECT_NO_THROW(e.schedule_at(3.0, EventKind::MineBlock, 0));
}

TEST(Engine, PopsMinimumTimeFirst) {
    Engine e;
    e.schedule_at(3.0, EventKind::MineBlock, 1);  // A
    e.schedule_at(1.0, EventKind::MineBlock, 2);  // B
    auto first = e.next();
    EXPECT_EQ(first->actor, 2u);
    EXPECT_DOUBLE_EQ(e.now(), 1.0);
    auto second = e.next();
    EXPECT_EQ(second->actor, 1u);
    EXPECT_DOUBLE_EQ(e.now(), 3.0);
}

TEST(Engine, EmptyQueueIsExhausted) {
    Engine e;
    EXPECT_FALSE(e.next());
}

TEST(Engine, TieGoesToLowerSeq) {
    Engine e;
    std::vector<std::uint64_t> seqs;
    for (int i = 0; i < 8; ++i) seqs.push_back(e.schedule_at(2.0, EventKind::SimStop, i));
    e.schedule_at(1.0, EventKind::SimStop, 99);
    EXPECT_EQ(e.next()->actor, 99u);
    for (int i = 0; i < 8; ++i) {
        const auto ev = e.next();
        EXPECT_EQ(ev->seq, seqs[i]);
    }
}

TEST(Engine, SeqIsStrictlyIncreasing) {
    Engine e;
    std::uint64_t last = e.schedule_at(0.0, EventKind::SimStop, 0);
    for (int i = 0; i < 100; ++i) {
        const auto seq = e.schedule_at(100.0 - i, EventKind::SimStop, 0);
        EXPECT_GT(seq, last);
        last = seq;
    }
}

TEST(Engine, RunUntilStopsOnPredicate) {
    Engine e;
    int depth = 0;
    e.on(EventKind::MineBlock, [&](const Event&) {
        ++depth;
        e.schedule_in(1.0, EventKind::MineBlock, 0);
    });
    e.schedule_at(0.0, EventKind::MineBlock, 0);
    e.run_until([&] { return depth >= 50; });
    EXPECT_EQ(depth, 50);
    EXPECT_EQ(e.dispatched(), 50u);
    EXPECT_EQ(e.pending(), 1u);
}

TEST(Engine, RunUntilTrueAtStartDispatchesNothing) {
    Engine e;
    e.on(EventKind::MineBlock, [](const Event&) { FAIL(); });
    e.schedule_at(1.0, EventKind::MineBlock, 0);
    e.run_until([&] { return e.now() >= 0.0; });
    EXPECT_EQ(e.dispatched(), 0u);
}

TEST(Engine, RunUntilDrainsFiniteQueue) {
    Engine e;
    int seen = 0;
    e.on(EventKind::ReceiveTx, [&](const Event&) { ++seen; });
    for (int i = 0; i < 10; ++i) e.schedule_at(i, EventKind::ReceiveTx, 0);
    e.run_until([] { return false; });
    EXPECT_EQ(seen, 10);
    EXPECT_EQ(e.pending(), 0u);
}

TEST(Engine, UnhandledKindFaults) {
    Engine e;
    e.schedule_at(1.0, EventKind::ClientTrainDone, 0);
    EXPECT_THROW(e.run_until([] { return false; }), std::logic_error);
}

TEST(Engine, ClockNeverMovesBackward) {
    Engine e(17);
    auto rng = e.rng_stream("test");
    double last = 0.0;
    int dispatched = 0;
    e.on(EventKind::MineBlock, [&](const Event& ev) {
        EXPECT_GE(ev.fire_time, last);
        last = ev.fire_time;
        if (++dispatched < 2000) {
            e.schedule_in(rng.exponential(1.0), EventKind::MineBlock, 0);
            if (rng.uniform() < 0.5) e.schedule_in(0.0, EventKind::MineBlock, 0);
        }
    });
    e.schedule_at(0.0, EventKind::MineBlock, 0);
    e.run_until([] { return false; });
    EXPECT_GE(dispatched, 2000);
}

TEST(Engine, TraceIsDeterministic) {
    auto run = [](std::uint64_t seed) {
        Engine e(seed);
        std::ostringstream out;
        e.set_trace(&out);
        auto rng = e.rng_stream("mining");
        int n = 0;
        e.on(EventKind::MineBlock, [&](const Event& ev) {
            if (++n < 100) e.schedule_in(rng.exponential(15.0), EventKind::MineBlock, ev.actor);
            e.schedule_in(0.5, EventKind::ReceiveBlock, ev.actor + 1, n);
        });
        e.on(EventKind::ReceiveBlock, [](const Event&) {});
        e.schedule_at(0.0, EventKind::MineBlock, 0);
        e.run_until([] { return false; });
        return out.str();
    };
    const auto a = run(1);
    EXPECT_EQ(a, run(1));
    EXPECT_NE(a, run(2));
    EXPECT_NE(a.find(R"("kind":"MineBlock","actor":0,"object":null)"), std::string::npos);
    EXPECT_NE(a.find(R"("kind":"ReceiveBlock","actor":1,"object":1})"), std::string::npos);
}

TEST(Engine, StreamsDependOnSeedAndLabel) {
    Engine a(1);
    Engine b(1);
    auto s1 = a.rng_stream("mining");
    auto s2 = b.rng_stream("mining");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(s1.next_u64(), s2.next_u64());
}

}  // namespace
}  // namespace flchain::des
