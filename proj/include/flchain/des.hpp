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

#pragma once

#include "flchain/rng.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace flchain::des {

enum class EventKind : std::uint8_t {
    MineBlock,
    ReceiveBlock,
    ReceiveTx,
    ClientTrainDone,
    ClientBlockDelivered,
    SimStop,
};

inline constexpr std::size_t kEventKindCount = 6;

std::string_view to_string(EventKind kind) noexcept;

inline constexpr std::uint64_t kNoObject = ~std::uint64_t{0};

/// A timestamped occurrence. Payloads are referenced by id only: `actor` is
/// the miner or client the event is addressed to, `object` a block or tx id,
/// and `sender` tells a client-originated ReceiveTx apart from peer gossip.
struct Event {
    std::uint64_t seq = 0;
    double fire_time = 0.0;
    EventKind kind = EventKind::SimStop;
    std::uint32_t actor = 0;
    std::uint64_t object = kNoObject;
    bool from_client = false;
};

/// Single-threaded event engine: clock, (fire_time, seq)-ordered queue, and
/// handler dispatch. Scheduling in the past or dispatching a kind without a
/// handler throws std::logic_error.
class Engine {
public:
    using Handler = std::function<void(const Event&)>;

    explicit Engine(std::uint64_t seed = 0) : seed_(seed) {}

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    double now() const noexcept { return now_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t pending() const noexcept { return queue_.size(); }
    std::uint64_t dispatched() const noexcept { return dispatched_; }

    /// Enqueue `ev` (its seq is assigned here). Returns the seq.
    std::uint64_t schedule(Event ev);

    std::uint64_t schedule_at(double fire_time, EventKind kind, std::uint32_t actor,
                              std::uint64_t object = kNoObject, bool from_client = false) {
        return schedule(Event{0, fire_time, kind, actor, object, from_client});
    }

    std::uint64_t schedule_in(double delay, EventKind kind, std::uint32_t actor,
                              std::uint64_t object = kNoObject, bool from_client = false) {
        return schedule_at(now_ + delay, kind, actor, object, from_client);
    }

    /// Pops the minimum (fire_time, seq) event and advances the clock to it.
    std::optional<Event> next();

    void on(EventKind kind, Handler handler);

    /// Dispatch events in order until `stop()` holds or the queue drains.
    /// `stop` is checked before the first dispatch and after every one.
    void run_until(const std::function<bool()>& stop);

    /// Labeled stream derived from this engine's seed.
    RngStream rng_stream(std::string label) const { return RngStream(seed_, std::move(label)); }

    /// Write one JSON line per dispatched event to `out` (nullptr disables).
    void set_trace(std::ostream* out) noexcept { trace_ = out; }

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept {
            if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
            return a.seq > b.seq;
        }
    };

    void write_trace(const Event& ev);

    std::uint64_t seed_;
    double now_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t dispatched_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::array<Handler, kEventKindCount> handlers_{};
    std::ostream* trace_ = nullptr;
};

}  // namespace flchain::des
