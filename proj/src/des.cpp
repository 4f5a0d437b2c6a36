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

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace flchain::des {

std::string_view to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::MineBlock: return "MineBlock";
        case EventKind::ReceiveBlock: return "ReceiveBlock";
        case EventKind::ReceiveTx: return "ReceiveTx";
        case EventKind::ClientTrainDone: return "ClientTrainDone";
        case EventKind::ClientBlockDelivered: return "ClientBlockDelivered";
        case EventKind::SimStop: return "SimStop";
    }
    return "Unknown";
}

std::uint64_t Engine::schedule(Event ev) {
    if (!(ev.fire_time >= now_) || std::isnan(ev.fire_time)) {
        throw std::logic_error(fmt::format("scheduling {} at t={} before now={}",
                                           to_string(ev.kind), ev.fire_time, now_));
    }
    ev.seq = next_seq_++;
    queue_.push(ev);
    return ev.seq;
}

std::optional<Event> Engine::next() {
    if (queue_.empty()) return std::nullopt;
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.fire_time;
    return ev;
}

void Engine::on(EventKind kind, Handler handler) {
    handlers_[static_cast<std::size_t>(kind)] = std::move(handler);
}

void Engine::run_until(const std::function<bool()>& stop) {
    while (!stop()) {
        auto ev = next();
        if (!ev) return;
        const auto& handler = handlers_[static_cast<std::size_t>(ev->kind)];
        if (!handler) {
            throw std::logic_error(fmt::format("no handler for {}", to_string(ev->kind)));
        }
        ++dispatched_;
        if (trace_ != nullptr) write_trace(*ev);
        handler(*ev);
    }
}

void Engine::write_trace(const Event& ev) {
    if (ev.object == kNoObject) {
        *trace_ << fmt::format(R"({{"time":{},"seq":{},"kind":"{}","actor":{},"object":null}})",
                               ev.fire_time, ev.seq, to_string(ev.kind), ev.actor)
                << '\n';
    } else {
        *trace_ << fmt::format(R"({{"time":{},"seq":{},"kind":"{}","actor":{},"object":{}}})",
                               ev.fire_time, ev.seq, to_string(ev.kind), ev.actor, ev.object)
                << '\n';
    }
}

}  // namespace flchain::des
