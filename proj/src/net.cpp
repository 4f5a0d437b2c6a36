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

#include "flchain/net.hpp"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>

namespace flchain::net {

double transfer_delay(double size_bits, double capacity_bps) {
    if (!(size_bits >= 0.0)) throw std::logic_error(fmt::format("negative size {}", size_bits));
    if (!(capacity_bps > 0.0)) {
        throw std::logic_error(fmt::format("non-positive capacity {}", capacity_bps));
    }
    if (std::isinf(capacity_bps)) return 0.0;
    return size_bits / capacity_bps;
}

Topology Topology::make(std::uint32_t miners, std::uint32_t clients, double p2p_capacity,
                        double client_capacity, RngStream& rng) {
    if (miners == 0 || clients == 0) {
        throw std::invalid_argument("topology needs at least one miner and one client");
    }
    Topology t;
    t.miners = miners;
    t.clients = clients;
    t.p2p_capacity = p2p_capacity;
    t.client_capacity = client_capacity;
    t.attach.reserve(clients);
    for (std::uint32_t k = 0; k < clients; ++k) {
        t.attach.push_back(static_cast<MinerId>(rng.uniform_index(miners)));
    }
    return t;
}

std::vector<ClientId> Topology::clients_of(MinerId miner) const {
    std::vector<ClientId> out;
    for (ClientId k = 0; k < attach.size(); ++k) {
        if (attach[k] == miner) out.push_back(k);
    }
    return out;
}

MiningProcess MiningProcess::uniform(std::uint32_t miners, double block_interval) {
    if (miners == 0) throw std::invalid_argument("mining process needs at least one miner");
    return MiningProcess{block_interval,
                         std::vector<double>(miners, 1.0 / static_cast<double>(miners))};
}

double sample_mining_time(const MiningProcess& process, MinerId miner, RngStream& rng) {
    return rng.exponential(process.mean_time(miner));
}

Network::Network(des::Engine& engine, Topology topology, double verification_delay)
    : engine_(&engine), topology_(std::move(topology)), verification_delay_(verification_delay) {
    if (topology_.attach.size() != topology_.clients) {
        throw std::invalid_argument("every client must be attached to exactly one miner");
    }
    clients_of_.resize(topology_.miners);
    for (ClientId k = 0; k < topology_.clients; ++k) {
        const MinerId m = topology_.attach[k];
        if (m >= topology_.miners) {
            throw std::invalid_argument(fmt::format("client {} attached to unknown miner {}", k, m));
        }
        clients_of_[m].push_back(k);
    }
}

void Network::broadcast_block(MinerId origin, const chain::Block& block) {
    if (!sent_blocks_.emplace(origin, block.id).second) return;
    const double delay =
        transfer_delay(block.size_bits, topology_.p2p_capacity) + verification_delay_;
    for (MinerId peer = 0; peer < topology_.miners; ++peer) {
        if (peer == origin) continue;
        engine_->schedule_in(delay, des::EventKind::ReceiveBlock, peer, block.id);
    }
}

void Network::broadcast_tx(MinerId origin, const chain::Transaction& tx) {
    if (!sent_txs_.emplace(origin, tx.id).second) return;
    const double delay = transfer_delay(tx.size_bits, topology_.p2p_capacity);
    for (MinerId peer = 0; peer < topology_.miners; ++peer) {
        if (peer == origin) continue;
        engine_->schedule_in(delay, des::EventKind::ReceiveTx, peer, tx.id);
    }
}

void Network::deliver_block_to_clients(MinerId miner, const chain::Block& block) {
    const double delay = transfer_delay(block.size_bits, topology_.client_capacity);
    for (ClientId k : clients_of_.at(miner)) {
        engine_->schedule_in(delay, des::EventKind::ClientBlockDelivered, k, block.id);
    }
}

void Network::upload_tx(ClientId client, const chain::Transaction& tx) {
    const double delay = transfer_delay(tx.size_bits, topology_.client_capacity);
    engine_->schedule_in(delay, des::EventKind::ReceiveTx, topology_.attach.at(client), tx.id,
                         /*from_client=*/true);
}

}  // namespace flchain::net
