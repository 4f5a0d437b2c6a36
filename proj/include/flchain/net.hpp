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

#include "flchain/chain.hpp"
#include "flchain/des.hpp"
#include "flchain/rng.hpp"

#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

namespace flchain::net {

using chain::ClientId;
using chain::MinerId;

inline constexpr double kInfiniteCapacity = std::numeric_limits<double>::infinity();

/// size_bits / capacity_bps; zero over an infinite link.
double transfer_delay(double size_bits, double capacity_bps);

/// Fully connected miner mesh plus a fixed client-to-miner attachment.
struct Topology {
    std::uint32_t miners = 1;
    std::uint32_t clients = 1;
    std::vector<MinerId> attach;  // attach[client] = miner
    double p2p_capacity = kInfiniteCapacity;  // bits/s
    double client_capacity = 1e6;             // bits/s

    /// Uniform random attachment drawn from `rng`.
    static Topology make(std::uint32_t miners, std::uint32_t clients, double p2p_capacity,
                         double client_capacity, RngStream& rng);

    std::vector<ClientId> clients_of(MinerId miner) const;
};

struct MiningProcess {
    double block_interval = 15.0;  // network-wide mean, seconds
    std::vector<double> hashpower;  // per-miner share, sums to 1

    static MiningProcess uniform(std::uint32_t miners, double block_interval);

    double mean_time(MinerId miner) const { return block_interval / hashpower.at(miner); }
};

/// Delay until `miner` solves its next block: Exp with mean BI / hashpower.
double sample_mining_time(const MiningProcess& process, MinerId miner, RngStream& rng);

/// Schedules the message events of the P2P mesh and the client access links.
/// Each origin sends a given block or tx to its peers at most once; blocks
/// are not re-forwarded since the mesh is one hop.
class Network {
public:
    Network(des::Engine& engine, Topology topology, double verification_delay = 0.0);

    const Topology& topology() const noexcept { return topology_; }
    const std::vector<ClientId>& clients_of(MinerId miner) const { return clients_of_.at(miner); }

    void broadcast_block(MinerId origin, const chain::Block& block);
    void broadcast_tx(MinerId origin, const chain::Transaction& tx);
    void deliver_block_to_clients(MinerId miner, const chain::Block& block);

    /// Client uplink: ReceiveTx at the attached miner after T_l / C_n.
    void upload_tx(ClientId client, const chain::Transaction& tx);

private:
    des::Engine* engine_;
    Topology topology_;
    double verification_delay_;
    std::vector<std::vector<ClientId>> clients_of_;
    std::set<std::pair<MinerId, chain::BlockId>> sent_blocks_;
    std::set<std::pair<MinerId, chain::TxId>> sent_txs_;
};

}  // namespace flchain::net
