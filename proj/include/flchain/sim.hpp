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
#include "flchain/data.hpp"
#include "flchain/des.hpp"
#include "flchain/model.hpp"
#include "flchain/net.hpp"
#include "flchain/update_store.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace flchain::sim {

using chain::Block;
using chain::BlockId;
using chain::ClientId;
using chain::MinerId;
using chain::TxId;

/// What an idle client does when the newest delivered block carries no updates.
enum class EmptyBlockPolicy { Retrain, Wait };

struct Params {
    chain::ChainParams chain;
    double block_interval = 15.0;
    std::uint32_t miners = 10;
    double p2p_capacity = 10e6;     // bits/s, may be infinite
    double client_capacity = 1e6;   // bits/s
    double verification_delay = 0.0;
    std::uint32_t target_blocks = 50;  // NB

    std::uint32_t clients = 50;
    std::vector<double> xi_mips{83.0};  // client k gets xi_mips[k % size]
    double work_per_update = 2.8464e8;
    fl::SgdParams sgd;
    std::vector<std::size_t> layers{784, 200, 200, 10};
    EmptyBlockPolicy empty_block = EmptyBlockPolicy::Retrain;

    /// Skip all learning; clients still cycle through compute and upload
    /// so the chain sees a realistic transaction load.
    bool chain_only = false;
    std::size_t nominal_train_size = 6000;  // shard sizes in chain-only mode

    std::uint64_t seed = 1;

    /// Test hooks. With scripted_mining no MineBlock events are scheduled
    /// automatically; compute_time replaces the exponential draw.
    bool scripted_mining = false;
    std::function<double(ClientId)> compute_time;
};

/// Training and evaluation data of one run.
struct Datasets {
    fl::Dataset train;
    fl::Dataset test;
    fl::Dataset validation;
};

enum class ClientPhase { Idle, Training, Uploading };

struct ClientState {
    ClientId id = 0;
    MinerId miner = 0;
    const fl::DataShard* shard = nullptr;
    fl::ModelWeights weights;
    fl::ComputeProfile profile;
    ClientPhase phase = ClientPhase::Idle;
    std::optional<BlockId> latest_delivered;
    std::optional<BlockId> consumed;  // last head the client started a round from
    BlockId training_base = chain::kGenesisId;
    std::optional<fl::LocalUpdateResult> pending;
    std::vector<double> round_starts;
    std::vector<BlockId> round_bases;
    RngStream shuffle_rng;
    RngStream compute_rng;
};

struct MinerState {
    MinerId id = 0;
    chain::LedgerView ledger;
    chain::Mempool mempool;
    std::unordered_map<BlockId, std::vector<BlockId>> orphans;  // parent -> waiting children
    RngStream mining_rng;
};

/// Age of one block: per-tx ages and their mean.
struct AoBRecord {
    BlockId block = chain::kGenesisId;
    std::size_t updates = 0;
    std::vector<double> ages;
    double aob = 0.0;
};

/// Ages mine_time - gen_time of every carried tx and their mean; nullopt for
/// an empty block, whose age is undefined.
std::optional<AoBRecord> compute_aob(const Block& block, const chain::TxStore& txs);

struct MetricsRow {
    std::size_t index = 0;  // 1-based position on the main chain
    BlockId block = chain::kGenesisId;
    std::uint32_t depth = 0;
    double mine_time = 0.0;
    std::size_t updates = 0;
    std::optional<double> aob;
    std::optional<double> train_acc;               // full training set
    std::optional<double> contributors_train_acc;  // shards of the block's contributors
    std::optional<double> test_acc;
    std::optional<double> validation_acc;
    std::optional<double> mean_client_loss;  // losses reported since the previous block

    bool operator==(const MetricsRow&) const = default;
};

struct LossSample {
    double time = 0.0;
    ClientId client = 0;
    double loss = 0.0;
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
    std::vector<AoBRecord> aob_records;
    std::vector<LossSample> client_losses;
    double stale_rate = 0.0;
    std::optional<double> final_test_acc;
    std::optional<double> final_train_acc;
    std::optional<double> mean_aob;
    std::size_t rows_recomputed = 0;  // snapshot rows replaced after a main-chain reorg
};

/// One FLchain run: miners mining on a stochastic timer over a P2P mesh,
/// clients that aggregate the newest delivered block, train, and upload.
class Simulation {
public:
    /// `data` may be null only in chain-only mode.
    Simulation(Params params, std::shared_ptr<const Datasets> data);

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Schedules the first mining timers and the genesis delivery to clients.
    void start();

    /// start() if needed, then dispatch until the main chain holds NB blocks
    /// or the queue drains. Returns true if the target was reached.
    bool run();

    /// Main-chain rows against the final chain, AoB records, and run scalars.
    MetricsLog finalize();

    // Event handlers, public so scripted tests can drive them directly.
    void on_mine(MinerId miner);
    void on_receive_block(MinerId miner, BlockId block);
    void on_client_block(ClientId client, BlockId block);
    void on_client_train_done(ClientId client);
    void on_receive_tx(MinerId miner, TxId tx, bool from_client);

    /// FedAvg of the block's updates with uniform weights (memoized).
    const fl::ModelWeights& block_model(BlockId block);

    /// Replays the prefix: each non-empty block replaces the running model
    /// with its aggregate; empty blocks keep it. Starts from the initial model.
    fl::ModelWeights global_model_at(std::span<const BlockId> prefix);

    std::vector<BlockId> main_chain() const { return blocks_.path_to(best_tip_); }
    std::uint32_t main_chain_depth() const { return blocks_.get(best_tip_).depth; }

    des::Engine& engine() noexcept { return engine_; }
    const Params& params() const noexcept { return params_; }
    const chain::BlockStore& blocks() const noexcept { return blocks_; }
    const chain::TxStore& txs() const noexcept { return txs_; }
    const net::Network& network() const noexcept { return network_; }
    const std::vector<MinerState>& miners() const noexcept { return miners_; }
    const std::vector<ClientState>& clients() const noexcept { return clients_; }
    const std::vector<fl::DataShard>& shards() const noexcept { return shards_; }
    const fl::ModelWeights& initial_model() const noexcept { return initial_model_; }
    const std::vector<LossSample>& client_losses() const noexcept { return losses_; }

private:
    struct Evaluation {
        double train_acc = 0.0;
        double test_acc = 0.0;
        double validation_acc = 0.0;
        std::vector<std::uint8_t> train_correct;
    };

    void begin_round(ClientId client);
    void aggregate_from_block(ClientState& client, const Block& block);
    void note_mined(const Block& block);
    void snapshot_metrics();
    MetricsRow make_row(std::size_t index, const Block& block, const Block* previous);
    const Evaluation& evaluation_for(BlockId model_source);
    BlockId model_source(std::span<const BlockId> prefix) const;
    double draw_compute_time(ClientState& client);

    Params params_;
    std::shared_ptr<const Datasets> data_;
    des::Engine engine_;
    chain::BlockStore blocks_;
    chain::TxStore txs_;
    net::MiningProcess mining_;
    net::Network network_;
    std::unique_ptr<fl::UpdateStore> updates_;
    std::vector<fl::DataShard> shards_;
    std::vector<MinerState> miners_;
    std::vector<ClientState> clients_;
    fl::ModelWeights initial_model_;
    std::vector<LossSample> losses_;

    bool started_ = false;
    BlockId best_tip_ = chain::kGenesisId;
    std::map<std::uint32_t, MetricsRow> snapshot_rows_;  // by depth
    std::size_t rows_recomputed_ = 0;
    std::unordered_map<BlockId, fl::ModelWeights> block_models_;
    std::unordered_map<BlockId, Evaluation> evaluations_;
};

/// Builds the network topology for `params` (attachment drawn from the
/// "attach" stream of params.seed).
net::Topology make_topology(const Params& params);

}  // namespace flchain::sim
