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

#include "flchain/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>
#include <stdexcept>

namespace flchain::sim {

std::optional<AoBRecord> compute_aob(const Block& block, const chain::TxStore& txs) {
    if (block.txs.empty()) return std::nullopt;
    AoBRecord record;
    record.block = block.id;
    record.updates = block.txs.size();
    record.ages.reserve(block.txs.size());
    double sum = 0.0;
    for (TxId id : block.txs) {
        const double age = block.mine_time - txs.get(id).gen_time;
        record.ages.push_back(age);
        sum += age;
    }
    record.aob = sum / static_cast<double>(record.updates);
    return record;
}

net::Topology make_topology(const Params& params) {
    RngStream rng(params.seed, "attach");
    return net::Topology::make(params.miners, params.clients, params.p2p_capacity,
                               params.client_capacity, rng);
}

namespace {

Params validated(Params p) {
    if (p.miners == 0) throw std::invalid_argument("at least one miner is required");
    if (p.clients == 0) throw std::invalid_argument("at least one client is required");
    if (!(p.block_interval > 0.0)) throw std::invalid_argument("block interval must be positive");
    if (!(p.p2p_capacity > 0.0) || !(p.client_capacity > 0.0)) {
        throw std::invalid_argument("link capacities must be positive");
    }
    if (p.target_blocks == 0) throw std::invalid_argument("target block count must be positive");
    if (p.chain.max_block_txs == 0) throw std::invalid_argument("block size must be positive");
    if (p.xi_mips.empty() ||
        std::any_of(p.xi_mips.begin(), p.xi_mips.end(), [](double xi) { return !(xi > 0.0); })) {
        throw std::invalid_argument("device compute power must be positive");
    }
    if (!(p.work_per_update > 0.0)) throw std::invalid_argument("work per update must be positive");
    return p;
}

}  // namespace

Simulation::Simulation(Params params, std::shared_ptr<const Datasets> data)
    : params_(validated(std::move(params))),
      data_(std::move(data)),
      engine_(params_.seed),
      blocks_(params_.chain),
      mining_(net::MiningProcess::uniform(params_.miners, params_.block_interval)),
      network_(engine_, make_topology(params_), params_.verification_delay) {
    if (!params_.chain_only) {
        if (!data_) throw std::invalid_argument("learning runs need datasets");
        if (params_.layers.size() < 2 || params_.layers.front() != data_->train.dim()) {
            throw std::invalid_argument(
                fmt::format("input layer must match the {} data features", data_->train.dim()));
        }
        updates_ = std::make_unique<fl::UpdateStore>(params_.layers);
        auto shard_rng = engine_.rng_stream("shard");
        shards_ = fl::shard_dataset(data_->train, params_.clients, shard_rng);
        auto init_rng = engine_.rng_stream("init-model");
        initial_model_ = fl::init_model(params_.layers, init_rng);
    }

    miners_.reserve(params_.miners);
    for (MinerId m = 0; m < params_.miners; ++m) {
        miners_.push_back(MinerState{m, chain::LedgerView(m, blocks_), chain::Mempool(m), {},
                                     engine_.rng_stream(fmt::format("mining-{}", m))});
    }

    clients_.resize(params_.clients);
    for (ClientId k = 0; k < params_.clients; ++k) {
        ClientState& c = clients_[k];
        c.id = k;
        c.miner = network_.topology().attach[k];
        c.shard = params_.chain_only ? nullptr : &shards_[k];
        c.weights = initial_model_;
        c.profile = {params_.xi_mips[k % params_.xi_mips.size()], params_.work_per_update};
        c.shuffle_rng = engine_.rng_stream(fmt::format("shuffle-{}", k));
        c.compute_rng = engine_.rng_stream(fmt::format("compute-{}", k));
    }

    using des::EventKind;
    engine_.on(EventKind::MineBlock, [this](const des::Event& e) { on_mine(e.actor); });
    engine_.on(EventKind::ReceiveBlock,
               [this](const des::Event& e) { on_receive_block(e.actor, e.object); });
    engine_.on(EventKind::ReceiveTx, [this](const des::Event& e) {
        on_receive_tx(e.actor, e.object, e.from_client);
    });
    engine_.on(EventKind::ClientTrainDone,
               [this](const des::Event& e) { on_client_train_done(e.actor); });
    engine_.on(EventKind::ClientBlockDelivered,
               [this](const des::Event& e) { on_client_block(e.actor, e.object); });
    engine_.on(EventKind::SimStop, [](const des::Event&) {});
}

void Simulation::start() {
    if (started_) return;
    started_ = true;
    if (!params_.scripted_mining) {
        for (auto& ms : miners_) {
            engine_.schedule_in(net::sample_mining_time(mining_, ms.id, ms.mining_rng),
                                des::EventKind::MineBlock, ms.id);
        }
    }
    for (const auto& ms : miners_) network_.deliver_block_to_clients(ms.id, blocks_.genesis());
}

bool Simulation::run() {
    start();
    engine_.run_until([this] { return main_chain_depth() >= params_.target_blocks; });
    return main_chain_depth() >= params_.target_blocks;
}

void Simulation::on_mine(MinerId miner) {
    MinerState& ms = miners_.at(miner);
    const Block& block =
        chain::make_block(blocks_, ms.ledger, ms.mempool, params_.chain, engine_.now());
    network_.broadcast_block(miner, block);
    network_.deliver_block_to_clients(miner, block);
    if (!params_.scripted_mining) {
        engine_.schedule_in(net::sample_mining_time(mining_, miner, ms.mining_rng),
                            des::EventKind::MineBlock, miner);
    }
    note_mined(block);
}

void Simulation::on_receive_block(MinerId miner, BlockId id) {
    MinerState& ms = miners_.at(miner);
    const Block& block = blocks_.get(id);
    if (ms.ledger.knows(id)) return;
    if (!ms.ledger.knows(*block.parent)) {
        auto& waiting = ms.orphans[*block.parent];
        if (std::find(waiting.begin(), waiting.end(), id) == waiting.end()) waiting.push_back(id);
        return;
    }

    bool head_changed = false;
    std::vector<BlockId> ready{id};
    for (std::size_t i = 0; i < ready.size(); ++i) {
        const auto update = ms.ledger.append(blocks_.get(ready[i]));
        if (update.head_changed) {
            chain::prune_mempool(ms.mempool, update, ms.ledger, blocks_);
            head_changed = true;
        }
        if (auto it = ms.orphans.find(ready[i]); it != ms.orphans.end()) {
            ready.insert(ready.end(), it->second.begin(), it->second.end());
            ms.orphans.erase(it);
        }
    }
    if (head_changed) network_.deliver_block_to_clients(miner, blocks_.get(ms.ledger.head()));
}

void Simulation::on_client_block(ClientId client, BlockId id) {
    ClientState& c = clients_.at(client);
    const Block& block = blocks_.get(id);
    if (c.latest_delivered && blocks_.get(*c.latest_delivered).depth >= block.depth) return;
    c.latest_delivered = id;
    if (c.phase == ClientPhase::Idle) begin_round(client);
}

void Simulation::begin_round(ClientId client) {
    ClientState& c = clients_[client];
    const Block& block = blocks_.get(*c.latest_delivered);
    const bool first_round = !c.consumed.has_value();
    c.consumed = block.id;
    if (block.txs.empty()) {
        if (params_.empty_block == EmptyBlockPolicy::Wait && !first_round) return;
    } else if (!params_.chain_only) {
        aggregate_from_block(c, block);
    }
    c.phase = ClientPhase::Training;
    c.training_base = block.id;
    c.round_starts.push_back(engine_.now());
    c.round_bases.push_back(block.id);
    if (!params_.chain_only) {
        c.pending = fl::local_update(c.weights, c.shard->data.features, c.shard->data.labels,
                                     params_.sgd, c.shuffle_rng);
    }
    engine_.schedule_in(draw_compute_time(c), des::EventKind::ClientTrainDone, client);
}

void Simulation::aggregate_from_block(ClientState& client, const Block& block) {
    client.weights = block_model(block.id);
}

void Simulation::on_client_train_done(ClientId client) {
    ClientState& c = clients_.at(client);
    if (c.phase != ClientPhase::Training) {
        throw std::logic_error(fmt::format("client {} finished training while not training", client));
    }
    chain::Transaction tx;
    tx.client = client;
    tx.gen_time = engine_.now();
    tx.size_bits = params_.chain.tx_bits;
    tx.base_block = c.training_base;
    if (params_.chain_only) {
        const std::size_t n = params_.nominal_train_size;
        tx.num_samples = n / params_.clients + (client < n % params_.clients ? 1 : 0);
    } else {
        tx.num_samples = c.shard->size();
        tx.update = updates_->append(c.pending->weights);
        losses_.push_back({engine_.now(), client, c.pending->mean_epoch_loss});
        c.weights = std::move(c.pending->weights);
        c.pending.reset();
    }
    const auto& stored = txs_.add(tx);
    c.phase = ClientPhase::Uploading;
    network_.upload_tx(client, stored);
}

void Simulation::on_receive_tx(MinerId miner, TxId id, bool from_client) {
    MinerState& ms = miners_.at(miner);
    // A tx that was seen and is not pending sits on the head chain.
    if (!ms.mempool.seen(id) && !ms.ledger.head_chain_contains(id)) ms.mempool.insert(id);
    if (!from_client) return;

    const chain::Transaction& tx = txs_.get(id);
    network_.broadcast_tx(miner, tx);
    ClientState& c = clients_.at(tx.client);
    if (c.phase != ClientPhase::Uploading) return;
    c.phase = ClientPhase::Idle;
    if (c.latest_delivered && c.latest_delivered != c.consumed) begin_round(c.id);
}

double Simulation::draw_compute_time(ClientState& client) {
    if (params_.compute_time) return params_.compute_time(client.id);
    return fl::sample_compute_time(client.profile, client.compute_rng);
}

const fl::ModelWeights& Simulation::block_model(BlockId id) {
    if (auto it = block_models_.find(id); it != block_models_.end()) return it->second;
    if (!updates_) throw std::logic_error("no model updates in chain-only mode");
    const Block& block = blocks_.get(id);
    if (block.txs.empty()) throw std::logic_error(fmt::format("block {} carries no updates", id));
    std::vector<fl::ModelWeights> models;
    models.reserve(block.txs.size());
    for (TxId tx : block.txs) models.push_back(updates_->load(txs_.get(tx).update));
    return block_models_.emplace(id, fl::fedavg_uniform(models)).first->second;
}

BlockId Simulation::model_source(std::span<const BlockId> prefix) const {
    for (auto it = prefix.rbegin(); it != prefix.rend(); ++it) {
        if (!blocks_.get(*it).txs.empty()) return *it;
    }
    return chain::kGenesisId;
}

fl::ModelWeights Simulation::global_model_at(std::span<const BlockId> prefix) {
    const BlockId source = model_source(prefix);
    return source == chain::kGenesisId ? initial_model_ : block_model(source);
}

void Simulation::note_mined(const Block& block) {
    if (!chain::better_tip(block, blocks_.get(best_tip_))) return;
    best_tip_ = block.id;
    snapshot_metrics();
}

void Simulation::snapshot_metrics() {
    const auto chain = main_chain();
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const auto depth = static_cast<std::uint32_t>(i);
        auto it = snapshot_rows_.find(depth);
        if (it != snapshot_rows_.end() && it->second.block == chain[i]) continue;
        if (it != snapshot_rows_.end()) ++rows_recomputed_;
        snapshot_rows_[depth] = make_row(i, blocks_.get(chain[i]), &blocks_.get(chain[i - 1]));
    }
}

const Simulation::Evaluation& Simulation::evaluation_for(BlockId source) {
    if (auto it = evaluations_.find(source); it != evaluations_.end()) return it->second;
    const fl::ModelWeights& model = source == chain::kGenesisId ? initial_model_ : block_model(source);
    Evaluation ev;
    ev.train_correct = fl::correct_mask(model, data_->train.features, data_->train.labels);
    std::size_t correct = 0;
    for (auto bit : ev.train_correct) correct += bit;
    ev.train_acc = static_cast<double>(correct) / static_cast<double>(data_->train.size());
    ev.test_acc = fl::evaluate(model, data_->test.features, data_->test.labels).accuracy;
    if (data_->validation.size() > 0) {
        ev.validation_acc =
            fl::evaluate(model, data_->validation.features, data_->validation.labels).accuracy;
    }
    return evaluations_.emplace(source, std::move(ev)).first->second;
}

MetricsRow Simulation::make_row(std::size_t index, const Block& block, const Block* previous) {
    MetricsRow row;
    row.index = index;
    row.block = block.id;
    row.depth = block.depth;
    row.mine_time = block.mine_time;
    row.updates = block.txs.size();
    if (auto aob = compute_aob(block, txs_)) row.aob = aob->aob;

    const double window_start = previous ? previous->mine_time : 0.0;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const auto& s : losses_) {
        if (s.time > window_start && s.time <= block.mine_time) {
            loss_sum += s.loss;
            ++loss_count;
        }
    }
    if (loss_count > 0) row.mean_client_loss = loss_sum / static_cast<double>(loss_count);

    if (params_.chain_only) return row;
    const auto prefix = blocks_.path_to(block.id);
    const Evaluation& ev = evaluation_for(model_source(prefix));
    row.train_acc = ev.train_acc;
    row.test_acc = ev.test_acc;
    if (data_->validation.size() > 0) row.validation_acc = ev.validation_acc;
    if (!block.txs.empty()) {
        std::set<ClientId> contributors;
        for (TxId tx : block.txs) contributors.insert(txs_.get(tx).client);
        std::size_t correct = 0;
        std::size_t total = 0;
        for (ClientId k : contributors) {
            for (std::size_t idx : shards_[k].indices) correct += ev.train_correct[idx];
            total += shards_[k].indices.size();
        }
        row.contributors_train_acc = static_cast<double>(correct) / static_cast<double>(total);
    }
    return row;
}

MetricsLog Simulation::finalize() {
    MetricsLog log;
    const auto chain = main_chain();
    for (std::size_t i = 1; i < chain.size(); ++i) {
        const auto depth = static_cast<std::uint32_t>(i);
        auto it = snapshot_rows_.find(depth);
        if (it == snapshot_rows_.end() || it->second.block != chain[i]) {
            if (it != snapshot_rows_.end()) ++rows_recomputed_;
            snapshot_rows_[depth] = make_row(i, blocks_.get(chain[i]), &blocks_.get(chain[i - 1]));
        }
        log.rows.push_back(snapshot_rows_.at(depth));
    }
    double aob_sum = 0.0;
    for (std::size_t i = 1; i < chain.size(); ++i) {
        if (auto record = compute_aob(blocks_.get(chain[i]), txs_)) {
            aob_sum += record->aob;
            log.aob_records.push_back(std::move(*record));
        }
    }
    if (!log.aob_records.empty()) {
        log.mean_aob = aob_sum / static_cast<double>(log.aob_records.size());
    }
    log.client_losses = losses_;
    log.stale_rate = chain::stale_rate(blocks_, chain);
    if (!log.rows.empty()) {
        log.final_test_acc = log.rows.back().test_acc;
        log.final_train_acc = log.rows.back().train_acc;
    }
    log.rows_recomputed = rows_recomputed_;
    return log;
}

}  // namespace flchain::sim
