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

#include "flchain/chain.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

namespace flchain::chain {

double block_size_bits(const ChainParams& params, std::size_t num_txs) noexcept {
    return params.header_bits + static_cast<double>(num_txs) * params.tx_bits;
}

BlockStore::BlockStore(const ChainParams& params) {
    Block genesis;
    genesis.size_bits = block_size_bits(params, 0);
    blocks_.push_back(std::move(genesis));
}

const Block& BlockStore::get(BlockId id) const {
    if (!contains(id)) throw std::logic_error(fmt::format("unknown block {}", id));
    return blocks_[id];
}

const Block& BlockStore::add(Block block) {
    block.id = next_id();
    if (!block.parent || !contains(*block.parent)) {
        throw std::logic_error(fmt::format("block {} has no stored parent", block.id));
    }
    if (block.depth != get(*block.parent).depth + 1) {
        throw std::logic_error(fmt::format("block {} depth {} does not extend its parent",
                                           block.id, block.depth));
    }
    blocks_.push_back(std::move(block));
    return blocks_.back();
}

std::vector<BlockId> BlockStore::path_to(BlockId tip) const {
    std::vector<BlockId> path;
    path.reserve(get(tip).depth + 1);
    for (const Block* b = &get(tip);; b = &get(*b->parent)) {
        path.push_back(b->id);
        if (!b->parent) break;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

const Transaction& TxStore::get(TxId id) const {
    if (!contains(id)) throw std::logic_error(fmt::format("unknown transaction {}", id));
    return txs_[id];
}

const Transaction& TxStore::add(Transaction tx) {
    tx.id = txs_.size();
    txs_.push_back(tx);
    return txs_.back();
}

LedgerView::LedgerView(MinerId owner, const BlockStore& store)
    : owner_(owner), store_(&store) {
    known_.insert(kGenesisId);
}

std::uint32_t LedgerView::head_depth() const { return store_->get(head_).depth; }

ChainUpdate LedgerView::append(const Block& block) {
    ChainUpdate update;
    update.old_head = head_;
    update.new_head = head_;
    if (known_.contains(block.id)) return update;
    if (!block.parent || !known_.contains(*block.parent)) {
        throw std::logic_error(
            fmt::format("miner {} appended block {} before its parent", owner_, block.id));
    }
    known_.insert(block.id);
    update.accepted = true;
    if (block.depth <= head_depth()) return update;

    // Walk both tips down to the fork point.
    const Block* old_tip = &store_->get(head_);
    const Block* new_tip = &block;
    while (new_tip->depth > old_tip->depth) {
        update.adopted.push_back(new_tip->id);
        new_tip = &store_->get(*new_tip->parent);
    }
    while (old_tip->id != new_tip->id) {
        update.abandoned.push_back(old_tip->id);
        update.adopted.push_back(new_tip->id);
        old_tip = &store_->get(*old_tip->parent);
        new_tip = &store_->get(*new_tip->parent);
    }
    std::reverse(update.adopted.begin(), update.adopted.end());

    for (BlockId id : update.abandoned) {
        for (TxId tx : store_->get(id).txs) head_txs_.erase(tx);
    }
    for (BlockId id : update.adopted) {
        for (TxId tx : store_->get(id).txs) head_txs_.insert(tx);
    }
    head_ = block.id;
    update.head_changed = true;
    update.new_head = head_;
    return update;
}

bool Mempool::contains(TxId tx) const {
    auto it = ordinal_.find(tx);
    return it != ordinal_.end() && pending_.contains(it->second);
}

void Mempool::note_seen(TxId tx) {
    if (!ordinal_.contains(tx)) ordinal_.emplace(tx, next_ordinal_++);
}

bool Mempool::insert(TxId tx) {
    note_seen(tx);
    return pending_.emplace(ordinal_.at(tx), tx).second;
}

void Mempool::erase(TxId tx) {
    auto it = ordinal_.find(tx);
    if (it != ordinal_.end()) pending_.erase(it->second);
}

std::vector<TxId> Mempool::take(std::size_t n) {
    std::vector<TxId> out;
    out.reserve(std::min(n, pending_.size()));
    while (out.size() < n && !pending_.empty()) {
        out.push_back(pending_.begin()->second);
        pending_.erase(pending_.begin());
    }
    return out;
}

std::vector<TxId> Mempool::pending() const {
    std::vector<TxId> out;
    out.reserve(pending_.size());
    for (const auto& [ordinal, tx] : pending_) out.push_back(tx);
    return out;
}

const Block& make_block(BlockStore& store, LedgerView& view, Mempool& mempool,
                        const ChainParams& params, double now) {
    const Block& parent = store.get(view.head());
    Block block;
    block.parent = parent.id;
    block.depth = parent.depth + 1;
    block.miner = view.owner();
    block.txs = mempool.take(params.max_block_txs);
    block.mine_time = now;
    block.size_bits = block_size_bits(params, block.txs.size());
    const Block& stored = store.add(std::move(block));
    view.append(stored);
    return stored;
}

void prune_mempool(Mempool& mempool, const ChainUpdate& update, const LedgerView& view,
                   const BlockStore& store) {
    if (!update.head_changed) return;
    for (BlockId id : update.abandoned) {
        for (TxId tx : store.get(id).txs) {
            if (!view.head_chain_contains(tx)) mempool.insert(tx);
        }
    }
    for (BlockId id : update.adopted) {
        for (TxId tx : store.get(id).txs) {
            mempool.note_seen(tx);
            mempool.erase(tx);
        }
    }
}

bool better_tip(const Block& a, const Block& b) noexcept {
    if (a.depth != b.depth) return a.depth > b.depth;
    if (a.mine_time != b.mine_time) return a.mine_time < b.mine_time;
    return a.id < b.id;
}

std::vector<BlockId> main_chain(std::span<const LedgerView> views, const BlockStore& store) {
    const Block* best = &store.genesis();
    for (const LedgerView& view : views) {
        for (BlockId id : view.known()) {
            const Block& b = store.get(id);
            if (better_tip(b, *best)) best = &b;
        }
    }
    return store.path_to(best->id);
}

std::vector<BlockId> main_chain(const BlockStore& store) {
    const Block* best = &store.genesis();
    for (const Block& b : store) {
        if (better_tip(b, *best)) best = &b;
    }
    return store.path_to(best->id);
}

double stale_rate(const BlockStore& store, std::span<const BlockId> main) {
    const std::size_t mined = store.size() - 1;
    if (mined == 0) return 0.0;
    std::size_t on_main = 0;
    for (BlockId id : main) {
        if (id != kGenesisId) ++on_main;
    }
    return static_cast<double>(mined - on_main) / static_cast<double>(mined);
}

}  // namespace flchain::chain
