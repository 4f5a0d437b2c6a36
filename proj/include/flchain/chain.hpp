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

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace flchain::chain {

using BlockId = std::uint64_t;
using TxId = std::uint64_t;
using MinerId = std::uint32_t;
using ClientId = std::uint32_t;
using UpdateRef = std::uint64_t;

inline constexpr BlockId kGenesisId = 0;

struct ChainParams {
    std::size_t max_block_txs = 10;  // S^B
    double tx_bits = 796'840.0;      // T_l
    double header_bits = 20'000.0;   // T_h
};

/// T_h + num_txs * T_l.
double block_size_bits(const ChainParams& params, std::size_t num_txs) noexcept;

/// A client's local model update as carried on chain. The weights live in an
/// update store and are referenced by `update`.
struct Transaction {
    TxId id = 0;
    ClientId client = 0;
    UpdateRef update = 0;
    std::size_t num_samples = 0;
    double gen_time = 0.0;  // t^(1): when the client finished computing it
    double size_bits = 0.0;
    BlockId base_block = kGenesisId;  // head the client trained from
};

struct Block {
    BlockId id = kGenesisId;
    std::optional<BlockId> parent;
    std::uint32_t depth = 0;
    MinerId miner = 0;
    std::vector<TxId> txs;
    double mine_time = 0.0;  // t^(2) for every tx it carries
    double size_bits = 0.0;
};

/// Append-only block storage shared by every ledger view. Ids are dense and
/// start at the genesis block (id 0, depth 0).
class BlockStore {
public:
    explicit BlockStore(const ChainParams& params);

    const Block& genesis() const { return blocks_.front(); }
    const Block& get(BlockId id) const;
    bool contains(BlockId id) const noexcept { return id < blocks_.size(); }
    std::size_t size() const noexcept { return blocks_.size(); }
    BlockId next_id() const noexcept { return blocks_.size(); }

    /// Stores `block` under the next id (overwriting block.id) and returns it.
    const Block& add(Block block);

    /// Root-to-tip path, genesis first.
    std::vector<BlockId> path_to(BlockId tip) const;

    auto begin() const { return blocks_.begin(); }
    auto end() const { return blocks_.end(); }

private:
    std::deque<Block> blocks_;
};

class TxStore {
public:
    const Transaction& get(TxId id) const;
    bool contains(TxId id) const noexcept { return id < txs_.size(); }
    std::size_t size() const noexcept { return txs_.size(); }

    /// Stores `tx` under the next id (overwriting tx.id) and returns it.
    const Transaction& add(Transaction tx);

    auto begin() const { return txs_.begin(); }
    auto end() const { return txs_.end(); }

private:
    std::deque<Transaction> txs_;
};

struct ChainUpdate {
    bool accepted = false;
    bool head_changed = false;
    BlockId old_head = kGenesisId;
    BlockId new_head = kGenesisId;
    std::vector<BlockId> abandoned;  // old branch above the fork point, tip first
    std::vector<BlockId> adopted;    // new branch above the fork point, fork point first
};

/// One miner's view of the block tree. The head is always a deepest known
/// block; at equal depth the first-seen block keeps the head.
class LedgerView {
public:
    LedgerView(MinerId owner, const BlockStore& store);

    MinerId owner() const noexcept { return owner_; }
    BlockId head() const noexcept { return head_; }
    std::uint32_t head_depth() const;
    bool knows(BlockId id) const noexcept { return known_.contains(id); }
    std::size_t known_count() const noexcept { return known_.size(); }
    const std::unordered_set<BlockId>& known() const noexcept { return known_; }

    /// Inserts a block whose parent is already known. A duplicate is a no-op
    /// with accepted=false; an unknown parent throws std::logic_error.
    ChainUpdate append(const Block& block);

    bool head_chain_contains(TxId tx) const noexcept { return head_txs_.contains(tx); }
    std::vector<BlockId> head_chain() const { return store_->path_to(head_); }

private:
    MinerId owner_;
    const BlockStore* store_;
    std::unordered_set<BlockId> known_;
    BlockId head_ = kGenesisId;
    std::unordered_set<TxId> head_txs_;
};

/// Arrival-ordered pending set. Every tx the owner has ever seen keeps its
/// first-arrival ordinal, so re-inserted txs return to their original slot.
class Mempool {
public:
    explicit Mempool(MinerId owner = 0) : owner_(owner) {}

    MinerId owner() const noexcept { return owner_; }
    std::size_t size() const noexcept { return pending_.size(); }
    bool empty() const noexcept { return pending_.empty(); }
    bool contains(TxId tx) const;
    bool seen(TxId tx) const noexcept { return ordinal_.contains(tx); }

    /// Records the first arrival of `tx` without making it pending.
    void note_seen(TxId tx);

    /// Adds `tx` to pending. Returns false if it already was.
    bool insert(TxId tx);

    void erase(TxId tx);

    /// Removes and returns up to `n` of the oldest pending txs.
    std::vector<TxId> take(std::size_t n);

    std::vector<TxId> pending() const;

private:
    MinerId owner_;
    std::uint64_t next_ordinal_ = 0;
    std::unordered_map<TxId, std::uint64_t> ordinal_;
    std::map<std::uint64_t, TxId> pending_;
};

/// Mines a block on `view.head()` with the oldest min(S^B, |pending|) txs,
/// stores it, and appends it to the miner's own view.
const Block& make_block(BlockStore& store, LedgerView& view, Mempool& mempool,
                        const ChainParams& params, double now);

/// Restores the mempool invariant after a head change: txs on the adopted
/// branch leave pending, txs stranded on the abandoned branch come back.
void prune_mempool(Mempool& mempool, const ChainUpdate& update, const LedgerView& view,
                   const BlockStore& store);

/// True if `a` wins over `b` as main-chain tip: deeper, then earlier
/// mine_time, then smaller id.
bool better_tip(const Block& a, const Block& b) noexcept;

/// Root-to-tip path of the best tip across the union of `views`.
std::vector<BlockId> main_chain(std::span<const LedgerView> views, const BlockStore& store);

/// Same, over every block in the store.
std::vector<BlockId> main_chain(const BlockStore& store);

/// Fraction of mined (non-genesis) blocks that are not on `main`.
double stale_rate(const BlockStore& store, std::span<const BlockId> main);

}  // namespace flchain::chain
