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
#include "flchain/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

namespace flchain::chain {
namespace {

ChainParams params(std::size_t sb = 10) { return {sb, 796'840.0, 20'000.0}; }

// Adds a block by hand on `parent` carrying `txs`.
const Block& add(BlockStore& store, BlockId parent, std::vector<TxId> txs, double t,
                 MinerId miner = 0) {
    Block b;
    b.parent = parent;
    b.depth = store.get(parent).depth + 1;
    b.miner = miner;
    b.txs = std::move(txs);
    b.mine_time = t;
    return store.add(std::move(b));
}

std::uint32_t max_depth(const LedgerView& view, const BlockStore& store) {
    std::uint32_t d = 0;
    for (BlockId id : view.known()) d = std::max(d, store.get(id).depth);
    return d;
}

// Longest-head, tree, and mempool invariants for one miner.
void expect_invariants(const LedgerView& view, const Mempool& pool, const BlockStore& store) {
    EXPECT_EQ(view.head_depth(), max_depth(view, store));
    for (BlockId id : view.known()) {
        const Block& b = store.get(id);
        if (id == kGenesisId) {
            EXPECT_FALSE(b.parent);
            EXPECT_EQ(b.depth, 0u);
            continue;
        }
        ASSERT_TRUE(b.parent);
        EXPECT_TRUE(view.knows(*b.parent));
        EXPECT_EQ(b.depth, store.get(*b.parent).depth + 1);
    }
    std::set<TxId> on_chain;
    for (BlockId id : view.head_chain()) {
        for (TxId tx : store.get(id).txs) {
            EXPECT_TRUE(on_chain.insert(tx).second) << "tx " << tx << " twice on head chain";
            EXPECT_TRUE(view.head_chain_contains(tx));
        }
    }
    const auto pending = pool.pending();
    EXPECT_EQ(std::set<TxId>(pending.begin(), pending.end()).size(), pending.size());
    for (TxId tx : pending) EXPECT_FALSE(on_chain.contains(tx)) << "tx " << tx << " pending and on chain";
}

TEST(BlockSize, HeaderPlusTransactions) {
    const auto p = params();
    EXPECT_DOUBLE_EQ(block_size_bits(p, 0), 20'000.0);
    EXPECT_NEAR(block_size_bits(p, 1), 816'840.0, 1e-6);
    EXPECT_NEAR(block_size_bits(p, 5), 4'004'200.0, 1e-6);
    EXPECT_NEAR(block_size_bits(p, 20), 15'956'800.0, 1e-6);
}

TEST(BlockStore, GenesisAndValidation) {
    BlockStore store(params());
    EXPECT_EQ(store.size(), 1u);
    EXPECT_EQ(store.genesis().depth, 0u);
    EXPECT_FALSE(store.genesis().parent);
    EXPECT_DOUBLE_EQ(store.genesis().size_bits, 20'000.0);
    EXPECT_THROW(store.get(7), std::logic_error);

    Block orphan;
    orphan.parent = 42;
    orphan.depth = 43;
    EXPECT_THROW(store.add(orphan), std::logic_error);
    Block wrong_depth;
    wrong_depth.parent = kGenesisId;
    wrong_depth.depth = 2;
    EXPECT_THROW(store.add(wrong_depth), std::logic_error);

    const Block& b = add(store, kGenesisId, {}, 1.0);
    EXPECT_EQ(b.id, 1u);
    EXPECT_EQ(store.path_to(b.id), (std::vector<BlockId>{0, 1}));
}

TEST(MakeBlock, TakesOldestUpToBlockSize) {
    const auto p = params(5);
    BlockStore store(p);
    LedgerView view(0, store);
    Mempool pool(0);
    for (TxId tx = 0; tx < 7; ++tx) pool.insert(tx);
    const Block& b = make_block(store, view, pool, p, 3.0);
    EXPECT_EQ(b.txs, (std::vector<TxId>{0, 1, 2, 3, 4}));
    EXPECT_EQ(pool.pending(), (std::vector<TxId>{5, 6}));
    EXPECT_EQ(b.depth, 1u);
    EXPECT_EQ(*b.parent, kGenesisId);
    EXPECT_DOUBLE_EQ(b.mine_time, 3.0);
    EXPECT_EQ(view.head(), b.id);
    EXPECT_NEAR(b.size_bits, 4'004'200.0, 1e-6);
    expect_invariants(view, pool, store);
}

TEST(MakeBlock, EmptyMempoolGivesHeaderOnlyBlock) {
    const auto p = params();
    BlockStore store(p);
    LedgerView view(0, store);
    Mempool pool(0);
    const Block& b = make_block(store, view, pool, p, 1.0);
    EXPECT_TRUE(b.txs.empty());
    EXPECT_DOUBLE_EQ(b.size_bits, 20'000.0);
}

TEST(MakeBlock, SingleTxInLargeBlock) {
    const auto p = params(20);
    BlockStore store(p);
    LedgerView view(0, store);
    Mempool pool(0);
    pool.insert(9);
    const Block& b = make_block(store, view, pool, p, 1.0);
    EXPECT_EQ(b.txs, std::vector<TxId>{9});
    EXPECT_NEAR(b.size_bits, 816'840.0, 1e-6);
}

TEST(LedgerView, DeeperBlockMovesHead) {
    BlockStore store(params());
    LedgerView view(0, store);
    BlockId tip = kGenesisId;
    for (int i = 0; i < 4; ++i) {
        tip = add(store, tip, {}, i).id;
        view.append(store.get(tip));
    }
    EXPECT_EQ(view.head_depth(), 4u);
    const Block& b5 = add(store, tip, {}, 10.0);
    const auto update = view.append(b5);
    EXPECT_TRUE(update.accepted);
    EXPECT_TRUE(update.head_changed);
    EXPECT_EQ(update.old_head, tip);
    EXPECT_EQ(update.new_head, b5.id);
    EXPECT_TRUE(update.abandoned.empty());
    EXPECT_EQ(update.adopted, std::vector<BlockId>{b5.id});
}

TEST(LedgerView, TieKeepsFirstSeenThenReorgs) {
    BlockStore store(params());
    LedgerView view(0, store);
    Mempool pool(0);
    BlockId tip = kGenesisId;
    for (int i = 0; i < 4; ++i) {
        tip = add(store, tip, {}, i).id;
        view.append(store.get(tip));
    }
    const Block& a5 = add(store, tip, {100}, 10.0, 1);
    const Block& b5 = add(store, tip, {101}, 10.5, 2);
    pool.insert(100);
    pool.insert(101);
    prune_mempool(pool, view.append(a5), view, store);
    EXPECT_EQ(view.head(), a5.id);

    const auto tie = view.append(b5);
    EXPECT_TRUE(tie.accepted);
    EXPECT_FALSE(tie.head_changed);
    EXPECT_EQ(view.head(), a5.id);
    EXPECT_TRUE(view.knows(b5.id));
    prune_mempool(pool, tie, view, store);
    EXPECT_EQ(pool.pending(), std::vector<TxId>{101});
    expect_invariants(view, pool, store);

    const Block& b6 = add(store, b5.id, {}, 12.0, 2);
    const auto reorg = view.append(b6);
    EXPECT_TRUE(reorg.head_changed);
    EXPECT_EQ(reorg.abandoned, std::vector<BlockId>{a5.id});
    EXPECT_EQ(reorg.adopted, (std::vector<BlockId>{b5.id, b6.id}));
    prune_mempool(pool, reorg, view, store);
    // 100 was stranded on the abandoned branch, 101 is now on chain.
    EXPECT_EQ(pool.pending(), std::vector<TxId>{100});
    EXPECT_TRUE(view.head_chain_contains(101));
    EXPECT_FALSE(view.head_chain_contains(100));
    expect_invariants(view, pool, store);
}

TEST(LedgerView, DuplicateIsNoOpAndUnknownParentThrows) {
    BlockStore store(params());
    LedgerView view(0, store);
    const Block& b1 = add(store, kGenesisId, {}, 1.0);
    const Block& b2 = add(store, b1.id, {}, 2.0);
    EXPECT_THROW(view.append(b2), std::logic_error);
    EXPECT_TRUE(view.append(b1).accepted);
    const auto dup = view.append(b1);
    EXPECT_FALSE(dup.accepted);
    EXPECT_FALSE(dup.head_changed);
    EXPECT_EQ(view.known_count(), 2u);
}

TEST(PruneMempool, ReorgRestoresOriginalArrivalOrder) {
    BlockStore store(params());
    LedgerView view(0, store);
    Mempool pool(0);
    for (TxId tx : {1, 2, 3, 4, 5}) pool.insert(tx);
    // Own branch takes 1, 3, 5 in two blocks.
    const Block& a1 = add(store, kGenesisId, {1, 3}, 1.0);
    const Block& a2 = add(store, a1.id, {5}, 2.0);
    prune_mempool(pool, view.append(a1), view, store);
    prune_mempool(pool, view.append(a2), view, store);
    EXPECT_EQ(pool.pending(), (std::vector<TxId>{2, 4}));

    // Competing branch carries 3 and a tx this miner never saw.
    const Block& b1 = add(store, kGenesisId, {3, 9}, 1.5);
    const Block& b2 = add(store, b1.id, {}, 2.5);
    const Block& b3 = add(store, b2.id, {}, 3.5);
    prune_mempool(pool, view.append(b1), view, store);
    prune_mempool(pool, view.append(b2), view, store);
    EXPECT_EQ(view.head(), a2.id);  // tie at depth 2 keeps own branch
    prune_mempool(pool, view.append(b3), view, store);
    EXPECT_EQ(view.head(), b3.id);
    EXPECT_EQ(pool.pending(), (std::vector<TxId>{1, 2, 4, 5}));
    expect_invariants(view, pool, store);
}

TEST(PruneMempool, NoHeadChangeLeavesPoolAlone) {
    BlockStore store(params());
    LedgerView view(0, store);
    Mempool pool(0);
    pool.insert(4);
    pool.insert(5);
    ChainUpdate update;
    update.accepted = true;
    update.adopted = {kGenesisId};
    prune_mempool(pool, update, view, store);
    EXPECT_EQ(pool.pending(), (std::vector<TxId>{4, 5}));
}

TEST(Mempool, DedupAndOrdinals) {
    Mempool pool(3);
    EXPECT_TRUE(pool.insert(10));
    EXPECT_FALSE(pool.insert(10));
    pool.insert(11);
    pool.insert(12);
    EXPECT_EQ(pool.size(), 3u);
    EXPECT_EQ(pool.take(2), (std::vector<TxId>{10, 11}));
    pool.insert(10);  // back to its original slot, ahead of 12
    EXPECT_EQ(pool.pending(), (std::vector<TxId>{10, 12}));
    pool.note_seen(20);
    EXPECT_TRUE(pool.seen(20));
    EXPECT_FALSE(pool.contains(20));
    pool.erase(12);
    EXPECT_FALSE(pool.contains(12));
    EXPECT_TRUE(pool.seen(12));
    EXPECT_EQ(pool.take(5), std::vector<TxId>{10});
    EXPECT_TRUE(pool.empty());
}

TEST(MainChain, LinearChain) {
    BlockStore store(params());
    LedgerView view(0, store);
    BlockId tip = kGenesisId;
    for (int i = 0; i < 3; ++i) {
        tip = add(store, tip, {}, i + 1.0).id;
        view.append(store.get(tip));
    }
    const std::vector<LedgerView> views{view};
    EXPECT_EQ(main_chain(views, store), (std::vector<BlockId>{0, 1, 2, 3}));
    EXPECT_EQ(main_chain(store), (std::vector<BlockId>{0, 1, 2, 3}));
}

TEST(MainChain, LongestBranchWins) {
    BlockStore store(params());
    LedgerView short_view(0, store);
    LedgerView long_view(1, store);
    BlockId s = kGenesisId;
    BlockId l = kGenesisId;
    for (int i = 0; i < 5; ++i) {
        if (i < 3) {
            s = add(store, s, {}, i + 0.5, 0).id;
            short_view.append(store.get(s));
        }
        l = add(store, l, {}, i + 0.7, 1).id;
        long_view.append(store.get(l));
    }
    const std::vector<LedgerView> views{short_view, long_view};
    const auto main = main_chain(views, store);
    EXPECT_EQ(main.size(), 6u);
    EXPECT_EQ(main.back(), l);
}

TEST(MainChain, EqualDepthTieGoesToEarlierMineTime) {
    // Oracle: tips at depth 5 mined at 10 and 12; the 10 tip wins whichever
    // branch was stored first.
    for (bool later_first : {true, false}) {
        BlockStore store(params());
        BlockId fork = kGenesisId;
        for (int i = 0; i < 4; ++i) fork = add(store, fork, {}, i).id;
        BlockId early;
        BlockId late;
        if (later_first) {
            late = add(store, fork, {}, 12.0, 1).id;
            early = add(store, fork, {}, 10.0, 2).id;
        } else {
            early = add(store, fork, {}, 10.0, 2).id;
            late = add(store, fork, {}, 12.0, 1).id;
        }
        EXPECT_EQ(main_chain(store).back(), early);
        EXPECT_NE(main_chain(store).back(), late);
    }
}

TEST(MainChain, FullTieGoesToSmallerId) {
    BlockStore store(params());
    const Block& a = add(store, kGenesisId, {}, 4.0);
    add(store, kGenesisId, {}, 4.0);
    EXPECT_EQ(main_chain(store).back(), a.id);
}

TEST(StaleRate, Definition) {
    BlockStore store(params());
    EXPECT_DOUBLE_EQ(stale_rate(store, main_chain(store)), 0.0);
    BlockId tip = kGenesisId;
    for (int i = 0; i < 50; ++i) tip = add(store, tip, {}, i + 1.0).id;
    EXPECT_DOUBLE_EQ(stale_rate(store, main_chain(store)), 0.0);
    add(store, 10, {}, 10.5);
    add(store, 20, {}, 20.5);
    const auto main = main_chain(store);
    EXPECT_EQ(main.size(), 51u);
    EXPECT_DOUBLE_EQ(stale_rate(store, main), 2.0 / 52.0);
    EXPECT_NEAR(stale_rate(store, main), 0.0385, 5e-5);
}

// Random scripted arrival orders over a fixed block tree: every view must
// end up with the longest-head, tree and mempool invariants regardless of
// order, and all views converge once every block is delivered.
TEST(LedgerView, ArbitraryArrivalOrdersConverge) {
    BlockStore store(params(3));
    RngStream rng(5, "tree");
    std::vector<BlockId> ids{kGenesisId};
    TxId next_tx = 0;
    for (int i = 0; i < 60; ++i) {
        const BlockId parent = ids[rng.uniform_index(ids.size())];
        std::vector<TxId> txs;
        const auto k = rng.uniform_index(4);
        for (std::uint64_t j = 0; j < k; ++j) txs.push_back(next_tx++);
        ids.push_back(add(store, parent, txs, i + 1.0).id);
    }
    std::vector<BlockId> heads;
    for (int trial = 0; trial < 20; ++trial) {
        RngStream order_rng(trial, "order");
        std::vector<BlockId> order(ids.begin() + 1, ids.end());
        order_rng.shuffle(std::span<BlockId>(order));
        LedgerView view(0, store);
        Mempool pool(0);
        for (TxId tx = 0; tx < next_tx; ++tx) pool.insert(tx);
        std::vector<BlockId> waiting = order;
        while (!waiting.empty()) {
            for (auto it = waiting.begin(); it != waiting.end();) {
                const Block& b = store.get(*it);
                if (view.knows(*b.parent)) {
                    prune_mempool(pool, view.append(b), view, store);
                    expect_invariants(view, pool, store);
                    it = waiting.erase(it);
                } else {
                    ++it;
                }
            }
        }
        EXPECT_EQ(view.known_count(), ids.size());
        heads.push_back(store.get(view.head()).depth);
        // Every tx is either pending or on the head chain, never both.
        for (TxId tx = 0; tx < next_tx; ++tx) {
            EXPECT_NE(pool.contains(tx), view.head_chain_contains(tx)) << "tx " << tx;
        }
    }
    for (auto d : heads) EXPECT_EQ(d, heads.front());
}

}  // namespace
}  // namespace flchain::chain
