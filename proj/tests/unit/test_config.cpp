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

#include "flchain/config.hpp"

#include "flchain/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <regex>
#include <set>

namespace flchain::exp {
namespace {

namespace fs = std::filesystem;

const fs::path kConfigs = FLCHAIN_CONFIG_DIR;

// Key named by the ConfigError thrown for `yaml`, or "" if none.
std::string rejected_key(const std::string& yaml) {
    try {
        validate(parse_config(yaml));
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

TEST(Config, EmptyDocumentGivesDefaults) {
    const auto c = parse_config("");
    EXPECT_EQ(c, ExperimentConfig{});
    EXPECT_NO_THROW(validate(c));
    EXPECT_EQ(c.chain.block_size, 10u);
    EXPECT_EQ(c.chain.block_interval, 15.0);
    EXPECT_EQ(c.chain.miners, 10u);
    EXPECT_EQ(c.fl.clients, 50u);
    EXPECT_EQ(c.fl.layers, (std::vector<std::size_t>{784, 200, 200, 10}));
}

TEST(Config, ParsesEveryField) {
    const auto c = parse_config(R"(
seed: 9
chain_only: true
chain: {block_size: 5, block_interval: 60, miners: 4, p2p_capacity_mbps: inf,
        client_capacity_mbps: 2, tx_kbits: 100, header_kbits: 10, blocks: 7,
        verification_delay: 0.5}
fl: {clients: 3, xi_mips: [10, 20], epochs: 1, batch_size: 8, learning_rate: 0.1,
     layers: [16, 4], work_per_update: 1e6, empty_block: wait}
data: {source: synthetic, test_fraction: 0.5,
       synthetic: {train_size: 100, test_size: 20, center_spread: 0.1, noise: 0.2}}
output: {dir: out, trace: true, weights_snapshots: true}
)");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_TRUE(c.chain_only);
    EXPECT_EQ(c.chain.block_size, 5u);
    EXPECT_TRUE(std::isinf(c.chain.p2p_capacity_mbps));
    EXPECT_EQ(c.chain.verification_delay, 0.5);
    EXPECT_EQ(c.fl.xi_mips, (std::vector<double>{10, 20}));
    EXPECT_EQ(c.fl.empty_block, sim::EmptyBlockPolicy::Wait);
    EXPECT_EQ(c.data.synthetic.train_size, 100u);
    EXPECT_EQ(c.data.synthetic.noise, 0.2);
    EXPECT_TRUE(c.output.trace);
    EXPECT_TRUE(c.output.weights_snapshots);
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, InfinitySpellings) {
    for (const char* s : {"inf", "infinity", ".inf"}) {
        const auto c = parse_config(std::string("chain: {p2p_capacity_mbps: ") + s + "}");
        EXPECT_TRUE(std::isinf(c.chain.p2p_capacity_mbps)) << s;
    }
}

TEST(Config, ErrorsNameTheKey) {
    EXPECT_EQ(rejected_key("chain: {block_size: 0}"), "chain.block_size");
    EXPECT_EQ(rejected_key("chain: {block_size: -3}"), "chain.block_size");
    EXPECT_EQ(rejected_key("chain: {block_interval: 0}"), "chain.block_interval");
    EXPECT_EQ(rejected_key("chain: {miners: 0}"), "chain.miners");
    EXPECT_EQ(rejected_key("chain: {blocks: 0}"), "chain.blocks");
    EXPECT_EQ(rejected_key("chain: {client_capacity_mbps: inf}"), "chain.client_capacity_mbps");
    EXPECT_EQ(rejected_key("chain: {p2p_capacity_mbps: 0}"), "chain.p2p_capacity_mbps");
    EXPECT_EQ(rejected_key("chain: {verification_delay: -1}"), "chain.verification_delay");
    EXPECT_EQ(rejected_key("chain: {blok_size: 10}"), "chain.blok_size");
    EXPECT_EQ(rejected_key("fl: {clients: 0}"), "fl.clients");
    EXPECT_EQ(rejected_key("fl: {xi_mips: [5, 0]}"), "fl.xi_mips");
    EXPECT_EQ(rejected_key("fl: {learning_rate: 0}"), "fl.learning_rate");
    EXPECT_EQ(rejected_key("fl: {empty_block: sometimes}"), "fl.empty_block");
    EXPECT_EQ(rejected_key("data: {test_fraction: 1}"), "data.test_fraction");
    EXPECT_EQ(rejected_key("data: {source: csv}"), "data.source");
    EXPECT_EQ(rejected_key("data: {source: idx}"), "data.train_images");
    EXPECT_EQ(rejected_key("fl: {clients: 20}\ndata: {synthetic: {train_size: 10}}"), "fl.clients");
    EXPECT_EQ(rejected_key("network: {}"), "network");
    EXPECT_EQ(rejected_key("chain: {block_size: ten}"), "chain.block_size");
    EXPECT_EQ(rejected_key("chain: [1, 2]"), "chain");
}

TEST(Config, ChainOnlyNeedsNoData) {
    EXPECT_EQ(rejected_key("chain_only: true\ndata: {source: idx}"), "");
}

TEST(Config, MalformedYamlIsAConfigError) {
    EXPECT_THROW(parse_config("chain: {block_size: [1"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
}

TEST(Config, YamlRoundTrip) {
    ExperimentConfig c;
    c.seed = 42;
    c.chain_only = false;
    c.chain.block_size = 20;
    c.chain.block_interval = 5.5;
    c.chain.p2p_capacity_mbps = std::numeric_limits<double>::infinity();
    c.chain.verification_delay = 0.125;
    c.fl.xi_mips = {4.744, 83.0};
    c.fl.empty_block = sim::EmptyBlockPolicy::Wait;
    c.fl.learning_rate = 0.1 + 0.2;  // not exactly representable in short decimal
    c.data.source = DataSource::Idx;
    c.data.train_images = "/a/train-images";
    c.data.train_labels = "/a/train-labels";
    c.data.test_images = "/a/test-images";
    c.data.test_labels = "/a/test-labels";
    c.data.train_limit = 1234;
    c.output.dir = "somewhere";
    c.output.trace = true;
    const auto back = parse_config(to_yaml(c));
    EXPECT_EQ(back, c);
    EXPECT_EQ(to_yaml(back), to_yaml(c));
    EXPECT_EQ(parse_config(to_yaml(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, HashIgnoresSeedAndOutput) {
    ExperimentConfig a;
    ExperimentConfig b = a;
    b.seed = 77;
    b.output.dir = "elsewhere";
    b.output.trace = true;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.chain.block_size = 11;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_TRUE(std::regex_match(run_id(a), std::regex("[0-9a-f]{16}-s1")));
    EXPECT_NE(run_id(a), run_id(ExperimentConfig{.seed = 2}));
}

TEST(Config, SimParamsUseBitsAndSeconds) {
    auto c = parse_config("chain: {p2p_capacity_mbps: 10, client_capacity_mbps: 1}\nseed: 5");
    const auto p = to_sim_params(c);
    EXPECT_EQ(p.p2p_capacity, 10e6);
    EXPECT_EQ(p.client_capacity, 1e6);
    EXPECT_DOUBLE_EQ(p.chain.tx_bits, 796840.0);
    EXPECT_DOUBLE_EQ(p.chain.header_bits, 20000.0);
    EXPECT_EQ(p.chain.max_block_txs, 10u);
    EXPECT_EQ(p.target_blocks, 50u);
    EXPECT_EQ(p.seed, 5u);
    EXPECT_TRUE(std::isinf(to_sim_params(parse_config("chain: {p2p_capacity_mbps: inf}")).p2p_capacity));
}

TEST(Config, RelativeDataPathsResolveAgainstTheFile) {
    const auto c = load_config(kConfigs / "mnist_baseline.yaml");
    EXPECT_EQ(c.data.source, DataSource::Idx);
    EXPECT_TRUE(fs::path(c.data.train_images).is_absolute());
    EXPECT_TRUE(fs::exists(c.data.train_images)) << c.data.train_images;
    EXPECT_TRUE(fs::exists(c.data.test_labels)) << c.data.test_labels;
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, ShippedConfigsValidate) {
    for (const auto& entry : fs::directory_iterator(kConfigs)) {
        const auto name = entry.path().filename().string();
        if (name.find("sweep") != std::string::npos || name == "chain_only_forks.yaml") {
            EXPECT_NO_THROW(expand_sweep(load_sweep(entry.path()))) << name;
        } else {
            EXPECT_NO_THROW(validate(load_config(entry.path()))) << name;
        }
    }
}

TEST(Sweep, CartesianProductWithDistinctSeeds) {
    const auto spec = parse_sweep(R"(
config: {chain_only: true}
grid:
  chain.block_interval: [5, 15, 60]
  chain.block_size: [5, 10, 20]
  fl.clients: [10, 50, 100]
replications: 1
seed: 3
)");
    const auto points = expand_sweep(spec);
    ASSERT_EQ(points.size(), 27u);
    std::set<std::uint64_t> seeds;
    std::set<std::tuple<double, std::size_t, std::uint32_t>> cells;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& pt = points[i];
        EXPECT_EQ(pt.index, i);
        EXPECT_EQ(pt.config.seed, derive_seed(3, i));
        seeds.insert(pt.config.seed);
        cells.insert({pt.config.chain.block_interval, pt.config.chain.block_size, pt.config.fl.clients});
        EXPECT_TRUE(pt.config.chain_only);
    }
    EXPECT_EQ(seeds.size(), 27u);
    EXPECT_EQ(cells.size(), 27u);
    // Last key varies fastest.
    EXPECT_EQ(points[1].config.fl.clients, 50u);
    EXPECT_EQ(points[1].config.chain.block_size, 5u);
    EXPECT_EQ(points[3].config.chain.block_size, 10u);
    EXPECT_EQ(points[9].config.chain.block_interval, 15.0);
    EXPECT_EQ(points[1].overrides,
              (std::vector<std::pair<std::string, std::string>>{
                  {"chain.block_interval", "5"}, {"chain.block_size", "5"}, {"fl.clients", "50"}}));
}

TEST(Sweep, ReplicationsAreInnermost) {
    const auto spec = parse_sweep(R"(
config: {chain_only: true}
grid:
  chain.block_interval: [5, 15, 60]
  chain.block_size: [5, 10, 20]
  fl.clients: [10, 50, 100]
replications: 3
)");
    const auto points = expand_sweep(spec);
    ASSERT_EQ(points.size(), 81u);
    std::set<std::uint64_t> seeds;
    for (const auto& pt : points) seeds.insert(pt.config.seed);
    EXPECT_EQ(seeds.size(), 81u);
    for (std::size_t r = 0; r < 3; ++r) {
        EXPECT_EQ(points[r].replication, r);
        EXPECT_EQ(points[r].overrides, points[0].overrides);
    }
    EXPECT_NE(points[3].overrides, points[0].overrides);
}

TEST(Sweep, ShippedForkGridMergesBase) {
    const auto points = expand_sweep(load_sweep(kConfigs / "chain_only_forks.yaml"));
    ASSERT_EQ(points.size(), 45u);
    for (const auto& pt : points) {
        EXPECT_TRUE(pt.config.chain_only);
        EXPECT_EQ(pt.config.chain.p2p_capacity_mbps, 10.0);
        EXPECT_EQ(pt.config.chain.blocks, 1000u);
    }
    const auto clients = expand_sweep(load_sweep(kConfigs / "mnist_clients_sweep.yaml"));
    ASSERT_EQ(clients.size(), 9u);
    EXPECT_TRUE(std::isinf(clients[0].config.chain.p2p_capacity_mbps));
    EXPECT_EQ(clients[8].config.fl.clients, 100u);
    EXPECT_TRUE(fs::exists(clients[0].config.data.train_images));
}

TEST(Sweep, RejectsBadGrids) {
    EXPECT_THROW(expand_sweep(parse_sweep("grid: {chain.blok_size: [1, 2]}")), ConfigError);
    EXPECT_THROW(expand_sweep(parse_sweep("grid: {chain.block_size: [10, 0]}")), ConfigError);
    EXPECT_THROW(parse_sweep("grid: {chain.block_size: []}"), ConfigError);
    EXPECT_THROW(parse_sweep("replications: 0"), ConfigError);
    EXPECT_THROW(parse_sweep("grids: {}"), ConfigError);
}

}  // namespace
}  // namespace flchain::exp
