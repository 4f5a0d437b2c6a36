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

#include "flchain/data.hpp"
#include "flchain/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flchain::exp {

/// A configuration problem, tied to the offending (dotted) key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class DataSource { Synthetic, Idx };

/// Every knob of one run. Defaults are the documented baseline grid point;
/// see docs/config.md for the file schema.
struct ExperimentConfig {
    struct Chain {
        std::size_t block_size = 10;         // S^B, transactions
        double block_interval = 15.0;        // BI, seconds
        std::uint32_t miners = 10;           // M
        double p2p_capacity_mbps = 10.0;     // C_p2p, may be infinite
        double client_capacity_mbps = 1.0;   // C_n
        double tx_kbits = 796.84;            // T_l
        double header_kbits = 20.0;          // T_h
        std::uint32_t blocks = 50;           // NB
        double verification_delay = 0.0;     // seconds per received block

        bool operator==(const Chain&) const = default;
    } chain;

    struct Fl {
        std::uint32_t clients = 50;               // N
        std::vector<double> xi_mips{83.0};        // one value, or classes assigned round-robin
        int epochs = 3;                           // E
        std::size_t batch_size = 20;              // B
        double learning_rate = 0.01;              // eta
        std::vector<std::size_t> layers{784, 200, 200, 10};
        double work_per_update = 2.8464e8;        // instructions per local update
        sim::EmptyBlockPolicy empty_block = sim::EmptyBlockPolicy::Retrain;

        bool operator==(const Fl&) const = default;
    } fl;

    struct Data {
        DataSource source = DataSource::Synthetic;
        std::string train_images;
        std::string train_labels;
        std::string test_images;
        std::string test_labels;
        std::optional<std::size_t> train_limit;
        std::optional<std::size_t> test_limit;
        double test_fraction = 0.3;
        fl::SyntheticSpec synthetic;

        bool operator==(const Data&) const = default;
    } data;

    std::uint64_t seed = 1;
    bool chain_only = false;

    struct Output {
        std::string dir = "runs";
        bool trace = false;
        bool weights_snapshots = false;

        bool operator==(const Output&) const = default;
    } output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses YAML text. Missing keys take defaults; unknown keys, bad types and
/// out-of-range values raise ConfigError. A top-level `manifest` section is
/// accepted and ignored so run manifests load back as configs.
ExperimentConfig parse_config(std::string_view yaml_text);

/// Reads and parses a file. Relative dataset paths resolve against the
/// file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError naming the first invalid key.
void validate(const ExperimentConfig& config);

/// Canonical YAML form, loadable by parse_config.
std::string to_yaml(const ExperimentConfig& config);

/// Hash of everything that shapes the simulation (not seed or output).
std::uint64_t config_hash(const ExperimentConfig& config);

/// "<16 hex digits of config_hash>-s<seed>".
std::string run_id(const ExperimentConfig& config);

sim::Params to_sim_params(const ExperimentConfig& config);

struct SweepSpec {
    std::string base_yaml;  // resolved base configuration
    std::vector<std::pair<std::string, std::vector<std::string>>> grid;  // dotted key -> YAML values
    std::size_t replications = 1;
    std::uint64_t seed = 1;
    std::filesystem::path base_dir;  // for relative paths in the base config
};

struct SweepPoint {
    std::size_t index = 0;        // position in grid-major, replication-minor order
    std::size_t replication = 0;
    std::vector<std::pair<std::string, std::string>> overrides;
    ExperimentConfig config;
};

/// Sweep file: optional `base` (config path, relative to the sweep file),
/// optional inline `config` overrides, `grid` of dotted keys to value lists,
/// `replications`, and `seed`.
SweepSpec load_sweep(const std::filesystem::path& path);
SweepSpec parse_sweep(std::string_view yaml_text, const std::filesystem::path& base_dir = {});

/// Cartesian product x replications, each with seed derive_seed(spec.seed, index).
std::vector<SweepPoint> expand_sweep(const SweepSpec& spec);

}  // namespace flchain::exp
