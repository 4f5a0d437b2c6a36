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

#include "flchain/config.hpp"
#include "flchain/sim.hpp"

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace flchain::exp {

/// Failure to write run outputs.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Train, test and validation sets for `config`: synthetic blobs from the
/// "synthetic-data" stream or IDX files, then the seeded test/validation
/// split. Returns null in chain-only mode.
std::shared_ptr<const sim::Datasets> load_datasets(const ExperimentConfig& config);

struct RunResult {
    std::string run_id;
    std::filesystem::path dir;
    bool reached_target = false;
    std::size_t blocks_mined = 0;  // genesis excluded
    std::size_t transactions = 0;
    double sim_time = 0.0;
    double wall_seconds = 0.0;
    sim::MetricsLog log;
};

/// Runs one configuration and writes its directory under `out_root`:
/// metrics.csv, chain.jsonl, txs.csv, aob.csv, client_loss.csv,
/// run_summary.json, manifest.yaml, optional trace.jsonl and weights/, and
/// finally a COMPLETE marker. `data` may be passed to share datasets
/// across runs; it must match the config.
RunResult run(const ExperimentConfig& config, const std::filesystem::path& out_root,
              std::shared_ptr<const sim::Datasets> data = nullptr);

struct SweepOutcome {
    std::size_t runs = 0;
    std::size_t failures = 0;
    std::filesystem::path summary;  // summary.csv
};

/// Runs every point of the sweep, continuing past failed runs, and writes
/// one summary.csv row per point.
SweepOutcome run_sweep(const SweepSpec& spec, const std::filesystem::path& out_root);

}  // namespace flchain::exp
