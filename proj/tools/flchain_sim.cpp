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

// flchain-sim: run one configuration or a sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 some sweep
// runs failed, 1 anything else.

#include "flchain/config.hpp"
#include "flchain/data.hpp"
#include "flchain/experiment.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitSweepPartial = 4;

}  // namespace

int main(int argc, char** argv) {
    using namespace flchain;

    CLI::App app{"Discrete-event simulator of blockchain-based federated learning"};
    std::string config_path;
    std::string sweep_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool trace = false;
    bool synthetic = false;

    auto* config_opt = app.add_option("--config", config_path, "Experiment config (YAML)");
    auto* sweep_opt = app.add_option("--sweep", sweep_path, "Sweep file (YAML)");
    config_opt->excludes(sweep_opt);
    app.add_option("--seed", seed, "Override the run seed, or the sweep's global seed");
    app.add_option("--out", out_dir, "Output root directory");
    app.add_flag("--trace", trace, "Write trace.jsonl with every dispatched event");
    app.add_flag("--synthetic", synthetic, "Use synthetic data instead of IDX files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (!sweep_path.empty()) {
            auto spec = exp::load_sweep(sweep_path);
            if (seed) spec.seed = *seed;
            if (trace || synthetic) {
                // Fold CLI switches into the base so every point sees them.
                YAML::Node base = YAML::Load(spec.base_yaml);
                if (!base.IsMap()) base = YAML::Node(YAML::NodeType::Map);
                if (trace) base["output"]["trace"] = true;
                if (synthetic) base["data"]["source"] = "synthetic";
                spec.base_yaml = YAML::Dump(base);
            }
            const auto points = exp::expand_sweep(spec);
            const std::filesystem::path root =
                out_dir ? *out_dir : points.empty() ? "runs" : points.front().config.output.dir;
            const auto outcome = exp::run_sweep(spec, root);
            fmt::print("{} runs, {} failed; summary at {}\n", outcome.runs, outcome.failures,
                       outcome.summary.string());
            return outcome.failures == 0 ? 0 : kExitSweepPartial;
        }

        auto config = config_path.empty() ? exp::ExperimentConfig{} : exp::load_config(config_path);
        if (seed) config.seed = *seed;
        if (out_dir) config.output.dir = *out_dir;
        if (trace) config.output.trace = true;
        if (synthetic) config.data.source = exp::DataSource::Synthetic;
        exp::validate(config);
        const auto result = exp::run(config, config.output.dir);
        fmt::print("{}: {} main-chain blocks, stale rate {:.4f}", result.run_id,
                   result.log.rows.size(), result.log.stale_rate);
        if (result.log.final_test_acc) fmt::print(", test accuracy {:.4f}", *result.log.final_test_acc);
        if (result.log.mean_aob) fmt::print(", mean AoB {:.3f} s", *result.log.mean_aob);
        fmt::print("\n  {}\n", result.dir.string());
        return result.reached_target ? 0 : 1;
    } catch (const exp::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kExitConfig;
    } catch (const fl::DataError& e) {
        fmt::print(stderr, "data error: {}\n", e.what());
        return kExitIo;
    } catch (const exp::IoError& e) {
        fmt::print(stderr, "I/O error: {}\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
}
