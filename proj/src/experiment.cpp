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

#include "flchain/experiment.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>

namespace flchain::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string real(double v) { return fmt::format("{}", v); }

std::string opt(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
    return out;
}

void check_written(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw IoError(fmt::format("write failed for {}", path.string()));
}

void write_metrics(const fs::path& path, const sim::MetricsLog& log) {
    auto out = open_out(path);
    out << "index,block_id,depth,mine_time,updates,aob,train_acc,contributors_train_acc,"
           "test_acc,validation_acc,mean_client_loss\n";
    for (const auto& r : log.rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.index, r.block, r.depth,
                           real(r.mine_time), r.updates, opt(r.aob), opt(r.train_acc),
                           opt(r.contributors_train_acc), opt(r.test_acc), opt(r.validation_acc),
                           opt(r.mean_client_loss));
    }
    check_written(out, path);
}

void write_chain(const fs::path& path, const sim::Simulation& s) {
    const auto main = s.main_chain();
    std::vector<bool> on_main(s.blocks().size(), false);
    for (auto id : main) on_main[id] = true;
    auto out = open_out(path);
    for (const auto& b : s.blocks()) {
        json j;
        j["block_id"] = b.id;
        j["parent"] = b.parent ? json(*b.parent) : json(nullptr);
        j["depth"] = b.depth;
        j["miner"] = b.parent ? json(b.miner) : json(nullptr);
        j["mine_time"] = b.mine_time;
        j["size_bits"] = b.size_bits;
        j["txs"] = b.txs;
        j["on_main_chain"] = static_cast<bool>(on_main[b.id]);
        out << j.dump() << '\n';
    }
    check_written(out, path);
}

void write_txs(const fs::path& path, const sim::Simulation& s) {
    auto out = open_out(path);
    out << "tx_id,client_id,gen_time,num_samples,update_ref,base_block\n";
    for (const auto& tx : s.txs()) {
        out << fmt::format("{},{},{},{},{},{}\n", tx.id, tx.client, real(tx.gen_time),
                           tx.num_samples, s.params().chain_only ? std::string() : fmt::format("{}", tx.update),
                           tx.base_block);
    }
    check_written(out, path);
}

void write_aob(const fs::path& path, const sim::Simulation& s, const sim::MetricsLog& log) {
    auto out = open_out(path);
    out << "block_id,depth,mine_time,updates,aob,ages\n";
    for (const auto& r : log.aob_records) {
        const auto& b = s.blocks().get(r.block);
        std::string ages;
        for (std::size_t i = 0; i < r.ages.size(); ++i) {
            if (i) ages += ';';
            ages += real(r.ages[i]);
        }
        out << fmt::format("{},{},{},{},{},{}\n", r.block, b.depth, real(b.mine_time), r.updates,
                           real(r.aob), ages);
    }
    check_written(out, path);
}

void write_losses(const fs::path& path, const sim::MetricsLog& log) {
    auto out = open_out(path);
    out << "time,client_id,loss\n";
    for (const auto& l : log.client_losses) {
        out << fmt::format("{},{},{}\n", real(l.time), l.client, real(l.loss));
    }
    check_written(out, path);
}

void write_manifest(const fs::path& path, const ExperimentConfig& config, const sim::Simulation& s) {
    auto out = open_out(path);
    out << to_yaml(config);
    out << "manifest:\n";
    out << fmt::format("  run_id: \"{}\"\n", run_id(config));
    out << fmt::format("  config_hash: \"{:016x}\"\n", config_hash(config));
    out << fmt::format("  seed: {}\n", config.seed);
    out << fmt::format("  work_per_update: {}\n", real(config.fl.work_per_update));
    out << "  attach: [";
    const auto& attach = s.network().topology().attach;
    for (std::size_t k = 0; k < attach.size(); ++k) out << (k ? ", " : "") << attach[k];
    out << "]\n";
    out << "  shard_sizes: [";
    for (std::size_t k = 0; k < s.shards().size(); ++k) out << (k ? ", " : "") << s.shards()[k].size();
    out << "]\n";
    check_written(out, path);
}

void write_summary(const fs::path& path, const ExperimentConfig& config, const RunResult& r) {
    json j;
    j["run_id"] = r.run_id;
    j["seed"] = config.seed;
    j["reached_target"] = r.reached_target;
    j["target_blocks"] = config.chain.blocks;
    j["main_chain_blocks"] = r.log.rows.size();
    j["blocks_mined"] = r.blocks_mined;
    j["transactions"] = r.transactions;
    j["sim_time"] = r.sim_time;
    j["wall_seconds"] = r.wall_seconds;
    j["stale_rate"] = r.log.stale_rate;
    j["mean_aob"] = opt_json(r.log.mean_aob);
    j["final_test_acc"] = opt_json(r.log.final_test_acc);
    j["final_train_acc"] = opt_json(r.log.final_train_acc);
    j["rows_recomputed"] = r.log.rows_recomputed;
    auto out = open_out(path);
    out << j.dump(2) << '\n';
    check_written(out, path);
}

void write_weights_snapshots(const fs::path& dir, sim::Simulation& s) {
    fs::create_directories(dir);
    const auto main = s.main_chain();
    for (std::size_t i = 1; i < main.size(); ++i) {
        const auto path = dir / fmt::format("block-{}.bin", i);
        auto out = open_out(path, std::ios::binary);
        const std::span<const chain::BlockId> prefix(main.data(), i + 1);
        fl::write_weights(out, s.global_model_at(prefix));
        check_written(out, path);
    }
}

}  // namespace

std::shared_ptr<const sim::Datasets> load_datasets(const ExperimentConfig& config) {
    if (config.chain_only) return nullptr;
    const std::size_t dim = config.fl.layers.front();
    const std::size_t classes = config.fl.layers.back();

    fl::Dataset train;
    fl::Dataset test;
    if (config.data.source == DataSource::Synthetic) {
        fl::SyntheticSpec spec = config.data.synthetic;
        spec.dim = dim;
        spec.classes = classes;
        RngStream rng(config.seed, "synthetic-data");
        auto tt = fl::make_synthetic(spec, rng);
        train = std::move(tt.train);
        test = std::move(tt.test);
    } else {
        train = fl::load_idx(config.data.train_images, config.data.train_labels, config.data.train_limit);
        test = fl::load_idx(config.data.test_images, config.data.test_labels, config.data.test_limit);
        if (train.dim() != dim || test.dim() != dim) {
            throw ConfigError("fl.layers", fmt::format("input size {} does not match {} data features",
                                                       dim, train.dim()));
        }
        for (const auto* set : {&train, &test}) {
            const auto top = std::max_element(set->labels.begin(), set->labels.end());
            if (top != set->labels.end() && *top >= classes) {
                throw ConfigError("fl.layers", fmt::format("label {} exceeds output size {}", *top, classes));
            }
        }
    }
    if (train.size() < config.fl.clients) {
        throw ConfigError("fl.clients", "more clients than training samples");
    }
    RngStream split_rng(config.seed, "eval-split");
    auto split = fl::split_test_set(test, split_rng, config.data.test_fraction);
    auto data = std::make_shared<sim::Datasets>();
    data->train = std::move(train);
    data->test = std::move(split.test);
    data->validation = std::move(split.validation);
    return data;
}

RunResult run(const ExperimentConfig& config, const fs::path& out_root,
              std::shared_ptr<const sim::Datasets> data) {
    validate(config);
    const auto wall_start = std::chrono::steady_clock::now();
    if (!data) data = load_datasets(config);

    RunResult result;
    result.run_id = run_id(config);
    result.dir = out_root / result.run_id;
    std::error_code ec;
    fs::create_directories(result.dir, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", result.dir.string(), ec.message()));
    fs::remove(result.dir / "COMPLETE", ec);

    sim::Simulation simulation(to_sim_params(config), data);
    std::optional<std::ofstream> trace;
    if (config.output.trace) {
        trace = open_out(result.dir / "trace.jsonl");
        simulation.engine().set_trace(&*trace);
    }
    result.reached_target = simulation.run();
    result.log = simulation.finalize();
    if (trace) {
        simulation.engine().set_trace(nullptr);
        check_written(*trace, result.dir / "trace.jsonl");
    }
    result.blocks_mined = simulation.blocks().size() - 1;
    result.transactions = simulation.txs().size();
    result.sim_time = simulation.engine().now();

    write_metrics(result.dir / "metrics.csv", result.log);
    write_chain(result.dir / "chain.jsonl", simulation);
    write_txs(result.dir / "txs.csv", simulation);
    write_aob(result.dir / "aob.csv", simulation, result.log);
    write_losses(result.dir / "client_loss.csv", result.log);
    write_manifest(result.dir / "manifest.yaml", config, simulation);
    if (config.output.weights_snapshots && !config.chain_only) {
        write_weights_snapshots(result.dir / "weights", simulation);
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    write_summary(result.dir / "run_summary.json", config, result);
    auto marker = open_out(result.dir / "COMPLETE");
    marker << result.run_id << '\n';
    check_written(marker, result.dir / "COMPLETE");
    return result;
}

SweepOutcome run_sweep(const SweepSpec& spec, const fs::path& out_root) {
    const auto points = expand_sweep(spec);
    std::error_code ec;
    fs::create_directories(out_root, ec);
    if (ec) throw IoError(fmt::format("cannot create {}: {}", out_root.string(), ec.message()));

    SweepOutcome outcome;
    outcome.summary = out_root / "summary.csv";
    auto out = open_out(outcome.summary);
    out << "index,replication,seed,run_id";
    for (const auto& [key, values] : spec.grid) out << ',' << key;
    out << ",status,reached_target,main_chain_blocks,stale_rate,mean_aob,final_test_acc,"
           "final_train_acc,error\n";

    for (const auto& point : points) {
        ++outcome.runs;
        out << fmt::format("{},{},{},{}", point.index, point.replication, point.config.seed,
                           run_id(point.config));
        for (const auto& [key, value] : point.overrides) {
            std::string quoted = value;
            for (std::size_t pos = 0; (pos = quoted.find('"', pos)) != std::string::npos; pos += 2) {
                quoted.insert(pos, 1, '"');
            }
            out << ",\"" << quoted << '"';
        }
        try {
            const auto r = run(point.config, out_root);
            out << fmt::format(",ok,{},{},{},{},{},{},\n", r.reached_target, r.log.rows.size(),
                               real(r.log.stale_rate), opt(r.log.mean_aob),
                               opt(r.log.final_test_acc), opt(r.log.final_train_acc));
        } catch (const std::exception& e) {
            ++outcome.failures;
            std::string message = e.what();
            std::replace(message.begin(), message.end(), '"', '\'');
            std::replace(message.begin(), message.end(), '\n', ' ');
            out << fmt::format(",failed,,,,,,,\"{}\"\n", message);
        }
        out.flush();
    }
    check_written(out, outcome.summary);
    return outcome;
}

}  // namespace flchain::exp
