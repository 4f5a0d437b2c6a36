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

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace flchain::exp {

namespace {

const std::map<std::string, std::set<std::string>>& section_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"chain",
         {"block_size", "block_interval", "miners", "p2p_capacity_mbps", "client_capacity_mbps",
          "tx_kbits", "header_kbits", "blocks", "verification_delay"}},
        {"fl",
         {"clients", "xi_mips", "epochs", "batch_size", "learning_rate", "layers",
          "work_per_update", "empty_block"}},
        {"data",
         {"source", "train_images", "train_labels", "test_images", "test_labels", "train_limit",
          "test_limit", "test_fraction", "synthetic"}},
        {"data.synthetic", {"train_size", "test_size", "center_spread", "noise"}},
        {"output", {"dir", "trace", "weights_snapshots"}},
    };
    return keys;
}

const std::set<std::string>& top_level_keys() {
    static const std::set<std::string> keys = {"chain",      "fl",     "data",    "output",
                                               "seed",       "chain_only", "manifest"};
    return keys;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

void check_map(const YAML::Node& node, const std::string& key) {
    if (!node.IsMap()) throw ConfigError(key, "expected a mapping");
}

void check_keys(const YAML::Node& node, const std::string& section) {
    const auto& allowed = section_keys().at(section);
    for (const auto& kv : node) {
        const auto name = kv.first.as<std::string>();
        if (!allowed.contains(name)) throw ConfigError(section + "." + name, "unknown key");
    }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
    if (!node.IsScalar()) throw ConfigError(key, "expected a scalar value");
    try {
        if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
            const auto text = node.Scalar();
            if (!text.empty() && text.front() == '-') throw ConfigError(key, "must be positive");
        }
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(key, fmt::format("cannot parse '{}'", node.Scalar()));
    }
}

double real_or_inf(const YAML::Node& node, const std::string& key) {
    if (node.IsScalar()) {
        const auto text = lower(node.Scalar());
        if (text == "inf" || text == "infinity" || text == ".inf") {
            return std::numeric_limits<double>::infinity();
        }
    }
    return scalar<double>(node, key);
}

template <typename T>
void read(const YAML::Node& section, const char* name, const std::string& prefix, T& out) {
    if (const auto node = section[name]) out = scalar<T>(node, prefix + "." + name);
}

std::string format_real(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{}", v);
}

void resolve_paths(ExperimentConfig& config, const std::filesystem::path& base_dir) {
    if (base_dir.empty()) return;
    for (std::string* p : {&config.data.train_images, &config.data.train_labels,
                           &config.data.test_images, &config.data.test_labels}) {
        if (!p->empty() && std::filesystem::path(*p).is_relative()) {
            *p = (base_dir / *p).lexically_normal().string();
        }
    }
}

ExperimentConfig from_node(const YAML::Node& root) {
    ExperimentConfig c;
    if (!root || root.IsNull()) return c;
    check_map(root, "");
    for (const auto& kv : root) {
        const auto name = kv.first.as<std::string>();
        if (!top_level_keys().contains(name)) throw ConfigError(name, "unknown key");
    }

    if (const auto chain = root["chain"]) {
        check_map(chain, "chain");
        check_keys(chain, "chain");
        read(chain, "block_size", "chain", c.chain.block_size);
        read(chain, "block_interval", "chain", c.chain.block_interval);
        read(chain, "miners", "chain", c.chain.miners);
        if (const auto n = chain["p2p_capacity_mbps"]) {
            c.chain.p2p_capacity_mbps = real_or_inf(n, "chain.p2p_capacity_mbps");
        }
        if (const auto n = chain["client_capacity_mbps"]) {
            c.chain.client_capacity_mbps = real_or_inf(n, "chain.client_capacity_mbps");
        }
        read(chain, "tx_kbits", "chain", c.chain.tx_kbits);
        read(chain, "header_kbits", "chain", c.chain.header_kbits);
        read(chain, "blocks", "chain", c.chain.blocks);
        read(chain, "verification_delay", "chain", c.chain.verification_delay);
    }

    if (const auto flnode = root["fl"]) {
        check_map(flnode, "fl");
        check_keys(flnode, "fl");
        read(flnode, "clients", "fl", c.fl.clients);
        if (const auto xi = flnode["xi_mips"]) {
            c.fl.xi_mips.clear();
            if (xi.IsSequence()) {
                for (const auto& v : xi) c.fl.xi_mips.push_back(scalar<double>(v, "fl.xi_mips"));
            } else {
                c.fl.xi_mips.push_back(scalar<double>(xi, "fl.xi_mips"));
            }
        }
        read(flnode, "epochs", "fl", c.fl.epochs);
        read(flnode, "batch_size", "fl", c.fl.batch_size);
        read(flnode, "learning_rate", "fl", c.fl.learning_rate);
        if (const auto layers = flnode["layers"]) {
            if (!layers.IsSequence()) throw ConfigError("fl.layers", "expected a list");
            c.fl.layers.clear();
            for (const auto& v : layers) c.fl.layers.push_back(scalar<std::size_t>(v, "fl.layers"));
        }
        read(flnode, "work_per_update", "fl", c.fl.work_per_update);
        if (const auto policy = flnode["empty_block"]) {
            const auto text = lower(scalar<std::string>(policy, "fl.empty_block"));
            if (text == "retrain") {
                c.fl.empty_block = sim::EmptyBlockPolicy::Retrain;
            } else if (text == "wait") {
                c.fl.empty_block = sim::EmptyBlockPolicy::Wait;
            } else {
                throw ConfigError("fl.empty_block", "expected 'retrain' or 'wait'");
            }
        }
    }

    if (const auto data = root["data"]) {
        check_map(data, "data");
        check_keys(data, "data");
        if (const auto source = data["source"]) {
            const auto text = lower(scalar<std::string>(source, "data.source"));
            if (text == "synthetic") {
                c.data.source = DataSource::Synthetic;
            } else if (text == "idx" || text == "mnist") {
                c.data.source = DataSource::Idx;
            } else {
                throw ConfigError("data.source", "expected 'synthetic' or 'idx'");
            }
        }
        read(data, "train_images", "data", c.data.train_images);
        read(data, "train_labels", "data", c.data.train_labels);
        read(data, "test_images", "data", c.data.test_images);
        read(data, "test_labels", "data", c.data.test_labels);
        if (const auto n = data["train_limit"]) {
            c.data.train_limit = scalar<std::size_t>(n, "data.train_limit");
        }
        if (const auto n = data["test_limit"]) {
            c.data.test_limit = scalar<std::size_t>(n, "data.test_limit");
        }
        read(data, "test_fraction", "data", c.data.test_fraction);
        if (const auto syn = data["synthetic"]) {
            check_map(syn, "data.synthetic");
            check_keys(syn, "data.synthetic");
            read(syn, "train_size", "data.synthetic", c.data.synthetic.train_size);
            read(syn, "test_size", "data.synthetic", c.data.synthetic.test_size);
            read(syn, "center_spread", "data.synthetic", c.data.synthetic.center_spread);
            read(syn, "noise", "data.synthetic", c.data.synthetic.noise);
        }
    }

    if (const auto n = root["seed"]) c.seed = scalar<std::uint64_t>(n, "seed");
    if (const auto n = root["chain_only"]) c.chain_only = scalar<bool>(n, "chain_only");

    if (const auto out = root["output"]) {
        check_map(out, "output");
        check_keys(out, "output");
        read(out, "dir", "output", c.output.dir);
        read(out, "trace", "output", c.output.trace);
        read(out, "weights_snapshots", "output", c.output.weights_snapshots);
    }
    return c;
}

YAML::Node parse_yaml(std::string_view text, const std::string& what) {
    try {
        return YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError("", fmt::format("{}: {}", what, e.what()));
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", fmt::format("cannot read {}", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void validate(const ExperimentConfig& c) {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0)) throw ConfigError(key, fmt::format("must be positive, got {}", v));
    };
    if (c.chain.block_size == 0) throw ConfigError("chain.block_size", "must be positive, got 0");
    positive(c.chain.block_interval, "chain.block_interval");
    if (c.chain.miners == 0) throw ConfigError("chain.miners", "must be positive, got 0");
    positive(c.chain.p2p_capacity_mbps, "chain.p2p_capacity_mbps");
    positive(c.chain.client_capacity_mbps, "chain.client_capacity_mbps");
    if (std::isinf(c.chain.client_capacity_mbps)) {
        throw ConfigError("chain.client_capacity_mbps", "must be finite");
    }
    positive(c.chain.tx_kbits, "chain.tx_kbits");
    positive(c.chain.header_kbits, "chain.header_kbits");
    if (c.chain.blocks == 0) throw ConfigError("chain.blocks", "must be positive, got 0");
    if (!(c.chain.verification_delay >= 0.0)) {
        throw ConfigError("chain.verification_delay", "must not be negative");
    }

    if (c.fl.clients == 0) throw ConfigError("fl.clients", "must be positive, got 0");
    if (c.fl.xi_mips.empty()) throw ConfigError("fl.xi_mips", "needs at least one value");
    for (double xi : c.fl.xi_mips) positive(xi, "fl.xi_mips");
    if (c.fl.epochs < 1) throw ConfigError("fl.epochs", "must be positive");
    if (c.fl.batch_size == 0) throw ConfigError("fl.batch_size", "must be positive, got 0");
    positive(c.fl.learning_rate, "fl.learning_rate");
    if (c.fl.layers.size() < 2) throw ConfigError("fl.layers", "needs input and output sizes");
    for (auto n : c.fl.layers) {
        if (n == 0) throw ConfigError("fl.layers", "sizes must be positive");
    }
    if (c.fl.layers.back() > 256) throw ConfigError("fl.layers", "at most 256 classes");
    positive(c.fl.work_per_update, "fl.work_per_update");

    if (!(c.data.test_fraction > 0.0 && c.data.test_fraction < 1.0)) {
        throw ConfigError("data.test_fraction", "must lie in (0, 1)");
    }
    if (c.data.source == DataSource::Idx && !c.chain_only) {
        for (const auto& [value, key] :
             {std::pair{&c.data.train_images, "data.train_images"},
              std::pair{&c.data.train_labels, "data.train_labels"},
              std::pair{&c.data.test_images, "data.test_images"},
              std::pair{&c.data.test_labels, "data.test_labels"}}) {
            if (value->empty()) throw ConfigError(key, "dataset path required for idx data");
        }
    }
    if (c.data.source == DataSource::Synthetic) {
        if (c.data.synthetic.train_size == 0) {
            throw ConfigError("data.synthetic.train_size", "must be positive, got 0");
        }
        if (c.data.synthetic.test_size < 2) {
            throw ConfigError("data.synthetic.test_size", "needs at least 2 samples");
        }
        positive(c.data.synthetic.noise, "data.synthetic.noise");
        if (!(c.data.synthetic.center_spread >= 0.0)) {
            throw ConfigError("data.synthetic.center_spread", "must not be negative");
        }
        if (!c.chain_only && c.fl.clients > c.data.synthetic.train_size) {
            throw ConfigError("fl.clients", "more clients than training samples");
        }
    }
}

ExperimentConfig parse_config(std::string_view yaml_text) {
    ExperimentConfig c = from_node(parse_yaml(yaml_text, "config"));
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    ExperimentConfig c = from_node(parse_yaml(read_file(path), path.string()));
    resolve_paths(c, path.parent_path());
    validate(c);
    return c;
}

std::string to_yaml(const ExperimentConfig& c) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "chain_only" << YAML::Value << c.chain_only;

    out << YAML::Key << "chain" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "block_size" << YAML::Value << c.chain.block_size;
    out << YAML::Key << "block_interval" << YAML::Value << format_real(c.chain.block_interval);
    out << YAML::Key << "miners" << YAML::Value << c.chain.miners;
    out << YAML::Key << "p2p_capacity_mbps" << YAML::Value << format_real(c.chain.p2p_capacity_mbps);
    out << YAML::Key << "client_capacity_mbps" << YAML::Value
        << format_real(c.chain.client_capacity_mbps);
    out << YAML::Key << "tx_kbits" << YAML::Value << format_real(c.chain.tx_kbits);
    out << YAML::Key << "header_kbits" << YAML::Value << format_real(c.chain.header_kbits);
    out << YAML::Key << "blocks" << YAML::Value << c.chain.blocks;
    out << YAML::Key << "verification_delay" << YAML::Value
        << format_real(c.chain.verification_delay);
    out << YAML::EndMap;

    out << YAML::Key << "fl" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "clients" << YAML::Value << c.fl.clients;
    out << YAML::Key << "xi_mips" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double xi : c.fl.xi_mips) out << format_real(xi);
    out << YAML::EndSeq;
    out << YAML::Key << "epochs" << YAML::Value << c.fl.epochs;
    out << YAML::Key << "batch_size" << YAML::Value << c.fl.batch_size;
    out << YAML::Key << "learning_rate" << YAML::Value << format_real(c.fl.learning_rate);
    out << YAML::Key << "layers" << YAML::Value << YAML::Flow << c.fl.layers;
    out << YAML::Key << "work_per_update" << YAML::Value << format_real(c.fl.work_per_update);
    out << YAML::Key << "empty_block" << YAML::Value
        << (c.fl.empty_block == sim::EmptyBlockPolicy::Retrain ? "retrain" : "wait");
    out << YAML::EndMap;

    out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "source" << YAML::Value
        << (c.data.source == DataSource::Synthetic ? "synthetic" : "idx");
    out << YAML::Key << "train_images" << YAML::Value << c.data.train_images;
    out << YAML::Key << "train_labels" << YAML::Value << c.data.train_labels;
    out << YAML::Key << "test_images" << YAML::Value << c.data.test_images;
    out << YAML::Key << "test_labels" << YAML::Value << c.data.test_labels;
    if (c.data.train_limit) out << YAML::Key << "train_limit" << YAML::Value << *c.data.train_limit;
    if (c.data.test_limit) out << YAML::Key << "test_limit" << YAML::Value << *c.data.test_limit;
    out << YAML::Key << "test_fraction" << YAML::Value << format_real(c.data.test_fraction);
    out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "train_size" << YAML::Value << c.data.synthetic.train_size;
    out << YAML::Key << "test_size" << YAML::Value << c.data.synthetic.test_size;
    out << YAML::Key << "center_spread" << YAML::Value << format_real(c.data.synthetic.center_spread);
    out << YAML::Key << "noise" << YAML::Value << format_real(c.data.synthetic.noise);
    out << YAML::EndMap;
    out << YAML::EndMap;

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dir" << YAML::Value << c.output.dir;
    out << YAML::Key << "trace" << YAML::Value << c.output.trace;
    out << YAML::Key << "weights_snapshots" << YAML::Value << c.output.weights_snapshots;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    ExperimentConfig shape = config;
    shape.seed = 0;
    shape.output = {};
    return fnv1a64(to_yaml(shape));
}

std::string run_id(const ExperimentConfig& config) {
    return fmt::format("{:016x}-s{}", config_hash(config), config.seed);
}

sim::Params to_sim_params(const ExperimentConfig& c) {
    sim::Params p;
    p.chain.max_block_txs = c.chain.block_size;
    p.chain.tx_bits = c.chain.tx_kbits * 1e3;
    p.chain.header_bits = c.chain.header_kbits * 1e3;
    p.block_interval = c.chain.block_interval;
    p.miners = c.chain.miners;
    p.p2p_capacity = c.chain.p2p_capacity_mbps * 1e6;
    p.client_capacity = c.chain.client_capacity_mbps * 1e6;
    p.verification_delay = c.chain.verification_delay;
    p.target_blocks = c.chain.blocks;
    p.clients = c.fl.clients;
    p.xi_mips = c.fl.xi_mips;
    p.work_per_update = c.fl.work_per_update;
    p.sgd = {c.fl.epochs, c.fl.batch_size, c.fl.learning_rate};
    p.layers = c.fl.layers;
    p.empty_block = c.fl.empty_block;
    p.chain_only = c.chain_only;
    p.nominal_train_size =
        c.data.source == DataSource::Synthetic ? c.data.synthetic.train_size
                                               : c.data.train_limit.value_or(60000);
    p.seed = c.seed;
    return p;
}

namespace {

void merge_into(YAML::Node target, const YAML::Node& overlay) {
    for (const auto& kv : overlay) {
        const auto key = kv.first.as<std::string>();
        if (kv.second.IsMap() && target[key] && target[key].IsMap()) {
            merge_into(target[key], kv.second);
        } else {
            target[key] = YAML::Clone(kv.second);
        }
    }
}

void set_dotted(YAML::Node root, const std::string& dotted, const YAML::Node& value) {
    YAML::Node cur = root;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const auto part = dotted.substr(start, dot == std::string::npos ? dotted.npos : dot - start);
        if (dot == std::string::npos) {
            cur[part] = YAML::Clone(value);
            return;
        }
        if (!cur[part] || !cur[part].IsMap()) cur[part] = YAML::Node(YAML::NodeType::Map);
        YAML::Node next = cur[part];
        cur.reset(next);
        start = dot + 1;
    }
}

std::string dump_flow(const YAML::Node& node) {
    YAML::Emitter out;
    out << YAML::Flow << node;
    return out.c_str();
}

}  // namespace

SweepSpec parse_sweep(std::string_view yaml_text, const std::filesystem::path& base_dir) {
    const YAML::Node root = parse_yaml(yaml_text, "sweep");
    if (!root.IsMap()) throw ConfigError("", "sweep file must be a mapping");
    for (const auto& kv : root) {
        const auto name = kv.first.as<std::string>();
        if (name != "base" && name != "config" && name != "grid" && name != "replications" &&
            name != "seed") {
            throw ConfigError(name, "unknown sweep key");
        }
    }
    SweepSpec spec;
    spec.base_dir = base_dir;
    YAML::Node merged(YAML::NodeType::Map);
    if (const auto base = root["base"]) {
        std::filesystem::path path = scalar<std::string>(base, "base");
        if (path.is_relative()) path = base_dir / path;
        merged = parse_yaml(read_file(path), path.string());
        if (merged.IsNull()) merged = YAML::Node(YAML::NodeType::Map);
        // Paths inside the base file are relative to the base file.
        ExperimentConfig probe = from_node(merged);
        resolve_paths(probe, path.parent_path());
        if (!probe.data.train_images.empty()) merged["data"]["train_images"] = probe.data.train_images;
        if (!probe.data.train_labels.empty()) merged["data"]["train_labels"] = probe.data.train_labels;
        if (!probe.data.test_images.empty()) merged["data"]["test_images"] = probe.data.test_images;
        if (!probe.data.test_labels.empty()) merged["data"]["test_labels"] = probe.data.test_labels;
    }
    if (const auto inline_config = root["config"]) {
        check_map(inline_config, "config");
        merge_into(merged, inline_config);
    }
    spec.base_yaml = YAML::Dump(merged);
    if (const auto grid = root["grid"]) {
        check_map(grid, "grid");
        for (const auto& kv : grid) {
            const auto key = kv.first.as<std::string>();
            if (!kv.second.IsSequence() || kv.second.size() == 0) {
                throw ConfigError("grid." + key, "expected a non-empty list of values");
            }
            std::vector<std::string> values;
            for (const auto& v : kv.second) values.push_back(dump_flow(v));
            spec.grid.emplace_back(key, std::move(values));
        }
    }
    if (const auto n = root["replications"]) spec.replications = scalar<std::size_t>(n, "replications");
    if (spec.replications == 0) throw ConfigError("replications", "must be positive, got 0");
    if (const auto n = root["seed"]) spec.seed = scalar<std::uint64_t>(n, "seed");
    // Fail early on a bad base or grid value.
    (void)expand_sweep(spec);
    return spec;
}

SweepSpec load_sweep(const std::filesystem::path& path) {
    return parse_sweep(read_file(path), path.parent_path());
}

std::vector<SweepPoint> expand_sweep(const SweepSpec& spec) {
    std::size_t cells = 1;
    for (const auto& [key, values] : spec.grid) cells *= values.size();

    std::vector<SweepPoint> points;
    points.reserve(cells * spec.replications);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        YAML::Node node = parse_yaml(spec.base_yaml, "sweep base");
        if (node.IsNull()) node = YAML::Node(YAML::NodeType::Map);
        std::vector<std::pair<std::string, std::string>> overrides;
        std::size_t rest = cell;
        // Last grid key varies fastest.
        std::vector<std::size_t> picks(spec.grid.size());
        for (std::size_t g = spec.grid.size(); g-- > 0;) {
            picks[g] = rest % spec.grid[g].second.size();
            rest /= spec.grid[g].second.size();
        }
        for (std::size_t g = 0; g < spec.grid.size(); ++g) {
            const auto& [key, values] = spec.grid[g];
            set_dotted(node, key, parse_yaml(values[picks[g]], "grid." + key));
            overrides.emplace_back(key, values[picks[g]]);
        }
        ExperimentConfig base = from_node(node);
        resolve_paths(base, spec.base_dir);
        for (std::size_t r = 0; r < spec.replications; ++r) {
            SweepPoint point;
            point.index = cell * spec.replications + r;
            point.replication = r;
            point.overrides = overrides;
            point.config = base;
            point.config.seed = derive_seed(spec.seed, point.index);
            validate(point.config);
            points.push_back(std::move(point));
        }
    }
    return points;
}

}  // namespace flchain::exp
