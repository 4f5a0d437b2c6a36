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

#include "flchain/data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace flchain::fl {

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) =
            features.row(static_cast<Eigen::Index>(indices[i]));
        out.labels.push_back(labels.at(indices[i]));
    }
    return out;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw DataError(fmt::format("{}: truncated IDX header", path.string()));
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
           std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
    return in;
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit) {
    auto img = open_in(images);
    if (read_be32(img, images) != 0x00000803) {
        throw DataError(fmt::format("{}: not an IDX image file", images.string()));
    }
    const std::size_t n_img = read_be32(img, images);
    const std::size_t rows = read_be32(img, images);
    const std::size_t cols = read_be32(img, images);

    auto lab = open_in(labels);
    if (read_be32(lab, labels) != 0x00000801) {
        throw DataError(fmt::format("{}: not an IDX label file", labels.string()));
    }
    const std::size_t n_lab = read_be32(lab, labels);
    if (n_img != n_lab) {
        throw DataError(fmt::format("{} images but {} labels", n_img, n_lab));
    }
    const std::size_t n = limit ? std::min(*limit, n_img) : n_img;
    const std::size_t dim = rows * cols;

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    std::vector<unsigned char> pixels(dim);
    for (std::size_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(dim))) {
            throw DataError(fmt::format("{}: truncated at sample {}", images.string(), i));
        }
        for (std::size_t j = 0; j < dim; ++j) {
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                static_cast<double>(pixels[j]) / 255.0;
        }
    }
    data.labels.resize(n);
    if (n > 0 && !lab.read(reinterpret_cast<char*>(data.labels.data()),
                           static_cast<std::streamsize>(n))) {
        throw DataError(fmt::format("{}: truncated", labels.string()));
    }
    return data;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& data, std::uint32_t rows, std::uint32_t cols) {
    if (std::size_t{rows} * cols != data.dim()) throw DataError("image geometry mismatch");
    std::ofstream img(images, std::ios::binary);
    std::ofstream lab(labels, std::ios::binary);
    if (!img || !lab) throw DataError(fmt::format("cannot write {} / {}", images.string(), labels.string()));
    write_be32(img, 0x00000803);
    write_be32(img, static_cast<std::uint32_t>(data.size()));
    write_be32(img, rows);
    write_be32(img, cols);
    for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            const double v = std::clamp(data.features(i, j), 0.0, 1.0);
            img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
    }
    write_be32(lab, 0x00000801);
    write_be32(lab, static_cast<std::uint32_t>(data.size()));
    lab.write(reinterpret_cast<const char*>(data.labels.data()),
              static_cast<std::streamsize>(data.labels.size()));
    if (!img || !lab) throw DataError(fmt::format("write failed for {} / {}", images.string(), labels.string()));
}

TrainTest make_synthetic(const SyntheticSpec& spec, RngStream& rng) {
    if (spec.classes == 0 || spec.classes > 256 || spec.dim == 0) {
        throw std::invalid_argument("synthetic data needs 1..256 classes and dim > 0");
    }
    const auto dim = static_cast<Eigen::Index>(spec.dim);
    Matrix centers(static_cast<Eigen::Index>(spec.classes), dim);
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
        for (Eigen::Index j = 0; j < dim; ++j) centers(c, j) = 0.5 + spec.center_spread * rng.normal();
    }
    auto draw = [&](std::size_t n) {
        Dataset d;
        d.features.resize(static_cast<Eigen::Index>(n), dim);
        d.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i % spec.classes);
            d.labels[i] = static_cast<std::uint8_t>(c);
            for (Eigen::Index j = 0; j < dim; ++j) {
                d.features(static_cast<Eigen::Index>(i), j) =
                    std::clamp(centers(c, j) + spec.noise * rng.normal(), 0.0, 1.0);
            }
        }
        return d;
    };
    TrainTest out;
    out.train = draw(spec.train_size);
    out.test = draw(spec.test_size);
    return out;
}

std::vector<DataShard> shard_dataset(const Dataset& train, std::size_t clients, RngStream& rng) {
    if (clients == 0 || clients > train.size()) {
        throw std::invalid_argument(
            fmt::format("cannot split {} samples across {} clients", train.size(), clients));
    }
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    const std::size_t base = train.size() / clients;
    const std::size_t extra = train.size() % clients;
    std::vector<DataShard> shards(clients);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < clients; ++k) {
        const std::size_t count = base + (k < extra ? 1 : 0);
        shards[k].owner = static_cast<std::uint32_t>(k);
        shards[k].indices.assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                 order.begin() + static_cast<std::ptrdiff_t>(offset + count));
        shards[k].data = train.subset(shards[k].indices);
        offset += count;
    }
    return shards;
}

EvalSplit split_test_set(const Dataset& original_test, RngStream& rng, double test_fraction) {
    std::vector<std::size_t> order(original_test.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(original_test.size())));
    EvalSplit split;
    split.test = original_test.subset({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test)});
    split.validation =
        original_test.subset({order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end()});
    return split;
}

}  // namespace flchain::fl
