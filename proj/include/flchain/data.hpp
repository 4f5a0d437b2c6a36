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

#include "flchain/model.hpp"
#include "flchain/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace flchain::fl {

/// Raised for unreadable or malformed dataset files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    SampleMatrix features;  // one flattened image per row, values in [0, 1]
    std::vector<std::uint8_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }

    /// Rows `indices` in the given order.
    Dataset subset(const std::vector<std::size_t>& indices) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled by 1/255. `limit` keeps only the first samples.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::optional<std::size_t> limit = std::nullopt);

/// Writes `data` back as IDX with the given image geometry; pixel values are
/// rounded to bytes.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
               const Dataset& data, std::uint32_t rows, std::uint32_t cols);

struct SyntheticSpec {
    std::size_t train_size = 6000;
    std::size_t test_size = 1000;
    std::size_t dim = 784;
    std::size_t classes = 10;
    double center_spread = 0.05;  // per-feature std of class centers around 0.5
    double noise = 0.3;           // per-feature sample std around its center

    bool operator==(const SyntheticSpec&) const = default;
};

struct TrainTest {
    Dataset train;
    Dataset test;
};

/// Gaussian blobs: one center per class, samples clamped to [0, 1].
/// Labels cycle through the classes, so both sets are class balanced.
TrainTest make_synthetic(const SyntheticSpec& spec, RngStream& rng);

struct DataShard {
    std::uint32_t owner = 0;
    std::vector<std::size_t> indices;  // rows of the training set
    Dataset data;

    std::size_t size() const noexcept { return data.size(); }
};

/// Seeded shuffle, then a contiguous split into `clients` shards whose sizes
/// differ by at most one.
std::vector<DataShard> shard_dataset(const Dataset& train, std::size_t clients, RngStream& rng);

struct EvalSplit {
    Dataset test;
    Dataset validation;
};

/// Seeded split of the original test set: round(test_fraction * n) samples
/// become the test set, the rest the validation set.
EvalSplit split_test_set(const Dataset& original_test, RngStream& rng,
                         double test_fraction = 0.3);

}  // namespace flchain::fl
