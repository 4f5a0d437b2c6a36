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

#include "flchain/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace flchain::fl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// One sample per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
    Matrix weight;  // fan_out x fan_in
    Vector bias;    // fan_out
};

/// Parameters of a fully connected ReLU network with a softmax output.
struct ModelWeights {
    std::vector<DenseLayer> layers;

    ModelWeights() = default;
    /// All-zero weights for the given layer sizes (input first, classes last).
    explicit ModelWeights(std::span<const std::size_t> layer_sizes);

    std::vector<std::size_t> layer_sizes() const;
    std::size_t input_dim() const { return layers.front().weight.cols(); }
    std::size_t num_classes() const { return layers.back().weight.rows(); }
    std::size_t parameter_count() const;
    bool same_shape(const ModelWeights& other) const;
    bool all_finite() const;

    /// this += scale * other
    void add_scaled(const ModelWeights& other, double scale);
    void scale(double factor);

    /// Flatten in a fixed order: each layer's weight (column-major) then bias.
    void flatten_into(std::span<double> out) const;
    void unflatten_from(std::span<const double> in);

    bool operator==(const ModelWeights& other) const;
};

/// Glorot-style uniform init: bound sqrt(6 / (fan_in + fan_out)), zero biases.
ModelWeights init_model(std::span<const std::size_t> layer_sizes, RngStream& rng);

/// Class probabilities, one row per sample. Throws std::logic_error if the
/// feature count does not match the input layer.
Matrix forward(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x);

struct LossAndGrads {
    double loss = 0.0;
    ModelWeights grads;
};

/// Mean softmax cross-entropy over the batch and its backprop gradients.
LossAndGrads loss_and_grads(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x,
                            std::span<const std::uint8_t> labels);

/// Mean cross-entropy only.
double loss(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x,
            std::span<const std::uint8_t> labels);

struct SgdParams {
    int epochs = 3;
    std::size_t batch_size = 20;
    double learning_rate = 0.01;
};

struct LocalUpdateResult {
    ModelWeights weights;
    double mean_epoch_loss = 0.0;  // mean over epochs of the mean batch loss
};

/// E epochs of minibatch SGD over (x, labels), reshuffled every epoch from
/// `rng`. The last batch of an epoch may be short.
LocalUpdateResult local_update(const ModelWeights& w0, const SampleMatrix& x,
                               std::span<const std::uint8_t> labels, const SgdParams& params,
                               RngStream& rng);

struct WeightedModel {
    const ModelWeights* model = nullptr;
    double alpha = 0.0;
};

/// Element-wise convex combination. Throws std::logic_error on an empty
/// list, mismatched shapes, or weights not summing to 1 within 1e-9.
ModelWeights fedavg(std::span<const WeightedModel> updates);

/// fedavg with alpha = 1/U.
ModelWeights fedavg_uniform(std::span<const ModelWeights> updates);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

/// Argmax accuracy (ties go to the lowest class index) and mean loss.
EvalResult evaluate(const ModelWeights& w, const SampleMatrix& x,
                    std::span<const std::uint8_t> labels);

/// Per-sample correctness under the same argmax rule.
std::vector<std::uint8_t> correct_mask(const ModelWeights& w, const SampleMatrix& x,
                                       std::span<const std::uint8_t> labels);

struct ComputeProfile {
    double xi_mips = 83.0;
    double work_per_update = 2.8464e8;  // instructions

    double mean_seconds() const { return work_per_update / (xi_mips * 1e6); }
};

/// Exponential local-update time with mean work / (xi * 1e6).
double sample_compute_time(const ComputeProfile& profile, RngStream& rng);

/// Binary snapshot: "FLCW", u32 version, u32 layer count, u64 sizes, then per
/// layer the weight matrix row-major and the bias; all little-endian.
void write_weights(std::ostream& out, const ModelWeights& w);
ModelWeights read_weights(std::istream& in);

}  // namespace flchain::fl
