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

#include "flchain/model.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace flchain::fl {

ModelWeights::ModelWeights(std::span<const std::size_t> layer_sizes) {
    if (layer_sizes.size() < 2) throw std::logic_error("a model needs at least two layer sizes");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(layer_sizes[l]);
        const auto fan_out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
        layers.push_back({Matrix::Zero(fan_out, fan_in), Vector::Zero(fan_out)});
    }
}

std::vector<std::size_t> ModelWeights::layer_sizes() const {
    std::vector<std::size_t> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(static_cast<std::size_t>(layers.front().weight.cols()));
    for (const auto& layer : layers) sizes.push_back(static_cast<std::size_t>(layer.weight.rows()));
    return sizes;
}

std::size_t ModelWeights::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) {
        n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    }
    return n;
}

bool ModelWeights::same_shape(const ModelWeights& other) const {
    return layer_sizes() == other.layer_sizes();
}

bool ModelWeights::all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& layer) {
        return layer.weight.allFinite() && layer.bias.allFinite();
    });
}

void ModelWeights::add_scaled(const ModelWeights& other, double scale) {
    if (!same_shape(other)) throw std::logic_error("add_scaled: shape mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += scale * other.layers[l].weight;
        layers[l].bias += scale * other.layers[l].bias;
    }
}

void ModelWeights::scale(double factor) {
    for (auto& layer : layers) {
        layer.weight *= factor;
        layer.bias *= factor;
    }
}

void ModelWeights::flatten_into(std::span<double> out) const {
    if (out.size() != parameter_count()) throw std::logic_error("flatten_into: size mismatch");
    double* dst = out.data();
    for (const auto& layer : layers) {
        dst = std::copy_n(layer.weight.data(), layer.weight.size(), dst);
        dst = std::copy_n(layer.bias.data(), layer.bias.size(), dst);
    }
}

void ModelWeights::unflatten_from(std::span<const double> in) {
    if (in.size() != parameter_count()) throw std::logic_error("unflatten_from: size mismatch");
    const double* src = in.data();
    for (auto& layer : layers) {
        std::copy_n(src, layer.weight.size(), layer.weight.data());
        src += layer.weight.size();
        std::copy_n(src, layer.bias.size(), layer.bias.data());
        src += layer.bias.size();
    }
}

bool ModelWeights::operator==(const ModelWeights& other) const {
    if (!same_shape(other)) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].weight != other.layers[l].weight) return false;
        if (layers[l].bias != other.layers[l].bias) return false;
    }
    return true;
}

ModelWeights init_model(std::span<const std::size_t> layer_sizes, RngStream& rng) {
    ModelWeights w(layer_sizes);
    for (auto& layer : w.layers) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
                layer.weight(r, c) = rng.uniform(-bound, bound);
            }
        }
    }
    return w;
}

namespace {

struct ForwardPass {
    std::vector<Matrix> hidden;  // post-ReLU activations
    Matrix logits;
};

ForwardPass run_forward(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x) {
    if (w.layers.empty()) throw std::logic_error("forward: empty model");
    if (static_cast<std::size_t>(x.cols()) != w.input_dim()) {
        throw std::logic_error(
            fmt::format("forward: {} features, model expects {}", x.cols(), w.input_dim()));
    }
    ForwardPass pass;
    pass.hidden.reserve(w.layers.size() - 1);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const auto& layer = w.layers[l];
        Matrix z;
        if (l == 0) {
            z.noalias() = x * layer.weight.transpose();
        } else {
            z.noalias() = pass.hidden.back() * layer.weight.transpose();
        }
        z.rowwise() += layer.bias.transpose();
        if (l + 1 < w.layers.size()) {
            pass.hidden.push_back(z.cwiseMax(0.0));
        } else {
            pass.logits = std::move(z);
        }
    }
    return pass;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
    p = p.array().exp().matrix();
    p.array().colwise() /= p.rowwise().sum().array();
    return p;
}

void check_labels(const ModelWeights& w, Eigen::Index rows, std::span<const std::uint8_t> labels) {
    if (rows == 0) throw std::logic_error("empty batch");
    if (static_cast<std::size_t>(rows) != labels.size()) {
        throw std::logic_error(fmt::format("{} samples but {} labels", rows, labels.size()));
    }
    for (auto y : labels) {
        if (y >= w.num_classes()) throw std::logic_error(fmt::format("label {} out of range", y));
    }
}

double mean_cross_entropy(const Matrix& logits, std::span<const std::uint8_t> labels) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
}

// Runs forward and backward. on_grad(l, dW, db) is called from the output
// layer down, after layer l's weights have been read for the last time, so
// the callback may update them in place.
template <typename OnGrad>
double backprop(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x,
                std::span<const std::uint8_t> labels, OnGrad&& on_grad) {
    check_labels(w, x.rows(), labels);
    ForwardPass pass = run_forward(w, x);
    const double loss_value = mean_cross_entropy(pass.logits, labels);

    Matrix dz = softmax_rows(pass.logits);
    for (Eigen::Index i = 0; i < dz.rows(); ++i) dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    dz /= static_cast<double>(x.rows());

    for (std::size_t l = w.layers.size(); l-- > 0;) {
        Matrix dw;
        if (l == 0) {
            dw.noalias() = dz.transpose() * x;
        } else {
            dw.noalias() = dz.transpose() * pass.hidden[l - 1];
        }
        Vector db = dz.colwise().sum().transpose();
        Matrix dz_prev;
        if (l > 0) {
            dz_prev.noalias() = dz * w.layers[l].weight;
            dz_prev.array() *= (pass.hidden[l - 1].array() > 0.0).cast<double>();
        }
        on_grad(l, dw, db);
        dz = std::move(dz_prev);
    }
    return loss_value;
}

}  // namespace

Matrix forward(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x) {
    return softmax_rows(run_forward(w, x).logits);
}

LossAndGrads loss_and_grads(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x,
                            std::span<const std::uint8_t> labels) {
    LossAndGrads out;
    out.grads = ModelWeights(w.layer_sizes());
    out.loss = backprop(w, x, labels, [&](std::size_t l, Matrix& dw, Vector& db) {
        out.grads.layers[l].weight = std::move(dw);
        out.grads.layers[l].bias = std::move(db);
    });
    return out;
}

double loss(const ModelWeights& w, const Eigen::Ref<const SampleMatrix>& x,
            std::span<const std::uint8_t> labels) {
    check_labels(w, x.rows(), labels);
    return mean_cross_entropy(run_forward(w, x).logits, labels);
}

LocalUpdateResult local_update(const ModelWeights& w0, const SampleMatrix& x,
                               std::span<const std::uint8_t> labels, const SgdParams& params,
                               RngStream& rng) {
    if (x.rows() == 0) throw std::logic_error("local_update: empty shard");
    if (params.epochs < 1 || params.batch_size < 1 || !(params.learning_rate >= 0.0)) {
        throw std::logic_error("local_update: invalid SGD parameters");
    }
    const auto n = static_cast<std::size_t>(x.rows());
    LocalUpdateResult result;
    result.weights = w0;
    ModelWeights& w = result.weights;
    const double eta = params.learning_rate;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SampleMatrix xb;
    std::vector<std::uint8_t> yb;

    double epoch_loss_sum = 0.0;
    for (int e = 0; e < params.epochs; ++e) {
        rng.shuffle(std::span<std::size_t>(order));
        double batch_loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += params.batch_size) {
            const std::size_t count = std::min(params.batch_size, n - start);
            xb.resize(static_cast<Eigen::Index>(count), x.cols());
            yb.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
                yb[i] = labels[order[start + i]];
            }
            batch_loss_sum += backprop(w, xb, yb, [&](std::size_t l, Matrix& dw, Vector& db) {
                w.layers[l].weight.noalias() -= eta * dw;
                w.layers[l].bias.noalias() -= eta * db;
            });
            ++batches;
        }
        epoch_loss_sum += batch_loss_sum / static_cast<double>(batches);
    }
    result.mean_epoch_loss = epoch_loss_sum / static_cast<double>(params.epochs);
    return result;
}

ModelWeights fedavg(std::span<const WeightedModel> updates) {
    if (updates.empty()) throw std::logic_error("fedavg: no updates");
    double alpha_sum = 0.0;
    for (const auto& u : updates) {
        if (u.model == nullptr) throw std::logic_error("fedavg: null model");
        if (!u.model->same_shape(*updates.front().model)) {
            throw std::logic_error("fedavg: mismatched shapes");
        }
        alpha_sum += u.alpha;
    }
    if (std::abs(alpha_sum - 1.0) > 1e-9) {
        throw std::logic_error(fmt::format("fedavg: weights sum to {}", alpha_sum));
    }
    if (updates.size() == 1) return *updates.front().model;
    ModelWeights out(updates.front().model->layer_sizes());
    for (const auto& u : updates) out.add_scaled(*u.model, u.alpha);
    return out;
}

ModelWeights fedavg_uniform(std::span<const ModelWeights> updates) {
    std::vector<WeightedModel> weighted;
    weighted.reserve(updates.size());
    const double alpha = updates.empty() ? 0.0 : 1.0 / static_cast<double>(updates.size());
    for (const auto& u : updates) weighted.push_back({&u, alpha});
    return fedavg(weighted);
}

namespace {

constexpr Eigen::Index kEvalChunk = 1000;

std::size_t argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    std::size_t best = 0;
    for (Eigen::Index c = 1; c < row.size(); ++c) {
        if (row(c) > row(static_cast<Eigen::Index>(best))) best = static_cast<std::size_t>(c);
    }
    return best;
}

}  // namespace

EvalResult evaluate(const ModelWeights& w, const SampleMatrix& x,
                    std::span<const std::uint8_t> labels) {
    check_labels(w, x.rows(), labels);
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < x.rows(); start += kEvalChunk) {
        const Eigen::Index count = std::min(kEvalChunk, x.rows() - start);
        const auto chunk_labels = labels.subspan(static_cast<std::size_t>(start),
                                                 static_cast<std::size_t>(count));
        const Matrix logits = run_forward(w, x.middleRows(start, count)).logits;
        loss_sum += mean_cross_entropy(logits, chunk_labels) * static_cast<double>(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            // Softmax is monotone, so the logits argmax is the prediction.
            if (argmax_lowest(logits.row(i)) == chunk_labels[static_cast<std::size_t>(i)]) ++correct;
        }
    }
    const auto n = static_cast<double>(x.rows());
    return {static_cast<double>(correct) / n, loss_sum / n};
}

std::vector<std::uint8_t> correct_mask(const ModelWeights& w, const SampleMatrix& x,
                                       std::span<const std::uint8_t> labels) {
    check_labels(w, x.rows(), labels);
    std::vector<std::uint8_t> mask(labels.size(), 0);
    for (Eigen::Index start = 0; start < x.rows(); start += kEvalChunk) {
        const Eigen::Index count = std::min(kEvalChunk, x.rows() - start);
        const Matrix logits = run_forward(w, x.middleRows(start, count)).logits;
        for (Eigen::Index i = 0; i < count; ++i) {
            const auto s = static_cast<std::size_t>(start + i);
            mask[s] = argmax_lowest(logits.row(i)) == labels[s] ? 1 : 0;
        }
    }
    return mask;
}

double sample_compute_time(const ComputeProfile& profile, RngStream& rng) {
    if (!(profile.xi_mips > 0.0)) throw std::logic_error("compute profile needs xi > 0");
    return rng.exponential(profile.mean_seconds());
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw std::runtime_error("weights snapshot truncated");
    }
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

constexpr char kWeightsMagic[4] = {'F', 'L', 'C', 'W'};

}  // namespace

void write_weights(std::ostream& out, const ModelWeights& w) {
    out.write(kWeightsMagic, sizeof(kWeightsMagic));
    write_le<std::uint32_t>(out, 1);
    const auto sizes = w.layer_sizes();
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sizes.size()));
    for (auto s : sizes) write_le<std::uint64_t>(out, s);
    for (const auto& layer : w.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) write_le(out, layer.weight(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) write_le(out, layer.bias(r));
    }
}

ModelWeights read_weights(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kWeightsMagic)) {
        throw std::runtime_error("not a weights snapshot");
    }
    if (read_le<std::uint32_t>(in) != 1) throw std::runtime_error("unsupported snapshot version");
    const auto count = read_le<std::uint32_t>(in);
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) s = read_le<std::uint64_t>(in);
    ModelWeights w(sizes);
    for (auto& layer : w.layers) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = read_le<double>(in);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = read_le<double>(in);
    }
    return w;
}

}  // namespace flchain::fl
