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

// Helpers shared by the unit tests and the acceptance gate.

#pragma once

#include "flchain/model.hpp"
#include "flchain/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace flchain::support {

inline fl::SampleMatrix random_inputs(std::size_t rows, std::size_t cols, RngStream& rng,
                                      double scale = 1.0) {
    fl::SampleMatrix x(rows, cols);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = scale * rng.normal();
    return x;
}

inline std::vector<std::uint8_t> random_labels(std::size_t n, std::size_t classes, RngStream& rng) {
    std::vector<std::uint8_t> y(n);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.uniform_index(classes));
    return y;
}

inline fl::ModelWeights random_model(std::span<const std::size_t> sizes, RngStream& rng, double scale) {
    fl::ModelWeights w(sizes);
    for (auto& layer : w.layers) {
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = scale * rng.normal();
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias.data()[i] = scale * rng.normal();
    }
    return w;
}

// Mean cross-entropy in long double from flat parameters (same layout as
// flatten_into: each layer's weight column-major, then its bias). Used as the
// finite-difference oracle so its rounding error stays far below the
// gradients being checked.
inline long double oracle_loss(std::span<const std::size_t> sizes, const std::vector<long double>& params,
                               const fl::SampleMatrix& x, std::span<const std::uint8_t> labels) {
    long double total = 0.0L;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<long double> a(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c) a[c] = x(r, c);
        std::size_t offset = 0;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const std::size_t in = sizes[l];
            const std::size_t out = sizes[l + 1];
            std::vector<long double> z(out);
            for (std::size_t i = 0; i < out; ++i) {
                long double s = params[offset + in * out + i];
                for (std::size_t j = 0; j < in; ++j) s += params[offset + j * out + i] * a[j];
                z[i] = s;
            }
            offset += in * out + out;
            if (l + 2 < sizes.size()) {
                for (auto& v : z) v = std::max(0.0L, v);
            }
            a = std::move(z);
        }
        const long double m = *std::max_element(a.begin(), a.end());
        long double sum = 0.0L;
        for (auto v : a) sum += std::exp(v - m);
        total += -(a[labels[r]] - m - std::log(sum));
    }
    return total / static_cast<long double>(x.rows());
}

struct GradCheck {
    double worst_error = 0.0;   // relative, or absolute where both sides are below 1e-7
    double worst_loss_gap = 0.0;  // analytic loss vs oracle loss
    std::size_t parameters = 0;
};

// Central differences (step `eps`) of the oracle loss against
// loss_and_grads on every parameter of `nets` random networks.
inline GradCheck gradient_check(std::span<const std::size_t> sizes, int nets, std::uint64_t seed,
                                double eps = 1e-5) {
    RngStream rng(seed, "gradcheck");
    GradCheck result;
    for (int net = 0; net < nets; ++net) {
        const auto w = random_model(sizes, rng, 1.0);
        const auto x = random_inputs(5, sizes.front(), rng);
        const auto y = random_labels(5, sizes.back(), rng);
        const auto analytic = fl::loss_and_grads(w, x, y);

        const std::size_t n = w.parameter_count();
        std::vector<double> params(n);
        std::vector<double> grads(n);
        w.flatten_into(params);
        analytic.grads.flatten_into(grads);
        const std::vector<long double> base(params.begin(), params.end());
        result.worst_loss_gap = std::max(
            result.worst_loss_gap,
            std::abs(analytic.loss - static_cast<double>(oracle_loss(sizes, base, x, y))));
        for (std::size_t i = 0; i < n; ++i) {
            auto shifted = base;
            shifted[i] = base[i] + eps;
            const long double up = oracle_loss(sizes, shifted, x, y);
            shifted[i] = base[i] - eps;
            const long double down = oracle_loss(sizes, shifted, x, y);
            const double numeric = static_cast<double>((up - down) / (2.0L * eps));
            const double scale = std::max(std::abs(numeric), std::abs(grads[i]));
            const double err = scale < 1e-7 ? std::abs(numeric - grads[i])
                                            : std::abs(numeric - grads[i]) / scale;
            result.worst_error = std::max(result.worst_error, err);
        }
        result.parameters += n;
    }
    return result;
}

}  // namespace flchain::support
