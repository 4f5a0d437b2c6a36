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

#include "flchain/update_store.hpp"

#include <fmt/format.h>

#include <stdexcept>
#include <sys/types.h>

namespace flchain::fl {

UpdateStore::UpdateStore(std::vector<std::size_t> layer_sizes)
    : layer_sizes_(std::move(layer_sizes)), file_(std::tmpfile()) {
    if (!file_) throw std::runtime_error("cannot create update store file");
    params_ = ModelWeights(layer_sizes_).parameter_count();
    buffer_.resize(params_);
}

chain::UpdateRef UpdateStore::append(const ModelWeights& w) {
    if (w.layer_sizes() != layer_sizes_) throw std::logic_error("update store: shape mismatch");
    w.flatten_into(buffer_);
    const auto offset = static_cast<off_t>(count_ * params_ * sizeof(double));
    if (fseeko(file_.get(), offset, SEEK_SET) != 0 ||
        std::fwrite(buffer_.data(), sizeof(double), params_, file_.get()) != params_) {
        throw std::runtime_error("update store: write failed");
    }
    return count_++;
}

ModelWeights UpdateStore::load(chain::UpdateRef ref) const {
    if (ref >= count_) throw std::logic_error(fmt::format("dangling update ref {}", ref));
    const auto offset = static_cast<off_t>(ref * params_ * sizeof(double));
    if (fseeko(file_.get(), offset, SEEK_SET) != 0 ||
        std::fread(buffer_.data(), sizeof(double), params_, file_.get()) != params_) {
        throw std::runtime_error("update store: read failed");
    }
    ModelWeights w(layer_sizes_);
    w.unflatten_from(buffer_);
    return w;
}

}  // namespace flchain::fl
