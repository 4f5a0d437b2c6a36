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

#include "flchain/chain.hpp"
#include "flchain/model.hpp"

#include <cstdio>
#include <memory>
#include <vector>

namespace flchain::fl {

/// Append-only store of local updates, spilled to an anonymous temporary
/// file. A run can produce thousands of updates of ~1.6 MB each, far more
/// than fits in memory, while only a block's worth is read back at a time.
class UpdateStore {
public:
    explicit UpdateStore(std::vector<std::size_t> layer_sizes);

    chain::UpdateRef append(const ModelWeights& w);

    /// Throws std::logic_error for a ref that was never appended.
    ModelWeights load(chain::UpdateRef ref) const;

    std::size_t size() const noexcept { return count_; }

private:
    struct FileCloser {
        void operator()(std::FILE* f) const noexcept { std::fclose(f); }
    };

    std::vector<std::size_t> layer_sizes_;
    std::size_t params_ = 0;
    std::size_t count_ = 0;
    std::unique_ptr<std::FILE, FileCloser> file_;
    mutable std::vector<double> buffer_;
};

}  // namespace flchain::fl
