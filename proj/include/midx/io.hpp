// Copyright 2026 The midx Authors.
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

#ifndef MIDX_IO_HPP
#define MIDX_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "midx/core.hpp"

namespace midx {

// Embedding file: magic "MIDXEMB1", u32 n, u32 d (little-endian), then n*d
// IEEE-754 32-bit floats, row-major. Values are checked finite on load.
void save_embeddings(const Matrix& emb, const std::string& path);
Matrix load_embeddings(const std::string& path);

// Label CSV with header "query_id,class_id", one row per query in order.
void save_labels(const std::vector<std::uint32_t>& labels,
                 const std::string& path);
std::vector<std::uint32_t> load_labels(const std::string& path);

}  // namespace midx

#endif  // MIDX_IO_HPP
