// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Binary checkpoint layout (all integers and floats little-endian):
//
//   8 bytes   magic "DDCPCKPT"
//   u32       format version (1)
//   u32       model kind (0 transformer, 1 lstm, 2 gru, 3 persistence)
//   i32 x2    context, horizon
//   u8        instance normalization flag
//   transformer: i32 segment_length, d_model, layers, heads, ff_dim, max_tokens; u8 time_embedding
//   lstm / gru:  i32 hidden; f64 forget_bias
//   u32       tensor count
//   per tensor, in refs() order: u32 rows, u32 cols, rows*cols f64 in row-major order

#pragma once

#include "ddcp/predictor/forecaster.hpp"

#include <filesystem>
#include <iosfwd>

namespace ddcp::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream &os, const Forecaster &f);
Forecaster read_checkpoint(std::istream &is);

void save_checkpoint(const Forecaster &f, const std::filesystem::path &path);
/// Throws MissingArtifactError if the file does not exist and IoError if it is malformed.
Forecaster load_checkpoint(const std::filesystem::path &path);

} // namespace ddcp::nn
