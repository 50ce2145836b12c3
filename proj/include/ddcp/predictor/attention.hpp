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

#pragma once

#include "ddcp/predictor/nn.hpp"

#include <vector>

namespace ddcp::nn {

struct AttentionCache {
    Matrix q, k, v;
    Matrix probs; // softmax weights; masked entries are exactly 0
    double scale = 1.0;
};

struct AttentionGrads {
    Matrix dq, dk, dv;
};

/// softmax(Q K^T / sqrt(d_k)) V. With `causal`, row i attends to rows 0..i only.
Matrix attention(const Matrix &q, const Matrix &k, const Matrix &v, bool causal, AttentionCache *cache = nullptr);
AttentionGrads attention_backward(const AttentionCache &cache, const Matrix &d_out);

/// Bias-free projections of one multi-head attention block. Head c uses columns [c*d_k, (c+1)*d_k) of
/// wq/wk/wv; wo maps the concatenated heads back to the model dimension.
struct AttentionWeights {
    Param wq, wk, wv, wo;
};

struct MultiHeadCache {
    Matrix input;
    Matrix concat;
    std::vector<AttentionCache> heads;
};

Matrix multi_head(const Matrix &input, const AttentionWeights &w, int heads, bool causal,
                  MultiHeadCache *cache = nullptr);
/// Accumulates weight gradients into `w` and returns d(input).
Matrix multi_head_backward(const MultiHeadCache &cache, const Matrix &d_out, AttentionWeights &w, int heads);

} // namespace ddcp::nn
