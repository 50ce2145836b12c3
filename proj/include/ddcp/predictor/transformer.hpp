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

// Decoder-only transformer over time-series segments.
//
// A univariate context of U*J values is cut into U tokens of J values. Each token is embedded with W_e plus a
// learned per-position vector, passed through L pre-norm blocks of causal multi-head attention and a GELU
// feed-forward network, and decoded with W_d. Output row u is the prediction of token u+1, so every position
// is supervised independently and forecasting proceeds one token at a time.

#pragma once

#include "ddcp/predictor/attention.hpp"
#include "ddcp/predictor/nn.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ddcp::nn {

struct TokenizerConfig {
    int segment_length = 5; // J
    int token_count = 4;    // U
    int context_length() const { return segment_length * token_count; }
    void validate() const;
};

/// Cuts x into consecutive segments of J values, one token per row.
Matrix tokenize(const Vector &x, int segment_length);
/// Concatenates token rows back into a series.
Vector detokenize(const Matrix &tokens);

struct TransformerConfig {
    int segment_length = 5; // J
    int d_model = 64;       // D
    int layers = 2;         // L
    int heads = 4;          // C
    int ff_dim = 128;
    int max_tokens = 16;
    bool time_embedding = true;

    int head_dim() const { return d_model / heads; }
    void validate() const;
    bool operator==(const TransformerConfig &) const = default;
};

struct TransformerLayer {
    Param ln1_gamma, ln1_beta;
    AttentionWeights attn;
    Param ln2_gamma, ln2_beta;
    Param w1, b1, w2, b2;
};

struct TransformerParams {
    TransformerConfig config;
    Param w_e;  // D x J
    Param w_d;  // D x J
    Param te;   // max_tokens x D
    std::vector<TransformerLayer> layers;
    Param lnf_gamma, lnf_beta;

    static TransformerParams init(const TransformerConfig &config, std::uint64_t seed);

    /// Fixed parameter order shared by the optimizer and the checkpoint format.
    ParamRefs refs();
    ConstParamRefs refs() const;
};

struct TransformerLayerCache {
    Matrix x_in;
    LayerNormCache ln1;
    MultiHeadCache attn;
    Matrix x_mid;
    LayerNormCache ln2;
    Matrix ln2_out;
    Matrix ff_pre;
    Matrix ff_act;
};

struct TransformerCache {
    Matrix tokens;
    std::vector<TransformerLayerCache> layers;
    LayerNormCache lnf;
    Matrix lnf_out;
};

/// Next-token predictions for every position: row u of the result predicts token u+1.
Matrix forward(const TransformerParams &params, const Matrix &tokens, TransformerCache *cache = nullptr);

/// Accumulates parameter gradients for d(loss)/d(output).
void backward(TransformerParams &params, const TransformerCache &cache, const Matrix &d_output);

enum class Loss { MSE, MAE };

/// Token-wise loss over tokens u = 2..U (rows 1..U-1), normalized by U*J. Row 0 of `predicted` is ignored.
/// If `grad` is given it receives d(loss)/d(predicted).
double loss_mse(const Matrix &predicted, const Matrix &actual, Matrix *grad = nullptr);
double loss_mae(const Matrix &predicted, const Matrix &actual, Matrix *grad = nullptr);
double token_loss(Loss kind, const Matrix &predicted, const Matrix &actual, Matrix *grad = nullptr);

/// Aligns forward() output with the tokens it predicts: row u of the result is output row u-1; row 0 copies
/// the first actual token.
Matrix shift_predictions(const Matrix &output, const Matrix &tokens);

} // namespace ddcp::nn
