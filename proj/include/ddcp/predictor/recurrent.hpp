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

// LSTM and GRU baselines. The cell reads the context one value per step; a linear head maps the last hidden
// state to every horizon step at once.

#pragma once

#include "ddcp/predictor/nn.hpp"

#include <cstdint>
#include <vector>

namespace ddcp::nn {

// Rows of every state and input matrix are independent batch entries.

/// Gate order along the 4H columns: input, forget, candidate, output.
struct LstmWeights {
    Param w_x; // in x 4H
    Param w_h; // H x 4H
    Param b;   // 1 x 4H
};

struct LstmState {
    Matrix h, c;
};

struct LstmStepCache {
    Matrix x, h_prev, c_prev;
    Matrix i, f, g, o;
    Matrix tanh_c;
};

LstmState lstm_step(const Matrix &x, const LstmState &state, const LstmWeights &w, LstmStepCache *cache = nullptr);
/// Takes d(h), d(c) of the step output; accumulates weight gradients and returns d(state_prev). d(x) goes to
/// `dx` when given.
LstmState lstm_step_backward(const LstmStepCache &cache, const Matrix &dh, const Matrix &dc, LstmWeights &w,
                             Matrix *dx = nullptr);

/// Gate order along the 3H columns: reset, update, candidate. The reset gate multiplies the recurrent
/// candidate term after its bias.
struct GruWeights {
    Param w_x; // in x 3H
    Param w_h; // H x 3H
    Param b_x; // 1 x 3H
    Param b_h; // 1 x 3H
};

struct GruStepCache {
    Matrix x, h_prev;
    Matrix r, z, n;
    Matrix hn; // h_prev W_hn + b_hn
};

Matrix gru_step(const Matrix &x, const Matrix &h, const GruWeights &w, GruStepCache *cache = nullptr);
Matrix gru_step_backward(const GruStepCache &cache, const Matrix &dh, GruWeights &w, Matrix *dx = nullptr);

// ----------------------------------------------------------------------------------------------------------------

enum class CellKind { LSTM, GRU };

struct RecurrentConfig {
    CellKind cell = CellKind::LSTM;
    int hidden = 32;
    int horizon = 10;
    double forget_bias = 1.0; // LSTM only

    void validate() const;
    bool operator==(const RecurrentConfig &) const = default;
};

struct RecurrentParams {
    RecurrentConfig config;
    LstmWeights lstm;
    GruWeights gru;
    Param w_out; // H x horizon
    Param b_out; // 1 x horizon

    static RecurrentParams init(const RecurrentConfig &config, std::uint64_t seed);
    ParamRefs refs();
    ConstParamRefs refs() const;
};

struct RecurrentCache {
    std::vector<LstmStepCache> lstm;
    std::vector<GruStepCache> gru;
    Matrix h_last;
};

/// Runs the cell over the columns of `inputs` (batch x steps) and returns batch x horizon forecasts.
Matrix forward(const RecurrentParams &params, const Matrix &inputs, RecurrentCache *cache = nullptr);
void backward(RecurrentParams &params, const RecurrentCache &cache, const Matrix &d_output);

} // namespace ddcp::nn
