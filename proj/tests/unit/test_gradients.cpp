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


// Central finite-difference checks of every hand-written backward pass.

#include "ddcp/predictor/attention.hpp"
#include "ddcp/predictor/recurrent.hpp"
#include "ddcp/predictor/transformer.hpp"
#include "test_util.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace ddcp;
using namespace ddcp::nn;
using ddcp::testing::gradient_error;

namespace {

constexpr double kTol = 1e-4;

Matrix randn(Eigen::Index r, Eigen::Index c, std::mt19937_64 &rng, double s = 1.0)
{
    std::normal_distribution<double> g(0.0, s);
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m(i) = g(rng);
    return m;
}

/// Fixed random projection turns any output into a scalar loss with a known output gradient.
struct Probe {
    Matrix w;
    double operator()(const Matrix &out) const { return (out.array() * w.array()).sum(); }
};

} // namespace

TEST_CASE("layer norm and GELU gradients", "[gradients]")
{
    std::mt19937_64 rng(1);
    Matrix x = randn(4, 6, rng);
    Param gamma("g", 1, 6), beta("b", 1, 6);
    gamma.value = randn(1, 6, rng);
    beta.value = randn(1, 6, rng);
    const Probe probe{randn(4, 6, rng)};

    LayerNormCache cache;
    layer_norm(x, gamma, beta, &cache);
    const Matrix dx = layer_norm_backward(probe.w, cache, gamma, beta);
    auto loss = [&] { return probe(layer_norm(x, gamma, beta)); };
    CHECK(gradient_error(gamma, loss) < kTol);
    CHECK(gradient_error(beta, loss) < kTol);
    CHECK(gradient_error(x, dx, loss) < kTol);

    const Matrix dg = gelu_backward(x, probe.w);
    CHECK(gradient_error(x, dg, [&] { return probe(gelu(x)); }) < kTol);
}

TEST_CASE("attention gradients", "[gradients]")
{
    std::mt19937_64 rng(2);
    Matrix q = randn(4, 8, rng), k = randn(4, 8, rng), v = randn(4, 8, rng);
    const Probe probe{randn(4, 8, rng)};
    for (bool causal : {false, true}) {
        AttentionCache cache;
        attention(q, k, v, causal, &cache);
        const AttentionGrads g = attention_backward(cache, probe.w);
        auto loss = [&] { return probe(attention(q, k, v, causal)); };
        CHECK(gradient_error(q, g.dq, loss) < kTol);
        CHECK(gradient_error(k, g.dk, loss) < kTol);
        CHECK(gradient_error(v, g.dv, loss) < kTol);
    }
}

TEST_CASE("multi-head attention gradients", "[gradients]")
{
    std::mt19937_64 rng(3);
    const int D = 8, C = 2;
    Matrix x = randn(5, D, rng);
    AttentionWeights w{Param("wq", D, D), Param("wk", D, D), Param("wv", D, D), Param("wo", D, D)};
    for (Param *p : {&w.wq, &w.wk, &w.wv, &w.wo})
        p->value = randn(D, D, rng, 0.4);
    const Probe probe{randn(5, D, rng)};
    MultiHeadCache cache;
    multi_head(x, w, C, true, &cache);
    const Matrix dx = multi_head_backward(cache, probe.w, w, C);
    auto loss = [&] { return probe(multi_head(x, w, C, true)); };
    for (Param *p : {&w.wq, &w.wk, &w.wv, &w.wo})
        CHECK(gradient_error(*p, loss) < kTol);
    CHECK(gradient_error(x, dx, loss) < kTol);
}

TEST_CASE("transformer gradients for every tensor", "[gradients]")
{
    TransformerConfig cfg;
    cfg.segment_length = 4;
    cfg.d_model = 16;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.ff_dim = 32;
    cfg.max_tokens = 5;
    TransformerParams params = TransformerParams::init(cfg, 5);
    std::mt19937_64 rng(6);
    // Non-trivial norm parameters so their gradients are exercised away from the identity.
    for (Param *p : params.refs())
        if (p->name.find("ln") != std::string::npos || p->name.find("b") == 0)
            p->value += randn(p->value.rows(), p->value.cols(), rng, 0.1);
    const Matrix tokens = randn(5, 4, rng);

    for (Loss kind : {Loss::MSE, Loss::MAE}) {
        zero_grads(params.refs());
        TransformerCache cache;
        const Matrix out = forward(params, tokens, &cache);
        Matrix grad;
        token_loss(kind, shift_predictions(out, tokens), tokens, &grad);
        Matrix d_out = Matrix::Zero(out.rows(), out.cols());
        d_out.topRows(out.rows() - 1) = grad.bottomRows(out.rows() - 1);
        backward(params, cache, d_out);
        auto loss = [&] { return token_loss(kind, shift_predictions(forward(params, tokens), tokens), tokens); };
        for (Param *p : params.refs()) {
            INFO(p->name);
            CHECK(gradient_error(*p, loss) < kTol);
        }
    }
}

TEST_CASE("LSTM gradients through five steps", "[gradients]")
{
    RecurrentConfig cfg;
    cfg.cell = CellKind::LSTM;
    cfg.hidden = 6;
    cfg.horizon = 3;
    RecurrentParams params = RecurrentParams::init(cfg, 7);
    std::mt19937_64 rng(8);
    const Matrix inputs = randn(4, 5, rng);
    const Probe probe{randn(4, 3, rng)};
    RecurrentCache cache;
    forward(params, inputs, &cache);
    zero_grads(params.refs());
    backward(params, cache, probe.w);
    for (Param *p : params.refs()) {
        INFO(p->name);
        CHECK(gradient_error(*p, [&] { return probe(forward(params, inputs)); }) < kTol);
    }

    // Single-cell step including the input and state gradients.
    LstmState st{randn(3, 6, rng), randn(3, 6, rng)};
    Matrix x = randn(3, 1, rng);
    const Probe ph{randn(3, 6, rng)}, pc{randn(3, 6, rng)};
    LstmStepCache sc;
    lstm_step(x, st, params.lstm, &sc);
    zero_grads(params.refs());
    Matrix dx;
    const LstmState dprev = lstm_step_backward(sc, ph.w, pc.w, params.lstm, &dx);
    auto step_loss = [&] {
        const LstmState o = lstm_step(x, st, params.lstm);
        return ph(o.h) + pc(o.c);
    };
    CHECK(gradient_error(x, dx, step_loss) < kTol);
    CHECK(gradient_error(st.h, dprev.h, step_loss) < kTol);
    CHECK(gradient_error(st.c, dprev.c, step_loss) < kTol);
}

TEST_CASE("GRU gradients through five steps", "[gradients]")
{
    RecurrentConfig cfg;
    cfg.cell = CellKind::GRU;
    cfg.hidden = 6;
    cfg.horizon = 3;
    RecurrentParams params = RecurrentParams::init(cfg, 9);
    std::mt19937_64 rng(10);
    for (Param *p : params.refs())
        p->value += randn(p->value.rows(), p->value.cols(), rng, 0.1);
    const Matrix inputs = randn(4, 5, rng);
    const Probe probe{randn(4, 3, rng)};
    RecurrentCache cache;
    forward(params, inputs, &cache);
    zero_grads(params.refs());
    backward(params, cache, probe.w);
    for (Param *p : params.refs()) {
        INFO(p->name);
        CHECK(gradient_error(*p, [&] { return probe(forward(params, inputs)); }) < kTol);
    }

    Matrix h = randn(3, 6, rng), x = randn(3, 1, rng);
    const Probe ph{randn(3, 6, rng)};
    GruStepCache sc;
    gru_step(x, h, params.gru, &sc);
    Matrix dx;
    const Matrix dh = gru_step_backward(sc, ph.w, params.gru, &dx);
    auto step_loss = [&] { return ph(gru_step(x, h, params.gru)); };
    CHECK(gradient_error(x, dx, step_loss) < kTol);
    CHECK(gradient_error(h, dh, step_loss) < kTol);
}
