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


#include "ddcp/errors.hpp"
#include "ddcp/predictor/attention.hpp"
#include "ddcp/predictor/checkpoint.hpp"
#include "ddcp/predictor/corpus.hpp"
#include "ddcp/predictor/forecaster.hpp"
#include "ddcp/predictor/recurrent.hpp"
#include "ddcp/predictor/transformer.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

using namespace ddcp;
using namespace ddcp::nn;
using Catch::Approx;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m(i) = g(rng);
    return m;
}

TransformerConfig tiny_config()
{
    TransformerConfig c;
    c.segment_length = 5;
    c.d_model = 16;
    c.layers = 1;
    c.heads = 2;
    c.ff_dim = 32;
    c.max_tokens = 6;
    return c;
}

WindowedDataset constant_dataset(int n)
{
    std::vector<UnivariateSeries> s;
    for (int i = 0; i < n; ++i) {
        UnivariateSeries u;
        u.trace_id = "const";
        u.path_id = i;
        u.values = Eigen::VectorXd::Constant(40, -1.0 + 2.0 * i / (n - 1));
        s.push_back(std::move(u));
    }
    return window_series(std::move(s), 20, 10, 1);
}

double sample_variance(const Eigen::VectorXd &x)
{
    return (x.array() - x.mean()).square().sum() / double(x.size() - 1);
}

} // namespace

TEST_CASE("tokenize slices into consecutive segments", "[predictor]")
{
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(20, 1, 20);
    const Matrix t = tokenize(x, 4);
    REQUIRE(t.rows() == 5);
    REQUIRE(t.cols() == 4);
    CHECK(t.row(0) == Eigen::RowVector4d(1, 2, 3, 4));
    CHECK(t.row(4) == Eigen::RowVector4d(17, 18, 19, 20));
    CHECK(detokenize(t) == x);

    const Matrix whole = tokenize(x, 20);
    CHECK(whole.rows() == 1);
    CHECK(whole.row(0).transpose() == x);

    CHECK_THROWS_AS(tokenize(x, 3), std::invalid_argument);
    CHECK_THROWS_AS(tokenize(x, 0), std::invalid_argument);

    const Eigen::VectorXd r = randn(30, 1, 4);
    for (int j : {1, 2, 3, 5, 6, 10, 15, 30})
        CHECK(detokenize(tokenize(r, j)) == r);
}

TEST_CASE("attention on degenerate inputs", "[predictor]")
{
    SECTION("single token returns the value row")
    {
        const Matrix q = randn(1, 4, 1), k = randn(1, 4, 2), v = randn(1, 3, 3);
        CHECK(attention(q, k, v, false).isApprox(v, 1e-15));
        CHECK(attention(q, k, v, true).isApprox(v, 1e-15));
    }
    SECTION("identical keys average the values")
    {
        Matrix k(2, 4);
        k.row(0) = randn(1, 4, 5);
        k.row(1) = k.row(0);
        const Matrix q = Matrix::Constant(1, 4, 0.3);
        const Matrix v = randn(2, 3, 6);
        const Matrix out = attention(q, k, v, false);
        CHECK((out.row(0) - 0.5 * (v.row(0) + v.row(1))).norm() < 1e-14);
    }
    SECTION("shape errors")
    {
        CHECK_THROWS_AS(attention(randn(2, 4, 1), randn(2, 3, 1), randn(2, 3, 1), false), std::invalid_argument);
        CHECK_THROWS_AS(attention(randn(2, 4, 1), randn(2, 4, 1), randn(3, 3, 1), false), std::invalid_argument);
    }
}

TEST_CASE("softmax rows sum to one and masked entries are zero", "[predictor]")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix q = 3.0 * randn(6, 8, seed), k = 3.0 * randn(6, 8, seed + 100), v = randn(6, 8, seed + 200);
        for (bool causal : {false, true}) {
            AttentionCache cache;
            attention(q, k, v, causal, &cache);
            for (Eigen::Index i = 0; i < 6; ++i) {
                CHECK(std::abs(cache.probs.row(i).sum() - 1.0) < 1e-12);
                if (causal)
                    for (Eigen::Index j = i + 1; j < 6; ++j)
                        CHECK(cache.probs(i, j) == 0.0);
            }
        }
    }
}

TEST_CASE("multi-head reductions", "[predictor]")
{
    const int D = 8;
    AttentionWeights w{Param("wq", D, D), Param("wk", D, D), Param("wv", D, D), Param("wo", D, D)};
    w.wq.value = randn(D, D, 1);
    w.wk.value = randn(D, D, 2);
    w.wv.value = randn(D, D, 3);
    w.wo.value = Matrix::Identity(D, D);
    const Matrix x = randn(5, D, 4);

    for (bool causal : {false, true}) {
        const Matrix single = attention(x * w.wq.value, x * w.wk.value, x * w.wv.value, causal);
        CHECK((multi_head(x, w, 1, causal) - single).norm() < 1e-12);
    }
    w.wo.value = randn(D, D, 5);
    const Matrix zero = multi_head(Matrix::Zero(5, D), w, 2, true);
    CHECK(zero.rows() == 5);
    CHECK(zero.cols() == D);
    CHECK(zero.isZero(0.0));
    CHECK(multi_head(x, w, 4, true).rows() == 5);
    CHECK_THROWS_AS(multi_head(x, w, 3, true), std::invalid_argument);
}

TEST_CASE("transformer forward is causal", "[predictor]")
{
    TransformerConfig cfg = tiny_config();
    cfg.layers = 2;
    const TransformerParams p = TransformerParams::init(cfg, 3);
    const Matrix tokens = randn(6, 5, 9);
    const Matrix base = forward(p, tokens);
    for (Eigen::Index u = 0; u + 1 < tokens.rows(); ++u) {
        Matrix changed = tokens;
        changed.bottomRows(tokens.rows() - u - 1) = randn(tokens.rows() - u - 1, 5, 50 + u);
        const Matrix out = forward(p, changed);
        // Bit-identical prefix.
        CHECK((out.topRows(u + 1).array() == base.topRows(u + 1).array()).all());
        CHECK(out.row(u + 1) != base.row(u + 1));
    }
}

TEST_CASE("zero weights give zero predictions", "[predictor]")
{
    TransformerParams p = TransformerParams::init(tiny_config(), 4);
    for (Param *x : p.refs())
        x->value.setZero();
    const Matrix out = forward(p, randn(4, 5, 1));
    CHECK(out.isZero(0.0));
}

TEST_CASE("token losses", "[predictor]")
{
    Matrix actual(2, 2), pred(2, 2);
    actual << 9, 9, 1, 2;
    pred << -5, 7, 4, 6; // first row is never scored
    CHECK(loss_mse(pred, actual) == Approx(6.25).epsilon(1e-15));
    CHECK(loss_mae(pred, actual) == Approx(1.75).epsilon(1e-15));
    CHECK(token_loss(Loss::MSE, actual, actual) == 0.0);
    CHECK(token_loss(Loss::MAE, actual, actual) == 0.0);
    CHECK_THROWS_AS(loss_mse(Matrix::Zero(3, 2), actual), std::invalid_argument);

    const Matrix tokens = randn(4, 5, 2), out = randn(4, 5, 3);
    const Matrix shifted = shift_predictions(out, tokens);
    CHECK(shifted.row(0) == tokens.row(0));
    CHECK(shifted.bottomRows(3) == out.topRows(3));
}

TEST_CASE("recurrent cells", "[predictor]")
{
    const int H = 4;
    SECTION("zero weights keep a zero state")
    {
        LstmWeights lw{Param("wx", 1, 4 * H), Param("wh", H, 4 * H), Param("b", 1, 4 * H)};
        LstmState s{Matrix::Zero(2, H), Matrix::Zero(2, H)};
        for (int t = 0; t < 5; ++t) {
            LstmStepCache c;
            s = lstm_step(randn(2, 1, t), s, lw, &c);
            CHECK((c.i.array() == 0.5).all());
            CHECK((c.f.array() == 0.5).all());
            CHECK((c.o.array() == 0.5).all());
            CHECK(c.g.isZero(0.0));
        }
        CHECK(s.h.isZero(0.0));
        CHECK(s.c.isZero(0.0));

        GruWeights gw{Param("wx", 1, 3 * H), Param("wh", H, 3 * H), Param("bx", 1, 3 * H), Param("bh", 1, 3 * H)};
        Matrix h = Matrix::Zero(2, H);
        for (int t = 0; t < 5; ++t) {
            GruStepCache c;
            h = gru_step(randn(2, 1, t), h, gw, &c);
            CHECK((c.r.array() == 0.5).all());
            CHECK((c.z.array() == 0.5).all());
        }
        CHECK(h.isZero(0.0));
    }
    SECTION("saturated forget gate carries the cell state")
    {
        LstmWeights lw{Param("wx", 1, 4 * H), Param("wh", H, 4 * H), Param("b", 1, 4 * H)};
        lw.b.value.middleCols(0, H).setConstant(-40.0); // input gate shut
        lw.b.value.middleCols(H, H).setConstant(40.0);  // forget gate open
        const Matrix c0 = randn(1, H, 8);
        LstmState s{Matrix::Zero(1, H), c0};
        for (int t = 0; t < 10; ++t)
            s = lstm_step(randn(1, 1, t), s, lw);
        // Analytic decay after 10 steps: 1 - sigmoid(40)^10, about 4e-17.
        const double decay = 1.0 - std::pow(sigmoid(40.0), 10);
        CHECK(decay < 1e-6);
        CHECK(((s.c - c0).array().abs() <= c0.array().abs() * 1e-6).all());
    }
    SECTION("gates stay in (0,1) for large inputs")
    {
        RecurrentConfig rc;
        rc.hidden = H;
        RecurrentParams p = RecurrentParams::init(rc, 2);
        LstmState s{Matrix::Zero(1, H), Matrix::Zero(1, H)};
        for (int t = 0; t < 10; ++t) {
            LstmStepCache c;
            s = lstm_step(Matrix::Constant(1, 1, 5.0 * t), s, p.lstm, &c);
            CHECK((c.f.array() > 0.0).all());
            CHECK((c.f.array() <= 1.0).all());
            CHECK(s.c.allFinite());
        }
    }
    SECTION("shape errors")
    {
        LstmWeights lw{Param("wx", 1, 4 * H), Param("wh", H, 4 * H), Param("b", 1, 4 * H)};
        CHECK_THROWS_AS(lstm_step(Matrix::Zero(1, 2), {Matrix::Zero(1, H), Matrix::Zero(1, H)}, lw),
                        std::invalid_argument);
        CHECK_THROWS_AS(lstm_step(Matrix::Zero(1, 1), {Matrix::Zero(1, H), Matrix::Zero(1, H + 1)}, lw),
                        std::invalid_argument);
    }
}

TEST_CASE("persistence and forecast lengths", "[predictor]")
{
    const Forecaster pers = Forecaster::persistence(20, 10);
    Eigen::VectorXd ctx = randn(20, 1, 3);
    ctx(19) = 0.7;
    CHECK(predict(pers, ctx, 10) == Eigen::VectorXd::Constant(10, 0.7));

    Forecaster tr = Forecaster::make_transformer(tiny_config(), 20, 10, 5);
    RecurrentConfig rc;
    rc.hidden = 8;
    rc.horizon = 10;
    Forecaster lstm = Forecaster::make_recurrent(rc, 20, 10, 6);
    rc.cell = CellKind::GRU;
    Forecaster gru = Forecaster::make_recurrent(rc, 20, 10, 7);
    for (const Forecaster *f : std::initializer_list<const Forecaster *>{&pers, &tr, &lstm, &gru}) {
        for (int h : {5, 10}) {
            CHECK(predict(*f, ctx, h).size() == h);
            const Matrix batch = predict_batch(*f, randn(3, 20, 4), h);
            CHECK(batch.rows() == 3);
            CHECK(batch.cols() == h);
        }
        CHECK_THROWS_AS(predict(*f, randn(19, 1, 1), 10), std::invalid_argument);
    }
    // Batched and single-window predictions agree.
    const Matrix many = randn(4, 20, 12);
    const Matrix b = predict_batch(tr, many, 10);
    for (Eigen::Index i = 0; i < 4; ++i)
        CHECK((b.row(i).transpose() - predict(tr, many.row(i).transpose(), 10)).norm() < 1e-12);
}

TEST_CASE("training is deterministic for a seed", "[predictor]")
{
    auto corpus = pretrain_corpus(3, [] {
        CorpusConfig c;
        c.series_per_family = 2;
        c.length = 60;
        return c;
    }());
    const WindowedDataset data = window_series(corpus, 20, 10, 3);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.max_steps = 15;
    cfg.seed = 42;
    for (ModelKind kind : {ModelKind::Transformer, ModelKind::LSTM}) {
        auto make = [&] {
            if (kind == ModelKind::Transformer)
                return Forecaster::make_transformer(tiny_config(), 20, 10, 1);
            RecurrentConfig rc;
            rc.hidden = 8;
            return Forecaster::make_recurrent(rc, 20, 10, 1);
        };
        Forecaster a = make(), b = make();
        const TrainResult ra = train(a, data, cfg), rb = train(b, data, cfg);
        CHECK(ra.loss_curve.size() == 15);
        CHECK(ra.loss_curve == rb.loss_curve);
        const auto pa = std::as_const(a).refs(), pb = std::as_const(b).refs();
        for (std::size_t i = 0; i < pa.size(); ++i)
            CHECK(pa[i]->value == pb[i]->value);

        cfg.seed = 43;
        Forecaster c = make();
        CHECK(train(c, data, cfg).loss_curve != ra.loss_curve);
        cfg.seed = 42;
    }
    Forecaster pers = Forecaster::persistence(20, 10);
    CHECK_THROWS_AS(train(pers, data, cfg), std::invalid_argument);
    Forecaster t = Forecaster::make_transformer(tiny_config(), 20, 10, 1);
    CHECK_THROWS_AS(train(t, WindowedDataset{}, cfg), std::invalid_argument);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(t, data, cfg), std::invalid_argument);
}

TEST_CASE("constant series are fitted", "[predictor]")
{
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.max_steps = 200;
    cfg.loss = Loss::MSE;
    cfg.seed = 1;
    cfg.cosine_decay = true;
    cfg.final_lr_fraction = 0.0;

    // The model has to learn the level itself.
    std::vector<UnivariateSeries> s(1);
    s[0].trace_id = "const";
    s[0].values = Eigen::VectorXd::Constant(40, 0.5);
    const WindowedDataset data = window_series(s, 20, 10, 1);
    Forecaster f = Forecaster::make_transformer(tiny_config(), 20, 10, 2);
    f.instance_norm = false;
    CHECK(train(f, data, cfg).loss_curve.back() < 1e-6);

    // Autoregressive generation compounds token error, so the forecast check trains longer.
    Forecaster g = Forecaster::make_transformer(tiny_config(), 20, 10, 2);
    g.instance_norm = false;
    cfg.max_steps = 1500;
    train(g, data, cfg);
    const Eigen::VectorXd y = predict(g, Eigen::VectorXd::Constant(20, 0.5), 10);
    CHECK((y.array() - 0.5).abs().maxCoeff() < 1e-3);

    // With per-window normalization any constant level maps to the same zero input.
    Forecaster h = Forecaster::make_transformer(tiny_config(), 20, 10, 2);
    cfg.max_steps = 200;
    train(h, constant_dataset(9), cfg);
    for (double c : {-0.75, 0.0, 3.0}) {
        const Eigen::VectorXd z = predict(h, Eigen::VectorXd::Constant(20, c), 10);
        CHECK((z.array() - c).abs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("pretraining corpus", "[predictor]")
{
    CorpusConfig cfg;
    cfg.series_per_family = 6;
    cfg.length = 100;
    const auto a = pretrain_corpus(17, cfg), b = pretrain_corpus(17, cfg), c = pretrain_corpus(18, cfg);
    REQUIRE(a.size() == 24);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].values == b[i].values);
        CHECK(a[i].values != c[i].values);
        CHECK(a[i].trace_id.starts_with(kSyntheticPrefix));
        CHECK(a[i].values.size() == 100);
        CHECK(a[i].values.allFinite());
    }

    SECTION("family selection")
    {
        CorpusConfig s = cfg;
        s.families = {CorpusFamily::Sine};
        const auto only = pretrain_corpus(17, s);
        REQUIRE(only.size() == 6);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(only[i].values == a[i].values);
        s.families.clear();
        CHECK_THROWS_AS(pretrain_corpus(17, s), std::invalid_argument);
        CHECK(parse_family("ar2") == CorpusFamily::AR2);
        CHECK_THROWS_AS(parse_family("chirp"), std::invalid_argument);
    }
}

TEST_CASE("corpus variance stays within configured bounds", "[predictor]")
{
    CorpusConfig cfg;
    cfg.series_per_family = 300;
    cfg.length = 2000;
    cfg.period_max = 20.0; // many full periods so the time variance approaches a^2/2
    const auto corpus = pretrain_corpus(5, cfg);
    auto family = [&](CorpusFamily f) {
        std::vector<double> v;
        for (const auto &s : corpus)
            if (s.trace_id == std::string(kSyntheticPrefix) + std::string(family_name(f)))
                v.push_back(sample_variance(s.values));
        REQUIRE(v.size() == 300);
        return v;
    };
    const double n2 = cfg.noise * cfg.noise;

    // Sine: 1..3 components, E[a^2]/2 each, a ~ U[amp_min, amp_max].
    const double ea2 = (std::pow(cfg.amp_max, 3) - std::pow(cfg.amp_min, 3)) / (3 * (cfg.amp_max - cfg.amp_min));
    double mean = 0;
    for (double v : family(CorpusFamily::Sine)) {
        CHECK(v <= 9 * cfg.amp_max * cfg.amp_max / 2 + 0.05);
        mean += v / 300;
    }
    CHECK(mean == Approx(2 * ea2 / 2 + n2).epsilon(0.1));

    // AR(2): stationary variance of the slowest and fastest pole pair brackets every series.
    auto ar_var = [&](double r, double theta) {
        const double a1 = 2 * r * std::cos(theta), a2 = -r * r;
        return cfg.ar_noise * cfg.ar_noise * (1 - a2) / ((1 + a2) * ((1 - a2) * (1 - a2) - a1 * a1));
    };
    const double lo = ar_var(0.3, 3.141592653589793 / 2), hi = ar_var(cfg.pole_max, 0.0);
    for (double v : family(CorpusFamily::AR2)) {
        CHECK(v >= 0.7 * lo);
        CHECK(v <= 1.5 * hi);
    }

    // Trend: the deterministic part spans at most slope_max*n + curvature_max*n^2.
    const double span = cfg.slope_max * cfg.length + cfg.curvature_max * cfg.length * cfg.length;
    for (double v : family(CorpusFamily::Trend))
        CHECK(v <= span * span / 4 + 10 * n2);

    // Piecewise: random-walk levels; each jump adds unit variance, so the mean variance grows with the
    // segment count and is at least the noise floor.
    for (double v : family(CorpusFamily::Piecewise))
        CHECK(v >= n2 * 0.5);
}

TEST_CASE("checkpoints round-trip exactly", "[predictor]")
{
    RecurrentConfig rc;
    rc.hidden = 6;
    rc.cell = CellKind::GRU;
    TransformerConfig tc = tiny_config();
    tc.time_embedding = false;
    std::vector<Forecaster> models{Forecaster::make_transformer(tc, 20, 10, 3),
                                   Forecaster::make_recurrent(rc, 20, 10, 4), Forecaster::persistence(20, 10)};
    rc.cell = CellKind::LSTM;
    models.push_back(Forecaster::make_recurrent(rc, 20, 10, 5));
    models[1].instance_norm = false;
    const Eigen::VectorXd ctx = randn(20, 1, 7);
    for (const Forecaster &m : models) {
        std::stringstream ss;
        write_checkpoint(ss, m);
        const Forecaster back = read_checkpoint(ss);
        CHECK(back.kind == m.kind);
        CHECK(back.context == m.context);
        CHECK(back.horizon == m.horizon);
        CHECK(back.instance_norm == m.instance_norm);
        CHECK(back.transformer.config == m.transformer.config);
        const auto pa = m.refs(), pb = back.refs();
        REQUIRE(pa.size() == pb.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            CHECK(pa[i]->name == pb[i]->name);
            CHECK(pa[i]->value == pb[i]->value);
        }
        CHECK(predict(back, ctx, 10) == predict(m, ctx, 10));
    }

    SECTION("corrupt and missing files")
    {
        std::stringstream ss;
        write_checkpoint(ss, models[0]);
        const std::string bytes = ss.str();
        std::string bad = bytes;
        bad[0] ^= 0x55;
        std::stringstream s1(bad);
        CHECK_THROWS_AS(read_checkpoint(s1), IoError);
        std::stringstream s2(bytes.substr(0, bytes.size() / 2));
        CHECK_THROWS_AS(read_checkpoint(s2), IoError);
        CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/model.ckpt"), MissingArtifactError);
    }
}
