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

#include "ddcp/predictor/recurrent.hpp"
#include "ddcp/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace ddcp::nn {

namespace {

Matrix sigmoid_m(const Matrix &x)
{
    return x.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix tanh_m(const Matrix &x)
{
    return x.array().tanh().matrix();
}

void check_step(const Matrix &x, const Matrix &h, const Param &w_x, const Param &w_h)
{
    if (x.cols() != w_x.value.rows())
        throw std::invalid_argument("recurrent step: input width does not match w_x");
    if (h.cols() != w_h.value.rows())
        throw std::invalid_argument("recurrent step: state width does not match w_h");
    if (x.rows() != h.rows())
        throw std::invalid_argument("recurrent step: input and state batch sizes differ");
}

} // namespace

LstmState lstm_step(const Matrix &x, const LstmState &s, const LstmWeights &w, LstmStepCache *cache)
{
    check_step(x, s.h, w.w_x, w.w_h);
    if (s.c.rows() != s.h.rows() || s.c.cols() != s.h.cols())
        throw std::invalid_argument("lstm_step: cell and hidden state shapes differ");
    const Eigen::Index H = s.h.cols();
    const Matrix pre = ((x * w.w_x.value + s.h * w.w_h.value).rowwise() + w.b.value.row(0));
    Matrix i = sigmoid_m(pre.middleCols(0, H));
    Matrix f = sigmoid_m(pre.middleCols(H, H));
    Matrix g = tanh_m(pre.middleCols(2 * H, H));
    Matrix o = sigmoid_m(pre.middleCols(3 * H, H));
    LstmState next;
    next.c = f.cwiseProduct(s.c) + i.cwiseProduct(g);
    Matrix tc = tanh_m(next.c);
    next.h = o.cwiseProduct(tc);
    if (cache) {
        cache->x = x;
        cache->h_prev = s.h;
        cache->c_prev = s.c;
        cache->i = std::move(i);
        cache->f = std::move(f);
        cache->g = std::move(g);
        cache->o = std::move(o);
        cache->tanh_c = std::move(tc);
    }
    return next;
}

LstmState lstm_step_backward(const LstmStepCache &c, const Matrix &dh, const Matrix &dc, LstmWeights &w, Matrix *dx)
{
    const Eigen::Index H = c.h_prev.cols();
    const Matrix d_o = dh.cwiseProduct(c.tanh_c);
    const Matrix dc_total =
        dc + dh.cwiseProduct(c.o).cwiseProduct((1.0 - c.tanh_c.array().square()).matrix());

    Matrix dpre(dh.rows(), 4 * H);
    dpre.middleCols(0, H) = dc_total.cwiseProduct(c.g).array() * c.i.array() * (1.0 - c.i.array());
    dpre.middleCols(H, H) = dc_total.cwiseProduct(c.c_prev).array() * c.f.array() * (1.0 - c.f.array());
    dpre.middleCols(2 * H, H) = dc_total.cwiseProduct(c.i).array() * (1.0 - c.g.array().square());
    dpre.middleCols(3 * H, H) = d_o.array() * c.o.array() * (1.0 - c.o.array());

    w.w_x.grad += c.x.transpose() * dpre;
    w.w_h.grad += c.h_prev.transpose() * dpre;
    w.b.grad += dpre.colwise().sum();
    if (dx)
        *dx = dpre * w.w_x.value.transpose();
    LstmState prev;
    prev.h = dpre * w.w_h.value.transpose();
    prev.c = dc_total.cwiseProduct(c.f);
    return prev;
}

Matrix gru_step(const Matrix &x, const Matrix &h, const GruWeights &w, GruStepCache *cache)
{
    check_step(x, h, w.w_x, w.w_h);
    const Eigen::Index H = h.cols();
    const Matrix ax = (x * w.w_x.value).rowwise() + w.b_x.value.row(0);
    const Matrix ah = (h * w.w_h.value).rowwise() + w.b_h.value.row(0);
    Matrix r = sigmoid_m(ax.middleCols(0, H) + ah.middleCols(0, H));
    Matrix z = sigmoid_m(ax.middleCols(H, H) + ah.middleCols(H, H));
    Matrix hn = ah.middleCols(2 * H, H);
    Matrix n = tanh_m(ax.middleCols(2 * H, H) + r.cwiseProduct(hn));
    Matrix next = (1.0 - z.array()).matrix().cwiseProduct(n) + z.cwiseProduct(h);
    if (cache) {
        cache->x = x;
        cache->h_prev = h;
        cache->r = std::move(r);
        cache->z = std::move(z);
        cache->n = std::move(n);
        cache->hn = std::move(hn);
    }
    return next;
}

Matrix gru_step_backward(const GruStepCache &c, const Matrix &dh, GruWeights &w, Matrix *dx)
{
    const Eigen::Index H = c.h_prev.cols();
    const Matrix dn = dh.cwiseProduct((1.0 - c.z.array()).matrix());
    const Matrix dz = dh.cwiseProduct(c.h_prev - c.n);
    const Matrix dn_pre = dn.array() * (1.0 - c.n.array().square());
    const Matrix dr = dn_pre.cwiseProduct(c.hn);

    Matrix dax(dh.rows(), 3 * H), dah(dh.rows(), 3 * H);
    dax.middleCols(0, H) = dr.array() * c.r.array() * (1.0 - c.r.array());
    dax.middleCols(H, H) = dz.array() * c.z.array() * (1.0 - c.z.array());
    dax.middleCols(2 * H, H) = dn_pre;
    dah.leftCols(2 * H) = dax.leftCols(2 * H);
    dah.middleCols(2 * H, H) = dn_pre.cwiseProduct(c.r);

    w.w_x.grad += c.x.transpose() * dax;
    w.b_x.grad += dax.colwise().sum();
    w.w_h.grad += c.h_prev.transpose() * dah;
    w.b_h.grad += dah.colwise().sum();
    if (dx)
        *dx = dax * w.w_x.value.transpose();
    return dh.cwiseProduct(c.z) + dah * w.w_h.value.transpose();
}

// ----------------------------------------------------------------------------------------------------------------

void RecurrentConfig::validate() const
{
    if (hidden < 1 || horizon < 1)
        throw std::invalid_argument("RecurrentConfig: hidden size and horizon must be >= 1");
}

RecurrentParams RecurrentParams::init(const RecurrentConfig &cfg, std::uint64_t seed)
{
    cfg.validate();
    std::mt19937_64 rng(seed);
    const Eigen::Index H = cfg.hidden;
    const double s = 1.0 / std::sqrt(double(H));
    RecurrentParams p;
    p.config = cfg;
    if (cfg.cell == CellKind::LSTM) {
        p.lstm.w_x = Param("lstm.w_x", 1, 4 * H);
        p.lstm.w_h = Param("lstm.w_h", H, 4 * H);
        p.lstm.b = Param("lstm.b", 1, 4 * H);
        init_normal(p.lstm.w_x, 1.0, rng);
        init_normal(p.lstm.w_h, s, rng);
        p.lstm.b.value.middleCols(H, H).setConstant(cfg.forget_bias);
    } else {
        p.gru.w_x = Param("gru.w_x", 1, 3 * H);
        p.gru.w_h = Param("gru.w_h", H, 3 * H);
        p.gru.b_x = Param("gru.b_x", 1, 3 * H);
        p.gru.b_h = Param("gru.b_h", 1, 3 * H);
        init_normal(p.gru.w_x, 1.0, rng);
        init_normal(p.gru.w_h, s, rng);
    }
    p.w_out = Param("head.w", H, cfg.horizon);
    p.b_out = Param("head.b", 1, cfg.horizon);
    init_normal(p.w_out, 0.5 * s, rng);
    return p;
}

ParamRefs RecurrentParams::refs()
{
    ParamRefs r;
    if (config.cell == CellKind::LSTM)
        r = {&lstm.w_x, &lstm.w_h, &lstm.b};
    else
        r = {&gru.w_x, &gru.w_h, &gru.b_x, &gru.b_h};
    r.push_back(&w_out);
    r.push_back(&b_out);
    return r;
}

ConstParamRefs RecurrentParams::refs() const
{
    const ParamRefs r = const_cast<RecurrentParams *>(this)->refs();
    return ConstParamRefs(r.begin(), r.end());
}

Matrix forward(const RecurrentParams &p, const Matrix &inputs, RecurrentCache *cache)
{
    const Eigen::Index B = inputs.rows(), T = inputs.cols(), H = p.config.hidden;
    if (T < 1)
        throw std::invalid_argument("recurrent forward: need at least one input step");
    if (cache) {
        cache->lstm.clear();
        cache->gru.clear();
    }
    Matrix h = Matrix::Zero(B, H);
    if (p.config.cell == CellKind::LSTM) {
        LstmState s{h, Matrix::Zero(B, H)};
        if (cache)
            cache->lstm.resize(std::size_t(T));
        for (Eigen::Index t = 0; t < T; ++t)
            s = lstm_step(inputs.col(t), s, p.lstm, cache ? &cache->lstm[std::size_t(t)] : nullptr);
        h = std::move(s.h);
    } else {
        if (cache)
            cache->gru.resize(std::size_t(T));
        for (Eigen::Index t = 0; t < T; ++t)
            h = gru_step(inputs.col(t), h, p.gru, cache ? &cache->gru[std::size_t(t)] : nullptr);
    }
    if (!h.allFinite())
        throw NumericalError("recurrent forward: non-finite hidden state");
    Matrix out = (h * p.w_out.value).rowwise() + p.b_out.value.row(0);
    if (cache)
        cache->h_last = std::move(h);
    return out;
}

void backward(RecurrentParams &p, const RecurrentCache &cache, const Matrix &d_output)
{
    p.w_out.grad += cache.h_last.transpose() * d_output;
    p.b_out.grad += d_output.colwise().sum();
    Matrix dh = d_output * p.w_out.value.transpose();
    if (p.config.cell == CellKind::LSTM) {
        Matrix dc = Matrix::Zero(dh.rows(), dh.cols());
        for (std::size_t t = cache.lstm.size(); t-- > 0;) {
            LstmState prev = lstm_step_backward(cache.lstm[t], dh, dc, p.lstm);
            dh = std::move(prev.h);
            dc = std::move(prev.c);
        }
    } else {
        for (std::size_t t = cache.gru.size(); t-- > 0;)
            dh = gru_step_backward(cache.gru[t], dh, p.gru);
    }
}

} // namespace ddcp::nn
