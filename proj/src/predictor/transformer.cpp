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

#include "ddcp/predictor/transformer.hpp"
#include "ddcp/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ddcp::nn {

void TokenizerConfig::validate() const
{
    if (segment_length < 1)
        throw std::invalid_argument("tokenizer: segment length must be >= 1");
    if (token_count < 2)
        throw std::invalid_argument("tokenizer: need at least two tokens");
}

Matrix tokenize(const Vector &x, int segment_length)
{
    if (segment_length < 1)
        throw std::invalid_argument("tokenize: segment length must be >= 1");
    if (x.size() == 0 || x.size() % segment_length != 0)
        throw std::invalid_argument("tokenize: length " + std::to_string(x.size()) + " is not a multiple of " +
                                    std::to_string(segment_length));
    const Eigen::Index u = x.size() / segment_length;
    // Column-major storage of J x U holds the tokens contiguously; transpose to one token per row.
    return Eigen::Map<const Matrix>(x.data(), segment_length, u).transpose();
}

Vector detokenize(const Matrix &tokens)
{
    const Matrix t = tokens.transpose();
    return Eigen::Map<const Vector>(t.data(), t.size());
}

void TransformerConfig::validate() const
{
    if (segment_length < 1 || d_model < 1 || layers < 1 || heads < 1 || ff_dim < 1 || max_tokens < 1)
        throw std::invalid_argument("TransformerConfig: all dimensions must be >= 1");
    if (d_model % heads != 0)
        throw std::invalid_argument("TransformerConfig: d_model must be divisible by heads");
}

TransformerParams TransformerParams::init(const TransformerConfig &cfg, std::uint64_t seed)
{
    cfg.validate();
    std::mt19937_64 rng(seed);
    const Eigen::Index D = cfg.d_model, J = cfg.segment_length, F = cfg.ff_dim;
    TransformerParams p;
    p.config = cfg;
    p.w_e = Param("w_e", D, J);
    p.w_d = Param("w_d", D, J);
    p.te = Param("te", cfg.max_tokens, D);
    init_normal(p.w_e, 1.0 / std::sqrt(double(J)), rng);
    init_normal(p.w_d, 0.5 / std::sqrt(double(D)), rng);
    if (cfg.time_embedding)
        init_normal(p.te, 0.02, rng);

    const double residual_scale = 1.0 / std::sqrt(2.0 * cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        TransformerLayer layer;
        layer.ln1_gamma = Param(pre + "ln1_gamma", 1, D);
        layer.ln1_beta = Param(pre + "ln1_beta", 1, D);
        layer.ln1_gamma.value.setOnes();
        layer.attn.wq = Param(pre + "wq", D, D);
        layer.attn.wk = Param(pre + "wk", D, D);
        layer.attn.wv = Param(pre + "wv", D, D);
        layer.attn.wo = Param(pre + "wo", D, D);
        init_normal(layer.attn.wq, 1.0 / std::sqrt(double(D)), rng);
        init_normal(layer.attn.wk, 1.0 / std::sqrt(double(D)), rng);
        init_normal(layer.attn.wv, 1.0 / std::sqrt(double(D)), rng);
        init_normal(layer.attn.wo, residual_scale / std::sqrt(double(D)), rng);
        layer.ln2_gamma = Param(pre + "ln2_gamma", 1, D);
        layer.ln2_beta = Param(pre + "ln2_beta", 1, D);
        layer.ln2_gamma.value.setOnes();
        layer.w1 = Param(pre + "w1", D, F);
        layer.b1 = Param(pre + "b1", 1, F);
        layer.w2 = Param(pre + "w2", F, D);
        layer.b2 = Param(pre + "b2", 1, D);
        init_normal(layer.w1, 1.0 / std::sqrt(double(D)), rng);
        init_normal(layer.w2, residual_scale / std::sqrt(double(F)), rng);
        p.layers.push_back(std::move(layer));
    }
    p.lnf_gamma = Param("lnf_gamma", 1, D);
    p.lnf_beta = Param("lnf_beta", 1, D);
    p.lnf_gamma.value.setOnes();
    return p;
}

ParamRefs TransformerParams::refs()
{
    ParamRefs r{&w_e, &w_d};
    if (config.time_embedding)
        r.push_back(&te);
    for (auto &l : layers) {
        r.insert(r.end(), {&l.ln1_gamma, &l.ln1_beta, &l.attn.wq, &l.attn.wk, &l.attn.wv, &l.attn.wo, &l.ln2_gamma,
                           &l.ln2_beta, &l.w1, &l.b1, &l.w2, &l.b2});
    }
    r.push_back(&lnf_gamma);
    r.push_back(&lnf_beta);
    return r;
}

ConstParamRefs TransformerParams::refs() const
{
    const ParamRefs r = const_cast<TransformerParams *>(this)->refs();
    return ConstParamRefs(r.begin(), r.end());
}

namespace {

void check_finite(const Matrix &m, const std::string &where)
{
    if (!m.allFinite())
        throw NumericalError("transformer: non-finite activations at " + where);
}

} // namespace

Matrix forward(const TransformerParams &p, const Matrix &tokens, TransformerCache *cache)
{
    const auto &cfg = p.config;
    if (tokens.cols() != cfg.segment_length)
        throw std::invalid_argument("transformer forward: token width " + std::to_string(tokens.cols()) +
                                    " != segment length " + std::to_string(cfg.segment_length));
    if (tokens.rows() < 1 || tokens.rows() > cfg.max_tokens)
        throw std::invalid_argument("transformer forward: token count must be in 1..max_tokens");
    const Eigen::Index U = tokens.rows();

    Matrix z = tokens * p.w_e.value.transpose();
    if (cfg.time_embedding)
        z += p.te.value.topRows(U);
    check_finite(z, "embedding");

    if (cache) {
        cache->tokens = tokens;
        cache->layers.assign(p.layers.size(), {});
    }
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const TransformerLayer &layer = p.layers[l];
        TransformerLayerCache local;
        TransformerLayerCache &c = cache ? cache->layers[l] : local;
        c.x_in = z;
        const Matrix a = layer_norm(z, layer.ln1_gamma, layer.ln1_beta, &c.ln1);
        c.x_mid = z + multi_head(a, layer.attn, cfg.heads, true, &c.attn);
        c.ln2_out = layer_norm(c.x_mid, layer.ln2_gamma, layer.ln2_beta, &c.ln2);
        c.ff_pre = (c.ln2_out * layer.w1.value).rowwise() + layer.b1.value.row(0);
        c.ff_act = gelu(c.ff_pre);
        z = c.x_mid + ((c.ff_act * layer.w2.value).rowwise() + layer.b2.value.row(0));
        check_finite(z, "layer " + std::to_string(l));
    }

    LayerNormCache lnf_local;
    Matrix h = layer_norm(z, p.lnf_gamma, p.lnf_beta, cache ? &cache->lnf : &lnf_local);
    Matrix out = h * p.w_d.value;
    check_finite(out, "decoder output");
    if (cache)
        cache->lnf_out = std::move(h);
    return out;
}

void backward(TransformerParams &p, const TransformerCache &cache, const Matrix &d_output)
{
    const auto &cfg = p.config;
    p.w_d.grad += cache.lnf_out.transpose() * d_output;
    Matrix dz = layer_norm_backward(d_output * p.w_d.value.transpose(), cache.lnf, p.lnf_gamma, p.lnf_beta);

    for (std::size_t li = p.layers.size(); li-- > 0;) {
        TransformerLayer &layer = p.layers[li];
        const TransformerLayerCache &c = cache.layers[li];

        layer.w2.grad += c.ff_act.transpose() * dz;
        layer.b2.grad += dz.colwise().sum();
        const Matrix d_pre = gelu_backward(c.ff_pre, dz * layer.w2.value.transpose());
        layer.w1.grad += c.ln2_out.transpose() * d_pre;
        layer.b1.grad += d_pre.colwise().sum();
        const Matrix d_mid =
            dz + layer_norm_backward(d_pre * layer.w1.value.transpose(), c.ln2, layer.ln2_gamma, layer.ln2_beta);

        const Matrix d_a = multi_head_backward(c.attn, d_mid, layer.attn, cfg.heads);
        dz = d_mid + layer_norm_backward(d_a, c.ln1, layer.ln1_gamma, layer.ln1_beta);
    }

    if (cfg.time_embedding)
        p.te.grad.topRows(dz.rows()) += dz;
    p.w_e.grad += dz.transpose() * cache.tokens;
}

// ----------------------------------------------------------------------------------------------------------------

namespace {

void check_loss_shapes(const Matrix &predicted, const Matrix &actual)
{
    if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols())
        throw std::invalid_argument("token loss: predicted and actual shapes differ");
    if (actual.rows() < 2)
        throw std::invalid_argument("token loss: need at least two tokens");
}

} // namespace

double loss_mse(const Matrix &predicted, const Matrix &actual, Matrix *grad)
{
    check_loss_shapes(predicted, actual);
    const double norm = double(actual.rows() * actual.cols());
    const Eigen::Index n = actual.rows() - 1;
    const Matrix diff = predicted.bottomRows(n) - actual.bottomRows(n);
    if (grad) {
        grad->setZero(predicted.rows(), predicted.cols());
        grad->bottomRows(n) = 2.0 * diff / norm;
    }
    return diff.squaredNorm() / norm;
}

double loss_mae(const Matrix &predicted, const Matrix &actual, Matrix *grad)
{
    check_loss_shapes(predicted, actual);
    const double norm = double(actual.rows() * actual.cols());
    const Eigen::Index n = actual.rows() - 1;
    const Matrix diff = predicted.bottomRows(n) - actual.bottomRows(n);
    if (grad) {
        grad->setZero(predicted.rows(), predicted.cols());
        grad->bottomRows(n) = diff.unaryExpr([](double d) { return double((d > 0) - (d < 0)); }) / norm;
    }
    return diff.cwiseAbs().sum() / norm;
}

double token_loss(Loss kind, const Matrix &predicted, const Matrix &actual, Matrix *grad)
{
    return kind == Loss::MSE ? loss_mse(predicted, actual, grad) : loss_mae(predicted, actual, grad);
}

Matrix shift_predictions(const Matrix &output, const Matrix &tokens)
{
    Matrix shifted(tokens.rows(), tokens.cols());
    shifted.row(0) = tokens.row(0);
    shifted.bottomRows(tokens.rows() - 1) = output.topRows(tokens.rows() - 1);
    return shifted;
}

} // namespace ddcp::nn
