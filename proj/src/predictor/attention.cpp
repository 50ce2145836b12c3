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

#include "ddcp/predictor/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace ddcp::nn {

Matrix attention(const Matrix &q, const Matrix &k, const Matrix &v, bool causal, AttentionCache *cache)
{
    if (q.cols() != k.cols())
        throw std::invalid_argument("attention: Q and K inner dimensions differ");
    if (k.rows() != v.rows())
        throw std::invalid_argument("attention: K and V have different row counts");
    if (causal && q.rows() != k.rows())
        throw std::invalid_argument("attention: causal masking needs as many queries as keys");

    const double scale = 1.0 / std::sqrt(double(q.cols()));
    const Eigen::Index n_q = q.rows(), n_k = k.rows();
    Matrix probs = Matrix::Zero(n_q, n_k);
    for (Eigen::Index i = 0; i < n_q; ++i) {
        const Eigen::Index visible = causal ? i + 1 : n_k;
        RowVector s = (q.row(i) * k.topRows(visible).transpose()) * scale;
        const double mx = s.maxCoeff();
        s = (s.array() - mx).exp();
        probs.row(i).head(visible) = s / s.sum();
    }
    Matrix out = probs * v;
    if (cache) {
        cache->q = q;
        cache->k = k;
        cache->v = v;
        cache->probs = std::move(probs);
        cache->scale = scale;
    }
    return out;
}

AttentionGrads attention_backward(const AttentionCache &c, const Matrix &d_out)
{
    AttentionGrads g;
    const Matrix d_probs = d_out * c.v.transpose();
    g.dv = c.probs.transpose() * d_out;
    const Eigen::VectorXd row_dot = (d_probs.array() * c.probs.array()).rowwise().sum();
    const Matrix d_scores = c.probs.array() * (d_probs.colwise() - row_dot).array();
    g.dq = d_scores * c.k * c.scale;
    g.dk = d_scores.transpose() * c.q * c.scale;
    return g;
}

Matrix multi_head(const Matrix &input, const AttentionWeights &w, int heads, bool causal, MultiHeadCache *cache)
{
    const Eigen::Index d_model = w.wq.value.cols();
    if (heads < 1 || d_model % heads != 0)
        throw std::invalid_argument("multi_head: model dimension must be divisible by the head count");
    if (input.cols() != w.wq.value.rows())
        throw std::invalid_argument("multi_head: input width does not match projection");
    const Eigen::Index dk = d_model / heads;

    const Matrix q = input * w.wq.value;
    const Matrix k = input * w.wk.value;
    const Matrix v = input * w.wv.value;
    Matrix concat(input.rows(), d_model);
    if (cache) {
        cache->input = input;
        cache->heads.assign(std::size_t(heads), {});
    }
    for (int c = 0; c < heads; ++c) {
        const Eigen::Index off = c * dk;
        concat.middleCols(off, dk) = attention(q.middleCols(off, dk), k.middleCols(off, dk), v.middleCols(off, dk),
                                               causal, cache ? &cache->heads[std::size_t(c)] : nullptr);
    }
    Matrix out = concat * w.wo.value;
    if (cache)
        cache->concat = std::move(concat);
    return out;
}

Matrix multi_head_backward(const MultiHeadCache &cache, const Matrix &d_out, AttentionWeights &w, int heads)
{
    const Eigen::Index d_model = w.wq.value.cols();
    const Eigen::Index dk = d_model / heads;
    w.wo.grad += cache.concat.transpose() * d_out;
    const Matrix d_concat = d_out * w.wo.value.transpose();

    Matrix dq(cache.input.rows(), d_model), dk_all(cache.input.rows(), d_model), dv(cache.input.rows(), d_model);
    for (int c = 0; c < heads; ++c) {
        const Eigen::Index off = c * dk;
        const AttentionGrads g = attention_backward(cache.heads[std::size_t(c)], d_concat.middleCols(off, dk));
        dq.middleCols(off, dk) = g.dq;
        dk_all.middleCols(off, dk) = g.dk;
        dv.middleCols(off, dk) = g.dv;
    }
    w.wq.grad += cache.input.transpose() * dq;
    w.wk.grad += cache.input.transpose() * dk_all;
    w.wv.grad += cache.input.transpose() * dv;
    return dq * w.wq.value.transpose() + dk_all * w.wk.value.transpose() + dv * w.wv.value.transpose();
}

} // namespace ddcp::nn
