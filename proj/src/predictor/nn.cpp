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

#include "ddcp/predictor/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace ddcp::nn {

void init_normal(Param &p, double stddev, std::mt19937_64 &rng)
{
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
        for (Eigen::Index i = 0; i < p.value.rows(); ++i)
            p.value(i, j) = normal(rng);
    p.grad.setZero(p.value.rows(), p.value.cols());
}

void zero_grads(const ParamRefs &params)
{
    for (Param *p : params)
        p->zero_grad();
}

bool all_finite(const ConstParamRefs &params)
{
    for (const Param *p : params)
        if (!p->value.allFinite())
            return false;
    return true;
}

std::size_t parameter_count(const ConstParamRefs &params)
{
    std::size_t n = 0;
    for (const Param *p : params)
        n += static_cast<std::size_t>(p->value.size());
    return n;
}

Matrix layer_norm(const Matrix &x, const Param &gamma, const Param &beta, LayerNormCache *cache)
{
    if (gamma.value.cols() != x.cols() || beta.value.cols() != x.cols())
        throw std::invalid_argument("layer_norm: parameter width does not match input");
    const Vector mean = x.rowwise().mean();
    const Matrix centered = x.colwise() - mean;
    const Vector inv_std = ((centered.array().square().rowwise().sum() / double(x.cols())) + kLayerNormEps).rsqrt();
    Matrix xhat = inv_std.asDiagonal() * centered;
    Matrix y = (xhat.array().rowwise() * gamma.value.row(0).array()).rowwise() + beta.value.row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = inv_std;
    }
    return y;
}

Matrix layer_norm_backward(const Matrix &dy, const LayerNormCache &cache, Param &gamma, Param &beta)
{
    const double d = double(dy.cols());
    gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    beta.grad.row(0) += dy.colwise().sum();
    const Matrix dxhat = dy.array().rowwise() * gamma.value.row(0).array();
    const Vector sum_dxhat = dxhat.rowwise().sum();
    const Vector sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum();
    Matrix dx = (d * dxhat.array() - (sum_dxhat.replicate(1, dy.cols())).array() -
                 cache.xhat.array() * sum_dxhat_xhat.replicate(1, dy.cols()).array())
                    .matrix();
    return (cache.inv_std / d).asDiagonal() * dx;
}

namespace {
constexpr double kGeluC = 0.7978845608028654; // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
} // namespace

Matrix gelu(const Matrix &x)
{
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))); });
}

Matrix gelu_backward(const Matrix &x, const Matrix &dy)
{
    const Matrix dydx = x.unaryExpr([](double v) {
        const double u = kGeluC * (v + kGeluA * v * v * v);
        const double th = std::tanh(u);
        const double du = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        return 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * du;
    });
    return dy.cwiseProduct(dydx);
}

// ----------------------------------------------------------------------------------------------------------------

Adam::Adam(double learning_rate, double beta1, double beta2, double eps, double weight_decay)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay)
{
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("Adam: learning rate must be positive");
}

void Adam::step(const ParamRefs &params) { step(params, lr_); }

void Adam::step(const ParamRefs &params, double learning_rate)
{
    if (m_.empty()) {
        for (const Param *p : params) {
            m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        }
    }
    if (m_.size() != params.size())
        throw std::invalid_argument("Adam: parameter set changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param &p = *params[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
        if (weight_decay_ > 0.0)
            p.value *= (1.0 - learning_rate * weight_decay_);
        p.value.array() -=
            learning_rate * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
}

double clip_grad_norm(const ParamRefs &params, double max_norm)
{
    double sq = 0.0;
    for (const Param *p : params)
        sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (Param *p : params)
            p->grad *= s;
    }
    return norm;
}

} // namespace ddcp::nn
