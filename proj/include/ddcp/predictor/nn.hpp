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

// Small dense building blocks with hand-written backward passes.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ddcp::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// A learnable tensor and its gradient accumulator.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;

    Param() = default;
    Param(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols))
    {
    }
    void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Param *>;
using ConstParamRefs = std::vector<const Param *>;

void init_normal(Param &p, double stddev, std::mt19937_64 &rng);
void zero_grads(const ParamRefs &params);
bool all_finite(const ConstParamRefs &params);
std::size_t parameter_count(const ConstParamRefs &params);

// ----------------------------------------------------------------------------------------------------------------

struct LayerNormCache {
    Matrix xhat;
    Vector inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise layer normalization with affine parameters stored as 1 x D rows.
Matrix layer_norm(const Matrix &x, const Param &gamma, const Param &beta, LayerNormCache *cache = nullptr);
Matrix layer_norm_backward(const Matrix &dy, const LayerNormCache &cache, Param &gamma, Param &beta);

/// tanh approximation of GELU
Matrix gelu(const Matrix &x);
Matrix gelu_backward(const Matrix &x, const Matrix &dy);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ----------------------------------------------------------------------------------------------------------------

/// Adaptive-moment optimizer with optional decoupled weight decay.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
                  double weight_decay = 0.0);

    void step(const ParamRefs &params);
    void step(const ParamRefs &params, double learning_rate);
    long steps_taken() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
    std::vector<Matrix> m_, v_;
};

/// Rescales all gradients so their joint L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(const ParamRefs &params, double max_norm);

} // namespace ddcp::nn
