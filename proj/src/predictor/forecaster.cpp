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

#include "ddcp/predictor/forecaster.hpp"
#include "ddcp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace ddcp::nn {

std::string_view model_kind_name(ModelKind kind)
{
    switch (kind) {
    case ModelKind::Transformer: return "transformer";
    case ModelKind::LSTM: return "lstm";
    case ModelKind::GRU: return "gru";
    case ModelKind::Persistence: return "persistence";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name)
{
    for (ModelKind k : {ModelKind::Transformer, ModelKind::LSTM, ModelKind::GRU, ModelKind::Persistence})
        if (model_kind_name(k) == name)
            return k;
    throw std::invalid_argument("unknown model kind '" + std::string(name) + "'");
}

Forecaster Forecaster::make_transformer(const TransformerConfig &config, int context, int horizon,
                                        std::uint64_t seed)
{
    Forecaster f;
    f.kind = ModelKind::Transformer;
    f.context = context;
    f.horizon = horizon;
    f.transformer = TransformerParams::init(config, seed);
    f.validate();
    return f;
}

Forecaster Forecaster::make_recurrent(RecurrentConfig config, int context, int horizon, std::uint64_t seed)
{
    Forecaster f;
    f.kind = config.cell == CellKind::LSTM ? ModelKind::LSTM : ModelKind::GRU;
    f.context = context;
    f.horizon = horizon;
    config.horizon = horizon;
    f.recurrent = RecurrentParams::init(config, seed);
    f.validate();
    return f;
}

Forecaster Forecaster::persistence(int context, int horizon)
{
    Forecaster f;
    f.context = context;
    f.horizon = horizon;
    f.instance_norm = false;
    f.validate();
    return f;
}

void Forecaster::validate() const
{
    if (context < 1 || horizon < 1)
        throw std::invalid_argument("forecaster: context and horizon must be >= 1");
    if (kind == ModelKind::Transformer) {
        const auto &c = transformer.config;
        c.validate();
        if (context % c.segment_length != 0 || horizon % c.segment_length != 0)
            throw std::invalid_argument("forecaster: context and horizon must be multiples of the segment length");
        if ((context + horizon) / c.segment_length > c.max_tokens)
            throw std::invalid_argument("forecaster: context plus horizon exceeds max_tokens");
        if (context / c.segment_length < 1)
            throw std::invalid_argument("forecaster: context shorter than one token");
    } else if (kind == ModelKind::LSTM || kind == ModelKind::GRU) {
        recurrent.config.validate();
        if (recurrent.config.horizon != horizon)
            throw std::invalid_argument("forecaster: recurrent head width differs from horizon");
        if ((kind == ModelKind::LSTM) != (recurrent.config.cell == CellKind::LSTM))
            throw std::invalid_argument("forecaster: model kind and cell kind disagree");
    }
}

ParamRefs Forecaster::refs()
{
    switch (kind) {
    case ModelKind::Transformer: return transformer.refs();
    case ModelKind::LSTM:
    case ModelKind::GRU: return recurrent.refs();
    case ModelKind::Persistence: break;
    }
    return {};
}

ConstParamRefs Forecaster::refs() const
{
    const ParamRefs r = const_cast<Forecaster *>(this)->refs();
    return ConstParamRefs(r.begin(), r.end());
}

// ----------------------------------------------------------------------------------------------------------------

namespace {

struct InstanceStats {
    double mean = 0.0;
    double scale = 1.0;
};

InstanceStats instance_stats(const Forecaster &f, const Eigen::Ref<const Eigen::RowVectorXd> &context)
{
    if (!f.instance_norm)
        return {};
    const double m = context.mean();
    const double var = (context.array() - m).square().mean();
    return {m, std::max(std::sqrt(var), kInstanceNormFloor)};
}

Eigen::VectorXd transformer_generate(const Forecaster &f, const Eigen::VectorXd &ctx, int horizon)
{
    const int J = f.transformer.config.segment_length;
    const int extra = (horizon + J - 1) / J;
    if (f.context / J + extra - 1 > f.transformer.config.max_tokens)
        throw std::invalid_argument("predict: horizon needs more tokens than max_tokens");
    Matrix tokens = tokenize(ctx, J);
    Eigen::VectorXd out(extra * J);
    for (int k = 0; k < extra; ++k) {
        const Matrix pred = forward(f.transformer, tokens);
        const RowVector next = pred.row(pred.rows() - 1);
        out.segment(k * J, J) = next.transpose();
        if (k + 1 < extra) {
            tokens.conservativeResize(tokens.rows() + 1, Eigen::NoChange);
            tokens.row(tokens.rows() - 1) = next;
        }
    }
    return out.head(horizon);
}

} // namespace

Eigen::VectorXd predict(const Forecaster &f, const Eigen::VectorXd &context, int horizon)
{
    if (context.size() != f.context)
        throw std::invalid_argument("predict: context length " + std::to_string(context.size()) + " != " +
                                    std::to_string(f.context));
    if (horizon < 1)
        throw std::invalid_argument("predict: horizon must be >= 1");
    if (f.kind == ModelKind::Persistence)
        return Eigen::VectorXd::Constant(horizon, context(context.size() - 1));

    const InstanceStats st = instance_stats(f, context.transpose());
    const Eigen::VectorXd z = (context.array() - st.mean) / st.scale;
    Eigen::VectorXd y;
    if (f.kind == ModelKind::Transformer) {
        y = transformer_generate(f, z, horizon);
    } else {
        if (horizon > f.horizon)
            throw std::invalid_argument("predict: recurrent models forecast at most their trained horizon");
        y = forward(f.recurrent, Matrix(z.transpose())).row(0).head(horizon).transpose();
    }
    return (y.array() * st.scale + st.mean).matrix();
}

Eigen::MatrixXd predict_batch(const Forecaster &f, const Eigen::MatrixXd &contexts, int horizon)
{
    if (contexts.cols() != f.context)
        throw std::invalid_argument("predict_batch: context width mismatch");
    Eigen::MatrixXd out(contexts.rows(), horizon);
    if (f.kind == ModelKind::LSTM || f.kind == ModelKind::GRU) {
        if (horizon > f.horizon)
            throw std::invalid_argument("predict: recurrent models forecast at most their trained horizon");
        Eigen::MatrixXd z(contexts.rows(), contexts.cols());
        std::vector<InstanceStats> st(std::size_t(contexts.rows()));
        for (Eigen::Index r = 0; r < contexts.rows(); ++r) {
            st[std::size_t(r)] = instance_stats(f, contexts.row(r));
            z.row(r) = (contexts.row(r).array() - st[std::size_t(r)].mean) / st[std::size_t(r)].scale;
        }
        const Matrix y = forward(f.recurrent, z);
        for (Eigen::Index r = 0; r < contexts.rows(); ++r)
            out.row(r) = y.row(r).head(horizon).array() * st[std::size_t(r)].scale + st[std::size_t(r)].mean;
        return out;
    }
    for (Eigen::Index r = 0; r < contexts.rows(); ++r)
        out.row(r) = predict(f, contexts.row(r).transpose(), horizon).transpose();
    return out;
}

// ----------------------------------------------------------------------------------------------------------------

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0))
        throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (batch_size < 1 || max_steps < 0)
        throw std::invalid_argument("TrainConfig: batch size must be >= 1 and max_steps >= 0");
    if (!(clip_norm > 0.0))
        throw std::invalid_argument("TrainConfig: clip norm must be positive");
    if (!(final_lr_fraction >= 0.0 && final_lr_fraction <= 1.0))
        throw std::invalid_argument("TrainConfig: final_lr_fraction must lie in [0, 1]");
}

double batch_loss(Forecaster &f, const Eigen::MatrixXd &windows, Loss loss, bool accumulate_grads)
{
    if (windows.cols() != f.context + f.horizon)
        throw std::invalid_argument("batch_loss: window width differs from context + horizon");
    const Eigen::Index B = windows.rows();
    Eigen::MatrixXd z(B, windows.cols());
    for (Eigen::Index r = 0; r < B; ++r) {
        const InstanceStats st = instance_stats(f, windows.row(r).head(f.context));
        z.row(r) = (windows.row(r).array() - st.mean) / st.scale;
    }

    if (f.kind == ModelKind::Transformer) {
        const int J = f.transformer.config.segment_length;
        double total = 0.0;
        for (Eigen::Index r = 0; r < B; ++r) {
            const Matrix tokens = tokenize(z.row(r).transpose(), J);
            TransformerCache cache;
            const Matrix out = forward(f.transformer, tokens, accumulate_grads ? &cache : nullptr);
            Matrix grad;
            total += token_loss(loss, shift_predictions(out, tokens), tokens, accumulate_grads ? &grad : nullptr);
            if (accumulate_grads) {
                const Eigen::Index U = tokens.rows();
                Matrix d_out = Matrix::Zero(U, J);
                d_out.topRows(U - 1) = grad.bottomRows(U - 1) / double(B);
                backward(f.transformer, cache, d_out);
            }
        }
        return total / double(B);
    }
    if (f.kind == ModelKind::LSTM || f.kind == ModelKind::GRU) {
        RecurrentCache cache;
        const Matrix out = forward(f.recurrent, z.leftCols(f.context), accumulate_grads ? &cache : nullptr);
        const Matrix diff = out - z.rightCols(f.horizon);
        const double n = double(diff.size());
        double value = 0.0;
        Matrix grad;
        if (loss == Loss::MSE) {
            value = diff.squaredNorm() / n;
            grad = 2.0 * diff / n;
        } else {
            value = diff.cwiseAbs().sum() / n;
            grad = diff.unaryExpr([](double d) { return double((d > 0) - (d < 0)); }) / n;
        }
        if (accumulate_grads)
            backward(f.recurrent, cache, grad);
        return value;
    }
    throw std::invalid_argument("batch_loss: model has no trainable parameters");
}

TrainResult train(Forecaster &f, const WindowedDataset &data, const TrainConfig &cfg)
{
    cfg.validate();
    f.validate();
    if (!f.trainable())
        throw std::invalid_argument("train: persistence has no parameters");
    if (data.size() == 0)
        throw std::invalid_argument("train: empty dataset");
    if (data.context != f.context || data.horizon != f.horizon)
        throw std::invalid_argument("train: dataset window shape differs from the model");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
    Adam opt(cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay);
    ParamRefs params = f.refs();
    TrainResult result;
    result.loss_curve.reserve(std::size_t(cfg.max_steps));
    Eigen::MatrixXd batch(cfg.batch_size, f.context + f.horizon);

    for (int step = 0; step < cfg.max_steps; ++step) {
        for (int b = 0; b < cfg.batch_size; ++b)
            batch.row(b) = data.full_of(data.windows[pick(rng)]).transpose();
        zero_grads(params);
        const double loss = batch_loss(f, batch, cfg.loss, true);
        if (!std::isfinite(loss))
            throw NumericalError("train: non-finite loss at step " + std::to_string(step));
        clip_grad_norm(params, cfg.clip_norm);
        double lr = cfg.learning_rate;
        if (cfg.cosine_decay && cfg.max_steps > 1) {
            const double progress = double(step) / double(cfg.max_steps - 1);
            const double floor = cfg.final_lr_fraction;
            lr *= floor + 0.5 * (1.0 - floor) * (1.0 + std::cos(progress * 3.141592653589793));
        }
        opt.step(params, lr);
        if (!all_finite(std::as_const(f).refs()))
            throw NumericalError("train: non-finite parameters after step " + std::to_string(step));
        result.loss_curve.push_back(loss);
    }
    return result;
}

} // namespace ddcp::nn
