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

// Uniform forecasting interface over the transformer, the recurrent baselines and persistence.
//
// Neural models see each window through per-window instance normalization: the context mean and standard
// deviation are removed before the model and restored on its output.

#pragma once

#include "ddcp/dd_extract.hpp"
#include "ddcp/predictor/recurrent.hpp"
#include "ddcp/predictor/transformer.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace ddcp::nn {

enum class ModelKind { Transformer, LSTM, GRU, Persistence };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

inline constexpr double kInstanceNormFloor = 1e-6;

struct Forecaster {
    ModelKind kind = ModelKind::Persistence;
    int context = 20; // epsilon
    int horizon = 10; // lambda
    bool instance_norm = true;
    TransformerParams transformer;
    RecurrentParams recurrent;

    static Forecaster make_transformer(const TransformerConfig &config, int context, int horizon,
                                       std::uint64_t seed);
    /// Cell kind is taken from `config`; the head width is the horizon.
    static Forecaster make_recurrent(RecurrentConfig config, int context, int horizon, std::uint64_t seed);
    static Forecaster persistence(int context, int horizon);

    bool trainable() const { return kind != ModelKind::Persistence; }
    void validate() const;
    ParamRefs refs();
    ConstParamRefs refs() const;
};

/// Forecast of `horizon` values following `context` (length must equal f.context).
Eigen::VectorXd predict(const Forecaster &f, const Eigen::VectorXd &context, int horizon);
/// Row-wise predict over a batch of contexts.
Eigen::MatrixXd predict_batch(const Forecaster &f, const Eigen::MatrixXd &contexts, int horizon);

struct TrainConfig {
    double learning_rate = 1e-5;
    int batch_size = 32;
    int max_steps = 500;
    Loss loss = Loss::MAE;
    std::uint64_t seed = 0;
    double clip_norm = 1.0;
    double weight_decay = 0.0;
    bool cosine_decay = false;       // anneal to final_lr_fraction of the initial rate
    double final_lr_fraction = 0.1;

    void validate() const;
};

struct TrainResult {
    std::vector<double> loss_curve; // one entry per optimizer step
};

/// Minibatch training on full (context + target) windows. Deterministic for a fixed seed.
TrainResult train(Forecaster &f, const WindowedDataset &data, const TrainConfig &cfg);

/// Training loss of one batch of full windows, and (optionally) its gradients accumulated into f.
double batch_loss(Forecaster &f, const Eigen::MatrixXd &windows, Loss loss, bool accumulate_grads);

} // namespace ddcp::nn
