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

#include "ddcp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ddcp {

double weighted_mae(const Eigen::MatrixXd &pred, const Eigen::MatrixXd &truth, const Eigen::VectorXd &weights)
{
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("weighted_mae: prediction and truth shapes differ");
    if (weights.size() != pred.rows())
        throw std::invalid_argument("weighted_mae: one weight per path required");
    if (pred.cols() == 0)
        throw std::invalid_argument("weighted_mae: no time steps");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw std::invalid_argument("weighted_mae: weights must be finite and non-negative");
    const double wsum = weights.sum();
    if (!(wsum > 0.0))
        throw std::invalid_argument("weighted_mae: all weights are zero");
    const Eigen::VectorXd per_path = (pred - truth).cwiseAbs().rowwise().mean();
    return weights.dot(per_path) / wsum;
}

Eigen::VectorXd path_power_weights(const Eigen::MatrixXd &intensity_db)
{
    return (intensity_db.array() * (std::log(10.0) / 10.0)).exp().rowwise().mean();
}

std::vector<CdfPoint> error_cdf(std::span<const double> errors)
{
    if (errors.empty())
        throw std::invalid_argument("error_cdf: no samples");
    std::vector<double> v(errors.begin(), errors.end());
    std::sort(v.begin(), v.end());
    const double n = double(v.size());
    std::vector<CdfPoint> out(v.size());
    // Walk backwards so ties take the fraction of their last occurrence.
    double frac = 1.0;
    for (std::size_t i = v.size(); i-- > 0;) {
        if (i + 1 < v.size() && v[i] != v[i + 1])
            frac = double(i + 1) / n;
        out[i] = {v[i], frac};
    }
    return out;
}

std::vector<CdfPoint> subsample_cdf(const std::vector<CdfPoint> &cdf, std::size_t max_points)
{
    if (max_points < 2 || cdf.size() <= max_points)
        return cdf;
    std::vector<CdfPoint> out;
    out.reserve(max_points);
    for (std::size_t k = 0; k < max_points; ++k)
        out.push_back(cdf[k * (cdf.size() - 1) / (max_points - 1)]);
    return out;
}

double horizon_mae(const Eigen::MatrixXd &pred, const Eigen::MatrixXd &truth, int h)
{
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("horizon_mae: prediction and truth shapes differ");
    if (h < 1 || h > pred.cols())
        throw std::invalid_argument("horizon_mae: horizon " + std::to_string(h) + " exceeds forecast length " +
                                    std::to_string(pred.cols()));
    if (pred.rows() == 0)
        throw std::invalid_argument("horizon_mae: no windows");
    return (pred.leftCols(h) - truth.leftCols(h)).cwiseAbs().mean();
}

std::map<int, double> horizon_eval(const nn::Forecaster &model, const WindowedDataset &data,
                                   std::span<const int> horizons)
{
    if (data.size() == 0)
        throw std::invalid_argument("horizon_eval: empty dataset");
    for (int h : horizons)
        if (h < 1 || h > data.horizon)
            throw std::invalid_argument("horizon_eval: horizon " + std::to_string(h) + " exceeds lambda " +
                                        std::to_string(data.horizon));
    Eigen::MatrixXd contexts(Eigen::Index(data.size()), data.context);
    Eigen::MatrixXd truth(Eigen::Index(data.size()), data.horizon);
    for (std::size_t i = 0; i < data.size(); ++i) {
        contexts.row(Eigen::Index(i)) = data.context_of(data.windows[i]).transpose();
        truth.row(Eigen::Index(i)) = data.target_of(data.windows[i]).transpose();
    }
    const Eigen::MatrixXd pred = nn::predict_batch(model, contexts, data.horizon);
    std::map<int, double> out;
    for (int h : horizons)
        out[h] = horizon_mae(pred, truth, h);
    return out;
}

PathLossResult path_loss_eval(const Eigen::MatrixXd &pred, const Eigen::MatrixXd &truth)
{
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw std::invalid_argument("path_loss_eval: forecasts missing for some paths or steps");
    if (pred.rows() == 0 || pred.cols() == 0)
        throw std::invalid_argument("path_loss_eval: empty input");
    if (!pred.allFinite())
        throw std::invalid_argument("path_loss_eval: non-finite forecasts");
    PathLossResult r;
    r.truth_db.resize(truth.cols());
    r.pred_db.resize(pred.cols());
    for (Eigen::Index t = 0; t < pred.cols(); ++t) {
        const Eigen::VectorXd tc = truth.col(t), pc = pred.col(t);
        r.truth_db(t) = reconstruct_path_loss(std::span<const double>(tc.data(), std::size_t(tc.size())));
        r.pred_db(t) = reconstruct_path_loss(std::span<const double>(pc.data(), std::size_t(pc.size())));
    }
    r.mae_db = (r.pred_db - r.truth_db).cwiseAbs().mean();
    return r;
}

// ----------------------------------------------------------------------------------------------------------------

void EvalReport::merge(const EvalReport &o)
{
    table.insert(table.end(), o.table.begin(), o.table.end());
    horizons.insert(horizons.end(), o.horizons.begin(), o.horizons.end());
    cdf.insert(cdf.end(), o.cdf.begin(), o.cdf.end());
    overlay.insert(overlay.end(), o.overlay.begin(), o.overlay.end());
}

const TableRow *EvalReport::find(const std::string &model, const std::string &scenario, int speed,
                                 ParamType p) const
{
    for (const auto &r : table)
        if (r.model == model && r.scenario == scenario && r.speed == speed && r.param == p)
            return &r;
    return nullptr;
}

const HorizonRow *EvalReport::find_horizon(const std::string &model, const std::string &scenario, int speed,
                                           int horizon) const
{
    for (const auto &r : horizons)
        if (r.model == model && r.scenario == scenario && r.speed == speed && r.horizon == horizon)
            return &r;
    return nullptr;
}

} // namespace ddcp
