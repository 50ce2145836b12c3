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

// Forecast scoring: intensity-weighted MAE, empirical error CDFs, horizon comparisons and path-loss overlays.

#pragma once

#include "ddcp/dd_extract.hpp"
#include "ddcp/predictor/forecaster.hpp"

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>
#include <vector>

namespace ddcp {

/// sum_i w_i * mean_t |pred(i,t) - truth(i,t)| / sum_i w_i over rows i (paths).
double weighted_mae(const Eigen::MatrixXd &pred, const Eigen::MatrixXd &truth, const Eigen::VectorXd &weights);

/// Mean linear power 10^(I/10) of every row of an intensity matrix (dB).
Eigen::VectorXd path_power_weights(const Eigen::MatrixXd &intensity_db);

struct CdfPoint {
    double value = 0.0;
    double fraction = 0.0;
};

/// Empirical CDF of absolute errors, sorted ascending; tied values share the fraction of the last tie.
std::vector<CdfPoint> error_cdf(std::span<const double> errors);
/// Keeps at most `max_points` points spread evenly over the CDF, always including the last.
std::vector<CdfPoint> subsample_cdf(const std::vector<CdfPoint> &cdf, std::size_t max_points);

/// MAE over the first h columns of windows x steps forecast matrices.
double horizon_mae(const Eigen::MatrixXd &pred, const Eigen::MatrixXd &truth, int h);

/// Forecasts every window of `data` once at the dataset horizon and reports the MAE of the first h steps for
/// each requested h, in dataset units.
std::map<int, double> horizon_eval(const nn::Forecaster &model, const WindowedDataset &data,
                                   std::span<const int> horizons);

struct PathLossResult {
    double mae_db = 0.0;
    Eigen::VectorXd truth_db;
    Eigen::VectorXd pred_db;
};

/// Reconstructs path loss per column from paths x steps intensity matrices and compares them.
PathLossResult path_loss_eval(const Eigen::MatrixXd &pred_intensity_db, const Eigen::MatrixXd &truth_intensity_db);

// ----------------------------------------------------------------------------------------------------------------

struct TableRow {
    std::string model;
    std::string scenario; // "LOS" or "NLOS"
    int speed = 60;       // km/h
    ParamType param = ParamType::Delay;
    double wmae = 0.0;
};

struct HorizonRow {
    std::string model;
    std::string scenario;
    int speed = 60;
    int horizon = 10;
    double path_loss_mae_db = 0.0;
};

struct CdfRow {
    ParamType param = ParamType::Delay;
    std::string model;
    double error = 0.0;
    double fraction = 0.0;
};

struct OverlayRow {
    double t_ms = 0.0;
    double truth_db = 0.0;
    double pred_db = 0.0;
    std::string model;
};

struct EvalReport {
    std::vector<TableRow> table;
    std::vector<HorizonRow> horizons;
    std::vector<CdfRow> cdf;
    std::vector<OverlayRow> overlay;

    /// Appends another report; rows keep their insertion order.
    void merge(const EvalReport &other);
    const TableRow *find(const std::string &model, const std::string &scenario, int speed, ParamType p) const;
    const HorizonRow *find_horizon(const std::string &model, const std::string &scenario, int speed,
                                   int horizon) const;
};

} // namespace ddcp
