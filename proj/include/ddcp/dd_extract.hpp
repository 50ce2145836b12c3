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

// Real-valued delay-Doppler parameter series extracted from channel traces.

#pragma once

#include "ddcp/channel_sim.hpp"

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ddcp {

enum class ParamType : int { Delay = 0, Doppler = 1, Intensity = 2, PhaseDiff = 3 };

inline constexpr std::array<ParamType, 4> kParamTypes{ParamType::Delay, ParamType::Doppler, ParamType::Intensity,
                                                      ParamType::PhaseDiff};

std::string_view param_name(ParamType p);
std::string_view param_unit(ParamType p);
ParamType parse_param(std::string_view name);

inline std::size_t param_index(ParamType p) { return static_cast<std::size_t>(p); }

/// Intensity floor used for samples whose gain is exactly zero.
inline constexpr double kIntensityFloorDb = -300.0;

/// Parameters of all paths at one time step.
struct DDParamVector {
    std::vector<int> path_ids;
    Eigen::VectorXd intensity_db;
    Eigen::VectorXd phase_diff; // rad, (-pi, pi]
    Eigen::VectorXd delay;      // s
    Eigen::VectorXd doppler;    // Hz
};

struct FlaggedSample {
    int path_id = 0;
    Eigen::Index step = 0;
};

/// Per-path parameter series. Step k corresponds to snapshot k+1 of the source trace (the first snapshot
/// only serves as the phase reference).
struct DDSeries {
    std::string trace_id;
    std::vector<int> path_ids;
    double dt = 5e-4;
    std::array<Eigen::MatrixXd, 4> data; // [param] -> paths x steps
    std::vector<FlaggedSample> flagged;

    Eigen::Index steps() const { return data[0].cols(); }
    Eigen::Index paths() const { return data[0].rows(); }
    Eigen::MatrixXd &channel(ParamType p) { return data[param_index(p)]; }
    const Eigen::MatrixXd &channel(ParamType p) const { return data[param_index(p)]; }
    DDParamVector at(Eigen::Index step) const;
};

/// Principal-value phase difference arg(g1) - arg(g0) in (-pi, pi].
double phase_difference(std::complex<double> g0, std::complex<double> g1);

/// Doppler shift from the phase rotation between two neighbouring snapshots; |result| <= 1/(2 dt).
double estimate_doppler(std::complex<double> g0, std::complex<double> g1, double dt);

/// g0 * exp(j 2 pi nu (t - tau))
std::complex<double> continuous_gain(std::complex<double> g0, double nu, double tau, double t);

DDSeries extract_series(const ChannelTrace &trace, std::string trace_id = "trace");

/// z-score statistics per parameter type, pooled over paths and steps.
struct NormStats {
    std::array<double, 4> mean{0.0, 0.0, 0.0, 0.0};
    std::array<double, 4> stddev{1.0, 1.0, 1.0, 1.0};
    std::array<bool, 4> constant{false, false, false, false};

    double apply(ParamType p, double x) const { return (x - mean[param_index(p)]) / stddev[param_index(p)]; }
    double invert(ParamType p, double z) const { return z * stddev[param_index(p)] + mean[param_index(p)]; }
};

NormStats compute_norm_stats(std::span<const DDSeries> series);
DDSeries apply_normalization(const DDSeries &series, const NormStats &stats);
DDSeries denormalize(const DDSeries &series, const NormStats &stats);
std::pair<DDSeries, NormStats> normalize(const DDSeries &series);

enum class Split { Train, Test };

/// One (path, parameter type) series: the unit of univariate forecasting.
struct UnivariateSeries {
    std::string trace_id;
    int path_id = 0;
    ParamType param = ParamType::Delay;
    Eigen::VectorXd values;
};

struct WindowRef {
    std::size_t series = 0;
    Eigen::Index start = 0;
};

/// Context/target windows referencing shared series storage.
struct WindowedDataset {
    int context = 20;
    int horizon = 10;
    Split split = Split::Train;
    std::vector<UnivariateSeries> series;
    std::vector<WindowRef> windows;

    std::size_t size() const { return windows.size(); }
    Eigen::VectorXd context_of(const WindowRef &w) const;
    Eigen::VectorXd target_of(const WindowRef &w) const;
    /// Context followed by target.
    Eigen::VectorXd full_of(const WindowRef &w) const;
    /// Subset restricted to one parameter type; series storage is shared by copy.
    WindowedDataset filter(ParamType p) const;
};

std::size_t window_count(Eigen::Index length, int context, int horizon, int stride);

/// Sliding windows over every (path, parameter) series of each input.
WindowedDataset window(std::span<const DDSeries> series, int context, int horizon, int stride,
                       Split split = Split::Train);
WindowedDataset window(const DDSeries &series, int context, int horizon, int stride, Split split = Split::Train);

/// Total received power across paths, negated to express loss (dB).
double reconstruct_path_loss(std::span<const double> intensities_db);
double reconstruct_path_loss(const DDParamVector &vec);

} // namespace ddcp
