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

#include "ddcp/dd_extract.hpp"
#include "ddcp/errors.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace ddcp {

std::string_view param_name(ParamType p)
{
    switch (p) {
    case ParamType::Delay: return "delay";
    case ParamType::Doppler: return "doppler";
    case ParamType::Intensity: return "intensity";
    case ParamType::PhaseDiff: return "phase_diff";
    }
    throw std::invalid_argument("unknown parameter type");
}

std::string_view param_unit(ParamType p)
{
    switch (p) {
    case ParamType::Delay: return "s";
    case ParamType::Doppler: return "Hz";
    case ParamType::Intensity: return "dB";
    case ParamType::PhaseDiff: return "rad";
    }
    throw std::invalid_argument("unknown parameter type");
}

ParamType parse_param(std::string_view name)
{
    for (ParamType p : kParamTypes)
        if (param_name(p) == name)
            return p;
    throw std::invalid_argument("unknown parameter type '" + std::string(name) + "'");
}

DDParamVector DDSeries::at(Eigen::Index step) const
{
    if (step < 0 || step >= steps())
        throw std::out_of_range("DDSeries::at: step out of range");
    DDParamVector v;
    v.path_ids = path_ids;
    v.intensity_db = channel(ParamType::Intensity).col(step);
    v.phase_diff = channel(ParamType::PhaseDiff).col(step);
    v.delay = channel(ParamType::Delay).col(step);
    v.doppler = channel(ParamType::Doppler).col(step);
    return v;
}

double phase_difference(std::complex<double> g0, std::complex<double> g1)
{
    if (g0 == 0.0 || g1 == 0.0)
        throw UndefinedPhaseError("phase of a zero gain is undefined");
    double d = std::arg(g1 * std::conj(g0));
    if (d <= -kPi)
        d = kPi;
    return d;
}

double estimate_doppler(std::complex<double> g0, std::complex<double> g1, double dt)
{
    if (!(dt > 0.0))
        throw std::invalid_argument("estimate_doppler: dt must be positive");
    return phase_difference(g0, g1) / (2.0 * kPi * dt);
}

std::complex<double> continuous_gain(std::complex<double> g0, double nu, double tau, double t)
{
    return g0 * std::polar(1.0, 2.0 * kPi * nu * (t - tau));
}

DDSeries extract_series(const ChannelTrace &trace, std::string trace_id)
{
    const auto &snaps = trace.snapshots;
    if (snaps.size() < 2)
        throw std::invalid_argument("extract_series: need at least two snapshots");
    const double dt = trace.snapshot_interval();
    if (!(dt > 0.0))
        throw std::invalid_argument("extract_series: snapshot interval must be positive");

    DDSeries out;
    out.trace_id = std::move(trace_id);
    out.dt = dt;
    for (const auto &p : snaps.front().paths)
        out.path_ids.push_back(p.path_id);
    const auto n_paths = static_cast<Eigen::Index>(out.path_ids.size());
    const auto steps = static_cast<Eigen::Index>(snaps.size() - 1);
    for (auto &m : out.data)
        m.resize(n_paths, steps);

    std::map<int, Eigen::Index> row_of;
    for (Eigen::Index i = 0; i < n_paths; ++i)
        row_of[out.path_ids[std::size_t(i)]] = i;

    auto gains_of = [&](const ChannelSnapshot &s) {
        if (static_cast<Eigen::Index>(s.paths.size()) != n_paths)
            throw std::invalid_argument("extract_series: path set changes within the trace");
        std::vector<const PathState *> ordered(std::size_t(n_paths), nullptr);
        for (const auto &p : s.paths) {
            auto it = row_of.find(p.path_id);
            if (it == row_of.end() || ordered[std::size_t(it->second)])
                throw std::invalid_argument("extract_series: inconsistent path ids within the trace");
            ordered[std::size_t(it->second)] = &p;
        }
        return ordered;
    };

    auto prev = gains_of(snaps[0]);
    std::vector<double> last_dphi(std::size_t(n_paths), 0.0);
    std::vector<std::complex<double>> last_nonzero(static_cast<std::size_t>(n_paths));
    for (Eigen::Index i = 0; i < n_paths; ++i)
        last_nonzero[std::size_t(i)] = prev[std::size_t(i)]->gain;

    for (Eigen::Index k = 0; k < steps; ++k) {
        const auto cur = gains_of(snaps[std::size_t(k + 1)]);
        for (Eigen::Index i = 0; i < n_paths; ++i) {
            const auto g = cur[std::size_t(i)]->gain;
            const auto g_ref = last_nonzero[std::size_t(i)];
            double dphi = last_dphi[std::size_t(i)];
            double intensity = kIntensityFloorDb;
            if (g != 0.0 && g_ref != 0.0) {
                dphi = phase_difference(g_ref, g);
                intensity = 20.0 * std::log10(std::abs(g));
            } else {
                out.flagged.push_back({out.path_ids[std::size_t(i)], k});
                if (g != 0.0)
                    intensity = 20.0 * std::log10(std::abs(g));
            }
            if (g != 0.0)
                last_nonzero[std::size_t(i)] = g;
            last_dphi[std::size_t(i)] = dphi;
            out.channel(ParamType::Intensity)(i, k) = intensity;
            out.channel(ParamType::PhaseDiff)(i, k) = dphi;
            out.channel(ParamType::Delay)(i, k) = cur[std::size_t(i)]->delay;
            out.channel(ParamType::Doppler)(i, k) = dphi / (2.0 * kPi * dt);
        }
    }
    return out;
}

// ----------------------------------------------------------------------------------------------------------------

NormStats compute_norm_stats(std::span<const DDSeries> series)
{
    if (series.empty())
        throw std::invalid_argument("compute_norm_stats: no series");
    NormStats stats;
    for (ParamType p : kParamTypes) {
        const auto idx = param_index(p);
        double sum = 0.0;
        double count = 0.0;
        for (const auto &s : series) {
            sum += s.channel(p).sum();
            count += double(s.channel(p).size());
        }
        if (count < 2)
            throw std::invalid_argument("compute_norm_stats: need at least two samples per parameter type");
        const double mean = sum / count;
        double ss = 0.0;
        for (const auto &s : series)
            ss += (s.channel(p).array() - mean).square().sum();
        const double sd = std::sqrt(ss / count);
        stats.mean[idx] = mean;
        // Constant channels are centred only.
        stats.constant[idx] = !(sd > 0.0);
        stats.stddev[idx] = stats.constant[idx] ? 1.0 : sd;
    }
    return stats;
}

DDSeries apply_normalization(const DDSeries &series, const NormStats &stats)
{
    DDSeries out = series;
    for (ParamType p : kParamTypes) {
        const auto idx = param_index(p);
        out.channel(p) = (series.channel(p).array() - stats.mean[idx]) / stats.stddev[idx];
    }
    return out;
}

DDSeries denormalize(const DDSeries &series, const NormStats &stats)
{
    DDSeries out = series;
    for (ParamType p : kParamTypes) {
        const auto idx = param_index(p);
        out.channel(p) = series.channel(p).array() * stats.stddev[idx] + stats.mean[idx];
    }
    return out;
}

std::pair<DDSeries, NormStats> normalize(const DDSeries &series)
{
    if (series.steps() < 2)
        throw std::invalid_argument("normalize: need at least two time steps");
    NormStats stats = compute_norm_stats(std::span<const DDSeries>(&series, 1));
    return {apply_normalization(series, stats), stats};
}

// ----------------------------------------------------------------------------------------------------------------

Eigen::VectorXd WindowedDataset::context_of(const WindowRef &w) const
{
    return series.at(w.series).values.segment(w.start, context);
}

Eigen::VectorXd WindowedDataset::target_of(const WindowRef &w) const
{
    return series.at(w.series).values.segment(w.start + context, horizon);
}

Eigen::VectorXd WindowedDataset::full_of(const WindowRef &w) const
{
    return series.at(w.series).values.segment(w.start, context + horizon);
}

WindowedDataset WindowedDataset::filter(ParamType p) const
{
    WindowedDataset out;
    out.context = context;
    out.horizon = horizon;
    out.split = split;
    std::vector<std::ptrdiff_t> remap(series.size(), -1);
    for (std::size_t i = 0; i < series.size(); ++i)
        if (series[i].param == p) {
            remap[i] = static_cast<std::ptrdiff_t>(out.series.size());
            out.series.push_back(series[i]);
        }
    for (const auto &w : windows)
        if (remap[w.series] >= 0)
            out.windows.push_back({static_cast<std::size_t>(remap[w.series]), w.start});
    return out;
}

std::size_t window_count(Eigen::Index length, int context, int horizon, int stride)
{
    if (context < 1 || horizon < 1 || stride < 1)
        throw std::invalid_argument("window: context, horizon and stride must be >= 1");
    if (length < context + horizon)
        throw std::invalid_argument("window: series of length " + std::to_string(length) +
                                    " is shorter than context + horizon = " + std::to_string(context + horizon));
    return static_cast<std::size_t>((length - context - horizon) / stride) + 1;
}

WindowedDataset window(std::span<const DDSeries> inputs, int context, int horizon, int stride, Split split)
{
    WindowedDataset ds;
    ds.context = context;
    ds.horizon = horizon;
    ds.split = split;
    for (const auto &s : inputs) {
        const std::size_t count = window_count(s.steps(), context, horizon, stride);
        for (ParamType p : kParamTypes)
            for (Eigen::Index i = 0; i < s.paths(); ++i) {
                const std::size_t idx = ds.series.size();
                ds.series.push_back({s.trace_id, s.path_ids[std::size_t(i)], p, s.channel(p).row(i).transpose()});
                for (std::size_t w = 0; w < count; ++w)
                    ds.windows.push_back({idx, static_cast<Eigen::Index>(w) * stride});
            }
    }
    return ds;
}

WindowedDataset window(const DDSeries &series, int context, int horizon, int stride, Split split)
{
    return window(std::span<const DDSeries>(&series, 1), context, horizon, stride, split);
}

double reconstruct_path_loss(std::span<const double> intensities_db)
{
    if (intensities_db.empty())
        throw std::invalid_argument("reconstruct_path_loss: empty path set");
    double power = 0.0;
    for (double i : intensities_db)
        power += std::pow(10.0, i / 10.0);
    return -10.0 * std::log10(power);
}

double reconstruct_path_loss(const DDParamVector &vec)
{
    return reconstruct_path_loss(std::span<const double>(vec.intensity_db.data(), std::size_t(vec.intensity_db.size())));
}

} // namespace ddcp
