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

#include "ddcp/predictor/corpus.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace ddcp::nn {

std::string_view family_name(CorpusFamily f)
{
    switch (f) {
    case CorpusFamily::Sine: return "sine";
    case CorpusFamily::AR2: return "ar2";
    case CorpusFamily::Trend: return "trend";
    case CorpusFamily::Piecewise: return "piecewise";
    }
    return "unknown";
}

CorpusFamily parse_family(std::string_view name)
{
    for (CorpusFamily f : kCorpusFamilies)
        if (family_name(f) == name)
            return f;
    throw std::invalid_argument("unknown corpus family '" + std::string(name) + "'");
}

void CorpusConfig::validate() const
{
    if (families.empty())
        throw std::invalid_argument("CorpusConfig: no families selected");
    if (series_per_family < 1 || length < 2)
        throw std::invalid_argument("CorpusConfig: need at least one series of length >= 2");
    if (!(amp_min >= 0.0 && amp_max >= amp_min) || !(period_min > 0.0 && period_max >= period_min))
        throw std::invalid_argument("CorpusConfig: invalid sine ranges");
    if (!(pole_max > 0.0 && pole_max < 1.0))
        throw std::invalid_argument("CorpusConfig: AR pole radius must be in (0, 1)");
    if (seg_min < 1 || seg_max < seg_min)
        throw std::invalid_argument("CorpusConfig: invalid segment lengths");
    if (noise < 0.0 || ar_noise < 0.0)
        throw std::invalid_argument("CorpusConfig: noise levels must be >= 0");
}

namespace {

constexpr double kTwoPi = 6.283185307179586;

Eigen::VectorXd make_series(CorpusFamily fam, const CorpusConfig &c, std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    const Eigen::Index n = c.length;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);

    switch (fam) {
    case CorpusFamily::Sine: {
        const int comps = 1 + int(u01(rng) * 3.0) % 3;
        for (int k = 0; k < comps; ++k) {
            const double a = uni(c.amp_min, c.amp_max);
            // log-uniform period
            const double period = std::exp(uni(std::log(c.period_min), std::log(c.period_max)));
            const double phase = uni(0.0, kTwoPi);
            for (Eigen::Index t = 0; t < n; ++t)
                x(t) += a * std::sin(kTwoPi * double(t) / period + phase);
        }
        break;
    }
    case CorpusFamily::AR2: {
        // Complex-conjugate or real pole pair inside pole_max.
        const double r = uni(0.3, c.pole_max);
        const double theta = uni(0.0, 3.141592653589793 / 2.0);
        const double a1 = 2.0 * r * std::cos(theta), a2 = -r * r;
        double x1 = 0.0, x2 = 0.0;
        for (Eigen::Index t = -50; t < n; ++t) {
            const double v = a1 * x1 + a2 * x2 + c.ar_noise * n01(rng);
            x2 = x1;
            x1 = v;
            if (t >= 0)
                x(t) = v;
        }
        break;
    }
    case CorpusFamily::Trend: {
        const double slope = uni(-c.slope_max, c.slope_max);
        const double curv = uni(-c.curvature_max, c.curvature_max);
        const double offset = n01(rng);
        for (Eigen::Index t = 0; t < n; ++t)
            x(t) = offset + slope * double(t) + curv * double(t) * double(t);
        break;
    }
    case CorpusFamily::Piecewise: {
        std::uniform_int_distribution<int> seg(c.seg_min, c.seg_max);
        double level = n01(rng);
        Eigen::Index t = 0;
        while (t < n) {
            const Eigen::Index len = std::min<Eigen::Index>(seg(rng), n - t);
            x.segment(t, len).setConstant(level);
            t += len;
            level += n01(rng);
        }
        break;
    }
    }
    if (c.noise > 0.0)
        for (Eigen::Index t = 0; t < n; ++t)
            x(t) += c.noise * n01(rng);
    return x;
}

} // namespace

std::vector<UnivariateSeries> pretrain_corpus(std::uint64_t seed, const CorpusConfig &cfg)
{
    cfg.validate();
    std::vector<UnivariateSeries> out;
    out.reserve(cfg.families.size() * std::size_t(cfg.series_per_family));
    for (CorpusFamily fam : cfg.families) {
        // One stream per family so the families stay independent of each other's sizes.
        std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(fam) + 100u};
        std::mt19937_64 rng(seq);
        for (int i = 0; i < cfg.series_per_family; ++i) {
            UnivariateSeries s;
            s.trace_id = std::string(kSyntheticPrefix) + std::string(family_name(fam));
            s.path_id = i;
            s.param = ParamType::Delay; // unused for synthetic data
            s.values = make_series(fam, cfg, rng);
            out.push_back(std::move(s));
        }
    }
    return out;
}

WindowedDataset window_series(std::vector<UnivariateSeries> series, int context, int horizon, int stride)
{
    WindowedDataset ds;
    ds.context = context;
    ds.horizon = horizon;
    ds.split = Split::Train;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::size_t n = window_count(series[i].values.size(), context, horizon, stride);
        for (std::size_t w = 0; w < n; ++w)
            ds.windows.push_back({i, Eigen::Index(w) * stride});
    }
    ds.series = std::move(series);
    return ds;
}

} // namespace ddcp::nn
