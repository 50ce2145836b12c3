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

// Synthetic general-purpose series used for pre-training. Every series carries a "synthetic:<family>" trace id
// so it can never be mistaken for channel data.

#pragma once

#include "ddcp/dd_extract.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace ddcp::nn {

enum class CorpusFamily { Sine, AR2, Trend, Piecewise };

inline constexpr std::array<CorpusFamily, 4> kCorpusFamilies{CorpusFamily::Sine, CorpusFamily::AR2,
                                                             CorpusFamily::Trend, CorpusFamily::Piecewise};

std::string_view family_name(CorpusFamily f);
CorpusFamily parse_family(std::string_view name);

inline constexpr std::string_view kSyntheticPrefix = "synthetic:";

struct CorpusConfig {
    int series_per_family = 48;
    int length = 240;
    // Sine: 1..3 components with amplitudes in [amp_min, amp_max], periods in [period_min, period_max] steps.
    double amp_min = 0.2, amp_max = 1.0;
    double period_min = 8.0, period_max = 200.0;
    // AR(2): poles inside radius pole_max; unit innovation variance scaled by ar_noise.
    double pole_max = 0.95;
    double ar_noise = 0.1;
    // Trend: slope and curvature per step.
    double slope_max = 0.02, curvature_max = 1e-4;
    // Piecewise: level jumps drawn from N(0, 1), segment lengths in [seg_min, seg_max].
    int seg_min = 20, seg_max = 80;
    double noise = 0.01; // additive white noise on every family
    std::vector<CorpusFamily> families{kCorpusFamilies.begin(), kCorpusFamilies.end()};

    void validate() const;
};

std::vector<UnivariateSeries> pretrain_corpus(std::uint64_t seed, const CorpusConfig &cfg = {});

/// Windows over a list of univariate series (trace ids are kept).
WindowedDataset window_series(std::vector<UnivariateSeries> series, int context, int horizon, int stride);

} // namespace ddcp::nn
