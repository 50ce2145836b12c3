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

// Bare-bones SVG line and grouped-bar charts. CSV files remain the authoritative output.

#pragma once

#include <string>
#include <vector>

namespace ddcp::svg {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

struct Axes {
    std::string title, x_label, y_label;
    bool log_y = false;
};

std::string line_chart(const Axes &axes, const std::vector<Series> &series);

/// values[g][c]: bar of category c within group g.
std::string bar_chart(const Axes &axes, const std::vector<std::string> &groups,
                      const std::vector<std::string> &categories, const std::vector<std::vector<double>> &values);

} // namespace ddcp::svg
