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

#include "ddcp/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ddcp::svg {

namespace {

constexpr double kW = 720, kH = 440, kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
const char *const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::string escape(const std::string &s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string header(const Axes &a)
{
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(kW / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(a.title) +
         "</text>\n";
    s += "<text x=\"" + num(kLeft + (kW - kLeft - kRight) / 2) + "\" y=\"" + num(kH - 15) +
         "\" text-anchor=\"middle\">" + escape(a.x_label) + "</text>\n";
    s += "<text transform=\"translate(18," + num(kTop + (kH - kTop - kBottom) / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + escape(a.y_label) + "</text>\n";
    s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kW - kLeft - kRight) +
         "\" height=\"" + num(kH - kTop - kBottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
    return s;
}

std::string legend(const std::vector<std::string> &names)
{
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = kTop + 10 + 18 * double(i);
        s += "<rect x=\"" + num(kW - kRight + 12) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"12\" fill=\"" +
             kPalette[i % 10] + "\"/>\n";
        s += "<text x=\"" + num(kW - kRight + 30) + "\" y=\"" + num(y + 1) + "\">" + escape(names[i]) + "</text>\n";
    }
    return s;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v)
    {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finish()
    {
        if (!(lo <= hi)) {
            lo = 0;
            hi = 1;
        }
        if (hi == lo) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::string y_ticks(const Range &r, bool log_y)
{
    std::string s;
    const double h = kH - kTop - kBottom;
    for (int i = 0; i <= 4; ++i) {
        const double frac = double(i) / 4.0;
        const double y = kTop + h * (1.0 - frac);
        double v = r.lo + frac * (r.hi - r.lo);
        if (log_y)
            v = std::pow(10.0, v);
        s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + tick(v) +
             "</text>\n";
    }
    return s;
}

} // namespace

std::string line_chart(const Axes &axes, const std::vector<Series> &series)
{
    auto ty = [&](double v) { return axes.log_y ? (v > 0 ? std::log10(v) : std::nan("")) : v; };
    Range rx, ry;
    for (const auto &s : series) {
        for (double x : s.x)
            rx.add(x);
        for (double y : s.y)
            ry.add(ty(y));
    }
    rx.finish();
    ry.finish();
    const double w = kW - kLeft - kRight, h = kH - kTop - kBottom;
    std::string out = header(axes);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto &s = series[k];
        names.push_back(s.name);
        std::string pts;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            const double yv = ty(s.y[i]);
            if (!std::isfinite(yv) || !std::isfinite(s.x[i]))
                continue;
            const double px = kLeft + w * (s.x[i] - rx.lo) / (rx.hi - rx.lo);
            const double py = kTop + h * (1.0 - (yv - ry.lo) / (ry.hi - ry.lo));
            pts += num(px) + "," + num(py) + " ";
        }
        out += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(kPalette[k % 10]) +
               "\" points=\"" + pts + "\"/>\n";
    }
    out += y_ticks(ry, axes.log_y);
    for (int i = 0; i <= 4; ++i) {
        const double frac = double(i) / 4.0;
        out += "<text x=\"" + num(kLeft + w * frac) + "\" y=\"" + num(kTop + h + 16) + "\" text-anchor=\"middle\">" +
               tick(rx.lo + frac * (rx.hi - rx.lo)) + "</text>\n";
    }
    out += legend(names);
    out += "</svg>\n";
    return out;
}

std::string bar_chart(const Axes &axes, const std::vector<std::string> &groups,
                      const std::vector<std::string> &categories, const std::vector<std::vector<double>> &values)
{
    Range ry;
    ry.add(0.0);
    for (const auto &g : values)
        for (double v : g)
            ry.add(v);
    ry.finish();
    const double w = kW - kLeft - kRight, h = kH - kTop - kBottom;
    std::string out = header(axes);
    const double gw = w / double(std::max<std::size_t>(groups.size(), 1));
    const double bw = 0.8 * gw / double(std::max<std::size_t>(categories.size(), 1));
    for (std::size_t g = 0; g < groups.size() && g < values.size(); ++g) {
        const double gx = kLeft + gw * double(g) + 0.1 * gw;
        for (std::size_t c = 0; c < categories.size() && c < values[g].size(); ++c) {
            const double v = std::isfinite(values[g][c]) ? values[g][c] : 0.0;
            const double top = kTop + h * (1.0 - (v - ry.lo) / (ry.hi - ry.lo));
            const double base = kTop + h * (1.0 - (0.0 - ry.lo) / (ry.hi - ry.lo));
            out += "<rect x=\"" + num(gx + bw * double(c)) + "\" y=\"" + num(std::min(top, base)) + "\" width=\"" +
                   num(bw * 0.95) + "\" height=\"" + num(std::abs(base - top)) + "\" fill=\"" + kPalette[c % 10] +
                   "\"/>\n";
        }
        out += "<text x=\"" + num(kLeft + gw * (double(g) + 0.5)) + "\" y=\"" + num(kTop + h + 16) +
               "\" text-anchor=\"middle\">" + escape(groups[g]) + "</text>\n";
    }
    out += y_ticks(ry, false);
    out += legend(categories);
    out += "</svg>\n";
    return out;
}

} // namespace ddcp::svg
