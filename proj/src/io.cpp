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

#include "ddcp/io.hpp"
#include "ddcp/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace ddcp::io {

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path &path, const std::string &text)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open for writing: " + path.string());
    os << text;
    if (!os)
        throw IoError("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path &path, const std::string &artifact)
{
    if (!std::filesystem::exists(path))
        throw MissingArtifactError(artifact, path.string());
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv(const std::string &line)
{
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

namespace {

double to_double(const std::string &s, const char *what)
{
    char *end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0' || errno == ERANGE)
        throw IoError(std::string(what) + ": bad number '" + s + "'");
    return v;
}

long long to_int(const std::string &s, const char *what)
{
    char *end = nullptr;
    errno = 0;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno == ERANGE)
        throw IoError(std::string(what) + ": bad integer '" + s + "'");
    return v;
}

/// Splits text into rows of `cols` fields after checking the header.
std::vector<std::vector<std::string>> rows_of(const std::string &text, const std::string &header, const char *what)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != header)
        throw IoError(std::string(what) + ": expected header '" + header + "'");
    const std::size_t cols = split_csv(header).size();
    std::vector<std::vector<std::string>> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto cells = split_csv(line);
        if (cells.size() != cols)
            throw IoError(std::string(what) + ": expected " + std::to_string(cols) + " fields in '" + line + "'");
        out.push_back(std::move(cells));
    }
    return out;
}

ParamType param_of(const std::string &s, const char *what)
{
    try {
        return parse_param(s);
    } catch (const std::invalid_argument &) {
        throw IoError(std::string(what) + ": unknown parameter '" + s + "'");
    }
}

} // namespace

// ----------------------------------------------------------------------------------------------------------------

std::string trace_csv(const ChannelTrace &trace)
{
    std::string out = "time_s,path_id,gain_re,gain_im,delay_s\n";
    for (const auto &s : trace.snapshots)
        for (const auto &p : s.paths) {
            out += fmt(s.time) + ',' + std::to_string(p.path_id) + ',' + fmt(p.gain.real()) + ',' +
                   fmt(p.gain.imag()) + ',' + fmt(p.delay) + '\n';
        }
    return out;
}

ChannelTrace parse_trace_csv(const std::string &text, const ScenarioConfig &config, int lane)
{
    ChannelTrace t;
    t.config = config;
    t.lane = lane;
    for (const auto &r : rows_of(text, "time_s,path_id,gain_re,gain_im,delay_s", "trace csv")) {
        const double time = to_double(r[0], "trace csv");
        if (t.snapshots.empty() || t.snapshots.back().time != time) {
            if (!t.snapshots.empty() && time < t.snapshots.back().time)
                throw IoError("trace csv: snapshot times must be increasing");
            t.snapshots.push_back({time, {}});
        }
        PathState p;
        p.path_id = int(to_int(r[1], "trace csv"));
        p.gain = {to_double(r[2], "trace csv"), to_double(r[3], "trace csv")};
        p.delay = to_double(r[4], "trace csv");
        t.snapshots.back().paths.push_back(p);
    }
    return t;
}

std::string series_csv(std::span<const DDSeries> series)
{
    std::string out = "trace_id,path_id,param_type,t_index,value\n";
    for (const auto &s : series)
        for (ParamType p : kParamTypes)
            for (Eigen::Index i = 0; i < s.paths(); ++i) {
                const std::string prefix = s.trace_id + ',' + std::to_string(s.path_ids[std::size_t(i)]) + ',' +
                                           std::string(param_name(p)) + ',';
                for (Eigen::Index k = 0; k < s.steps(); ++k)
                    out += prefix + std::to_string(k) + ',' + fmt(s.channel(p)(i, k)) + '\n';
            }
    return out;
}

std::vector<DDSeries> parse_series_csv(const std::string &text, double dt)
{
    // trace -> path -> param -> values; insertion order of traces and paths is preserved.
    std::vector<std::string> trace_order;
    std::map<std::string, std::vector<int>> path_order;
    std::map<std::tuple<std::string, int, int>, std::vector<double>> values;
    for (const auto &r : rows_of(text, "trace_id,path_id,param_type,t_index,value", "series csv")) {
        const int path = int(to_int(r[1], "series csv"));
        const int param = int(param_index(param_of(r[2], "series csv")));
        const auto t = to_int(r[3], "series csv");
        if (!path_order.count(r[0]))
            trace_order.push_back(r[0]);
        auto &paths = path_order[r[0]];
        if (std::find(paths.begin(), paths.end(), path) == paths.end())
            paths.push_back(path);
        auto &v = values[{r[0], path, param}];
        if (t != static_cast<long long>(v.size()))
            throw IoError("series csv: t_index out of order for trace " + r[0]);
        v.push_back(to_double(r[4], "series csv"));
    }
    std::vector<DDSeries> out;
    for (const auto &tid : trace_order) {
        DDSeries s;
        s.trace_id = tid;
        s.dt = dt;
        s.path_ids = path_order[tid];
        const auto steps = Eigen::Index(values[{tid, s.path_ids.front(), 0}].size());
        for (ParamType p : kParamTypes) {
            auto &m = s.channel(p);
            m.resize(Eigen::Index(s.path_ids.size()), steps);
            for (std::size_t i = 0; i < s.path_ids.size(); ++i) {
                const auto &v = values[{tid, s.path_ids[i], int(param_index(p))}];
                if (Eigen::Index(v.size()) != steps)
                    throw IoError("series csv: ragged series for trace " + tid);
                m.row(Eigen::Index(i)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), steps);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string norm_stats_csv(const NormStats &st)
{
    std::string out = "param,mean,std,constant\n";
    for (ParamType p : kParamTypes) {
        const auto i = param_index(p);
        out += std::string(param_name(p)) + ',' + fmt(st.mean[i]) + ',' + fmt(st.stddev[i]) + ',' +
               (st.constant[i] ? "1" : "0") + '\n';
    }
    return out;
}

NormStats parse_norm_stats_csv(const std::string &text)
{
    NormStats st;
    const auto rows = rows_of(text, "param,mean,std,constant", "norm stats");
    if (rows.size() != kParamTypes.size())
        throw IoError("norm stats: expected one row per parameter type");
    for (const auto &r : rows) {
        const auto i = param_index(param_of(r[0], "norm stats"));
        st.mean[i] = to_double(r[1], "norm stats");
        st.stddev[i] = to_double(r[2], "norm stats");
        st.constant[i] = r[3] == "1";
    }
    return st;
}

std::string window_index_csv(std::span<const WindowedDataset> datasets)
{
    std::string out = "split,trace_id,path_id,param_type,start\n";
    for (const auto &ds : datasets) {
        const char *split = ds.split == Split::Train ? "train" : "test";
        for (const auto &w : ds.windows) {
            const auto &s = ds.series[w.series];
            out += std::string(split) + ',' + s.trace_id + ',' + std::to_string(s.path_id) + ',' +
                   std::string(param_name(s.param)) + ',' + std::to_string(w.start) + '\n';
        }
    }
    return out;
}

std::string grid_text(const otfs::CMatrix<double> &g)
{
    std::string out = std::to_string(g.rows()) + ',' + std::to_string(g.cols()) + '\n';
    for (Eigen::Index r = 0; r < g.rows(); ++r)
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            out += fmt(g(r, c).real()) + ',' + fmt(g(r, c).imag()) + '\n';
    return out;
}

otfs::CMatrix<double> parse_grid_text(const std::string &text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line))
        throw IoError("grid text: empty input");
    const auto dims = split_csv(line);
    if (dims.size() != 2)
        throw IoError("grid text: expected 'rows,cols' header");
    const auto rows = to_int(dims[0], "grid text"), cols = to_int(dims[1], "grid text");
    if (rows < 0 || cols < 0)
        throw IoError("grid text: negative dimensions");
    otfs::CMatrix<double> g(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!std::getline(in, line))
                throw IoError("grid text: truncated");
            const auto v = split_csv(line);
            if (v.size() != 2)
                throw IoError("grid text: expected 're,im'");
            g(r, c) = {to_double(v[0], "grid text"), to_double(v[1], "grid text")};
        }
    return g;
}

// ----------------------------------------------------------------------------------------------------------------

std::string report_csv(std::span<const TableRow> rows)
{
    std::string out = "model,scenario,speed,param,wmae\n";
    for (const auto &r : rows)
        out += r.model + ',' + r.scenario + ',' + std::to_string(r.speed) + ',' + std::string(param_name(r.param)) +
               ',' + fmt(r.wmae) + '\n';
    return out;
}

std::vector<TableRow> parse_report_csv(const std::string &text)
{
    std::vector<TableRow> out;
    for (const auto &r : rows_of(text, "model,scenario,speed,param,wmae", "report csv"))
        out.push_back({r[0], r[1], int(to_int(r[2], "report csv")), param_of(r[3], "report csv"),
                       to_double(r[4], "report csv")});
    return out;
}

std::string horizon_csv(std::span<const HorizonRow> rows)
{
    std::string out = "model,scenario,speed,horizon,path_loss_mae_db\n";
    for (const auto &r : rows)
        out += r.model + ',' + r.scenario + ',' + std::to_string(r.speed) + ',' + std::to_string(r.horizon) + ',' +
               fmt(r.path_loss_mae_db) + '\n';
    return out;
}

std::vector<HorizonRow> parse_horizon_csv(const std::string &text)
{
    std::vector<HorizonRow> out;
    for (const auto &r : rows_of(text, "model,scenario,speed,horizon,path_loss_mae_db", "horizon csv"))
        out.push_back({r[0], r[1], int(to_int(r[2], "horizon csv")), int(to_int(r[3], "horizon csv")),
                       to_double(r[4], "horizon csv")});
    return out;
}

std::string cdf_csv(std::span<const CdfRow> rows)
{
    std::string out = "param,model,error,fraction\n";
    for (const auto &r : rows)
        out += std::string(param_name(r.param)) + ',' + r.model + ',' + fmt(r.error) + ',' + fmt(r.fraction) + '\n';
    return out;
}

std::vector<CdfRow> parse_cdf_csv(const std::string &text)
{
    std::vector<CdfRow> out;
    for (const auto &r : rows_of(text, "param,model,error,fraction", "cdf csv"))
        out.push_back({param_of(r[0], "cdf csv"), r[1], to_double(r[2], "cdf csv"), to_double(r[3], "cdf csv")});
    return out;
}

std::string overlay_csv(std::span<const OverlayRow> rows)
{
    std::string out = "t_ms,truth_db,pred_db,model\n";
    for (const auto &r : rows)
        out += fmt(r.t_ms) + ',' + fmt(r.truth_db) + ',' + fmt(r.pred_db) + ',' + r.model + '\n';
    return out;
}

std::vector<OverlayRow> parse_overlay_csv(const std::string &text)
{
    std::vector<OverlayRow> out;
    for (const auto &r : rows_of(text, "t_ms,truth_db,pred_db,model", "overlay csv"))
        out.push_back({to_double(r[0], "overlay csv"), to_double(r[1], "overlay csv"), to_double(r[2], "overlay csv"),
                       r[3]});
    return out;
}

std::string loss_curve_csv(std::span<const double> losses)
{
    std::string out = "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
        out += std::to_string(i) + ',' + fmt(losses[i]) + '\n';
    return out;
}

std::vector<double> parse_loss_curve_csv(const std::string &text)
{
    std::vector<double> out;
    for (const auto &r : rows_of(text, "step,loss", "loss curve csv"))
        out.push_back(to_double(r[1], "loss curve csv"));
    return out;
}

} // namespace ddcp::io
