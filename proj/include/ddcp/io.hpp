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

// Delimited text formats exchanged between pipeline stages. Every number is written with enough digits to
// round-trip exactly.

#pragma once

#include "ddcp/channel_sim.hpp"
#include "ddcp/dd_extract.hpp"
#include "ddcp/eval.hpp"
#include "ddcp/otfs.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ddcp::io {

/// Shortest "%.17g" rendering of a double.
std::string fmt(double v);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path &path, const std::string &text);
/// Throws MissingArtifactError(artifact, path) if absent.
std::string read_text(const std::filesystem::path &path, const std::string &artifact);

/// Splits one CSV line on commas (no quoting).
std::vector<std::string> split_csv(const std::string &line);

// time_s,path_id,gain_re,gain_im,delay_s
std::string trace_csv(const ChannelTrace &trace);
/// Rebuilds snapshots from CSV; config and lane are supplied by the caller.
ChannelTrace parse_trace_csv(const std::string &text, const ScenarioConfig &config, int lane);

// trace_id,path_id,param_type,t_index,value
std::string series_csv(std::span<const DDSeries> series);
std::vector<DDSeries> parse_series_csv(const std::string &text, double dt);

// param,mean,std,constant
std::string norm_stats_csv(const NormStats &stats);
NormStats parse_norm_stats_csv(const std::string &text);

// split,trace_id,path_id,param_type,start
std::string window_index_csv(std::span<const WindowedDataset> datasets);

// First line "rows,cols", then one "re,im" line per entry in row-major order.
std::string grid_text(const otfs::CMatrix<double> &grid);
otfs::CMatrix<double> parse_grid_text(const std::string &text);

// model,scenario,speed,param,wmae
std::string report_csv(std::span<const TableRow> rows);
std::vector<TableRow> parse_report_csv(const std::string &text);
// model,scenario,speed,horizon,path_loss_mae_db
std::string horizon_csv(std::span<const HorizonRow> rows);
std::vector<HorizonRow> parse_horizon_csv(const std::string &text);
// param,model,error,fraction
std::string cdf_csv(std::span<const CdfRow> rows);
std::vector<CdfRow> parse_cdf_csv(const std::string &text);
// t_ms,truth_db,pred_db,model
std::string overlay_csv(std::span<const OverlayRow> rows);
std::vector<OverlayRow> parse_overlay_csv(const std::string &text);
// step,loss
std::string loss_curve_csv(std::span<const double> losses);
std::vector<double> parse_loss_curve_csv(const std::string &text);

} // namespace ddcp::io
