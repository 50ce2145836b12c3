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

// Experiment stages and the manifest that drives them.
//
// Output layout below the manifest's output directory:
//
//   <cell>/traces/    scenario.toml, index.csv, lane<k>.csv
//   <cell>/dataset/   series_train.csv, series_test.csv, norm_stats.csv, windows.csv, meta.txt
//   pretrain/         transformer.ckpt, loss.csv
//   <cell>/models/    <model>_<param>.ckpt, <model>_<param>_loss.csv
//   <cell>/eval/      table.csv, horizons.csv, cdf.csv, overlay.csv
//   report/           table.csv, horizons.csv, horizon_table.csv, <cell>_cdf.csv, <cell>_overlay.csv, *.svg
//
// A cell is one scenario file; its name is the file stem.

#pragma once

#include "ddcp/channel_sim.hpp"
#include "ddcp/config.hpp"
#include "ddcp/dd_extract.hpp"
#include "ddcp/eval.hpp"
#include "ddcp/predictor/corpus.hpp"
#include "ddcp/predictor/forecaster.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ddcp::pipeline {

enum class Stage { Generate, Extract, Pretrain, Train, Eval, Report };

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);

inline constexpr const char *kFinetuned = "transformer-finetuned";
inline constexpr const char *kZeroShot = "transformer-zeroshot-emulated";
inline constexpr const char *kLstm = "lstm";
inline constexpr const char *kGru = "gru";
inline constexpr const char *kPersistence = "persistence";

/// Report model rows in output order.
const std::vector<std::string> &report_models();

struct Manifest {
    std::filesystem::path source;
    std::filesystem::path out;
    std::vector<std::filesystem::path> scenarios;
    std::vector<Stage> stages{Stage::Generate, Stage::Extract, Stage::Pretrain,
                              Stage::Train,    Stage::Eval,    Stage::Report};
    std::optional<std::uint64_t> seed;  // overrides every scenario seed (cell i gets seed + i)
    std::optional<double> duration;     // overrides every scenario duration
    int context = 20;
    int horizon = 10;
    std::vector<int> horizons{5, 10};
    int train_stride = 1;
    int eval_stride = 10;
    double overlay_ms = 500.0;
    int cdf_points = 200;
    int steps_per_epoch = 100;

    nn::TransformerConfig transformer;
    nn::RecurrentConfig recurrent;
    nn::CorpusConfig corpus;
    std::uint64_t corpus_seed = 7;
    nn::TrainConfig pretrain;
    nn::TrainConfig finetune;
    nn::TrainConfig baseline;

    void validate() const;
    /// Sets the step budget of the fine-tune and baseline stages to epochs * steps_per_epoch.
    void apply_epochs(int epochs);
};

/// Relative scenario paths resolve against the manifest's directory. The output directory comes from the
/// "out" key, else $DDCP_OUT_ROOT/<manifest stem>, else ./out/<manifest stem>.
Manifest load_manifest(const std::filesystem::path &path);
Manifest manifest_from(const KeyValues &kv, const std::filesystem::path &source);

struct Cell {
    std::string name;
    std::string scenario; // "LOS" / "NLOS"
    int speed = 60;
    ScenarioConfig config;
};

std::vector<Cell> cells(const Manifest &m);

// ----------------------------------------------------------------------------------------------------------------

struct Dataset {
    std::vector<DDSeries> train, test; // native units
    NormStats stats;                   // training split only
    double dt = 5e-4;
};

void generate(const ScenarioConfig &config, const std::filesystem::path &out_dir);
std::vector<ChannelTrace> load_traces(const std::filesystem::path &trace_dir);

void extract(const std::filesystem::path &trace_dir, const std::filesystem::path &out_dir, int context,
             int horizon, int train_stride, int eval_stride);
Dataset load_dataset(const std::filesystem::path &dataset_dir);

struct Options {
    std::ostream *log = nullptr;
    std::optional<std::string> model; // restricts train / eval to one model name
};

void pretrain(const Manifest &m, const Options &opt = {});
void train(const Manifest &m, const Cell &cell, const Options &opt = {});
EvalReport evaluate(const Manifest &m, const Cell &cell, const Options &opt = {});
void report(const Manifest &m, const Options &opt = {});

/// Runs the manifest's stages in pipeline order over every cell.
void run(const Manifest &m, const std::vector<Stage> &stages, const Options &opt = {});

std::filesystem::path cell_dir(const Manifest &m, const Cell &c);
std::filesystem::path checkpoint_path(const Manifest &m, const Cell &c, const std::string &model, ParamType p);
std::filesystem::path pretrain_checkpoint_path(const Manifest &m);

} // namespace ddcp::pipeline
