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

#include "ddcp/pipeline.hpp"
#include "ddcp/errors.hpp"
#include "ddcp/io.hpp"
#include "ddcp/predictor/checkpoint.hpp"
#include "ddcp/svg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

namespace ddcp::pipeline {

namespace fs = std::filesystem;

std::string_view stage_name(Stage s)
{
    switch (s) {
    case Stage::Generate: return "generate";
    case Stage::Extract: return "extract";
    case Stage::Pretrain: return "pretrain";
    case Stage::Train: return "train";
    case Stage::Eval: return "eval";
    case Stage::Report: return "report";
    }
    return "unknown";
}

Stage parse_stage(std::string_view name)
{
    for (Stage s : {Stage::Generate, Stage::Extract, Stage::Pretrain, Stage::Train, Stage::Eval, Stage::Report})
        if (stage_name(s) == name)
            return s;
    throw ConfigError("unknown stage '" + std::string(name) + "'");
}

const std::vector<std::string> &report_models()
{
    static const std::vector<std::string> models{kFinetuned, kZeroShot, kLstm, kGru, kPersistence};
    return models;
}

// ----------------------------------------------------------------------------------------------------------------

void Manifest::validate() const
{
    if (scenarios.empty())
        throw ConfigError("manifest: no scenarios");
    if (context < 1 || horizon < 1 || train_stride < 1 || eval_stride < 1)
        throw ConfigError("manifest: context, horizon and strides must be >= 1");
    for (int h : horizons)
        if (h < 1 || h > horizon)
            throw ConfigError("manifest: every evaluation horizon must lie in 1..horizon");
    for (std::size_t i = 1; i < stages.size(); ++i)
        if (int(stages[i]) <= int(stages[i - 1]))
            throw ConfigError("manifest: stages must be listed once each, in pipeline order");
    if (cdf_points < 2 || steps_per_epoch < 1)
        throw ConfigError("manifest: cdf_points must be >= 2 and steps_per_epoch >= 1");
    try {
        transformer.validate();
        recurrent.validate();
        corpus.validate();
        pretrain.validate();
        finetune.validate();
        baseline.validate();
        if (context % transformer.segment_length || horizon % transformer.segment_length)
            throw ConfigError("context and horizon must be multiples of transformer.segment_length");
        if ((context + horizon) / transformer.segment_length > transformer.max_tokens)
            throw ConfigError("context plus horizon exceeds transformer.max_tokens");
    } catch (const ConfigError &) {
        throw;
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

void Manifest::apply_epochs(int epochs)
{
    if (epochs < 1)
        throw ConfigError("epochs must be >= 1");
    finetune.max_steps = epochs * steps_per_epoch;
    baseline.max_steps = epochs * steps_per_epoch;
}

namespace {

nn::Loss parse_loss(const std::string &s)
{
    if (s == "mse")
        return nn::Loss::MSE;
    if (s == "mae")
        return nn::Loss::MAE;
    throw ConfigError("loss must be mse or mae, got '" + s + "'");
}

nn::TrainConfig read_train(const KeyValues &kv, const std::string &sec, nn::TrainConfig c)
{
    c.learning_rate = kv.get_double(sec + ".lr", c.learning_rate);
    c.batch_size = int(kv.get_int(sec + ".batch", c.batch_size));
    c.max_steps = int(kv.get_int(sec + ".steps", c.max_steps));
    if (kv.has(sec + ".loss"))
        c.loss = parse_loss(kv.get_string(sec + ".loss"));
    c.seed = std::uint64_t(kv.get_int(sec + ".seed", (long long)c.seed));
    c.clip_norm = kv.get_double(sec + ".clip", c.clip_norm);
    c.weight_decay = kv.get_double(sec + ".weight_decay", c.weight_decay);
    c.cosine_decay = kv.get_bool(sec + ".cosine", c.cosine_decay);
    c.final_lr_fraction = kv.get_double(sec + ".final_lr_fraction", c.final_lr_fraction);
    return c;
}

} // namespace

Manifest manifest_from(const KeyValues &kv, const fs::path &source)
{
    Manifest m;
    m.source = source;
    const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
    auto key = [&](const std::string &k) { return "experiment." + k; };

    for (const auto &s : kv.get_list(key("scenarios"))) {
        fs::path p(s);
        m.scenarios.push_back(p.is_absolute() ? p : base / p);
    }
    if (kv.has(key("stages"))) {
        m.stages.clear();
        for (const auto &s : kv.get_list(key("stages")))
            m.stages.push_back(parse_stage(s));
    }
    if (kv.has(key("seed")))
        m.seed = std::uint64_t(kv.get_int(key("seed")));
    if (kv.has(key("duration")))
        m.duration = kv.get_double(key("duration"));
    m.context = int(kv.get_int(key("context"), m.context));
    m.horizon = int(kv.get_int(key("horizon"), m.horizon));
    if (kv.has(key("horizons"))) {
        m.horizons.clear();
        for (const auto &h : kv.get_list(key("horizons")))
            m.horizons.push_back(std::atoi(h.c_str()));
    }
    m.train_stride = int(kv.get_int(key("train_stride"), m.train_stride));
    m.eval_stride = int(kv.get_int(key("eval_stride"), m.eval_stride));
    m.overlay_ms = kv.get_double(key("overlay_ms"), m.overlay_ms);
    m.cdf_points = int(kv.get_int(key("cdf_points"), m.cdf_points));
    m.steps_per_epoch = int(kv.get_int(key("steps_per_epoch"), m.steps_per_epoch));

    auto &t = m.transformer;
    t.segment_length = int(kv.get_int("transformer.segment_length", t.segment_length));
    t.d_model = int(kv.get_int("transformer.d_model", t.d_model));
    t.layers = int(kv.get_int("transformer.layers", t.layers));
    t.heads = int(kv.get_int("transformer.heads", t.heads));
    t.ff_dim = int(kv.get_int("transformer.ff_dim", t.ff_dim));
    t.max_tokens = int(kv.get_int("transformer.max_tokens", t.max_tokens));
    t.time_embedding = kv.get_bool("transformer.time_embedding", t.time_embedding);

    m.recurrent.hidden = int(kv.get_int("recurrent.hidden", m.recurrent.hidden));
    m.recurrent.forget_bias = kv.get_double("recurrent.forget_bias", m.recurrent.forget_bias);
    m.recurrent.horizon = m.horizon;

    auto &c = m.corpus;
    m.corpus_seed = std::uint64_t(kv.get_int("corpus.seed", (long long)m.corpus_seed));
    c.series_per_family = int(kv.get_int("corpus.series_per_family", c.series_per_family));
    c.length = int(kv.get_int("corpus.length", c.length));
    c.noise = kv.get_double("corpus.noise", c.noise);
    c.amp_min = kv.get_double("corpus.amp_min", c.amp_min);
    c.amp_max = kv.get_double("corpus.amp_max", c.amp_max);
    c.period_min = kv.get_double("corpus.period_min", c.period_min);
    c.period_max = kv.get_double("corpus.period_max", c.period_max);
    c.pole_max = kv.get_double("corpus.pole_max", c.pole_max);
    c.ar_noise = kv.get_double("corpus.ar_noise", c.ar_noise);
    c.slope_max = kv.get_double("corpus.slope_max", c.slope_max);
    c.curvature_max = kv.get_double("corpus.curvature_max", c.curvature_max);
    c.seg_min = int(kv.get_int("corpus.seg_min", c.seg_min));
    c.seg_max = int(kv.get_int("corpus.seg_max", c.seg_max));
    if (kv.has("corpus.families")) {
        c.families.clear();
        for (const auto &f : kv.get_list("corpus.families")) {
            try {
                c.families.push_back(nn::parse_family(f));
            } catch (const std::invalid_argument &e) {
                throw ConfigError(source.string() + ": " + e.what());
            }
        }
    }

    nn::TrainConfig pre;
    pre.learning_rate = 1e-3;
    pre.loss = nn::Loss::MSE;
    pre.max_steps = 1500;
    pre.seed = 11;
    m.pretrain = read_train(kv, "pretrain", pre);
    nn::TrainConfig fine;
    fine.learning_rate = 1e-5;
    fine.loss = nn::Loss::MAE;
    fine.max_steps = 400;
    fine.seed = 23;
    m.finetune = read_train(kv, "finetune", fine);
    nn::TrainConfig basel;
    basel.learning_rate = 1e-3;
    basel.loss = nn::Loss::MAE;
    basel.max_steps = 400;
    basel.seed = 37;
    m.baseline = read_train(kv, "baseline", basel);
    if (kv.has(key("epochs")))
        m.apply_epochs(int(kv.get_int(key("epochs"))));

    if (kv.has(key("out"))) {
        m.out = kv.get_string(key("out"));
    } else {
        const char *root = std::getenv("DDCP_OUT_ROOT");
        m.out = fs::path(root && *root ? root : "out") / source.stem();
    }
    kv.reject_unused();
    m.validate();
    return m;
}

Manifest load_manifest(const fs::path &path)
{
    return manifest_from(KeyValues::load(path), path);
}

std::vector<Cell> cells(const Manifest &m)
{
    std::vector<Cell> out;
    for (std::size_t i = 0; i < m.scenarios.size(); ++i) {
        Cell c;
        c.name = m.scenarios[i].stem().string();
        c.config = load_scenario(m.scenarios[i]);
        if (m.seed)
            c.config.seed = *m.seed + i;
        if (m.duration)
            c.config.duration = *m.duration;
        c.config.validate();
        c.scenario = std::string(los_mode_name(c.config.los_mode));
        c.speed = int(std::lround(c.config.speed_kmh));
        for (const auto &o : out)
            if (o.name == c.name)
                throw ConfigError("manifest: duplicate cell name '" + c.name + "'");
        out.push_back(std::move(c));
    }
    return out;
}

fs::path cell_dir(const Manifest &m, const Cell &c) { return m.out / c.name; }

fs::path checkpoint_path(const Manifest &m, const Cell &c, const std::string &model, ParamType p)
{
    return cell_dir(m, c) / "models" / (model + "_" + std::string(param_name(p)) + ".ckpt");
}

fs::path pretrain_checkpoint_path(const Manifest &m) { return m.out / "pretrain" / "transformer.ckpt"; }

// ----------------------------------------------------------------------------------------------------------------

namespace {

void say(const Options &opt, const std::string &msg)
{
    if (opt.log)
        *opt.log << msg << std::endl;
}

std::string lane_file(int lane) { return "lane" + std::to_string(lane) + ".csv"; }

} // namespace

void generate(const ScenarioConfig &config, const fs::path &out_dir)
{
    config.validate();
    const auto traces = generate_scenario(config);
    io::write_text(out_dir / "scenario.toml", scenario_to_text(config));
    std::string index = "lane,split,file\n";
    for (const auto &t : traces) {
        io::write_text(out_dir / lane_file(t.lane), io::trace_csv(t));
        index += std::to_string(t.lane) + ',' + (is_training_lane(config, t.lane) ? "train" : "test") + ',' +
                 lane_file(t.lane) + '\n';
    }
    io::write_text(out_dir / "index.csv", index);
}

std::vector<ChannelTrace> load_traces(const fs::path &dir)
{
    const ScenarioConfig config =
        scenario_from(KeyValues::parse(io::read_text(dir / "scenario.toml", "trace scenario"),
                                       (dir / "scenario.toml").string()));
    std::istringstream index(io::read_text(dir / "index.csv", "trace index"));
    std::string line;
    std::getline(index, line);
    if (line != "lane,split,file")
        throw IoError("trace index: bad header in " + (dir / "index.csv").string());
    std::vector<ChannelTrace> out;
    while (std::getline(index, line)) {
        if (line.empty())
            continue;
        const auto f = io::split_csv(line);
        if (f.size() != 3)
            throw IoError("trace index: malformed line '" + line + "'");
        const int lane = std::atoi(f[0].c_str());
        out.push_back(io::parse_trace_csv(io::read_text(dir / f[2], "trace"), config, lane));
    }
    return out;
}

void extract(const fs::path &trace_dir, const fs::path &out_dir, int context, int horizon, int train_stride,
             int eval_stride)
{
    const auto traces = load_traces(trace_dir);
    if (traces.empty())
        throw IoError("extract: no traces in " + trace_dir.string());
    std::vector<DDSeries> train, test;
    for (const auto &t : traces) {
        DDSeries s = extract_series(t, "lane" + std::to_string(t.lane));
        (is_training_lane(t.config, t.lane) ? train : test).push_back(std::move(s));
    }
    if (train.empty() || test.empty())
        throw ConfigError("extract: need at least one training and one test lane");
    const NormStats stats = compute_norm_stats(train);
    std::vector<DDSeries> train_n, test_n;
    for (const auto &s : train)
        train_n.push_back(apply_normalization(s, stats));
    for (const auto &s : test)
        test_n.push_back(apply_normalization(s, stats));
    const std::vector<WindowedDataset> windows{window(train_n, context, horizon, train_stride, Split::Train),
                                               window(test_n, context, horizon, eval_stride, Split::Test)};

    io::write_text(out_dir / "series_train.csv", io::series_csv(train));
    io::write_text(out_dir / "series_test.csv", io::series_csv(test));
    io::write_text(out_dir / "norm_stats.csv", io::norm_stats_csv(stats));
    io::write_text(out_dir / "windows.csv", io::window_index_csv(windows));
    std::ostringstream meta;
    meta << "dt = " << io::fmt(traces.front().snapshot_interval()) << "\n"
         << "context = " << context << "\nhorizon = " << horizon << "\ntrain_stride = " << train_stride
         << "\neval_stride = " << eval_stride << "\n";
    io::write_text(out_dir / "meta.txt", meta.str());
}

Dataset load_dataset(const fs::path &dir)
{
    const KeyValues meta = KeyValues::parse(io::read_text(dir / "meta.txt", "dataset meta"), (dir / "meta.txt").string());
    Dataset d;
    d.dt = meta.get_double("dt");
    d.train = io::parse_series_csv(io::read_text(dir / "series_train.csv", "training series"), d.dt);
    d.test = io::parse_series_csv(io::read_text(dir / "series_test.csv", "test series"), d.dt);
    d.stats = io::parse_norm_stats_csv(io::read_text(dir / "norm_stats.csv", "normalization statistics"));
    return d;
}

// ----------------------------------------------------------------------------------------------------------------

namespace {

std::string elapsed(std::chrono::steady_clock::time_point t0)
{
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1fs", s);
    return buf;
}

bool selected(const Options &opt, const std::string &model)
{
    return !opt.model || model.rfind(*opt.model, 0) == 0;
}

void check_transformer(const nn::Forecaster &f, const Manifest &m, const fs::path &path)
{
    if (f.kind != nn::ModelKind::Transformer || !(f.transformer.config == m.transformer) || f.context != m.context ||
        f.horizon != m.horizon)
        throw ConfigError("checkpoint/config mismatch: " + path.string() +
                          " does not match the manifest's transformer settings");
}

void check_recurrent(const nn::Forecaster &f, const Manifest &m, nn::ModelKind kind, const fs::path &path)
{
    if (f.kind != kind || f.recurrent.config.hidden != m.recurrent.hidden || f.context != m.context ||
        f.horizon != m.horizon)
        throw ConfigError("checkpoint/config mismatch: " + path.string() +
                          " does not match the manifest's recurrent settings");
}

std::vector<DDSeries> normalized(const std::vector<DDSeries> &s, const NormStats &st)
{
    std::vector<DDSeries> out;
    for (const auto &x : s)
        out.push_back(apply_normalization(x, st));
    return out;
}

} // namespace

void pretrain(const Manifest &m, const Options &opt)
{
    const auto t0 = std::chrono::steady_clock::now();
    auto corpus = nn::pretrain_corpus(m.corpus_seed, m.corpus);
    const WindowedDataset data = nn::window_series(std::move(corpus), m.context, m.horizon, 1);
    nn::Forecaster f = nn::Forecaster::make_transformer(m.transformer, m.context, m.horizon, m.pretrain.seed);
    const auto res = nn::train(f, data, m.pretrain);
    nn::save_checkpoint(f, pretrain_checkpoint_path(m));
    io::write_text(m.out / "pretrain" / "loss.csv", io::loss_curve_csv(res.loss_curve));
    say(opt, "pretrain: " + std::to_string(data.size()) + " windows, final loss " +
                 io::fmt(res.loss_curve.empty() ? 0.0 : res.loss_curve.back()) + " (" + elapsed(t0) + ")");
}

void train(const Manifest &m, const Cell &cell, const Options &opt)
{
    const fs::path dir = cell_dir(m, cell);
    const Dataset ds = load_dataset(dir / "dataset");
    const WindowedDataset all =
        window(normalized(ds.train, ds.stats), m.context, m.horizon, m.train_stride, Split::Train);
    const fs::path pre_path = pretrain_checkpoint_path(m);

    for (ParamType p : kParamTypes) {
        const WindowedDataset data = all.filter(p);
        const std::uint64_t salt = 1000 * std::uint64_t(param_index(p)) + std::hash<std::string>{}(cell.name) % 997;
        auto save = [&](const std::string &name, const nn::Forecaster &f, const nn::TrainResult &r) {
            nn::save_checkpoint(f, checkpoint_path(m, cell, name, p));
            io::write_text(dir / "models" / (name + "_" + std::string(param_name(p)) + "_loss.csv"),
                           io::loss_curve_csv(r.loss_curve));
        };
        if (selected(opt, kFinetuned)) {
            const auto t0 = std::chrono::steady_clock::now();
            nn::Forecaster f = nn::load_checkpoint(pre_path);
            check_transformer(f, m, pre_path);
            nn::TrainConfig tc = m.finetune;
            tc.seed += salt;
            save(kFinetuned, f, nn::train(f, data, tc));
            say(opt, cell.name + " " + std::string(param_name(p)) + ": fine-tuned transformer (" + elapsed(t0) + ")");
        }
        for (const auto &[name, kind] : {std::pair{std::string(kLstm), nn::CellKind::LSTM},
                                         std::pair{std::string(kGru), nn::CellKind::GRU}}) {
            if (!selected(opt, name))
                continue;
            const auto t0 = std::chrono::steady_clock::now();
            nn::RecurrentConfig rc = m.recurrent;
            rc.cell = kind;
            nn::TrainConfig tc = m.baseline;
            tc.seed += salt;
            nn::Forecaster f = nn::Forecaster::make_recurrent(rc, m.context, m.horizon, tc.seed);
            save(name, f, nn::train(f, data, tc));
            say(opt, cell.name + " " + std::string(param_name(p)) + ": " + name + " (" + elapsed(t0) + ")");
        }
    }
}

namespace {

nn::Forecaster load_model(const Manifest &m, const Cell &cell, const std::string &name, ParamType p)
{
    if (name == kPersistence)
        return nn::Forecaster::persistence(m.context, m.horizon);
    if (name == kZeroShot) {
        const fs::path path = pretrain_checkpoint_path(m);
        nn::Forecaster f = nn::load_checkpoint(path);
        check_transformer(f, m, path);
        return f;
    }
    const fs::path path = checkpoint_path(m, cell, name, p);
    nn::Forecaster f = nn::load_checkpoint(path);
    if (name == kFinetuned)
        check_transformer(f, m, path);
    else
        check_recurrent(f, m, name == kLstm ? nn::ModelKind::LSTM : nn::ModelKind::GRU, path);
    return f;
}

/// Forecasts of one model for one parameter type over the test windows, in native units.
struct ParamForecast {
    WindowedDataset native; // test windows over native series
    Eigen::MatrixXd pred;   // windows x horizon
    Eigen::MatrixXd truth;
};

/// Windows of one (trace, path) series in start order.
std::map<std::pair<std::string, int>, std::vector<std::size_t>> windows_by_series(const WindowedDataset &ds)
{
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        const auto &s = ds.series[ds.windows[i].series];
        out[{s.trace_id, s.path_id}].push_back(i);
    }
    return out;
}

} // namespace

EvalReport evaluate(const Manifest &m, const Cell &cell, const Options &opt)
{
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cell_dir(m, cell);
    const Dataset ds = load_dataset(dir / "dataset");
    const WindowedDataset nat_all = window(ds.test, m.context, m.horizon, m.eval_stride, Split::Test);
    const WindowedDataset norm_all =
        window(normalized(ds.test, ds.stats), m.context, m.horizon, m.eval_stride, Split::Test);

    // Path weights: mean linear power of the target steps of every evaluation window.
    std::map<std::pair<std::string, int>, double> weight;
    {
        const WindowedDataset inten = nat_all.filter(ParamType::Intensity);
        for (const auto &[key, idx] : windows_by_series(inten)) {
            double acc = 0.0;
            for (std::size_t i : idx)
                acc += path_power_weights(inten.target_of(inten.windows[i]).transpose())(0);
            weight[key] = acc / double(idx.size());
        }
    }

    EvalReport rep;
    for (const auto &name : report_models()) {
        if (!selected(opt, name))
            continue;
        std::map<ParamType, ParamForecast> fc;
        for (ParamType p : kParamTypes) {
            const nn::Forecaster model = load_model(m, cell, name, p);
            ParamForecast f;
            f.native = nat_all.filter(p);
            const WindowedDataset norm = norm_all.filter(p);
            const auto W = Eigen::Index(norm.size());
            Eigen::MatrixXd ctx(W, m.context);
            f.truth.resize(W, m.horizon);
            for (Eigen::Index i = 0; i < W; ++i) {
                ctx.row(i) = norm.context_of(norm.windows[std::size_t(i)]).transpose();
                f.truth.row(i) = f.native.target_of(f.native.windows[std::size_t(i)]).transpose();
            }
            f.pred = nn::predict_batch(model, ctx, m.horizon)
                         .unaryExpr([&](double z) { return ds.stats.invert(p, z); });

            // Weighted MAE: one row per (trace, path), windows concatenated along the columns.
            const auto groups = windows_by_series(f.native);
            const std::size_t per = groups.begin()->second.size();
            Eigen::MatrixXd P(Eigen::Index(groups.size()), Eigen::Index(per) * m.horizon);
            Eigen::MatrixXd T(P.rows(), P.cols());
            Eigen::VectorXd w(P.rows());
            Eigen::Index row = 0;
            for (const auto &[key, idx] : groups) {
                if (idx.size() != per)
                    throw NumericalError("evaluate: series with unequal window counts");
                for (std::size_t k = 0; k < idx.size(); ++k) {
                    P.row(row).segment(Eigen::Index(k) * m.horizon, m.horizon) = f.pred.row(Eigen::Index(idx[k]));
                    T.row(row).segment(Eigen::Index(k) * m.horizon, m.horizon) = f.truth.row(Eigen::Index(idx[k]));
                }
                w(row++) = weight.at(key);
            }
            rep.table.push_back({name, cell.scenario, cell.speed, p, weighted_mae(P, T, w)});

            const Eigen::MatrixXd err = (f.pred - f.truth).cwiseAbs();
            const std::vector<double> errs(err.data(), err.data() + err.size());
            for (const auto &pt : subsample_cdf(error_cdf(errs), std::size_t(m.cdf_points)))
                rep.cdf.push_back({p, name, pt.value, pt.fraction});
            fc.emplace(p, std::move(f));
        }

        // Path loss from the intensity forecasts of all paths of each test trace.
        const ParamForecast &fi = fc.at(ParamType::Intensity);
        const auto groups = windows_by_series(fi.native);
        for (int h : m.horizons) {
            std::vector<Eigen::VectorXd> pcols, tcols;
            for (const auto &trace : ds.test) {
                std::vector<const std::vector<std::size_t> *> rows;
                for (int pid : trace.path_ids)
                    rows.push_back(&groups.at({trace.trace_id, pid}));
                const std::size_t nw = rows.front()->size();
                for (std::size_t k = 0; k < nw; ++k)
                    for (int s = 0; s < h; ++s) {
                        Eigen::VectorXd pc(Eigen::Index(rows.size())), tc(Eigen::Index(rows.size()));
                        for (std::size_t r = 0; r < rows.size(); ++r) {
                            pc(Eigen::Index(r)) = fi.pred(Eigen::Index((*rows[r])[k]), s);
                            tc(Eigen::Index(r)) = fi.truth(Eigen::Index((*rows[r])[k]), s);
                        }
                        pcols.push_back(std::move(pc));
                        tcols.push_back(std::move(tc));
                    }
            }
            Eigen::MatrixXd P(pcols.front().size(), Eigen::Index(pcols.size()));
            Eigen::MatrixXd T(P.rows(), P.cols());
            for (std::size_t c = 0; c < pcols.size(); ++c) {
                P.col(Eigen::Index(c)) = pcols[c];
                T.col(Eigen::Index(c)) = tcols[c];
            }
            rep.horizons.push_back({name, cell.scenario, cell.speed, h, path_loss_eval(P, T).mae_db});
        }

        // Overlay of the first test trace at the full horizon.
        const DDSeries &first = ds.test.front();
        std::vector<const std::vector<std::size_t> *> rows;
        for (int pid : first.path_ids)
            rows.push_back(&groups.at({first.trace_id, pid}));
        const auto &starts = fi.native;
        for (std::size_t k = 0; k < rows.front()->size(); ++k) {
            const std::size_t w0 = (*rows.front())[k];
            const Eigen::Index start = starts.windows[w0].start;
            Eigen::MatrixXd P(Eigen::Index(rows.size()), m.horizon), T(P.rows(), m.horizon);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                P.row(Eigen::Index(r)) = fi.pred.row(Eigen::Index((*rows[r])[k]));
                T.row(Eigen::Index(r)) = fi.truth.row(Eigen::Index((*rows[r])[k]));
            }
            const PathLossResult pl = path_loss_eval(P, T);
            bool done = false;
            for (int s = 0; s < m.horizon; ++s) {
                // Series step j is snapshot j+1 of the trace.
                const double t_ms = double(start + m.context + s + 1) * ds.dt * 1e3;
                if (t_ms > m.overlay_ms) {
                    done = true;
                    break;
                }
                rep.overlay.push_back({t_ms, pl.truth_db(s), pl.pred_db(s), name});
            }
            if (done)
                break;
        }
        say(opt, cell.name + ": evaluated " + name);
    }

    const fs::path ed = dir / "eval";
    io::write_text(ed / "table.csv", io::report_csv(rep.table));
    io::write_text(ed / "horizons.csv", io::horizon_csv(rep.horizons));
    io::write_text(ed / "cdf.csv", io::cdf_csv(rep.cdf));
    io::write_text(ed / "overlay.csv", io::overlay_csv(rep.overlay));
    say(opt, cell.name + ": eval done (" + elapsed(t0) + ")");
    return rep;
}

// ----------------------------------------------------------------------------------------------------------------

namespace {

svg::Series loss_series(const std::string &name, const std::vector<double> &loss)
{
    // Running mean over 20 steps keeps minibatch noise readable.
    svg::Series s;
    s.name = name;
    double acc = 0.0;
    for (std::size_t i = 0; i < loss.size(); ++i) {
        acc += loss[i];
        if (i >= 20)
            acc -= loss[i - 20];
        s.x.push_back(double(i));
        s.y.push_back(acc / double(std::min<std::size_t>(i + 1, 20)));
    }
    return s;
}

} // namespace

void report(const Manifest &m, const Options &opt)
{
    const fs::path rd = m.out / "report";
    EvalReport all;
    std::vector<std::string> groups;
    std::vector<std::vector<double>> bars;
    std::vector<std::string> bar_labels;
    for (int h : m.horizons)
        for (const auto &model : report_models())
            bar_labels.push_back(model + " h=" + std::to_string(h));

    std::string wide = "model,scenario,speed";
    for (int h : m.horizons)
        wide += ",mae_h" + std::to_string(h);
    wide += '\n';

    for (const Cell &cell : cells(m)) {
        const fs::path ed = cell_dir(m, cell) / "eval";
        EvalReport r;
        r.table = io::parse_report_csv(io::read_text(ed / "table.csv", "evaluation table"));
        r.horizons = io::parse_horizon_csv(io::read_text(ed / "horizons.csv", "horizon table"));
        const std::string cdf = io::read_text(ed / "cdf.csv", "error cdf");
        const std::string overlay = io::read_text(ed / "overlay.csv", "path-loss overlay");
        io::write_text(rd / (cell.name + "_cdf.csv"), cdf);
        io::write_text(rd / (cell.name + "_overlay.csv"), overlay);
        r.cdf = io::parse_cdf_csv(cdf);
        r.overlay = io::parse_overlay_csv(overlay);

        for (ParamType p : kParamTypes) {
            std::vector<svg::Series> s;
            for (const auto &model : report_models()) {
                svg::Series line;
                line.name = model;
                for (const auto &row : r.cdf)
                    if (row.param == p && row.model == model) {
                        line.x.push_back(row.error);
                        line.y.push_back(row.fraction);
                    }
                if (!line.x.empty())
                    s.push_back(std::move(line));
            }
            io::write_text(rd / (cell.name + "_cdf_" + std::string(param_name(p)) + ".svg"),
                           svg::line_chart({cell.name + " error CDF: " + std::string(param_name(p)),
                                            "absolute error (" + std::string(param_unit(p)) + ")", "CDF", false},
                                           s));
        }
        {
            std::map<std::string, svg::Series> lines;
            for (const auto &row : r.overlay) {
                auto &l = lines[row.model];
                l.name = row.model;
                l.x.push_back(row.t_ms);
                l.y.push_back(row.pred_db);
            }
            std::vector<svg::Series> s;
            svg::Series truth;
            truth.name = "truth";
            for (const auto &row : r.overlay)
                if (row.model == report_models().front()) {
                    truth.x.push_back(row.t_ms);
                    truth.y.push_back(row.truth_db);
                }
            s.push_back(truth);
            for (const auto &model : report_models())
                if (lines.count(model))
                    s.push_back(lines[model]);
            io::write_text(rd / (cell.name + "_overlay.svg"),
                           svg::line_chart({cell.name + " path loss", "time (ms)", "path loss (dB)", false}, s));
        }
        {
            std::vector<svg::Series> s;
            for (const auto &model : {std::string(kFinetuned), std::string(kLstm), std::string(kGru)})
                for (ParamType p : kParamTypes) {
                    const fs::path f =
                        cell_dir(m, cell) / "models" / (model + "_" + std::string(param_name(p)) + "_loss.csv");
                    if (fs::exists(f))
                        s.push_back(loss_series(model + " " + std::string(param_name(p)),
                                                io::parse_loss_curve_csv(io::read_text(f, "loss curve"))));
                }
            io::write_text(rd / (cell.name + "_loss.svg"),
                           svg::line_chart({cell.name + " training loss", "step", "loss", true}, s));
        }

        groups.push_back(cell.name);
        std::vector<double> b;
        for (int h : m.horizons)
            for (const auto &model : report_models()) {
                const HorizonRow *row = r.find_horizon(model, cell.scenario, cell.speed, h);
                b.push_back(row ? row->path_loss_mae_db : std::nan(""));
            }
        bars.push_back(std::move(b));
        for (const auto &model : report_models()) {
            wide += model + ',' + cell.scenario + ',' + std::to_string(cell.speed);
            for (int h : m.horizons) {
                const HorizonRow *row = r.find_horizon(model, cell.scenario, cell.speed, h);
                wide += ',' + (row ? io::fmt(row->path_loss_mae_db) : std::string("nan"));
            }
            wide += '\n';
        }
        all.merge(r);
    }

    io::write_text(rd / "table.csv", io::report_csv(all.table));
    io::write_text(rd / "horizons.csv", io::horizon_csv(all.horizons));
    io::write_text(rd / "horizon_table.csv", wide);
    io::write_text(rd / "horizons.svg",
                   svg::bar_chart({"path-loss MAE by horizon", "scenario", "MAE (dB)", false}, groups, bar_labels,
                                  bars));
    const fs::path pl = m.out / "pretrain" / "loss.csv";
    if (fs::exists(pl))
        io::write_text(rd / "pretrain_loss.svg",
                       svg::line_chart({"pre-training loss", "step", "loss", true},
                                       {loss_series("transformer", io::parse_loss_curve_csv(io::read_text(pl, "loss curve")))}));
    say(opt, "report written to " + rd.string());
}

void run(const Manifest &m, const std::vector<Stage> &stages, const Options &opt)
{
    m.validate();
    const auto cs = cells(m);
    auto has = [&](Stage s) { return std::find(stages.begin(), stages.end(), s) != stages.end(); };
    if (has(Stage::Generate))
        for (const auto &c : cs) {
            const auto t0 = std::chrono::steady_clock::now();
            generate(c.config, cell_dir(m, c) / "traces");
            say(opt, c.name + ": generated traces (" + elapsed(t0) + ")");
        }
    if (has(Stage::Extract))
        for (const auto &c : cs) {
            extract(cell_dir(m, c) / "traces", cell_dir(m, c) / "dataset", m.context, m.horizon, m.train_stride,
                    m.eval_stride);
            say(opt, c.name + ": extracted dataset");
        }
    if (has(Stage::Pretrain))
        pretrain(m, opt);
    if (has(Stage::Train))
        for (const auto &c : cs)
            train(m, c, opt);
    if (has(Stage::Eval))
        for (const auto &c : cs)
            evaluate(m, c, opt);
    if (has(Stage::Report))
        report(m, opt);
}

} // namespace ddcp::pipeline
