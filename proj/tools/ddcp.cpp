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


// Command-line front end for the experiment pipeline.
//
// Exit codes: 0 success, 1 usage, 2 invalid configuration, 3 I/O failure, 4 numerical failure,
// 5 missing artifact.

#include "ddcp/errors.hpp"
#include "ddcp/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

using namespace ddcp;
namespace pl = ddcp::pipeline;

struct Args {
    std::string scenario, manifest, in, out, model, horizons;
    std::optional<long long> seed;
    std::optional<int> epochs;
    bool quiet = false;
};

std::vector<int> parse_horizons(const std::string &s)
{
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        char *end = nullptr;
        const long v = std::strtol(tok.c_str(), &end, 10);
        if (tok.empty() || *end != '\0')
            throw ConfigError("--horizons: expected comma-separated integers, got '" + s + "'");
        out.push_back(int(v));
        pos = comma + 1;
    }
    return out;
}

pl::Manifest manifest(const Args &a)
{
    if (a.manifest.empty())
        throw ConfigError("--manifest is required");
    pl::Manifest m = pl::load_manifest(a.manifest);
    if (!a.out.empty())
        m.out = a.out;
    if (a.seed)
        m.seed = std::uint64_t(*a.seed);
    if (a.epochs)
        m.apply_epochs(*a.epochs);
    if (!a.horizons.empty())
        m.horizons = parse_horizons(a.horizons);
    m.validate();
    return m;
}

pl::Options options(const Args &a)
{
    pl::Options o;
    if (!a.quiet)
        o.log = &std::cerr;
    if (!a.model.empty())
        o.model = a.model;
    return o;
}

int dispatch(const std::string &cmd, const Args &a)
{
    if (cmd == "generate") {
        ScenarioConfig cfg = load_scenario(a.scenario);
        if (a.seed)
            cfg.seed = std::uint64_t(*a.seed);
        cfg.validate();
        std::filesystem::path out = a.out;
        if (out.empty()) {
            const char *root = std::getenv("DDCP_OUT_ROOT");
            out = std::filesystem::path(root && *root ? root : "out") / std::filesystem::path(a.scenario).stem();
        }
        pl::generate(cfg, out);
        return 0;
    }
    if (cmd == "extract") {
        pl::Manifest defaults;
        if (!a.manifest.empty())
            defaults = manifest(a);
        pl::extract(a.in, a.out, defaults.context, defaults.horizon, defaults.train_stride, defaults.eval_stride);
        return 0;
    }
    const pl::Manifest m = manifest(a);
    const pl::Options opt = options(a);
    if (cmd == "pretrain")
        pl::pretrain(m, opt);
    else if (cmd == "train")
        for (const auto &c : pl::cells(m))
            pl::train(m, c, opt);
    else if (cmd == "eval")
        for (const auto &c : pl::cells(m))
            pl::evaluate(m, c, opt);
    else if (cmd == "report")
        pl::report(m, opt);
    else if (cmd == "reproduce")
        pl::run(m, m.stages, opt);
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Delay-Doppler channel parameter prediction experiments"};
    app.require_subcommand(1);
    Args a;
    auto seed = [&](CLI::App *s) {
        s->add_option_function<long long>("--seed", [&](long long v) { a.seed = v; }, "override the random seed");
    };
    auto common = [&](CLI::App *s) {
        s->add_option("--manifest", a.manifest, "experiment manifest")->required();
        s->add_option("--out", a.out, "output directory (overrides the manifest)");
        s->add_flag("--quiet", a.quiet, "suppress progress output");
        seed(s);
    };

    auto *gen = app.add_subcommand("generate", "simulate channel traces for one scenario");
    gen->add_option("--scenario", a.scenario, "scenario file")->required();
    gen->add_option("--out", a.out, "trace directory");
    seed(gen);

    auto *ext = app.add_subcommand("extract", "extract delay-Doppler parameter series from traces");
    ext->add_option("--in", a.in, "trace directory")->required();
    ext->add_option("--out", a.out, "dataset directory")->required();
    ext->add_option("--manifest", a.manifest, "manifest supplying window settings");

    auto *pre = app.add_subcommand("pretrain", "pre-train the transformer on the synthetic corpus");
    common(pre);
    for (const char *name : {"train", "eval"}) {
        auto *s = app.add_subcommand(name, std::string(name) == "train" ? "train forecasters per cell"
                                                                          : "evaluate forecasters per cell");
        common(s);
        s->add_option("--model", a.model, "restrict to models whose name starts with this");
        if (std::string(name) == "train")
            s->add_option_function<int>("--epochs", [&](int v) { a.epochs = v; }, "training epochs");
        else
            s->add_option("--horizons", a.horizons, "comma-separated path-loss horizons");
    }
    auto *rep = app.add_subcommand("report", "collect tables and figures");
    common(rep);
    rep->add_option("--horizons", a.horizons, "comma-separated path-loss horizons");
    auto *repro = app.add_subcommand("reproduce", "run every manifest stage");
    common(repro);
    repro->add_option_function<int>("--epochs", [&](int v) { a.epochs = v; }, "training epochs");
    repro->add_option("--horizons", a.horizons, "comma-separated path-loss horizons");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        return dispatch(app.get_subcommands().front()->get_name(), a);
    } catch (const MissingArtifactError &e) {
        std::cerr << "error: missing " << e.artifact() << ": " << e.path() << "\n";
        return 5;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError &e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error &e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const UndefinedPhaseError &e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    }
}
