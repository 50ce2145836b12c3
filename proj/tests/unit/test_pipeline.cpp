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


// End-to-end checks through the ddcp executable.

#include "ddcp/config.hpp"
#include "ddcp/dd_extract.hpp"
#include "ddcp/errors.hpp"
#include "ddcp/io.hpp"
#include "ddcp/pipeline.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>
#include <sys/wait.h>

using namespace ddcp;
namespace fs = std::filesystem;
namespace pl = ddcp::pipeline;

namespace {

const fs::path kSource = DDCP_SOURCE_DIR;

fs::path scratch(const std::string &name)
{
    const fs::path p = fs::temp_directory_path() / ("ddcp_pipeline_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

struct Run {
    int code = -1;
    std::string err;
};

Run cli(const std::string &args, const fs::path &log)
{
    const std::string cmd = std::string("\"") + DDCP_CLI + "\" " + args + " 2> \"" + log.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = fs::exists(log) ? io::read_text(log, "log") : "";
    return r;
}

std::string slurp(const fs::path &p) { return io::read_text(p, "test file"); }

std::vector<std::string> lines(const std::string &text)
{
    std::vector<std::string> out;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
        out.push_back(l);
    return out;
}

/// Bundled LOS 60 km/h scenario shortened to 0.1 s.
fs::path short_scenario(const fs::path &dir)
{
    ScenarioConfig c = load_scenario(kSource / "scenarios" / "los_60.toml");
    c.duration = 0.1;
    io::write_text(dir / "short.toml", scenario_to_text(c));
    return dir / "short.toml";
}

} // namespace

TEST_CASE("generate writes four lanes deterministically", "[pipeline]")
{
    const fs::path dir = scratch("generate");
    const fs::path scen = short_scenario(dir);
    const fs::path log = dir / "log.txt";
    REQUIRE(cli("generate --scenario \"" + scen.string() + "\" --out \"" + (dir / "a").string() + "\"", log).code ==
            0);
    REQUIRE(cli("generate --scenario \"" + scen.string() + "\" --out \"" + (dir / "b").string() + "\"", log).code ==
            0);

    const auto traces = pl::load_traces(dir / "a");
    REQUIRE(traces.size() == 4);
    std::set<int> lanes;
    for (const auto &t : traces) {
        lanes.insert(t.lane);
        CHECK(t.snapshots.size() == 201);
        for (std::size_t k = 1; k < t.snapshots.size(); ++k)
            CHECK(t.snapshots[k].time - t.snapshots[k - 1].time == Catch::Approx(5e-4).margin(1e-12));
    }
    CHECK(lanes == std::set<int>{0, 1, 2, 3});
    for (const auto &e : fs::directory_iterator(dir / "a"))
        CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));

    // A different seed changes the traces.
    REQUIRE(cli("generate --scenario \"" + scen.string() + "\" --seed 999 --out \"" + (dir / "c").string() + "\"",
                 log)
                .code == 0);
    CHECK(slurp(dir / "a" / "lane0.csv") != slurp(dir / "c" / "lane0.csv"));
}

TEST_CASE("extract writes stats and windows", "[pipeline]")
{
    const fs::path dir = scratch("extract");
    const fs::path scen = short_scenario(dir);
    const fs::path log = dir / "log.txt";
    REQUIRE(cli("generate --scenario \"" + scen.string() + "\" --out \"" + (dir / "traces").string() + "\"", log)
                .code == 0);
    const std::string in = "--in \"" + (dir / "traces").string() + "\"";
    REQUIRE(cli("extract " + in + " --out \"" + (dir / "d1").string() + "\"", log).code == 0);
    REQUIRE(cli("extract " + in + " --out \"" + (dir / "d2").string() + "\"", log).code == 0);

    const auto stats = lines(slurp(dir / "d1" / "norm_stats.csv"));
    CHECK(stats.size() == 5); // header + one (mean, std) row per parameter type
    for (const auto &e : fs::directory_iterator(dir / "d1"))
        CHECK(slurp(e.path()) == slurp(dir / "d2" / e.path().filename()));

    const pl::Dataset ds = pl::load_dataset(dir / "d1");
    REQUIRE(ds.train.size() == 2);
    REQUIRE(ds.test.size() == 2);
    // 201 snapshots give 200 steps; defaults are context 20, horizon 10, strides 1 (train) and 10 (test).
    std::size_t train = 0, test = 0;
    for (const auto &s : ds.train) {
        CHECK(s.steps() == 200);
        train += std::size_t(s.paths()) * 4 * window_count(s.steps(), 20, 10, 1);
    }
    for (const auto &s : ds.test)
        test += std::size_t(s.paths()) * 4 * window_count(s.steps(), 20, 10, 10);
    CHECK(window_count(200, 20, 10, 1) == 171);
    CHECK(window_count(200, 20, 10, 10) == 18);
    std::size_t got_train = 0, got_test = 0;
    const auto idx = lines(slurp(dir / "d1" / "windows.csv"));
    for (std::size_t i = 1; i < idx.size(); ++i)
        (idx[i].rfind("train,", 0) == 0 ? got_train : got_test) += 1;
    CHECK(got_train == train);
    CHECK(got_test == test);

    CHECK(cli("extract --in \"" + (dir / "nowhere").string() + "\" --out \"" + (dir / "d3").string() + "\"", log)
              .code == 5);
}

TEST_CASE("smoke manifest end to end", "[pipeline]")
{
    const fs::path dir = scratch("smoke");
    const fs::path log = dir / "log.txt";
    const std::string man = "--manifest \"" + (kSource / "manifests" / "smoke.toml").string() + "\"";
    const std::string out = "--out \"" + (dir / "out").string() + "\"";
    const Run r = cli("reproduce " + man + " " + out + " --quiet --horizons 5,10", log);
    INFO(r.err);
    REQUIRE(r.code == 0);

    const fs::path rd = dir / "out" / "report";
    const auto table = io::parse_report_csv(slurp(rd / "table.csv"));
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto &row : table) {
        seen.insert({row.model, std::string(param_name(row.param))});
        CHECK(row.wmae >= 0.0);
    }
    CHECK(seen.size() == 20);
    for (const auto &m : pl::report_models())
        for (ParamType p : kParamTypes)
            CHECK(seen.count({m, std::string(param_name(p))}) == 1);
    CHECK(table.size() == 40); // two cells

    const auto wide = lines(slurp(rd / "horizon_table.csv"));
    REQUIRE(!wide.empty());
    CHECK(wide[0] == "model,scenario,speed,mae_h5,mae_h10");
    CHECK(wide.size() == 1 + 5 * 2);

    for (const char *f : {"table.csv", "horizons.csv", "horizons.svg", "pretrain_loss.svg", "los_60_cdf.csv",
                          "los_60_cdf_delay.svg", "los_60_overlay.csv", "los_60_overlay.svg", "los_60_loss.svg",
                          "nlos_120_cdf_phase_diff.svg"})
        CHECK(fs::exists(rd / f));

    SECTION("horizon flag controls the columns")
    {
        REQUIRE(cli("report " + man + " " + out + " --quiet --horizons 5", log).code == 0);
        CHECK(lines(slurp(rd / "horizon_table.csv"))[0] == "model,scenario,speed,mae_h5");
        CHECK(cli("report " + man + " " + out + " --quiet --horizons 5,11", log).code == 2);
        CHECK(cli("report " + man + " " + out + " --quiet --horizons five", log).code == 2);
    }
    SECTION("a deleted checkpoint is named")
    {
        const pl::Manifest m = pl::load_manifest(kSource / "manifests" / "smoke.toml");
        pl::Manifest mm = m;
        mm.out = dir / "out";
        const fs::path ckpt = pl::checkpoint_path(mm, pl::cells(mm).front(), "lstm", ParamType::Doppler);
        REQUIRE(fs::exists(ckpt));
        fs::remove(ckpt);
        const Run e = cli("eval " + man + " " + out + " --quiet", log);
        CHECK(e.code == 5);
        CHECK(e.err.find("missing") != std::string::npos);
        CHECK(e.err.find(ckpt.filename().string()) != std::string::npos);
    }
}

TEST_CASE("exit codes", "[pipeline]")
{
    const fs::path dir = scratch("exit");
    const fs::path log = dir / "log.txt";
    CHECK(cli("", log).code == 1);
    CHECK(cli("frobnicate", log).code == 1);
    CHECK(cli("generate", log).code == 1);

    io::write_text(dir / "bad.toml", "[scenario]\nspeed = -1\n");
    CHECK(cli("generate --scenario \"" + (dir / "bad.toml").string() + "\" --out \"" + (dir / "x").string() + "\"",
               log)
              .code == 2);
    io::write_text(dir / "bad_manifest.toml", "[experiment]\nscenarios = [nope.toml]\ncontext = 21\n");
    CHECK(cli("pretrain --manifest \"" + (dir / "bad_manifest.toml").string() + "\"", log).code == 2);
    CHECK(cli("pretrain --manifest \"" + (dir / "absent.toml").string() + "\"", log).code == 5);

    // Output directory below a regular file cannot be created.
    io::write_text(dir / "file", "x");
    const fs::path scen = short_scenario(dir);
    CHECK(cli("generate --scenario \"" + scen.string() + "\" --out \"" + (dir / "file" / "sub").string() + "\"",
               log)
              .code == 3);
}

TEST_CASE("manifest validation", "[pipeline]")
{
    const fs::path src = kSource / "manifests" / "m.toml";
    auto parse = [&](const std::string &text) { return pl::manifest_from(KeyValues::parse(text), src); };
    const std::string scen = "[experiment]\nscenarios = [../scenarios/los_60.toml]\n";

    const pl::Manifest ok = parse(scen + "out = /tmp/x\nhorizons = [5]\n");
    CHECK(ok.scenarios.size() == 1);
    CHECK(ok.scenarios[0] == kSource / "manifests" / ".." / "scenarios" / "los_60.toml");
    CHECK(ok.out == fs::path("/tmp/x"));
    CHECK(ok.horizons == std::vector<int>{5});

    CHECK_THROWS_AS(parse(scen + "context = 22\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "horizons = [5, 20]\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "stages = [train, generate]\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "stages = [bake]\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "colour = blue\n"), ConfigError);
    CHECK_THROWS_AS(parse("[experiment]\nscenarios = []\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "[finetune]\nlr = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "[transformer]\nd_model = 30\nheads = 4\n"), ConfigError);
    CHECK_THROWS_AS(parse(scen + "[corpus]\nfamilies = [sine, chirp]\n"), ConfigError);

    pl::Manifest e = ok;
    e.apply_epochs(3);
    CHECK(e.finetune.max_steps == 3 * e.steps_per_epoch);
    CHECK(e.baseline.max_steps == 3 * e.steps_per_epoch);

    const auto cs = pl::cells(parse(scen + "seed = 40\nduration = 0.3\n"));
    REQUIRE(cs.size() == 1);
    CHECK(cs[0].name == "los_60");
    CHECK(cs[0].scenario == "LOS");
    CHECK(cs[0].speed == 60);
    CHECK(cs[0].config.seed == 40);
    CHECK(cs[0].config.duration == 0.3);
    CHECK(pl::parse_stage("eval") == pl::Stage::Eval);
}
