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

// Flat key/value configuration files in a TOML-like subset:
//
//   # comment
//   key = value
//   [section]          prefixes later keys with "section."
//   path_loss.base = 32.45
//
// Values may be bare or double-quoted. Lists are comma separated.

#pragma once

#include "ddcp/channel_sim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ddcp {

class KeyValues {
public:
    static KeyValues parse(std::string_view text, const std::string &source = "<string>");
    /// Throws MissingArtifactError if the file is absent.
    static KeyValues load(const std::filesystem::path &path);

    bool has(const std::string &key) const { return values_.count(key) != 0; }
    void set(const std::string &key, std::string value) { values_[key] = std::move(value); }

    std::string get_string(const std::string &key) const;
    std::string get_string(const std::string &key, const std::string &fallback) const;
    double get_double(const std::string &key) const;
    double get_double(const std::string &key, double fallback) const;
    long long get_int(const std::string &key) const;
    long long get_int(const std::string &key, long long fallback) const;
    bool get_bool(const std::string &key, bool fallback) const;
    std::vector<std::string> get_list(const std::string &key) const;

    const std::map<std::string, std::string> &entries() const { return values_; }
    const std::string &source() const { return source_; }

    /// Keys never read through a getter.
    std::vector<std::string> unused() const;
    /// Throws ConfigError naming the first key that no getter consumed.
    void reject_unused() const;

private:
    std::string lookup(const std::string &key) const;
    [[noreturn]] void fail(const std::string &key, const std::string &what) const;

    std::string source_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

/// Overlays every scenario key present in `kv` on `base` and validates the result. Unknown keys are errors.
ScenarioConfig scenario_from(const KeyValues &kv, ScenarioConfig base = {});
ScenarioConfig load_scenario(const std::filesystem::path &path);
/// Serializes every field so that scenario_from(parse(text)) round-trips.
std::string scenario_to_text(const ScenarioConfig &config);

std::string_view los_mode_name(LosMode m);

} // namespace ddcp
