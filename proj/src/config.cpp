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

#include "ddcp/config.hpp"
#include "ddcp/errors.hpp"

#include <cctype>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ddcp {

namespace {

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

bool valid_key(const std::string &k)
{
    if (k.empty())
        return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-'))
            return false;
    return true;
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string &source)
{
    KeyValues kv;
    kv.source_ = source;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no) + ": ";
        // Strip comments that are not inside a quoted value.
        bool quoted = false;
        std::string line;
        for (char c : raw) {
            if (c == '"')
                quoted = !quoted;
            if (c == '#' && !quoted)
                break;
            line.push_back(c);
        }
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(where + "unterminated section header");
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (!section.empty() && !valid_key(section))
                throw ConfigError(where + "invalid section name '" + section + "'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!valid_key(key))
            throw ConfigError(where + "invalid key '" + key + "'");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        else if (value.find('"') != std::string::npos)
            throw ConfigError(where + "unbalanced quotes");
        if (!section.empty())
            key = section + "." + key;
        if (kv.values_.count(key))
            throw ConfigError(where + "duplicate key '" + key + "'");
        kv.values_[key] = value;
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path &path)
{
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("config", path.string());
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
}

void KeyValues::fail(const std::string &key, const std::string &what) const
{
    throw ConfigError(source_ + ": key '" + key + "': " + what);
}

std::string KeyValues::lookup(const std::string &key) const
{
    auto it = values_.find(key);
    if (it == values_.end())
        fail(key, "missing");
    used_.insert(key);
    return it->second;
}

std::string KeyValues::get_string(const std::string &key) const { return lookup(key); }

std::string KeyValues::get_string(const std::string &key, const std::string &fallback) const
{
    return has(key) ? lookup(key) : fallback;
}

double KeyValues::get_double(const std::string &key) const
{
    const std::string v = lookup(key);
    char *end = nullptr;
    errno = 0;
    const double d = std::strtod(v.c_str(), &end);
    if (v.empty() || *end != '\0' || errno == ERANGE)
        fail(key, "expected a number, got '" + v + "'");
    return d;
}

double KeyValues::get_double(const std::string &key, double fallback) const
{
    return has(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string &key) const
{
    const std::string v = lookup(key);
    char *end = nullptr;
    errno = 0;
    const long long i = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0' || errno == ERANGE)
        fail(key, "expected an integer, got '" + v + "'");
    return i;
}

long long KeyValues::get_int(const std::string &key, long long fallback) const
{
    return has(key) ? get_int(key) : fallback;
}

bool KeyValues::get_bool(const std::string &key, bool fallback) const
{
    if (!has(key))
        return fallback;
    const std::string v = lookup(key);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    fail(key, "expected a boolean, got '" + v + "'");
}

std::vector<std::string> KeyValues::get_list(const std::string &key) const
{
    std::vector<std::string> out;
    std::string v = lookup(key);
    if (v.size() >= 2 && v.front() == '[' && v.back() == ']')
        v = v.substr(1, v.size() - 2);
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.size() >= 2 && item.front() == '\'' && item.back() == '\'')
            item = item.substr(1, item.size() - 2);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

std::vector<std::string> KeyValues::unused() const
{
    std::vector<std::string> out;
    for (const auto &[k, v] : values_)
        if (!used_.count(k))
            out.push_back(k);
    return out;
}

void KeyValues::reject_unused() const
{
    const auto u = unused();
    if (!u.empty())
        throw ConfigError(source_ + ": unknown key '" + u.front() + "'");
}

// ----------------------------------------------------------------------------------------------------------------

std::string_view los_mode_name(LosMode m) { return m == LosMode::LOS ? "LOS" : "NLOS"; }

namespace {

void read_coeffs(const KeyValues &kv, const std::string &name, LSCoefficients &c)
{
    c.base = kv.get_double(name + ".base", c.base);
    c.freq_coeff = kv.get_double(name + ".freq_coeff", c.freq_coeff);
    c.dist_coeff = kv.get_double(name + ".dist_coeff", c.dist_coeff);
    c.height_coeff = kv.get_double(name + ".height_coeff", c.height_coeff);
    c.angle_coeff = kv.get_double(name + ".angle_coeff", c.angle_coeff);
    c.sigma = kv.get_double(name + ".sigma", c.sigma);
    c.decorrelation_distance = kv.get_double(name + ".decorrelation_distance", c.decorrelation_distance);
}

void write_coeffs(std::ostream &os, const std::string &name, const LSCoefficients &c)
{
    os << "\n[" << name << "]\n";
    os << "base = " << format_double(c.base) << "\n";
    os << "freq_coeff = " << format_double(c.freq_coeff) << "\n";
    os << "dist_coeff = " << format_double(c.dist_coeff) << "\n";
    os << "height_coeff = " << format_double(c.height_coeff) << "\n";
    os << "angle_coeff = " << format_double(c.angle_coeff) << "\n";
    os << "sigma = " << format_double(c.sigma) << "\n";
    os << "decorrelation_distance = " << format_double(c.decorrelation_distance) << "\n";
}

} // namespace

ScenarioConfig scenario_from(const KeyValues &kv, ScenarioConfig c)
{
    // Keys may live at top level or under a [scenario] section.
    auto key = [&](const std::string &k) { return kv.has("scenario." + k) ? "scenario." + k : k; };
    c.road_length = kv.get_double(key("road_length"), c.road_length);
    c.bs_offset = kv.get_double(key("bs_offset"), c.bs_offset);
    c.bs_height = kv.get_double(key("bs_height"), c.bs_height);
    c.vehicle_height = kv.get_double(key("vehicle_height"), c.vehicle_height);
    c.lane_spacing = kv.get_double(key("lane_spacing"), c.lane_spacing);
    c.lanes_per_direction = int(kv.get_int(key("lanes_per_direction"), c.lanes_per_direction));
    c.speed_kmh = kv.get_double(key("speed"), c.speed_kmh);
    c.carrier_freq = kv.get_double(key("carrier_freq"), c.carrier_freq);
    c.snapshot_interval = kv.get_double(key("snapshot_interval"), c.snapshot_interval);
    c.duration = kv.get_double(key("duration"), c.duration);
    c.start_offset = kv.get_double(key("start_offset"), c.start_offset);
    c.n_paths = int(kv.get_int(key("n_paths"), c.n_paths));
    if (kv.has(key("seed"))) {
        const long long s = kv.get_int(key("seed"));
        if (s < 0)
            throw ConfigError(kv.source() + ": seed must be non-negative");
        c.seed = std::uint64_t(s);
    }
    if (kv.has(key("los_mode"))) {
        const std::string m = kv.get_string(key("los_mode"));
        if (m == "LOS" || m == "los")
            c.los_mode = LosMode::LOS;
        else if (m == "NLOS" || m == "nlos")
            c.los_mode = LosMode::NLOS;
        else
            throw ConfigError(kv.source() + ": los_mode must be LOS or NLOS, got '" + m + "'");
    }
    c.cross_corr = kv.get_double(key("cross_corr"), c.cross_corr);
    if (kv.has(key("k_factor_override_db"))) {
        const std::string v = kv.get_string(key("k_factor_override_db"));
        if (v == "inf" || v == "+inf")
            c.k_factor_override_db = std::numeric_limits<double>::infinity();
        else if (v != "none")
            c.k_factor_override_db = kv.get_double(key("k_factor_override_db"));
    }
    c.scatterer_corridor = kv.get_double(key("scatterer_corridor"), c.scatterer_corridor);
    c.scatterer_max_height = kv.get_double(key("scatterer_max_height"), c.scatterer_max_height);
    c.scatterers_per_path = int(kv.get_int(key("scatterers_per_path"), c.scatterers_per_path));
    c.antenna_gain = {kv.get_double(key("antenna_gain_re"), c.antenna_gain.real()),
                      kv.get_double(key("antenna_gain_im"), c.antenna_gain.imag())};
    read_coeffs(kv, "path_loss", c.path_loss);
    read_coeffs(kv, "k_factor", c.k_factor);
    read_coeffs(kv, "shadow_fading", c.shadow_fading);
    kv.reject_unused();
    c.validate();
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path &path)
{
    return scenario_from(KeyValues::load(path));
}

std::string scenario_to_text(const ScenarioConfig &c)
{
    std::ostringstream os;
    os << "road_length = " << format_double(c.road_length) << "\n";
    os << "bs_offset = " << format_double(c.bs_offset) << "\n";
    os << "bs_height = " << format_double(c.bs_height) << "\n";
    os << "vehicle_height = " << format_double(c.vehicle_height) << "\n";
    os << "lane_spacing = " << format_double(c.lane_spacing) << "\n";
    os << "lanes_per_direction = " << c.lanes_per_direction << "\n";
    os << "speed = " << format_double(c.speed_kmh) << "\n";
    os << "carrier_freq = " << format_double(c.carrier_freq) << "\n";
    os << "snapshot_interval = " << format_double(c.snapshot_interval) << "\n";
    os << "duration = " << format_double(c.duration) << "\n";
    os << "start_offset = " << format_double(c.start_offset) << "\n";
    os << "los_mode = " << los_mode_name(c.los_mode) << "\n";
    os << "n_paths = " << c.n_paths << "\n";
    os << "seed = " << c.seed << "\n";
    os << "cross_corr = " << format_double(c.cross_corr) << "\n";
    if (c.k_factor_override_db)
        os << "k_factor_override_db = "
           << (std::isinf(*c.k_factor_override_db) ? std::string("inf") : format_double(*c.k_factor_override_db))
           << "\n";
    os << "scatterer_corridor = " << format_double(c.scatterer_corridor) << "\n";
    os << "scatterer_max_height = " << format_double(c.scatterer_max_height) << "\n";
    os << "scatterers_per_path = " << c.scatterers_per_path << "\n";
    os << "antenna_gain_re = " << format_double(c.antenna_gain.real()) << "\n";
    os << "antenna_gain_im = " << format_double(c.antenna_gain.imag()) << "\n";
    write_coeffs(os, "path_loss", c.path_loss);
    write_coeffs(os, "k_factor", c.k_factor);
    write_coeffs(os, "shadow_fading", c.shadow_fading);
    return os.str();
}

} // namespace ddcp
