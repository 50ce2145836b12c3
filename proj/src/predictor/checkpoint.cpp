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

#include "ddcp/predictor/checkpoint.hpp"
#include "ddcp/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace ddcp::nn {

namespace {

constexpr char kMagic[8] = {'D', 'D', 'C', 'P', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream &os, T v)
{
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <typename T>
T get(std::istream &is)
{
    char buf[sizeof(T)];
    if (!is.read(buf, sizeof(T)))
        throw IoError("checkpoint: unexpected end of file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace

void write_checkpoint(std::ostream &os, const Forecaster &f)
{
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    put<std::uint32_t>(os, std::uint32_t(f.kind));
    put<std::int32_t>(os, f.context);
    put<std::int32_t>(os, f.horizon);
    put<std::uint8_t>(os, f.instance_norm ? 1 : 0);
    if (f.kind == ModelKind::Transformer) {
        const auto &c = f.transformer.config;
        for (int v : {c.segment_length, c.d_model, c.layers, c.heads, c.ff_dim, c.max_tokens})
            put<std::int32_t>(os, v);
        put<std::uint8_t>(os, c.time_embedding ? 1 : 0);
    } else if (f.kind != ModelKind::Persistence) {
        put<std::int32_t>(os, f.recurrent.config.hidden);
        put<double>(os, f.recurrent.config.forget_bias);
    }
    const ConstParamRefs refs = f.refs();
    put<std::uint32_t>(os, std::uint32_t(refs.size()));
    for (const Param *p : refs) {
        put<std::uint32_t>(os, std::uint32_t(p->value.rows()));
        put<std::uint32_t>(os, std::uint32_t(p->value.cols()));
        for (Eigen::Index r = 0; r < p->value.rows(); ++r)
            for (Eigen::Index c = 0; c < p->value.cols(); ++c)
                put<double>(os, p->value(r, c));
    }
    if (!os)
        throw IoError("checkpoint: write failed");
}

Forecaster read_checkpoint(std::istream &is)
{
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("checkpoint: bad magic");
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion)
        throw IoError("checkpoint: unsupported version " + std::to_string(version));
    const auto kind_raw = get<std::uint32_t>(is);
    if (kind_raw > std::uint32_t(ModelKind::Persistence))
        throw IoError("checkpoint: unknown model kind " + std::to_string(kind_raw));
    const auto kind = ModelKind(kind_raw);
    const int context = get<std::int32_t>(is);
    const int horizon = get<std::int32_t>(is);
    const bool inorm = get<std::uint8_t>(is) != 0;

    Forecaster f;
    try {
        if (kind == ModelKind::Transformer) {
            TransformerConfig c;
            c.segment_length = get<std::int32_t>(is);
            c.d_model = get<std::int32_t>(is);
            c.layers = get<std::int32_t>(is);
            c.heads = get<std::int32_t>(is);
            c.ff_dim = get<std::int32_t>(is);
            c.max_tokens = get<std::int32_t>(is);
            c.time_embedding = get<std::uint8_t>(is) != 0;
            f = Forecaster::make_transformer(c, context, horizon, 0);
        } else if (kind == ModelKind::Persistence) {
            f = Forecaster::persistence(context, horizon);
        } else {
            RecurrentConfig c;
            c.cell = kind == ModelKind::LSTM ? CellKind::LSTM : CellKind::GRU;
            c.hidden = get<std::int32_t>(is);
            c.forget_bias = get<double>(is);
            f = Forecaster::make_recurrent(c, context, horizon, 0);
        }
    } catch (const std::invalid_argument &e) {
        throw IoError(std::string("checkpoint: invalid model header: ") + e.what());
    }
    f.instance_norm = inorm;

    ParamRefs refs = f.refs();
    const auto count = get<std::uint32_t>(is);
    if (count != refs.size())
        throw IoError("checkpoint: tensor count " + std::to_string(count) + " does not match model (" +
                      std::to_string(refs.size()) + ")");
    for (Param *p : refs) {
        const auto rows = get<std::uint32_t>(is);
        const auto cols = get<std::uint32_t>(is);
        if (rows != p->value.rows() || cols != p->value.cols())
            throw IoError("checkpoint: tensor '" + p->name + "' has unexpected shape");
        for (Eigen::Index r = 0; r < p->value.rows(); ++r)
            for (Eigen::Index c = 0; c < p->value.cols(); ++c)
                p->value(r, c) = get<double>(is);
        p->grad.setZero();
    }
    return f;
}

void save_checkpoint(const Forecaster &f, const std::filesystem::path &path)
{
    std::error_code ec;
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw IoError("cannot open checkpoint for writing: " + path.string());
    write_checkpoint(os, f);
}

Forecaster load_checkpoint(const std::filesystem::path &path)
{
    if (!std::filesystem::exists(path))
        throw MissingArtifactError("checkpoint", path.string());
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("cannot open checkpoint: " + path.string());
    return read_checkpoint(is);
}

} // namespace ddcp::nn
