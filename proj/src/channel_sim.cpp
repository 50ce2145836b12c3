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

#include "ddcp/channel_sim.hpp"
#include "ddcp/errors.hpp"

#include <algorithm>
#include <sstream>

namespace ddcp {

namespace {

// Independent random streams derived from the scenario seed.
enum class Stream : std::uint64_t { Environment = 1, KFactorField = 2, ShadowField = 3 };

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<Vec3> chain_positions(const Environment &env, const std::vector<int> &route)
{
    std::vector<Vec3> out;
    out.reserve(route.size());
    for (int idx : route)
        out.push_back(env.clusters.at(static_cast<std::size_t>(idx)).position);
    return out;
}

} // namespace

void LSCoefficients::validate(const std::string &name) const
{
    if (!(sigma >= 0.0))
        throw ConfigError(name + ".sigma must be >= 0");
    if (!(decorrelation_distance > 0.0))
        throw ConfigError(name + ".decorrelation_distance must be > 0");
}

void ScenarioConfig::validate() const
{
    if (!(snapshot_interval > 0.0))
        throw ConfigError("snapshot_interval must be > 0");
    if (!(speed_kmh > 0.0))
        throw ConfigError("speed must be > 0");
    if (n_paths < 1)
        throw ConfigError("n_paths must be >= 1");
    if (!(road_length > 0.0))
        throw ConfigError("road_length must be > 0");
    if (!(duration >= 0.0))
        throw ConfigError("duration must be >= 0");
    if (!(carrier_freq > 0.0) || !(bs_height > 0.0))
        throw ConfigError("carrier_freq and bs_height must be > 0");
    if (lanes_per_direction < 1 || !(lane_spacing > 0.0))
        throw ConfigError("need at least one lane per direction with positive spacing");
    if (scatterers_per_path < 1)
        throw ConfigError("scatterers_per_path must be >= 1");
    if (!(cross_corr >= -1.0 && cross_corr <= 1.0))
        throw ConfigError("cross_corr must lie in [-1, 1]");
    path_loss.validate("path_loss");
    k_factor.validate("k_factor");
    shadow_fading.validate("shadow_fading");
}

std::size_t ScenarioConfig::snapshot_count() const
{
    return static_cast<std::size_t>(std::llround(std::floor(duration / snapshot_interval + 1e-9))) + 1;
}

// ----------------------------------------------------------------------------------------------------------------

CorrelatedFieldSampler::CorrelatedFieldSampler(std::span<const Vec3> positions, double decorrelation_distance)
{
    if (positions.empty())
        throw std::invalid_argument("correlated_field: need at least one position");
    if (!(decorrelation_distance > 0.0))
        throw std::invalid_argument("correlated_field: decorrelation distance must be positive");

    const auto n = static_cast<Eigen::Index>(positions.size());
    correlation_.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        correlation_(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double d = (positions[std::size_t(i)] - positions[std::size_t(j)]).norm();
            correlation_(i, j) = correlation_(j, i) = autocorrelation(d, decorrelation_distance);
        }
    }

    // Coincident positions share one draw, so only distinct positions are factorized.
    std::vector<Eigen::Index> distinct;
    index_.resize(std::size_t(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        auto same = std::find_if(distinct.begin(), distinct.end(),
                                 [&](Eigen::Index j) { return positions[std::size_t(i)] == positions[std::size_t(j)]; });
        index_[std::size_t(i)] = Eigen::Index(same - distinct.begin());
        if (same == distinct.end())
            distinct.push_back(i);
    }
    const Eigen::MatrixXd reduced = correlation_(distinct, distinct);

    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        method_ = Factorization::Cholesky;
        return;
    }
    Eigen::MatrixXd jittered = reduced;
    jittered.diagonal().array() += 1e-10;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) {
        factor_ = llt.matrixL();
        method_ = Factorization::CholeskyJitter;
        return;
    }

    // Duplicate or near-duplicate positions and the piecewise kernel can leave the matrix indefinite.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reduced);
    if (eig.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "correlated_field: factorization failed for " << n << " positions (d_lambda = " << decorrelation_distance
            << " m)";
        throw NumericalError(msg.str());
    }
    const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
    factor_ = eig.eigenvectors() * clamped.cwiseSqrt().asDiagonal();
    // Restore unit variance lost to the projection.
    const Eigen::VectorXd row_norm = factor_.rowwise().norm();
    if ((row_norm.array() <= 0.0).any()) {
        std::ostringstream msg;
        msg << "correlated_field: projected factor has a zero row (min eigenvalue " << eig.eigenvalues().minCoeff()
            << ")";
        throw NumericalError(msg.str());
    }
    factor_ = row_norm.cwiseInverse().asDiagonal() * factor_;
    method_ = Factorization::EigenProjected;
}

Eigen::VectorXd CorrelatedFieldSampler::draw(std::mt19937_64 &rng) const
{
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd w(factor_.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i)
        w(i) = normal(rng);
    const Eigen::VectorXd x = factor_ * w;
    Eigen::VectorXd out(Eigen::Index(index_.size()));
    for (std::size_t i = 0; i < index_.size(); ++i)
        out(Eigen::Index(i)) = x(index_[i]);
    return out;
}

Eigen::VectorXd correlated_field(std::span<const Vec3> positions, const LSCoefficients &coeffs, std::uint64_t seed)
{
    CorrelatedFieldSampler sampler(positions, coeffs.decorrelation_distance);
    std::mt19937_64 rng(seed);
    return sampler.draw(rng);
}

double combine_tx_rx(double x_tx, double x_rx, double distance, double decorrelation_distance)
{
    const double rho = autocorrelation(distance, decorrelation_distance);
    return (x_tx + x_rx) / (2.0 * std::sqrt(rho) + 1.0);
}

double ls_mean(const LSCoefficients &c, double f_ghz, double d_2d, double h_b, double alpha_r)
{
    if (!(f_ghz > 0.0) || !(d_2d > 0.0) || !(h_b > 0.0))
        throw std::invalid_argument("ls_mean: frequency, distance and height must be positive");
    return c.base + c.freq_coeff * std::log10(f_ghz) + c.dist_coeff * std::log10(d_2d) +
           c.height_coeff * std::log10(h_b) + c.angle_coeff * alpha_r;
}

Eigen::Matrix2d cross_correlation_matrix(double rho)
{
    Eigen::Matrix2d R;
    R << 1.0, rho, rho, 1.0;
    return R;
}

Eigen::Matrix<double, 2, Eigen::Dynamic> cross_correlate(const Eigen::Matrix<double, 2, Eigen::Dynamic> &fields,
                                                         const Eigen::Matrix2d &R)
{
    constexpr double tol = 1e-12;
    if (std::abs(R(0, 1) - R(1, 0)) > tol || std::abs(R(0, 0) - 1.0) > tol || std::abs(R(1, 1) - 1.0) > tol)
        throw std::invalid_argument("cross_correlate: R must be symmetric with unit diagonal");
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(R);
    if (eig.eigenvalues().minCoeff() < -tol)
        throw std::invalid_argument("cross_correlate: R is not positive (semi-)definite");
    const Eigen::Matrix2d root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    return root * fields;
}

// ----------------------------------------------------------------------------------------------------------------

double path_length(std::span<const Vec3> scatterers, const Vec3 &tx, const Vec3 &rx)
{
    double length = 0.0;
    Vec3 from = tx;
    for (const Vec3 &s : scatterers) {
        length += (s - from).norm();
        from = s;
    }
    return length + (rx - from).norm();
}

double path_delay(std::span<const Vec3> scatterers, const Vec3 &tx, const Vec3 &rx)
{
    return path_length(scatterers, tx, rx) / kSpeedOfLight;
}

std::vector<std::complex<double>> composite_gain(std::span<const double> powers, std::span<const double> phases,
                                                 std::complex<double> antenna_gain)
{
    if (powers.size() != phases.size())
        throw std::invalid_argument("composite_gain: powers and phases differ in length");
    double total = 0.0;
    for (double p : powers) {
        if (!(p >= 0.0))
            throw std::invalid_argument("composite_gain: path powers must be non-negative");
        total += p;
    }
    if (!(total > 0.0))
        throw std::invalid_argument("composite_gain: total path power is zero");

    std::vector<std::complex<double>> out(powers.size());
    for (std::size_t i = 0; i < powers.size(); ++i)
        out[i] = antenna_gain * std::polar(std::sqrt(powers[i] / total), phases[i]);
    return out;
}

// ----------------------------------------------------------------------------------------------------------------

Environment sample_environment(const ScenarioConfig &config)
{
    config.validate();
    auto rng = make_rng(config.seed, Stream::Environment);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Environment env;
    env.bs_position = Vec3(0.0, config.bs_offset, config.bs_height);
    env.cross_corr = cross_correlation_matrix(config.cross_corr);

    const double road_half_width = config.lanes_per_direction * config.lane_spacing;
    const double y_min = road_half_width + 5.0;
    const double y_max = road_half_width + std::max(config.scatterer_corridor, 5.0) + 5.0;

    const bool los = config.los_mode == LosMode::LOS;
    for (int p = 0; p < config.n_paths; ++p) {
        std::vector<int> route;
        if (!(los && p == 0)) {
            for (int s = 0; s < config.scatterers_per_path; ++s) {
                Cluster c;
                const double x = (unit(rng) - 0.5) * config.road_length;
                const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
                const double y = side * (y_min + unit(rng) * (y_max - y_min));
                const double z = unit(rng) * config.scatterer_max_height;
                c.position = Vec3(x, y, z);
                route.push_back(static_cast<int>(env.clusters.size()));
                env.clusters.push_back(c);
            }
        }
        env.routes.push_back(std::move(route));
    }
    return env;
}

Trajectory lane_trajectory(const ScenarioConfig &config, int lane)
{
    if (lane < 0 || lane >= config.lane_count())
        throw std::out_of_range("lane index " + std::to_string(lane) + " outside 0.." +
                                std::to_string(config.lane_count() - 1));
    const double y = (lane - 0.5 * (config.lane_count() - 1)) * config.lane_spacing;
    // Lanes left of the centre line travel towards +x.
    const double dir = lane < config.lanes_per_direction ? 1.0 : -1.0;
    Trajectory t;
    t.start = Vec3(dir * config.start_offset, y, config.vehicle_height);
    t.velocity = Vec3(dir * config.speed_mps(), 0.0, 0.0);
    return t;
}

bool is_training_lane(const ScenarioConfig &config, int lane)
{
    if (lane < 0 || lane >= config.lane_count())
        throw std::out_of_range("lane index out of range");
    return (lane % config.lanes_per_direction) % 2 == 0;
}

LargeScaleFields::LargeScaleFields(const ScenarioConfig &config, const Environment &env)
{
    k_decorrelation_ = config.k_factor.decorrelation_distance;
    sf_decorrelation_ = config.shadow_fading.decorrelation_distance;
    spacing_ = std::min(k_decorrelation_, sf_decorrelation_) / 8.0;

    const double travel = config.speed_mps() * config.duration;
    const auto per_lane = static_cast<std::size_t>(std::ceil(travel / spacing_ - 1e-9)) + 2;
    const int lanes = config.lane_count();

    // Index 0 is the transmitter; lanes follow in order.
    std::vector<Vec3> positions;
    positions.reserve(1 + per_lane * static_cast<std::size_t>(lanes));
    positions.push_back(env.bs_position);
    for (int lane = 0; lane < lanes; ++lane) {
        const Trajectory tr = lane_trajectory(config, lane);
        const Vec3 dir = tr.velocity.normalized();
        for (std::size_t k = 0; k < per_lane; ++k)
            positions.push_back(tr.start + dir * (spacing_ * static_cast<double>(k)));
    }

    auto rng_k = make_rng(config.seed, Stream::KFactorField);
    auto rng_sf = make_rng(config.seed, Stream::ShadowField);
    const CorrelatedFieldSampler k_sampler(positions, k_decorrelation_);
    const CorrelatedFieldSampler sf_sampler(positions, sf_decorrelation_);

    Eigen::Matrix<double, 2, Eigen::Dynamic> raw(2, static_cast<Eigen::Index>(positions.size()));
    raw.row(0) = k_sampler.draw(rng_k).transpose();
    raw.row(1) = sf_sampler.draw(rng_sf).transpose();
    const auto mixed = cross_correlate(raw, env.cross_corr);

    tx_ = {mixed(0, 0), mixed(1, 0)};
    anchors_.resize(static_cast<std::size_t>(lanes));
    for (int lane = 0; lane < lanes; ++lane) {
        auto &a = anchors_[static_cast<std::size_t>(lane)];
        a.resize(per_lane);
        for (std::size_t k = 0; k < per_lane; ++k) {
            const auto col = static_cast<Eigen::Index>(1 + static_cast<std::size_t>(lane) * per_lane + k);
            a[k] = {mixed(0, col), mixed(1, col)};
        }
    }
}

LargeScaleFields LargeScaleFields::constant(LargeScaleSample value)
{
    LargeScaleFields f;
    f.constant_ = true;
    f.tx_ = value;
    return f;
}

LargeScaleSample LargeScaleFields::at(int lane, double travelled, double link_distance) const
{
    if (constant_)
        return tx_;
    const auto &a = anchors_.at(static_cast<std::size_t>(lane));
    const double pos = std::clamp(travelled / spacing_, 0.0, static_cast<double>(a.size() - 1));
    const auto k0 = std::min(static_cast<std::size_t>(pos), a.size() - 2);
    const double w = pos - static_cast<double>(k0);
    const double k_rx = (1.0 - w) * a[k0].k_factor + w * a[k0 + 1].k_factor;
    const double sf_rx = (1.0 - w) * a[k0].shadow_fading + w * a[k0 + 1].shadow_fading;
    return {combine_tx_rx(tx_.k_factor, k_rx, link_distance, k_decorrelation_),
            combine_tx_rx(tx_.shadow_fading, sf_rx, link_distance, sf_decorrelation_)};
}

ChannelSnapshot snapshot(const Environment &env, const ScenarioConfig &config, const LargeScaleFields &fields,
                         const Trajectory &trajectory, int lane, double t)
{
    if (!(t >= 0.0) || t > config.duration + 1e-9 * std::max(1.0, config.duration))
        throw std::out_of_range("snapshot: t outside [0, duration]");

    const Vec3 &tx = env.bs_position;
    const Vec3 rx = trajectory.position(t);
    const double d_2d = std::max((rx - tx).head<2>().norm(), 1e-3);
    const double alpha_r = std::atan2(tx.z() - rx.z(), d_2d);
    const double f_ghz = config.carrier_ghz();

    const LargeScaleSample dev = fields.at(lane, trajectory.velocity.norm() * t, (rx - tx).norm());
    const double path_loss_db = ls_mean(config.path_loss, f_ghz, d_2d, tx.z(), alpha_r);
    const double shadow_db =
        ls_mean(config.shadow_fading, f_ghz, d_2d, tx.z(), alpha_r) + config.shadow_fading.sigma * dev.shadow_fading;
    const double k_db = config.k_factor_override_db
                            ? *config.k_factor_override_db
                            : ls_mean(config.k_factor, f_ghz, d_2d, tx.z(), alpha_r) + config.k_factor.sigma * dev.k_factor;

    const std::size_t n = env.path_count();
    std::vector<double> powers(n), phases(n), delays(n);
    std::size_t scattered = 0;
    for (const auto &r : env.routes)
        scattered += r.empty() ? 0 : 1;
    const bool has_direct = scattered < n;

    // Rician split: K/(K+1) on the direct path, 1/(K+1) uniformly over scattered paths.
    double direct_share = 1.0;
    if (has_direct && scattered > 0) {
        if (std::isinf(k_db))
            direct_share = k_db > 0 ? 1.0 : 0.0;
        else {
            const double k_lin = std::pow(10.0, k_db / 10.0);
            direct_share = k_lin / (k_lin + 1.0);
        }
    } else if (!has_direct) {
        direct_share = 0.0;
    }
    const double scattered_share = scattered > 0 ? (1.0 - direct_share) / static_cast<double>(scattered) : 0.0;

    const double lambda = config.wavelength();
    for (std::size_t i = 0; i < n; ++i) {
        const auto chain = chain_positions(env, env.routes[i]);
        const double len = path_length(chain, tx, rx);
        delays[i] = len / kSpeedOfLight;
        phases[i] = path_phase(len, lambda);
        powers[i] = env.routes[i].empty() ? direct_share : scattered_share;
    }
    const auto gs = composite_gain(powers, phases, config.antenna_gain);
    const double amplitude = std::pow(10.0, (-path_loss_db + shadow_db) / 20.0);

    ChannelSnapshot snap;
    snap.time = t;
    snap.paths.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        snap.paths[i] = {static_cast<int>(i), amplitude * gs[i], delays[i]};
    return snap;
}

namespace {

ChannelTrace build_trace(const ScenarioConfig &config, const Environment &env, const LargeScaleFields &fields, int lane)
{
    const Trajectory tr = lane_trajectory(config, lane);
    ChannelTrace trace;
    trace.config = config;
    trace.lane = lane;
    const std::size_t count = config.snapshot_count();
    trace.snapshots.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double t = std::min(static_cast<double>(k) * config.snapshot_interval, config.duration);
        trace.snapshots.push_back(snapshot(env, config, fields, tr, lane, t));
    }
    return trace;
}

} // namespace

ChannelTrace generate_trace(const ScenarioConfig &config, int lane)
{
    config.validate();
    const Environment env = sample_environment(config);
    const LargeScaleFields fields(config, env);
    return build_trace(config, env, fields, lane);
}

std::vector<ChannelTrace> generate_scenario(const ScenarioConfig &config)
{
    config.validate();
    const Environment env = sample_environment(config);
    const LargeScaleFields fields(config, env);
    std::vector<ChannelTrace> out;
    for (int lane = 0; lane < config.lane_count(); ++lane)
        out.push_back(build_trace(config, env, fields, lane));
    return out;
}

} // namespace ddcp
