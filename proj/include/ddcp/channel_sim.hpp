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

// Quasi-deterministic vehicular channel generator.
//
// The propagation environment (base station, scatterer clusters and per-path routing) is drawn once from a
// seeded distribution; vehicles then move deterministically through it. Large-scale parameters (Rician
// K-factor, shadow fading) are spatially correlated Gaussian fields along the trajectories, cross-correlated
// with each other, and combined with a log-distance path loss. Small-scale fading is geometric: every sub-path
// carries the phase of its total length at wavelength scale, so consecutive snapshots show Doppler-consistent
// phase rotation.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddcp {

using Vec3 = Eigen::Vector3d;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;

enum class LosMode { LOS, NLOS };

/// Coefficients of the log-linear large-scale model
///   mean = base + freq_coeff*log10(f_GHz) + dist_coeff*log10(d_2D) + height_coeff*log10(h_B) + angle_coeff*alpha_R
/// plus the spread and decorrelation distance of its spatially correlated part.
struct LSCoefficients {
    double base = 0.0;
    double freq_coeff = 0.0;
    double dist_coeff = 0.0;
    double height_coeff = 0.0;
    double angle_coeff = 0.0;
    double sigma = 0.0;
    double decorrelation_distance = 20.0; // meters

    void validate(const std::string &name) const;
};

struct ScenarioConfig {
    double road_length = 500.0;     // m
    double bs_offset = 100.0;       // m, from road center
    double bs_height = 25.0;        // m
    double vehicle_height = 1.5;    // m
    double lane_spacing = 5.0;      // m
    int lanes_per_direction = 2;
    double speed_kmh = 60.0;
    double carrier_freq = 3.0e9;    // Hz
    double snapshot_interval = 5e-4; // s
    double duration = 2.0;          // s
    double start_offset = -40.0;    // m along the travel direction, relative to the base-station broadside point
    LosMode los_mode = LosMode::LOS;
    int n_paths = 5;
    std::uint64_t seed = 1;

    LSCoefficients path_loss{32.45, 20.0, 20.0, 0.0, 0.0, 0.0, 20.0};
    LSCoefficients k_factor{9.0, 0.0, 0.0, 0.0, 0.0, 3.0, 20.0};
    LSCoefficients shadow_fading{0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 20.0};
    double cross_corr = 0.5; // correlation between shadow fading and K-factor
    std::optional<double> k_factor_override_db;

    // Scatterer placement: clusters are uniform in a box along the road, outside the carriageway.
    double scatterer_corridor = 80.0;   // m beyond the road edge
    double scatterer_max_height = 20.0; // m
    int scatterers_per_path = 1;
    std::complex<double> antenna_gain{1.0, 0.0};

    void validate() const;
    double speed_mps() const { return speed_kmh / 3.6; }
    double wavelength() const { return kSpeedOfLight / carrier_freq; }
    double carrier_ghz() const { return carrier_freq * 1e-9; }
    int lane_count() const { return 2 * lanes_per_direction; }
    std::size_t snapshot_count() const;
};

struct Cluster {
    Vec3 position = Vec3::Zero();
    int scatterer_count = 1;
    bool operator==(const Cluster &) const = default;
};

struct Environment {
    Vec3 bs_position = Vec3::Zero();
    std::vector<Cluster> clusters;
    Eigen::Matrix2d cross_corr = Eigen::Matrix2d::Identity();
    /// Ordered cluster chain of each sub-path; an empty chain is the direct path.
    std::vector<std::vector<int>> routes;

    std::size_t path_count() const { return routes.size(); }
    bool operator==(const Environment &) const = default;
};

/// Straight-line constant-velocity motion.
struct Trajectory {
    Vec3 start = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 position(double t) const { return start + velocity * t; }
};

struct PathState {
    int path_id = 0;
    std::complex<double> gain;
    double delay = 0.0; // s
};

struct ChannelSnapshot {
    double time = 0.0;
    std::vector<PathState> paths;
};

struct ChannelTrace {
    ScenarioConfig config;
    int lane = 0;
    std::vector<ChannelSnapshot> snapshots;

    double snapshot_interval() const { return config.snapshot_interval; }
};

/// Unit-variance spatially correlated deviates of the large-scale parameters at one receiver position,
/// after cross-correlation and transmitter/receiver combination.
struct LargeScaleSample {
    double k_factor = 0.0;
    double shadow_fading = 0.0;
};

// ----------------------------------------------------------------------------------------------------------------
// Large-scale fading

/// Piecewise spatial autocorrelation: Gaussian decay below the decorrelation distance, exponential beyond.
template <typename T>
T autocorrelation(T distance, T decorrelation_distance)
{
    if (!(decorrelation_distance > T(0)))
        throw std::invalid_argument("autocorrelation: decorrelation distance must be positive");
    if (distance < T(0))
        throw std::invalid_argument("autocorrelation: distance must be non-negative");
    const T r = distance / decorrelation_distance;
    return distance < decorrelation_distance ? std::exp(-r * r) : std::exp(-r);
}

/// Draws zero-mean unit-variance Gaussian fields over a fixed set of positions whose pairwise correlation
/// follows autocorrelation(). The correlation matrix is factorized once; LLT is tried first, then LLT with
/// 1e-10 diagonal jitter, then a symmetric eigen-decomposition projected onto the PSD cone.
class CorrelatedFieldSampler {
public:
    CorrelatedFieldSampler(std::span<const Vec3> positions, double decorrelation_distance);

    Eigen::VectorXd draw(std::mt19937_64 &rng) const;
    std::size_t size() const { return index_.size(); }
    const Eigen::MatrixXd &correlation() const { return correlation_; }

    enum class Factorization { Cholesky, CholeskyJitter, EigenProjected };
    Factorization factorization() const { return method_; }

private:
    Eigen::MatrixXd correlation_;
    Eigen::MatrixXd factor_;          // over distinct positions
    std::vector<Eigen::Index> index_; // position -> distinct position
    Factorization method_ = Factorization::Cholesky;
};

Eigen::VectorXd correlated_field(std::span<const Vec3> positions, const LSCoefficients &coeffs, std::uint64_t seed);

/// Combines the field values at transmitter and receiver for a link of length `distance`.
double combine_tx_rx(double x_tx, double x_rx, double distance, double decorrelation_distance);

/// Log-linear large-scale mean. Frequency is consumed in GHz.
double ls_mean(const LSCoefficients &coeffs, double f_ghz, double d_2d, double h_b, double alpha_r);

/// Mixes two independent unit-variance fields (rows) with the symmetric square root of R.
Eigen::Matrix<double, 2, Eigen::Dynamic> cross_correlate(const Eigen::Matrix<double, 2, Eigen::Dynamic> &fields,
                                                         const Eigen::Matrix2d &R);

Eigen::Matrix2d cross_correlation_matrix(double rho);

// ----------------------------------------------------------------------------------------------------------------
// Small-scale fading and geometry

double path_length(std::span<const Vec3> scatterers, const Vec3 &tx, const Vec3 &rx);
double path_delay(std::span<const Vec3> scatterers, const Vec3 &tx, const Vec3 &rx);

/// Path phase at wavelength scale, reduced to [0, 2pi).
template <typename T>
T path_phase(T distance, T wavelength)
{
    if (!(wavelength > T(0)))
        throw std::invalid_argument("path_phase: wavelength must be positive");
    T frac = std::fmod(distance, wavelength);
    if (frac < T(0))
        frac += wavelength;
    T phase = T(2) * T(kPi) * (frac / wavelength);
    if (phase >= T(2) * T(kPi))
        phase -= T(2) * T(kPi);
    return phase;
}

/// Per-path composite gain g_A * exp(j psi_i) * sqrt(P_i / sum P). Total output power equals |g_A|^2.
std::vector<std::complex<double>> composite_gain(std::span<const double> powers, std::span<const double> phases,
                                                 std::complex<double> antenna_gain = {1.0, 0.0});

// ----------------------------------------------------------------------------------------------------------------
// Scenario

Environment sample_environment(const ScenarioConfig &config);

/// Receiver trajectory of one lane; lanes are numbered from the most negative road offset.
Trajectory lane_trajectory(const ScenarioConfig &config, int lane);

/// Lanes of a same-direction pair alternate between training (even position in the pair) and testing.
bool is_training_lane(const ScenarioConfig &config, int lane);

/// Spatially consistent large-scale fields sampled along every lane of a scenario.
class LargeScaleFields {
public:
    LargeScaleFields(const ScenarioConfig &config, const Environment &env);

    /// Deviates for `lane` after `travelled` meters along its trajectory, for a link of `link_distance` meters.
    LargeScaleSample at(int lane, double travelled, double link_distance) const;

    /// A field with constant state everywhere; used for hand-built trajectories in tests.
    static LargeScaleFields constant(LargeScaleSample value);

private:
    LargeScaleFields() = default;

    double spacing_ = 1.0;
    double k_decorrelation_ = 20.0;
    double sf_decorrelation_ = 20.0;
    LargeScaleSample tx_;
    std::vector<std::vector<LargeScaleSample>> anchors_; // per lane, receiver-side values
    bool constant_ = false;
};

ChannelSnapshot snapshot(const Environment &env, const ScenarioConfig &config, const LargeScaleFields &fields,
                         const Trajectory &trajectory, int lane, double t);

ChannelTrace generate_trace(const ScenarioConfig &config, int lane = 0);

/// All lanes of a scenario sharing one environment.
std::vector<ChannelTrace> generate_scenario(const ScenarioConfig &config);

} // namespace ddcp
