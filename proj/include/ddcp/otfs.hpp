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

// OTFS modulation and delay-Doppler channel application.
//
// Grids are M x N: rows are delay bins (DD) or subcarriers (TF), columns are Doppler bins (DD) or time
// slots (TF). Indices start at 0. Pulses are rectangular of duration T = 1/df, so the Heisenberg and Wigner
// transforms reduce to per-slot (I)DFTs of size M at sample rate M*df. A frame of M*N samples is treated as
// one period of an infinitely repeated signal, so channel delays act as cyclic shifts.

#pragma once

#include "ddcp/channel_sim.hpp"

#include <unsupported/Eigen/FFT>

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddcp::otfs {

template <typename T>
using CMatrix = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using CVector = Eigen::Matrix<std::complex<T>, Eigen::Dynamic, 1>;

enum class Pulse { Rectangular };

struct OTFSConfig {
    int M = 64; // delay bins / subcarriers
    int N = 16; // Doppler bins / time slots
    double subcarrier_spacing = 15e3; // Hz
    Pulse pulse = Pulse::Rectangular;
    bool fractional_delay = false; // interpolate off-grid delays instead of rounding to the nearest sample

    double symbol_duration() const { return 1.0 / subcarrier_spacing; }
    double sample_rate() const { return M * subcarrier_spacing; }
    double doppler_resolution() const { return subcarrier_spacing / N; }
    Eigen::Index frame_length() const { return Eigen::Index(M) * N; }

    void validate() const
    {
        if (M < 1 || N < 1)
            throw std::invalid_argument("OTFSConfig: M and N must be >= 1");
        if (!(subcarrier_spacing > 0.0))
            throw std::invalid_argument("OTFSConfig: subcarrier spacing must be positive");
    }
};

template <typename T>
struct DDGrid {
    CMatrix<T> values; // X_DD[l, k]
};

template <typename T>
struct TFGrid {
    CMatrix<T> values; // X_TF[m, n]
};

template <typename T>
struct TimeSignal {
    CVector<T> samples; // length M*N at rate M*df
    double start_time = 0.0;
};

/// One resolvable path of the sparse delay-Doppler response.
struct DDPath {
    double delay = 0.0;   // s
    double doppler = 0.0; // Hz
    std::complex<double> coefficient;
};

struct DelayQuantization {
    double max_error = 0.0; // s, largest |tau - round(tau*fs)/fs| over paths
};

namespace detail {

template <typename T>
void check_dims(const OTFSConfig &cfg, const CMatrix<T> &m, const char *what)
{
    if (m.rows() != cfg.M || m.cols() != cfg.N)
        throw std::invalid_argument(std::string(what) + ": grid is " + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + ", config expects " + std::to_string(cfg.M) + "x" +
                                    std::to_string(cfg.N));
}

/// F[a, b] = exp(sign * j 2 pi a b / n)
template <typename T>
CMatrix<T> dft_matrix(int n, int sign)
{
    CMatrix<T> f(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            // Reduce a*b mod n first so large grids keep full phase precision.
            const long long ab = (static_cast<long long>(a) * b) % n;
            f(a, b) = std::polar(T(1), T(sign) * T(2) * T(kPi) * T(ab) / T(n));
        }
    return f;
}

inline void check_pulse(const OTFSConfig &cfg)
{
    if (cfg.pulse != Pulse::Rectangular)
        throw std::invalid_argument("otfs: unsupported pulse shape");
}

} // namespace detail

/// X_TF[m,n] = 1/sqrt(MN) sum_k sum_l X_DD[l,k] exp(j2pi(nk/N - ml/M))
template <typename T>
TFGrid<T> isfft(const OTFSConfig &cfg, const DDGrid<T> &x)
{
    cfg.validate();
    detail::check_dims(cfg, x.values, "isfft");
    const T scale = T(1) / std::sqrt(T(cfg.M) * T(cfg.N));
    return {scale * (detail::dft_matrix<T>(cfg.M, -1) * x.values * detail::dft_matrix<T>(cfg.N, +1))};
}

/// Y_DD[l,k] = 1/sqrt(MN) sum_n sum_m Y_TF[m,n] exp(-j2pi(nk/N - ml/M))
template <typename T>
DDGrid<T> sfft(const OTFSConfig &cfg, const TFGrid<T> &y)
{
    cfg.validate();
    detail::check_dims(cfg, y.values, "sfft");
    const T scale = T(1) / std::sqrt(T(cfg.M) * T(cfg.N));
    return {scale * (detail::dft_matrix<T>(cfg.M, +1) * y.values * detail::dft_matrix<T>(cfg.N, -1))};
}

/// Rectangular-pulse Heisenberg transform: slot n carries the unnormalized size-M IDFT of column n,
/// so ||s||^2 = M ||X_TF||^2.
template <typename T>
TimeSignal<T> heisenberg(const OTFSConfig &cfg, const TFGrid<T> &x)
{
    cfg.validate();
    detail::check_pulse(cfg);
    detail::check_dims(cfg, x.values, "heisenberg");
    const CMatrix<T> slots = detail::dft_matrix<T>(cfg.M, +1) * x.values;
    TimeSignal<T> s;
    s.samples = Eigen::Map<const CVector<T>>(slots.data(), slots.size());
    return s;
}

/// Matched-filter (rectangular) Wigner transform; exact inverse of heisenberg().
template <typename T>
TFGrid<T> wigner(const OTFSConfig &cfg, const TimeSignal<T> &r)
{
    cfg.validate();
    detail::check_pulse(cfg);
    if (r.samples.size() != cfg.frame_length())
        throw std::invalid_argument("wigner: signal length " + std::to_string(r.samples.size()) + " != M*N = " +
                                    std::to_string(cfg.frame_length()));
    const Eigen::Map<const CMatrix<T>> slots(r.samples.data(), cfg.M, cfg.N);
    return {(detail::dft_matrix<T>(cfg.M, -1) * slots) / T(cfg.M)};
}

namespace detail {

/// Cyclic delay by an arbitrary (fractional) number of samples via a frequency-domain phase ramp.
template <typename T>
CVector<T> fractional_shift(const CVector<T> &s, double shift_samples)
{
    const Eigen::Index n = s.size();
    Eigen::FFT<T> fft;
    std::vector<std::complex<T>> in(s.data(), s.data() + n), spec, out;
    fft.fwd(spec, in);
    for (Eigen::Index k = 0; k < n; ++k) {
        // Symmetric frequency index keeps the interpolant band-limited around DC.
        const double kk = (2 * k < n) ? double(k) : double(k - n);
        spec[std::size_t(k)] *= std::polar(T(1), T(-2.0 * kPi * kk * shift_samples / double(n)));
    }
    fft.inv(out, spec);
    return Eigen::Map<const CVector<T>>(out.data(), n);
}

template <typename T>
CVector<T> cyclic_shift(const CVector<T> &s, long long shift)
{
    const Eigen::Index n = s.size();
    CVector<T> out(n);
    for (Eigen::Index q = 0; q < n; ++q) {
        long long src = (static_cast<long long>(q) - shift) % n;
        if (src < 0)
            src += n;
        out(q) = s(static_cast<Eigen::Index>(src));
    }
    return out;
}

} // namespace detail

/// r(t) = sum_i g_i exp(j2pi nu_i (t - tau_i)) s(t - tau_i), evaluated at the frame's sample instants with
/// cyclic delays. Delays are rounded to the nearest sample unless cfg.fractional_delay is set.
template <typename T>
TimeSignal<T> apply_channel_time(const OTFSConfig &cfg, const TimeSignal<T> &s, const ChannelSnapshot &snap,
                                 std::span<const double> dopplers, DelayQuantization *quantization = nullptr)
{
    cfg.validate();
    if (s.samples.size() != cfg.frame_length())
        throw std::invalid_argument("apply_channel_time: signal length does not match M*N");
    if (dopplers.size() != snap.paths.size())
        throw std::invalid_argument("apply_channel_time: one Doppler value per path required");

    const double fs = cfg.sample_rate();
    const double frame = double(cfg.frame_length()) / fs;
    TimeSignal<T> r;
    r.start_time = s.start_time;
    r.samples = CVector<T>::Zero(s.samples.size());
    double max_q = 0.0;
    for (std::size_t i = 0; i < snap.paths.size(); ++i) {
        const auto &p = snap.paths[i];
        if (!(p.delay >= 0.0) || p.delay >= frame)
            throw std::invalid_argument("apply_channel_time: path delay outside [0, frame duration)");
        const double shift = p.delay * fs;
        CVector<T> delayed;
        if (cfg.fractional_delay) {
            delayed = detail::fractional_shift(s.samples, shift);
        } else {
            const double rounded = std::round(shift);
            max_q = std::max(max_q, std::abs(shift - rounded) / fs);
            delayed = detail::cyclic_shift(s.samples, static_cast<long long>(rounded));
        }
        const std::complex<T> g(T(p.gain.real()), T(p.gain.imag()));
        for (Eigen::Index q = 0; q < delayed.size(); ++q) {
            const double t = s.start_time + double(q) / fs;
            r.samples(q) += g * std::polar(T(1), T(2.0 * kPi * dopplers[i] * (t - p.delay))) * delayed(q);
        }
    }
    if (quantization)
        quantization->max_error = max_q;
    return r;
}

/// Sparse delay-Doppler response: one entry per path with coefficient g_i exp(-j2pi nu_i tau_i).
inline std::vector<DDPath> dd_response(const ChannelSnapshot &snap, std::span<const double> dopplers)
{
    if (dopplers.size() != snap.paths.size())
        throw std::invalid_argument("dd_response: one Doppler value per path required");
    std::vector<DDPath> out;
    out.reserve(snap.paths.size());
    for (std::size_t i = 0; i < snap.paths.size(); ++i) {
        const auto &p = snap.paths[i];
        out.push_back({p.delay, dopplers[i], p.gain * std::polar(1.0, -2.0 * kPi * dopplers[i] * p.delay)});
    }
    return out;
}

/// r(t) = sum_i h_i exp(j2pi nu_i t) s(t - tau_i): the delay-Doppler spreading integral over a sparse response,
/// evaluated at the sample instants with on-grid (rounded) cyclic delays.
template <typename T>
TimeSignal<T> apply_dd_response(const OTFSConfig &cfg, const TimeSignal<T> &s, std::span<const DDPath> response)
{
    cfg.validate();
    if (s.samples.size() != cfg.frame_length())
        throw std::invalid_argument("apply_dd_response: signal length does not match M*N");
    const double fs = cfg.sample_rate();
    TimeSignal<T> r;
    r.start_time = s.start_time;
    r.samples = CVector<T>::Zero(s.samples.size());
    for (const auto &p : response) {
        const auto shift = static_cast<long long>(std::round(p.delay * fs));
        const std::complex<T> h(T(p.coefficient.real()), T(p.coefficient.imag()));
        for (Eigen::Index q = 0; q < r.samples.size(); ++q) {
            long long src = (static_cast<long long>(q) - shift) % r.samples.size();
            if (src < 0)
                src += r.samples.size();
            const double t = s.start_time + double(q) / fs;
            r.samples(q) += h * std::polar(T(1), T(2.0 * kPi * p.doppler * t)) * s.samples(Eigen::Index(src));
        }
    }
    return r;
}

/// Integer (delay-sample, Doppler-bin) position of an on-grid path; throws if the path is off-grid.
inline std::pair<long long, long long> grid_position(const OTFSConfig &cfg, const DDPath &p, double tol = 1e-6)
{
    const double l = p.delay * cfg.sample_rate();
    const double k = p.doppler / cfg.doppler_resolution();
    if (std::abs(l - std::round(l)) > tol || std::abs(k - std::round(k)) > tol)
        throw std::invalid_argument("dd path is not on the delay-Doppler grid");
    return {std::llround(l), std::llround(k)};
}

/// Received DD grid for on-grid paths, computed directly in the DD domain as a twisted cyclic convolution:
/// each path shifts the grid by (l_i, k_i) with a unimodular phase, and wrap-around in delay carries a
/// Doppler-dependent slot phase. Valid for a zero frame start time.
template <typename T>
DDGrid<T> dd_channel_output(const OTFSConfig &cfg, const DDGrid<T> &x, std::span<const DDPath> response)
{
    cfg.validate();
    detail::check_dims(cfg, x.values, "dd_channel_output");
    const long long M = cfg.M, N = cfg.N, MN = M * N;
    DDGrid<T> y{CMatrix<T>::Zero(cfg.M, cfg.N)};
    for (const auto &path : response) {
        auto [shift, bins] = grid_position(cfg, path);
        shift = ((shift % MN) + MN) % MN;
        const long long slots = shift / M, rem = shift % M;
        const std::complex<T> h(T(path.coefficient.real()), T(path.coefficient.imag()));
        for (long long p = 0; p < M; ++p) {
            const long long src_l = p >= rem ? p - rem : p - rem + M;
            const long long slot_shift = p >= rem ? slots : slots + 1;
            const auto doppler_phase = std::polar(T(1), T(2.0 * kPi * double((bins * p) % MN) / double(MN)));
            for (long long k = 0; k < N; ++k) {
                const long long src_k = (((k - bins) % N) + N) % N;
                const auto slot_phase =
                    std::polar(T(1), T(-2.0 * kPi * double((slot_shift * src_k) % N) / double(N)));
                y.values(p, k) += h * doppler_phase * slot_phase * x.values(src_l, src_k);
            }
        }
    }
    return y;
}

/// H(f, t) = sum_i g_i exp(-j2pi nu_i tau_i) exp(-j2pi (f tau_i - nu_i t))
inline std::complex<double> tf_response(const ChannelSnapshot &snap, std::span<const double> dopplers, double f,
                                        double t)
{
    if (dopplers.size() != snap.paths.size())
        throw std::invalid_argument("tf_response: one Doppler value per path required");
    std::complex<double> h{0.0, 0.0};
    for (std::size_t i = 0; i < snap.paths.size(); ++i) {
        const auto &p = snap.paths[i];
        h += p.gain * std::polar(1.0, -2.0 * kPi * dopplers[i] * p.delay) *
             std::polar(1.0, -2.0 * kPi * (f * p.delay - dopplers[i] * t));
    }
    return h;
}

/// Full modulator chain DD -> time.
template <typename T>
TimeSignal<T> modulate(const OTFSConfig &cfg, const DDGrid<T> &x)
{
    return heisenberg(cfg, isfft(cfg, x));
}

/// Full demodulator chain time -> DD.
template <typename T>
DDGrid<T> demodulate(const OTFSConfig &cfg, const TimeSignal<T> &r)
{
    return sfft(cfg, wigner(cfg, r));
}

} // namespace ddcp::otfs
