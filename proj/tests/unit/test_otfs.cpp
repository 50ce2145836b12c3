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


#include "ddcp/otfs.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace ddcp;
using namespace ddcp::otfs;
using CM = CMatrix<double>;
using cd = std::complex<double>;

namespace {

OTFSConfig config(int m, int n)
{
    OTFSConfig c;
    c.M = m;
    c.N = n;
    return c;
}

CM random_grid(int m, int n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CM x(m, n);
    for (Eigen::Index i = 0; i < x.size(); ++i)
        x(i) = cd(g(rng), g(rng));
    return x;
}

// Direct evaluation of the defining double sums.
CM brute_isfft(const CM &x)
{
    const int M = int(x.rows()), N = int(x.cols());
    CM out = CM::Zero(M, N);
    for (int m = 0; m < M; ++m)
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < N; ++k)
                for (int l = 0; l < M; ++l)
                    out(m, n) += x(l, k) * std::polar(1.0, 2 * kPi * (double(n * k) / N - double(m * l) / M));
    return out / std::sqrt(double(M * N));
}

CM brute_sfft(const CM &y)
{
    const int M = int(y.rows()), N = int(y.cols());
    CM out = CM::Zero(M, N);
    for (int l = 0; l < M; ++l)
        for (int k = 0; k < N; ++k)
            for (int n = 0; n < N; ++n)
                for (int m = 0; m < M; ++m)
                    out(l, k) += y(m, n) * std::polar(1.0, -2 * kPi * (double(n * k) / N - double(m * l) / M));
    return out / std::sqrt(double(M * N));
}

double max_err(const CM &a, const CM &b) { return (a - b).cwiseAbs().maxCoeff(); }

ChannelSnapshot snap_of(std::vector<PathState> paths)
{
    ChannelSnapshot s;
    s.paths = std::move(paths);
    return s;
}

} // namespace

TEST_CASE("isfft", "[otfs]")
{
    const auto c = config(8, 8);
    CM delta = CM::Zero(8, 8);
    delta(0, 0) = 1.0;
    const CM tf = isfft(c, DDGrid<double>{delta}).values;
    CHECK((tf.array() - cd(1.0 / 8.0, 0.0)).abs().maxCoeff() < 1e-15);

    const CM x = random_grid(8, 8, 1);
    const CM y = isfft(c, DDGrid<double>{x}).values;
    CHECK(std::abs(y.squaredNorm() - x.squaredNorm()) / x.squaredNorm() < 1e-10);
    CHECK(max_err(y, brute_isfft(x)) < 1e-10);
    CHECK_THROWS_AS(isfft(config(4, 8), DDGrid<double>{x}), std::invalid_argument);
}

TEST_CASE("sfft", "[otfs]")
{
    const auto c = config(16, 8);
    const CM x = random_grid(16, 8, 2);
    CHECK(max_err(sfft(c, isfft(c, DDGrid<double>{x})).values, x) < 1e-10);
    CHECK(max_err(sfft(c, TFGrid<double>{x}).values, brute_sfft(x)) < 1e-10);

    const CM constant = CM::Constant(16, 8, cd(1.0, 0.0));
    CM impulse = CM::Zero(16, 8);
    impulse(0, 0) = std::sqrt(16.0 * 8.0);
    CHECK(max_err(sfft(c, TFGrid<double>{constant}).values, impulse) < 1e-12);
    CHECK_THROWS_AS(sfft(config(16, 4), TFGrid<double>{x}), std::invalid_argument);
}

TEST_CASE("isfft and sfft are inverse up to 64x64", "[otfs]")
{
    for (auto [m, n] : {std::pair{1, 1}, {3, 5}, {64, 16}, {64, 64}}) {
        const auto c = config(m, n);
        const CM x = random_grid(m, n, std::uint64_t(m * 100 + n));
        CHECK(max_err(sfft(c, isfft(c, DDGrid<double>{x})).values, x) < 1e-10);
        CHECK(max_err(isfft(c, sfft(c, TFGrid<double>{x})).values, x) < 1e-10);
    }
}

TEST_CASE("heisenberg and wigner", "[otfs]")
{
    const auto c = config(8, 4);
    CM one = CM::Zero(8, 4);
    one(0, 0) = 1.0;
    const auto s = heisenberg(c, TFGrid<double>{one}).samples;
    CHECK((s.head(8).array() - cd(1.0, 0.0)).abs().maxCoeff() < 1e-15);
    CHECK(s.tail(24).cwiseAbs().maxCoeff() == 0.0);

    const CM x = random_grid(8, 4, 3);
    const auto sx = heisenberg(c, TFGrid<double>{x});
    CHECK(std::abs(sx.samples.squaredNorm() - 8.0 * x.squaredNorm()) < 1e-10 * x.squaredNorm());
    CHECK(max_err(wigner(c, sx).values, x) < 1e-10);

    // A pure subcarrier tone confined to one slot demodulates to a single unit entry.
    const int m0 = 3, n0 = 2;
    TimeSignal<double> tone;
    tone.samples = CVector<double>::Zero(32);
    for (int q = 0; q < 8; ++q)
        tone.samples(n0 * 8 + q) = std::polar(1.0, 2 * kPi * m0 * q / 8.0);
    CM expect = CM::Zero(8, 4);
    expect(m0, n0) = 1.0;
    CHECK(max_err(wigner(c, tone).values, expect) < 1e-12);

    TimeSignal<double> zero;
    zero.samples = CVector<double>::Zero(32);
    CHECK(wigner(c, zero).values.cwiseAbs().maxCoeff() == 0.0);
    TimeSignal<double> shortsig;
    shortsig.samples = CVector<double>::Zero(31);
    CHECK_THROWS_AS(wigner(c, shortsig), std::invalid_argument);
}

TEST_CASE("time-domain channel application", "[otfs]")
{
    const auto c = config(16, 8);
    const double fs = c.sample_rate();
    const CM x = random_grid(16, 8, 4);
    const auto s = modulate(c, DDGrid<double>{x});

    SECTION("identity channel")
    {
        const std::vector<double> nu{0.0};
        const auto r = apply_channel_time(c, s, snap_of({{0, 1.0, 0.0}}), nu);
        CHECK((r.samples - s.samples).cwiseAbs().maxCoeff() == 0.0);
        CHECK(max_err(demodulate(c, r).values, x) < 1e-8);
    }
    SECTION("integer delay is an exact cyclic shift")
    {
        const std::vector<double> nu{0.0};
        const auto r = apply_channel_time(c, s, snap_of({{0, 1.0, 3.0 / fs}}), nu);
        for (Eigen::Index q = 0; q < s.samples.size(); ++q)
            CHECK(r.samples(q) == s.samples((q - 3 + s.samples.size()) % s.samples.size()));
    }
    SECTION("two Doppler bins shift the DD grid by two along the Doppler axis")
    {
        const std::vector<double> nu{2 * c.doppler_resolution()};
        const auto snap = snap_of({{0, 1.0, 0.0}});
        const CM y = demodulate(c, apply_channel_time(c, s, snap, nu)).values;
        const auto resp = dd_response(snap, nu);
        CHECK(max_err(y, dd_channel_output(c, DDGrid<double>{x}, resp).values) < 1e-6);
        // Magnitudes are the input rolled by two Doppler bins.
        for (int l = 0; l < 16; ++l)
            for (int k = 0; k < 8; ++k)
                CHECK(std::abs(std::abs(y(l, k)) - std::abs(x(l, (k + 6) % 8))) < 1e-9);
    }
    SECTION("delays beyond the frame are rejected")
    {
        const std::vector<double> nu{0.0};
        CHECK_THROWS_AS(apply_channel_time(c, s, snap_of({{0, 1.0, 1.0}}), nu), std::invalid_argument);
    }
    SECTION("off-grid delays are rounded and the error reported")
    {
        const std::vector<double> nu{0.0};
        DelayQuantization q;
        apply_channel_time(c, s, snap_of({{0, 1.0, 2.3 / fs}}), nu, &q);
        CHECK(q.max_error == Catch::Approx(0.3 / fs).epsilon(1e-9));
    }
}

TEST_CASE("sparse delay-Doppler response", "[otfs]")
{
    const std::vector<double> nu{500.0};
    CHECK(std::abs(dd_response(snap_of({{0, 1.0, 0.0}}), nu)[0].coefficient - 1.0) < 1e-15);
    const std::vector<double> nu2{1000.0};
    CHECK(std::abs(dd_response(snap_of({{0, 1.0, 0.25e-3}}), nu2)[0].coefficient - cd(0.0, -1.0)) < 1e-12);

    const auto c = config(16, 8);
    const double fs = c.sample_rate(), dnu = c.doppler_resolution();
    const auto snap = snap_of({{0, cd(0.5, 0.2), 1.0 / fs}, {1, cd(-0.1, 0.7), 4.0 / fs}, {2, cd(0.3, 0.0), 9.0 / fs}});
    const std::vector<double> nus{dnu, -2 * dnu, 3 * dnu};
    const auto resp = dd_response(snap, nus);
    CHECK(resp.size() == 3);
    const auto s = modulate(c, DDGrid<double>{random_grid(16, 8, 5)});
    const auto direct = apply_channel_time(c, s, snap, nus);
    const auto sparse = apply_dd_response(c, s, std::span<const DDPath>(resp));
    CHECK((direct.samples - sparse.samples).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("time-frequency response", "[otfs]")
{
    const std::vector<double> still{0.0, 0.0};
    const auto two = snap_of({{0, cd(0.4, 0.1), 1e-6}, {1, cd(0.2, -0.3), 3e-6}});
    CHECK(std::abs(tf_response(two, still, 1e4, 0.0) - tf_response(two, still, 1e4, 0.37)) < 1e-12);
    const std::vector<double> zero{0.0};
    for (double f : {0.0, 1e3, 2.5e5})
        for (double t : {0.0, 1e-3, 0.2})
            CHECK(std::abs(tf_response(snap_of({{0, 1.0, 0.0}}), zero, f, t) - 1.0) < 1e-15);

    // DFT oracle: on-grid delays, evaluated on subcarriers at a fixed time.
    const auto c = config(8, 4);
    const double fs = c.sample_rate(), t0 = 2e-4;
    const auto snap = snap_of({{0, cd(0.9, 0.1), 0.0}, {1, cd(-0.3, 0.4), 2.0 / fs}, {2, cd(0.1, 0.2), 5.0 / fs}});
    const std::vector<double> nus{120.0, -340.0, 55.0};
    CVector<double> impulse = CVector<double>::Zero(8);
    for (const auto &p : dd_response(snap, nus))
        impulse(Eigen::Index(std::llround(p.delay * fs))) += p.coefficient * std::polar(1.0, 2 * kPi * p.doppler * t0);
    for (int m = 0; m < 8; ++m) {
        cd dft = 0.0;
        for (int l = 0; l < 8; ++l)
            dft += impulse(l) * std::polar(1.0, -2 * kPi * m * l / 8.0);
        CHECK(std::abs(tf_response(snap, nus, m * c.subcarrier_spacing, t0) - dft) < 1e-8);
    }
}

TEST_CASE("on-grid paths act as twisted cyclic shifts", "[otfs]")
{
    const auto c = config(8, 4);
    const double fs = c.sample_rate(), dnu = c.doppler_resolution();
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> l(0, 7), k(-3, 3);
    for (int trial = 0; trial < 10; ++trial) {
        const CM x = random_grid(8, 4, 100 + std::uint64_t(trial));
        const int li = l(rng), ki = k(rng);
        const auto snap = snap_of({{0, std::polar(1.0, 0.3 * trial), li / fs}});
        const std::vector<double> nu{ki * dnu};
        const CM y = demodulate(c, apply_channel_time(c, modulate(c, DDGrid<double>{x}), snap, nu)).values;
        CHECK(max_err(y, dd_channel_output(c, DDGrid<double>{x}, dd_response(snap, nu)).values) < 1e-8);
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 4; ++b)
                CHECK(std::abs(std::abs(y(a, b)) - std::abs(x((a - li + 8) % 8, ((b - ki) % 4 + 4) % 4))) < 1e-9);
    }
}

TEST_CASE("configuration checks", "[otfs]")
{
    OTFSConfig c;
    CHECK(c.M == 64);
    CHECK(c.N == 16);
    CHECK(c.symbol_duration() * c.subcarrier_spacing == 1.0);
    c.M = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.subcarrier_spacing = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
