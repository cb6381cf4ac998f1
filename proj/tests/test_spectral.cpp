#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "oracles.hpp"
#include "specvote/spectral.hpp"

using namespace specvote;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SampleBlock make_block(std::vector<double> samples, double fs = 48000.0, int id = 1) {
    SampleBlock b;
    b.samples = std::move(samples);
    b.sample_rate = fs;
    b.channel_id = id;
    return b;
}

} // namespace

// ---------------------------------------------------------------------------
// hann_window
// ---------------------------------------------------------------------------

TEST_CASE("hann window of a constant block, L=4") {
    // 0.5*(1 - cos(2*pi*n/3)) evaluated by hand: [0, 0.75, 0.75, 0]
    auto out = hann_window(make_block({1.0, 1.0, 1.0, 1.0}));
    REQUIRE(out.samples.size() == 4);
    REQUIRE_THAT(out.samples[0], WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(out.samples[1], WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(out.samples[2], WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(out.samples[3], WithinAbs(0.0, 1e-15));
    // taper mean recorded for calibration: (0 + .75 + .75 + 0)/4
    REQUIRE_THAT(out.window_gain, WithinAbs(0.375, 1e-12));
}

TEST_CASE("hann window of zeros is zeros") {
    auto out = hann_window(make_block(std::vector<double>(16, 0.0)));
    for (double v : out.samples) REQUIRE(v == 0.0);
}

TEST_CASE("hann window endpoints are zero at L=2") {
    auto out = hann_window(make_block({1.0, 1.0}));
    REQUIRE_THAT(out.samples[0], WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(out.samples[1], WithinAbs(0.0, 1e-12));
}

TEST_CASE("hann window rejects degenerate blocks") {
    REQUIRE_THROWS_AS(hann_window(make_block({1.0})), std::invalid_argument);
    REQUIRE_THROWS_AS(hann_window(make_block({})), std::invalid_argument);
}

TEST_CASE("hann taper mean approaches 0.5 for long blocks") {
    auto out = hann_window(make_block(std::vector<double>(32768, 1.0)));
    // exact mean is 0.5*(L-1)/L
    REQUIRE_THAT(out.window_gain, WithinAbs(0.5 * 32767.0 / 32768.0, 1e-12));
    REQUIRE_THAT(out.window_gain, WithinAbs(0.5, 1e-4));
}

// ---------------------------------------------------------------------------
// fft_magnitude
// ---------------------------------------------------------------------------

TEST_CASE("fft magnitude of ones, N=4") {
    auto spec = fft_magnitude(make_block({1.0, 1.0, 1.0, 1.0}, 4.0));
    REQUIRE(spec.bins.size() == 3);
    REQUIRE_THAT(spec.bins[0], WithinAbs(4.0, 1e-12));
    REQUIRE_THAT(spec.bins[1], WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(spec.bins[2], WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(spec.bin_hz, WithinRel(1.0, 1e-15));
}

TEST_CASE("fft magnitude of zeros is zero") {
    auto spec = fft_magnitude(make_block(std::vector<double>(8, 0.0)));
    for (double m : spec.bins) REQUIRE(m == 0.0);
}

TEST_CASE("fft magnitude folds a full-cycle cosine onto one bin") {
    std::vector<double> x(8);
    for (std::size_t n = 0; n < 8; ++n) x[n] = std::cos(2.0 * kPi * n / 8.0);
    auto spec = fft_magnitude(make_block(std::move(x), 8.0));
    REQUIRE(spec.bins.size() == 5);
    REQUIRE_THAT(spec.bins[1], WithinAbs(8.0, 1e-12));  // 2 x |X_1| = 2 x 4
    for (std::size_t k : {0u, 2u, 3u, 4u}) REQUIRE_THAT(spec.bins[k], WithinAbs(0.0, 1e-12));
}

TEST_CASE("fft magnitude rejects non-power-of-two lengths") {
    REQUIRE_THROWS_AS(fft_magnitude(make_block(std::vector<double>(12, 1.0))),
                      std::invalid_argument);
}

TEST_CASE("fft magnitude matches the brute-force DFT on random signals") {
    oracle::Rng rng(11);
    for (std::size_t n : {2u, 4u, 8u, 16u, 32u, 64u}) {
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> x(n);
            for (auto& v : x) v = rng.uniform(-1.0, 1.0);
            auto expected = oracle::dft_magnitude_onesided(x);
            auto spec = fft_magnitude(make_block(x));
            REQUIRE(spec.bins.size() == expected.size());
            for (std::size_t k = 0; k < expected.size(); ++k) {
                REQUIRE_THAT(spec.bins[k], WithinAbs(expected[k], 1e-9 * (1.0 + expected[k])));
            }
        }
    }
}

TEST_CASE("Parseval holds against the brute-force DFT") {
    oracle::Rng rng(17);
    for (std::size_t n : {4u, 16u, 64u}) {
        for (int rep = 0; rep < 10; ++rep) {
            std::vector<double> x(n);
            for (auto& v : x) v = rng.uniform(-2.0, 2.0);
            const double time_power = oracle::sum_of_squares(x);
            const double freq_power =
                oracle::spectrum_power_two_sided(oracle::dft(x)) / static_cast<double>(n);
            REQUIRE_THAT(freq_power, WithinRel(time_power, 1e-9));

            // same identity through the library transform
            std::vector<std::complex<double>> buf(x.begin(), x.end());
            fft::transform(buf);
            REQUIRE_THAT(oracle::spectrum_power_two_sided(buf) / static_cast<double>(n),
                         WithinRel(time_power, 1e-9));
        }
    }
}

// ---------------------------------------------------------------------------
// octave bands
// ---------------------------------------------------------------------------

TEST_CASE("default octave bands carry the OBCF series 31.5 Hz .. 16 kHz") {
    auto bands = default_octave_bands();
    const std::vector<double> expected{31.5, 63.0, 125.0, 250.0, 500.0,
                                       1000.0, 2000.0, 4000.0, 8000.0, 16000.0};
    REQUIRE(bands.centers == expected);
}

TEST_CASE("octave bands are contiguous and half-open") {
    auto bands = default_octave_bands();
    for (std::size_t i = 0; i + 1 < bands.size(); ++i) {
        REQUIRE_THAT(bands.edges_high[i], WithinRel(bands.edges_low[i + 1], 1e-9));
    }
    // each nominal center sits inside its band
    for (std::size_t i = 0; i < bands.size(); ++i) {
        REQUIRE(bands.centers[i] >= bands.edges_low[i]);
        REQUIRE(bands.centers[i] < bands.edges_high[i]);
    }
    // power-of-two centers also satisfy low = c/sqrt(2), high = c*sqrt(2)
    for (std::size_t i = 2; i < bands.size(); ++i) {
        REQUIRE_THAT(bands.edges_low[i], WithinRel(bands.centers[i] / std::sqrt(2.0), 1e-12));
        REQUIRE_THAT(bands.edges_high[i], WithinRel(bands.centers[i] * std::sqrt(2.0), 1e-12));
    }
}

// ---------------------------------------------------------------------------
// band_levels
// ---------------------------------------------------------------------------

namespace {

/// Spectrum with chosen magnitudes on a rectangular-window footing.
MagnitudeSpectrum make_spectrum(std::vector<double> bins, double bin_hz, std::size_t fft_size) {
    MagnitudeSpectrum s;
    s.bins = std::move(bins);
    s.bin_hz = bin_hz;
    s.fft_size = fft_size;
    s.window_gain = 1.0;
    s.window_sumsq = static_cast<double>(fft_size);
    return s;
}

OctaveBands single_band(double lo, double hi, double center) {
    OctaveBands b;
    b.centers = {center};
    b.edges_low = {lo};
    b.edges_high = {hi};
    return b;
}

} // namespace

TEST_CASE("a bin at the reference pressure reads exactly 0 dB") {
    // Nyquist bin magnitude M contributes power M^2 / (N sum(w^2)).
    // N = 8, sum(w^2) = 8 (rect): M = pref * 8 makes the power pref^2 bit-exactly
    // (the *64 and /64 are exponent shifts), so the level is exactly 0 dB.
    const double m = kReferencePressurePa * 8.0;
    auto spec = make_spectrum({0.0, 0.0, 0.0, 0.0, m}, 1.0, 8);
    auto levels = band_levels(spec, single_band(3.5, 4.5, 4.0));
    REQUIRE(levels.levels_db[0] == 0.0);
    REQUIRE(levels.overall_db == 0.0);  // single band: overall equals the band exactly
}

TEST_CASE("ten bands at 146 dB give 156 dB overall") {
    std::vector<double> levels(10, 146.0);
    REQUIRE_THAT(overall_level_db(levels), WithinAbs(156.0, 1e-9));
}

TEST_CASE("a 1 Pa RMS bin reads 93.979 dB") {
    const double m = 1.0 * std::sqrt(2.0 * 8.0 * 8.0);  // RMS 1 Pa on an interior bin
    auto spec = make_spectrum({0.0, 0.0, m, 0.0, 0.0}, 1.0, 8);
    auto levels = band_levels(spec, single_band(1.5, 2.5, 2.0));
    REQUIRE_THAT(levels.levels_db[0], WithinAbs(93.979, 1e-3));
    REQUIRE_THAT(levels.levels_db[0], WithinAbs(oracle::spl_db(1.0), 1e-9));
}

TEST_CASE("an empty band raises an unresolvable-band error naming it") {
    auto spec = make_spectrum({0.0, 1.0, 1.0, 1.0, 1.0}, 100.0, 8);  // bins at 0,100,..,400 Hz
    auto bands = single_band(30.0, 60.0, 45.0);                      // no bin inside
    try {
        band_levels(spec, bands);
        FAIL("expected UnresolvableBandError");
    } catch (const UnresolvableBandError& e) {
        REQUIRE(e.band_centers == std::vector<double>{45.0});
    }
}

TEST_CASE("band partition is complete: band powers sum to spectrum power") {
    oracle::Rng rng(23);
    auto bands = default_octave_bands();
    const std::size_t n = 32768;
    std::vector<double> bins(n / 2 + 1, 0.0);
    const double bin_hz = 48000.0 / n;
    // random spectrum confined to the covered range
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const double f = k * bin_hz;
        if (f >= bands.edges_low.front() && f < bands.edges_high.back()) {
            bins[k] = rng.uniform(0.0, 1.0);
        }
    }
    auto spec = make_spectrum(bins, bin_hz, n);
    auto levels = band_levels(spec, bands);

    double total_band_power = 0.0;
    for (double l : levels.levels_db) total_band_power += std::pow(10.0, l / 10.0);
    double covered_power = 0.0;
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const double f = k * bin_hz;
        if (f >= bands.edges_low.front() && f < bands.edges_high.back()) {
            covered_power += bins[k] * bins[k] / 2.0;
        }
    }
    covered_power /= static_cast<double>(n) * static_cast<double>(n);
    covered_power /= kReferencePressurePa * kReferencePressurePa;
    REQUIRE_THAT(total_band_power, WithinRel(covered_power, 1e-9));
}

TEST_CASE("scaling samples shifts every band by exactly 20 log10(g)") {
    oracle::Rng rng(31);
    auto bands = default_octave_bands();
    std::vector<double> x(32768);
    for (auto& v : x) v = rng.uniform(-0.1, 0.1);

    for (double g : {2.0, 0.5, 7.3}) {
        auto base = band_levels(fft_magnitude(hann_window(make_block(x))), bands);
        std::vector<double> scaled = x;
        for (auto& v : scaled) v *= g;
        auto shifted = band_levels(fft_magnitude(hann_window(make_block(scaled))), bands);
        const double delta = 20.0 * std::log10(g);
        for (std::size_t b = 0; b < bands.size(); ++b) {
            REQUIRE_THAT(shifted.levels_db[b] - base.levels_db[b], WithinAbs(delta, 1e-9));
        }
    }
}

TEST_CASE("overall level never falls below the loudest band") {
    oracle::Rng rng(37);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> levels(10);
        for (auto& l : levels) l = rng.uniform(60.0, 160.0);
        const double overall = overall_level_db(levels);
        for (double l : levels) REQUIRE(overall >= l);
    }
}

TEST_CASE("windowed analysis of an on-grid sine reads its RMS level") {
    // full windowed path: hann over 24000 samples, zero-pad to 32768. The sine
    // sits on the padded grid so its (wider) kernel stays inside one band.
    const double fs = 48000.0;
    const std::size_t window_len = 24000;
    const double f0 = 683.0 * fs / 32768.0;  // ~1000.6 Hz, inside the 1 kHz band
    std::vector<double> x(window_len);
    const double amplitude = std::sqrt(2.0);  // RMS 1 Pa
    for (std::size_t n = 0; n < window_len; ++n) {
        x[n] = amplitude * std::cos(2.0 * kPi * f0 * n / fs);
    }
    auto levels = analyze_channel(std::span<const double>(x), fs, 1, default_octave_bands());
    REQUIRE_THAT(levels.levels_db[5], WithinAbs(oracle::spl_db(1.0), 0.02));
    // everything else is leakage, far below
    for (std::size_t b = 0; b < 10; ++b) {
        if (b != 5) REQUIRE(levels.levels_db[b] < oracle::spl_db(1.0) - 40.0);
    }
}

// ---------------------------------------------------------------------------
// frame_stream
// ---------------------------------------------------------------------------

namespace {
MultichannelSignal make_signal(std::size_t n_channels, double seconds, double fs) {
    MultichannelSignal s;
    s.sample_rate = fs;
    s.channels.assign(n_channels,
                      std::vector<double>(static_cast<std::size_t>(seconds * fs), 0.0));
    return s;
}
} // namespace

TEST_CASE("frame_stream tiles 10 s into twenty half-second frames") {
    auto frames = frame_stream(make_signal(6, 10.0, 48000.0), 0.5, 0.5);
    REQUIRE(frames.size() == 20);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        REQUIRE_THAT(frames[i].start_s, WithinAbs(0.5 * i, 1e-12));
        REQUIRE(frames[i].channels.size() == 6);
        REQUIRE(frames[i].channels[0].size() == 24000);
    }
}

TEST_CASE("frame_stream with overlap: 1 s window, 0.5 s hop gives 19 frames") {
    auto frames = frame_stream(make_signal(3, 10.0, 48000.0), 1.0, 0.5);
    REQUIRE(frames.size() == 19);
    REQUIRE_THAT(frames.back().start_s, WithinAbs(9.0, 1e-12));
}

TEST_CASE("frame_stream of an empty signal is empty") {
    MultichannelSignal s;
    s.sample_rate = 48000.0;
    REQUIRE(frame_stream(s, 0.5, 0.5).empty());
}

TEST_CASE("frame_stream rejects ragged channels") {
    auto s = make_signal(3, 1.0, 1000.0);
    s.channels[1].pop_back();
    REQUIRE_THROWS_AS(frame_stream(s, 0.5, 0.5), std::invalid_argument);
}

TEST_CASE("analysis fft size rounds the window up to a power of two") {
    REQUIRE(analysis_fft_size(0.5, 48000.0) == 32768);  // 24000 -> 32768
    REQUIRE(analysis_fft_size(0.5, 32768.0) == 16384);  // already a power of two
}
