#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "specvote/redundancy.hpp"
#include "specvote/spectral.hpp"

namespace specvote {

// ---------------------------------------------------------------------------
// Profiles and faults
// ---------------------------------------------------------------------------

/// Target spectrum for a synthetic run: per-band SPL and duration.
struct SpectrumProfile {
    std::string name;
    std::vector<double> band_targets_db;  // aligned with the band set
    double duration_s = 10.0;

    double overall_db() const { return overall_level_db(band_targets_db); }
};

/// Flat profile, the nominal chamber stand-in (no vehicle spectra published).
inline SpectrumProfile flat_profile(double level_db = 140.0, double duration_s = 10.0,
                                    std::size_t n_bands = 10, std::string name = "flat") {
    SpectrumProfile p;
    p.name = std::move(name);
    p.band_targets_db.assign(n_bands, level_db);
    p.duration_s = duration_s;
    return p;
}

enum class TestTier { Qualification, Acceptance, LowLevel };

/// Acoustic test tier: overall level ceiling and run duration.
struct TestProfile {
    TestTier tier = TestTier::Qualification;
    double max_overall_db = 156.0;
    double duration_s = 120.0;
};

/// The three standard tiers: Qualification 156 dB / 120 s, Acceptance
/// 153 dB / 60 or 90 s, LowLevel 150 dB / 30 s.
inline TestProfile test_profile(TestTier tier, double duration_s = 0.0) {
    TestProfile p;
    p.tier = tier;
    switch (tier) {
        case TestTier::Qualification:
            p.max_overall_db = 156.0;
            p.duration_s = 120.0;
            if (duration_s != 0.0 && duration_s != 120.0) {
                throw std::invalid_argument("qualification test runs 120 s");
            }
            break;
        case TestTier::Acceptance:
            p.max_overall_db = 153.0;
            p.duration_s = duration_s == 0.0 ? 60.0 : duration_s;
            if (p.duration_s != 60.0 && p.duration_s != 90.0) {
                throw std::invalid_argument("acceptance test runs 60 or 90 s");
            }
            break;
        case TestTier::LowLevel:
            p.max_overall_db = 150.0;
            p.duration_s = 30.0;
            if (duration_s != 0.0 && duration_s != 30.0) {
                throw std::invalid_argument("low level test runs 30 s");
            }
            break;
    }
    return p;
}

/// Scripted sensor fault: gain applied to one channel over [start_s, end_s).
/// gain < 1 reads low, gain > 1 reads high, gain = 0 is a dropout.
struct FaultSpec {
    int channel_id = 1;
    double gain = 1.0;
    double start_s = 0.0;
    double end_s = 0.0;
};

// ---------------------------------------------------------------------------
// Deterministic generation
// ---------------------------------------------------------------------------

namespace detail {
/// Uniform [0,1) from raw engine ticks; identical streams on every platform
/// (std::uniform_real_distribution is not bit-portable).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}
} // namespace detail

/// Band-level synthesis: one frame per window, each band at
/// target + U(-jitter_db, +jitter_db), independently per channel and window.
/// The jitter models the chamber's spatial non-uniformity. Same seed, same
/// output.
inline std::vector<MultichannelFrame> synth_band_levels(const SpectrumProfile& profile,
                                                        int n_channels, double jitter_db,
                                                        std::uint64_t seed,
                                                        double window_s = 0.5) {
    if (jitter_db < 0.0) throw std::invalid_argument("synth_band_levels: jitter_db must be >= 0");
    if (n_channels < 1) throw std::invalid_argument("synth_band_levels: need >= 1 channel");
    if (window_s <= 0.0) throw std::invalid_argument("synth_band_levels: window_s must be > 0");

    std::mt19937_64 rng(seed);
    const auto n_windows = static_cast<std::size_t>(std::floor(profile.duration_s / window_s + 1e-9));
    std::vector<MultichannelFrame> frames(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        frames[w].start_s = static_cast<double>(w) * window_s;
        frames[w].channels.resize(n_channels);
        for (int c = 0; c < n_channels; ++c) {
            BandLevels& ch = frames[w].channels[c];
            ch.channel_id = c + 1;
            ch.levels_db.resize(profile.band_targets_db.size());
            for (std::size_t b = 0; b < ch.levels_db.size(); ++b) {
                const double noise =
                    jitter_db == 0.0 ? 0.0 : detail::uniform(rng, -jitter_db, jitter_db);
                ch.levels_db[b] = profile.band_targets_db[b] + noise;
            }
            ch.overall_db = overall_level_db(ch.levels_db);
        }
    }
    return frames;
}

/// Waveform synthesis: per channel, a sum of random-phase sinusoids spanning
/// each band (realized as one inverse FFT on a power-of-two grid, then
/// truncated to the requested duration). Each band's total mean-square
/// pressure matches its target; the noise is independent across channels.
inline MultichannelSignal synth_waveform(const SpectrumProfile& profile, int n_channels,
                                         double sample_rate, std::uint64_t seed,
                                         const OctaveBands& bands = default_octave_bands()) {
    if (n_channels < 1) throw std::invalid_argument("synth_waveform: need >= 1 channel");
    if (bands.size() != profile.band_targets_db.size()) {
        throw std::invalid_argument("synth_waveform: profile has " +
                                    std::to_string(profile.band_targets_db.size()) +
                                    " band targets for " + std::to_string(bands.size()) +
                                    " bands");
    }
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < bands.size(); ++b) {
        if (profile.band_targets_db[b] != -inf && bands.edges_high[b] > sample_rate / 2.0) {
            throw std::invalid_argument("synth_waveform: band at " +
                                        std::to_string(bands.centers[b]) +
                                        " Hz exceeds Nyquist; raise sample_rate");
        }
    }

    const auto n_samples = static_cast<std::size_t>(std::llround(profile.duration_s * sample_rate));
    const std::size_t n_fft = fft::next_power_of_two(std::max<std::size_t>(n_samples, 2));
    const double grid_hz = sample_rate / static_cast<double>(n_fft);

    MultichannelSignal signal;
    signal.sample_rate = sample_rate;
    signal.channels.resize(n_channels);

    std::mt19937_64 rng(seed);
    std::vector<std::complex<double>> spectrum;
    for (int c = 0; c < n_channels; ++c) {
        spectrum.assign(n_fft, {0.0, 0.0});
        for (std::size_t b = 0; b < bands.size(); ++b) {
            if (profile.band_targets_db[b] == -inf) continue;
            const double bw = bands.edges_high[b] - bands.edges_low[b];
            const double inset = 0.05 * bw;  // keeps analysis leakage inside the band
            const double lo = bands.edges_low[b] + inset;
            const double hi = bands.edges_high[b] - inset;
            const auto k_first = static_cast<std::size_t>(std::ceil(lo / grid_hz));
            const auto k_last = static_cast<std::size_t>(std::floor(hi / grid_hz));
            if (k_first > k_last || k_last >= n_fft / 2) {
                throw std::invalid_argument("synth_waveform: band at " +
                                            std::to_string(bands.centers[b]) +
                                            " Hz resolves no grid frequency");
            }
            const std::size_t k_count = k_last - k_first + 1;
            const double p_rms = kReferencePressurePa *
                                 std::pow(10.0, profile.band_targets_db[b] / 20.0);
            // K sinusoids of amplitude a: K * a^2 / 2 = p_rms^2
            const double amp = p_rms * std::sqrt(2.0 / static_cast<double>(k_count));
            for (std::size_t k = k_first; k <= k_last; ++k) {
                const double phase = detail::uniform(rng, 0.0, 2.0 * kPi);
                const std::complex<double> coeff =
                    std::polar(amp * static_cast<double>(n_fft) / 2.0, phase);
                spectrum[k] = coeff;
                spectrum[n_fft - k] = std::conj(coeff);
            }
        }
        fft::transform(spectrum, /*inverse=*/true);
        auto& samples = signal.channels[c];
        samples.resize(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) samples[i] = spectrum[i].real();
    }
    return signal;
}

// ---------------------------------------------------------------------------
// Fault injection
// ---------------------------------------------------------------------------

inline constexpr double kSilenceFloorDb = -80.0;

namespace detail {
inline void check_fault(const FaultSpec& fault, int n_channels, double duration_s) {
    if (fault.channel_id < 1 || fault.channel_id > n_channels) {
        throw std::invalid_argument("inject_fault: channel " + std::to_string(fault.channel_id) +
                                    " does not exist (1.." + std::to_string(n_channels) + ")");
    }
    if (fault.gain < 0.0) throw std::invalid_argument("inject_fault: gain must be >= 0");
    if (!(fault.start_s >= 0.0) || !(fault.start_s < fault.end_s) ||
        fault.end_s > duration_s + 1e-9) {
        throw std::invalid_argument("inject_fault: need 0 <= start < end <= duration");
    }
}
} // namespace detail

/// Band-level fault: adds 20*log10(gain) dB to the channel's bands over
/// windows starting inside [start_s, end_s). A dropout (gain 0) drops the
/// bands by silence_floor_db instead. Faults compose in application order.
inline void inject_fault(std::vector<MultichannelFrame>& frames, const FaultSpec& fault,
                         double silence_floor_db = kSilenceFloorDb) {
    if (frames.empty()) return;
    const double spacing =
        frames.size() > 1 ? frames[1].start_s - frames[0].start_s : fault.end_s;
    detail::check_fault(fault, static_cast<int>(frames.front().n_channels()),
                        frames.back().start_s + spacing);
    const double delta = fault.gain == 0.0 ? silence_floor_db : 20.0 * std::log10(fault.gain);
    for (auto& frame : frames) {
        if (frame.start_s < fault.start_s || frame.start_s >= fault.end_s) continue;
        BandLevels& ch = frame.channels[fault.channel_id - 1];
        for (double& level : ch.levels_db) level += delta;
        ch.overall_db = overall_level_db(ch.levels_db);
    }
}

/// Waveform fault: multiplies the channel's samples by gain over the interval.
inline void inject_fault(MultichannelSignal& signal, const FaultSpec& fault) {
    detail::check_fault(fault, static_cast<int>(signal.n_channels()), signal.duration_s());
    auto& samples = signal.channels[fault.channel_id - 1];
    const auto first = static_cast<std::size_t>(std::llround(fault.start_s * signal.sample_rate));
    const auto last = std::min(
        samples.size(), static_cast<std::size_t>(std::llround(fault.end_s * signal.sample_rate)));
    for (std::size_t i = first; i < last; ++i) samples[i] *= fault.gain;
}

// ---------------------------------------------------------------------------
// The five built-in fault scenarios
// ---------------------------------------------------------------------------

/// One stretch of expected non-Good verdicts for a channel.
struct ExpectedSpan {
    int channel_id = 0;
    Status status = Status::Good;
    double from_s = 0.0;
    double to_s = 0.0;
};

struct ScenarioOptions {
    std::uint64_t seed = 1;
    double jitter_db = 1.0;      // chamber non-uniformity bound
    double window_s = 0.5;
    double duration_s = 10.0;
    double nominal_db = 140.0;   // flat per-band target
    int n_channels = 6;
    double gain_low = 0.25;      // -12 dB, well past the 3 dB threshold
    double gain_high = 2.0;      // +6 dB
};

struct BuiltinScenario {
    int index = 0;
    std::string description;
    std::vector<FaultSpec> faults;
    std::vector<ExpectedSpan> expected;
    std::vector<MultichannelFrame> frames;  // band-level synthesis with faults applied
};

/// Fault scripts for the built-in scenarios 1..5.
inline std::vector<FaultSpec> scenario_faults(int index, const ScenarioOptions& opt = {}) {
    switch (index) {
        case 1: return {{5, opt.gain_low, 4.0, opt.duration_s}};
        case 2: return {{2, opt.gain_high, 2.5, opt.duration_s}};
        case 3: return {{6, opt.gain_low, 3.5, opt.duration_s}};
        case 4:
            return {{2, opt.gain_high, 2.5, opt.duration_s}, {5, opt.gain_low, 4.0, opt.duration_s}};
        case 5:
            return {{2, opt.gain_low, 1.0, opt.duration_s}, {6, opt.gain_low, 3.5, opt.duration_s}};
        default:
            throw std::out_of_range("scenario index " + std::to_string(index) +
                                    " out of range (1..5)");
    }
}

inline BuiltinScenario builtin_scenario(int index, const ScenarioOptions& opt = {}) {
    BuiltinScenario s;
    s.index = index;
    s.faults = scenario_faults(index, opt);
    switch (index) {
        case 1: s.description = "channel 5 low from 4 s"; break;
        case 2: s.description = "channel 2 high from 2.5 s"; break;
        case 3: s.description = "channel 6 low from 3.5 s"; break;
        case 4: s.description = "channel 2 high from 2.5 s, channel 5 low from 4 s"; break;
        case 5: s.description = "channel 2 low from 1 s, channel 6 low from 3.5 s"; break;
        default: break;
    }
    for (const FaultSpec& f : s.faults) {
        s.expected.push_back({f.channel_id,
                              f.gain < 1.0 ? Status::BadLow : Status::BadHigh,
                              f.start_s, f.end_s});
    }
    s.frames = synth_band_levels(flat_profile(opt.nominal_db, opt.duration_s),
                                 opt.n_channels, opt.jitter_db,
                                 opt.seed + static_cast<std::uint64_t>(index),
                                 opt.window_s);
    for (const FaultSpec& f : s.faults) inject_fault(s.frames, f);
    return s;
}

/// Expected status of a channel at window start time t under a timeline.
inline Status expected_status_at(const std::vector<ExpectedSpan>& expected, int channel_id,
                                 double t) {
    for (const ExpectedSpan& span : expected) {
        if (span.channel_id == channel_id && t >= span.from_s && t < span.to_s) {
            return span.status;
        }
    }
    return Status::Good;
}

struct TimelineMismatch {
    double start_s = 0.0;
    int channel_id = 0;
    Status produced = Status::Good;
    Status expected = Status::Good;
};

/// Compare produced reports against an expected timeline. A verdict is
/// accepted if it matches the expectation at its window start or, within
/// tol_windows windows, the expectation on either side (a fault starting
/// mid-window quantizes to window granularity).
inline std::vector<TimelineMismatch> match_timeline(const std::vector<VoteReport>& reports,
                                                    const std::vector<ExpectedSpan>& expected,
                                                    double window_s, int tol_windows = 1) {
    std::vector<TimelineMismatch> mismatches;
    const double slack = tol_windows * window_s;
    for (const VoteReport& report : reports) {
        for (const ChannelVerdict& v : report.verdicts) {
            const double t = report.start_s;
            if (v.status == expected_status_at(expected, v.channel_id, t)) continue;
            if (v.status == expected_status_at(expected, v.channel_id, t - slack)) continue;
            if (v.status == expected_status_at(expected, v.channel_id, t + slack)) continue;
            mismatches.push_back({t, v.channel_id, v.status,
                                  expected_status_at(expected, v.channel_id, t)});
        }
    }
    return mismatches;
}

} // namespace specvote
