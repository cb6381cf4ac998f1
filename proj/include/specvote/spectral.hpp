#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "specvote/fft.hpp"

namespace specvote {

inline constexpr double kReferencePressurePa = 20e-6;
inline constexpr double kPi = 3.141592653589793238462643383279502884;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One channel's worth of time-domain pressure samples.
/// window_gain / window_sumsq describe the taper already applied to the
/// samples (1.0 / L for the untapered case); fft_magnitude carries them
/// into the spectrum so band_levels can calibrate.
struct SampleBlock {
    std::vector<double> samples;   // pascals
    double sample_rate = 48000.0;  // Hz
    int channel_id = 1;
    double window_gain = 1.0;      // mean of the applied taper
    double window_sumsq = -1.0;    // sum of squared taper values; <0 = untapered (= L)

    double taper_sumsq() const {
        return window_sumsq >= 0.0 ? window_sumsq : static_cast<double>(samples.size());
    }
};

/// One-sided magnitude spectrum, raw DFT scale (bin k holds |X_k|, doubled
/// for 0 < k < N/2 to fold the negative frequencies).
struct MagnitudeSpectrum {
    std::vector<double> bins;
    double bin_hz = 0.0;
    double window_gain = 1.0;
    double window_sumsq = 0.0;  // sum of squared taper values over the frame
    std::size_t fft_size = 0;
    int channel_id = 1;
};

/// Contiguous half-open frequency bands [low, high) with nominal center labels.
struct OctaveBands {
    std::vector<double> centers;
    std::vector<double> edges_low;
    std::vector<double> edges_high;

    std::size_t size() const { return centers.size(); }
};

/// The standard octave series 31.5 Hz .. 16 kHz. Edges come from the exact
/// base-2 ladder anchored at 1 kHz (edge_i = 1000 * 2^(i - 5.5)) so adjacent
/// bands share an edge bit-exactly; centers carry the nominal OBCF labels.
inline OctaveBands default_octave_bands() {
    OctaveBands b;
    b.centers = {31.5, 63.0, 125.0, 250.0, 500.0, 1000.0,
                 2000.0, 4000.0, 8000.0, 16000.0};
    b.edges_low.resize(b.centers.size());
    b.edges_high.resize(b.centers.size());
    double edge = 1000.0 * std::pow(2.0, -5.5);
    for (std::size_t i = 0; i < b.centers.size(); ++i) {
        b.edges_low[i] = edge;
        edge = 1000.0 * std::pow(2.0, static_cast<double>(i) - 4.5);
        b.edges_high[i] = edge;
    }
    return b;
}

/// Per-band SPL for one channel.
struct BandLevels {
    std::vector<double> levels_db;  // dB re 20 uPa
    double overall_db = -std::numeric_limits<double>::infinity();
    int channel_id = 1;
};

/// Overall level of a set of band levels: Lmax + 10*log10(sum 10^((Li-Lmax)/10)).
/// The log-sum-exp form keeps a single band exact and guarantees
/// overall >= max(levels).
inline double overall_level_db(const std::vector<double>& levels_db) {
    const double inf = std::numeric_limits<double>::infinity();
    double lmax = -inf;
    for (double l : levels_db) lmax = std::max(lmax, l);
    if (lmax == -inf || levels_db.empty()) return -inf;
    double acc = 0.0;
    for (double l : levels_db) acc += std::pow(10.0, (l - lmax) / 10.0);
    return lmax + 10.0 * std::log10(acc);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Apply the Hann taper 0.5*(1 - cos(2*pi*n/(L-1))) in place of the samples.
/// Records the taper's mean and energy for downstream calibration.
inline SampleBlock hann_window(SampleBlock block) {
    const std::size_t len = block.samples.size();
    if (len < 2) {
        throw std::invalid_argument("hann_window: block length " + std::to_string(len) +
                                    " is degenerate (need >= 2 samples)");
    }
    double sum = 0.0;
    double sumsq = 0.0;
    for (std::size_t n = 0; n < len; ++n) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(n) /
                                               static_cast<double>(len - 1)));
        block.samples[n] *= w;
        sum += w;
        sumsq += w * w;
    }
    block.window_gain = sum / static_cast<double>(len);
    block.window_sumsq = sumsq;
    return block;
}

/// Append zeros up to fft_size. Taper bookkeeping is unchanged: the pad
/// carries no signal energy.
inline SampleBlock zero_pad(SampleBlock block, std::size_t fft_size) {
    if (fft_size < block.samples.size()) {
        throw std::invalid_argument("zero_pad: target size smaller than block");
    }
    if (block.window_sumsq < 0.0) {
        block.window_sumsq = static_cast<double>(block.samples.size());
    }
    block.samples.resize(fft_size, 0.0);
    return block;
}

/// One-sided magnitude of the DFT. bins[0] = |sum x|; interior bins are
/// doubled to fold the negative frequencies; the Nyquist bin is not.
inline MagnitudeSpectrum fft_magnitude(const SampleBlock& block) {
    const std::size_t n = block.samples.size();
    if (!fft::is_power_of_two(n)) {
        throw std::invalid_argument("fft_magnitude: length " + std::to_string(n) +
                                    " is not a power of two");
    }
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = block.samples[i];
    fft::transform(buf);

    MagnitudeSpectrum spec;
    spec.bins.resize(n / 2 + 1);
    spec.bins[0] = std::abs(buf[0]);
    for (std::size_t k = 1; k < n / 2; ++k) spec.bins[k] = 2.0 * std::abs(buf[k]);
    spec.bins[n / 2] = std::abs(buf[n / 2]);
    spec.bin_hz = block.sample_rate / static_cast<double>(n);
    spec.window_gain = block.window_gain;
    spec.window_sumsq = block.taper_sumsq();
    spec.fft_size = n;
    spec.channel_id = block.channel_id;
    return spec;
}

/// Raised when a requested band holds no FFT bin at the current resolution.
class UnresolvableBandError : public std::runtime_error {
public:
    UnresolvableBandError(std::string msg, std::vector<double> centers)
        : std::runtime_error(std::move(msg)), band_centers(std::move(centers)) {}
    std::vector<double> band_centers;
};

/// Integrate the spectrum into octave-band SPL. Bin k belongs to the band
/// with k*bin_hz in [low, high). Powers are normalized by N*sum(w^2), which
/// compensates the taper's coherent gain and its noise bandwidth in one
/// step: an on-bin sine of RMS p reads 10*log10(p^2/pref^2) and broadband
/// power integrates without the ENBW over-count.
inline BandLevels band_levels(const MagnitudeSpectrum& spec, const OctaveBands& bands,
                              double pref = kReferencePressurePa,
                              double calibration_scale = 1.0) {
    if (spec.bin_hz <= 0.0) {
        throw std::invalid_argument("band_levels: bin_hz must be positive");
    }
    if (spec.fft_size == 0 || spec.window_sumsq <= 0.0) {
        throw std::invalid_argument("band_levels: spectrum lacks calibration data");
    }

    const double norm = static_cast<double>(spec.fft_size) * spec.window_sumsq;
    const std::size_t nyquist = spec.bins.size() - 1;

    BandLevels out;
    out.channel_id = spec.channel_id;
    out.levels_db.resize(bands.size());
    std::vector<double> empty_centers;

    for (std::size_t b = 0; b < bands.size(); ++b) {
        const std::size_t k_first =
            static_cast<std::size_t>(std::ceil(bands.edges_low[b] / spec.bin_hz - 1e-12));
        double power = 0.0;
        std::size_t used = 0;
        for (std::size_t k = k_first; k < spec.bins.size(); ++k) {
            const double f = static_cast<double>(k) * spec.bin_hz;
            if (f < bands.edges_low[b]) continue;
            if (f >= bands.edges_high[b]) break;
            const double m = spec.bins[k] * calibration_scale;
            // interior magnitudes are folded (x2); their two-sided power is m^2/2
            power += (k == 0 || k == nyquist) ? m * m : m * m / 2.0;
            ++used;
        }
        if (used == 0) {
            empty_centers.push_back(bands.centers[b]);
            continue;
        }
        power /= norm;
        out.levels_db[b] = 10.0 * std::log10(power / (pref * pref));
    }

    if (!empty_centers.empty()) {
        std::ostringstream msg;
        msg << "band_levels: no FFT bin falls inside band(s)";
        for (double c : empty_centers) msg << " " << c << "Hz";
        msg << " at resolution " << spec.bin_hz << " Hz; raise fft_size or drop the band";
        throw UnresolvableBandError(msg.str(), std::move(empty_centers));
    }

    out.overall_db = overall_level_db(out.levels_db);
    return out;
}

// ---------------------------------------------------------------------------
// Framing
// ---------------------------------------------------------------------------

/// Synchronized multichannel recording, one sample vector per channel.
struct MultichannelSignal {
    std::vector<std::vector<double>> channels;
    double sample_rate = 48000.0;

    std::size_t n_channels() const { return channels.size(); }
    std::size_t n_samples() const { return channels.empty() ? 0 : channels.front().size(); }
    double duration_s() const {
        return sample_rate > 0.0 ? static_cast<double>(n_samples()) / sample_rate : 0.0;
    }
};

/// One analysis window across all channels; views into the source signal.
struct SampleFrame {
    double start_s = 0.0;
    double sample_rate = 48000.0;
    std::vector<std::span<const double>> channels;
};

/// Tile the signal into window_s-long frames every hop_s seconds, time-aligned
/// across channels. The trailing partial window is dropped. Frames reference
/// the signal's storage; the signal must outlive them.
inline std::vector<SampleFrame> frame_stream(const MultichannelSignal& signal,
                                             double window_s, double hop_s) {
    if (window_s <= 0.0 || hop_s <= 0.0) {
        throw std::invalid_argument("frame_stream: window_s and hop_s must be positive");
    }
    for (const auto& ch : signal.channels) {
        if (ch.size() != signal.n_samples()) {
            throw std::invalid_argument("frame_stream: channel lengths differ");
        }
    }

    std::vector<SampleFrame> frames;
    if (signal.channels.empty() || signal.n_samples() == 0) return frames;

    const auto window_len = static_cast<std::size_t>(std::llround(window_s * signal.sample_rate));
    const auto hop_len = static_cast<std::size_t>(std::llround(hop_s * signal.sample_rate));
    if (window_len == 0 || hop_len == 0) {
        throw std::invalid_argument("frame_stream: window/hop shorter than one sample");
    }

    for (std::size_t start = 0; start + window_len <= signal.n_samples(); start += hop_len) {
        SampleFrame f;
        f.start_s = static_cast<double>(start) / signal.sample_rate;
        f.sample_rate = signal.sample_rate;
        f.channels.reserve(signal.n_channels());
        for (const auto& ch : signal.channels) {
            f.channels.emplace_back(ch.data() + start, window_len);
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

/// FFT size used to analyze a window_s frame: smallest power of two holding
/// the frame (0.5 s at 48 kHz -> 32768); the tapered frame is zero-padded up.
inline std::size_t analysis_fft_size(double window_s, double sample_rate) {
    const auto window_len = static_cast<std::size_t>(std::llround(window_s * sample_rate));
    return fft::next_power_of_two(std::max<std::size_t>(window_len, 2));
}

/// Hann-taper, pad and integrate one channel of a frame into band SPL.
inline BandLevels analyze_channel(std::span<const double> samples, double sample_rate,
                                  int channel_id, const OctaveBands& bands,
                                  double calibration_scale = 1.0) {
    SampleBlock block;
    block.samples.assign(samples.begin(), samples.end());
    block.sample_rate = sample_rate;
    block.channel_id = channel_id;
    block = hann_window(std::move(block));
    block = zero_pad(std::move(block), fft::next_power_of_two(std::max<std::size_t>(samples.size(), 2)));
    return band_levels(fft_magnitude(block), bands, kReferencePressurePa, calibration_scale);
}

} // namespace specvote
