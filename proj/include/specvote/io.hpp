#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "specvote/redundancy.hpp"
#include "specvote/simulator.hpp"
#include "specvote/spectral.hpp"

namespace specvote {

/// Input parsing failure; where points at the file and line when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what) {}
};

namespace detail {

inline double parse_number(std::string_view text, const std::string& where) {
    // trim spaces and an optional CR
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() &&
           (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
        throw ParseError(where, "not a finite number: '" + std::string(text) + "'");
    }
    return value;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string strip(std::string_view sv) {
    while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
    while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r')) {
        sv.remove_suffix(1);
    }
    return std::string(sv);
}

/// Fixed significant-digit form; keeps report files byte-stable across runs.
inline std::string format_number(double value, int precision = 9) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, value);
    return buf;
}

/// Shortest form that parses back to the identical double. Used for the
/// time column: a 9-digit time would wobble the inferred step past the
/// 1 ppm uniformity bound a few seconds into a 48 kHz recording.
inline std::string format_exact(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV time series
// ---------------------------------------------------------------------------

/// Read a `time_s,ch1,...,chN` CSV. The sample rate is the reciprocal of the
/// median time step; steps off by more than 1 ppm reject the file.
inline MultichannelSignal read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open for reading");

    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1", "missing header row");
    auto header = detail::split(line, ',');
    if (header.size() < 2 || detail::strip(header[0]) != "time_s") {
        throw ParseError(path + ":1", "expected header time_s,ch1,...,chN");
    }
    const std::size_t n_channels = header.size() - 1;
    for (std::size_t c = 0; c < n_channels; ++c) {
        if (detail::strip(header[c + 1]) != "ch" + std::to_string(c + 1)) {
            throw ParseError(path + ":1", "expected column ch" + std::to_string(c + 1) +
                                              ", got '" + detail::strip(header[c + 1]) + "'");
        }
    }

    MultichannelSignal signal;
    signal.channels.resize(n_channels);
    std::vector<double> times;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip(line).empty()) continue;
        const auto cells = detail::split(line, ',');
        const std::string where = path + ":" + std::to_string(line_no);
        if (cells.size() != n_channels + 1) {
            throw ParseError(where, "expected " + std::to_string(n_channels + 1) +
                                        " columns, got " + std::to_string(cells.size()));
        }
        times.push_back(detail::parse_number(cells[0], where));
        for (std::size_t c = 0; c < n_channels; ++c) {
            signal.channels[c].push_back(detail::parse_number(cells[c + 1], where));
        }
    }
    if (times.size() < 2) throw ParseError(path, "need at least two sample rows");

    std::vector<double> steps(times.size() - 1);
    for (std::size_t i = 0; i + 1 < times.size(); ++i) steps[i] = times[i + 1] - times[i];
    std::vector<double> sorted = steps;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    if (median <= 0.0) throw ParseError(path, "time column is not strictly increasing");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (std::abs(steps[i] - median) > 1e-6 * median) {
            throw ParseError(path + ":" + std::to_string(i + 3),
                             "non-uniform time step " + detail::format_number(steps[i]) +
                                 " (median " + detail::format_number(median) + ")");
        }
    }
    signal.sample_rate = 1.0 / median;
    return signal;
}

/// Write the signal in the read_csv layout, 9 significant digits.
inline void write_csv(const MultichannelSignal& signal, const std::string& path,
                      int precision = 9) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "time_s";
    for (std::size_t c = 0; c < signal.n_channels(); ++c) out << ",ch" << (c + 1);
    out << "\n";
    for (std::size_t i = 0; i < signal.n_samples(); ++i) {
        out << detail::format_exact(static_cast<double>(i) / signal.sample_rate);
        for (const auto& ch : signal.channels) {
            out << ',' << detail::format_number(ch[i], precision);
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

// ---------------------------------------------------------------------------
// WAV ingestion
// ---------------------------------------------------------------------------

/// Read a linear-PCM multichannel WAV (16/24/32-bit integer or 32-bit float,
/// >= 3 channels). Integer samples normalize to [-1, 1); everything is then
/// scaled by calibration_scale to pascals.
inline MultichannelSignal read_wav(const std::string& path, double calibration_scale = 1.0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, "cannot open for reading");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());

    auto u16 = [&](std::size_t off) -> std::uint32_t {
        return static_cast<std::uint8_t>(bytes[off]) |
               (static_cast<std::uint8_t>(bytes[off + 1]) << 8);
    };
    auto u32 = [&](std::size_t off) -> std::uint32_t {
        return u16(off) | (u16(off + 2) << 16);
    };

    if (bytes.size() < 44 || std::string_view(bytes.data(), 4) != "RIFF" ||
        std::string_view(bytes.data() + 8, 4) != "WAVE") {
        throw ParseError(path, "not a RIFF/WAVE file");
    }

    std::uint32_t format = 0, n_channels = 0, sample_rate = 0, bits = 0;
    std::size_t data_off = 0, data_len = 0;
    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const std::string_view id(bytes.data() + off, 4);
        const std::uint32_t len = u32(off + 4);
        if (off + 8 + len > bytes.size()) throw ParseError(path, "truncated chunk " + std::string(id));
        if (id == "fmt ") {
            if (len < 16) throw ParseError(path, "fmt chunk too short");
            format = u16(off + 8);
            n_channels = u16(off + 10);
            sample_rate = u32(off + 12);
            bits = u16(off + 22);
            if (format == 0xFFFE) {  // extensible: subformat GUID leads with the real tag
                if (len < 40) throw ParseError(path, "extensible fmt chunk too short");
                format = u16(off + 32);
            }
        } else if (id == "data") {
            data_off = off + 8;
            data_len = len;
        }
        off += 8 + len + (len & 1);
    }
    if (sample_rate == 0 || data_off == 0) throw ParseError(path, "missing fmt or data chunk");
    if (format != 1 && format != 3) {
        throw ParseError(path, "compressed or unsupported format tag " + std::to_string(format) +
                                   " (need linear PCM or IEEE float)");
    }
    if (n_channels < 3) {
        throw ParseError(path, "need >= 3 channels for redundancy voting, got " +
                                   std::to_string(n_channels));
    }
    if (format == 1 && bits != 16 && bits != 24 && bits != 32) {
        throw ParseError(path, "unsupported PCM depth " + std::to_string(bits));
    }
    if (format == 3 && bits != 32) {
        throw ParseError(path, "unsupported float depth " + std::to_string(bits));
    }

    const std::size_t bytes_per_sample = bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * n_channels;
    const std::size_t n_frames = data_len / frame_bytes;

    MultichannelSignal signal;
    signal.sample_rate = sample_rate;
    signal.channels.assign(n_channels, std::vector<double>(n_frames));
    for (std::size_t i = 0; i < n_frames; ++i) {
        for (std::uint32_t c = 0; c < n_channels; ++c) {
            const std::size_t p = data_off + i * frame_bytes + c * bytes_per_sample;
            double v = 0.0;
            if (format == 3) {
                std::uint32_t raw = u32(p);
                float f;
                static_assert(sizeof f == 4);
                std::memcpy(&f, &raw, 4);
                v = f;
            } else if (bits == 16) {
                auto raw = static_cast<std::int16_t>(u16(p));
                v = raw / 32768.0;
            } else if (bits == 24) {
                std::int32_t raw = static_cast<std::int32_t>(u32(p) << 8) >> 8;
                v = raw / 8388608.0;
            } else {
                auto raw = static_cast<std::int32_t>(u32(p));
                v = raw / 2147483648.0;
            }
            signal.channels[c][i] = v * calibration_scale;
        }
    }
    return signal;
}

// ---------------------------------------------------------------------------
// Recording ingestion
// ---------------------------------------------------------------------------

enum class RecordingLayout { CsvTimeSeries, WavMultichannel };

inline RecordingLayout detect_layout(const std::string& path) {
    const std::size_t dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return ext == ".wav" ? RecordingLayout::WavMultichannel : RecordingLayout::CsvTimeSeries;
}

/// Read a recording for redundancy analysis, dispatching on the layout.
/// calibration_scale converts samples to pascals for either layout. Voting
/// needs at least three channels; fewer is rejected here, at ingestion.
inline MultichannelSignal read_recording(const std::string& path,
                                         double calibration_scale = 1.0) {
    MultichannelSignal signal;
    if (detect_layout(path) == RecordingLayout::WavMultichannel) {
        signal = read_wav(path, calibration_scale);
    } else {
        signal = read_csv(path);
        if (calibration_scale != 1.0) {
            for (auto& ch : signal.channels) {
                for (auto& v : ch) v *= calibration_scale;
            }
        }
    }
    if (signal.n_channels() < 3) {
        throw ParseError(path, "redundancy analysis needs >= 3 channels, got " +
                                   std::to_string(signal.n_channels()));
    }
    return signal;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline std::string consensus_path_for(const std::string& report_path) {
    const std::size_t dot = report_path.find_last_of('.');
    const std::size_t slash = report_path.find_last_of("/\\");
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        return report_path.substr(0, dot) + ".consensus" + report_path.substr(dot);
    }
    return report_path + ".consensus";
}

/// Emit verdicts as CSV, one row per (window, channel), plus a per-window
/// consensus sidecar next to it. Column order is part of the contract.
inline void write_report(const std::vector<VoteReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "start_s,channel,status,max_dev_db,exceed_count,masked_overall_db\n";
    for (const VoteReport& r : reports) {
        for (std::size_t c = 0; c < r.verdicts.size(); ++c) {
            const ChannelVerdict& v = r.verdicts[c];
            out << detail::format_number(r.start_s) << ',' << v.channel_id << ','
                << to_string(v.status) << ',' << detail::format_number(v.max_dev_db) << ','
                << v.exceed_count << ',' << detail::format_number(r.masked_overall[c]) << "\n";
        }
    }
    if (!out) throw std::runtime_error(path + ": write failed");

    const std::string side = consensus_path_for(path);
    std::ofstream cons(side);
    if (!cons) throw std::runtime_error(side + ": cannot open for writing");
    cons << "start_s,n_good,consensus_overall_db,consensus_unreliable\n";
    for (const VoteReport& r : reports) {
        int n_good = 0;
        for (const ChannelVerdict& v : r.verdicts) {
            if (v.status == Status::Good) ++n_good;
        }
        cons << detail::format_number(r.start_s) << ',' << n_good << ','
             << detail::format_number(r.consensus_overall_db) << ','
             << (r.consensus_unreliable ? 1 : 0) << "\n";
    }
    if (!cons) throw std::runtime_error(side + ": write failed");
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
    VoterConfig voter;
    double window_s = 0.5;
    double hop_s = 0.5;
    double calibration_scale = 1.0;
    int n_channels = 6;
    double jitter_db = 1.0;
    double nominal_db = 140.0;
    std::uint64_t seed = 1;
    int scenario = 0;  // 0 = none
    std::string profile_path;
    double fault_gain_low = 0.25;
    double fault_gain_high = 2.0;
    double silence_floor_db = kSilenceFloorDb;

    void validate() const {
        voter.validate(n_channels);
        if (hop_s <= 0.0 || window_s <= 0.0 || hop_s > window_s) {
            throw std::invalid_argument("config: need 0 < hop_s <= window_s");
        }
        if (calibration_scale <= 0.0) {
            throw std::invalid_argument("config: calibration_scale must be > 0");
        }
        if (n_channels < 3) throw std::invalid_argument("config: n_channels must be >= 3");
    }

    ScenarioOptions scenario_options() const {
        ScenarioOptions opt;
        opt.seed = seed;
        opt.jitter_db = jitter_db;
        opt.window_s = window_s;
        opt.nominal_db = nominal_db;
        opt.n_channels = n_channels;
        opt.gain_low = fault_gain_low;
        opt.gain_high = fault_gain_high;
        return opt;
    }
};

/// Parse `key=value` configuration text. `#` starts a comment; unknown keys
/// and out-of-range values are errors naming the key; absent keys keep their
/// defaults.
inline RunConfig parse_config_text(const std::string& text, const std::string& where = "config") {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = detail::strip(line);
        if (stripped.empty()) continue;
        const std::string loc = where + ":" + std::to_string(line_no);
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) throw ParseError(loc, "expected key=value");
        const std::string key = detail::strip(stripped.substr(0, eq));
        const std::string value = detail::strip(stripped.substr(eq + 1));

        auto num = [&]() { return detail::parse_number(value, loc + " (" + key + ")"); };
        auto integer = [&]() {
            const double v = num();
            if (v != std::floor(v)) throw ParseError(loc, key + " must be an integer");
            return static_cast<int>(v);
        };

        if (key == "threshold_db") {
            cfg.voter.threshold_db = num();
            if (cfg.voter.threshold_db <= 0.0) throw ParseError(loc, "threshold_db must be > 0");
        } else if (key == "min_bands") {
            cfg.voter.min_bands = integer();
            if (cfg.voter.min_bands < 1) throw ParseError(loc, "min_bands must be >= 1");
        } else if (key == "max_faulty") {
            cfg.voter.max_faulty = integer();
        } else if (key == "debounce") {
            cfg.voter.debounce_windows = integer();
            if (cfg.voter.debounce_windows < 1) throw ParseError(loc, "debounce must be >= 1");
        } else if (key == "abs_floor_db") {
            cfg.voter.abs_floor_db = num();
        } else if (key == "window_s") {
            cfg.window_s = num();
            if (cfg.window_s <= 0.0) throw ParseError(loc, "window_s must be > 0");
        } else if (key == "hop_s") {
            cfg.hop_s = num();
            if (cfg.hop_s <= 0.0) throw ParseError(loc, "hop_s must be > 0");
        } else if (key == "calibration_scale") {
            cfg.calibration_scale = num();
            if (cfg.calibration_scale <= 0.0) {
                throw ParseError(loc, "calibration_scale must be > 0");
            }
        } else if (key == "n_channels") {
            cfg.n_channels = integer();
            if (cfg.n_channels < 3) throw ParseError(loc, "n_channels must be >= 3");
        } else if (key == "jitter_db") {
            cfg.jitter_db = num();
            if (cfg.jitter_db < 0.0) throw ParseError(loc, "jitter_db must be >= 0");
        } else if (key == "nominal_db") {
            cfg.nominal_db = num();
        } else if (key == "seed") {
            const double v = num();
            if (v < 0.0 || v != std::floor(v)) throw ParseError(loc, "seed must be a non-negative integer");
            cfg.seed = static_cast<std::uint64_t>(v);
        } else if (key == "scenario") {
            cfg.scenario = integer();
            if (cfg.scenario < 0 || cfg.scenario > 5) {
                throw ParseError(loc, "scenario must be 1..5 (0 = none)");
            }
        } else if (key == "profile") {
            cfg.profile_path = value;
        } else if (key == "fault_gain_low") {
            cfg.fault_gain_low = num();
            if (cfg.fault_gain_low < 0.0) throw ParseError(loc, "fault_gain_low must be >= 0");
        } else if (key == "fault_gain_high") {
            cfg.fault_gain_high = num();
            if (cfg.fault_gain_high < 0.0) throw ParseError(loc, "fault_gain_high must be >= 0");
        } else if (key == "silence_floor_db") {
            cfg.silence_floor_db = num();
        } else {
            throw ParseError(loc, "unknown key '" + key + "'");
        }
    }
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(where, e.what());
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open for reading");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

/// Stable key order; parse(serialize(cfg)) == cfg.
inline std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "threshold_db=" << detail::format_number(cfg.voter.threshold_db, 17) << "\n"
        << "min_bands=" << cfg.voter.min_bands << "\n"
        << "max_faulty=" << cfg.voter.max_faulty << "\n"
        << "debounce=" << cfg.voter.debounce_windows << "\n";
    if (std::isfinite(cfg.voter.abs_floor_db)) {
        out << "abs_floor_db=" << detail::format_number(cfg.voter.abs_floor_db, 17) << "\n";
    }
    out << "window_s=" << detail::format_number(cfg.window_s, 17) << "\n"
        << "hop_s=" << detail::format_number(cfg.hop_s, 17) << "\n"
        << "calibration_scale=" << detail::format_number(cfg.calibration_scale, 17) << "\n"
        << "n_channels=" << cfg.n_channels << "\n"
        << "jitter_db=" << detail::format_number(cfg.jitter_db, 17) << "\n"
        << "nominal_db=" << detail::format_number(cfg.nominal_db, 17) << "\n"
        << "seed=" << cfg.seed << "\n";
    if (cfg.scenario != 0) out << "scenario=" << cfg.scenario << "\n";
    if (!cfg.profile_path.empty()) out << "profile=" << cfg.profile_path << "\n";
    out << "fault_gain_low=" << detail::format_number(cfg.fault_gain_low, 17) << "\n"
        << "fault_gain_high=" << detail::format_number(cfg.fault_gain_high, 17) << "\n"
        << "silence_floor_db=" << detail::format_number(cfg.silence_floor_db, 17) << "\n";
    return out.str();
}

/// Parse a spectrum profile file: name=, duration_s=, band_targets_db=
/// comma-separated per-band SPL (one value per analysis band).
inline SpectrumProfile parse_profile(const std::string& path, std::size_t n_bands = 10) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open for reading");
    SpectrumProfile profile;
    profile.name = path;
    std::string line;
    std::size_t line_no = 0;
    bool have_targets = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string stripped = detail::strip(line);
        if (stripped.empty()) continue;
        const std::string loc = path + ":" + std::to_string(line_no);
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) throw ParseError(loc, "expected key=value");
        const std::string key = detail::strip(stripped.substr(0, eq));
        const std::string value = detail::strip(stripped.substr(eq + 1));
        if (key == "name") {
            profile.name = value;
        } else if (key == "duration_s") {
            profile.duration_s = detail::parse_number(value, loc);
            if (profile.duration_s <= 0.0) throw ParseError(loc, "duration_s must be > 0");
        } else if (key == "band_targets_db") {
            profile.band_targets_db.clear();
            for (const auto cell : detail::split(value, ',')) {
                profile.band_targets_db.push_back(detail::parse_number(cell, loc));
            }
            have_targets = true;
        } else {
            throw ParseError(loc, "unknown key '" + key + "'");
        }
    }
    if (!have_targets) throw ParseError(path, "missing band_targets_db");
    if (profile.band_targets_db.size() != n_bands) {
        throw ParseError(path, "band_targets_db needs " + std::to_string(n_bands) +
                                   " values, got " +
                                   std::to_string(profile.band_targets_db.size()));
    }
    return profile;
}

} // namespace specvote
