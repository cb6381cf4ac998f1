#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "specvote/spectral.hpp"

namespace specvote {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class Status { Good, BadLow, BadHigh };

inline const char* to_string(Status s) {
    switch (s) {
        case Status::Good: return "Good";
        case Status::BadLow: return "BadLow";
        case Status::BadHigh: return "BadHigh";
    }
    return "?";
}

/// One analysis window: band SPL for every channel, same band set each.
struct MultichannelFrame {
    double start_s = 0.0;
    std::vector<BandLevels> channels;  // channel ids 1..N in order

    std::size_t n_channels() const { return channels.size(); }
    std::size_t n_bands() const { return channels.empty() ? 0 : channels.front().levels_db.size(); }
};

struct ChannelVerdict {
    int channel_id = 0;
    Status status = Status::Good;
    int exceed_count = 0;     // bands beyond the threshold this window
    double max_dev_db = 0.0;  // signed deviation of largest magnitude
};

struct VoteReport {
    double start_s = 0.0;
    std::vector<ChannelVerdict> verdicts;
    std::vector<double> reference_db;               // per band
    std::vector<std::vector<double>> deviations_db; // [channel][band], signed
    std::vector<double> masked_overall;             // overall dB, exactly 0.0 where bad
    double consensus_overall_db = std::numeric_limits<double>::quiet_NaN();
    bool consensus_unreliable = false;
};

struct VoterConfig {
    double threshold_db = 3.0;
    int min_bands = 1;
    int max_faulty = 2;
    int debounce_windows = 1;
    // Optional absolute SPL floor: bands below it count as Low exceedances.
    // Disabled by default; the comparison is otherwise purely relative.
    double abs_floor_db = -std::numeric_limits<double>::infinity();

    void validate(std::size_t n_channels) const {
        if (threshold_db <= 0.0) throw std::invalid_argument("voter: threshold_db must be > 0");
        if (min_bands < 1) throw std::invalid_argument("voter: min_bands must be >= 1");
        if (debounce_windows < 1) throw std::invalid_argument("voter: debounce_windows must be >= 1");
        const int breakdown = (static_cast<int>(n_channels) - 1) / 2;
        if (max_faulty < 0 || max_faulty > breakdown) {
            throw std::invalid_argument("voter: max_faulty " + std::to_string(max_faulty) +
                                        " exceeds the median breakdown point " +
                                        std::to_string(breakdown) + " for N=" +
                                        std::to_string(n_channels));
        }
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

namespace detail {
inline void check_frame(const MultichannelFrame& frame) {
    if (frame.n_channels() < 3) {
        throw std::invalid_argument("redundancy: need >= 3 channels, got " +
                                    std::to_string(frame.n_channels()));
    }
    for (const auto& ch : frame.channels) {
        if (ch.levels_db.size() != frame.n_bands()) {
            throw std::invalid_argument("redundancy: channels carry different band sets");
        }
    }
}
} // namespace detail

/// Per-band median across channels; even N takes the midpoint of the two
/// central order statistics. Tolerates floor((N-1)/2) arbitrary outliers.
inline std::vector<double> reference_estimate(const MultichannelFrame& frame) {
    detail::check_frame(frame);
    const std::size_t n = frame.n_channels();
    std::vector<double> ref(frame.n_bands());
    std::vector<double> column(n);
    for (std::size_t b = 0; b < frame.n_bands(); ++b) {
        for (std::size_t c = 0; c < n; ++c) column[c] = frame.channels[c].levels_db[b];
        std::sort(column.begin(), column.end());
        ref[b] = (n % 2 == 1) ? column[n / 2]
                              : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
    return ref;
}

/// dev[c][b] = channel level - reference level.
inline std::vector<std::vector<double>> deviations(const MultichannelFrame& frame,
                                                   const std::vector<double>& reference_db) {
    detail::check_frame(frame);
    if (reference_db.size() != frame.n_bands()) {
        throw std::invalid_argument("deviations: reference has " +
                                    std::to_string(reference_db.size()) + " bands, frame has " +
                                    std::to_string(frame.n_bands()));
    }
    std::vector<std::vector<double>> dev(frame.n_channels(),
                                         std::vector<double>(frame.n_bands()));
    for (std::size_t c = 0; c < frame.n_channels(); ++c) {
        for (std::size_t b = 0; b < frame.n_bands(); ++b) {
            dev[c][b] = frame.channels[c].levels_db[b] - reference_db[b];
        }
    }
    return dev;
}

/// Classify one channel's deviation row. Good while fewer than min_bands
/// bands exceed the threshold; otherwise BadLow when strictly more exceeding
/// deviations are negative than not, else BadHigh (tie -> BadHigh).
/// levels_row is only consulted for the optional absolute floor.
inline ChannelVerdict classify_channel(const std::vector<double>& dev_row,
                                       const VoterConfig& cfg,
                                       int channel_id = 0,
                                       const std::vector<double>* levels_row = nullptr) {
    if (cfg.threshold_db <= 0.0) {
        throw std::invalid_argument("classify_channel: threshold_db must be > 0");
    }
    ChannelVerdict v;
    v.channel_id = channel_id;
    int negative = 0;
    int non_negative = 0;
    for (std::size_t b = 0; b < dev_row.size(); ++b) {
        const double d = dev_row[b];
        const bool below_floor =
            levels_row != nullptr && (*levels_row)[b] < cfg.abs_floor_db;
        if (std::abs(d) > cfg.threshold_db || below_floor) {
            ++v.exceed_count;
            if (d < 0.0 || below_floor) ++negative; else ++non_negative;
        }
        if (std::abs(d) > std::abs(v.max_dev_db)) v.max_dev_db = d;
    }
    if (v.exceed_count < cfg.min_bands) {
        v.status = Status::Good;
    } else {
        v.status = (negative > non_negative) ? Status::BadLow : Status::BadHigh;
    }
    return v;
}

/// Raw per-window statuses of prior windows, oldest first, for debouncing.
using VerdictHistory = std::vector<std::vector<Status>>;

/// Run one voting round: median reference, deviations, per-channel
/// classification, debounce against history, masking, consensus. A channel
/// is reported Bad only after debounce_windows consecutive bad raw rounds;
/// more than max_faulty simultaneous Bads flags the report
/// consensus-unreliable rather than silently answering.
/// raw_out, when given, receives the pre-debounce statuses for history keeping.
inline VoteReport vote_window(const MultichannelFrame& frame, const VoterConfig& cfg,
                              const VerdictHistory& history = {},
                              std::vector<Status>* raw_out = nullptr) {
    detail::check_frame(frame);
    cfg.validate(frame.n_channels());

    VoteReport report;
    report.start_s = frame.start_s;
    report.reference_db = reference_estimate(frame);
    report.deviations_db = deviations(frame, report.reference_db);

    const std::size_t n = frame.n_channels();
    report.verdicts.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        report.verdicts[c] = classify_channel(report.deviations_db[c], cfg,
                                              frame.channels[c].channel_id,
                                              &frame.channels[c].levels_db);
    }
    if (raw_out != nullptr) {
        raw_out->resize(n);
        for (std::size_t c = 0; c < n; ++c) (*raw_out)[c] = report.verdicts[c].status;
    }

    // debounce: Bad sticks only after debounce_windows consecutive bad raws
    if (cfg.debounce_windows > 1) {
        for (std::size_t c = 0; c < n; ++c) {
            if (report.verdicts[c].status == Status::Good) continue;
            int streak = 1;
            for (auto it = history.rbegin(); it != history.rend() && streak < cfg.debounce_windows; ++it) {
                if (c < it->size() && (*it)[c] != Status::Good) ++streak; else break;
            }
            if (streak < cfg.debounce_windows) report.verdicts[c].status = Status::Good;
        }
    }

    report.masked_overall.resize(n);
    int n_good = 0;
    double consensus_acc = 0.0;
    int n_bad = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (report.verdicts[c].status == Status::Good) {
            report.masked_overall[c] = frame.channels[c].overall_db;
            consensus_acc += frame.channels[c].overall_db;
            ++n_good;
        } else {
            report.masked_overall[c] = 0.0;
            ++n_bad;
        }
    }
    if (n_good > 0) report.consensus_overall_db = consensus_acc / n_good;
    report.consensus_unreliable = n_bad > cfg.max_faulty;
    return report;
}

/// Fold vote_window over a time-ordered frame sequence, threading the
/// debounce history. One report per frame; deterministic.
inline std::vector<VoteReport> run_pipeline(const std::vector<MultichannelFrame>& frames,
                                            const VoterConfig& cfg) {
    std::vector<VoteReport> reports;
    reports.reserve(frames.size());
    VerdictHistory history;
    for (const auto& frame : frames) {
        // raw statuses feed the history, not the debounced ones
        std::vector<Status> raw;
        reports.push_back(vote_window(frame, cfg, history, &raw));
        history.push_back(std::move(raw));
        if (history.size() > static_cast<std::size_t>(std::max(cfg.debounce_windows - 1, 0))) {
            history.erase(history.begin());
        }
    }
    return reports;
}

} // namespace specvote
