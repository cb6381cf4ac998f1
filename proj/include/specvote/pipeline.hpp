#pragma once

#include <vector>

#include "specvote/redundancy.hpp"
#include "specvote/spectral.hpp"

namespace specvote {

/// Full spectral stage: tile the signal into windows and integrate every
/// channel of every window into octave-band SPL.
inline std::vector<MultichannelFrame> analyze_signal(const MultichannelSignal& signal,
                                                     double window_s, double hop_s,
                                                     const OctaveBands& bands,
                                                     double calibration_scale = 1.0) {
    std::vector<MultichannelFrame> frames;
    for (const SampleFrame& sf : frame_stream(signal, window_s, hop_s)) {
        MultichannelFrame frame;
        frame.start_s = sf.start_s;
        frame.channels.reserve(sf.channels.size());
        for (std::size_t c = 0; c < sf.channels.size(); ++c) {
            frame.channels.push_back(analyze_channel(sf.channels[c], sf.sample_rate,
                                                     static_cast<int>(c) + 1, bands,
                                                     calibration_scale));
        }
        frames.push_back(std::move(frame));
    }
    return frames;
}

} // namespace specvote
