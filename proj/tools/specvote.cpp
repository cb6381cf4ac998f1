// specvote - N-channel acoustic redundancy management CLI.
//
// Subcommands:
//   simulate          synthesize scenario or profile data to CSV
//   analyze           run the spectral + voting pipeline on a recording
//   verify-scenarios  check the five built-in fault scenarios end to end
//
// Exit codes: 0 success, 1 verification failure, 2 usage or input error,
// 3 analysis finished but some window was consensus-unreliable.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "specvote/io.hpp"
#include "specvote/pipeline.hpp"
#include "specvote/simulator.hpp"

namespace {

using namespace specvote;

constexpr double kSampleRate = 48000.0;

/// Per-channel overall level series, before and after masking; the data
/// behind input/output plot pairs.
void write_channels_csv(const std::vector<MultichannelFrame>& frames,
                        const std::vector<VoteReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "start_s,channel,overall_db,masked_overall_db\n";
    for (std::size_t w = 0; w < frames.size(); ++w) {
        for (std::size_t c = 0; c < frames[w].channels.size(); ++c) {
            out << detail::format_number(frames[w].start_s) << ','
                << frames[w].channels[c].channel_id << ','
                << detail::format_number(frames[w].channels[c].overall_db) << ','
                << detail::format_number(reports[w].masked_overall[c]) << "\n";
        }
    }
}

void write_timeline_csv(const std::vector<ExpectedSpan>& expected, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "channel,status,from_s,to_s\n";
    for (const auto& span : expected) {
        out << span.channel_id << ',' << to_string(span.status) << ','
            << detail::format_number(span.from_s) << ',' << detail::format_number(span.to_s)
            << "\n";
    }
}

/// Scenario waveform for export: all channels sample the same acoustic field
/// (one synthesized base waveform), then per-channel faults are injected.
MultichannelSignal scenario_waveform(const BuiltinScenario& scenario, const RunConfig& cfg) {
    const auto base = synth_waveform(flat_profile(cfg.nominal_db, 10.0), 1, kSampleRate,
                                     cfg.seed + static_cast<std::uint64_t>(scenario.index));
    MultichannelSignal signal;
    signal.sample_rate = base.sample_rate;
    signal.channels.assign(cfg.n_channels, base.channels.front());
    for (const auto& fault : scenario.faults) inject_fault(signal, fault);
    return signal;
}

int cmd_simulate(int scenario_index, const std::string& profile_path, std::uint64_t seed,
                 const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    RunConfig cfg;
    cfg.seed = seed;

    if (scenario_index != 0) {
        auto opt = cfg.scenario_options();
        const auto scenario = builtin_scenario(scenario_index, opt);
        const auto signal = scenario_waveform(scenario, cfg);
        write_csv(signal, (std::filesystem::path(out_dir) / "input.csv").string());
        write_timeline_csv(scenario.expected,
                           (std::filesystem::path(out_dir) / "expected_timeline.csv").string());
        std::cout << "scenario " << scenario_index << " (" << scenario.description << "): wrote "
                  << out_dir << "/input.csv and expected_timeline.csv\n";
        return 0;
    }

    const auto profile = parse_profile(profile_path);
    auto signal = synth_waveform(profile, cfg.n_channels, kSampleRate, seed);
    write_csv(signal, (std::filesystem::path(out_dir) / "input.csv").string());
    std::cout << "profile " << profile.name << ": wrote " << out_dir << "/input.csv\n";
    return 0;
}

int cmd_analyze(const std::string& input, const std::string& config_path,
                const std::string& out_dir) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config(config_path);
    std::filesystem::create_directories(out_dir);

    const auto signal = read_recording(input, cfg.calibration_scale);

    // calibration already applied to the samples
    const auto frames = analyze_signal(signal, cfg.window_s, cfg.hop_s,
                                       default_octave_bands(), 1.0);
    const auto reports = run_pipeline(frames, cfg.voter);

    const auto dir = std::filesystem::path(out_dir);
    write_report(reports, (dir / "report.csv").string());
    write_channels_csv(frames, reports, (dir / "channels.csv").string());

    std::size_t unreliable = 0;
    for (const auto& r : reports) unreliable += r.consensus_unreliable ? 1 : 0;
    std::cout << "analyzed " << reports.size() << " windows x " << signal.n_channels()
              << " channels; wrote " << out_dir << "/report.csv";
    if (unreliable > 0) {
        std::cout << "; " << unreliable << " window(s) consensus-unreliable\n";
        return 3;
    }
    std::cout << "\n";
    return 0;
}

int cmd_verify_scenarios(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg;
    if (!config_path.empty()) cfg = parse_config(config_path);
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    bool all_pass = true;
    for (int index = 1; index <= 5; ++index) {
        const auto scenario = builtin_scenario(index, cfg.scenario_options());
        const auto reports = run_pipeline(scenario.frames, cfg.voter);
        const auto mismatches = match_timeline(reports, scenario.expected, cfg.window_s, 1);

        bool masking_ok = true;
        for (const auto& r : reports) {
            for (std::size_t c = 0; c < r.verdicts.size(); ++c) {
                const bool masked = r.masked_overall[c] == 0.0;
                if ((r.verdicts[c].status != Status::Good) != masked) masking_ok = false;
            }
        }

        const bool pass = mismatches.empty() && masking_ok;
        all_pass = all_pass && pass;
        std::printf("scenario %d (%s): %s\n", index, scenario.description.c_str(),
                    pass ? "PASS" : "FAIL");
        for (const auto& m : mismatches) {
            std::printf("  t=%.2f ch%d produced %s expected %s\n", m.start_s, m.channel_id,
                        to_string(m.produced), to_string(m.expected));
        }

        if (!out_dir.empty()) {
            const auto dir = std::filesystem::path(out_dir);
            write_report(reports, (dir / ("scenario" + std::to_string(index) + ".csv")).string());
        }
    }
    std::printf("%s\n", all_pass ? "5/5 scenarios PASS" : "verification FAILED");
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"N-channel acoustic-spectrum redundancy management"};
    app.require_subcommand(1);

    int scenario_index = 0;
    std::string profile_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    auto* simulate = app.add_subcommand("simulate", "synthesize multichannel input data");
    auto* scen_opt = simulate->add_option("--scenario", scenario_index,
                                          "built-in fault scenario (1..5)");
    auto* prof_opt = simulate->add_option("--profile", profile_path, "spectrum profile file");
    simulate->add_option("--seed", seed, "random seed (default 1)");
    simulate->add_option("--out", out_dir, "output directory")->required();
    scen_opt->excludes(prof_opt);

    std::string input;
    std::string config_path;
    auto* analyze = app.add_subcommand("analyze", "run the voting pipeline on a recording");
    analyze->add_option("--input", input, "input recording (.csv or .wav)")->required();
    analyze->add_option("--config", config_path, "key=value run configuration");
    analyze->add_option("--out", out_dir, "output directory")->required();

    auto* verify = app.add_subcommand("verify-scenarios",
                                      "reproduce the five published fault scenarios");
    verify->add_option("--config", config_path, "key=value run configuration");
    verify->add_option("--out", out_dir, "directory for per-scenario reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (simulate->parsed()) {
            if (scenario_index == 0 && profile_path.empty()) {
                std::cerr << "simulate: need --scenario or --profile\n";
                return 2;
            }
            if (scenario_index != 0 && (scenario_index < 1 || scenario_index > 5)) {
                std::cerr << "simulate: unknown scenario " << scenario_index << " (1..5)\n";
                return 2;
            }
            return cmd_simulate(scenario_index, profile_path, seed, out_dir);
        }
        if (analyze->parsed()) {
            return cmd_analyze(input, config_path, out_dir);
        }
        if (verify->parsed()) {
            return cmd_verify_scenarios(config_path, verify->count("--out") ? out_dir : "");
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
