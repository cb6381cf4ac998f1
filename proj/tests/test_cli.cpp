// End-to-end checks of the specvote binary: exit codes, file outputs and
// byte-for-byte reproducibility. SPECVOTE_BIN is injected by the build.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "specvote/io.hpp"
#include "specvote/simulator.hpp"

using namespace specvote;
using Catch::Matchers::ContainsSubstring;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("specvote_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args, const TempDir& dir) {
    const std::string log = dir.file("run.log");
    const std::string cmd = std::string(SPECVOTE_BIN) + " " + args + " >" + log + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Six channels sampling one synthesized field, optional faults, to CSV.
void write_scenario_csv(const std::string& path, const std::vector<FaultSpec>& faults,
                        double duration_s) {
    const auto base = synth_waveform(flat_profile(140.0, duration_s), 1, 48000.0, 99);
    MultichannelSignal signal;
    signal.sample_rate = 48000.0;
    signal.channels.assign(6, base.channels.front());
    for (const auto& f : faults) inject_fault(signal, f);
    write_csv(signal, path);
}

} // namespace

TEST_CASE("simulate writes scenario data deterministically") {
    TempDir dir;
    auto first = run("simulate --scenario 1 --seed 7 --out " + dir.file("a"), dir);
    REQUIRE(first.exit_code == 0);
    REQUIRE(std::filesystem::exists(dir.file("a/input.csv")));
    REQUIRE(std::filesystem::exists(dir.file("a/expected_timeline.csv")));

    auto second = run("simulate --scenario 1 --seed 7 --out " + dir.file("b"), dir);
    REQUIRE(second.exit_code == 0);
    REQUIRE(read_text(dir.file("a/input.csv")) == read_text(dir.file("b/input.csv")));
    REQUIRE(read_text(dir.file("a/expected_timeline.csv")) ==
            read_text(dir.file("b/expected_timeline.csv")));
}

TEST_CASE("simulate rejects an unknown scenario with exit 2") {
    TempDir dir;
    auto r = run("simulate --scenario 9 --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 2);
    REQUIRE_THAT(r.output, ContainsSubstring("unknown scenario"));
}

TEST_CASE("simulate scenario 5 lists ch2 from 1 s and ch6 from 3.5 s") {
    TempDir dir;
    auto r = run("simulate --scenario 5 --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 0);
    const auto timeline = read_text(dir.file("out/expected_timeline.csv"));
    REQUIRE_THAT(timeline, ContainsSubstring("2,BadLow,1,10"));
    REQUIRE_THAT(timeline, ContainsSubstring("6,BadLow,3.5,10"));
}

TEST_CASE("analyze of a clean recording exits 0 with every channel Good") {
    TempDir dir;
    write_scenario_csv(dir.file("clean.csv"), {}, 2.0);
    auto r = run("analyze --input " + dir.file("clean.csv") + " --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 0);
    const auto report = read_text(dir.file("out/report.csv"));
    REQUIRE_THAT(report, ContainsSubstring("Good"));
    REQUIRE_THAT(report, !ContainsSubstring("BadLow"));
    REQUIRE_THAT(report, !ContainsSubstring("BadHigh"));
}

TEST_CASE("analyze of scenario 4 data flags ch2 high and ch5 low") {
    TempDir dir;
    write_scenario_csv(dir.file("s4.csv"),
                       {{2, 2.0, 2.5, 10.0}, {5, 0.25, 4.0, 10.0}}, 10.0);
    auto r = run("analyze --input " + dir.file("s4.csv") + " --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 0);

    std::ifstream in(dir.file("out/report.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::istringstream row(line);
        std::string start_s, channel, status;
        std::getline(row, start_s, ',');
        std::getline(row, channel, ',');
        std::getline(row, status, ',');
        const double t = std::stod(start_s);
        std::string want = "Good";
        if (channel == "2" && t >= 2.5) want = "BadHigh";
        if (channel == "5" && t >= 4.0) want = "BadLow";
        REQUIRE(status == want);
    }
}

TEST_CASE("three simultaneous faults exit 3 (consensus unreliable)") {
    TempDir dir;
    write_scenario_csv(dir.file("s3bad.csv"),
                       {{1, 0.25, 0.0, 2.0}, {2, 0.25, 0.0, 2.0}, {3, 0.25, 0.0, 2.0}}, 2.0);
    auto r = run("analyze --input " + dir.file("s3bad.csv") + " --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 3);
}

TEST_CASE("analyze rejects malformed input with exit 2") {
    TempDir dir;
    std::ofstream(dir.file("garbage.csv")) << "time_s,ch1,ch2\n0,x,0\n";
    auto r = run("analyze --input " + dir.file("garbage.csv") + " --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 2);
}

TEST_CASE("analyze accepts a multichannel WAV recording") {
    TempDir dir;
    // six identical channels of a 1 kHz tone, 16-bit PCM at 48 kHz
    const std::size_t n = 48000;
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
    auto push16 = [&](std::uint32_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back((v >> 8) & 0xff);
    };
    auto push32 = [&](std::uint32_t v) {
        push16(v & 0xffff);
        push16(v >> 16);
    };
    push32(36 + static_cast<std::uint32_t>(n * 6 * 2));
    bytes.insert(bytes.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    push32(16);
    push16(1);      // PCM
    push16(6);      // channels
    push32(48000);  // rate
    push32(48000 * 6 * 2);
    push16(6 * 2);
    push16(16);  // bits
    bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
    push32(static_cast<std::uint32_t>(n * 6 * 2));
    for (std::size_t i = 0; i < n; ++i) {
        const double v = 0.25 * std::cos(2.0 * kPi * 1000.0 * i / 48000.0);
        const auto q = static_cast<std::int16_t>(std::lround(v * 32767.0));
        for (int c = 0; c < 6; ++c) push16(static_cast<std::uint16_t>(q));
    }
    std::ofstream(dir.file("tone.wav"), std::ios::binary)
        .write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));

    auto r = run("analyze --input " + dir.file("tone.wav") + " --out " + dir.file("out"), dir);
    REQUIRE(r.exit_code == 0);
    const auto report = read_text(dir.file("out/report.csv"));
    REQUIRE_THAT(report, !ContainsSubstring("Bad"));
}

TEST_CASE("simulate from a profile file feeds analyze") {
    TempDir dir;
    std::ofstream(dir.file("profile.cfg"))
        << "name=tiershape\nduration_s=2\n"
        << "band_targets_db=134,136,138,140,142,142,140,138,136,134\n";
    auto sim = run("simulate --profile " + dir.file("profile.cfg") + " --seed 3 --out " +
                       dir.file("sim"),
                   dir);
    REQUIRE(sim.exit_code == 0);
    REQUIRE(std::filesystem::exists(dir.file("sim/input.csv")));

    auto ana = run("analyze --input " + dir.file("sim/input.csv") + " --out " + dir.file("out"),
                   dir);
    REQUIRE(ana.exit_code == 0);
}

TEST_CASE("verify-scenarios passes 5/5 on the default build") {
    TempDir dir;
    auto r = run("verify-scenarios", dir);
    REQUIRE(r.exit_code == 0);
    REQUIRE_THAT(r.output, ContainsSubstring("5/5 scenarios PASS"));
    for (int i = 1; i <= 5; ++i) {
        REQUIRE_THAT(r.output, ContainsSubstring("scenario " + std::to_string(i)));
    }
}

TEST_CASE("verify-scenarios fails when the threshold ignores the faults") {
    TempDir dir;
    std::ofstream(dir.file("blunt.cfg")) << "threshold_db=100\n";
    auto r = run("verify-scenarios --config " + dir.file("blunt.cfg"), dir);
    REQUIRE(r.exit_code != 0);
    REQUIRE_THAT(r.output, ContainsSubstring("FAIL"));
}

TEST_CASE("verify-scenarios fails by false positives at a hair-trigger threshold") {
    TempDir dir;
    std::ofstream(dir.file("touchy.cfg")) << "threshold_db=0.1\n";
    auto r = run("verify-scenarios --config " + dir.file("touchy.cfg"), dir);
    REQUIRE(r.exit_code != 0);
}
