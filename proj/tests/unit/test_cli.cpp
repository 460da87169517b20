#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_commands.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "lumen/errors.hpp"

using namespace lumen;
using namespace lumen::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lumen_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 64 -> 10 single-layer model over a small test set.
fs::path tiny_model(const fs::path& dir) {
    auto r = gen::rng(71);
    ModelBundle b;
    b.model.name = "tiny";
    LayerIR l;
    l.name = "out";
    l.in_features = 64;
    l.out_features = 10;
    l.activation = Activation::identity;
    b.model.layers = {l};
    std::vector<double> w = gen::vec(r, 640, -1, 1);
    for (double& x : w) x = static_cast<float>(x);
    b.model.params = {{w, {}, {}, {}}};
    b.dataset.count = 12;
    save_model(b, dir, "tiny");
    return dir / "tiny.json";
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("sweep parsing") {
    const auto s = parse_sweep("tuning_level=0,0.5,1");
    CHECK(s.name == "tuning_level");
    CHECK(s.values == std::vector<std::string>{"0", "0.5", "1"});
    CHECK_THROWS_AS(parse_sweep("voltage=1,2"), ConfigError);
    CHECK_THROWS_AS(parse_sweep("tuning_level"), ConfigError);
    CHECK_THROWS_AS(parse_sweep("adc_bits="), ConfigError);
    for (const auto& name : sweep_whitelist())
        CHECK_NOTHROW(parse_sweep(name + (name == "cross_config" ? "=base,opt_ted" : "=1")));
    CHECK_THROWS_AS(parse_sweep("cross_config=fast"), ConfigError);
}

TEST_CASE("sweep values reach the configuration") {
    auto c = AcceleratorConfig::defaults();
    apply_sweep_value(c, "adc_bits", "6");
    CHECK(c.adc_bits == 6);
    apply_sweep_value(c, "tuning_level", "0.25");
    CHECK(c.tuning_level == 0.25);
    apply_sweep_value(c, "cross_config", "opt_ted");
    CHECK(c.thermal.ted);
    apply_sweep_value(c, "cross_config", "base");
    CHECK_FALSE(c.thermal.ted);
    CHECK_THROWS_AS(apply_sweep_value(c, "adc_bits", "many"), ConfigError);
}

TEST_CASE("exit codes") {
    std::ostringstream log;
    CHECK(guarded(log, [] { return 0; }) == kOk);
    CHECK(guarded(log, []() -> int { throw ConfigError("x", "bad"); }) == kConfigError);
    CHECK(guarded(log, []() -> int { throw CapacityError("full", 9); }) == kConfigError);
    CHECK(guarded(log, []() -> int { throw DesignError("q"); }) == kConfigError);
    CHECK(guarded(log, []() -> int { throw CalibrationError("dead"); }) == kCalibrationFailure);
    CHECK(guarded(log, []() -> int { throw DataError("nan"); }) == kFailure);
    CHECK(log.str().find("max feasible 9") != std::string::npos);

    RunConfig run;
    run.config_path = "/nonexistent.toml";
    CHECK(guarded(log, [&] { return cmd_simulate(run, log); }) == kConfigError);
}

TEST_CASE("dead rings map to the calibration exit code") {
    const auto dir = scratch("dead");
    std::ofstream(dir / "bad.toml") << "[mr.crosslight]\nfpv_mean_shift_nm = 9.9\nfpv_std_shift_nm = 0.3\n"
                                       "[mr.MR1]\nfpv_mean_shift_nm = 9.9\n";
    RunConfig run;
    run.config_path = dir / "bad.toml";
    run.model_path = tiny_model(dir);
    run.out_dir = dir / "out";
    std::ostringstream log;
    CHECK(guarded(log, [&] { return cmd_simulate(run, log); }) == kCalibrationFailure);
}

TEST_CASE("simulate writes both report files") {
    const auto dir = scratch("simulate");
    RunConfig run;
    run.model_path = tiny_model(dir);
    run.out_dir = dir / "out";
    run.threads = 1;
    std::ostringstream log;
    REQUIRE(guarded(log, [&] { return cmd_simulate(run, log); }) == kOk);
    CHECK(fs::exists(dir / "out" / "report.csv"));
    CHECK(fs::exists(dir / "out" / "report.json"));
    CHECK(slurp(dir / "out" / "report.csv").rfind("name,accuracy", 0) == 0);
}

TEST_CASE("sweeps are byte-identical across runs and thread counts") {
    const auto dir = scratch("sweep");
    RunConfig run;
    run.model_path = tiny_model(dir);
    run.sweeps = {parse_sweep("adc_bits=4,8")};
    run.trials = 2;
    std::ostringstream log;
    run.out_dir = dir / "a";
    run.threads = 1;
    REQUIRE(guarded(log, [&] { return cmd_sweep(run, log); }) == kOk);
    run.out_dir = dir / "b";
    run.threads = 2;
    REQUIRE(guarded(log, [&] { return cmd_sweep(run, log); }) == kOk);
    const auto a = slurp(dir / "a" / "sweep.csv");
    CHECK(a == slurp(dir / "b" / "sweep.csv"));
    CHECK(a.rfind("parameter,value,trial,seed,name", 0) == 0);
    CHECK(std::count(a.begin(), a.end(), '\n') == 5);

    run.sweeps.push_back(parse_sweep("dac_bits=8"));
    CHECK(guarded(log, [&] { return cmd_sweep(run, log); }) == kConfigError);
}

TEST_CASE("explore-resolution bits do not fall as Q rises") {
    const auto dir = scratch("explore");
    RunConfig run;
    run.sweeps = {parse_sweep("q=500,1800,5000,8000"), parse_sweep("cs=1.0")};
    run.out_dir = dir;
    std::ostringstream log;
    REQUIRE(guarded(log, [&] { return cmd_explore_resolution(run, log); }) == kOk);
    std::istringstream rows(slurp(dir / "resolution.csv"));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "q,cs_nm,n,crosstalk,bits");
    int last_bits = -1, count = 0;
    while (std::getline(rows, line)) {
        const int bits = std::stoi(line.substr(line.rfind(',') + 1));
        CHECK(bits >= last_bits);
        last_bits = bits;
        ++count;
    }
    CHECK(count == 4);
}

}
