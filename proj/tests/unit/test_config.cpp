#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "generators.hpp"
#include "lumen/config.hpp"
#include "lumen/errors.hpp"

using namespace lumen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("lumen_config_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string field_of(const std::string& toml) {
    try {
        (void)parse_accelerator_config(toml);
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<none>";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("noise toggles") {
    CHECK(parse_noise("all").fpv);
    CHECK_FALSE(parse_noise("none").any());
    const auto n = parse_noise("fpv,pd");
    CHECK(n.fpv);
    CHECK(n.pd);
    CHECK_FALSE(n.thermal);
    CHECK_THROWS_AS(parse_noise("fpv,shot"), ConfigError);
    CHECK(parse_noise(to_string(n)).pd);
}

TEST_CASE("default TOML reproduces the built-in configuration") {
    const auto parsed = parse_accelerator_config(default_config_toml());
    const auto d = AcceleratorConfig::defaults();
    CHECK(parsed.dac_bits == d.dac_bits);
    CHECK(parsed.adc_bits == d.adc_bits);
    CHECK(parsed.policy == d.policy);
    CHECK(parsed.tuning_level == d.tuning_level);
    CHECK(parsed.to.max_shift_nm == d.to.max_shift_nm);
    CHECK(parsed.eo.settle_latency_s == d.eo.settle_latency_s);
    CHECK(parsed.to.actuator_bits == d.to.actuator_bits);
    CHECK(parsed.thermal.decay_length_um == d.thermal.decay_length_um);
    CHECK(parsed.energy.dac_e_base_pj == d.energy.dac_e_base_pj);
    CHECK(parsed.link.waveguide_loss_db_per_mm == d.link.waveguide_loss_db_per_mm);
    CHECK(parsed.vdus.size() == d.vdus.size());
    for (std::size_t i = 0; i < d.vdus.size(); ++i) {
        CHECK(parsed.vdus[i].kind == d.vdus[i].kind);
        CHECK(parsed.vdus[i].granularity == d.vdus[i].granularity);
        CHECK(parsed.vdus[i].weight_mr == d.vdus[i].weight_mr);
        CHECK(parsed.vdus[i].bn_mr == d.vdus[i].bn_mr);
    }
    for (const auto& [name, design] : d.designs) {
        const auto& p = parsed.designs.at(name);
        CHECK(p.q_factor == design.q_factor);
        CHECK(p.fsr_nm == design.fsr_nm);
        CHECK(p.fpv_std_shift_nm == design.fpv_std_shift_nm);
    }
}

TEST_CASE("overrides layer over the defaults") {
    const auto c = parse_accelerator_config(
        "adc_bits = 6\npolicy = \"to_only\"\n[mr.MR1]\nq_factor = 900\n[tuning.to]\nactuator_bits = 0\n");
    CHECK(c.adc_bits == 6);
    CHECK(c.policy == TuningPolicy::to_only);
    CHECK(c.design("MR1").q_factor == 900.0);
    CHECK_FALSE(c.to.actuator_bits.has_value());
    CHECK(c.dac_bits == 16);
}

TEST_CASE("errors name the offending field") {
    CHECK(field_of("adc_bits = \"eight\"\n") == "adc_bits");
    CHECK(field_of("frobnicate = 1\n") == "frobnicate");
    CHECK(field_of("[thermal]\npitch = 3\n") == "thermal.pitch");
    CHECK(field_of("[mr.MR2]\nq_factor = true\n") == "mr.mr2.q_factor");
    CHECK(field_of("adc_bits = 0\n") == "adc_bits");
    CHECK(field_of("[vdu.fc_vdu]\ninput_source = \"laser\"\n") == "vdu.fc_vdu.input_source");
    CHECK(field_of("noise = \"fpv,wind\"\n") == "noise");
    CHECK_THROWS_AS(parse_accelerator_config("adc_bits = = 3"), ConfigError);
    CHECK_THROWS_AS(load_accelerator_config("/nonexistent/lumen.toml"), ConfigError);
}

TEST_CASE("weight blob round trip") {
    const auto dir = scratch("blob");
    const std::vector<std::vector<float>> records = {{1.0f, -2.5f, 3.25f}, {}, {0.125f}};
    write_weight_blob(dir / "w.lumw", records);
    CHECK(read_weight_blob(dir / "w.lumw") == records);

    std::ofstream(dir / "bad.lumw", std::ios::binary) << "NOPE\x01";
    CHECK_THROWS_AS(read_weight_blob(dir / "bad.lumw"), ConfigError);
    std::ofstream(dir / "short.lumw", std::ios::binary) << "LUMW\x01\x05";
    CHECK_THROWS_AS(read_weight_blob(dir / "short.lumw"), ConfigError);
}

TEST_CASE("manifest round trip and errors") {
    const auto dir = scratch("manifest");
    auto r = gen::rng(61);
    ModelBundle b;
    b.model.name = "tiny";
    LayerIR l1;
    l1.name = "c";
    l1.kind = LayerKind::convolution;
    l1.conv = {1, 2, 3, 3, 1, 8, 8};
    l1.has_bias = true;
    LayerIR l2;
    l2.name = "f";
    l2.in_features = 72;
    l2.out_features = 10;
    l2.activation = Activation::identity;
    l2.has_bn = true;
    QuantSpec q;
    q.weight_bits = 6;
    l2.quant = q;
    b.model.layers = {l1, l2};
    auto f32 = [](std::vector<double> v) {
        for (double& x : v) x = static_cast<float>(x);
        return v;
    };
    b.model.params = {{f32(gen::vec(r, 18, -1, 1)), f32(gen::vec(r, 2, -1, 1)), {}, {}},
                      {f32(gen::vec(r, 720, -1, 1)), {}, f32(gen::vec(r, 10, 0.5, 1)), f32(gen::vec(r, 10, -1, 1))}};
    b.dataset.count = 42;
    save_model(b, dir, "tiny");
    const auto back = load_model(dir / "tiny.json");
    CHECK(back.model.name == "tiny");
    CHECK(back.dataset.count == 42);
    REQUIRE(back.model.layers.size() == 2);
    CHECK(back.model.layers[0].conv.out_h() == 6);
    CHECK(back.model.layers[1].quant->weight_bits == 6);
    CHECK(back.model.params[0].weights == b.model.params[0].weights);
    CHECK(back.model.params[0].bias == b.model.params[0].bias);
    CHECK(back.model.params[1].bn_shift == b.model.params[1].bn_shift);

    auto field = [&](const std::string& text) -> std::string {
        try {
            (void)parse_model_manifest(text, dir);
        } catch (const ConfigError& e) {
            return e.field();
        }
        return "<none>";
    };
    CHECK(field(R"({"weights": "tiny.lumw", "layers": []})") == "manifest.name");
    CHECK(field(R"({"name": "x", "weights": "tiny.lumw", "layers": [{"kind": "fully_connected", "in": 64}]})") ==
          "manifest.layers[0].out");
    CHECK(field(R"({"name": "x", "weights": "tiny.lumw", "layers": [{"kind": "fc", "in": 64, "out": "ten"}]})")
              .rfind("manifest.layers[0]", 0) == 0);
    CHECK(field(R"({"name": "x", "weights": "missing.lumw", "layers": [{"kind": "fully_connected", "in": 1, "out": 1}]})") ==
          "weights");
    CHECK(field("{not json") == "manifest");
}

}
