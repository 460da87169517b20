#include "lumen/config.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "json.hpp"
#include "lumen/errors.hpp"
#include "lumen/metrics.hpp"

namespace lumen {

NoiseConfig parse_noise(std::string_view text) {
    if (text == "all") return NoiseConfig::all();
    if (text == "none" || text.empty()) return NoiseConfig::none();
    NoiseConfig n;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, comma - pos);
        if (item == "fpv") n.fpv = true;
        else if (item == "thermal") n.thermal = true;
        else if (item == "heterodyne") n.heterodyne = true;
        else if (item == "pd") n.pd = true;
        else throw ConfigError("noise", "unknown noise source '" + std::string(item) + "'");
        pos = comma + 1;
    }
    return n;
}

std::string to_string(const NoiseConfig& noise) {
    if (noise.fpv && noise.thermal && noise.heterodyne && noise.pd) return "all";
    std::string out;
    auto add = [&out](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(noise.fpv, "fpv");
    add(noise.thermal, "thermal");
    add(noise.heterodyne, "heterodyne");
    add(noise.pd, "pd");
    return out.empty() ? "none" : out;
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

// Reads typed keys from one TOML table and rejects anything it did not read.
class TableReader {
public:
    TableReader(const toml::table& table, std::string prefix) : table_(table), prefix_(std::move(prefix)) {}

    void get(const char* key, double& out) {
        if (const auto* node = find(key)) {
            if (auto v = node->value<double>(); v && (node->is_floating_point() || node->is_integer()))
                out = *v;
            else
                throw ConfigError(field(key), "expected a number");
        }
    }
    void get(const char* key, int& out) {
        if (const auto* node = find(key)) {
            if (!node->is_integer()) throw ConfigError(field(key), "expected an integer");
            out = static_cast<int>(*node->value<std::int64_t>());
        }
    }
    void get(const char* key, bool& out) {
        if (const auto* node = find(key)) {
            if (!node->is_boolean()) throw ConfigError(field(key), "expected true or false");
            out = *node->value<bool>();
        }
    }
    void get(const char* key, std::string& out) {
        if (const auto* node = find(key)) {
            if (!node->is_string()) throw ConfigError(field(key), "expected a string");
            out = *node->value<std::string>();
        }
    }
    const toml::table* subtable(const char* key) {
        if (const auto* node = find(key)) {
            if (!node->is_table()) throw ConfigError(field(key), "expected a table");
            return node->as_table();
        }
        return nullptr;
    }
    [[nodiscard]] std::string field(std::string_view key) const {
        return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
    }
    void finish() const {
        for (auto&& [k, v] : table_) {
            (void)v;
            if (!used_.count(std::string(k.str())))
                throw ConfigError(field(k.str()), "unknown key");
        }
    }

private:
    const toml::node* find(const char* key) {
        used_.insert(key);
        return table_.get(key);
    }

    const toml::table& table_;
    std::string prefix_;
    std::set<std::string> used_;
};

void read_design(const toml::table& t, const std::string& prefix, MRDesign& d) {
    TableReader r(t, prefix);
    bool fsr_given = t.contains("fsr_nm");
    r.get("radius_um", d.radius_um);
    r.get("input_width_nm", d.input_width_nm);
    r.get("ring_width_nm", d.ring_width_nm);
    r.get("q_factor", d.q_factor);
    r.get("kappa", d.kappa);
    r.get("fsr_nm", d.fsr_nm);
    r.get("resonant_wavelength_nm", d.resonant_wavelength_nm);
    r.get("extinction_db", d.extinction_db);
    r.get("fpv_mean_shift_nm", d.fpv_mean_shift_nm);
    r.get("fpv_std_shift_nm", d.fpv_std_shift_nm);
    r.get("is_broadband", d.is_broadband);
    r.finish();
    if (!fsr_given && t.contains("radius_um")) d.fsr_nm = fsr_from_radius(d.radius_um, d.resonant_wavelength_nm);
}

void read_tuning(const toml::table& t, const std::string& prefix, TuningMechanism& m) {
    TableReader r(t, prefix);
    r.get("max_shift_nm", m.max_shift_nm);
    r.get("power_per_nm_mw", m.power_per_nm_mw);
    r.get("settle_latency_s", m.settle_latency_s);
    r.get("insertion_loss_db", m.insertion_loss_db);
    int bits = m.actuator_bits.value_or(0);
    r.get("actuator_bits", bits);
    r.finish();
    if (bits < 0) throw ConfigError(prefix + ".actuator_bits", "must be >= 0 (0 = ideal actuator)");
    m.actuator_bits = bits == 0 ? std::nullopt : std::optional<int>(bits);
}

void read_laser(const toml::table& t, const std::string& prefix, LaserSource& l) {
    TableReader r(t, prefix);
    r.get("wall_plug_efficiency", l.wall_plug_efficiency);
    r.get("coupling_loss_db", l.coupling_loss_db);
    r.get("per_wavelength_power_dbm", l.per_wavelength_power_dbm);
    r.get("directly_modulated", l.directly_modulated);
    r.finish();
}

VDUSpec& vdu_entry(AcceleratorConfig& c, VDUKind kind) {
    for (auto& v : c.vdus)
        if (v.kind == kind) return v;
    VDUSpec v;
    v.kind = kind;
    v.count = 0;
    if (kind == VDUKind::vcsel_vdu) v.input_source = InputImprint::direct_power;
    c.vdus.push_back(v);
    return c.vdus.back();
}

std::string num(double v) { return format_number(v); }

}  // namespace

AcceleratorConfig parse_accelerator_config(std::string_view toml_text, std::string_view source) {
    toml::table root;
    try {
        root = toml::parse(toml_text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(std::string(source), os.str());
    }

    AcceleratorConfig c = AcceleratorConfig::defaults();
    TableReader r(root, "");
    r.get("dac_bits", c.dac_bits);
    r.get("adc_bits", c.adc_bits);
    r.get("hw_weight_bits", c.hw_weight_bits);
    std::string policy = to_string(c.policy);
    r.get("policy", policy);
    c.policy = parse_tuning_policy(policy);
    r.get("tuning_level", c.tuning_level);
    r.get("compress_sparse", c.compress_sparse);
    r.get("dead_fraction_limit", c.dead_fraction_limit);
    std::string noise = to_string(c.noise);
    r.get("noise", noise);
    c.noise = parse_noise(noise);

    if (const auto* mr = r.subtable("mr")) {
        for (auto&& [k, v] : *mr) {
            const std::string name = lower(std::string(k.str()));
            if (!v.is_table()) throw ConfigError("mr." + name, "expected a table");
            MRDesign d;
            if (auto it = c.designs.find(name); it != c.designs.end()) {
                d = it->second;
            } else {
                d.name = name;
                d.fsr_nm = fsr_from_radius(d.radius_um, d.resonant_wavelength_nm);
            }
            read_design(*v.as_table(), "mr." + name, d);
            c.designs[name] = d;
        }
    }
    if (const auto* tuning = r.subtable("tuning")) {
        TableReader tr(*tuning, "tuning");
        if (const auto* to = tr.subtable("to")) read_tuning(*to, "tuning.to", c.to);
        if (const auto* eo = tr.subtable("eo")) read_tuning(*eo, "tuning.eo", c.eo);
        tr.finish();
    }
    if (const auto* thermal = r.subtable("thermal")) {
        TableReader tr(*thermal, "thermal");
        tr.get("pitch_um", c.thermal.pitch_um);
        tr.get("decay_length_um", c.thermal.decay_length_um);
        tr.get("ted", c.thermal.ted);
        tr.finish();
    }
    if (const auto* energy = r.subtable("energy")) {
        TableReader er(*energy, "energy");
        auto& e = c.energy;
        er.get("dac_e_base_pj", e.dac_e_base_pj);
        er.get("dac_bits_base", e.dac_bits_base);
        er.get("adc_to_dac_ratio", e.adc_to_dac_ratio);
        er.get("pd_read_pj", e.pd_read_pj);
        er.get("vcsel_drive_pj", e.vcsel_drive_pj);
        er.get("vcsel_settle_s", e.vcsel_settle_s);
        er.get("propagation_s", e.propagation_s);
        er.get("adc_conversion_s", e.adc_conversion_s);
        er.get("calibration_window_frames", e.calibration_window_frames);
        er.finish();
    }
    if (const auto* link = r.subtable("link")) {
        TableReader lr(*link, "link");
        lr.get("waveguide_loss_db_per_mm", c.link.waveguide_loss_db_per_mm);
        lr.get("waveguide_length_mm", c.link.waveguide_length_mm);
        lr.get("mr_through_loss_db", c.link.mr_through_loss_db);
        lr.get("splitter_excess_db", c.link.splitter_excess_db);
        lr.get("max_laser_dbm", c.max_laser_dbm);
        if (const auto* laser = lr.subtable("laser")) read_laser(*laser, "link.laser", c.laser);
        if (const auto* vcsel = lr.subtable("vcsel")) read_laser(*vcsel, "link.vcsel", c.vcsel);
        if (const auto* pd = lr.subtable("pd")) {
            TableReader pr(*pd, "link.pd");
            pr.get("responsivity_a_per_w", c.pd.responsivity_a_per_w);
            pr.get("sensitivity_dbm", c.pd.sensitivity_dbm);
            pr.get("noise_floor_rel", c.pd.noise_floor_rel);
            pr.finish();
        }
        lr.finish();
    }
    if (const auto* vdu = r.subtable("vdu")) {
        for (auto&& [k, v] : *vdu) {
            const std::string key(k.str());
            const std::string prefix = "vdu." + key;
            VDUKind kind;
            try {
                kind = parse_vdu_kind(key);
            } catch (const ConfigError&) {
                throw ConfigError(prefix, "unknown VDU kind");
            }
            if (!v.is_table()) throw ConfigError(prefix, "expected a table");
            VDUSpec& spec = vdu_entry(c, kind);
            TableReader vr(*v.as_table(), prefix);
            vr.get("count", spec.count);
            vr.get("granularity", spec.granularity);
            vr.get("channel_spacing_nm", spec.channel_spacing_nm);
            vr.get("weight_mr", spec.weight_mr);
            vr.get("activation_mr", spec.activation_mr);
            std::string bn = spec.bn_mr.value_or("");
            vr.get("bn_mr", bn);
            spec.bn_mr = bn.empty() ? std::nullopt : std::optional<std::string>(bn);
            std::string source = spec.input_source == InputImprint::mr_bank ? "modulator_bank" : "direct_vcsel";
            vr.get("input_source", source);
            if (source == "modulator_bank") spec.input_source = InputImprint::mr_bank;
            else if (source == "direct_vcsel") spec.input_source = InputImprint::direct_power;
            else throw ConfigError(prefix + ".input_source", "expected modulator_bank or direct_vcsel");
            vr.finish();
        }
    }
    r.finish();
    c.validate();
    return c;
}

AcceleratorConfig load_accelerator_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_accelerator_config(ss.str(), path.string());
}

std::string default_config_toml() {
    const AcceleratorConfig c = AcceleratorConfig::defaults();
    std::ostringstream o;
    o << "# lumen accelerator configuration\n";
    o << "dac_bits = " << c.dac_bits << "\n";
    o << "adc_bits = " << c.adc_bits << "\n";
    o << "hw_weight_bits = " << c.hw_weight_bits << "\n";
    o << "policy = \"" << to_string(c.policy) << "\"\n";
    o << "tuning_level = " << num(c.tuning_level) << "\n";
    o << "compress_sparse = " << (c.compress_sparse ? "true" : "false") << "\n";
    o << "dead_fraction_limit = " << num(c.dead_fraction_limit) << "\n";
    o << "noise = \"" << to_string(c.noise) << "\"\n";
    for (const auto& [name, d] : c.designs) {
        o << "\n[mr." << name << "]\n";
        o << "radius_um = " << num(d.radius_um) << "\n";
        o << "input_width_nm = " << num(d.input_width_nm) << "\n";
        o << "ring_width_nm = " << num(d.ring_width_nm) << "\n";
        o << "q_factor = " << num(d.q_factor) << "\n";
        o << "kappa = " << num(d.kappa) << "\n";
        o << "fsr_nm = " << num(d.fsr_nm) << "\n";
        o << "resonant_wavelength_nm = " << num(d.resonant_wavelength_nm) << "\n";
        o << "extinction_db = " << num(d.extinction_db) << "\n";
        o << "fpv_mean_shift_nm = " << num(d.fpv_mean_shift_nm) << "\n";
        o << "fpv_std_shift_nm = " << num(d.fpv_std_shift_nm) << "\n";
        o << "is_broadband = " << (d.is_broadband ? "true" : "false") << "\n";
    }
    for (const auto& [key, m] : {std::pair<const char*, const TuningMechanism&>{"to", c.to},
                                 std::pair<const char*, const TuningMechanism&>{"eo", c.eo}}) {
        o << "\n[tuning." << key << "]\n";
        o << "max_shift_nm = " << num(m.max_shift_nm) << "\n";
        o << "power_per_nm_mw = " << num(m.power_per_nm_mw) << "\n";
        o << "settle_latency_s = " << num(m.settle_latency_s) << "\n";
        o << "insertion_loss_db = " << num(m.insertion_loss_db) << "\n";
        o << "actuator_bits = " << m.actuator_bits.value_or(0) << "\n";
    }
    o << "\n[thermal]\n";
    o << "pitch_um = " << num(c.thermal.pitch_um) << "\n";
    o << "decay_length_um = " << num(c.thermal.decay_length_um) << "\n";
    o << "ted = " << (c.thermal.ted ? "true" : "false") << "\n";
    const auto& e = c.energy;
    o << "\n[energy]\n";
    o << "dac_e_base_pj = " << num(e.dac_e_base_pj) << "\n";
    o << "dac_bits_base = " << e.dac_bits_base << "\n";
    o << "adc_to_dac_ratio = " << num(e.adc_to_dac_ratio) << "\n";
    o << "pd_read_pj = " << num(e.pd_read_pj) << "\n";
    o << "vcsel_drive_pj = " << num(e.vcsel_drive_pj) << "\n";
    o << "vcsel_settle_s = " << num(e.vcsel_settle_s) << "\n";
    o << "propagation_s = " << num(e.propagation_s) << "\n";
    o << "adc_conversion_s = " << num(e.adc_conversion_s) << "\n";
    o << "calibration_window_frames = " << num(e.calibration_window_frames) << "\n";
    o << "\n[link]\n";
    o << "waveguide_loss_db_per_mm = " << num(c.link.waveguide_loss_db_per_mm) << "\n";
    o << "waveguide_length_mm = " << num(c.link.waveguide_length_mm) << "\n";
    o << "mr_through_loss_db = " << num(c.link.mr_through_loss_db) << "\n";
    o << "splitter_excess_db = " << num(c.link.splitter_excess_db) << "\n";
    o << "max_laser_dbm = " << num(c.max_laser_dbm) << "\n";
    for (const auto& [key, l] : {std::pair<const char*, const LaserSource&>{"laser", c.laser},
                                 std::pair<const char*, const LaserSource&>{"vcsel", c.vcsel}}) {
        o << "\n[link." << key << "]\n";
        o << "wall_plug_efficiency = " << num(l.wall_plug_efficiency) << "\n";
        o << "coupling_loss_db = " << num(l.coupling_loss_db) << "\n";
        o << "per_wavelength_power_dbm = " << num(l.per_wavelength_power_dbm) << "\n";
        o << "directly_modulated = " << (l.directly_modulated ? "true" : "false") << "\n";
    }
    o << "\n[link.pd]\n";
    o << "responsivity_a_per_w = " << num(c.pd.responsivity_a_per_w) << "\n";
    o << "sensitivity_dbm = " << num(c.pd.sensitivity_dbm) << "\n";
    o << "noise_floor_rel = " << num(c.pd.noise_floor_rel) << "\n";
    for (const auto& v : c.vdus) {
        o << "\n[vdu." << to_string(v.kind) << "]\n";
        o << "count = " << v.count << "\n";
        o << "granularity = " << v.granularity << "\n";
        o << "channel_spacing_nm = " << num(v.channel_spacing_nm) << "\n";
        o << "weight_mr = \"" << v.weight_mr << "\"\n";
        o << "activation_mr = \"" << v.activation_mr << "\"\n";
        if (v.bn_mr) o << "bn_mr = \"" << *v.bn_mr << "\"\n";
        o << "input_source = \""
          << (v.input_source == InputImprint::mr_bank ? "modulator_bank" : "direct_vcsel") << "\"\n";
    }
    return o.str();
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::vector<float>> read_weight_blob(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("weights", "cannot open weight blob '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 5 || std::memcmp(bytes.data(), kBlobMagic, 4) != 0)
        throw ConfigError("weights", "'" + path.string() + "' is not a LUMW weight blob");
    if (static_cast<std::uint8_t>(bytes[4]) != kBlobVersion)
        throw ConfigError("weights", "unsupported weight blob version " +
                                         std::to_string(static_cast<std::uint8_t>(bytes[4])));
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    std::size_t pos = 5;
    std::vector<std::vector<float>> records;
    while (pos < bytes.size()) {
        if (bytes.size() - pos < 4) throw ConfigError("weights", "truncated record header");
        const std::uint32_t count = get_u32(p + pos);
        pos += 4;
        if ((bytes.size() - pos) / 4 < count) throw ConfigError("weights", "truncated record payload");
        std::vector<float> rec(count);
        for (std::uint32_t i = 0; i < count; ++i) {
            const std::uint32_t bitsv = get_u32(p + pos + 4 * static_cast<std::size_t>(i));
            std::memcpy(&rec[i], &bitsv, 4);
        }
        pos += 4 * static_cast<std::size_t>(count);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_weight_blob(const std::filesystem::path& path, const std::vector<std::vector<float>>& records) {
    std::string out(kBlobMagic, 4);
    out.push_back(static_cast<char>(kBlobVersion));
    for (const auto& rec : records) {
        put_u32(out, static_cast<std::uint32_t>(rec.size()));
        for (float f : rec) {
            std::uint32_t bitsv;
            std::memcpy(&bitsv, &f, 4);
            put_u32(out, bitsv);
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("weights", "cannot write '" + path.string() + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(where + "." + key, "missing");
    return j.at(key);
}

int as_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ConfigError(field, "expected an integer");
    return j.get<int>();
}

double as_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ConfigError(field, "expected a number");
    return j.get<double>();
}

std::string as_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw ConfigError(field, "expected a string");
    return j.get<std::string>();
}

bool as_bool(const json& j, const std::string& field) {
    if (!j.is_boolean()) throw ConfigError(field, "expected true or false");
    return j.get<bool>();
}

QuantSpec parse_quant(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where, "expected an object");
    QuantSpec q;
    if (j.contains("weight_bits")) q.weight_bits = as_int(j["weight_bits"], where + ".weight_bits");
    if (j.contains("activation_bits")) q.activation_bits = as_int(j["activation_bits"], where + ".activation_bits");
    if (j.contains("scheme")) {
        try {
            q.scheme = parse_quant_scheme(as_string(j["scheme"], where + ".scheme"));
        } catch (const ConfigError& e) {
            throw ConfigError(where + ".scheme", e.what());
        }
    }
    if (j.contains("cluster_count")) q.cluster_count = as_int(j["cluster_count"], where + ".cluster_count");
    try {
        q.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(where + "." + e.field(), e.what());
    }
    return q;
}

json quant_json(const QuantSpec& q) {
    return json{{"weight_bits", q.weight_bits},
                {"activation_bits", q.activation_bits},
                {"scheme", to_string(q.scheme)},
                {"cluster_count", q.cluster_count}};
}

std::vector<double> to_double(const std::vector<float>& v) { return {v.begin(), v.end()}; }
std::vector<float> to_float(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

}  // namespace

ModelBundle parse_model_manifest(std::string_view json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError("manifest", e.what());
    }
    if (!doc.is_object()) throw ConfigError("manifest", "expected a JSON object");
    ModelBundle b;
    b.model.name = as_string(require(doc, "name", "manifest"), "manifest.name");
    const std::string weights_file = as_string(require(doc, "weights", "manifest"), "manifest.weights");
    if (doc.contains("quant")) b.model.quant = parse_quant(doc["quant"], "manifest.quant");
    if (doc.contains("dataset")) {
        const json& d = doc["dataset"];
        if (d.contains("kind")) b.dataset.kind = as_string(d["kind"], "manifest.dataset.kind");
        if (b.dataset.kind != "synthetic_digits")
            throw ConfigError("manifest.dataset.kind", "only synthetic_digits is available");
        if (d.contains("seed")) {
            if (!d["seed"].is_number_unsigned()) throw ConfigError("manifest.dataset.seed", "expected an unsigned integer");
            b.dataset.seed = d["seed"].get<std::uint64_t>();
        }
        if (d.contains("count")) b.dataset.count = as_int(d["count"], "manifest.dataset.count");
        if (b.dataset.count < 1) throw ConfigError("manifest.dataset.count", "must be >= 1");
    }

    const json& layers = require(doc, "layers", "manifest");
    if (!layers.is_array() || layers.empty()) throw ConfigError("manifest.layers", "expected a non-empty array");
    const auto records = read_weight_blob(base_dir / weights_file);
    std::size_t next = 0;
    auto take = [&](const std::string& field, std::size_t expected) {
        if (next >= records.size()) throw ConfigError(field, "weight blob has too few records");
        const auto& rec = records[next];
        if (rec.size() != expected) {
            std::ostringstream os;
            os << "record " << next << " holds " << rec.size() << " values, expected " << expected;
            throw ConfigError(field, os.str());
        }
        return to_double(records[next++]);
    };

    for (std::size_t i = 0; i < layers.size(); ++i) {
        const json& l = layers[i];
        const std::string where = "manifest.layers[" + std::to_string(i) + "]";
        LayerIR ir;
        ir.name = l.contains("name") ? as_string(l["name"], where + ".name") : "layer" + std::to_string(i);
        try {
            ir.kind = parse_layer_kind(as_string(require(l, "kind", where), where + ".kind"));
        } catch (const CapabilityError& e) {
            throw ConfigError(where + ".kind", e.what());
        }
        if (ir.kind == LayerKind::fully_connected) {
            ir.in_features = as_int(require(l, "in", where), where + ".in");
            ir.out_features = as_int(require(l, "out", where), where + ".out");
        } else {
            ir.conv.in_ch = as_int(require(l, "in_ch", where), where + ".in_ch");
            ir.conv.out_ch = as_int(require(l, "out_ch", where), where + ".out_ch");
            const json& k = require(l, "kernel", where);
            const json& in = require(l, "input", where);
            if (!k.is_array() || k.size() != 2) throw ConfigError(where + ".kernel", "expected [kh, kw]");
            if (!in.is_array() || in.size() != 2) throw ConfigError(where + ".input", "expected [h, w]");
            ir.conv.kh = as_int(k[0], where + ".kernel");
            ir.conv.kw = as_int(k[1], where + ".kernel");
            ir.conv.in_h = as_int(in[0], where + ".input");
            ir.conv.in_w = as_int(in[1], where + ".input");
            if (l.contains("stride")) ir.conv.stride = as_int(l["stride"], where + ".stride");
        }
        if (l.contains("activation")) {
            try {
                ir.activation = parse_activation(as_string(l["activation"], where + ".activation"));
            } catch (const CapabilityError& e) {
                throw ConfigError(where + ".activation", e.what());
            }
        }
        if (l.contains("quant")) ir.quant = parse_quant(l["quant"], where + ".quant");
        if (l.contains("sparsity")) ir.sparsity = as_number(l["sparsity"], where + ".sparsity");
        if (l.contains("bias")) ir.has_bias = as_bool(l["bias"], where + ".bias");
        if (l.contains("bn")) ir.has_bn = as_bool(l["bn"], where + ".bn");
        if (l.contains("vdu")) {
            try {
                ir.vdu = parse_vdu_kind(as_string(l["vdu"], where + ".vdu"));
            } catch (const ConfigError& e) {
                throw ConfigError(where + ".vdu", e.what());
            }
        }
        try {
            ir.validate();
        } catch (const ShapeError& e) {
            throw ConfigError(where, e.what());
        }
        LayerWeights p;
        const std::size_t rows = static_cast<std::size_t>(ir.rows());
        ir.weight_ref = {next, rows * static_cast<std::size_t>(ir.fan_in())};
        p.weights = take(where + ".weights", ir.weight_ref.count);
        if (ir.has_bias) p.bias = take(where + ".bias", rows);
        if (ir.has_bn) {
            p.bn_scale = take(where + ".bn_scale", rows);
            p.bn_shift = take(where + ".bn_shift", rows);
        }
        b.model.layers.push_back(ir);
        b.model.params.push_back(std::move(p));
    }
    if (next != records.size()) throw ConfigError("manifest.weights", "weight blob has unused records");
    try {
        b.model.validate();
    } catch (const ShapeError& e) {
        throw ConfigError("manifest.layers", e.what());
    }
    return b;
}

ModelBundle load_model(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw ConfigError("model", "cannot open '" + manifest_path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_manifest(ss.str(), manifest_path.parent_path());
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    const Model& m = bundle.model;
    json doc;
    doc["name"] = m.name;
    doc["weights"] = stem + ".lumw";
    doc["dataset"] = {{"kind", bundle.dataset.kind}, {"seed", bundle.dataset.seed}, {"count", bundle.dataset.count}};
    doc["quant"] = quant_json(m.quant);
    json layers = json::array();
    std::vector<std::vector<float>> records;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        const LayerIR& l = m.layers[i];
        json j;
        j["name"] = l.name;
        j["kind"] = to_string(l.kind);
        if (l.kind == LayerKind::fully_connected) {
            j["in"] = l.in_features;
            j["out"] = l.out_features;
        } else {
            j["in_ch"] = l.conv.in_ch;
            j["out_ch"] = l.conv.out_ch;
            j["kernel"] = {l.conv.kh, l.conv.kw};
            j["stride"] = l.conv.stride;
            j["input"] = {l.conv.in_h, l.conv.in_w};
        }
        j["activation"] = to_string(l.activation);
        j["bias"] = l.has_bias;
        j["bn"] = l.has_bn;
        j["sparsity"] = l.sparsity;
        if (l.quant) j["quant"] = quant_json(*l.quant);
        if (l.vdu) j["vdu"] = to_string(*l.vdu);
        layers.push_back(j);
        const auto& p = m.params[i];
        records.push_back(to_float(p.weights));
        if (l.has_bias) records.push_back(to_float(p.bias));
        if (l.has_bn) {
            records.push_back(to_float(p.bn_scale));
            records.push_back(to_float(p.bn_shift));
        }
    }
    doc["layers"] = layers;
    write_weight_blob(dir / (stem + ".lumw"), records);
    std::ofstream f(dir / (stem + ".json"), std::ios::trunc);
    if (!f) throw ConfigError("model", "cannot write manifest in '" + dir.string() + "'");
    f << doc.dump(2) << '\n';
}

}  // namespace lumen
