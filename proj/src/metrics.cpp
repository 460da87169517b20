#include "lumen/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "lumen/errors.hpp"

namespace lumen {

namespace {
constexpr double kMwSecondsToPj = 1e9;
const double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

EnergyModel make_energy_model(const Accelerator& accel) {
    const auto& cfg = accel.config();
    cfg.energy.validate();
    EnergyModel m;
    m.constants = cfg.energy;
    m.dac_bits = cfg.dac_bits;
    m.adc_bits = cfg.adc_bits;
    m.policy = cfg.policy;
    m.to = cfg.to;
    m.eo = cfg.eo;
    for (const auto& spec : cfg.vdus) {
        if (spec.count < 1) continue;
        const bool vcsel = spec.input_source == InputImprint::direct_power;
        const LaserSource& source = vcsel ? cfg.vcsel : cfg.laser;
        const int n = spec.granularity;
        // Each wavelength passes the input row (if any) and one weight row
        // after the rail split; one ring per row is tuned onto it.
        const int rows = vcsel ? 1 : 2;
        const auto budget = make_link_budget(source, cfg.link, cfg.imprint_mechanism(), rows * n, rows, 2);
        const double dbm = required_laser_power(budget, cfg.pd, n, cfg.max_laser_dbm);
        m.laser_mw_per_channel[static_cast<std::size_t>(spec.kind)] =
            dbm_to_mw(dbm) / n / source.wall_plug_efficiency;
    }
    m.tuning_hold_mw = accel.calibration().hold_power_mw;
    m.calibration_energy_pj = accel.calibration().energy_pj;
    return m;
}

double step_latency(const StepRecord& step, TuningPolicy policy, const EnergyModel& model) {
    const TuningMechanism& imprint = policy == TuningPolicy::eo_hybrid ? model.eo : model.to;
    double settle = 0.0;
    if (step.weight_settle || step.modulator_settle) settle = imprint.settle_latency_s;
    if (step.vcsel_settle) settle = std::max(settle, model.constants.vcsel_settle_s);
    return settle + model.constants.propagation_s + model.constants.adc_conversion_s;
}

double latency_of_trace(const ExecutionTrace& trace, TuningPolicy policy, const EnergyModel& model) {
    double total = 0.0;
    for (const auto& s : trace.steps) total += step_latency(s, policy, model);
    return total;
}

EnergyBreakdown energy_of_trace(const ExecutionTrace& trace, const EnergyModel& model) {
    model.constants.validate();
    EnergyBreakdown e;
    if (trace.steps.empty() || trace.frames == 0) return e;
    const auto& k = model.constants;
    const TuningMechanism& imprint = model.imprint();
    const double dac = k.dac_energy_pj(model.dac_bits);
    const double adc = k.adc_energy_pj(model.adc_bits);
    double frame_latency = 0.0;
    for (const auto& s : trace.steps) {
        const double t = step_latency(s, model.policy, model);
        frame_latency += t;
        for (std::size_t kind = 0; kind < s.lit_channels.size(); ++kind)
            e.laser_pj += static_cast<double>(s.lit_channels[kind]) * model.laser_mw_per_channel[kind] * t *
                          kMwSecondsToPj;
        e.laser_pj += static_cast<double>(s.vcsel_drives) * k.vcsel_drive_pj;
        e.tuning_dynamic_pj += imprint.power_per_nm_mw * (s.weight_shift_nm + s.activation_shift_nm) *
                               (imprint.settle_latency_s + t) * kMwSecondsToPj;
        e.dac_pj += static_cast<double>(s.weight_dac + s.activation_dac) * dac;
        e.adc_pj += static_cast<double>(s.adc_reads) * adc;
        e.pd_pj += static_cast<double>(s.pd_reads) * k.pd_read_pj;
    }
    const double frames = static_cast<double>(trace.frames);
    const double calibrations = std::ceil(frames / k.calibration_window_frames);
    e.tuning_static_pj = model.tuning_hold_mw * frame_latency * frames * kMwSecondsToPj +
                         model.calibration_energy_pj * calibrations;
    return e;
}

SimReport make_report(const std::string& name, double accuracy, const ExecutionTrace& trace,
                      const EnergyModel& model, int resolution_bits, double crosstalk) {
    SimReport r;
    r.name = name;
    r.accuracy = accuracy;
    r.energy = energy_of_trace(trace, model);
    r.bits = static_cast<double>(trace.total_operand_bits());
    r.frames = trace.frames;
    r.resolution_bits = resolution_bits;
    r.crosstalk = crosstalk;
    r.latency_s = latency_of_trace(trace, model.policy, model);
    r.epb_pj_per_bit = r.bits > 0.0 ? r.energy.total_pj() / r.bits : kNaN;
    const double run_time = r.latency_s * r.frames;
    if (r.latency_s > 0.0 && run_time > 0.0) {
        r.fps = 1.0 / r.latency_s;
        auto mw = [run_time](double pj) { return pj / kMwSecondsToPj / run_time; };
        r.laser_mw = mw(r.energy.laser_pj);
        r.tuning_mw = mw(r.energy.tuning_static_pj + r.energy.tuning_dynamic_pj);
        r.dac_mw = mw(r.energy.dac_pj);
        r.adc_mw = mw(r.energy.adc_pj);
        r.pd_mw = mw(r.energy.pd_pj);
        const double watts = mw(r.energy.total_pj()) * 1e-3;
        r.kfps_per_watt = watts > 0.0 ? r.fps / 1e3 / watts : kNaN;
    } else {
        r.fps = kNaN;
        r.kfps_per_watt = kNaN;
    }
    if (resolution_bits > 0 && model.adc_bits < resolution_bits)
        r.warnings.push_back("adc_bits below the achievable analog resolution");
    return r;
}

SimReport reference_row(const std::string& name, double epb_pj_per_bit, double kfps_per_watt) {
    SimReport r;
    r.name = name;
    r.reference_row = true;
    r.accuracy = kNaN;
    r.epb_pj_per_bit = epb_pj_per_bit;
    r.kfps_per_watt = kfps_per_watt;
    r.fps = kNaN;
    r.laser_mw = r.tuning_mw = r.dac_mw = r.adc_mw = r.pd_mw = kNaN;
    r.resolution_bits = -1;
    return r;
}

std::vector<SimReport> published_reference_rows() {
    return {
        reference_row("P100", 971.31, 24.9),         reference_row("IXP 9282", 5099.68, 2.39),
        reference_row("AMD-TR", 5831.18, 2.09),      reference_row("DaDianNao", 58.33, 0.65),
        reference_row("Edge TPU", 697.37, 17.53),    reference_row("Null Hop", 2727.43, 4.48),
        reference_row("DEAP_CNN", 44453.88, 0.07),   reference_row("HolyLight", 274.13, 3.3),
    };
}

std::vector<SimReport> compare_configurations(std::vector<SimReport> reports) {
    if (reports.size() < 2) throw DomainError("compare_configurations needs at least two reports");
    std::stable_sort(reports.begin(), reports.end(), [](const SimReport& a, const SimReport& b) {
        const bool an = std::isnan(a.epb_pj_per_bit);
        const bool bn = std::isnan(b.epb_pj_per_bit);
        if (an != bn) return bn;  // undefined EPB sorts last
        if (!an && a.epb_pj_per_bit != b.epb_pj_per_bit) return a.epb_pj_per_bit < b.epb_pj_per_bit;
        return a.name < b.name;
    });
    return reports;
}

const std::array<const char*, 10> kReportColumns = {
    "name", "accuracy", "epb_pj_per_bit", "fps", "kfps_per_watt",
    "laser_mw", "tuning_mw", "dac_mw", "adc_mw", "resolution_bits"};

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {
std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}
}  // namespace

void write_report_csv(std::ostream& out, const std::vector<SimReport>& reports) {
    for (std::size_t i = 0; i < kReportColumns.size(); ++i) out << (i ? "," : "") << kReportColumns[i];
    out << '\n';
    for (const auto& r : reports) {
        out << csv_field(r.name) << ',' << format_number(r.accuracy) << ',' << format_number(r.epb_pj_per_bit)
            << ',' << format_number(r.fps) << ',' << format_number(r.kfps_per_watt) << ','
            << format_number(r.laser_mw) << ',' << format_number(r.tuning_mw) << ','
            << format_number(r.dac_mw) << ',' << format_number(r.adc_mw) << ','
            << (r.resolution_bits >= 0 ? std::to_string(r.resolution_bits) : std::string()) << '\n';
    }
}

std::string report_json(const std::vector<SimReport>& reports) {
    using nlohmann::ordered_json;
    auto num = [](double v) -> ordered_json { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); };
    ordered_json doc = ordered_json::array();
    for (const auto& r : reports) {
        ordered_json j;
        j["name"] = r.name;
        j["reference_row"] = r.reference_row;
        j["accuracy"] = num(r.accuracy);
        j["epb_pj_per_bit"] = num(r.epb_pj_per_bit);
        j["fps"] = num(r.fps);
        j["kfps_per_watt"] = num(r.kfps_per_watt);
        j["laser_mw"] = num(r.laser_mw);
        j["tuning_mw"] = num(r.tuning_mw);
        j["dac_mw"] = num(r.dac_mw);
        j["adc_mw"] = num(r.adc_mw);
        j["pd_mw"] = num(r.pd_mw);
        j["resolution_bits"] = r.resolution_bits;
        j["crosstalk"] = num(r.crosstalk);
        j["latency_s"] = num(r.latency_s);
        j["frames"] = r.frames;
        j["bits"] = r.bits;
        j["energy_pj"] = {{"laser", r.energy.laser_pj},
                          {"tuning_static", r.energy.tuning_static_pj},
                          {"tuning_dynamic", r.energy.tuning_dynamic_pj},
                          {"dac", r.energy.dac_pj},
                          {"adc", r.energy.adc_pj},
                          {"pd", r.energy.pd_pj},
                          {"total", r.energy.total_pj()}};
        j["warnings"] = r.warnings;
        doc.push_back(std::move(j));
    }
    return doc.dump(2);
}

}  // namespace lumen
