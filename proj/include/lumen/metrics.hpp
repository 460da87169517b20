#pragma once

// Energy, latency and throughput accounting over execution traces.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "lumen/arch_sim.hpp"

namespace lumen {

struct EnergyModel {
    EnergyConstants constants;
    int dac_bits = 16;
    int adc_bits = 16;
    TuningPolicy policy = TuningPolicy::eo_hybrid;
    TuningMechanism to = TuningMechanism::thermo_optic_default();
    TuningMechanism eo = TuningMechanism::electro_optic_default();
    std::array<double, 4> laser_mw_per_channel{};  // electrical, by VDUKind
    double tuning_hold_mw = 0.0;
    double calibration_energy_pj = 0.0;

    [[nodiscard]] const TuningMechanism& imprint() const {
        return policy == TuningPolicy::eo_hybrid ? eo : to;
    }
};

/// Builds the model from a calibrated accelerator: laser power from each VDU
/// kind's link budget and wall-plug efficiency, heater hold power and
/// one-time calibration energy.
EnergyModel make_energy_model(const Accelerator& accel);

struct EnergyBreakdown {
    double laser_pj = 0.0;
    double tuning_static_pj = 0.0;
    double tuning_dynamic_pj = 0.0;
    double dac_pj = 0.0;
    double adc_pj = 0.0;
    double pd_pj = 0.0;

    [[nodiscard]] double total_pj() const {
        return laser_pj + tuning_static_pj + tuning_dynamic_pj + dac_pj + adc_pj + pd_pj;
    }
};

/// max(weight settle, modulator/VCSEL settle) + propagation + ADC conversion.
double step_latency(const StepRecord& step, TuningPolicy policy, const EnergyModel& model);

/// Seconds per frame (the trace's steps describe one frame's schedule).
double latency_of_trace(const ExecutionTrace& trace, TuningPolicy policy, const EnergyModel& model);

/// Energy of every frame in the trace. Calibration is charged once per
/// started window of `calibration_window_frames` frames.
EnergyBreakdown energy_of_trace(const ExecutionTrace& trace, const EnergyModel& model);

struct SimReport {
    std::string name;
    double accuracy = 0.0;
    EnergyBreakdown energy;
    double bits = 0.0;
    double epb_pj_per_bit = 0.0;  // NaN when no bits were processed
    double latency_s = 0.0;       // per frame
    double fps = 0.0;             // NaN when latency is zero
    double kfps_per_watt = 0.0;
    double laser_mw = 0.0;
    double tuning_mw = 0.0;
    double dac_mw = 0.0;
    double adc_mw = 0.0;
    double pd_mw = 0.0;
    int resolution_bits = 0;
    double crosstalk = 0.0;
    int frames = 0;
    bool reference_row = false;  // external constants, not simulated
    std::vector<std::string> warnings;
};

SimReport make_report(const std::string& name, double accuracy, const ExecutionTrace& trace,
                      const EnergyModel& model, int resolution_bits, double crosstalk);

/// Published rows for other accelerators, passed through unchanged.
SimReport reference_row(const std::string& name, double epb_pj_per_bit, double kfps_per_watt);
std::vector<SimReport> published_reference_rows();

/// Sorted by EPB ascending; ties keep name order. Needs at least two reports.
std::vector<SimReport> compare_configurations(std::vector<SimReport> reports);

extern const std::array<const char*, 10> kReportColumns;

/// Shortest round-trip decimal form; "" for NaN.
std::string format_number(double v);
void write_report_csv(std::ostream& out, const std::vector<SimReport>& reports);
std::string report_json(const std::vector<SimReport>& reports);

}  // namespace lumen
