#include "lumen/device.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "lumen/errors.hpp"

namespace lumen {

double MRDesign::min_transmission() const { return std::pow(10.0, -extinction_db / 10.0); }

void MRDesign::validate() const {
    auto fail = [this](const std::string& msg) {
        throw DesignError("MR design '" + name + "': " + msg);
    };
    if (!(q_factor > 0.0)) fail("q_factor must be > 0");
    if (!(fsr_nm > 0.0)) fail("fsr must be > 0");
    if (!(kappa > 0.0 && kappa < 1.0)) fail("kappa must lie in (0,1)");
    if (!(extinction_db > 0.0)) fail("extinction_db must be > 0");
    if (!(resonant_wavelength_nm > 0.0)) fail("resonant_wavelength must be > 0");
    if (!(fwhm_nm() < fsr_nm)) fail("fwhm (lambda/Q) must be smaller than the FSR");
    if (!(fpv_std_shift_nm >= 0.0)) fail("fpv_std_shift must be >= 0");
    if (!(fpv_mean_shift_nm >= 0.0)) fail("fpv_mean_shift must be >= 0");
}

double fsr_from_radius(double radius_um, double wavelength_nm, double group_index) {
    const double circumference_nm = 2.0 * std::numbers::pi * radius_um * 1e3;
    return wavelength_nm * wavelength_nm / (group_index * circumference_nm);
}

namespace presets {

namespace {
MRDesign make(std::string name, double radius, double wi, double wr, double q, double kappa,
              double fpv_mean, double fpv_std) {
    MRDesign d;
    d.name = std::move(name);
    d.radius_um = radius;
    d.input_width_nm = wi;
    d.ring_width_nm = wr;
    d.q_factor = q;
    d.kappa = kappa;
    d.fsr_nm = fsr_from_radius(radius);
    d.fpv_mean_shift_nm = fpv_mean;
    d.fpv_std_shift_nm = fpv_std;
    return d;
}
}  // namespace

// Measured FPV statistics and Q of the three fabricated designs.
MRDesign mr1() { return make("MR1", 5.0, 450, 450, 500, 0.25, 7.1, 0.38); }
MRDesign mr2() { return make("MR2", 5.0, 400, 800, 1800, 0.22, 1.8, 0.17); }
MRDesign mr3() { return make("MR3", 5.0, 400, 1000, 600, 0.30, 2.1, 0.25); }

// High-Q weight ring; FPV statistics of the FPV-resilient MR3 family.
MRDesign crosslight() { return make("crosslight", 5.0, 400, 1000, 8000, 0.15, 2.1, 0.25); }
MRDesign sonic() { return make("sonic", 5.0, 450, 700, 5000, 0.18, 2.1, 0.25); }

// BNN rings. FPV here is the within-bank spread left after the bank's
// common-mode offset is tracked by the laser grid, hence the zero mean.
MRDesign robin_weight() { return make("robin_weight", 1.5, 450, 450, 4000, 0.2, 0.0, 0.08); }
MRDesign robin_activation() {
    return make("robin_activation", 5.0, 450, 760, 4000, 0.2, 0.0, 0.05);
}

MRDesign broadband() {
    MRDesign d = make("broadband", 1.5, 450, 450, 40, 0.6, 0.0, 0.0);
    d.is_broadband = true;
    return d;
}

std::optional<MRDesign> by_name(std::string_view name) {
    if (name == "MR1" || name == "mr1") return mr1();
    if (name == "MR2" || name == "mr2") return mr2();
    if (name == "MR3" || name == "mr3") return mr3();
    if (name == "crosslight") return crosslight();
    if (name == "sonic") return sonic();
    if (name == "robin_weight") return robin_weight();
    if (name == "robin_activation") return robin_activation();
    if (name == "broadband") return broadband();
    return std::nullopt;
}

std::vector<std::string> names() {
    return {"MR1", "MR2", "MR3", "crosslight", "sonic", "robin_weight", "robin_activation",
            "broadband"};
}

}  // namespace presets

TuningMechanism TuningMechanism::thermo_optic_default() {
    TuningMechanism m;
    m.kind = TuningKind::thermo_optic;
    m.max_shift_nm = 10.0;
    m.power_per_nm_mw = 10.0;
    m.settle_latency_s = 4e-6;
    m.insertion_loss_db = 0.1;
    m.actuator_bits = 8;
    return m;
}

TuningMechanism TuningMechanism::electro_optic_default() {
    TuningMechanism m;
    m.kind = TuningKind::electro_optic;
    m.max_shift_nm = 0.8;
    m.power_per_nm_mw = 4.0;
    m.settle_latency_s = 5e-9;
    m.insertion_loss_db = 0.5;
    m.actuator_bits = 8;
    return m;
}

void TuningMechanism::validate() const {
    const std::string tag = to_string(kind) + " tuning: ";
    if (!(max_shift_nm > 0.0)) throw DesignError(tag + "max_shift must be > 0");
    if (!(power_per_nm_mw >= 0.0)) throw DesignError(tag + "power_per_nm must be >= 0");
    if (!(insertion_loss_db >= 0.0)) throw DesignError(tag + "insertion_loss must be >= 0");
    if (actuator_bits && *actuator_bits < 1) throw DesignError(tag + "actuator_bits must be >= 1");
    if (kind == TuningKind::thermo_optic) {
        if (!(settle_latency_s >= 1e-7 && settle_latency_s < 1e-3))
            throw DesignError(tag + "settle latency must be in the microsecond range");
    } else {
        if (!(settle_latency_s >= 1e-11 && settle_latency_s < 1e-7))
            throw DesignError(tag + "settle latency must be in the nanosecond range");
    }
}

double TuningMechanism::step_nm() const {
    if (!actuator_bits) return 0.0;
    return max_shift_nm / static_cast<double>((std::uint64_t{1} << *actuator_bits) - 1);
}

double TuningMechanism::quantize(double shift_nm) const {
    const double clamped = std::clamp(shift_nm, 0.0, max_shift_nm);
    if (!actuator_bits) return clamped;
    const double step = step_nm();
    return std::min(std::round(clamped / step) * step, max_shift_nm);
}

std::string to_string(TuningKind kind) {
    return kind == TuningKind::thermo_optic ? "thermo_optic" : "electro_optic";
}

void Photodetector::validate() const {
    if (!(responsivity_a_per_w > 0.0)) throw DesignError("photodetector: responsivity must be > 0");
    if (!(noise_floor_rel >= 0.0 && noise_floor_rel < 1.0))
        throw DesignError("photodetector: noise_floor_rel must lie in [0,1)");
}

LaserSource LaserSource::off_chip_default() {
    LaserSource l;
    l.kind = LaserKind::off_chip;
    l.wall_plug_efficiency = 0.2;
    l.coupling_loss_db = 1.6;
    l.directly_modulated = false;
    return l;
}

LaserSource LaserSource::vcsel_default() {
    LaserSource l;
    l.kind = LaserKind::on_chip_vcsel;
    l.wall_plug_efficiency = 0.15;
    l.coupling_loss_db = 0.5;
    l.directly_modulated = true;
    return l;
}

void LaserSource::validate() const {
    if (!(wall_plug_efficiency > 0.0 && wall_plug_efficiency <= 1.0))
        throw DesignError("laser: wall_plug_efficiency must lie in (0,1]");
    if (!(coupling_loss_db >= 0.0)) throw DesignError("laser: coupling_loss_db must be >= 0");
}

double transmission_at_detuning(const MRDesign& design, double detuning_nm) {
    const double fsr = design.fsr_nm;
    const double folded = detuning_nm - fsr * std::ceil(detuning_nm / fsr - 0.5);
    const double t_min = design.min_transmission();
    const double u = 2.0 * folded / design.fwhm_nm();
    return 1.0 - (1.0 - t_min) / (1.0 + u * u);
}

double mr_through_transmission(const MRDesign& design, double probe_wavelength_nm,
                               double resonance_shift_nm) {
    return transmission_at_detuning(
        design, probe_wavelength_nm - (design.resonant_wavelength_nm + resonance_shift_nm));
}

double weight_to_detuning(const MRDesign& design, double target_transmission) {
    const double t_min = design.min_transmission();
    if (!(target_transmission >= t_min && target_transmission < 1.0)) {
        std::ostringstream os;
        os << "target transmission " << target_transmission << " outside achievable interval ["
           << t_min << ", 1)";
        throw OutOfRangeError(os.str());
    }
    const double u = std::sqrt((target_transmission - t_min) / (1.0 - target_transmission));
    return u * design.fwhm_nm() / 2.0;
}

double sample_fpv(const MRDesign& design, std::mt19937_64& rng) {
    if (design.fpv_std_shift_nm == 0.0) return std::max(design.fpv_mean_shift_nm, 0.0);
    std::normal_distribution<double> dist(design.fpv_mean_shift_nm, design.fpv_std_shift_nm);
    // Rejection keeps the draw inside the truncated support.
    for (;;) {
        const double s = dist(rng);
        if (s >= 0.0) return s;
    }
}

TuningCost tuning_cost(const TuningMechanism& mechanism, double required_shift_nm) {
    if (!(required_shift_nm >= 0.0)) throw DomainError("required shift must be >= 0");
    if (required_shift_nm > mechanism.max_shift_nm) {
        std::ostringstream os;
        os << to_string(mechanism.kind) << " tuning cannot reach " << required_shift_nm
           << " nm (max " << mechanism.max_shift_nm << " nm)";
        throw RangeExceededError(os.str());
    }
    return {mechanism.power_per_nm_mw * mechanism.quantize(required_shift_nm),
            mechanism.settle_latency_s};
}

double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }

}  // namespace lumen
