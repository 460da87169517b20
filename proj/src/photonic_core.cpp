#include "lumen/photonic_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lumen/errors.hpp"

namespace lumen {

void WDMPlan::validate() const {
    if (channel_count < 1) throw CapacityError("channel count must be >= 1", 0);
    if (!(channel_spacing_nm > 0.0)) throw DomainError("channel spacing must be > 0");
    if (!((channel_count - 1) * channel_spacing_nm < fsr_nm)) {
        const int max_n = static_cast<int>(std::ceil(fsr_nm / channel_spacing_nm));
        std::ostringstream os;
        os << channel_count << " channels at " << channel_spacing_nm
           << " nm spacing do not fit in one FSR of " << fsr_nm << " nm (max feasible " << max_n
           << ")";
        throw CapacityError(os.str(), max_n);
    }
}

WDMPlan allocate_channels(int n, double spacing_nm, const MRDesign& design) {
    if (n < 1) throw CapacityError("channel count must be >= 1", 0);
    if (!(spacing_nm > 0.0)) throw DomainError("channel spacing must be > 0");
    WDMPlan plan{n, spacing_nm, design.resonant_wavelength_nm, design.fsr_nm};
    plan.validate();
    return plan;
}

MRBank MRBank::make(const WDMPlan& plan, const MRDesign& weight_design,
                    const MRDesign& input_design, bool dual_rail, InputImprint imprint) {
    MRBank bank;
    bank.plan = plan;
    bank.weight_design = weight_design;
    bank.input_design = input_design;
    bank.dual_rail = dual_rail;
    bank.input_imprint = imprint;
    const auto n = static_cast<std::size_t>(plan.channel_count);
    bank.input_slots.assign(n, RingSlot{});
    bank.weight_slots[0].assign(n, RingSlot{});
    bank.weight_slots[1].assign(dual_rail ? n : 0, RingSlot{});
    bank.validate();
    return bank;
}

double MRBank::full_scale_detuning_nm(const MRDesign& design) const {
    const double fwhm = design.fwhm_nm();
    return plan.channel_count > 1 ? std::min(fwhm, plan.channel_spacing_nm / 2.0) : fwhm;
}

void MRBank::validate() const {
    plan.validate();
    weight_design.validate();
    if (input_imprint == InputImprint::mr_bank) input_design.validate();
    const auto n = static_cast<std::size_t>(plan.channel_count);
    if (input_slots.size() != n || weight_slots[0].size() != n ||
        weight_slots[1].size() != (dual_rail ? n : 0))
        throw ShapeError("bank slot count must equal the channel count");
}

double encode_transmission(const MRDesign& design, double full_scale_detuning_nm, double value) {
    const double t_min = design.min_transmission();
    const double t_fs = transmission_at_detuning(design, full_scale_detuning_nm);
    return t_min + value * (t_fs - t_min);
}

double decode_transmission(const MRDesign& design, double full_scale_detuning_nm,
                           double transmission) {
    const double t_min = design.min_transmission();
    const double t_fs = transmission_at_detuning(design, full_scale_detuning_nm);
    return (transmission - t_min) / (t_fs - t_min);
}

namespace {

// Per-design constants hoisted out of the per-channel loops.
struct Lorentz {
    double t_min = 0.0;
    double fwhm = 1.0;
    double fsr = 1.0;
    double t_fs = 1.0;

    Lorentz(const MRDesign& d, double fs_detuning)
        : t_min(d.min_transmission()), fwhm(d.fwhm_nm()), fsr(d.fsr_nm),
          t_fs(transmission_at_detuning(d, fs_detuning)) {}

    [[nodiscard]] double transmission(double detuning) const {
        const double folded =
            std::abs(detuning) < 0.5 * fsr ? detuning : detuning - fsr * std::ceil(detuning / fsr - 0.5);
        const double u = 2.0 * folded / fwhm;
        return 1.0 - (1.0 - t_min) / (1.0 + u * u);
    }
    [[nodiscard]] double encode(double v) const { return t_min + v * (t_fs - t_min); }
    [[nodiscard]] double decode(double t) const { return (t - t_min) / (t_fs - t_min); }
};

struct RowState {
    const MRDesign* design = nullptr;
    double fs_detuning = 0.0;
    std::vector<double> shift;  // total resonance offset per ring
    std::vector<double> value;  // decoded value seen by the ring's own channel
};

void imprint_row(RowState& row, std::vector<RingSlot>& slots, std::span<const double> values,
                 const NoiseConfig& noise) {
    const auto n = slots.size();
    const Lorentz lz(*row.design, row.fs_detuning);
    row.shift.assign(n, 0.0);
    row.value.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double target = lz.encode(values[i]);
        slots[i].target_transmission = target;
        double shift = weight_to_detuning(*row.design, target);
        if (noise.fpv) shift += slots[i].fpv_shift_nm;
        if (noise.thermal) shift += slots[i].thermal_residual_nm;
        row.shift[i] = shift;
        row.value[i] = lz.decode(lz.transmission(-shift));
    }
}

// Product of through transmissions of every other ring of `row` at channel i.
double leakage_factor(const RowState& row, const WDMPlan& plan, std::size_t i) {
    const Lorentz lz(*row.design, row.fs_detuning);
    double h = 1.0;
    for (std::size_t j = 0; j < row.shift.size(); ++j) {
        if (j == i) continue;
        const double detuning =
            (static_cast<double>(i) - static_cast<double>(j)) * plan.channel_spacing_nm - row.shift[j];
        h *= lz.transmission(detuning);
    }
    return h;
}

// Smallest |folded detuning| over ring offsets in [delta - window, delta].
double closest_approach(double delta, double window, double fsr) {
    const double lo = delta - window;
    const double m = std::ceil(lo / fsr);
    if (m * fsr <= delta) return 0.0;
    auto fold = [fsr](double d) { return std::abs(d - fsr * std::ceil(d / fsr - 0.5)); };
    return std::min(fold(lo), fold(delta));
}

// Notch depth at an already folded detuning.
double row_worst_case(const WDMPlan& plan, const MRDesign& design, double window, int i) {
    const double depth = 1.0 - design.min_transmission();
    const double fwhm = design.fwhm_nm();
    double noise = 0.0;
    for (int j = 0; j < plan.channel_count; ++j) {
        if (j == i) continue;
        const double delta = (i - j) * plan.channel_spacing_nm;
        const double u = 2.0 * closest_approach(delta, window, plan.fsr_nm) / fwhm;
        noise += depth / (1.0 + u * u);
    }
    return noise;
}

}  // namespace

double bank_mac(MRBank& bank, std::span<const double> inputs, std::span<const double> weights,
                const MacOptions& options) {
    const auto n = static_cast<std::size_t>(bank.channels());
    if (inputs.size() != n || weights.size() != n) {
        std::ostringstream os;
        os << "bank_mac expects " << n << " inputs and weights, got " << inputs.size() << " and "
           << weights.size();
        throw ShapeError(os.str());
    }
    const double lo = bank.dual_rail ? -1.0 : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(inputs[i] >= lo && inputs[i] <= 1.0) || !(weights[i] >= lo && weights[i] <= 1.0)) {
            throw DomainError(bank.dual_rail
                                  ? "dual-rail bank values must lie in [-1,1]"
                                  : "single-rail bank values must lie in [0,1] (signed value on a "
                                    "single-rail bank)");
        }
    }
    const NoiseConfig& noise = options.noise;
    if (noise.pd && options.rng == nullptr) throw DomainError("pd noise requires a random source");

    // Route each channel's magnitude product to the rail matching its sign.
    std::vector<double> in_mag(n), rail_w[2];
    rail_w[0].assign(n, 0.0);
    rail_w[1].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        in_mag[i] = std::abs(inputs[i]);
        const bool negative = (inputs[i] < 0.0) != (weights[i] < 0.0) && inputs[i] != 0.0 &&
                              weights[i] != 0.0;
        rail_w[negative ? 1 : 0][i] = std::abs(weights[i]);
    }

    RowState in_row;
    const bool mr_inputs = bank.input_imprint == InputImprint::mr_bank;
    if (mr_inputs) {
        in_row.design = &bank.input_design;
        in_row.fs_detuning = bank.full_scale_detuning_nm(bank.input_design);
        imprint_row(in_row, bank.input_slots, in_mag, noise);
    } else {
        in_row.value = in_mag;
    }

    std::vector<double> in_leak(n, 1.0);
    if (noise.heterodyne && mr_inputs)
        for (std::size_t i = 0; i < n; ++i) in_leak[i] = leakage_factor(in_row, bank.plan, i);

    double rail_out[2] = {0.0, 0.0};
    for (int r = 0; r < bank.rails(); ++r) {
        RowState w_row;
        w_row.design = &bank.weight_design;
        w_row.fs_detuning = bank.full_scale_detuning_nm(bank.weight_design);
        imprint_row(w_row, bank.weight_slots[r], rail_w[r], noise);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double term = in_row.value[i] * w_row.value[i];
            if (noise.heterodyne) {
                term *= leakage_factor(w_row, bank.plan, i) * in_leak[i];
            }
            acc += term;
        }
        if (noise.pd) {
            std::normal_distribution<double> pd_noise(
                0.0, options.pd.noise_floor_rel * static_cast<double>(n));
            acc += pd_noise(*options.rng);
        }
        rail_out[r] = acc;
    }
    return rail_out[0] - rail_out[1];
}

double heterodyne_crosstalk(const WDMPlan& plan, const MRDesign& design) {
    plan.validate();
    if (plan.channel_count == 1) return 0.0;
    const double window = std::min(design.fwhm_nm(), plan.channel_spacing_nm / 2.0);
    double worst = 0.0;
    for (int i = 0; i < plan.channel_count; ++i)
        worst = std::max(worst, row_worst_case(plan, design, window, i));
    return worst;
}

double heterodyne_crosstalk(const MRBank& bank) {
    const auto& plan = bank.plan;
    if (plan.channel_count == 1) return 0.0;
    const double w_window = bank.full_scale_detuning_nm(bank.weight_design);
    const double in_window = bank.full_scale_detuning_nm(bank.input_design);
    double worst = 0.0;
    for (int i = 0; i < plan.channel_count; ++i) {
        double noise = row_worst_case(plan, bank.weight_design, w_window, i);
        if (bank.input_imprint == InputImprint::mr_bank)
            noise += row_worst_case(plan, bank.input_design, in_window, i);
        worst = std::max(worst, noise);
    }
    return worst;
}

int achievable_resolution(double relative_noise, int ceiling_bits) {
    if (!(relative_noise >= 0.0)) throw DomainError("relative noise must be >= 0");
    if (relative_noise == 0.0) return ceiling_bits;
    const double bits = std::floor(-std::log2(relative_noise));
    if (bits <= 0.0) return 0;
    return static_cast<int>(std::min<double>(bits, ceiling_bits));
}

void LinkLossBudget::validate() const {
    for (double stage : {coupling_db, propagation_db, mr_insertion_db, splitter_db,
                         tuning_insertion_db}) {
        if (!(stage >= 0.0)) throw DomainError("link loss stages must be >= 0 dB");
    }
}

LinkLossBudget make_link_budget(const LaserSource& laser, const LinkParameters& link,
                                const TuningMechanism& imprint_tuning, int rings_traversed,
                                int active_rings, int fanout) {
    LinkLossBudget b;
    b.coupling_db = laser.coupling_loss_db;
    b.propagation_db = link.waveguide_loss_db_per_mm * link.waveguide_length_mm;
    b.mr_insertion_db = link.mr_through_loss_db * std::max(rings_traversed, 0);
    b.splitter_db = fanout > 1 ? 10.0 * std::log10(static_cast<double>(fanout)) + link.splitter_excess_db
                               : 0.0;
    b.tuning_insertion_db = imprint_tuning.insertion_loss_db * std::max(active_rings, 0);
    b.validate();
    return b;
}

double required_laser_power(const LinkLossBudget& budget, const Photodetector& pd,
                            int channel_count, double max_safe_dbm) {
    budget.validate();
    if (channel_count < 1) throw DomainError("channel count must be >= 1");
    const double dbm =
        pd.sensitivity_dbm + budget.total_db() + 10.0 * std::log10(static_cast<double>(channel_count));
    if (dbm > max_safe_dbm) {
        std::ostringstream os;
        os << "required laser power " << dbm << " dBm exceeds safe maximum " << max_safe_dbm << " dBm";
        throw InfeasibleLinkError(os.str());
    }
    return dbm;
}

}  // namespace lumen
