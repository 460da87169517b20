#pragma once

// WDM microring banks performing broadcast-and-weight multiply-accumulate.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "lumen/device.hpp"

namespace lumen {

struct WDMPlan {
    int channel_count = 1;
    double channel_spacing_nm = 1.0;
    double base_wavelength_nm = 1550.0;
    double fsr_nm = 18.0;

    [[nodiscard]] double wavelength(int k) const { return base_wavelength_nm + k * channel_spacing_nm; }
    void validate() const;
};

/// lambda_k = lambda_MR + k * spacing; all channels within one FSR.
/// Throws CapacityError (with the largest feasible n) otherwise.
WDMPlan allocate_channels(int n, double spacing_nm, const MRDesign& design);

/// State of one ring in a bank row. Shifts are red-positive, in nm, and are
/// the parts of the ring's offset that calibration did not remove.
struct RingSlot {
    double target_transmission = 1.0;
    double fpv_shift_nm = 0.0;
    double thermal_residual_nm = 0.0;
};

enum class InputImprint { mr_bank, direct_power };

/// One vector-dot-product bank: an input-imprinting row shared by both rails
/// and one weight row per rail (rail 0 positive, rail 1 negative). Single-rail
/// banks use only rail 0.
struct MRBank {
    WDMPlan plan;
    MRDesign weight_design;
    MRDesign input_design;
    bool dual_rail = true;
    InputImprint input_imprint = InputImprint::mr_bank;
    std::vector<RingSlot> input_slots;
    std::array<std::vector<RingSlot>, 2> weight_slots;

    static MRBank make(const WDMPlan& plan, const MRDesign& weight_design,
                       const MRDesign& input_design, bool dual_rail,
                       InputImprint imprint = InputImprint::mr_bank);

    [[nodiscard]] int channels() const { return plan.channel_count; }
    [[nodiscard]] int rails() const { return dual_rail ? 2 : 1; }
    /// Detuning that represents a full-scale value: min(FWHM, CS/2).
    [[nodiscard]] double full_scale_detuning_nm(const MRDesign& design) const;
    void validate() const;
};

struct NoiseConfig {
    bool fpv = false;
    bool thermal = false;
    bool heterodyne = false;
    bool pd = false;

    static NoiseConfig all() { return {true, true, true, true}; }
    static NoiseConfig none() { return {}; }
    [[nodiscard]] bool any() const { return fpv || thermal || heterodyne || pd; }
};

/// Maps a normalized value in [0,1] to the ring transmission that encodes it.
double encode_transmission(const MRDesign& design, double full_scale_detuning_nm, double value);
/// Inverse of encode_transmission.
double decode_transmission(const MRDesign& design, double full_scale_detuning_nm,
                           double transmission);

struct MacOptions {
    NoiseConfig noise;
    Photodetector pd;
    std::mt19937_64* rng = nullptr;  // required when noise.pd is set
};

/// Broadcast-and-weight dot product. Values are normalized: inputs/weights in
/// [0,1], or [-1,1] on dual-rail banks. Noiseless output equals sum x_i w_i,
/// so all-ones over N channels reads N. Both spans must have exactly N entries;
/// idle channels carry 0 (ring parked on resonance).
double bank_mac(MRBank& bank, std::span<const double> inputs, std::span<const double> weights,
                const MacOptions& options);

/// Per-channel leakage through non-matching rings, worst case over each
/// neighbour's modulation window, relative to a unit channel signal.
double heterodyne_crosstalk(const MRBank& bank);
double heterodyne_crosstalk(const WDMPlan& plan, const MRDesign& design);

/// floor(log2(1/noise)): 1 bit at 0.5, 0 above it, capped at `ceiling_bits`.
int achievable_resolution(double relative_noise, int ceiling_bits = 16);

struct LinkLossBudget {
    double coupling_db = 0.0;
    double propagation_db = 0.0;
    double mr_insertion_db = 0.0;
    double splitter_db = 0.0;
    double tuning_insertion_db = 0.0;

    [[nodiscard]] double total_db() const {
        return coupling_db + propagation_db + mr_insertion_db + splitter_db + tuning_insertion_db;
    }
    void validate() const;
};

struct LinkParameters {
    double waveguide_loss_db_per_mm = 0.3;
    double waveguide_length_mm = 2.0;
    double mr_through_loss_db = 0.02;  // per non-resonant ring passed
    double splitter_excess_db = 0.2;
};

/// Stage-by-stage loss for one channel that passes `rings_traversed` rings,
/// `active_rings` of which are tuned onto it, after a 1:fanout split.
LinkLossBudget make_link_budget(const LaserSource& laser, const LinkParameters& link,
                                const TuningMechanism& imprint_tuning, int rings_traversed,
                                int active_rings, int fanout);

/// Per-wavelength launch power in dBm. Throws InfeasibleLinkError above
/// `max_safe_dbm`.
double required_laser_power(const LinkLossBudget& budget, const Photodetector& pd,
                            int channel_count, double max_safe_dbm = 20.0);

}  // namespace lumen
