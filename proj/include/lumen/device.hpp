#pragma once

// Single photonic devices: microring resonators, tuning actuators,
// photodetectors and laser sources.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace lumen {

/// Geometric and spectral description of an all-pass microring.
/// Wavelengths are in nanometres, radius in micrometres, widths in nanometres.
struct MRDesign {
    std::string name;
    double radius_um = 5.0;
    double input_width_nm = 450.0;
    double ring_width_nm = 450.0;
    double q_factor = 5000.0;
    double kappa = 0.2;
    double fsr_nm = 18.0;
    double resonant_wavelength_nm = 1550.0;
    double extinction_db = 20.0;
    double fpv_mean_shift_nm = 0.0;
    double fpv_std_shift_nm = 0.0;
    bool is_broadband = false;

    [[nodiscard]] double fwhm_nm() const { return resonant_wavelength_nm / q_factor; }
    /// On-resonance floor of the through-port notch, 10^(-ER/10).
    [[nodiscard]] double min_transmission() const;
    /// Throws DesignError when an invariant does not hold.
    void validate() const;
};

/// Free spectral range of a ring of the given radius, lambda^2 / (n_g * 2 pi R).
double fsr_from_radius(double radius_um, double wavelength_nm = 1550.0, double group_index = 4.2);

namespace presets {
MRDesign mr1();
MRDesign mr2();
MRDesign mr3();
MRDesign crosslight();
MRDesign sonic();
MRDesign robin_weight();
MRDesign robin_activation();
MRDesign broadband();
std::optional<MRDesign> by_name(std::string_view name);
std::vector<std::string> names();
}  // namespace presets

enum class TuningKind { thermo_optic, electro_optic };

struct TuningMechanism {
    TuningKind kind = TuningKind::thermo_optic;
    double max_shift_nm = 10.0;
    double power_per_nm_mw = 10.0;
    double settle_latency_s = 4e-6;
    double insertion_loss_db = 0.0;
    // Drive-DAC resolution. nullopt means an ideal, continuous actuator.
    std::optional<int> actuator_bits = 8;

    static TuningMechanism thermo_optic_default();
    static TuningMechanism electro_optic_default();

    void validate() const;
    /// Distance between adjacent representable shifts; 0 for ideal actuators.
    [[nodiscard]] double step_nm() const;
    /// Rounds to the nearest representable shift in [0, max_shift].
    [[nodiscard]] double quantize(double shift_nm) const;
};

std::string to_string(TuningKind kind);

struct Photodetector {
    double responsivity_a_per_w = 1.0;
    // Minimum detectable optical power. Stands in for the "input power larger
    // than the responsivity" requirement, which is read as a sensitivity floor.
    double sensitivity_dbm = -20.0;
    double noise_floor_rel = 1e-3;

    void validate() const;
};

enum class LaserKind { off_chip, on_chip_vcsel };

struct LaserSource {
    LaserKind kind = LaserKind::off_chip;
    double wall_plug_efficiency = 0.2;
    double coupling_loss_db = 1.6;
    double per_wavelength_power_dbm = 0.0;
    bool directly_modulated = false;

    static LaserSource off_chip_default();
    static LaserSource vcsel_default();
    void validate() const;
};

/// Lorentzian all-pass through-port transmission.
/// delta = probe - (lambda_MR + shift), folded into (-FSR/2, FSR/2].
double mr_through_transmission(const MRDesign& design, double probe_wavelength_nm,
                               double resonance_shift_nm);

/// Same model evaluated directly at a detuning from resonance.
double transmission_at_detuning(const MRDesign& design, double detuning_nm);

/// Analytic inverse of the Lorentzian: red-shift detuning giving `target`.
/// Throws OutOfRangeError outside [T_min, 1).
double weight_to_detuning(const MRDesign& design, double target_transmission);

/// Truncated-Gaussian red shift drawn from the design's FPV statistics.
double sample_fpv(const MRDesign& design, std::mt19937_64& rng);

struct TuningCost {
    double power_mw = 0.0;
    double latency_s = 0.0;
};

/// Throws RangeExceededError when the shift is beyond the mechanism's reach.
TuningCost tuning_cost(const TuningMechanism& mechanism, double required_shift_nm);

double dbm_to_mw(double dbm);
double mw_to_dbm(double mw);

}  // namespace lumen
