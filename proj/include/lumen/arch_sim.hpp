#pragma once

// Accelerator assembly, FPV calibration, and execution of layer schedules
// through the noisy photonic MAC model.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lumen/device.hpp"
#include "lumen/mapper.hpp"
#include "lumen/photonic_core.hpp"
#include "lumen/quant.hpp"
#include "lumen/thermal.hpp"

namespace lumen {

enum class TuningPolicy { to_only, eo_hybrid };

std::string to_string(TuningPolicy policy);
TuningPolicy parse_tuning_policy(const std::string& text);

struct VDUSpec {
    VDUKind kind = VDUKind::fc_vdu;
    int count = 1;
    int granularity = 16;
    double channel_spacing_nm = 1.0;
    std::string weight_mr = "crosslight";
    std::string activation_mr = "crosslight";
    std::optional<std::string> bn_mr;
    InputImprint input_source = InputImprint::mr_bank;
};

struct ThermalLayout {
    double pitch_um = 10.0;
    double decay_length_um = 10.0;
    bool ted = true;  // eigenmode solve; false drives heaters independently
};

/// Converter, readout and timing constants. Every value is overridable.
struct EnergyConstants {
    double dac_e_base_pj = 1.0;
    int dac_bits_base = 8;
    double adc_to_dac_ratio = 4.0;
    double pd_read_pj = 0.1;
    double vcsel_drive_pj = 0.5;
    double vcsel_settle_s = 1e-10;
    double propagation_s = 2e-11;
    double adc_conversion_s = 1e-10;
    double calibration_window_frames = 1e6;

    [[nodiscard]] double dac_energy_pj(int bits) const;
    [[nodiscard]] double adc_energy_pj(int bits) const;
    /// Throws ConfigError naming the first non-positive constant.
    void validate() const;
};

struct AcceleratorConfig {
    std::map<std::string, MRDesign> designs;  // keyed by lower-case name
    std::vector<VDUSpec> vdus;
    int dac_bits = 16;
    int adc_bits = 16;
    int hw_weight_bits = 16;
    TuningMechanism to = TuningMechanism::thermo_optic_default();
    TuningMechanism eo = TuningMechanism::electro_optic_default();
    Photodetector pd;
    LaserSource laser = LaserSource::off_chip_default();
    LaserSource vcsel = LaserSource::vcsel_default();
    LinkParameters link;
    double max_laser_dbm = 20.0;
    ThermalLayout thermal;
    TuningPolicy policy = TuningPolicy::eo_hybrid;
    NoiseConfig noise = NoiseConfig::all();
    EnergyConstants energy;
    double tuning_level = 1.0;
    bool compress_sparse = true;
    double dead_fraction_limit = 0.05;

    /// Preset designs plus one VDU of each of conv, fc and bnn kinds.
    static AcceleratorConfig defaults();

    [[nodiscard]] const MRDesign& design(const std::string& name) const;
    [[nodiscard]] const VDUSpec* vdu(VDUKind kind) const;
    /// Mechanism that imprints weights and activations under the policy.
    [[nodiscard]] const TuningMechanism& imprint_mechanism() const;
    void validate() const;
};

struct CalibrationReport {
    int rings = 0;
    int dead = 0;
    int corrected = 0;
    double tuning_level = 1.0;
    double mean_raw_shift_nm = 0.0;     // mean FPV magnitude over all rings
    double mean_correction_nm = 0.0;    // mean target over corrected rings
    double hold_power_mw = 0.0;         // heaters held for the whole run
    double energy_pj = 0.0;             // one-time settle energy
    double latency_s = 0.0;
    double residual_rms_nm = 0.0;       // corrected rings, after common-mode removal
};

struct VDUInstance {
    VDUKind kind = VDUKind::fc_vdu;
    int index = 0;  // within its kind
    MRBank bank;
    std::optional<MRDesign> bn_design;
};

/// One MR in the calibration bookkeeping.
struct RingRecord {
    int vdu = 0;      // index into Accelerator::vdus()
    int row = 0;      // 0 input row, 1 rail-0 weights, 2 rail-1 weights
    int channel = 0;
    double raw_shift_nm = 0.0;  // FPV magnitude the heater must remove
    bool dead = false;
    bool corrected = false;
};

class Accelerator {
public:
    explicit Accelerator(AcceleratorConfig config);

    [[nodiscard]] const AcceleratorConfig& config() const { return config_; }
    [[nodiscard]] std::vector<VDUInstance>& vdus() { return vdus_; }
    [[nodiscard]] const std::vector<VDUInstance>& vdus() const { return vdus_; }
    /// Instances of one kind, in index order.
    [[nodiscard]] std::vector<int> vdu_indices(VDUKind kind) const;
    [[nodiscard]] const std::vector<RingRecord>& rings() const { return rings_; }
    [[nodiscard]] const CalibrationReport& calibration() const { return calibration_; }

    /// Samples FPV per MR (zero when FPV noise is off), marks MRs beyond the TO
    /// range dead, and corrects at the configured tuning level. Throws
    /// CalibrationError when more than the dead-fraction limit fails.
    void calibrate(std::uint64_t seed);

    /// Corrects, within each VDU, the `fraction` of live MRs with the largest
    /// FPV shifts.
    void apply_tuning_level(double fraction);

    /// Worst per-bank heterodyne crosstalk over the instantiated VDUs.
    [[nodiscard]] double worst_crosstalk() const;

private:
    AcceleratorConfig config_;
    std::vector<VDUInstance> vdus_;
    std::vector<RingRecord> rings_;
    CalibrationReport calibration_;
};

/// Parameters of one layer as stored in the weight blob.
struct LayerWeights {
    std::vector<double> weights;  // rows x fan_in, row-major
    std::vector<double> bias;
    std::vector<double> bn_scale;
    std::vector<double> bn_shift;
};

struct Model {
    std::string name;
    std::vector<LayerIR> layers;
    std::vector<LayerWeights> params;
    QuantSpec quant;

    void validate() const;
};

/// A layer prepared for one accelerator: quantized weights, placement and
/// schedule.
struct DeployedLayer {
    LayerIR ir;
    QuantSpec quant;
    VDUKind vdu = VDUKind::fc_vdu;
    std::vector<double> weights;  // effective (dequantized) values, rows x fan_in
    double weight_scale = 1.0;    // |normalized hardware weight| <= 1 maps to this
    std::vector<std::int64_t> codes;  // integer weights when bit-sliced
    double code_step = 0.0;
    std::vector<double> bias;
    std::vector<double> multiplier;  // per row
    std::vector<double> shift;       // per row
    bool optical_bn = false;         // multiplier applied by the broadband MR
    double bn_max = 1.0;
    std::optional<CompressedMatrix> compressed;
    Schedule schedule;

    [[nodiscard]] bool sliced() const { return schedule.slicing.slice_count > 1; }
    /// Accumulator full scale seen by the ADC chain for an input of the given
    /// scale; the error budget of a noiseless run is relative to this.
    [[nodiscard]] double output_full_scale(double input_scale) const;
    [[nodiscard]] int weight_bits_on_hardware() const;
};

struct DeployedModel {
    std::string name;
    std::vector<DeployedLayer> layers;
};

DeployedLayer deploy_layer(const LayerIR& layer, const LayerWeights& params, const QuantSpec& model_quant,
                           const AcceleratorConfig& config);
DeployedModel deploy_model(const Model& model, const AcceleratorConfig& config);

/// DAC-side quantization of a layer input: unsigned when all values are >= 0,
/// symmetric otherwise, over max |x|. Returns normalized values in [-1,1].
struct QuantizedInput {
    std::vector<double> normalized;
    double scale = 0.0;
};
QuantizedInput quantize_layer_input(std::span<const double> input, int bits);

double apply_activation(Activation act, double v);

struct StepRecord {
    int active_vdus = 0;
    std::int64_t macs = 0;
    std::int64_t padded_slots = 0;
    std::int64_t weight_updates = 0;
    std::int64_t activation_updates = 0;
    double weight_shift_nm = 0.0;
    double activation_shift_nm = 0.0;
    std::int64_t weight_dac = 0;
    std::int64_t activation_dac = 0;
    std::int64_t adc_reads = 0;
    std::int64_t pd_reads = 0;
    std::int64_t vcsel_drives = 0;
    std::int64_t operand_bits = 0;
    std::array<std::int64_t, 4> lit_channels{};  // by VDUKind
    bool weight_settle = false;
    bool modulator_settle = false;
    bool vcsel_settle = false;

    void add(const StepRecord& other);
};

/// Step records of one frame; counts are summed over `frames` identical
/// schedules when traces are merged.
struct ExecutionTrace {
    int frames = 0;
    std::vector<StepRecord> steps;

    [[nodiscard]] std::int64_t total_macs() const;
    [[nodiscard]] std::int64_t total_operand_bits() const;
    void append(const ExecutionTrace& layer_trace);  // sequential layers
    void merge(const ExecutionTrace& frame_trace);   // same schedule, another frame
};

struct RunOptions {
    NoiseConfig noise;
    std::mt19937_64* rng = nullptr;  // pd noise
};

struct LayerResult {
    std::vector<double> pre_activation;
    std::vector<double> outputs;
    double input_scale = 0.0;
    ExecutionTrace trace;
};

/// Executes one deployed layer's schedule step by step on the accelerator's
/// banks. Throws ScheduleError when an item exceeds its VDU granularity.
LayerResult run_schedule(Accelerator& accel, const DeployedLayer& layer, std::span<const double> input,
                         const RunOptions& options);

struct InferenceResult {
    std::vector<int> predictions;
    std::vector<std::vector<double>> logits;
    ExecutionTrace trace;  // merged over the batch
};

/// Runs every input through all layers. Samples run on independent clones of
/// the calibrated accelerator; pd noise for sample i draws from a stream
/// seeded by (seed, i), so results do not depend on the thread count.
InferenceResult infer_model(const Accelerator& accel, const DeployedModel& model,
                            const std::vector<std::vector<double>>& inputs, const NoiseConfig& noise,
                            std::uint64_t seed = 0, int threads = 0);

int argmax(std::span<const double> values);

/// Worker count: LUMEN_THREADS when set, else hardware concurrency.
int default_thread_count();

}  // namespace lumen
