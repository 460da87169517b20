#include "lumen/arch_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "lumen/errors.hpp"

namespace lumen {

std::string to_string(TuningPolicy policy) {
    return policy == TuningPolicy::to_only ? "to_only" : "eo_hybrid";
}

TuningPolicy parse_tuning_policy(const std::string& text) {
    if (text == "to_only") return TuningPolicy::to_only;
    if (text == "eo_hybrid") return TuningPolicy::eo_hybrid;
    throw ConfigError("policy", "unknown tuning policy '" + text + "' (expected to_only or eo_hybrid)");
}

double EnergyConstants::dac_energy_pj(int bits) const {
    return dac_e_base_pj * std::ldexp(1.0, bits - dac_bits_base);
}

double EnergyConstants::adc_energy_pj(int bits) const { return adc_to_dac_ratio * dac_energy_pj(bits); }

void EnergyConstants::validate() const {
    const std::pair<const char*, double> positive[] = {
        {"energy.dac_e_base_pj", dac_e_base_pj},
        {"energy.adc_to_dac_ratio", adc_to_dac_ratio},
        {"energy.pd_read_pj", pd_read_pj},
        {"energy.vcsel_drive_pj", vcsel_drive_pj},
        {"energy.vcsel_settle_s", vcsel_settle_s},
        {"energy.propagation_s", propagation_s},
        {"energy.adc_conversion_s", adc_conversion_s},
        {"energy.calibration_window_frames", calibration_window_frames},
    };
    for (const auto& [name, value] : positive)
        if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError(name, "must be a positive number");
    if (dac_bits_base < 1) throw ConfigError("energy.dac_bits_base", "must be >= 1");
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

WDMPlan plan_for(const VDUSpec& spec, const MRDesign& weight, const MRDesign& input) {
    WDMPlan plan;
    plan.channel_count = spec.granularity;
    plan.channel_spacing_nm = spec.channel_spacing_nm;
    plan.base_wavelength_nm = weight.resonant_wavelength_nm;
    plan.fsr_nm = spec.input_source == InputImprint::mr_bank ? std::min(weight.fsr_nm, input.fsr_nm)
                                                              : weight.fsr_nm;
    return plan;
}

}  // namespace

AcceleratorConfig AcceleratorConfig::defaults() {
    AcceleratorConfig c;
    for (const auto& name : presets::names()) c.designs[lower(name)] = *presets::by_name(name);

    VDUSpec conv;
    conv.kind = VDUKind::conv_vdu;
    conv.count = 2;
    VDUSpec fc;
    fc.kind = VDUKind::fc_vdu;
    fc.count = 4;
    VDUSpec bnn;
    bnn.kind = VDUKind::bnn_vdu;
    bnn.count = 4;
    bnn.granularity = 8;
    bnn.channel_spacing_nm = 2.0;
    bnn.weight_mr = "robin_weight";
    bnn.activation_mr = "robin_activation";
    bnn.bn_mr = "broadband";
    c.vdus = {conv, fc, bnn};
    return c;
}

const MRDesign& AcceleratorConfig::design(const std::string& name) const {
    const auto it = designs.find(lower(name));
    if (it == designs.end()) throw ConfigError("mr." + name, "unknown MR design '" + name + "'");
    return it->second;
}

const VDUSpec* AcceleratorConfig::vdu(VDUKind kind) const {
    for (const auto& v : vdus)
        if (v.kind == kind && v.count > 0) return &v;
    return nullptr;
}

const TuningMechanism& AcceleratorConfig::imprint_mechanism() const {
    return policy == TuningPolicy::eo_hybrid ? eo : to;
}

void AcceleratorConfig::validate() const {
    auto bits_ok = [](int b) { return b >= 1 && b <= 32; };
    if (!bits_ok(dac_bits)) throw ConfigError("dac_bits", "must lie in [1,32]");
    if (!bits_ok(adc_bits)) throw ConfigError("adc_bits", "must lie in [1,32]");
    if (!bits_ok(hw_weight_bits)) throw ConfigError("hw_weight_bits", "must lie in [1,32]");
    if (to.kind != TuningKind::thermo_optic) throw ConfigError("tuning.to.kind", "must be thermo_optic");
    if (eo.kind != TuningKind::electro_optic) throw ConfigError("tuning.eo.kind", "must be electro_optic");
    try {
        to.validate();
    } catch (const Error& e) {
        throw ConfigError("tuning.to", e.what());
    }
    try {
        eo.validate();
    } catch (const Error& e) {
        throw ConfigError("tuning.eo", e.what());
    }
    if (!(to.max_shift_nm > eo.max_shift_nm))
        throw ConfigError("tuning.eo.max_shift_nm", "TO range must exceed EO range");
    try {
        pd.validate();
        laser.validate();
        vcsel.validate();
    } catch (const Error& e) {
        throw ConfigError("link", e.what());
    }
    if (!(thermal.pitch_um > 0.0)) throw ConfigError("thermal.pitch_um", "must be > 0");
    if (!(thermal.decay_length_um > 0.0)) throw ConfigError("thermal.decay_length_um", "must be > 0");
    energy.validate();
    if (!(tuning_level >= 0.0 && tuning_level <= 1.0))
        throw ConfigError("tuning_level", "must lie in [0,1]");
    if (!(dead_fraction_limit >= 0.0 && dead_fraction_limit <= 1.0))
        throw ConfigError("dead_fraction_limit", "must lie in [0,1]");
    for (const auto& [name, d] : designs) {
        try {
            d.validate();
        } catch (const Error& e) {
            throw ConfigError("mr." + name, e.what());
        }
    }
    std::set<VDUKind> seen;
    for (const auto& v : vdus) {
        const std::string field = "vdu." + to_string(v.kind);
        if (!seen.insert(v.kind).second) throw ConfigError(field, "declared twice");
        if (v.count < 0) throw ConfigError(field + ".count", "must be >= 0");
        if (v.granularity < 1) throw ConfigError(field + ".granularity", "must be >= 1");
        if (!(v.channel_spacing_nm > 0.0))
            throw ConfigError(field + ".channel_spacing_nm", "must be > 0");
        const MRDesign& w = design(v.weight_mr);
        const MRDesign& a = design(v.activation_mr);
        if (v.kind == VDUKind::bnn_vdu) {
            if (!v.bn_mr) throw ConfigError(field + ".bn_mr", "BNN VDU needs a broadband MR");
            if (!design(*v.bn_mr).is_broadband)
                throw ConfigError(field + ".bn_mr", "BN MR must be broadband");
        }
        if (v.kind == VDUKind::vcsel_vdu && v.input_source != InputImprint::direct_power)
            throw ConfigError(field + ".input_source", "VCSEL VDU must imprint inputs directly");
        try {
            plan_for(v, w, a).validate();
        } catch (const CapacityError& e) {
            throw ConfigError(field + ".granularity", e.what());
        }
        if (policy == TuningPolicy::eo_hybrid) {
            for (const MRDesign* d : {&w, &a}) {
                if (d == &a && v.input_source != InputImprint::mr_bank) continue;
                const double fs = v.granularity > 1 ? std::min(d->fwhm_nm(), v.channel_spacing_nm / 2.0)
                                                    : d->fwhm_nm();
                if (fs > eo.max_shift_nm) {
                    std::ostringstream os;
                    os << "full-scale detuning " << fs << " nm of '" << d->name
                       << "' exceeds the EO range " << eo.max_shift_nm << " nm";
                    throw ConfigError("tuning.eo.max_shift_nm", os.str());
                }
            }
        }
    }
}

Accelerator::Accelerator(AcceleratorConfig config) : config_(std::move(config)) {
    config_.validate();
    for (const auto& spec : config_.vdus) {
        const MRDesign& w = config_.design(spec.weight_mr);
        const MRDesign& a = config_.design(spec.activation_mr);
        for (int i = 0; i < spec.count; ++i) {
            VDUInstance inst;
            inst.kind = spec.kind;
            inst.index = i;
            inst.bank = MRBank::make(plan_for(spec, w, a), w, a, true, spec.input_source);
            if (spec.bn_mr) inst.bn_design = config_.design(*spec.bn_mr);
            const int vdu = static_cast<int>(vdus_.size());
            for (int row = 0; row < 3; ++row) {
                if (row == 0 && spec.input_source != InputImprint::mr_bank) continue;
                for (int ch = 0; ch < spec.granularity; ++ch) rings_.push_back({vdu, row, ch});
            }
            vdus_.push_back(std::move(inst));
        }
    }
    calibration_.rings = static_cast<int>(rings_.size());
}

std::vector<int> Accelerator::vdu_indices(VDUKind kind) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < vdus_.size(); ++i)
        if (vdus_[i].kind == kind) out.push_back(static_cast<int>(i));
    return out;
}

void Accelerator::calibrate(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int dead = 0;
    double raw_sum = 0.0;
    for (auto& ring : rings_) {
        const auto& bank = vdus_[ring.vdu].bank;
        const MRDesign& d = ring.row == 0 ? bank.input_design : bank.weight_design;
        ring.raw_shift_nm = config_.noise.fpv ? sample_fpv(d, rng) : 0.0;
        ring.dead = ring.raw_shift_nm > config_.to.max_shift_nm;
        dead += ring.dead ? 1 : 0;
        raw_sum += ring.raw_shift_nm;
    }
    const int n = static_cast<int>(rings_.size());
    calibration_ = CalibrationReport{};
    calibration_.rings = n;
    calibration_.dead = dead;
    calibration_.mean_raw_shift_nm = n > 0 ? raw_sum / n : 0.0;
    if (static_cast<double>(dead) > config_.dead_fraction_limit * n) {
        std::ostringstream os;
        os << dead << " of " << n << " MRs need more than the TO range of " << config_.to.max_shift_nm
           << " nm (limit " << config_.dead_fraction_limit * 100.0 << "%)";
        throw CalibrationError(os.str());
    }
    apply_tuning_level(config_.tuning_level);
}

void Accelerator::apply_tuning_level(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw DomainError("tuning level must lie in [0,1]");
    // Ranking is per VDU instance so one bank's large shifts cannot starve another.
    std::map<int, std::vector<int>> live_by_vdu;
    for (std::size_t i = 0; i < rings_.size(); ++i) {
        rings_[i].corrected = false;
        if (!rings_[i].dead) live_by_vdu[rings_[i].vdu].push_back(static_cast<int>(i));
    }
    for (auto& [vdu, live] : live_by_vdu) {
        (void)vdu;
        std::stable_sort(live.begin(), live.end(), [this](int a, int b) {
            return rings_[a].raw_shift_nm > rings_[b].raw_shift_nm;
        });
        const auto selected =
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(live.size())));
        for (std::size_t i = 0; i < selected && i < live.size(); ++i) rings_[live[i]].corrected = true;
    }

    std::map<int, ThermalCouplingMatrix> coupling_by_size;
    auto coupling = [&](int size) -> const ThermalCouplingMatrix& {
        auto it = coupling_by_size.find(size);
        if (it != coupling_by_size.end()) return it->second;
        ThermalCouplingMatrix k =
            config_.noise.thermal
                ? build_coupling_matrix(linear_layout(size, config_.thermal.pitch_um),
                                        config_.thermal.decay_length_um)
                : ThermalCouplingMatrix(Eigen::MatrixXd::Identity(size, size));
        return coupling_by_size.emplace(size, std::move(k)).first->second;
    };

    CalibrationReport& rep = calibration_;
    rep.tuning_level = fraction;
    rep.corrected = 0;
    rep.hold_power_mw = 0.0;
    double target_sum = 0.0;
    double residual_sq = 0.0;

    // Rings are stored grouped by (vdu, row), channels ascending.
    std::size_t start = 0;
    while (start < rings_.size()) {
        std::size_t end = start;
        while (end < rings_.size() && rings_[end].vdu == rings_[start].vdu &&
               rings_[end].row == rings_[start].row)
            ++end;
        const int size = static_cast<int>(end - start);
        const ThermalCouplingMatrix& k = coupling(size);
        std::vector<int> sel;
        std::vector<double> targets;
        for (int c = 0; c < size; ++c) {
            const auto& ring = rings_[start + c];
            if (!ring.corrected) continue;
            sel.push_back(c);
            targets.push_back(ring.raw_shift_nm);
        }
        Eigen::VectorXd heat = Eigen::VectorXd::Zero(size);
        double bias = 0.0;
        if (!sel.empty()) {
            HeaterSolution sol;
            try {
                const ThermalCouplingMatrix sub = k.restricted(sel);
                sol = config_.thermal.ted ? ted_solve(sub, targets, config_.to)
                                          : naive_solve(sub, targets, config_.to);
            } catch (const RangeExceededError& e) {
                throw CalibrationError(std::string("heater solve failed: ") + e.what());
            } catch (const DecompositionError& e) {
                throw CalibrationError(std::string("heater solve failed: ") + e.what());
            }
            for (int c = 0; c < size; ++c)
                for (std::size_t j = 0; j < sel.size(); ++j) heat[c] += k(c, sel[j]) * sol.commands_nm[j];
            bias = sol.bias_nm;
            rep.hold_power_mw += sol.total_power_mw;
        }
        auto& inst = vdus_[rings_[start].vdu];
        const int row = rings_[start].row;
        auto& slots = row == 0 ? inst.bank.input_slots : inst.bank.weight_slots[row - 1];
        for (int c = 0; c < size; ++c) {
            const auto& ring = rings_[start + c];
            RingSlot& slot = slots[ring.channel];
            // Common-mode bias is tracked out by the comb alignment.
            if (ring.corrected) {
                slot.fpv_shift_nm = 0.0;
                slot.thermal_residual_nm = heat[c] - ring.raw_shift_nm - bias;
                residual_sq += slot.thermal_residual_nm * slot.thermal_residual_nm;
                target_sum += ring.raw_shift_nm;
                ++rep.corrected;
            } else {
                slot.fpv_shift_nm = -ring.raw_shift_nm;
                slot.thermal_residual_nm = heat[c] - bias;
            }
        }
        start = end;
    }
    rep.mean_correction_nm = rep.corrected > 0 ? target_sum / rep.corrected : 0.0;
    rep.residual_rms_nm = rep.corrected > 0 ? std::sqrt(residual_sq / rep.corrected) : 0.0;
    rep.latency_s = rep.corrected > 0 ? config_.to.settle_latency_s : 0.0;
    rep.energy_pj = rep.hold_power_mw * rep.latency_s * 1e9;
}

double Accelerator::worst_crosstalk() const {
    double worst = 0.0;
    for (const auto& v : vdus_) worst = std::max(worst, heterodyne_crosstalk(v.bank));
    return worst;
}

void Model::validate() const {
    if (layers.empty()) throw ShapeError("model has no layers");
    if (params.size() != layers.size()) throw ShapeError("model parameter count does not match layers");
    quant.validate();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        l.validate();
        const auto& p = params[i];
        const auto rows = static_cast<std::size_t>(l.rows());
        if (p.weights.size() != rows * static_cast<std::size_t>(l.fan_in()))
            throw ShapeError("layer '" + l.name + "': weight count does not match dims");
        if (l.has_bias && p.bias.size() != rows)
            throw ShapeError("layer '" + l.name + "': bias count does not match outputs");
        if (l.has_bn && (p.bn_scale.size() != rows || p.bn_shift.size() != rows))
            throw ShapeError("layer '" + l.name + "': batch-norm count does not match outputs");
        if (i > 0 && layers[i - 1].output_size() != l.input_size())
            throw ShapeError("layer '" + l.name + "': input size does not match previous output");
    }
}

double DeployedLayer::output_full_scale(double input_scale) const {
    const double chunks_times_g = [this] {
        double worst = 0.0;
        const int g = schedule.granularity;
        const int f = ir.fan_in();
        const int rows = ir.rows();
        for (int r = 0; r < rows; ++r) {
            const int len = compressed ? static_cast<int>(compressed->payload[r].size()) : f;
            worst = std::max(worst, static_cast<double>((len + g - 1) / g) * g);
        }
        return worst;
    }();
    const double w_fs = sliced() ? code_step * (std::ldexp(1.0, schedule.slicing.slice_width *
                                                                    schedule.slicing.slice_count) -
                                                1.0)
                                 : weight_scale;
    double m = 1.0;
    for (double v : multiplier) m = std::max(m, std::abs(v));
    return input_scale * w_fs * chunks_times_g * m;
}

int DeployedLayer::weight_bits_on_hardware() const {
    if (sliced()) return schedule.slicing.slice_width;
    return quant.scheme == QuantScheme::binary_weights ? 1 : quant.weight_bits;
}

DeployedLayer deploy_layer(const LayerIR& layer, const LayerWeights& params, const QuantSpec& model_quant,
                           const AcceleratorConfig& config) {
    layer.validate();
    DeployedLayer d;
    d.ir = layer;
    d.quant = layer.quant.value_or(model_quant);
    d.quant.validate();
    const int rows = layer.rows();
    const int fan_in = layer.fan_in();
    if (params.weights.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(fan_in))
        throw ShapeError("layer '" + layer.name + "': weight count does not match dims");
    if (d.quant.activation_bits > config.dac_bits) {
        std::ostringstream os;
        os << "layer '" << layer.name << "' needs " << d.quant.activation_bits
           << "-bit activations but the DACs have " << config.dac_bits << " bits";
        throw ConfigError("dac_bits", os.str());
    }

    const bool binary = d.quant.scheme == QuantScheme::binary_weights;
    d.vdu = layer.vdu.value_or(binary ? VDUKind::bnn_vdu
                                      : layer.kind == LayerKind::convolution ? VDUKind::conv_vdu
                                                                              : VDUKind::fc_vdu);
    const VDUSpec* spec = config.vdu(d.vdu);
    if (spec == nullptr)
        throw CapabilityError("layer '" + layer.name + "' needs a " + to_string(d.vdu) +
                              " but none is configured");
    if (d.vdu == VDUKind::bnn_vdu && !binary)
        throw CapabilityError("layer '" + layer.name + "': BNN VDU only carries 1-bit weights");

    d.multiplier.assign(rows, 1.0);
    d.shift.assign(rows, 0.0);
    d.bias = layer.has_bias ? params.bias : std::vector<double>(rows, 0.0);
    if (layer.has_bn) {
        if (params.bn_scale.size() != static_cast<std::size_t>(rows) ||
            params.bn_shift.size() != static_cast<std::size_t>(rows))
            throw ShapeError("layer '" + layer.name + "': batch-norm count does not match outputs");
    }

    BitSliceSchedule slicing = bit_slice_schedule(1, 32);
    slicing.slice_width = config.hw_weight_bits;
    switch (d.quant.scheme) {
        case QuantScheme::binary_weights: {
            std::vector<double> ones(rows, 1.0), zeros(rows, 0.0);
            const auto folded =
                layer.has_bn ? binarize_with_bn(params.weights, params.bn_scale, params.bn_shift)
                             : binarize_with_bn(params.weights, ones, zeros);
            d.weights = folded.signs;
            d.multiplier = folded.multiplier;
            d.shift = folded.shift;
            d.weight_scale = 1.0;
            break;
        }
        case QuantScheme::uniform: {
            double range = 0.0;
            for (double w : params.weights) range = std::max(range, std::abs(w));
            if (range == 0.0) range = 1.0;
            auto q = uniform_quantize(params.weights, d.quant.weight_bits, range);
            d.weights = std::move(q.values);
            d.weight_scale = range;
            const std::int64_t max_code =
                d.quant.weight_bits == 1 ? 1 : (std::int64_t{1} << (d.quant.weight_bits - 1)) - 1;
            d.code_step = range / static_cast<double>(max_code);
            if (d.quant.weight_bits > config.hw_weight_bits) {
                slicing = bit_slice_schedule(d.quant.weight_bits, config.hw_weight_bits);
                d.codes = std::move(q.codes);
            }
            break;
        }
        case QuantScheme::cluster: {
            std::vector<double> nz;
            for (double w : params.weights)
                if (w != 0.0) nz.push_back(w);
            std::vector<double> distinct = nz;
            std::sort(distinct.begin(), distinct.end());
            distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
            d.weights = params.weights;
            if (static_cast<int>(distinct.size()) > d.quant.cluster_count) {
                const auto cl = cluster_quantize(nz, d.quant.cluster_count);
                const auto rec = cl.reconstruct();
                std::size_t k = 0;
                for (double& w : d.weights)
                    if (w != 0.0) w = rec[k++];
            }
            double range = 0.0;
            for (double w : d.weights) range = std::max(range, std::abs(w));
            d.weight_scale = range == 0.0 ? 1.0 : range;
            break;
        }
    }
    if (layer.has_bn && !binary) {
        d.multiplier = params.bn_scale;
        d.shift = params.bn_shift;
    }
    d.optical_bn = layer.has_bn && spec->bn_mr.has_value();
    d.bn_max = 1.0;
    if (d.optical_bn) {
        d.bn_max = 0.0;
        for (double m : d.multiplier) d.bn_max = std::max(d.bn_max, std::abs(m));
        if (d.bn_max == 0.0) throw FoldError("layer '" + layer.name + "': all BN scales are zero");
    }

    if (config.compress_sparse &&
        std::find(d.weights.begin(), d.weights.end(), 0.0) != d.weights.end())
        d.compressed = compress_sparse(d.weights, rows, fan_in, spec->granularity);
    d.schedule = build_schedule(layer, spec->granularity, spec->count, slicing,
                                d.compressed ? &*d.compressed : nullptr);
    return d;
}

DeployedModel deploy_model(const Model& model, const AcceleratorConfig& config) {
    model.validate();
    DeployedModel out;
    out.name = model.name;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        out.layers.push_back(deploy_layer(model.layers[i], model.params[i], model.quant, config));
    return out;
}

QuantizedInput quantize_layer_input(std::span<const double> input, int bits) {
    QuantizedInput q;
    q.normalized.assign(input.size(), 0.0);
    for (double v : input) {
        if (!std::isfinite(v)) throw DataError("non-finite layer input");
        q.scale = std::max(q.scale, std::abs(v));
    }
    if (q.scale == 0.0) return q;
    const bool nonneg = std::all_of(input.begin(), input.end(), [](double v) { return v >= 0.0; });
    if (nonneg) {
        const auto t = unsigned_quantize(input, bits, q.scale);
        const double top = std::ldexp(1.0, bits) - 1.0;
        for (std::size_t i = 0; i < input.size(); ++i) q.normalized[i] = static_cast<double>(t.codes[i]) / top;
    } else {
        const auto t = uniform_quantize(input, bits, q.scale);
        const double m = bits == 1 ? 1.0 : std::ldexp(1.0, bits - 1) - 1.0;
        for (std::size_t i = 0; i < input.size(); ++i) q.normalized[i] = static_cast<double>(t.codes[i]) / m;
    }
    return q;
}

double apply_activation(Activation act, double v) {
    switch (act) {
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::sign: return v >= 0.0 ? 1.0 : -1.0;
        case Activation::identity: return v;
    }
    return v;
}

void StepRecord::add(const StepRecord& o) {
    active_vdus += o.active_vdus;
    macs += o.macs;
    padded_slots += o.padded_slots;
    weight_updates += o.weight_updates;
    activation_updates += o.activation_updates;
    weight_shift_nm += o.weight_shift_nm;
    activation_shift_nm += o.activation_shift_nm;
    weight_dac += o.weight_dac;
    activation_dac += o.activation_dac;
    adc_reads += o.adc_reads;
    pd_reads += o.pd_reads;
    vcsel_drives += o.vcsel_drives;
    operand_bits += o.operand_bits;
    for (std::size_t k = 0; k < lit_channels.size(); ++k) lit_channels[k] += o.lit_channels[k];
    weight_settle = weight_settle || o.weight_settle;
    modulator_settle = modulator_settle || o.modulator_settle;
    vcsel_settle = vcsel_settle || o.vcsel_settle;
}

std::int64_t ExecutionTrace::total_macs() const {
    std::int64_t n = 0;
    for (const auto& s : steps) n += s.macs;
    return n;
}

std::int64_t ExecutionTrace::total_operand_bits() const {
    std::int64_t n = 0;
    for (const auto& s : steps) n += s.operand_bits;
    return n;
}

void ExecutionTrace::append(const ExecutionTrace& layer_trace) {
    frames = std::max(frames, layer_trace.frames);
    steps.insert(steps.end(), layer_trace.steps.begin(), layer_trace.steps.end());
}

void ExecutionTrace::merge(const ExecutionTrace& frame_trace) {
    if (steps.empty() && frames == 0) {
        *this = frame_trace;
        return;
    }
    if (frame_trace.steps.size() != steps.size())
        throw ScheduleError("cannot merge traces of different schedules");
    for (std::size_t i = 0; i < steps.size(); ++i) steps[i].add(frame_trace.steps[i]);
    frames += frame_trace.frames;
}

namespace {

double adc_read(double value, int bits, double full_scale) {
    if (bits == 1) return value >= 0.0 ? full_scale : -full_scale;
    const double m = std::ldexp(1.0, bits - 1) - 1.0;
    const double step = full_scale / m;
    const double code = std::clamp(std::round(value / step), -m, m);
    return code * step;
}

double imprint_detuning(const MRDesign& design, double fs_detuning, double value) {
    if (value <= 0.0) return 0.0;
    return weight_to_detuning(design, encode_transmission(design, fs_detuning, std::min(value, 1.0)));
}

}  // namespace

LayerResult run_schedule(Accelerator& accel, const DeployedLayer& layer, std::span<const double> input,
                         const RunOptions& options) {
    const auto& cfg = accel.config();
    const auto& ir = layer.ir;
    if (static_cast<int>(input.size()) != ir.input_size()) {
        std::ostringstream os;
        os << "layer '" << ir.name << "' expects " << ir.input_size() << " inputs, got " << input.size();
        throw ShapeError(os.str());
    }
    const auto indices = accel.vdu_indices(layer.vdu);
    if (indices.empty())
        throw CapabilityError("no " + to_string(layer.vdu) + " instantiated for layer '" + ir.name + "'");
    const Schedule& sched = layer.schedule;
    if (sched.vdu_count > static_cast<int>(indices.size()))
        throw ScheduleError("schedule uses more VDUs than the accelerator provides");

    LayerResult result;
    const QuantizedInput xin = quantize_layer_input(input, layer.quant.activation_bits);
    result.input_scale = xin.scale;

    const int fan_in = ir.fan_in();
    const int patches = ir.patches();
    std::vector<double> cols(static_cast<std::size_t>(patches) * fan_in);
    for (int p = 0; p < patches; ++p)
        im2col_patch(ir, xin.normalized, p, std::span<double>(cols).subspan(static_cast<std::size_t>(p) * fan_in, fan_in));

    const int wbits = layer.weight_bits_on_hardware();
    const int abits = layer.quant.activation_bits;
    const auto& slicing = sched.slicing;
    const double digit_max = static_cast<double>(slicing.digit_max());

    std::vector<double> acc(static_cast<std::size_t>(ir.output_size()), 0.0);
    result.trace.frames = 1;
    result.trace.steps.assign(static_cast<std::size_t>(sched.time_steps), StepRecord{});
    using Key = std::tuple<int, int, int>;
    std::vector<std::optional<Key>> loaded(indices.size());

    const MacOptions mac{options.noise, cfg.pd, options.rng};
    std::vector<double> xs, ws;
    for (const WorkItem& item : sched.items) {
        VDUInstance& inst = accel.vdus()[indices[item.vdu]];
        MRBank& bank = inst.bank;
        const int g = bank.channels();
        if (item.length > g || item.length < 0) {
            std::ostringstream os;
            os << "work item of length " << item.length << " exceeds VDU granularity " << g;
            throw ScheduleError(os.str());
        }
        xs.assign(g, 0.0);
        ws.assign(g, 0.0);
        const int slice = item.bit_slice.value_or(0);
        for (int i = 0; i < item.length; ++i) {
            const int col = item.packed ? layer.compressed->columns[item.row][item.begin + i] : item.begin + i;
            const std::size_t flat = static_cast<std::size_t>(item.row) * fan_in + col;
            xs[i] = cols[static_cast<std::size_t>(item.patch) * fan_in + col];
            if (layer.sliced()) {
                const std::int64_t code = layer.codes[flat];
                const std::int64_t mag = code < 0 ? -code : code;
                const auto digit = static_cast<double>((mag >> (slicing.slice_width * slice)) & slicing.digit_max());
                ws[i] = (code < 0 ? -digit : digit) / digit_max;
            } else {
                ws[i] = layer.weights[flat] / layer.weight_scale;
            }
        }

        double y = bank_mac(bank, xs, ws, mac);
        double scale = xin.scale;
        if (layer.optical_bn) {
            const double m = layer.multiplier[item.row];
            y *= std::abs(m) / layer.bn_max;
            scale *= (m < 0.0 ? -1.0 : 1.0) * layer.bn_max;
        }
        const double read = adc_read(y, cfg.adc_bits, static_cast<double>(g));
        scale *= layer.sliced() ? layer.code_step * digit_max * slicing.slice_scale(slice) : layer.weight_scale;
        acc[item.accumulator] += read * scale;

        StepRecord& st = result.trace.steps[item.time_step];
        st.active_vdus += 1;
        st.macs += item.length;
        st.padded_slots += item.padded;
        const Key key{item.row, item.begin, slice};
        if (!loaded[item.vdu] || *loaded[item.vdu] != key) {
            loaded[item.vdu] = key;
            const double fs = bank.full_scale_detuning_nm(bank.weight_design);
            for (int i = 0; i < item.length; ++i)
                st.weight_shift_nm += imprint_detuning(bank.weight_design, fs, std::abs(ws[i]));
            st.weight_updates += item.length;
            st.weight_dac += item.length;
            st.weight_settle = true;
        }
        if (bank.input_imprint == InputImprint::mr_bank) {
            const double fs = bank.full_scale_detuning_nm(bank.input_design);
            for (int i = 0; i < item.length; ++i)
                st.activation_shift_nm += imprint_detuning(bank.input_design, fs, std::abs(xs[i]));
            st.activation_updates += item.length;
            st.activation_dac += item.length;
            st.modulator_settle = true;
        } else {
            st.vcsel_drives += item.length;
            st.vcsel_settle = true;
        }
        st.adc_reads += 1;
        st.pd_reads += bank.rails();
        st.operand_bits += static_cast<std::int64_t>(item.length) * (wbits + abits);
        st.lit_channels[static_cast<std::size_t>(inst.kind)] += item.length;
    }

    result.pre_activation.resize(acc.size());
    result.outputs.resize(acc.size());
    for (std::size_t o = 0; o < acc.size(); ++o) {
        const int row = static_cast<int>(o) / patches;
        double v = layer.optical_bn ? acc[o] : layer.multiplier[row] * acc[o];
        v += layer.shift[row] + layer.bias[row];
        result.pre_activation[o] = v;
        result.outputs[o] = apply_activation(ir.activation, v);
    }
    return result;
}

int argmax(std::span<const double> values) {
    if (values.empty()) return -1;
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

int default_thread_count() {
    if (const char* env = std::getenv("LUMEN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<int>(std::min<long>(v, 256));
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

InferenceResult infer_model(const Accelerator& accel, const DeployedModel& model,
                            const std::vector<std::vector<double>>& inputs, const NoiseConfig& noise,
                            std::uint64_t seed, int threads) {
    if (model.layers.empty()) throw ShapeError("model has no layers");
    const std::size_t n = inputs.size();
    InferenceResult result;
    result.predictions.assign(n, -1);
    result.logits.assign(n, {});

    // Fixed-size blocks merged in block order keep floating-point sums
    // independent of the worker count.
    constexpr std::size_t block = 16;
    const std::size_t blocks = (n + block - 1) / block;
    std::vector<ExecutionTrace> block_traces(blocks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        Accelerator local = accel;
        try {
            for (std::size_t b = next++; b < blocks; b = next++) {
                ExecutionTrace merged;
                for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i) {
                    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
                    std::mt19937_64 rng(seq);
                    RunOptions opts{noise, &rng};
                    std::vector<double> x = inputs[i];
                    ExecutionTrace frame;
                    frame.frames = 1;
                    for (const auto& layer : model.layers) {
                        auto r = run_schedule(local, layer, x, opts);
                        frame.append(r.trace);
                        x = std::move(r.pre_activation);
                        if (&layer != &model.layers.back())
                            for (std::size_t k = 0; k < x.size(); ++k) x[k] = apply_activation(layer.ir.activation, x[k]);
                    }
                    result.predictions[i] = argmax(x);
                    result.logits[i] = std::move(x);
                    merged.merge(frame);
                }
                block_traces[b] = std::move(merged);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = blocks;
        }
    };

    const int t = std::max(1, std::min<int>(threads > 0 ? threads : default_thread_count(),
                                             static_cast<int>(std::max<std::size_t>(blocks, 1))));
    if (t == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < t; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    for (auto& bt : block_traces) result.trace.merge(bt);
    return result;
}

}  // namespace lumen
