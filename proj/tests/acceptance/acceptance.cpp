// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cli_commands.hpp"
#include "lumen/arch_sim.hpp"
#include "lumen/config.hpp"
#include "lumen/digits.hpp"
#include "lumen/errors.hpp"
#include "lumen/mapper.hpp"
#include "lumen/metrics.hpp"
#include "lumen/photonic_core.hpp"
#include "lumen/quant.hpp"
#include "lumen/thermal.hpp"
#include "lumen/trainer.hpp"

using namespace lumen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s <= budget_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++failures;
    std::ostringstream line;
    line.precision(3);
    line << (ok ? "PASS" : "FAIL") << " [" << id << "] " << title << ": " << o.detail << " (" << std::fixed << s
         << " s of " << budget_s << " s" << (in_time ? "" : ", over budget") << ")";
    std::cout << line.str() << std::endl;
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

// Shared desk models, trained once.
std::vector<std::pair<std::string, ModelBundle>>& desk() {
    static auto models = cli::build_desk_models(1);
    return models;
}

const ModelBundle& desk_model(const std::string& stem) {
    for (const auto& [s, b] : desk())
        if (s == stem) return b;
    throw std::runtime_error("no desk model " + stem);
}

Model random_model(std::mt19937_64& r) {
    auto pick = [&r](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(r); };
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Model m;
    m.name = "random";
    int width = 0;
    if (pick(0, 2) == 0) {
        LayerIR c;
        c.name = "conv";
        c.kind = LayerKind::convolution;
        c.conv = {pick(1, 2), pick(1, 3), 3, 3, 1, pick(4, 6), pick(4, 6)};
        c.has_bias = true;
        m.layers.push_back(c);
        width = c.output_size();
    } else {
        width = pick(4, 40);
    }
    const int depth = pick(1, 3);
    for (int d = 0; d < depth; ++d) {
        LayerIR l;
        l.name = "fc" + std::to_string(d);
        l.in_features = m.layers.empty() ? width : m.layers.back().output_size();
        l.out_features = d + 1 == depth ? pick(2, 10) : pick(4, 32);
        l.activation = d + 1 == depth ? Activation::identity : Activation::relu;
        l.has_bias = pick(0, 1) == 1;
        m.layers.push_back(l);
    }
    for (const auto& l : m.layers) {
        LayerWeights p;
        p.weights.resize(static_cast<std::size_t>(l.rows()) * l.fan_in());
        for (double& w : p.weights) w = u(r);
        if (l.has_bias) {
            p.bias.resize(l.rows());
            for (double& b : p.bias) b = 0.3 * u(r);
        }
        m.params.push_back(std::move(p));
    }
    return m;
}

// Error of each layer against the digital forward pass over the same
// quantized operands, relative to the layer's ADC full scale.
Outcome c1_oracle() {
    std::mt19937_64 r(2024);
    AcceleratorConfig cfg = AcceleratorConfig::defaults();
    cfg.noise = NoiseConfig::none();
    Accelerator accel(cfg);
    accel.calibrate(1);
    const double limit = std::ldexp(1.0, -15);
    double worst = 0.0;
    int agree = 0, samples = 0;
    for (int k = 0; k < 100; ++k) {
        const Model m = random_model(r);
        const DeployedModel dm = deploy_model(m, cfg);
        std::vector<std::vector<double>> inputs;
        for (int s = 0; s < 3; ++s) {
            std::vector<double> x(static_cast<std::size_t>(m.layers.front().input_size()));
            for (double& v : x) v = std::uniform_real_distribution<double>(0.0, 1.0)(r);
            inputs.push_back(x);
        }
        const InferenceResult end_to_end = infer_model(accel, dm, inputs, cfg.noise, 0, 1);
        for (std::size_t s = 0; s < inputs.size(); ++s) {
            std::vector<double> x = inputs[s];
            std::vector<double> digital = inputs[s];
            for (const DeployedLayer& layer : dm.layers) {
                Accelerator local = accel;
                const LayerResult res = run_schedule(local, layer, x, RunOptions{cfg.noise, nullptr});
                const QuantizedInput q = quantize_layer_input(x, layer.quant.activation_bits);
                const int fan_in = layer.ir.fan_in();
                std::vector<double> patch(static_cast<std::size_t>(fan_in));
                const double fs = layer.output_full_scale(q.scale);
                for (int o = 0; o < layer.ir.output_size(); ++o) {
                    const int row = o / layer.ir.patches();
                    const int p = o % layer.ir.patches();
                    im2col_patch(layer.ir, q.normalized, p, patch);
                    double dot = 0.0;
                    for (int i = 0; i < fan_in; ++i)
                        dot += layer.weights[static_cast<std::size_t>(row) * fan_in + i] * patch[i] * q.scale;
                    const double oracle = layer.multiplier[row] * dot + layer.shift[row] + layer.bias[row];
                    worst = std::max(worst, std::abs(res.pre_activation[o] - oracle) / fs);
                }
                x = res.outputs;
            }
            // Unquantized float forward pass for the prediction check.
            for (std::size_t li = 0; li < m.layers.size(); ++li) {
                const LayerIR& l = m.layers[li];
                std::vector<double> next(static_cast<std::size_t>(l.output_size()));
                std::vector<double> patch(static_cast<std::size_t>(l.fan_in()));
                for (int o = 0; o < l.output_size(); ++o) {
                    const int row = o / l.patches();
                    im2col_patch(l, digital, o % l.patches(), patch);
                    double v = l.has_bias ? m.params[li].bias[row] : 0.0;
                    for (int i = 0; i < l.fan_in(); ++i)
                        v += m.params[li].weights[static_cast<std::size_t>(row) * l.fan_in() + i] * patch[i];
                    next[o] = apply_activation(l.activation, v);
                }
                digital = std::move(next);
            }
            if (x != end_to_end.logits[s]) return {false, "end-to-end logits differ from the layer chain"};
            agree += argmax(x) == argmax(digital) ? 1 : 0;
            ++samples;
        }
    }
    return {worst <= limit, "max relative error " + fmt(worst) + " (limit 2^-15 = " + fmt(limit) +
                                "), float argmax agreement " + std::to_string(agree) + "/" + std::to_string(samples)};
}

Outcome c2_ted() {
    std::mt19937_64 r(7);
    TuningMechanism ideal = TuningMechanism::thermo_optic_default();
    ideal.actuator_bits.reset();
    ideal.max_shift_nm = 1e6;
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const int n = std::uniform_int_distribution<int>(1, 32)(r);
        // Random heater layout and decay length: a dense, positive definite
        // exponential coupling.
        std::vector<double> pos(static_cast<std::size_t>(n));
        for (double& x : pos) x = std::uniform_real_distribution<double>(0.0, 10.0 * n)(r);
        const double decay = std::uniform_real_distribution<double>(1.0, 40.0)(r);
        const auto k_mat = build_coupling_matrix(pos, decay);
        std::vector<double> t(static_cast<std::size_t>(n));
        for (double& v : t) v = std::uniform_real_distribution<double>(0.0, 1.0)(r);
        worst = std::max(worst, ted_solve(k_mat, t, ideal).residual_norm());
    }

    // Default layout: 16 heaters at the default pitch and decay length,
    // targets drawn from the MR3 variation statistics.
    const AcceleratorConfig cfg = AcceleratorConfig::defaults();
    const auto k = build_coupling_matrix(linear_layout(16, cfg.thermal.pitch_um), cfg.thermal.decay_length_um);
    std::mt19937_64 fr(3);
    std::vector<double> targets(16);
    for (double& v : targets) v = sample_fpv(presets::mr3(), fr);
    const auto naive = naive_solve(k, targets, cfg.to);
    const auto ted = ted_solve(k, targets, cfg.to);
    const double reduction = crosstalk_reduction(naive, ted);
    return {worst <= 1e-9 && reduction >= 98.0,
            "max unquantized residual " + fmt(worst) + " nm; 8-bit reduction " + fmt(reduction, 5) + " %"};
}

Outcome c3_fpv() {
    std::mt19937_64 r(11);
    const std::vector<std::pair<MRDesign, double>> rows = {
        {presets::mr1(), 7.1}, {presets::mr2(), 1.8}, {presets::mr3(), 2.1}};
    std::vector<double> means;
    bool ok = true;
    std::string detail;
    for (const auto& [design, published] : rows) {
        double sum = 0.0;
        for (int i = 0; i < 100000; ++i) sum += sample_fpv(design, r);
        const double mean = sum / 1e5;
        means.push_back(mean);
        ok = ok && std::abs(mean - published) <= 0.01 * published;
        detail += design.name + " mean " + fmt(mean, 5) + " nm; ";
    }
    const double reduction = 100.0 * (means[0] - means[1]) / means[0];
    ok = ok && std::abs(reduction - 74.6) <= 1.0;
    return {ok, detail + "MR1->MR2 reduction " + fmt(reduction, 4) + " %"};
}

Outcome c4_slicing() {
    std::mt19937_64 r(13);
    int vectors = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int pbits = 1 + trial % 16;
        const int hbits = 1 + (trial / 16) % 8;
        const auto sched = bit_slice_schedule(pbits, hbits);
        const int n = std::uniform_int_distribution<int>(1, 32)(r);
        const std::int64_t wmax = (std::int64_t{1} << pbits) - 1;
        std::uniform_int_distribution<std::int64_t> wd(-wmax, wmax), xd(-32768, 32767);
        std::vector<double> outs(static_cast<std::size_t>(sched.slice_count), 0.0);
        std::int64_t oracle = 0;
        for (int i = 0; i < n; ++i) {
            const std::int64_t w = wd(r), x = xd(r);
            oracle += w * x;
            const auto digits = sched.slice(w < 0 ? -w : w);
            for (int s = 0; s < sched.slice_count; ++s)
                outs[s] += static_cast<double>((w < 0 ? -digits[s] : digits[s]) * x);
        }
        if (reconstruct_sliced_dot(outs, sched) != static_cast<double>(oracle))
            return {false, "mismatch at param_bits " + std::to_string(pbits) + ", hw_bits " + std::to_string(hbits)};
        ++vectors;
    }
    return {true, std::to_string(vectors) + " random vectors exact over all 16 x 8 bit pairs"};
}

Outcome c5_sparse() {
    std::mt19937_64 r(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::string detail;
    bool ok = true;
    for (double level : {0.50, 0.471, 0.40, 0.411}) {
        const int rows = 64, cols = 64, g = 16;
        std::vector<double> w(rows * cols);
        for (double& v : w) v = u(r);
        w = prune_magnitude(w, level);
        const auto c = compress_sparse(w, rows, cols, g);
        ok = ok && c.decompress() == w;
        LayerIR l;
        l.name = "fc";
        l.in_features = cols;
        l.out_features = rows;
        const auto dense = build_schedule(l, g, 1, bit_slice_schedule(16, 16));
        const auto packed = build_schedule(l, g, 1, bit_slice_schedule(16, 16), &c);
        const double dense_slots = static_cast<double>(dense.scheduled_macs() + dense.padded_slots());
        const double packed_slots = static_cast<double>(packed.scheduled_macs() + packed.padded_slots());
        const double reduction = 1.0 - packed_slots / dense_slots;
        const double overhead = static_cast<double>(c.padding_slots()) / dense_slots;
        const double achieved = sparsity_of(w);
        ok = ok && reduction >= achieved - overhead - 1e-12;
        detail += fmt(level * 100, 3) + "% (achieved " + fmt(achieved * 100, 5) + "%): slots -" +
                  fmt(reduction * 100, 5) + "%, pad " + fmt(overhead * 100, 4) + "%; ";
    }
    const Dataset test = synthetic_digits(500, 7);
    const double base = evaluate_float(desk_model("mlp").model, test);
    const double pruned = evaluate_float(desk_model("pruned").model, test);
    const double loss = 100.0 * (base - pruned);
    ok = ok && loss <= 2.0;
    return {ok, detail + "desk accuracy " + fmt(base * 100, 4) + "% -> " + fmt(pruned * 100, 4) + "% (sparsity " +
                    fmt(100 * desk_model("pruned").model.layers[0].sparsity, 3) + "%)"};
}

Outcome c6_tuning_level() {
    const auto& bnn = desk_model("bnn");
    const int trials = 4;
    std::string curve;
    double at80 = 0.0, at100 = 0.0;
    for (double level : {0.0, 0.4, 0.8, 1.0}) {
        AcceleratorConfig cfg = AcceleratorConfig::defaults();
        cfg.tuning_level = level;
        double acc = 0.0;
        for (int t = 0; t < trials; ++t) acc += cli::simulate_once(cfg, bnn, 1 + t, "bnn", 0).accuracy;
        acc /= trials;
        if (level == 0.8) at80 = acc;
        if (level == 1.0) at100 = acc;
        curve += fmt(level * 100, 3) + "%: " + fmt(acc * 100, 4) + "%; ";
    }
    const double gap = 100.0 * std::abs(at100 - at80);
    return {gap <= 1.0, curve + "gap " + fmt(gap, 3) + " pp over " + std::to_string(trials) + " trials"};
}

Outcome c7_ordering() {
    const auto& mlp = desk_model("mlp");
    std::vector<SimReport> reports;
    for (const std::string& name : {"base", "base_ted", "opt", "opt_ted"}) {
        AcceleratorConfig cfg = AcceleratorConfig::defaults();
        cli::apply_sweep_value(cfg, "cross_config", name);
        reports.push_back(cli::simulate_once(cfg, mlp, 1, name, 0));
    }
    const auto ranked = compare_configurations(reports);
    std::string order, detail;
    for (const auto& r : ranked) {
        order += (order.empty() ? "" : " < ") + r.name;
        detail += r.name + " " + fmt(r.epb_pj_per_bit, 4) + " pJ/bit; ";
    }
    return {order == "opt_ted < opt < base_ted < base", detail + "order " + order};
}

Outcome c8_resolution() {
    const std::vector<double> qs = {500, 1000, 1800, 2500, 4000, 5000, 6000, 8000};
    const std::vector<double> css = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    const MRDesign base = presets::crosslight();
    const int n = 16;
    std::vector<std::vector<int>> bits(qs.size(), std::vector<int>(css.size()));
    std::vector<std::vector<double>> xt(qs.size(), std::vector<double>(css.size()));
    for (std::size_t a = 0; a < qs.size(); ++a)
        for (std::size_t b = 0; b < css.size(); ++b) {
            MRDesign d = base;
            d.q_factor = qs[a];
            d.fsr_nm = std::max(d.fsr_nm, n * css[b]);
            const WDMPlan plan{n, css[b], d.resonant_wavelength_nm, d.fsr_nm};
            xt[a][b] = heterodyne_crosstalk(plan, d);
            bits[a][b] = achievable_resolution(xt[a][b]);
        }
    bool monotone = true;
    for (std::size_t a = 0; a < qs.size(); ++a)
        for (std::size_t b = 0; b < css.size(); ++b) {
            if (a > 0) monotone = monotone && bits[a][b] >= bits[a - 1][b] && xt[a][b] <= xt[a - 1][b];
            if (b > 0) monotone = monotone && bits[a][b] >= bits[a][b - 1] && xt[a][b] <= xt[a][b - 1];
        }
    const double x = xt[5][4];
    const int b = bits[5][4];
    const bool regression = std::abs(x - 0.0128772661) <= 1e-9 && b == 6;
    return {monotone && regression, std::string(monotone ? "monotone" : "NOT monotone") +
                                        " over 8 x 8 grid; Q=5000, CS=2.5 nm, N=16: crosstalk " + fmt(x, 7) +
                                        ", " + std::to_string(b) + " bits"};
}

Outcome c9_latency() {
    const AcceleratorConfig cfg = AcceleratorConfig::defaults();
    Accelerator accel(cfg);
    accel.calibrate(1);
    const EnergyModel em = make_energy_model(accel);
    bool all_le = true;
    double default_ratio = 0.0;
    int traces = 0;
    const Dataset test = synthetic_digits(1, 7);
    for (const std::string& stem : {"mlp", "bnn", "pruned"}) {
        const auto dm = deploy_model(desk_model(stem).model, cfg);
        const auto res = infer_model(accel, dm, test.images, NoiseConfig::none(), 0, 1);
        const double eo = latency_of_trace(res.trace, TuningPolicy::eo_hybrid, em);
        const double to = latency_of_trace(res.trace, TuningPolicy::to_only, em);
        all_le = all_le && eo <= to;
        if (stem == "mlp") default_ratio = to / eo;
        ++traces;
    }
    std::mt19937_64 r(19);
    for (int k = 0; k < 500; ++k) {
        ExecutionTrace t;
        t.frames = 1;
        const int steps = std::uniform_int_distribution<int>(0, 50)(r);
        for (int s = 0; s < steps; ++s) {
            StepRecord st;
            st.weight_settle = r() % 2;
            st.modulator_settle = r() % 2;
            st.vcsel_settle = r() % 2;
            t.steps.push_back(st);
        }
        all_le = all_le && latency_of_trace(t, TuningPolicy::eo_hybrid, em) <=
                               latency_of_trace(t, TuningPolicy::to_only, em);
        ++traces;
    }
    return {all_le && default_ratio >= 100.0, std::to_string(traces) + " traces with eo <= to; default MLP ratio " +
                                                  fmt(default_ratio, 5) + "x"};
}

Outcome c10_determinism() {
    const fs::path dir = fs::temp_directory_path() / "lumen_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    ModelBundle b = desk_model("mlp");
    b.dataset.count = 100;
    save_model(b, dir, "mlp");
    auto run_into = [&](const std::string& sub, int threads) {
        cli::RunConfig run;
        run.model_path = dir / "mlp.json";
        run.seed = 5;
        run.trials = 2;
        run.threads = threads;
        run.sweeps = {cli::parse_sweep("tuning_level=0.5,1")};
        run.out_dir = dir / sub;
        std::ostringstream log;
        if (cli::cmd_sweep(run, log) != cli::kOk) throw std::runtime_error("sweep failed: " + log.str());
        std::ifstream in(dir / sub / "sweep.csv", std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string a = run_into("a", 1), b2 = run_into("b", 1), c = run_into("c", 0);
    return {a == b2 && a == c && !a.empty(),
            std::to_string(a.size()) + " byte sweep.csv identical across runs and thread counts"};
}

}  // namespace

int main() {
    std::cout << "lumen acceptance gate" << std::endl;
    criterion(1, "noiseless oracle equivalence", 60, c1_oracle);
    criterion(2, "TED exactness and reduction", 30, c2_ted);
    criterion(3, "FPV statistics", 10, c3_fpv);
    criterion(4, "bit-slicing exactness", 10, c4_slicing);
    {
        const auto t0 = std::chrono::steady_clock::now();
        desk();
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << "     desk models trained in " << fmt(s, 3) << " s" << std::endl;
    }
    criterion(5, "sparse compression and pruning", 300, c5_sparse);
    criterion(6, "tuning-level saturation", 300, c6_tuning_level);
    criterion(7, "sensitivity ordering", 120, c7_ordering);
    criterion(8, "resolution model", 5, c8_resolution);
    criterion(9, "latency policy", 10, c9_latency);
    criterion(10, "sweep determinism", 120, c10_determinism);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
