#include "cli_commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lumen/digits.hpp"
#include "lumen/errors.hpp"
#include "lumen/reference.hpp"
#include "lumen/trainer.hpp"

namespace lumen::cli {

namespace {

double parse_double(const std::string& field, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ConfigError(field, "'" + text + "' is not a number");
    return v;
}

int parse_int(const std::string& field, const std::string& text) {
    int v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ConfigError(field, "'" + text + "' is not an integer");
    return v;
}

const std::vector<std::string> kCrossConfigs = {"base", "base_ted", "opt", "opt_ted"};

bool is_int_param(const std::string& name) {
    return name == "adc_bits" || name == "dac_bits" || name == "granularity" || name == "n";
}

void check_value(const std::string& name, const std::string& value) {
    const std::string field = "sweep." + name;
    if (name == "cross_config") {
        if (std::find(kCrossConfigs.begin(), kCrossConfigs.end(), value) == kCrossConfigs.end())
            throw ConfigError(field, "expected one of base, base_ted, opt, opt_ted");
    } else if (is_int_param(name)) {
        if (parse_int(field, value) < 1) throw ConfigError(field, "must be >= 1");
    } else {
        if (!(parse_double(field, value) >= 0.0)) throw ConfigError(field, "must be >= 0");
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("out", "cannot write '" + path.string() + "'");
    return f;
}

AcceleratorConfig load_config(const RunConfig& run) {
    AcceleratorConfig c =
        run.config_path ? load_accelerator_config(*run.config_path) : AcceleratorConfig::defaults();
    if (run.policy) c.policy = *run.policy;
    if (run.noise) c.noise = *run.noise;
    c.validate();
    return c;
}

ModelBundle load_bundle(const RunConfig& run) {
    if (!run.model_path) throw ConfigError("model", "--model is required (see `lumen make-desk`)");
    return load_model(*run.model_path);
}

// Runs jobs [0, n) on up to `threads` workers; job i writes only slot i.
template <typename Job>
void parallel_jobs(std::size_t n, int threads, Job&& job) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const int t = std::max(1, std::min<int>(threads > 0 ? threads : default_thread_count(), static_cast<int>(n)));
    if (t == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < t; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const std::vector<std::string>& sweep_whitelist() {
    static const std::vector<std::string> names = {"tuning_level", "cross_config", "adc_bits", "dac_bits",
                                                   "decay_length", "granularity", "q", "cs", "n"};
    return names;
}

SweepSpec parse_sweep(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 >= text.size())
        throw ConfigError("sweep", "expected NAME=v1,v2,... got '" + text + "'");
    SweepSpec s;
    s.name = text.substr(0, eq);
    const auto& wl = sweep_whitelist();
    if (std::find(wl.begin(), wl.end(), s.name) == wl.end()) {
        std::string list;
        for (const auto& n : wl) list += (list.empty() ? "" : ", ") + n;
        throw ConfigError("sweep", "unknown parameter '" + s.name + "' (allowed: " + list + ")");
    }
    std::stringstream ss(text.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) {
        if (v.empty()) throw ConfigError("sweep." + s.name, "empty value");
        check_value(s.name, v);
        s.values.push_back(v);
    }
    if (s.values.empty()) throw ConfigError("sweep." + s.name, "no values");
    return s;
}

void RunConfig::validate() const {
    if (config_path && !std::filesystem::exists(*config_path))
        throw ConfigError("config", "'" + config_path->string() + "' does not exist");
    if (model_path && !std::filesystem::exists(*model_path))
        throw ConfigError("model", "'" + model_path->string() + "' does not exist");
    if (trials < 1) throw ConfigError("trials", "must be >= 1");
    if (threads < 0) throw ConfigError("threads", "must be >= 0");
}

void apply_sweep_value(AcceleratorConfig& c, const std::string& name, const std::string& value) {
    check_value(name, value);
    const std::string field = "sweep." + name;
    if (name == "tuning_level") {
        c.tuning_level = parse_double(field, value);
    } else if (name == "cross_config") {
        // Baseline rings carry MR1 variation statistics, optimized rings MR3.
        const MRDesign stats = value.rfind("base", 0) == 0 ? presets::mr1() : presets::mr3();
        for (const auto& v : c.vdus) {
            if (v.kind != VDUKind::conv_vdu && v.kind != VDUKind::fc_vdu) continue;
            for (const auto& d : {v.weight_mr, v.activation_mr}) {
                c.designs.at(d).fpv_mean_shift_nm = stats.fpv_mean_shift_nm;
                c.designs.at(d).fpv_std_shift_nm = stats.fpv_std_shift_nm;
            }
        }
        c.thermal.ted = value.size() > 4 && value.substr(value.size() - 4) == "_ted";
    } else if (name == "adc_bits") {
        c.adc_bits = parse_int(field, value);
    } else if (name == "dac_bits") {
        c.dac_bits = parse_int(field, value);
    } else if (name == "decay_length") {
        c.thermal.decay_length_um = parse_double(field, value);
    } else if (name == "granularity" || name == "n") {
        for (auto& v : c.vdus) v.granularity = parse_int(field, value);
    } else if (name == "q") {
        for (const auto& v : c.vdus)
            for (const auto& d : {v.weight_mr, v.activation_mr}) c.designs.at(d).q_factor = parse_double(field, value);
    } else if (name == "cs") {
        for (auto& v : c.vdus) v.channel_spacing_nm = parse_double(field, value);
    }
    c.validate();
}

std::vector<std::pair<std::string, ModelBundle>> build_desk_models(std::uint64_t seed) {
    const Dataset train = synthetic_digits(3000, seed);
    TrainOptions mlp_opts;
    mlp_opts.epochs = 30;
    mlp_opts.learning_rate = 0.05;
    mlp_opts.seed = seed;
    Model mlp = train_mlp(train, {kDigitPixels, 32, 32, 16, 10}, mlp_opts);
    mlp.name = "desk_mlp";

    TrainOptions bnn_opts;
    bnn_opts.epochs = 40;
    bnn_opts.learning_rate = 0.01;
    bnn_opts.seed = seed;
    Model bnn = train_bnn(train, {kDigitPixels, 96, 48, 10}, 4, bnn_opts);
    bnn.name = "desk_bnn";

    TrainOptions prune_opts;
    prune_opts.epochs = 10;
    prune_opts.learning_rate = 0.02;
    prune_opts.seed = seed + 1;
    Model pruned = prune_and_recover(mlp, train, 0.5, 6, prune_opts);
    pruned.name = "desk_pruned";

    std::vector<std::pair<std::string, ModelBundle>> out;
    for (auto& [stem, m] : std::vector<std::pair<std::string, Model>>{{"mlp", mlp}, {"bnn", bnn}, {"pruned", pruned}}) {
        ModelBundle b;
        b.model = std::move(m);
        out.emplace_back(stem, std::move(b));
    }
    return out;
}

int report_resolution(const Accelerator& accel, const NoiseConfig& noise) {
    const auto& c = accel.config();
    double rel = noise.heterodyne ? accel.worst_crosstalk() : 0.0;
    if (noise.pd) rel += c.pd.noise_floor_rel;
    return achievable_resolution(rel, std::min(c.adc_bits, c.dac_bits));
}

SimReport simulate_once(const AcceleratorConfig& config, const ModelBundle& bundle, std::uint64_t seed,
                        const std::string& name, int threads) {
    const DeployedModel dm = deploy_model(bundle.model, config);
    Accelerator accel(config);
    accel.calibrate(seed);
    const Dataset test = synthetic_digits(bundle.dataset.count, bundle.dataset.seed);
    const InferenceResult r = infer_model(accel, dm, test.images, config.noise, seed, threads);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) correct += r.predictions[i] == test.labels[i] ? 1 : 0;
    const double acc = test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;
    return make_report(name, acc, r.trace, make_energy_model(accel), report_resolution(accel, config.noise),
                       accel.worst_crosstalk());
}

int cmd_simulate(const RunConfig& run, std::ostream& log) {
    run.validate();
    const AcceleratorConfig config = load_config(run);
    const ModelBundle bundle = load_bundle(run);
    std::vector<SimReport> reports(static_cast<std::size_t>(run.trials));
    parallel_jobs(reports.size(), run.threads, [&](std::size_t t) {
        const std::string name = run.trials == 1 ? bundle.model.name : bundle.model.name + "#" + std::to_string(t);
        reports[t] = simulate_once(config, bundle, run.seed + t, name, run.trials == 1 ? run.threads : 1);
    });
    std::filesystem::create_directories(run.out_dir);
    {
        auto f = open_out(run.out_dir / "report.csv");
        write_report_csv(f, reports);
    }
    {
        auto f = open_out(run.out_dir / "report.json");
        f << report_json(reports) << '\n';
    }
    for (const auto& r : reports) {
        log << r.name << ": accuracy " << format_number(r.accuracy) << ", EPB " << format_number(r.epb_pj_per_bit)
            << " pJ/bit, " << format_number(r.fps) << " FPS\n";
        for (const auto& w : r.warnings) log << "  warning: " << w << '\n';
    }
    return kOk;
}

int cmd_sweep(const RunConfig& run, std::ostream& log) {
    run.validate();
    if (run.sweeps.size() != 1) throw ConfigError("sweep", "exactly one --sweep NAME=v1,v2,... is required");
    const SweepSpec& sweep = run.sweeps.front();
    const AcceleratorConfig base = load_config(run);
    const ModelBundle bundle = load_bundle(run);

    const std::size_t points = sweep.values.size();
    const auto trials = static_cast<std::size_t>(run.trials);
    std::vector<AcceleratorConfig> configs;
    for (const auto& v : sweep.values) {
        AcceleratorConfig c = base;
        apply_sweep_value(c, sweep.name, v);
        configs.push_back(std::move(c));
    }
    std::vector<SimReport> reports(points * trials);
    parallel_jobs(reports.size(), run.threads, [&](std::size_t job) {
        const std::size_t p = job / trials;
        const std::size_t t = job % trials;
        reports[job] = simulate_once(configs[p], bundle, run.seed + t, sweep.name + "=" + sweep.values[p], 1);
    });

    std::filesystem::create_directories(run.out_dir);
    if (run.format == OutputFormat::json) {
        auto f = open_out(run.out_dir / "sweep.json");
        f << report_json(reports) << '\n';
    } else {
        auto f = open_out(run.out_dir / "sweep.csv");
        f << "parameter,value,trial,seed";
        for (const char* col : kReportColumns) f << ',' << col;
        f << ",latency_s,pd_mw,crosstalk\n";
        for (std::size_t job = 0; job < reports.size(); ++job) {
            const auto& r = reports[job];
            const std::size_t p = job / trials;
            const std::size_t t = job % trials;
            f << sweep.name << ',' << csv_field(sweep.values[p]) << ',' << t << ',' << run.seed + t << ','
              << csv_field(r.name) << ',' << format_number(r.accuracy) << ',' << format_number(r.epb_pj_per_bit)
              << ',' << format_number(r.fps) << ',' << format_number(r.kfps_per_watt) << ','
              << format_number(r.laser_mw) << ',' << format_number(r.tuning_mw) << ',' << format_number(r.dac_mw)
              << ',' << format_number(r.adc_mw) << ',' << r.resolution_bits << ',' << format_number(r.latency_s)
              << ',' << format_number(r.pd_mw) << ',' << format_number(r.crosstalk) << '\n';
        }
    }

    if (sweep.name == "cross_config") {
        // Trial-averaged ranking with the published rows alongside.
        std::vector<SimReport> ranked;
        for (std::size_t p = 0; p < points; ++p) {
            SimReport avg = reports[p * trials];
            avg.name = sweep.values[p];
            double acc = 0.0, epb = 0.0;
            for (std::size_t t = 0; t < trials; ++t) {
                acc += reports[p * trials + t].accuracy;
                epb += reports[p * trials + t].epb_pj_per_bit;
            }
            avg.accuracy = acc / static_cast<double>(trials);
            avg.epb_pj_per_bit = epb / static_cast<double>(trials);
            ranked.push_back(avg);
        }
        for (auto& r : published_reference_rows()) ranked.push_back(r);
        if (ranked.size() >= 2) {
            auto f = open_out(run.out_dir / "ranking.csv");
            write_report_csv(f, compare_configurations(ranked));
        }
    }
    log << "wrote " << reports.size() << " rows for " << sweep.name << '\n';
    return kOk;
}

int cmd_explore_resolution(const RunConfig& run, std::ostream& log) {
    run.validate();
    std::vector<double> qs = {500, 1000, 1800, 2500, 4000, 5000, 6000, 8000};
    std::vector<double> css = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    std::vector<int> ns = {16};
    for (const auto& s : run.sweeps) {
        if (s.name == "q") {
            qs.clear();
            for (const auto& v : s.values) qs.push_back(parse_double("sweep.q", v));
        } else if (s.name == "cs") {
            css.clear();
            for (const auto& v : s.values) css.push_back(parse_double("sweep.cs", v));
        } else if (s.name == "n") {
            ns.clear();
            for (const auto& v : s.values) ns.push_back(parse_int("sweep.n", v));
        } else {
            throw ConfigError("sweep", "explore-resolution takes q, cs and n axes, not '" + s.name + "'");
        }
    }
    const AcceleratorConfig config = load_config(run);
    MRDesign design = config.design(config.vdus.empty() ? "crosslight" : config.vdus.front().weight_mr);
    std::filesystem::create_directories(run.out_dir);
    auto f = open_out(run.out_dir / (run.format == OutputFormat::json ? "resolution.json" : "resolution.csv"));
    {
        std::ostringstream csv;
        csv << "q,cs_nm,n,crosstalk,bits\n";
        std::string json = "[";
        bool first = true;
        for (double q : qs)
            for (double cs : css)
                for (int n : ns) {
                    MRDesign d = design;
                    d.q_factor = q;
                    // Tail-limited view: the FSR is widened to hold the comb.
                    d.fsr_nm = std::max(d.fsr_nm, n * cs);
                    WDMPlan plan{n, cs, d.resonant_wavelength_nm, d.fsr_nm};
                    if (!(d.fwhm_nm() < plan.fsr_nm)) throw ConfigError("sweep.q", "FWHM exceeds the FSR");
                    const double x = heterodyne_crosstalk(plan, d);
                    const int bits = achievable_resolution(x, std::min(config.adc_bits, config.dac_bits));
                    csv << format_number(q) << ',' << format_number(cs) << ',' << n << ',' << format_number(x)
                        << ',' << bits << '\n';
                    json += std::string(first ? "" : ",") + "\n  {\"q\": " + format_number(q) +
                            ", \"cs_nm\": " + format_number(cs) + ", \"n\": " + std::to_string(n) +
                            ", \"crosstalk\": " + format_number(x) + ", \"bits\": " + std::to_string(bits) + "}";
                    first = false;
                }
        json += "\n]\n";
        f << (run.format == OutputFormat::json ? json : csv.str());
    }
    log << "wrote " << qs.size() * css.size() * ns.size() << " grid points\n";
    return kOk;
}

int cmd_make_desk(const RunConfig& run, std::ostream& log) {
    run.validate();
    std::filesystem::create_directories(run.out_dir);
    for (auto& [stem, bundle] : build_desk_models(run.seed)) {
        save_model(bundle, run.out_dir, stem);
        log << "wrote " << (run.out_dir / (stem + ".json")).string() << '\n';
    }
    auto f = open_out(run.out_dir / "lumen.toml");
    f << default_config_toml();
    log << "wrote " << (run.out_dir / "lumen.toml").string() << '\n';
    return kOk;
}

}  // namespace lumen::cli
