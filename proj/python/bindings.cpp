#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "cli_commands.hpp"
#include "lumen/config.hpp"
#include "lumen/device.hpp"
#include "lumen/errors.hpp"
#include "lumen/photonic_core.hpp"
#include "lumen/quant.hpp"
#include "lumen/thermal.hpp"

namespace py = pybind11;
using namespace lumen;

namespace {

TuningMechanism heater(std::optional<int> bits, double max_shift_nm) {
    TuningMechanism m = TuningMechanism::thermo_optic_default();
    m.actuator_bits = bits;
    m.max_shift_nm = max_shift_nm;
    return m;
}

py::dict report_dict(const SimReport& r) {
    py::dict d;
    d["name"] = r.name;
    d["accuracy"] = r.accuracy;
    d["epb_pj_per_bit"] = r.epb_pj_per_bit;
    d["latency_s"] = r.latency_s;
    d["fps"] = r.fps;
    d["kfps_per_watt"] = r.kfps_per_watt;
    d["energy_pj"] = r.energy.total_pj();
    d["resolution_bits"] = r.resolution_bits;
    d["crosstalk"] = r.crosstalk;
    d["frames"] = r.frames;
    d["warnings"] = r.warnings;
    return d;
}

}  // namespace

PYBIND11_MODULE(_lumen, m) {
    m.doc() = "Native core of the lumen photonic accelerator simulator";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    py::class_<MRDesign>(m, "MRDesign")
        .def(py::init<>())
        .def_readwrite("name", &MRDesign::name)
        .def_readwrite("radius_um", &MRDesign::radius_um)
        .def_readwrite("q_factor", &MRDesign::q_factor)
        .def_readwrite("kappa", &MRDesign::kappa)
        .def_readwrite("fsr_nm", &MRDesign::fsr_nm)
        .def_readwrite("resonant_wavelength_nm", &MRDesign::resonant_wavelength_nm)
        .def_readwrite("extinction_db", &MRDesign::extinction_db)
        .def_readwrite("fpv_mean_shift_nm", &MRDesign::fpv_mean_shift_nm)
        .def_readwrite("fpv_std_shift_nm", &MRDesign::fpv_std_shift_nm)
        .def_property_readonly("fwhm_nm", &MRDesign::fwhm_nm)
        .def_property_readonly("min_transmission", &MRDesign::min_transmission)
        .def("validate", &MRDesign::validate)
        .def("__repr__", [](const MRDesign& d) {
            return "<MRDesign " + d.name + " Q=" + std::to_string(d.q_factor) + ">";
        });

    m.def("preset_names", &presets::names);
    m.def("preset", [](const std::string& name) {
        auto d = presets::by_name(name);
        if (!d) throw py::key_error("unknown MR preset: " + name);
        return *d;
    }, py::arg("name"));

    m.def("transmission_at_detuning", &transmission_at_detuning, py::arg("design"),
          py::arg("detuning_nm"));
    m.def("weight_to_detuning", &weight_to_detuning, py::arg("design"),
          py::arg("target_transmission"));

    m.def("allocate_channels", [](int n, double spacing_nm, const MRDesign& design) {
        const WDMPlan p = allocate_channels(n, spacing_nm, design);
        return py::make_tuple(p.channel_count, p.channel_spacing_nm, p.fsr_nm);
    }, py::arg("n"), py::arg("spacing_nm"), py::arg("design"));
    m.def("heterodyne_crosstalk", [](int n, double spacing_nm, const MRDesign& design) {
        const WDMPlan plan{n, spacing_nm, design.resonant_wavelength_nm, design.fsr_nm};
        return heterodyne_crosstalk(plan, design);
    }, py::arg("n"), py::arg("spacing_nm"), py::arg("design"));
    m.def("achievable_resolution", &achievable_resolution, py::arg("relative_noise"),
          py::arg("ceiling_bits") = 16);

    py::class_<HeaterSolution>(m, "HeaterSolution")
        .def_readonly("commands_nm", &HeaterSolution::commands_nm)
        .def_readonly("powers_mw", &HeaterSolution::powers_mw)
        .def_readonly("achieved_shifts_nm", &HeaterSolution::achieved_shifts_nm)
        .def_readonly("residual_nm", &HeaterSolution::residual_nm)
        .def_readonly("bias_nm", &HeaterSolution::bias_nm)
        .def_readonly("total_power_mw", &HeaterSolution::total_power_mw)
        .def_property_readonly("residual_norm", &HeaterSolution::residual_norm);

    m.def("linear_layout", &linear_layout, py::arg("count"), py::arg("pitch_um"));
    m.def("build_coupling_matrix", [](const std::vector<double>& positions, double decay) {
        return build_coupling_matrix(positions, decay).entries();
    }, py::arg("positions_um"), py::arg("decay_length_um"));
    m.def("ted_solve", [](const Eigen::MatrixXd& k, const std::vector<double>& targets,
                          std::optional<int> bits, double max_shift_nm) {
        return ted_solve(ThermalCouplingMatrix(k), targets, heater(bits, max_shift_nm));
    }, py::arg("coupling"), py::arg("targets_nm"), py::arg("actuator_bits") = 8,
       py::arg("max_shift_nm") = 10.0);
    m.def("naive_solve", [](const Eigen::MatrixXd& k, const std::vector<double>& targets,
                            std::optional<int> bits, double max_shift_nm) {
        return naive_solve(ThermalCouplingMatrix(k), targets, heater(bits, max_shift_nm));
    }, py::arg("coupling"), py::arg("targets_nm"), py::arg("actuator_bits") = 8,
       py::arg("max_shift_nm") = 10.0);
    m.def("crosstalk_reduction", &crosstalk_reduction, py::arg("naive"), py::arg("ted"));

    m.def("uniform_quantize", [](const std::vector<double>& values, int bits, double range) {
        return uniform_quantize(values, bits, range).values;
    }, py::arg("values"), py::arg("bits"), py::arg("symmetric_range"));
    m.def("prune_magnitude", [](const std::vector<double>& w, double target) {
        return prune_magnitude(w, target);
    }, py::arg("weights"), py::arg("sparsity_target"));
    m.def("sparsity_of", [](const std::vector<double>& w) { return sparsity_of(w); },
          py::arg("weights"));
    m.def("cluster_quantize", [](const std::vector<double>& w, int k) {
        const ClusterResult r = cluster_quantize(w, k);
        return py::make_tuple(r.codebook, r.index, r.objective);
    }, py::arg("weights"), py::arg("cluster_count"));

    m.def("default_config_toml", &default_config_toml);
    m.def("simulate_desk", [](const std::string& model, const std::string& config_toml,
                              std::uint64_t seed, int threads) {
        const AcceleratorConfig cfg = config_toml.empty()
                                          ? AcceleratorConfig::defaults()
                                          : parse_accelerator_config(config_toml);
        py::gil_scoped_release release;
        for (const auto& [name, bundle] : cli::build_desk_models(seed)) {
            if (name != model) continue;
            const SimReport r = cli::simulate_once(cfg, bundle, seed, name, threads);
            py::gil_scoped_acquire acquire;
            return report_dict(r);
        }
        throw py::value_error("unknown desk model: " + model);
    }, py::arg("model") = "mlp", py::arg("config_toml") = "", py::arg("seed") = 1,
       py::arg("threads") = 1);
}
