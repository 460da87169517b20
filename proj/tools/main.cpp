#include <iostream>

#include "CLI11.hpp"
#include "cli_commands.hpp"

using namespace lumen;

int main(int argc, char** argv) {
    CLI::App app{"lumen: photonic DNN accelerator simulator"};
    app.require_subcommand(1);

    cli::RunConfig run;
    std::string config_path, model_path, policy, noise, format = "csv";
    std::vector<std::string> sweeps;

    auto add_common = [&](CLI::App* cmd, bool needs_model) {
        cmd->add_option("--config", config_path, "accelerator TOML config")->check(CLI::ExistingFile);
        auto* m = cmd->add_option("--model", model_path, "model manifest (JSON)")->check(CLI::ExistingFile);
        if (!needs_model) m->description("unused");
        cmd->add_option("--seed", run.seed, "base seed; trial t uses seed + t");
        cmd->add_option("--trials", run.trials, "trials per point")->check(CLI::PositiveNumber);
        cmd->add_option("--policy", policy, "tuning policy")->check(CLI::IsMember({"to_only", "eo_hybrid"}));
        cmd->add_option("--noise", noise, "all, none, or a comma list of fpv,thermal,heterodyne,pd");
        cmd->add_option("--sweep", sweeps, "NAME=v1,v2,...");
        cmd->add_option("--out", run.out_dir, "output directory");
        cmd->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}));
        cmd->add_option("--threads", run.threads, "worker threads (default LUMEN_THREADS or all cores)");
    };

    auto* simulate = app.add_subcommand("simulate", "calibrate, run the test set, write report.csv/json");
    auto* sweep = app.add_subcommand("sweep", "sweep one parameter, write sweep.csv");
    auto* explore = app.add_subcommand("explore-resolution", "crosstalk and bits over a (Q, CS, N) grid");
    auto* desk = app.add_subcommand("make-desk", "train and write the desk-scale models and default config");
    add_common(simulate, true);
    add_common(sweep, true);
    add_common(explore, false);
    add_common(desk, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kConfigError;
    }

    return cli::guarded(std::cerr, [&] {
        if (!config_path.empty()) run.config_path = config_path;
        if (!model_path.empty()) run.model_path = model_path;
        if (!policy.empty()) run.policy = parse_tuning_policy(policy);
        if (!noise.empty()) run.noise = parse_noise(noise);
        run.format = format == "json" ? cli::OutputFormat::json : cli::OutputFormat::csv;
        for (const auto& s : sweeps) run.sweeps.push_back(cli::parse_sweep(s));
        if (*simulate) return cli::cmd_simulate(run, std::cout);
        if (*sweep) return cli::cmd_sweep(run, std::cout);
        if (*explore) return cli::cmd_explore_resolution(run, std::cout);
        return cli::cmd_make_desk(run, std::cout);
    });
}
