#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "noir/scenario.hpp"

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("NOIR_MPC_LOG");
    if (env == nullptr) return LogLevel::Error;
    const std::string value(env);
    if (value == "debug") return LogLevel::Debug;
    if (value == "info") return LogLevel::Info;
    return LogLevel::Error;
}

void info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

void debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

int run_and_export(noir::Scenario scenario, long steps, const std::string& out) {
    if (steps > 0) scenario.steps = steps;
    info("running '" + scenario.name + "' for " +
         std::to_string(scenario.steps) + " steps");
    const noir::Trace trace = noir::run(scenario);
    for (const auto& stats : trace.qp_stats)
        debug("qp iterations=" + std::to_string(stats.iterations) +
              " wall=" + std::to_string(stats.wall_time_s) + "s");
    noir::export_csv(trace, out, &scenario);
    std::cout << "wrote " << trace.records.size() << " steps to " << out
              << "\n";
    if (trace.status == noir::RunStatus::InfeasibleAborted) {
        std::cout << "aborted: optimization infeasible at step "
                  << trace.infeasible_at << "\n";
        return 1;
    }
    std::cout << "safety violations: " << trace.safety_violations.size()
              << "\n";
    if (trace.liveness.satisfied)
        std::cout << "liveness satisfied at step "
                  << trace.liveness.satisfied_at << "\n";
    else
        std::cout << "liveness not yet satisfied\n";
    return trace.safety_violations.empty() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Receding-horizon boundary-inflow control for signalized "
                 "road networks"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = "out";
    long steps = -1;
    double beta = -1.0;
    double u0 = -1.0;
    double eps = -1.0;
    long seed = -1;

    auto* simulate = app.add_subcommand("simulate", "run a scenario file");
    simulate->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();
    simulate->add_option("--steps", steps, "override step count");
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--beta", beta, "density cost weight");
    simulate->add_option("--u0", u0, "net boundary inflow");
    simulate->add_option("--eps", eps, "liveness tolerance");
    simulate->add_option("--seed", seed, "seed echoed into the report");

    auto* phoenix = app.add_subcommand("phoenix", "run the built-in benchmark");
    phoenix->add_option("--out", out_dir, "output directory");
    phoenix->add_option("--steps", steps, "override step count");

    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();

    auto* stability =
        app.add_subcommand("stability", "per-phase spectral radii");
    stability->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            noir::Scenario scenario = noir::load_scenario(scenario_path);
            if (beta >= 0.0) scenario.beta = beta;
            if (u0 >= 0.0) scenario.u0 = u0;
            if (eps > 0.0) scenario.eps = eps;
            if (seed >= 0) scenario.seed = static_cast<unsigned long>(seed);
            return run_and_export(std::move(scenario), steps, out_dir);
        }
        if (phoenix->parsed())
            return run_and_export(noir::phoenix_scenario(), steps, out_dir);
        if (validate->parsed()) {
            const noir::Scenario scenario = noir::load_scenario(scenario_path);
            // loading already runs every structural check; exercise the
            // dynamics tables too
            noir::build_all_phase_matrices(scenario.network, scenario.schedule,
                                           scenario.p_table, scenario.q_table);
            std::cout << "ok: " << scenario.network.size() << " roads, "
                      << scenario.schedule.junction_count() << " junctions, "
                      << "cycle length " << scenario.schedule.cycle_length
                      << "\n";
            return 0;
        }
        if (stability->parsed()) {
            const noir::Scenario scenario = noir::load_scenario(scenario_path);
            const auto mats = noir::build_all_phase_matrices(
                scenario.network, scenario.schedule, scenario.p_table,
                scenario.q_table);
            const auto report = noir::stability_report(mats, &scenario.network);
            for (std::size_t i = 0; i < report.spectral_radii.size(); ++i)
                std::cout << "phase " << i << ": "
                          << report.spectral_radii[i] << "\n";
            std::cout << (report.pass ? "stable" : "UNSTABLE") << "\n";
            return report.pass ? 0 : 1;
        }
    } catch (const noir::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
