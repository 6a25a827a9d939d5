#pragma once

#include <string>
#include <vector>

#include "noir/dynamics.hpp"
#include "noir/monitor.hpp"
#include "noir/mpc.hpp"
#include "noir/network.hpp"

namespace noir {

/// Fully resolved simulation setup: network, signal plan, model tables, and
/// run/monitor parameters, with every default already filled in.
struct Scenario {
    std::string name;
    RoadNetwork network;
    std::vector<JunctionSpec> junctions;   // kept verbatim for round-trips
    PhaseSchedule schedule;
    FdParams fd;
    PTable p_table;
    QTable q_table;
    double u0 = 0.0;
    double beta = 1.0;
    Eigen::VectorXd x0;
    long steps = 60;
    double eps = 0.0;
    long hold_window = 1;
    unsigned long seed = 0;
};

Scenario scenario_from_json(const std::string& text,
                            const std::string& context = "");
std::string scenario_to_json(const Scenario& scenario);

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& scenario, const std::string& path);

/// The built-in 60-road, 14-junction downtown benchmark (12-step cycle).
Scenario phoenix_scenario();

struct QpStepStats {
    int iterations = 0;
    KktResiduals kkt;
    double wall_time_s = 0.0;
};

enum class RunStatus { Completed, InfeasibleAborted };

struct Trace {
    std::vector<TraceRecord> records;
    std::vector<SafetyViolation> safety_violations;
    LivenessVerdict liveness;
    std::vector<QpStepStats> qp_stats;
    RunStatus status = RunStatus::Completed;
    long infeasible_at = -1;
    double max_mass_residual = 0.0;   // worst per-step conservation defect
};

/// Closed loop: solve for the boundary inflow, advance the plant, record
/// and monitor every step. An infeasible step aborts with the partial
/// trace rather than clamping.
Trace run(const Scenario& scenario);

/// Writes inflows.csv, outflows.csv, density.csv (with a total column) and
/// verdict.txt into out_dir; 9-significant-digit values, deterministic
/// bytes. When a scenario is given its parameters are echoed into the
/// verdict file.
void export_csv(const Trace& trace, const std::string& out_dir,
                const Scenario* scenario = nullptr);

} // namespace noir
