#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "noir/dynamics.hpp"

namespace noir {

/// One closed-loop sample: densities, applied inflow, outflows, and the
/// cycle position, all at the same step k.
struct TraceRecord {
    long k = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    Eigen::VectorXd z;
    int zeta = 0;
    double outlet_outflow_sum = 0.0;
};

struct SafetyViolation {
    long k = 0;
    std::string formula;   // atom id, e.g. "density_upper"
    int road_index = -1;   // -1 for aggregate atoms
    double margin = 0.0;   // amount by which the atom failed
};

struct MonitorConfig {
    FdParams fd;
    double u0 = 0.0;
    int cycle_length = 1;
    double atom_tol = 1e-6;   // absorbs solver residuals
};

/// Checks every always-atom on a single record: u >= 0, sum(u) = u0,
/// 0 <= rho <= rho_max, z >= 0, the three fundamental-diagram caps, and
/// zeta == k mod cycle_length. Never throws on content.
std::vector<SafetyViolation> check_safety(const TraceRecord& rec,
                                          const MonitorConfig& cfg);

struct LivenessVerdict {
    bool satisfied = false;
    long satisfied_at = -1;   // k_s when satisfied
    double epsilon = 0.0;
};

/// Eventual outflow balance: finds the start k_s of the largest trace suffix
/// on which |outlet_outflow_sum - u0| < eps throughout, and reports
/// satisfied iff that suffix spans at least hold_window records.
LivenessVerdict check_liveness(const std::vector<TraceRecord>& trace,
                               double u0, double eps, long hold_window);

} // namespace noir
