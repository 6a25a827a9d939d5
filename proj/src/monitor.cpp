#include "noir/monitor.hpp"

#include <cmath>

namespace noir {

namespace {

void emit(std::vector<SafetyViolation>& out, long k, const char* formula,
          int road, double margin) {
    out.push_back({k, formula, road, margin});
}

} // namespace

std::vector<SafetyViolation> check_safety(const TraceRecord& rec,
                                          const MonitorConfig& cfg) {
    std::vector<SafetyViolation> out;
    const double tol = cfg.atom_tol;
    const FdParams& fd = cfg.fd;

    for (Eigen::Index i = 0; i < rec.u.size(); ++i) {
        if (rec.u(i) < -tol)
            emit(out, rec.k, "inflow_nonneg", static_cast<int>(i), -rec.u(i));
        // u >= 0 and sum(u) = u0 together bound each entry by u0
        if (rec.u(i) > cfg.u0 + tol)
            emit(out, rec.k, "inflow_upper", static_cast<int>(i),
                 rec.u(i) - cfg.u0);
    }
    if (std::abs(rec.u.sum() - cfg.u0) > tol)
        emit(out, rec.k, "inflow_sum", -1, std::abs(rec.u.sum() - cfg.u0));

    for (Eigen::Index i = 0; i < rec.x.size(); ++i) {
        if (rec.x(i) < -tol)
            emit(out, rec.k, "density_lower", static_cast<int>(i), -rec.x(i));
        if (rec.x(i) > fd.rho_max + tol)
            emit(out, rec.k, "density_upper", static_cast<int>(i),
                 rec.x(i) - fd.rho_max);
    }

    for (Eigen::Index i = 0; i < rec.z.size(); ++i) {
        const double z = rec.z(i);
        if (z < -tol)
            emit(out, rec.k, "outflow_nonneg", static_cast<int>(i), -z);
        if (i >= rec.x.size()) continue;
        const double rho = std::min(std::max(rec.x(i), 0.0), fd.rho_max);
        const double left = fd.z_max * rho / fd.rho_min;
        const double right =
            fd.z_max * (fd.rho_max - rho) / (fd.rho_max - fd.rho_mid);
        if (z > left + tol)
            emit(out, rec.k, "fd_left", static_cast<int>(i), z - left);
        if (z > fd.z_max + tol)
            emit(out, rec.k, "fd_top", static_cast<int>(i), z - fd.z_max);
        if (z > right + tol)
            emit(out, rec.k, "fd_right", static_cast<int>(i), z - right);
    }

    const int expected =
        static_cast<int>(rec.k % static_cast<long>(cfg.cycle_length));
    if (rec.zeta != expected)
        emit(out, rec.k, "phase_transition", -1,
             static_cast<double>(rec.zeta - expected));
    return out;
}

LivenessVerdict check_liveness(const std::vector<TraceRecord>& trace,
                               double u0, double eps, long hold_window) {
    if (trace.empty()) throw EmptyTrace("liveness check on empty trace");
    if (!(eps > 0.0)) throw EmptyTrace("liveness tolerance must be positive");
    if (hold_window < 1) throw EmptyTrace("hold window must be at least 1");

    LivenessVerdict verdict;
    verdict.epsilon = eps;

    // largest suffix on which the balance atom holds everywhere
    std::size_t start = trace.size();
    for (std::size_t i = trace.size(); i-- > 0;) {
        if (std::abs(trace[i].outlet_outflow_sum - u0) < eps)
            start = i;
        else
            break;
    }
    const long suffix = static_cast<long>(trace.size() - start);
    if (suffix >= hold_window) {
        verdict.satisfied = true;
        verdict.satisfied_at = trace[start].k;
    }
    return verdict;
}

} // namespace noir
