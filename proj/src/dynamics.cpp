#include "noir/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace noir {

namespace {

constexpr double kColumnSumTol = 1e-9;

std::string road_str(int id) { return "road " + std::to_string(id); }

} // namespace

void FdParams::validate() const {
    if (!(z_max > 0.0))
        throw DensityOutOfRange("fd: z_max must be positive");
    if (!(0.0 < rho_min && rho_min < rho_mid && rho_mid < rho_max))
        throw DensityOutOfRange("fd: need 0 < rho_min < rho_mid < rho_max");
}

double fd_outflow_cap(double rho, const FdParams& fd) {
    fd.validate();
    if (rho < 0.0 || rho > fd.rho_max)
        throw DensityOutOfRange("density " + std::to_string(rho) +
                                " outside [0, rho_max]");
    const double left = fd.z_max * rho / fd.rho_min;
    const double right = fd.z_max * (rho - fd.rho_max) / (fd.rho_mid - fd.rho_max);
    return std::max(0.0, std::min({left, fd.z_max, right}));
}

double PTable::lookup(int road_id, int zeta, double fallback) const {
    if (auto it = overrides.find({road_id, zeta}); it != overrides.end())
        return it->second;
    if (auto it = overrides.find({road_id, -1}); it != overrides.end())
        return it->second;
    return fallback;
}

std::optional<double> QTable::lookup(int from, int to, int zeta) const {
    if (auto it = overrides.find({from, to, zeta}); it != overrides.end())
        return it->second;
    if (auto it = overrides.find({from, to, -1}); it != overrides.end())
        return it->second;
    return std::nullopt;
}

void validate_phase_matrices(const PhaseMatrices& mats, const RoadNetwork* net) {
    const Eigen::Index n = mats.p.size();
    if (mats.Q.rows() != n || mats.Q.cols() != n || mats.A.rows() != n ||
        mats.A.cols() != n)
        throw Property4Violation("inconsistent matrix dimensions");

    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(mats.p(i) > 0.0 && mats.p(i) <= 1.0))
            throw Property3Violation("p(" + std::to_string(i) + ") = " +
                                     std::to_string(mats.p(i)) +
                                     " outside (0, 1]");
        if (mats.Q(i, i) != 0.0)
            throw Property5Violation("Q diagonal entry " + std::to_string(i));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const double q = mats.Q(j, i);
            if (q < 0.0 || q > 1.0)
                throw Property4Violation("Q(" + std::to_string(j) + "," +
                                         std::to_string(i) + ") = " +
                                         std::to_string(q));
            if (i != j && q != 0.0 && mats.Q(i, j) != 0.0)
                throw Property6Violation("Q(" + std::to_string(j) + "," +
                                         std::to_string(i) + ") and Q(" +
                                         std::to_string(i) + "," +
                                         std::to_string(j) + ") both nonzero");
        }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sum = mats.Q.col(i).sum();
        const bool is_zero = std::abs(sum) <= kColumnSumTol;
        const bool is_one = std::abs(sum - 1.0) <= kColumnSumTol;
        if (!is_zero && !is_one)
            throw Property7Violation("column " + std::to_string(i) + " sums to " +
                                     std::to_string(sum));
        if (net != nullptr) {
            const int id = net->roads[static_cast<std::size_t>(i)];
            if (net->is_outlet(id) && !is_zero)
                throw Property7Violation("outlet " + road_str(id) +
                                         " has nonzero split column");
            if (!net->is_outlet(id) && !is_one)
                throw Property7Violation(road_str(id) +
                                         " split column does not sum to 1");
        }
    }
    if (net != nullptr) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mats.Q(j, i) == 0.0) continue;
                const int from = net->roads[static_cast<std::size_t>(i)];
                const int to = net->roads[static_cast<std::size_t>(j)];
                if (!net->has_edge(from, to))
                    throw Property6Violation("split on missing edge (" +
                                             std::to_string(from) + "," +
                                             std::to_string(to) + ")");
            }
        }
    }

    const Eigen::MatrixXd expected =
        Eigen::MatrixXd::Identity(n, n) +
        (mats.Q - Eigen::MatrixXd::Identity(n, n)) * mats.p.asDiagonal();
    if ((mats.A - expected).cwiseAbs().maxCoeff() > 1e-12)
        throw Property4Violation("A does not equal I + (Q - I) P");
}

PhaseMatrices build_phase_matrices(
    const RoadNetwork& net, const std::vector<double>& p_by_index,
    const std::map<std::pair<int, int>, double>& q_by_edge) {
    const int n = net.size();
    if (static_cast<int>(p_by_index.size()) != n)
        throw Property3Violation("p table size mismatch");

    PhaseMatrices mats;
    mats.p = Eigen::Map<const Eigen::VectorXd>(p_by_index.data(), n);
    mats.Q = Eigen::MatrixXd::Zero(n, n);

    for (const auto& [edge, q] : q_by_edge) {
        const auto& [from, to] = edge;
        if (!net.has_edge(from, to))
            throw Property6Violation("split on missing edge (" +
                                     std::to_string(from) + "," +
                                     std::to_string(to) + ")");
        if (q < 0.0)
            throw Property4Violation("negative split on edge (" +
                                     std::to_string(from) + "," +
                                     std::to_string(to) + ")");
        mats.Q(net.index_of(to), net.index_of(from)) = q;
    }

    // Renormalize split columns of non-outlet roads; tolerate only
    // round-off-level deviation from unit sum.
    for (int i = 0; i < n; ++i) {
        const int id = net.roads[static_cast<std::size_t>(i)];
        if (net.is_outlet(id)) continue;
        const double sum = mats.Q.col(i).sum();
        if (std::abs(sum - 1.0) > kColumnSumTol)
            throw SplitNotNormalized(road_str(id) + " split column sums to " +
                                     std::to_string(sum));
        mats.Q.col(i) /= sum;
    }

    mats.A = Eigen::MatrixXd::Identity(n, n) +
             (mats.Q - Eigen::MatrixXd::Identity(n, n)) * mats.p.asDiagonal();
    validate_phase_matrices(mats, &net);
    return mats;
}

std::vector<PhaseMatrices> build_all_phase_matrices(const RoadNetwork& net,
                                                    const PhaseSchedule& schedule,
                                                    const PTable& p_table,
                                                    const QTable& q_table) {
    const int n = net.size();
    std::vector<PhaseMatrices> result;
    result.reserve(static_cast<std::size_t>(schedule.cycle_length));

    for (int zeta = 0; zeta < schedule.cycle_length; ++zeta) {
        const ActivePhase active = active_phase(schedule, zeta);

        std::vector<bool> served(static_cast<std::size_t>(n), false);
        for (int j = 0; j < schedule.junction_count(); ++j) {
            const MovementPhase& phase =
                schedule.junction_cycles[j][active.junction_phase_index[j]];
            for (const auto& [from, to] : phase.edge_subset)
                served[static_cast<std::size_t>(net.index_of(from))] = true;
        }

        std::vector<double> p(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            const int id = net.roads[static_cast<std::size_t>(i)];
            double base = net.is_outlet(id)
                              ? p_table.outlet
                              : (served[static_cast<std::size_t>(i)] ? p_table.on
                                                                     : p_table.off);
            p[static_cast<std::size_t>(i)] = p_table.lookup(id, zeta, base);
        }

        std::map<std::pair<int, int>, double> q;
        for (int i = 0; i < n; ++i) {
            const int id = net.roads[static_cast<std::size_t>(i)];
            const auto& outs = net.out_neighbors(id);
            if (outs.empty()) continue;
            const double uniform = 1.0 / static_cast<double>(outs.size());
            for (int to : outs) {
                const auto override = q_table.lookup(id, to, zeta);
                q[{id, to}] = override.value_or(uniform);
            }
        }

        result.push_back(build_phase_matrices(net, p, q));
    }
    return result;
}

InputMatrix build_input_matrix(const RoadNetwork& net) {
    InputMatrix input;
    input.B = Eigen::MatrixXd::Zero(net.size(), net.inlet_count());
    for (int j = 0; j < net.inlet_count(); ++j)
        input.B(net.index_of(net.inlet_ids[static_cast<std::size_t>(j)]), j) = 1.0;
    return input;
}

TrafficState step(const TrafficState& state, const PhaseMatrices& mats,
                  const InputMatrix& input, const Eigen::VectorXd& u,
                  const FdParams& fd) {
    if (u.size() != input.B.cols())
        throw NegativeInflow("inflow dimension mismatch");
    if (u.size() > 0 && u.minCoeff() < 0.0)
        throw NegativeInflow("inflow " + std::to_string(u.minCoeff()));

    TrafficState next;
    next.x = mats.A * state.x + input.B * u;
    next.k = state.k + 1;

    for (Eigen::Index i = 0; i < next.x.size(); ++i) {
        if (next.x(i) < -1e-9 || next.x(i) > fd.rho_max + 1e-9)
            throw DensityOutOfRange("density " + std::to_string(next.x(i)) +
                                    " at index " + std::to_string(i) +
                                    " after step " + std::to_string(state.k));
    }
    return next;
}

Eigen::VectorXd outflows(const TrafficState& state, const PhaseMatrices& mats) {
    return mats.p.cwiseProduct(state.x);
}

double spectral_radius_power(const Eigen::MatrixXd& a, double rel_tol,
                             int max_iter) {
    const Eigen::Index n = a.rows();
    // Shift by I: for a nonnegative matrix the Perron root strictly
    // dominates every |lambda + 1| except its own, so the iteration
    // converges even when A itself has several eigenvalues on the
    // spectral circle.
    const Eigen::MatrixXd shifted = a + Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
    double lambda = 0.0;
    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd w = shifted * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;   // nilpotent after shift: impossible, but safe
        const double prev = lambda;
        lambda = norm;
        v = w / norm;
        if (iter > 0 && std::abs(lambda - prev) <= rel_tol * lambda)
            return lambda - 1.0;
    }
    throw PowerIterationNoConvergence("after " + std::to_string(max_iter) +
                                      " iterations");
}

StabilityReport stability_report(const std::vector<PhaseMatrices>& mats_per_phase,
                                 const RoadNetwork* net) {
    StabilityReport report;
    for (const auto& mats : mats_per_phase)
        validate_phase_matrices(mats, net);
    for (const auto& mats : mats_per_phase)
        report.spectral_radii.push_back(spectral_radius_power(mats.A));
    report.pass = std::all_of(report.spectral_radii.begin(),
                              report.spectral_radii.end(),
                              [](double r) { return r < 1.0; });
    return report;
}

} // namespace noir
