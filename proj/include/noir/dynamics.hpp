#pragma once

#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "noir/network.hpp"

namespace noir {

/// Trapezoidal fundamental diagram parameters (vehicles / step, vehicles).
struct FdParams {
    double z_max = 20.0;
    double rho_min = 20.0;
    double rho_mid = 40.0;
    double rho_max = 55.0;

    void validate() const;
};

/// Max admissible outflow at density rho: the lower envelope of the left
/// ramp, the flat cap, and the right (congested) ramp, floored at 0.
double fd_outflow_cap(double rho, const FdParams& fd);

/// Per-phase dynamics matrices. p holds the diagonal of the outflow
/// probability matrix P; Q(j,i) is the fraction of road i's outflow routed
/// to out-neighbor j; A = I + (Q - I) P.
struct PhaseMatrices {
    Eigen::VectorXd p;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd A;

    Eigen::MatrixXd P() const { return Eigen::MatrixXd(p.asDiagonal()); }
};

/// Checks the structural properties of (P, Q, A): diagonal p in (0,1],
/// Q nonnegative with zero diagonal and entries <= 1, no mutually nonzero
/// off-diagonal pair, column sums exactly 0 or 1, and A = I + (Q - I) P.
/// When a network is given, additionally checks edge support and that
/// column sums are 0 exactly on outlet columns.
void validate_phase_matrices(const PhaseMatrices& mats,
                             const RoadNetwork* net = nullptr);

/// Default outflow probabilities plus per-road-per-phase overrides.
/// Override key (road_id, zeta); zeta == -1 applies to every phase.
struct PTable {
    double on = 0.8;
    double off = 0.05;
    double outlet = 0.8;
    std::map<std::pair<int, int>, double> overrides;

    double lookup(int road_id, int zeta, double fallback) const;
};

/// Per-edge split fraction overrides; default is uniform over out-neighbors.
/// Override key (from, to, zeta); zeta == -1 applies to every phase.
struct QTable {
    std::map<std::tuple<int, int, int>, double> overrides;

    std::optional<double> lookup(int from, int to, int zeta) const;
};

/// Builds (P, Q, A) for one NOIR phase from explicit per-road outflow
/// probabilities and per-edge split fractions. Split columns are
/// renormalized when within 1e-9 of unit sum, rejected otherwise.
PhaseMatrices build_phase_matrices(
    const RoadNetwork& net, const std::vector<double>& p_by_index,
    const std::map<std::pair<int, int>, double>& q_by_edge);

/// Builds the matrices for every cycle position 0..n_c-1. A road is served
/// under a phase when one of its out-edges is enabled at its downstream
/// junction; served roads get p_on, idle roads p_off, outlets p_outlet,
/// all subject to PTable overrides.
std::vector<PhaseMatrices> build_all_phase_matrices(
    const RoadNetwork& net, const PhaseSchedule& schedule,
    const PTable& p_table = {}, const QTable& q_table = {});

/// Boundary-inflow selector: N x N_in, one 1 per column, row i nonzero iff
/// road i is an inlet; column order follows inlet_ids.
struct InputMatrix {
    Eigen::MatrixXd B;
};

InputMatrix build_input_matrix(const RoadNetwork& net);

struct TrafficState {
    Eigen::VectorXd x;   // densities, one per road (network index order)
    long k = 0;
};

/// One conservation step: x' = A x + B u. Rejects negative inflow and any
/// resulting density outside [0, rho_max] (an infeasible control is an
/// error, never clamped).
TrafficState step(const TrafficState& state, const PhaseMatrices& mats,
                  const InputMatrix& input, const Eigen::VectorXd& u,
                  const FdParams& fd);

/// z = P x.
Eigen::VectorXd outflows(const TrafficState& state, const PhaseMatrices& mats);

struct StabilityReport {
    std::vector<double> spectral_radii;   // one per phase
    bool pass = false;                    // all strictly below 1
};

/// Validates every phase, then estimates each spectral radius by power
/// iteration (on the shifted nonnegative matrix A + I) to 1e-10 relative
/// tolerance, at most 10000 iterations.
StabilityReport stability_report(const std::vector<PhaseMatrices>& mats_per_phase,
                                 const RoadNetwork* net = nullptr);

/// Power-iteration spectral radius of a nonnegative matrix.
double spectral_radius_power(const Eigen::MatrixXd& a, double rel_tol = 1e-10,
                             int max_iter = 10000);

} // namespace noir
