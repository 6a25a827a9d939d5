#include "noir/mpc.hpp"

#include <string>
#include <utility>

namespace noir {

HorizonPrediction build_prediction(const PhaseSchedule& schedule,
                                   const std::vector<PhaseMatrices>& mats_per_phase,
                                   const InputMatrix& input, long k) {
    const int nc = schedule.cycle_length;
    if (static_cast<int>(mats_per_phase.size()) != nc)
        throw Property4Violation("phase matrix list length != cycle length");

    HorizonPrediction pred;
    pred.horizon = nc;
    pred.n = static_cast<int>(input.B.rows());
    pred.n_in = static_cast<int>(input.B.cols());

    pred.h.reserve(static_cast<std::size_t>(nc) + 1);
    pred.h.push_back(Eigen::MatrixXd::Identity(pred.n, pred.n));
    for (int i = 1; i <= nc; ++i) {
        const int zeta = static_cast<int>((k + i - 1) % nc);
        pred.h.push_back(mats_per_phase[static_cast<std::size_t>(zeta)].A *
                         pred.h.back());
    }

    pred.g1.resize(static_cast<Eigen::Index>(pred.n) * nc, pred.n);
    pred.g2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pred.n) * nc,
                                    static_cast<Eigen::Index>(pred.n_in) * nc);
    for (int i = 1; i <= nc; ++i)
        pred.g1.middleRows(static_cast<Eigen::Index>(i - 1) * pred.n, pred.n) =
            pred.h[static_cast<std::size_t>(i)];

    // block (i,j), j <= i-1: partial product of A from step k+j+1 to k+i-1
    // applied to B; identity when j = i-1
    for (int j = 0; j < nc; ++j) {
        Eigen::MatrixXd phi_b = input.B;
        for (int i = j + 1; i <= nc; ++i) {
            pred.g2.block(static_cast<Eigen::Index>(i - 1) * pred.n,
                          static_cast<Eigen::Index>(j) * pred.n_in, pred.n,
                          pred.n_in) = phi_b;
            if (i < nc) {
                const int zeta = static_cast<int>((k + i) % nc);
                phi_b = mats_per_phase[static_cast<std::size_t>(zeta)].A * phi_b;
            }
        }
    }
    return pred;
}

CostTerms build_cost(const HorizonPrediction& pred, const TrafficState& state,
                     double beta) {
    if (beta < 0.0)
        throw NotPositiveDefinite("negative density cost weight");
    const Eigen::Index nu = pred.g2.cols();
    CostTerms cost;
    cost.w1 = Eigen::MatrixXd::Identity(nu, nu);
    cost.w1.noalias() += beta * pred.g2.transpose() * pred.g2;
    const Eigen::VectorXd g1x = pred.g1 * state.x;
    cost.w2.noalias() = beta * pred.g2.transpose() * g1x;
    cost.w3 = 0.5 * beta * g1x.squaredNorm();
    return cost;
}

Eigen::VectorXd w4_diagonal(const PhaseSchedule& schedule,
                            const std::vector<PhaseMatrices>& mats_per_phase,
                            long k) {
    const int nc = schedule.cycle_length;
    const Eigen::Index n = mats_per_phase.front().p.size();
    Eigen::VectorXd diag(n * nc);
    for (int i = 1; i <= nc; ++i) {
        const int zeta = static_cast<int>((k + i) % nc);
        diag.segment(static_cast<Eigen::Index>(i - 1) * n, n) =
            mats_per_phase[static_cast<std::size_t>(zeta)].p;
    }
    return diag;
}

ConstraintSystem build_constraints(const HorizonPrediction& pred,
                                   const TrafficState& state,
                                   const FdParams& fd, double u0,
                                   const Eigen::VectorXd& w4_diag) {
    fd.validate();
    if (u0 < 0.0)
        throw NegativeInflow("net inflow " + std::to_string(u0));
    for (Eigen::Index i = 0; i < state.x.size(); ++i) {
        if (state.x(i) < -1e-9 || state.x(i) > fd.rho_max + 1e-9)
            throw InfeasibleAtCurrentState("density " +
                                           std::to_string(state.x(i)) +
                                           " at index " + std::to_string(i));
    }

    const Eigen::Index rows = pred.g2.rows();
    const Eigen::Index nu = pred.g2.cols();
    if (w4_diag.size() != rows)
        throw Property4Violation("w4 diagonal length mismatch");

    const Eigen::VectorXd c = pred.g1 * state.x;
    const double slope_left = fd.z_max / fd.rho_min;
    const double slope_right = fd.z_max / (fd.rho_max - fd.rho_mid);

    // z = W4 X with X = c + G2 U; five row groups:
    //   -X <= 0;  X <= rho_max;  z <= slope_left X;  z <= z_max;
    //   z <= slope_right (rho_max - X)
    ConstraintSystem sys;
    sys.a_in.resize(5 * rows, nu);
    sys.b_in.resize(5 * rows);

    sys.a_in.middleRows(0, rows) = -pred.g2;
    sys.b_in.segment(0, rows) = c;

    sys.a_in.middleRows(rows, rows) = pred.g2;
    sys.b_in.segment(rows, rows) =
        Eigen::VectorXd::Constant(rows, fd.rho_max) - c;

    const Eigen::VectorXd d_left =
        w4_diag - Eigen::VectorXd::Constant(rows, slope_left);
    sys.a_in.middleRows(2 * rows, rows) = d_left.asDiagonal() * pred.g2;
    sys.b_in.segment(2 * rows, rows) = -d_left.cwiseProduct(c);

    sys.a_in.middleRows(3 * rows, rows) = w4_diag.asDiagonal() * pred.g2;
    sys.b_in.segment(3 * rows, rows) =
        Eigen::VectorXd::Constant(rows, fd.z_max) - w4_diag.cwiseProduct(c);

    const Eigen::VectorXd d_right =
        w4_diag + Eigen::VectorXd::Constant(rows, slope_right);
    sys.a_in.middleRows(4 * rows, rows) = d_right.asDiagonal() * pred.g2;
    sys.b_in.segment(4 * rows, rows) =
        Eigen::VectorXd::Constant(rows, slope_right * fd.rho_max) -
        d_right.cwiseProduct(c);

    sys.a_eq = Eigen::MatrixXd::Zero(pred.horizon, nu);
    for (int j = 0; j < pred.horizon; ++j)
        sys.a_eq.block(j, static_cast<Eigen::Index>(j) * pred.n_in, 1,
                       pred.n_in).setOnes();
    sys.b_eq = Eigen::VectorXd::Constant(pred.horizon, u0);

    sys.lower = Eigen::VectorXd::Zero(nu);
    return sys;
}

Controller::Controller(const RoadNetwork& net, const PhaseSchedule& schedule,
                       std::vector<PhaseMatrices> mats_per_phase, FdParams fd,
                       double u0, double beta)
    : mats_(std::move(mats_per_phase)),
      fd_(fd),
      u0_(u0),
      beta_(beta),
      horizon_(schedule.cycle_length) {
    if (net.inlet_count() == 0)
        throw NoInletRoads("network has no boundary-inflow roads");
    if (u0 < 0.0)
        throw NegativeInflow("net inflow " + std::to_string(u0));
    fd_.validate();
    for (const auto& mats : mats_) validate_phase_matrices(mats, &net);

    const InputMatrix input = build_input_matrix(net);
    const TrafficState zero_state{Eigen::VectorXd::Zero(net.size()), 0};
    cache_.resize(static_cast<std::size_t>(horizon_));
    for (int zeta = 0; zeta < horizon_; ++zeta) {
        PhaseCache& slot = cache_[static_cast<std::size_t>(zeta)];
        slot.pred = build_prediction(schedule, mats_, input, zeta);
        slot.w4 = w4_diagonal(schedule, mats_, zeta);
        slot.w1 = build_cost(slot.pred, zero_state, beta_).w1;
        const ConstraintSystem at_zero =
            build_constraints(slot.pred, zero_state, fd_, u0_, slot.w4);
        slot.a_in = at_zero.a_in;
        slot.a_eq = at_zero.a_eq;
        slot.b_eq = at_zero.b_eq;
    }
}

MpcProblem Controller::assemble(const TrafficState& state) const {
    const PhaseCache& slot = cache_[static_cast<std::size_t>(state.k % horizon_)];
    MpcProblem problem;
    problem.beta = beta_;
    problem.cost = build_cost(slot.pred, state, beta_);
    problem.cost.w1 = slot.w1;   // reuse the cached Hessian bit-for-bit
    problem.constraints =
        build_constraints(slot.pred, state, fd_, u0_, slot.w4);
    problem.constraints.a_in = slot.a_in;
    problem.constraints.a_eq = slot.a_eq;
    problem.constraints.b_eq = slot.b_eq;
    return problem;
}

Eigen::VectorXd Controller::solve_step(const TrafficState& state,
                                       StepInfo* info) const {
    const MpcProblem problem = assemble(state);
    QpInstance qp;
    qp.hessian = problem.cost.w1;
    qp.linear = problem.cost.w2;
    qp.a_in = problem.constraints.a_in;
    qp.b_in = problem.constraints.b_in;
    qp.a_eq = problem.constraints.a_eq;
    qp.b_eq = problem.constraints.b_eq;
    qp.lower = problem.constraints.lower;

    const QpSolution sol = noir::solve(qp);
    if (sol.status == QpStatus::Infeasible)
        throw QpInfeasible("at step " + std::to_string(state.k));
    if (sol.status == QpStatus::MaxIterations)
        throw QpMaxIterations("at step " + std::to_string(state.k));

    if (info != nullptr) {
        info->iterations = sol.iterations;
        info->kkt = sol.kkt;
        info->full_solution = sol.v;
    }
    const PhaseCache& slot = cache_[static_cast<std::size_t>(state.k % horizon_)];
    Eigen::VectorXd u = sol.v.head(slot.pred.n_in);
    // round-off below zero is solver noise, a real violation is not
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        if (u(i) < -1e-7)
            throw QpInfeasible("negative inflow " + std::to_string(u(i)) +
                               " at step " + std::to_string(state.k));
        u(i) = std::max(0.0, u(i));
    }
    return u;
}

} // namespace noir
