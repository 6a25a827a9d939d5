#pragma once

#include <vector>

#include <Eigen/Dense>

#include "noir/dynamics.hpp"
#include "noir/network.hpp"
#include "noir/qp.hpp"

namespace noir {

/// One-cycle prediction model anchored at time k:
///   X = g1 x[k] + g2 U,  X = (x[k+1]; ...; x[k+n_c]),
///   U = (u[k]; ...; u[k+n_c-1]).
/// h[i] is the i-step state-transition product, h[0] = I.
struct HorizonPrediction {
    Eigen::MatrixXd g1;                 // (N n_c) x N, block i = h[i+1]
    Eigen::MatrixXd g2;                 // (N n_c) x (N_in n_c), block lower triangular
    std::vector<Eigen::MatrixXd> h;     // size horizon + 1
    int n = 0;
    int n_in = 0;
    int horizon = 0;                    // n_c
};

HorizonPrediction build_prediction(const PhaseSchedule& schedule,
                                   const std::vector<PhaseMatrices>& mats_per_phase,
                                   const InputMatrix& input, long k);

/// Quadratic cost 1/2 U' w1 U + w2' U + w3, equal over the horizon to
/// 1/2 sum_j ( |u[k+j]|^2 + beta |x[k+j+1]|^2 ).
struct CostTerms {
    Eigen::MatrixXd w1;
    Eigen::VectorXd w2;
    double w3 = 0.0;
};

CostTerms build_cost(const HorizonPrediction& pred, const TrafficState& state,
                     double beta);

/// Stacked per-phase outflow probabilities: the diagonal of
/// blockdiag(P at k+1, ..., P at k+horizon).
Eigen::VectorXd w4_diagonal(const PhaseSchedule& schedule,
                            const std::vector<PhaseMatrices>& mats_per_phase,
                            long k);

struct ConstraintSystem {
    Eigen::MatrixXd a_in;
    Eigen::VectorXd b_in;
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    Eigen::VectorXd lower;   // elementwise U >= 0
};

/// Feasibility constraints on U for the predicted trajectory: densities in
/// [0, rho_max], outflows under the three fundamental-diagram caps, per-step
/// inflow sum pinned to u0, and U >= 0. Throws InfeasibleAtCurrentState if
/// the current densities already breach [0, rho_max].
ConstraintSystem build_constraints(const HorizonPrediction& pred,
                                   const TrafficState& state,
                                   const FdParams& fd, double u0,
                                   const Eigen::VectorXd& w4_diag);

struct MpcProblem {
    CostTerms cost;
    ConstraintSystem constraints;
    double beta = 0.0;
};

/// Receding-horizon boundary-inflow controller. Per-cycle-position matrices
/// (prediction, Hessian, constraint left-hand sides) are built once in the
/// constructor and reused verbatim, so matrices used at k and k + n_c are
/// the same objects.
class Controller {
  public:
    Controller(const RoadNetwork& net, const PhaseSchedule& schedule,
               std::vector<PhaseMatrices> mats_per_phase, FdParams fd,
               double u0, double beta);

    struct StepInfo {
        int iterations = 0;
        KktResiduals kkt;
        Eigen::VectorXd full_solution;
    };

    /// Optimal first-step inflow u*[k], length N_in; u* >= 0 and
    /// sum u* = u0 at the solver tolerance. Throws QpInfeasible or
    /// QpMaxIterations.
    Eigen::VectorXd solve_step(const TrafficState& state,
                               StepInfo* info = nullptr) const;

    MpcProblem assemble(const TrafficState& state) const;

    const HorizonPrediction& prediction_at(long k) const {
        return cache_[static_cast<std::size_t>(k % horizon_)].pred;
    }
    const Eigen::VectorXd& w4_at(long k) const {
        return cache_[static_cast<std::size_t>(k % horizon_)].w4;
    }
    const Eigen::MatrixXd& hessian_at(long k) const {
        return cache_[static_cast<std::size_t>(k % horizon_)].w1;
    }
    int horizon() const { return horizon_; }
    double u0() const { return u0_; }
    double beta() const { return beta_; }

  private:
    struct PhaseCache {
        HorizonPrediction pred;
        Eigen::VectorXd w4;
        Eigen::MatrixXd w1;
        Eigen::MatrixXd a_in;     // constraint LHS, state-independent
        Eigen::MatrixXd a_eq;
        Eigen::VectorXd b_eq;
    };

    std::vector<PhaseMatrices> mats_;
    FdParams fd_;
    double u0_ = 0.0;
    double beta_ = 1.0;
    int horizon_ = 1;
    std::vector<PhaseCache> cache_;
};

} // namespace noir
