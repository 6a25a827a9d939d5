#pragma once

#include <Eigen/Dense>

#include "noir/errors.hpp"

namespace noir {

/// Strictly convex quadratic program
///   min 1/2 v' H v + f' v
///   s.t. a_in v <= b_in,  a_eq v = b_eq,  lower <= v (<= upper).
/// Empty matrices/vectors mean the corresponding block is absent.
struct QpInstance {
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    Eigen::MatrixXd a_in;
    Eigen::VectorXd b_in;
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    Eigen::VectorXd lower;   // optional (size 0 or n)
    Eigen::VectorXd upper;   // optional (size 0 or n)
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct KktResiduals {
    double stationarity = 0.0;
    double primal = 0.0;
    double dual = 0.0;
    double complementarity = 0.0;
};

struct QpTolerances {
    double primal = 1e-7;
    double stationarity = 1e-7;
    double complementarity = 1e-7;
};

struct QpSolution {
    Eigen::VectorXd v;
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIterations;
    KktResiduals kkt;
    int iterations = 0;
};

/// Dual active-set solve (Goldfarb-Idnani), with an operator-splitting
/// fallback for instances the active-set path cannot finish. Deterministic:
/// identical inputs give bitwise-identical minimizers.
QpSolution solve(const QpInstance& qp, const QpTolerances& tol = {},
                 int max_iter = 0 /* 0: dimension-based default */);

/// Inf-norm KKT residuals at a candidate point, with least-squares
/// multipliers fit over the near-active constraints.
KktResiduals kkt_residuals(const QpInstance& qp, const Eigen::VectorXd& v);

} // namespace noir
