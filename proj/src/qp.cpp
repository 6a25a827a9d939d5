#include "noir/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace noir {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kEps = std::numeric_limits<double>::epsilon();

double hypot2(double a, double b) { return std::hypot(a, b); }

// --- Goldfarb-Idnani dual active-set core -------------------------------
//
// Solves min 1/2 x'Gx + g0'x s.t. CE'x + ce0 = 0, CI'x + ci0 >= 0.
// Constraint normals are the *columns* of CE and CI.

struct GiResult {
    enum Code { Ok, Infeasible, Stalled } code = Stalled;
    Eigen::VectorXd x;
    int iterations = 0;
};

bool gi_add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                       Eigen::VectorXd& d, int& iq, double& R_norm) {
    const int n = static_cast<int>(d.size());
    for (int j = n - 1; j >= iq + 1; --j) {
        double cc = d(j - 1);
        double ss = d(j);
        const double h = hypot2(cc, ss);
        if (h < kEps) continue;
        d(j) = 0.0;
        ss /= h;
        cc /= h;
        if (cc < 0.0) {
            cc = -cc;
            ss = -ss;
            d(j - 1) = -h;
        } else {
            d(j - 1) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = 0; k < n; ++k) {
            const double t1 = J(k, j - 1);
            const double t2 = J(k, j);
            J(k, j - 1) = t1 * cc + t2 * ss;
            J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
        }
    }
    ++iq;
    R.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d(iq - 1)) <= kEps * R_norm) return false;
    R_norm = std::max(R_norm, std::abs(d(iq - 1)));
    return true;
}

void gi_delete_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                          Eigen::VectorXi& A, Eigen::VectorXd& u, int p,
                          int& iq, int l) {
    const int n = static_cast<int>(J.rows());
    int qq = -1;
    for (int i = p; i < iq; ++i) {
        if (A(i) == l) {
            qq = i;
            break;
        }
    }
    if (qq < 0) return;
    for (int i = qq; i < iq - 1; ++i) {
        A(i) = A(i + 1);
        u(i) = u(i + 1);
        R.col(i) = R.col(i + 1);
    }
    A(iq - 1) = A(iq);
    u(iq - 1) = u(iq);
    A(iq) = 0;
    u(iq) = 0.0;
    R.col(iq - 1).setZero();
    --iq;
    if (iq == 0) return;

    for (int j = qq; j < iq; ++j) {
        double cc = R(j, j);
        double ss = R(j + 1, j);
        const double h = hypot2(cc, ss);
        if (h < kEps) continue;
        cc /= h;
        ss /= h;
        R(j + 1, j) = 0.0;
        if (cc < 0.0) {
            R(j, j) = -h;
            cc = -cc;
            ss = -ss;
        } else {
            R(j, j) = h;
        }
        const double xny = ss / (1.0 + cc);
        for (int k = j + 1; k < iq; ++k) {
            const double t1 = R(j, k);
            const double t2 = R(j + 1, k);
            R(j, k) = t1 * cc + t2 * ss;
            R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
        }
        for (int k = 0; k < n; ++k) {
            const double t1 = J(k, j);
            const double t2 = J(k, j + 1);
            J(k, j) = t1 * cc + t2 * ss;
            J(k, j + 1) = xny * (J(k, j) + t1) - t2;
        }
    }
}

GiResult gi_solve(const Eigen::LLT<Eigen::MatrixXd>& llt,
                  const Eigen::VectorXd& g0, const Eigen::MatrixXd& CE,
                  const Eigen::VectorXd& ce0, const Eigen::MatrixXd& CI,
                  const Eigen::VectorXd& ci0, int max_iter) {
    const int n = static_cast<int>(g0.size());
    const int p = static_cast<int>(CE.cols());
    const int m = static_cast<int>(CI.cols());

    GiResult result;
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd J = Eigen::MatrixXd::Identity(n, n);
    llt.matrixU().solveInPlace(J);   // J = L^-T

    Eigen::VectorXd x = -llt.solve(g0);
    const double c1 = llt.matrixLLT().diagonal().squaredNorm();   // ~tr(G)
    const double c2 = J.diagonal().sum();
    double R_norm = 1.0;

    Eigen::VectorXd s(m), z(n), r(m + p), d(n), np(n), u(m + p);
    Eigen::VectorXd x_old(n), u_old(m + p);
    Eigen::VectorXi A(m + p), A_old(m + p), iai(m);
    std::vector<bool> iaexcl(static_cast<std::size_t>(m), true);

    int iq = 0;
    for (int i = 0; i < p; ++i) {
        np = CE.col(i);
        d.noalias() = J.transpose() * np;
        z.setZero();
        if (iq < n) z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
        if (iq > 0)
            r.head(iq) = R.topLeftCorner(iq, iq)
                             .triangularView<Eigen::Upper>()
                             .solve(d.head(iq));
        double t2 = 0.0;
        if (z.squaredNorm() > kEps)
            t2 = (-np.dot(x) - ce0(i)) / z.dot(np);
        x += t2 * z;
        u(iq) = t2;
        u.head(iq) -= t2 * r.head(iq);
        A(i) = -i - 1;
        if (!gi_add_constraint(R, J, d, iq, R_norm)) {
            result.code = GiResult::Stalled;   // dependent equalities
            result.x = x;
            return result;
        }
    }
    for (int i = 0; i < m; ++i) iai(i) = i;

    int iter = 0;
    int ip = 0;
    double ss_min = 0.0;

l1:
    if (++iter > max_iter) {
        result.code = GiResult::Stalled;
        result.x = x;
        result.iterations = iter;
        return result;
    }
    for (int i = p; i < iq; ++i) iai(A(i)) = -1;

    s.noalias() = CI.transpose() * x + ci0;
    {
        double psi = 0.0;
        for (int i = 0; i < m; ++i) {
            iaexcl[static_cast<std::size_t>(i)] = true;
            psi += std::min(0.0, s(i));
        }
        if (std::abs(psi) <= m * kEps * std::abs(c1) * std::abs(c2) * 100.0) {
            result.code = GiResult::Ok;
            result.x = x;
            result.iterations = iter;
            return result;
        }
    }
    u_old.head(iq) = u.head(iq);
    A_old.head(iq) = A.head(iq);
    x_old = x;

l2:
    ss_min = 0.0;
    ip = -1;
    for (int i = 0; i < m; ++i) {
        if (s(i) < ss_min && iai(i) != -1 && iaexcl[static_cast<std::size_t>(i)]) {
            ss_min = s(i);
            ip = i;
        }
    }
    if (ip < 0) {
        result.code = GiResult::Ok;
        result.x = x;
        result.iterations = iter;
        return result;
    }
    np = CI.col(ip);
    u(iq) = 0.0;
    A(iq) = ip;

l2a:
    d.noalias() = J.transpose() * np;
    z.setZero();
    if (iq < n) z.noalias() = J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0)
        r.head(iq) = R.topLeftCorner(iq, iq)
                         .triangularView<Eigen::Upper>()
                         .solve(d.head(iq));

    int l = 0;
    double t1 = kInf;
    for (int k = p; k < iq; ++k) {
        if (r(k) > 0.0 && u(k) / r(k) < t1) {
            t1 = u(k) / r(k);
            l = A(k);
        }
    }
    double t2 = kInf;
    if (z.squaredNorm() > kEps) t2 = -s(ip) / z.dot(np);
    const double t = std::min(t1, t2);

    if (t >= kInf) {
        result.code = GiResult::Infeasible;
        result.x = x;
        result.iterations = iter;
        return result;
    }
    if (t2 >= kInf) {
        // dual-space step only: drop the blocking constraint
        u.head(iq) -= t * r.head(iq);
        u(iq) += t;
        iai(l) = l;
        gi_delete_constraint(R, J, A, u, p, iq, l);
        goto l2a;
    }

    x += t * z;
    u.head(iq) -= t * r.head(iq);
    u(iq) += t;

    if (std::abs(t - t2) < kEps) {
        if (!gi_add_constraint(R, J, d, iq, R_norm)) {
            // degenerate constraint: exclude it and restart from saved state
            iaexcl[static_cast<std::size_t>(ip)] = false;
            gi_delete_constraint(R, J, A, u, p, iq, ip);
            for (int i = 0; i < m; ++i) iai(i) = i;
            for (int i = 0; i < iq; ++i) {
                A(i) = A_old(i);
                if (A(i) >= 0) iai(A(i)) = -1;
                u(i) = u_old(i);
            }
            x = x_old;
            goto l2;
        }
        iai(ip) = -1;
        goto l1;
    }
    // partial step: drop the blocking constraint and retry
    iai(l) = l;
    gi_delete_constraint(R, J, A, u, p, iq, l);
    s(ip) = np.dot(x) + ci0(ip);
    goto l2a;
}

// --- operator-splitting fallback -----------------------------------------
//
// ADMM on  min 1/2 v'Hv + f'v  s.t.  l <= Cv <= u,  with an active-set
// polish pass once the iterates settle.

struct AdmmResult {
    bool diverged = false;
    bool converged = false;
    Eigen::VectorXd v;
    int iterations = 0;
};

AdmmResult admm_solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                      const Eigen::MatrixXd& C, const Eigen::VectorXd& l,
                      const Eigen::VectorXd& u, int max_iter) {
    const int n = static_cast<int>(H.rows());
    const int k = static_cast<int>(C.rows());
    const double sigma = 1e-6;
    const double rho = 0.1;

    Eigen::MatrixXd K = H + sigma * Eigen::MatrixXd::Identity(n, n);
    if (k > 0) K.noalias() += rho * C.transpose() * C;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(K);

    AdmmResult result;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(k).cwiseMax(l).cwiseMin(u);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(k);

    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd rhs = sigma * v - f;
        if (k > 0) rhs.noalias() += C.transpose() * (rho * z - y);
        v = ldlt.solve(rhs);
        result.iterations = iter + 1;
        if (v.cwiseAbs().maxCoeff() > 1e12) {
            result.diverged = true;
            result.v = v;
            return result;
        }
        if (k == 0) {
            result.converged = true;
            break;
        }
        const Eigen::VectorXd cv = C * v;
        const Eigen::VectorXd z_prev = z;
        z = (cv + y / rho).cwiseMax(l).cwiseMin(u);
        y += rho * (cv - z);
        const double r_prim = (cv - z).cwiseAbs().maxCoeff();
        const double r_dual =
            rho * (C.transpose() * (z - z_prev)).cwiseAbs().maxCoeff();
        if (r_prim < 1e-9 && r_dual < 1e-9) {
            result.converged = true;
            break;
        }
    }
    result.v = v;

    if (k > 0) {
        // polish: equality-solve on the constraints the splitting iterates
        // ended on, then keep the polished point if it is feasible
        std::vector<int> active;
        for (int i = 0; i < k; ++i) {
            const double cvi = C.row(i).dot(v);
            const bool at_lower = std::isfinite(l(i)) && cvi - l(i) < 1e-6;
            const bool at_upper = std::isfinite(u(i)) && u(i) - cvi < 1e-6;
            if (l(i) == u(i) || at_lower || at_upper) active.push_back(i);
        }
        const int na = static_cast<int>(active.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
        kkt.topLeftCorner(n, n) = H;
        Eigen::VectorXd rhs(n + na);
        rhs.head(n) = -f;
        for (int a = 0; a < na; ++a) {
            const int i = active[static_cast<std::size_t>(a)];
            kkt.block(n + a, 0, 1, n) = C.row(i);
            kkt.block(0, n + a, n, 1) = C.row(i).transpose();
            const double cvi = C.row(i).dot(v);
            const bool to_upper =
                !std::isfinite(l(i)) ||
                (std::isfinite(u(i)) && std::abs(cvi - u(i)) <= std::abs(cvi - l(i)));
            rhs(n + a) = to_upper ? u(i) : l(i);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (lu.isInvertible()) {
            const Eigen::VectorXd sol = lu.solve(rhs);
            const Eigen::VectorXd vp = sol.head(n);
            const Eigen::VectorXd cvp = C * vp;
            bool feasible = true;
            for (int i = 0; i < k; ++i) {
                if (cvp(i) < l(i) - 1e-8 || cvp(i) > u(i) + 1e-8) {
                    feasible = false;
                    break;
                }
            }
            const double obj_v = 0.5 * v.dot(H * v) + f.dot(v);
            const double obj_p = 0.5 * vp.dot(H * vp) + f.dot(vp);
            if (feasible && obj_p <= obj_v + 1e-10) result.v = vp;
        }
    }
    return result;
}

struct IneqSystem {
    Eigen::MatrixXd m;   // rows: m v <= d
    Eigen::VectorXd d;
};

IneqSystem stack_inequalities(const QpInstance& qp) {
    const int n = static_cast<int>(qp.hessian.rows());
    const int mi = static_cast<int>(qp.a_in.rows());
    const int nl = qp.lower.size() > 0 ? n : 0;
    const int nu = qp.upper.size() > 0 ? n : 0;
    IneqSystem sys;
    sys.m = Eigen::MatrixXd::Zero(mi + nl + nu, n);
    sys.d = Eigen::VectorXd::Zero(mi + nl + nu);
    if (mi > 0) {
        sys.m.topRows(mi) = qp.a_in;
        sys.d.head(mi) = qp.b_in;
    }
    for (int i = 0; i < nl; ++i) {
        sys.m(mi + i, i) = -1.0;        // -v_i <= -lower_i
        sys.d(mi + i) = -qp.lower(i);
    }
    for (int i = 0; i < nu; ++i) {
        sys.m(mi + nl + i, i) = 1.0;    // v_i <= upper_i
        sys.d(mi + nl + i) = qp.upper(i);
    }
    return sys;
}

void check_dimensions(const QpInstance& qp) {
    const auto n = qp.hessian.rows();
    if (qp.hessian.cols() != n || qp.linear.size() != n)
        throw NotPositiveDefinite("hessian/linear dimension mismatch");
    if (qp.a_in.rows() != qp.b_in.size() ||
        (qp.a_in.rows() > 0 && qp.a_in.cols() != n))
        throw NotPositiveDefinite("inequality block dimension mismatch");
    if (qp.a_eq.rows() != qp.b_eq.size() ||
        (qp.a_eq.rows() > 0 && qp.a_eq.cols() != n))
        throw NotPositiveDefinite("equality block dimension mismatch");
    if (qp.lower.size() != 0 && qp.lower.size() != n)
        throw NotPositiveDefinite("lower bound dimension mismatch");
    if (qp.upper.size() != 0 && qp.upper.size() != n)
        throw NotPositiveDefinite("upper bound dimension mismatch");
}

} // namespace

KktResiduals kkt_residuals(const QpInstance& qp, const Eigen::VectorXd& v) {
    const int n = static_cast<int>(qp.hessian.rows());
    const IneqSystem ineq = stack_inequalities(qp);
    const int mi = static_cast<int>(ineq.m.rows());
    const int p = static_cast<int>(qp.a_eq.rows());

    KktResiduals res;
    const Eigen::VectorXd grad =
        0.5 * (qp.hessian + qp.hessian.transpose()) * v + qp.linear;

    Eigen::VectorXd slack(mi);
    if (mi > 0) slack = ineq.d - ineq.m * v;

    double primal = 0.0;
    if (p > 0) primal = (qp.a_eq * v - qp.b_eq).cwiseAbs().maxCoeff();
    for (int i = 0; i < mi; ++i) primal = std::max(primal, -slack(i));
    res.primal = std::max(0.0, primal);

    std::vector<int> active;
    for (int i = 0; i < mi; ++i)
        if (slack(i) <= 1e-6 * (1.0 + std::abs(ineq.d(i)))) active.push_back(i);
    const int na = static_cast<int>(active.size());

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(mi);
    if (p + na > 0) {
        Eigen::MatrixXd cols(n, p + na);
        for (int i = 0; i < p; ++i) cols.col(i) = qp.a_eq.row(i).transpose();
        for (int a = 0; a < na; ++a)
            cols.col(p + a) = ineq.m.row(active[static_cast<std::size_t>(a)]).transpose();
        const Eigen::VectorXd mult =
            cols.completeOrthogonalDecomposition().solve(-grad);
        for (int a = 0; a < na; ++a)
            lambda(active[static_cast<std::size_t>(a)]) = mult(p + a);
        res.stationarity = (grad + cols * mult).cwiseAbs().maxCoeff();
    } else {
        res.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;
    }

    res.dual = mi > 0 ? std::max(0.0, -lambda.minCoeff()) : 0.0;
    double comp = 0.0;
    for (int i = 0; i < mi; ++i)
        comp = std::max(comp, std::abs(lambda(i) * slack(i)));
    res.complementarity = comp;
    return res;
}

QpSolution solve(const QpInstance& qp, const QpTolerances& tol, int max_iter) {
    check_dimensions(qp);
    const int n = static_cast<int>(qp.hessian.rows());

    const double sym_err =
        (qp.hessian - qp.hessian.transpose()).cwiseAbs().maxCoeff();
    if (sym_err > 1e-10 * (1.0 + qp.hessian.cwiseAbs().maxCoeff()))
        throw NotPositiveDefinite("hessian asymmetry " + std::to_string(sym_err));
    const Eigen::MatrixXd h_sym = 0.5 * (qp.hessian + qp.hessian.transpose());

    {
        Eigen::LLT<Eigen::MatrixXd> probe(
            h_sym - 1e-8 * Eigen::MatrixXd::Identity(n, n));
        if (probe.info() != Eigen::Success)
            throw NotPositiveDefinite("min eigenvalue below 1e-8");
    }

    QpSolution solution;
    auto finish = [&](const Eigen::VectorXd& v, QpStatus status, int iters) {
        solution.v = v;
        solution.objective = 0.5 * v.dot(h_sym * v) + qp.linear.dot(v);
        solution.status = status;
        solution.kkt = kkt_residuals(qp, v);
        solution.iterations = iters;
        return solution;
    };

    // equality-system consistency (rank check)
    const int p_all = static_cast<int>(qp.a_eq.rows());
    Eigen::MatrixXd a_eq_indep;
    Eigen::VectorXd b_eq_indep;
    if (p_all > 0) {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(qp.a_eq);
        const Eigen::VectorXd v0 = cod.solve(qp.b_eq);
        if ((qp.a_eq * v0 - qp.b_eq).cwiseAbs().maxCoeff() >
            1e-8 * (1.0 + qp.b_eq.cwiseAbs().maxCoeff())) {
            solution.v = Eigen::VectorXd::Zero(n);
            solution.status = QpStatus::Infeasible;
            return solution;
        }
        // keep an independent row subset for the active-set core
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(qp.a_eq.transpose());
        const int rank = static_cast<int>(qr.rank());
        a_eq_indep.resize(rank, n);
        b_eq_indep.resize(rank);
        for (int i = 0; i < rank; ++i) {
            const int row = static_cast<int>(qr.colsPermutation().indices()(i));
            a_eq_indep.row(i) = qp.a_eq.row(row);
            b_eq_indep(i) = qp.b_eq(row);
        }
    }

    const IneqSystem ineq = stack_inequalities(qp);
    const int mi = static_cast<int>(ineq.m.rows());
    const int p = static_cast<int>(a_eq_indep.rows());
    if (max_iter <= 0) max_iter = 10 * (n + mi + p) + 100;

    Eigen::LLT<Eigen::MatrixXd> llt(h_sym);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("cholesky factorization failed");

    const Eigen::MatrixXd ce = a_eq_indep.transpose();
    const Eigen::VectorXd ce0 = p > 0 ? Eigen::VectorXd(-b_eq_indep)
                                      : Eigen::VectorXd();
    const Eigen::MatrixXd ci = -ineq.m.transpose();
    const Eigen::VectorXd& ci0 = ineq.d;

    const GiResult gi = gi_solve(llt, qp.linear, ce, ce0, ci, ci0, max_iter);
    if (gi.code == GiResult::Ok) {
        finish(gi.x, QpStatus::Optimal, gi.iterations);
        if (solution.kkt.primal <= tol.primal &&
            solution.kkt.stationarity <= tol.stationarity &&
            solution.kkt.complementarity <= tol.complementarity)
            return solution;
    }

    // splitting fallback; divergence here is the infeasibility certificate
    Eigen::MatrixXd c_all(p_all + mi, n);
    Eigen::VectorXd l_all(p_all + mi), u_all(p_all + mi);
    if (p_all > 0) {
        c_all.topRows(p_all) = qp.a_eq;
        l_all.head(p_all) = qp.b_eq;
        u_all.head(p_all) = qp.b_eq;
    }
    if (mi > 0) {
        c_all.bottomRows(mi) = ineq.m;
        l_all.tail(mi).setConstant(-kInf);
        u_all.tail(mi) = ineq.d;
    }
    const AdmmResult admm = admm_solve(h_sym, qp.linear, c_all, l_all, u_all,
                                       100000);
    if (admm.diverged) {
        solution.v = Eigen::VectorXd::Zero(n);
        solution.status = QpStatus::Infeasible;
        solution.iterations = gi.iterations + admm.iterations;
        return solution;
    }
    finish(admm.v, QpStatus::Optimal, gi.iterations + admm.iterations);
    if (solution.kkt.primal <= tol.primal &&
        solution.kkt.stationarity <= tol.stationarity &&
        solution.kkt.complementarity <= tol.complementarity)
        return solution;

    if (gi.code == GiResult::Infeasible) {
        solution.status = QpStatus::Infeasible;
        return solution;
    }
    solution.status = QpStatus::MaxIterations;
    return solution;
}

} // namespace noir
