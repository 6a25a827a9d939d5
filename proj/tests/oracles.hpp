#pragma once

// Independent reference implementations used to cross-check the library:
// a step-by-step rollout, a summed rollout cost, a first-order QP solver,
// and a generator of random layered networks with valid dynamics tables.

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "noir/dynamics.hpp"
#include "noir/mpc.hpp"
#include "noir/network.hpp"
#include "noir/qp.hpp"

namespace oracles {

// Plain matrix recursion x[j+1] = A(zeta[k+j]) x[j] + B u[j], stacked over
// one cycle. Deliberately ignores the prediction matrices.
inline Eigen::VectorXd rollout(const std::vector<noir::PhaseMatrices>& mats,
                               const Eigen::MatrixXd& b,
                               const Eigen::VectorXd& x0,
                               const Eigen::VectorXd& u_stacked, long k) {
    const int nc = static_cast<int>(mats.size());
    const Eigen::Index n = x0.size();
    const Eigen::Index n_in = b.cols();
    Eigen::VectorXd stacked(n * nc);
    Eigen::VectorXd x = x0;
    for (int j = 0; j < nc; ++j) {
        const auto& a = mats[static_cast<std::size_t>((k + j) % nc)].A;
        x = a * x + b * u_stacked.segment(j * n_in, n_in);
        stacked.segment(static_cast<Eigen::Index>(j) * n, n) = x;
    }
    return stacked;
}

inline double rollout_cost(const std::vector<noir::PhaseMatrices>& mats,
                           const Eigen::MatrixXd& b, const Eigen::VectorXd& x0,
                           const Eigen::VectorXd& u_stacked, long k,
                           double beta) {
    const int nc = static_cast<int>(mats.size());
    const Eigen::Index n_in = b.cols();
    double cost = u_stacked.squaredNorm();
    Eigen::VectorXd x = x0;
    for (int j = 0; j < nc; ++j) {
        const auto& a = mats[static_cast<std::size_t>((k + j) % nc)].A;
        x = a * x + b * u_stacked.segment(j * n_in, n_in);
        cost += beta * x.squaredNorm();
    }
    return cost;
}

// Accelerated projected-gradient ascent on the dual of a strictly convex QP.
// Slow but simple; built independently of the main solver.
inline Eigen::VectorXd qp_first_order(const noir::QpInstance& qp,
                                      int max_iter = 400000,
                                      double tol = 1e-11) {
    const Eigen::Index n = qp.hessian.rows();
    const Eigen::MatrixXd h = 0.5 * (qp.hessian + qp.hessian.transpose());
    const Eigen::LLT<Eigen::MatrixXd> llt(h);

    // stack: equality rows first (free multipliers), then all inequality
    // rows including bounds (multipliers projected to >= 0)
    const Eigen::Index p = qp.a_eq.rows();
    Eigen::Index mi = qp.a_in.rows();
    if (qp.lower.size() > 0) mi += n;
    if (qp.upper.size() > 0) mi += n;
    Eigen::MatrixXd c(p + mi, n);
    Eigen::VectorXd d(p + mi);
    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < p; ++i, ++row) {
        c.row(row) = qp.a_eq.row(i);
        d(row) = qp.b_eq(i);
    }
    for (Eigen::Index i = 0; i < qp.a_in.rows(); ++i, ++row) {
        c.row(row) = qp.a_in.row(i);
        d(row) = qp.b_in(i);
    }
    if (qp.lower.size() > 0)
        for (Eigen::Index i = 0; i < n; ++i, ++row) {
            c.row(row).setZero();
            c(row, i) = -1.0;
            d(row) = -qp.lower(i);
        }
    if (qp.upper.size() > 0)
        for (Eigen::Index i = 0; i < n; ++i, ++row) {
            c.row(row).setZero();
            c(row, i) = 1.0;
            d(row) = qp.upper(i);
        }

    if (p + mi == 0) return llt.solve(-qp.linear);

    const Eigen::MatrixXd hinv_ct = llt.solve(c.transpose());
    const Eigen::MatrixXd s = c * hinv_ct;
    const double lip =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().maxCoeff();
    const double step = 1.0 / std::max(lip, 1e-12);

    auto primal = [&](const Eigen::VectorXd& mu) {
        return Eigen::VectorXd(-llt.solve(qp.linear) - hinv_ct * mu);
    };
    auto project = [&](Eigen::VectorXd mu) {
        for (Eigen::Index i = p; i < mu.size(); ++i)
            mu(i) = std::max(0.0, mu(i));
        return mu;
    };

    Eigen::VectorXd mu = Eigen::VectorXd::Zero(p + mi);
    Eigen::VectorXd mu_prev = mu;
    double t_acc = 1.0;
    Eigen::VectorXd v = primal(mu);
    for (int iter = 0; iter < max_iter; ++iter) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        const Eigen::VectorXd y =
            mu + ((t_acc - 1.0) / t_next) * (mu - mu_prev);
        const Eigen::VectorXd vy = primal(y);
        const Eigen::VectorXd mu_next = project(y + step * (c * vy - d));
        mu_prev = mu;
        mu = mu_next;
        t_acc = t_next;
        const Eigen::VectorXd v_next = primal(mu);
        if ((v_next - v).cwiseAbs().maxCoeff() < tol && iter > 50) {
            v = v_next;
            break;
        }
        v = v_next;
    }

    // active-set polish: resolve the equality-constrained problem on the
    // constraints the iterates converged onto
    for (double slack_tol : {1e-8, 1e-6, 1e-4}) {
        std::vector<Eigen::Index> active;
        for (Eigen::Index i = 0; i < p; ++i) active.push_back(i);
        for (Eigen::Index i = p; i < p + mi; ++i)
            if (d(i) - c.row(i).dot(v) < slack_tol * (1.0 + std::abs(d(i))))
                active.push_back(i);
        const Eigen::Index na = static_cast<Eigen::Index>(active.size());
        if (na == 0) return llt.solve(-qp.linear);

        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
        kkt.topLeftCorner(n, n) = h;
        Eigen::VectorXd rhs(n + na);
        rhs.head(n) = -qp.linear;
        for (Eigen::Index a = 0; a < na; ++a) {
            kkt.block(n + a, 0, 1, n) = c.row(active[a]);
            kkt.block(0, n + a, n, 1) = c.row(active[a]).transpose();
            rhs(n + a) = d(active[a]);
        }
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd vp = sol.head(n);

        bool ok = true;
        for (Eigen::Index i = p; i < p + mi; ++i)
            if (c.row(i).dot(vp) > d(i) + 1e-9) ok = false;
        for (Eigen::Index a = 0; a < na; ++a)
            if (active[a] >= p && sol(n + a) < -1e-8) ok = false;
        if (ok) return vp;
    }
    return v;
}

// Random layered network: nodes 1..n, every node except the last feeds one
// to three higher-numbered nodes, so the graph is acyclic and free of
// antiparallel pairs.
inline noir::RoadNetwork random_layered_network(int n, std::mt19937& rng) {
    std::vector<int> roads(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) roads[static_cast<std::size_t>(i)] = i + 1;
    std::set<std::pair<int, int>> edges;
    edges.insert({n - 1, n});
    std::uniform_int_distribution<int> fanout(1, 3);
    for (int i = 1; i < n; ++i) {
        const int deg = std::min(fanout(rng), n - i);
        std::uniform_int_distribution<int> target(i + 1, n);
        for (int t = 0; t < deg; ++t) edges.insert({i, target(rng)});
    }
    return noir::build_network(
        roads, std::vector<std::pair<int, int>>(edges.begin(), edges.end()));
}

// Valid per-phase tables for an arbitrary network: p uniform in (0.05, 1],
// splits random and normalized over out-neighbors.
inline noir::PhaseMatrices random_phase_matrices(const noir::RoadNetwork& net,
                                                 std::mt19937& rng) {
    std::uniform_real_distribution<double> p_dist(0.05, 1.0);
    std::uniform_real_distribution<double> q_dist(0.1, 1.0);
    std::vector<double> p(static_cast<std::size_t>(net.size()));
    for (auto& value : p) value = p_dist(rng);
    std::map<std::pair<int, int>, double> q;
    for (int id : net.roads) {
        const auto& outs = net.out_neighbors(id);
        if (outs.empty()) continue;
        double total = 0.0;
        std::vector<double> raw;
        for (std::size_t t = 0; t < outs.size(); ++t) {
            raw.push_back(q_dist(rng));
            total += raw.back();
        }
        for (std::size_t t = 0; t < outs.size(); ++t)
            q[{id, outs[t]}] = raw[t] / total;
    }
    return noir::build_phase_matrices(net, p, q);
}

// Random strictly convex QP with a known interior feasible point.
inline noir::QpInstance random_qp(int n, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.1, 1.0);

    noir::QpInstance qp;
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = gauss(rng);
    qp.hessian = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
    qp.linear.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) qp.linear(i) = 2.0 * gauss(rng);

    Eigen::VectorXd v_feas(n);
    for (Eigen::Index i = 0; i < n; ++i) v_feas(i) = gauss(rng);

    std::uniform_int_distribution<int> m_in_dist(0, std::min(40, 3 * n / 2));
    const int m_in = m_in_dist(rng);
    qp.a_in.resize(m_in, n);
    qp.b_in.resize(m_in);
    for (int r = 0; r < m_in; ++r) {
        for (Eigen::Index j = 0; j < n; ++j) qp.a_in(r, j) = gauss(rng);
        qp.b_in(r) = qp.a_in.row(r).dot(v_feas) + unit(rng);
    }

    if (std::uniform_int_distribution<int>(0, 2)(rng) == 0 && n >= 2) {
        const int p = std::uniform_int_distribution<int>(1, 2)(rng);
        qp.a_eq.resize(p, n);
        qp.b_eq.resize(p);
        for (int r = 0; r < p; ++r) {
            for (Eigen::Index j = 0; j < n; ++j) qp.a_eq(r, j) = gauss(rng);
            qp.b_eq(r) = qp.a_eq.row(r).dot(v_feas);
        }
    }
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
        qp.lower.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            qp.lower(i) = v_feas(i) - 2.0 * unit(rng);
    }
    if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) {
        qp.upper.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            qp.upper(i) = v_feas(i) + 2.0 * unit(rng);
    }
    return qp;
}

} // namespace oracles
