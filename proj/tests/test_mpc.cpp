#include <doctest.h>

#include <cstring>
#include <random>

#include "noir/mpc.hpp"
#include "oracles.hpp"

using namespace noir;

namespace {

struct ChainSetup {
    RoadNetwork net;
    PhaseSchedule schedule;
    std::vector<PhaseMatrices> mats;
    InputMatrix input;
};

// 1 -> 2, one junction; n_phases copies of the same serving phase when
// alternate == false, serve/idle alternation otherwise
ChainSetup chain_setup(int n_phases, bool alternate) {
    ChainSetup setup;
    setup.net = build_network({1, 2}, {{1, 2}});
    JunctionSpec j;
    j.id = 1;
    j.roads = {1, 2};
    for (int t = 0; t < n_phases; ++t) {
        MovementPhase phase;
        phase.junction_id = 1;
        if (!alternate || t % 2 == 0) phase.edge_subset = {{1, 2}};
        j.cycle.push_back(phase);
    }
    setup.schedule = build_phase_schedule(setup.net, {j});
    setup.mats = build_all_phase_matrices(setup.net, setup.schedule);
    setup.input = build_input_matrix(setup.net);
    return setup;
}

bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(),
                       sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace

TEST_CASE("single-step horizon collapses to (A, B)") {
    const ChainSetup setup = chain_setup(1, false);
    const HorizonPrediction pred =
        build_prediction(setup.schedule, setup.mats, setup.input, 0);
    CHECK(pred.horizon == 1);
    CHECK((pred.g1 - setup.mats[0].A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pred.g2 - setup.input.B).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two-phase horizon has the expected block structure") {
    const ChainSetup setup = chain_setup(2, true);
    const Eigen::MatrixXd a0 = setup.mats[0].A;
    const Eigen::MatrixXd a1 = setup.mats[1].A;
    const Eigen::MatrixXd b = setup.input.B;

    const HorizonPrediction pred =
        build_prediction(setup.schedule, setup.mats, setup.input, 0);
    CHECK((pred.g1.topRows(2) - a0).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((pred.g1.bottomRows(2) - a1 * a0).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((pred.g2.block(0, 0, 2, 1) - b).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(pred.g2.block(0, 1, 2, 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((pred.g2.block(2, 0, 2, 1) - a1 * b).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((pred.g2.block(2, 1, 2, 1) - b).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("prediction matches the explicit rollout") {
    std::mt19937 rng(17);
    const RoadNetwork net = oracles::random_layered_network(9, rng);
    std::vector<PhaseMatrices> mats;
    for (int t = 0; t < 4; ++t)
        mats.push_back(oracles::random_phase_matrices(net, rng));
    const InputMatrix input = build_input_matrix(net);

    PhaseSchedule schedule;
    schedule.cycle_length = 4;
    std::uniform_real_distribution<double> unif(0.0, 3.0);
    for (long k = 0; k < 8; ++k) {
        const HorizonPrediction pred =
            build_prediction(schedule, mats, input, k);
        for (int trial = 0; trial < 25; ++trial) {
            Eigen::VectorXd x(net.size()), u(pred.g2.cols());
            for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = unif(rng);
            for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = unif(rng);
            const Eigen::VectorXd direct = pred.g1 * x + pred.g2 * u;
            const Eigen::VectorXd reference =
                oracles::rollout(mats, input.B, x, u, k);
            CHECK((direct - reference).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("cost terms") {
    const ChainSetup setup = chain_setup(2, true);
    const HorizonPrediction pred =
        build_prediction(setup.schedule, setup.mats, setup.input, 0);
    TrafficState state{Eigen::VectorXd::Zero(2), 0};
    state.x << 3.0, 1.0;

    SUBCASE("zero weight leaves pure input effort") {
        const CostTerms cost = build_cost(pred, state, 0.0);
        CHECK((cost.w1 - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() ==
              0.0);
        CHECK(cost.w2.cwiseAbs().maxCoeff() == 0.0);
        CHECK(cost.w3 == 0.0);
    }
    SUBCASE("zero state kills the affine terms") {
        const CostTerms cost =
            build_cost(pred, TrafficState{Eigen::VectorXd::Zero(2), 0}, 2.0);
        CHECK(cost.w2.cwiseAbs().maxCoeff() == 0.0);
        CHECK(cost.w3 == 0.0);
    }
    SUBCASE("quadratic form reproduces the rollout cost") {
        // the rollout cost sums |u|^2 + beta |x|^2, which is twice
        // 1/2 U'W1U with the affine terms scaled to match
        std::mt19937 rng(23);
        std::uniform_real_distribution<double> unif(0.0, 2.0);
        const double beta = 0.7;
        const CostTerms cost = build_cost(pred, state, beta);
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd u(2);
            u << unif(rng), unif(rng);
            const double via_matrices =
                u.dot(cost.w1 * u) + 2.0 * cost.w2.dot(u) + 2.0 * cost.w3;
            const double via_rollout = oracles::rollout_cost(
                setup.mats, setup.input.B, state.x, u, 0, beta);
            CHECK(via_matrices ==
                  doctest::Approx(via_rollout).epsilon(1e-8));
        }
    }
    SUBCASE("smallest Hessian eigenvalue is at least one") {
        const CostTerms cost = build_cost(pred, state, 5.0);
        const double lambda_min =
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(cost.w1)
                .eigenvalues()
                .minCoeff();
        CHECK(lambda_min >= 1.0 - 1e-12);
    }
}

TEST_CASE("constraint assembly") {
    const ChainSetup setup = chain_setup(1, false);
    const HorizonPrediction pred =
        build_prediction(setup.schedule, setup.mats, setup.input, 0);
    const Eigen::VectorXd w4 = w4_diagonal(setup.schedule, setup.mats, 0);
    const FdParams fd;

    SUBCASE("current overflow is rejected up front") {
        TrafficState state{Eigen::VectorXd::Zero(2), 0};
        state.x << 56.0, 0.0;
        CHECK_THROWS_AS(build_constraints(pred, state, fd, 5.0, w4),
                        InfeasibleAtCurrentState);
    }
    SUBCASE("equality pins a single inlet") {
        const TrafficState state{Eigen::VectorXd::Zero(2), 0};
        const ConstraintSystem sys =
            build_constraints(pred, state, fd, 5.0, w4);
        CHECK(sys.a_eq.rows() == 1);
        CHECK(sys.b_eq(0) == 5.0);
        CHECK(sys.lower.size() == 1);
        // u = 5 satisfies the whole inequality system with rho = 5
        const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 5.0);
        CHECK(((sys.a_in * u - sys.b_in).array() <= 1e-12).all());
    }
    SUBCASE("state at the upper density bound stays well formed") {
        TrafficState state{Eigen::VectorXd::Zero(2), 0};
        state.x << 55.0, 0.0;
        const ConstraintSystem sys =
            build_constraints(pred, state, fd, 0.0, w4);
        CHECK(sys.a_in.rows() == 5 * pred.g2.rows());
        CHECK(sys.a_in.allFinite());
        CHECK(sys.b_in.allFinite());
        // the outflow rows bind the congested road's successor step
        CHECK(sys.b_in.minCoeff() < 0.0);
    }
}

TEST_CASE("controller behavior on small networks") {
    SUBCASE("single inlet is pinned to u0") {
        const ChainSetup setup = chain_setup(1, false);
        const Controller controller(setup.net, setup.schedule, setup.mats,
                                    FdParams{}, 5.0, 1.0);
        TrafficState state{Eigen::VectorXd::Zero(2), 0};
        state.x << 12.0, 30.0;
        const Eigen::VectorXd u = controller.solve_step(state);
        REQUIRE(u.size() == 1);
        CHECK(u(0) == doctest::Approx(5.0).epsilon(1e-9));
    }
    SUBCASE("u0 = 0 forces zero inflow") {
        const ChainSetup setup = chain_setup(1, false);
        const Controller controller(setup.net, setup.schedule, setup.mats,
                                    FdParams{}, 0.0, 1.0);
        const TrafficState state{Eigen::VectorXd::Zero(2), 0};
        const Eigen::VectorXd u = controller.solve_step(state);
        CHECK(u.cwiseAbs().maxCoeff() <= 1e-9);
    }
    SUBCASE("symmetric inlets split the demand equally") {
        // two identical chains 1 -> 3 and 2 -> 4 under one always-green plan
        const RoadNetwork net =
            build_network({1, 2, 3, 4}, {{1, 3}, {2, 4}});
        JunctionSpec j;
        j.id = 1;
        j.roads = {1, 2, 3, 4};
        j.cycle.push_back({1, {{1, 3}, {2, 4}}});
        const PhaseSchedule schedule = build_phase_schedule(net, {j});
        const auto mats = build_all_phase_matrices(net, schedule);
        const Controller controller(net, schedule, mats, FdParams{}, 10.0,
                                    1.0);
        TrafficState state{Eigen::VectorXd::Zero(4), 0};
        state.x << 7.0, 7.0, 2.0, 2.0;
        const Eigen::VectorXd u = controller.solve_step(state);
        REQUIRE(u.size() == 2);
        CHECK(u(0) == doctest::Approx(5.0).epsilon(1e-8));
        CHECK(u(1) == doctest::Approx(5.0).epsilon(1e-8));
    }
    SUBCASE("applied first step keeps the state admissible") {
        const ChainSetup setup = chain_setup(2, true);
        const Controller controller(setup.net, setup.schedule, setup.mats,
                                    FdParams{}, 6.0, 0.5);
        TrafficState state{Eigen::VectorXd::Zero(2), 0};
        state.x << 10.0, 5.0;
        for (long k = 0; k < 10; ++k) {
            state.k = k;
            const Eigen::VectorXd u = controller.solve_step(state);
            CHECK(u.minCoeff() >= 0.0);
            CHECK(u.sum() == doctest::Approx(6.0).epsilon(1e-8));
            state = step(state, setup.mats[static_cast<std::size_t>(k % 2)],
                         setup.input, u, FdParams{});
            CHECK(state.x.minCoeff() >= -1e-9);
            CHECK(state.x.maxCoeff() <= 55.0 + 1e-9);
        }
    }
    SUBCASE("no boundary roads is rejected") {
        // a pure cycle has neither inlets nor outlets
        const RoadNetwork net =
            build_network({1, 2, 3}, {{1, 2}, {2, 3}, {3, 1}});
        JunctionSpec j;
        j.id = 1;
        j.roads = {1, 2, 3};
        j.cycle.push_back({1, {{1, 2}}});
        const PhaseSchedule schedule = build_phase_schedule(net, {j});
        const auto mats = build_all_phase_matrices(net, schedule);
        CHECK_THROWS_AS(
            Controller(net, schedule, mats, FdParams{}, 1.0, 1.0),
            NoInletRoads);
    }
}

TEST_CASE("builders depend on time only through the cycle position") {
    const ChainSetup setup = chain_setup(2, true);
    const HorizonPrediction at0 =
        build_prediction(setup.schedule, setup.mats, setup.input, 0);
    const HorizonPrediction at2 =
        build_prediction(setup.schedule, setup.mats, setup.input, 2);
    CHECK(bitwise_equal(at0.g1, at2.g1));
    CHECK(bitwise_equal(at0.g2, at2.g2));
    CHECK(bitwise_equal(w4_diagonal(setup.schedule, setup.mats, 0),
                        w4_diagonal(setup.schedule, setup.mats, 2)));
}
