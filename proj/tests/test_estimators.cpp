#include "dmdp/estimators.hpp"
#include "dmdp/occupancy_opt.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace dmdp {
namespace {

FeedbackPacket single_step_packet(double cost) {
    EpisodeTrajectory traj{1, {0, 0}, {0}};
    return FeedbackPacket{1, {cost}, traj};
}

TEST(StandardEstimator, DirectArithmetic) {
    const Dims d{1, 2, 1};
    UpperOccupancyBound u(d, 0.5);
    const auto est = standard_estimator(single_step_packet(1.0), u, 0.1);
    EXPECT_NEAR(est.c_hat(0, 0, 0), 1.0 / 0.6, 1e-15);
    EXPECT_EQ(est.c_hat(0, 0, 1), 0.0);  // off-trajectory
    EXPECT_EQ(est.kind, EstimatorKind::standard);
}

TEST(DelayAdaptedEstimator, DirectArithmetic) {
    const Dims d{1, 2, 1};
    UpperOccupancyBound origin(d, 0.25), arrival(d, 0.5);
    const auto est = delay_adapted_estimator(single_step_packet(1.0), origin, arrival, 0.05);
    EXPECT_NEAR(est.c_hat(0, 0, 0), 1.0 / 0.55, 1e-15);
    EXPECT_EQ(est.c_hat(0, 0, 1), 0.0);
}

TEST(Estimators, RejectNonPositiveGamma) {
    const Dims d{1, 1, 1};
    UpperOccupancyBound u(d, 0.5);
    EXPECT_THROW(standard_estimator(single_step_packet(1.0), u, 0.0), InvalidInput);
    EXPECT_THROW(delay_adapted_estimator(single_step_packet(1.0), u, u, -1.0), InvalidInput);
}

TEST(Estimators, ZeroDelayIsBitIdentical) {
    const auto mdp = random_layered_mdp({3, 2, 3}, 1);
    Rng rng(2);
    const auto pi = random_policy(mdp.dims, rng);
    const auto u = comp_uob(pi, trivial_confidence_set(mdp.dims), 0);
    const auto costs = generate_costs(CostKind::iid, {}, mdp.dims, 200, 3);
    for (int k = 1; k <= 200; ++k) {
        const auto packet = make_packet(costs.at(k), play_episode(pi, mdp, rng, k));
        const auto a = standard_estimator(packet, u, 0.07);
        const auto b = delay_adapted_estimator(packet, u, u, 0.07);
        for (std::size_t i = 0; i < a.c_hat.values().size(); ++i)
            ASSERT_EQ(a.c_hat.values()[i], b.c_hat.values()[i]);
    }
}

TEST(Estimators, SparsityRangeAndDominance) {
    const auto mdp = random_layered_mdp({3, 3, 4}, 4);
    Rng rng(5);
    const auto costs = generate_costs(CostKind::iid, {}, mdp.dims, 500, 6);
    const double gamma = 0.05;
    for (int k = 1; k <= 500; ++k) {
        const auto pi = random_policy(mdp.dims, rng);
        const auto u_origin = comp_uob(pi, trivial_confidence_set(mdp.dims), 0);
        const auto u_arrival = comp_uob(random_policy(mdp.dims, rng), trivial_confidence_set(mdp.dims), 0);
        const auto packet = make_packet(costs.at(k), play_episode(pi, mdp, rng, k));
        const auto std_est = standard_estimator(packet, u_origin, gamma);
        const auto ada = delay_adapted_estimator(packet, u_origin, u_arrival, gamma);
        for (int h = 0; h < mdp.dims.H; ++h) {
            int nonzero = 0;
            for (int s = 0; s < mdp.dims.S; ++s)
                for (int a = 0; a < mdp.dims.A; ++a) {
                    const double x = ada.c_hat(h, s, a);
                    nonzero += x != 0.0;
                    EXPECT_GE(x, 0.0);
                    EXPECT_LE(x, 1.0 / gamma);
                    EXPECT_LE(x, std_est.c_hat(h, s, a));
                }
            EXPECT_LE(nonzero, 1);
        }
    }
}

TEST(Estimators, UnderestimateWhenBoundDominates) {
    // E[c_hat] = c q / (u + gamma) <= c whenever u >= q.
    const auto mdp = random_layered_mdp({2, 2, 2}, 7);
    Rng rng(8);
    const auto pi = random_policy(mdp.dims, rng);
    const auto q = state_action_occupancy(pi, mdp.p, 0);
    const auto u = comp_uob(pi, trivial_confidence_set(mdp.dims), 0);
    CostFunction c(mdp.dims);
    for (auto& x : c.values())
        x = rng.uniform();
    const double gamma = 0.01;
    const int n = 100000;
    StateActionTable<EstimateTag> sum(mdp.dims, 0.0), sum_sq(mdp.dims, 0.0);
    for (int i = 0; i < n; ++i) {
        const auto est = standard_estimator(make_packet(c, play_episode(pi, mdp, rng, 1)), u, gamma);
        for (std::size_t j = 0; j < sum.values().size(); ++j) {
            sum.values()[j] += est.c_hat.values()[j];
            sum_sq.values()[j] += est.c_hat.values()[j] * est.c_hat.values()[j];
        }
    }
    for (std::size_t j = 0; j < sum.values().size(); ++j) {
        const double mean = sum.values()[j] / n;
        const double var = std::max(sum_sq.values()[j] / n - mean * mean, 0.0);
        EXPECT_LE(mean, c.values()[j] + 3.0 * std::sqrt(var / n) + 1e-12);
        // The exact conditional mean, as a second check.
        const double exact = c.values()[j] * q.values()[j] / (u.values()[j] + gamma);
        EXPECT_LE(exact, c.values()[j]);
        EXPECT_NEAR(mean, exact, 4.0 * std::sqrt(var / n) + 1e-12);
    }
}

TEST(EstimatedPolicyLoss, ZeroSingleStateAndDotProduct) {
    const Dims d1{1, 3, 1};
    Rng rng(9);
    const auto pi1 = random_policy(d1, rng);
    EstimatedCostTable c1(d1, 0.0);
    EXPECT_EQ(estimated_policy_loss(pi1, TransitionTable(d1, 1.0), 0, c1), 0.0);
    c1(0, 0, 0) = 2.0;
    c1(0, 0, 2) = 5.0;
    EXPECT_NEAR(estimated_policy_loss(pi1, TransitionTable(d1, 1.0), 0, c1), 2.0 * pi1(0, 0, 0) + 5.0 * pi1(0, 0, 2),
                1e-14);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto mdp = random_layered_mdp({3, 2, 3}, seed);
        const auto pi = random_policy(mdp.dims, rng);
        EstimatedCostTable c(mdp.dims);
        for (auto& x : c.values())
            x = rng.uniform(0.0, 20.0);
        double oracle = 0.0;
        const auto q = state_action_occupancy(pi, mdp.p, 0);
        for (std::size_t i = 0; i < c.values().size(); ++i)
            oracle += q.values()[i] * c.values()[i];
        EXPECT_NEAR(estimated_policy_loss(pi, mdp.p, 0, c), oracle, 1e-12);
    }
}

}  // namespace
}  // namespace dmdp
