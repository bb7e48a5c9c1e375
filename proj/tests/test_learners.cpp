#include "dmdp/learners.hpp"
#include "dmdp/testing/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace dmdp {
namespace {

LearnerParams params(double eta, double gamma, int K) {
    LearnerParams p;
    p.eta = eta;
    p.gamma = gamma;
    p.K = K;
    return p;
}

EpisodeTrajectory single_step(int episode, int action) { return EpisodeTrajectory{episode, {0, 0}, {action}}; }

TEST(LearnerKind, NamesRoundTrip) {
    for (auto k : {LearnerKind::hedge, LearnerKind::uob_ftrl, LearnerKind::uob_reps, LearnerKind::oreps_known})
        EXPECT_EQ(learner_kind_from_string(to_string(k)), k);
    EXPECT_THROW(learner_kind_from_string("po"), InvalidInput);
}

TEST(LearnerParams, Validation) {
    EXPECT_THROW(params(0.1, 0.0, 10).validate(), InvalidInput);
    EXPECT_THROW(params(0.0, 0.1, 10).validate(), InvalidInput);
    auto p = params(0.1, 0.1, 10);
    p.delta = 1.0;
    EXPECT_THROW(p.validate(), InvalidInput);
}

TEST(EnumerateDeterministicPolicies, CountAndCap) {
    EXPECT_EQ(enumerate_deterministic_policies({2, 2, 2}, 4096).size(), 16u);
    EXPECT_THROW(enumerate_deterministic_policies({3, 3, 3}, 4096), StructuralError);
}

TEST(HedgeLearner, TwoPolicyUpdate) {
    // S=1, A=2, H=1: two deterministic policies and a zero bonus. With both
    // weights at 0.5 the mixture bound of action 0 is 0.5, so a unit cost and
    // gamma = 0.5 give estimated losses (1, 0).
    const Dims d{1, 2, 1};
    HedgeLearner learner(d, 0, params(0.5, 0.5, 10));
    Rng rng(1);
    learner.begin_episode(1, rng);
    const auto traj = single_step(1, 0);
    const FeedbackPacket packet{1, {1.0}, traj};
    learner.end_episode(1, traj, std::span<const FeedbackPacket>(&packet, 1));
    ASSERT_EQ(learner.policies().size(), 2u);
    EXPECT_EQ(learner.last_bonus(), (std::vector<double>{0.0, 0.0}));
    const double e = std::exp(-0.5);
    EXPECT_NEAR(learner.weights()[0], e / (1 + e), 1e-12);
    EXPECT_NEAR(learner.weights()[0], 0.3775, 1e-4);
    EXPECT_NEAR(learner.weights()[1], 0.6225, 1e-4);
}

TEST(HedgeLearner, NoArrivalsAndNoBonusKeepsWeights) {
    const Dims d{1, 3, 1};
    HedgeLearner learner(d, 0, params(0.5, 0.1, 10));
    Rng rng(2);
    for (int k = 1; k <= 5; ++k) {
        learner.begin_episode(k, rng);
        learner.end_episode(k, single_step(k, 1), {});
        for (double w : learner.weights())
            EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
    }
}

TEST(HedgeLearner, MatchesDelayedExp3OracleOnBandit) {
    const Dims d{1, 3, 1};
    const int K = 200;
    const auto delays = generate_delays(DelayKind::uniform_random, {.max = 6}, K, 3);
    const auto costs = generate_costs(CostKind::iid, {}, d, K, 4);
    HedgeLearner learner(d, 0, params(0.2, 0.3, K));
    testing::DelayedExp3Oracle oracle(3, 0.2, 0.3, false);
    FeedbackQueue queue;
    Rng rng(5);
    const auto mdp = make_mdp(TransitionTable(d, 1.0), 0);
    for (int k = 1; k <= K; ++k) {
        const auto& pi = learner.begin_episode(k, rng);
        const auto traj = play_episode(pi, mdp, rng, k);
        queue.enqueue(make_packet(costs.at(k), traj), delays.delay(k));
        const auto arrivals = queue.arrivals_at(k);
        learner.end_episode(k, traj, arrivals);
        std::vector<testing::DelayedExp3Oracle::Arrival> oracle_arrivals;
        for (const auto& p : arrivals)
            oracle_arrivals.push_back({p.origin, p.trajectory.actions[0], p.costs[0]});
        oracle.step(k, oracle_arrivals);
        for (int a = 0; a < 3; ++a)
            ASSERT_NEAR(learner.weights()[std::size_t(a)], oracle.weights()[std::size_t(a)], 1e-9) << "k=" << k;
    }
}

TEST(ExplorationBonus, SingletonZeroCapAndDominance) {
    const auto mdp = random_layered_mdp({3, 2, 3}, 6);
    Rng rng(7);
    const auto pi = random_policy(mdp.dims, rng);
    EXPECT_EQ(exploration_bonus(pi, mdp.p, singleton_confidence_set(mdp.p), 0), 0.0);
    EXPECT_LE(exploration_bonus(pi, TransitionTable(mdp.dims, 0.0), trivial_confidence_set(mdp.dims), 0),
              2.0 * mdp.dims.H);

    VisitCounters c(mdp.dims);
    for (int k = 1; k <= 300; ++k)
        c.update(play_episode(uniform_policy(mdp.dims), mdp, rng, k), CounterKind::immediate);
    const auto set = build_confidence_set(c, CounterKind::immediate, 0.5, 1, 1);
    const double b = exploration_bonus(pi, set.center, set, 0);
    const auto q_bar = state_action_occupancy(pi, set.center, 0);
    for (int i = 0; i < 1000; ++i) {
        const auto q = state_action_occupancy(pi, sample_member(set, rng), 0);
        double l1 = 0.0;
        for (std::size_t j = 0; j < q.values().size(); ++j)
            l1 += std::abs(q.values()[j] - q_bar.values()[j]);
        ASSERT_LE(l1, b + 1e-12);
    }
}

TEST(FtrlLearner, FirstUpdateIsOneMirrorStepFromUniform) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 8);
    FtrlLearner learner(mdp.dims, 0, params(0.5, 0.1, 10));
    Rng rng(9);
    const auto& pi = learner.begin_episode(1, rng);
    const auto traj = play_episode(pi, mdp, rng, 1);
    const auto packet = make_packet(CostFunction(mdp.dims, 0.8), traj);
    learner.end_episode(1, traj, std::span<const FeedbackPacket>(&packet, 1));
    const auto step = solve_omd_unknown(uniform_occupancy(mdp.dims, 0), learner.decision_set(), 0,
                                        learner.cumulative_loss(), 0.5, {});
    for (std::size_t i = 0; i < step.q.values().size(); ++i)
        EXPECT_NEAR(learner.q().values()[i], step.q.values()[i], 1e-7);
}

TEST(FtrlLearner, DecisionSetsShrinkAndIteratesAreFeasible) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 10);
    FtrlLearner learner(mdp.dims, 0, params(0.5, 0.1, 50));
    Rng rng(11);
    FeedbackQueue queue;
    const auto costs = generate_costs(CostKind::iid, {}, mdp.dims, 50, 12);
    for (int k = 1; k <= 50; ++k) {
        const auto& pi = learner.begin_episode(k, rng);
        const auto traj = play_episode(pi, mdp, rng, k);
        queue.enqueue(make_packet(costs.at(k), traj), 3);
        const auto arrivals = queue.arrivals_at(k);
        learner.end_episode(k, traj, arrivals);
        const auto& now = learner.decision_set();
        const auto& before = learner.previous_decision_set();
        for (int h = 0; h < 2; ++h)
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a)
                    for (int s2 = 0; s2 < 2; ++s2) {
                        EXPECT_GE(now.lower(h, s, a, s2), before.lower(h, s, a, s2) - 1e-15);
                        EXPECT_LE(now.upper(h, s, a, s2), before.upper(h, s, a, s2) + 1e-15);
                    }
        EXPECT_LE(learner.kkt().worst(), 1e-6);
    }
}

TEST(RepsLearner, NoArrivalsKeepsIterate) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 13);
    RepsLearner learner(mdp.dims, 0, params(0.5, 0.1, 10));
    Rng rng(14);
    const auto before = learner.q();
    for (int k = 1; k <= 3; ++k) {
        const auto& pi = learner.begin_episode(k, rng);
        learner.end_episode(k, play_episode(pi, mdp, rng, k), {});
        for (std::size_t i = 0; i < before.values().size(); ++i)
            EXPECT_EQ(learner.q().values()[i], before.values()[i]);
    }
}

TEST(RepsLearner, RejectsFutureOrigins) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 15);
    RepsLearner learner(mdp.dims, 0, params(0.5, 0.1, 10));
    Rng rng(16);
    const auto& pi = learner.begin_episode(1, rng);
    auto traj = play_episode(pi, mdp, rng, 7);
    const auto packet = make_packet(CostFunction(mdp.dims, 0.5), traj);
    EXPECT_THROW(learner.end_episode(1, traj, std::span<const FeedbackPacket>(&packet, 1)), ProtocolViolation);
}

TEST(Learner, EnforcesEpisodeOrder) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 17);
    for (auto kind : {LearnerKind::hedge, LearnerKind::uob_ftrl, LearnerKind::uob_reps, LearnerKind::oreps_known}) {
        auto learner = make_learner(kind, mdp, params(0.5, 0.1, 10));
        Rng rng(18);
        const EpisodeTrajectory traj{1, {0, 0, 0}, {0, 0}};
        EXPECT_THROW(learner->end_episode(1, traj, {}), ProtocolViolation);
        learner->begin_episode(1, rng);
        EXPECT_THROW(learner->begin_episode(2, rng), ProtocolViolation);
    }
}

TEST(OrepsKnownLearner, StartsAtUniformPolicyOccupancy) {
    const auto mdp = random_layered_mdp({3, 2, 3}, 19);
    OrepsKnownLearner learner(mdp, params(0.5, 0.1, 10));
    const auto q = state_action_occupancy(uniform_policy(mdp.dims), mdp.p, 0);
    for (std::size_t i = 0; i < q.values().size(); ++i)
        EXPECT_EQ(learner.q().values()[i], q.values()[i]);
}

TEST(OrepsKnownLearner, BatchedArrivalsAreOneStep) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 20);
    OrepsKnownLearner learner(mdp, params(0.4, 0.1, 10));
    Rng rng(21);
    std::vector<FeedbackPacket> held;
    for (int k = 1; k <= 3; ++k) {
        const auto& pi = learner.begin_episode(k, rng);
        const auto traj = play_episode(pi, mdp, rng, k);
        held.push_back(make_packet(CostFunction(mdp.dims, 0.6), traj));
        if (k < 3) {
            learner.end_episode(k, traj, {});
        } else {
            const auto q_before = learner.q();
            learner.end_episode(k, traj, held);
            const auto step = solve_oreps_known(q_before, mdp.p, 0, learner.last_batch(), 0.4, {});
            for (std::size_t i = 0; i < step.q.values().size(); ++i)
                EXPECT_NEAR(learner.q().values()[i], step.q.values()[i], 1e-12);
            EXPECT_EQ(learner.last_estimates().size(), 3u);
        }
    }
}

}  // namespace
}  // namespace dmdp
