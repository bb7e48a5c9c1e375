#include "dmdp/occupancy_opt.hpp"
#include "dmdp/testing/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace dmdp {
namespace {

ConfidenceSet observed_set(const MdpSpec& mdp, int episodes, std::uint64_t seed, double delta = 0.5) {
    VisitCounters c(mdp.dims);
    Rng rng(seed);
    for (int k = 1; k <= episodes; ++k)
        c.update(play_episode(uniform_policy(mdp.dims), mdp, rng, k), CounterKind::immediate);
    return build_confidence_set(c, CounterKind::immediate, delta, 1, 1);
}

EstimatedCostTable random_loss(Dims d, Rng& rng, double scale) {
    EstimatedCostTable loss(d);
    for (auto& x : loss.values())
        x = rng.uniform(0.0, scale);
    return loss;
}

// Per-layer exponential weights over actions for single-state problems.
std::vector<double> exp_weights(std::span<const double> prior, std::span<const double> loss, double eta) {
    std::vector<double> w(prior.size());
    double total = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        w[a] = prior[a] * std::exp(-eta * loss[a]);
        total += w[a];
    }
    for (auto& x : w)
        x /= total;
    return w;
}

// ---------------------------------------------------------------------------
// Upper occupancy bounds

TEST(CompUob, SingletonSetGivesExactOccupancy) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto mdp = random_layered_mdp({3, 2, 3}, seed);
        Rng rng(seed);
        const auto pi = random_policy(mdp.dims, rng);
        const auto u = comp_uob(pi, singleton_confidence_set(mdp.p), mdp.s_init);
        const auto q = state_action_occupancy(pi, mdp.p, mdp.s_init);
        for (std::size_t i = 0; i < q.values().size(); ++i)
            EXPECT_NEAR(u.values()[i], q.values()[i], 1e-12);
    }
}

TEST(CompUob, DominatesSampledMembers) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto mdp = random_layered_mdp({3, 2, 3}, 100 + seed);
        const auto set = observed_set(mdp, 50 + 100 * int(seed), seed);
        Rng rng(seed);
        const auto pi = random_policy(mdp.dims, rng);
        const auto u = comp_uob(pi, set, mdp.s_init);
        for (int i = 0; i < 1000; ++i) {
            const auto q = state_action_occupancy(pi, sample_member(set, rng), mdp.s_init);
            for (std::size_t c = 0; c < q.values().size(); ++c)
                ASSERT_LE(q.values()[c], u.values()[c] + 1e-9);
        }
    }
}

TEST(CompUob, MatchesGridMaximum) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 3);
    const auto set = observed_set(mdp, 500, 4, 0.9);
    Rng rng(5);
    const auto pi = random_policy(mdp.dims, rng);
    const auto u = comp_uob(pi, set, mdp.s_init);
    const auto grid = testing::layer1_grid_max(pi, set, mdp.s_init, 201);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            EXPECT_NEAR(u(1, s, a), grid(1, s, a), 1e-3);
            EXPECT_NEAR(u(0, s, a), grid(0, s, a), 1e-12);
        }
}

TEST(CompUob, TrivialSetReachesEveryStateWithCertainty) {
    const Dims d{3, 2, 3};
    Rng rng(1);
    const auto pi = random_policy(d, rng);
    const auto u = comp_uob(pi, trivial_confidence_set(d), 0);
    for (int h = 1; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a)
                EXPECT_NEAR(u(h, s, a), pi(h, s, a), 1e-12);
}

TEST(MixtureUob, PointMassAndSingleton) {
    const auto mdp = random_layered_mdp({2, 2, 3}, 6);
    const auto set = observed_set(mdp, 200, 7);
    Rng rng(8);
    const std::vector<Policy> pis{random_policy(mdp.dims, rng), random_policy(mdp.dims, rng)};
    std::vector<UpperOccupancyBound> uobs{comp_uob(pis[0], set, 0), comp_uob(pis[1], set, 0)};
    const std::vector<double> point{0.0, 1.0};
    const auto m = mixture_uob(point, uobs);
    for (std::size_t i = 0; i < m.values().size(); ++i)
        EXPECT_EQ(m.values()[i], uobs[1].values()[i]);

    const auto single = singleton_confidence_set(mdp.p);
    std::vector<UpperOccupancyBound> exact{comp_uob(pis[0], single, 0), comp_uob(pis[1], single, 0)};
    const std::vector<double> w{0.3, 0.7};
    const auto mix = mixture_uob(w, exact);
    const auto q0 = state_action_occupancy(pis[0], mdp.p, 0);
    const auto q1 = state_action_occupancy(pis[1], mdp.p, 0);
    for (std::size_t i = 0; i < mix.values().size(); ++i)
        EXPECT_NEAR(mix.values()[i], 0.3 * q0.values()[i] + 0.7 * q1.values()[i], 1e-12);
}

TEST(MixtureUob, DominatesCoupledGridMaximum) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 9);
    const auto set = observed_set(mdp, 300, 10, 0.9);
    Rng rng(11);
    const std::vector<Policy> pis{random_policy(mdp.dims, rng), random_policy(mdp.dims, rng)};
    const std::vector<double> w{0.4, 0.6};
    std::vector<UpperOccupancyBound> uobs{comp_uob(pis[0], set, 0), comp_uob(pis[1], set, 0)};
    const auto u = mixture_uob(w, uobs);
    // Coupled max: both policies see the same layer-0 transition row.
    auto interval = [&](int a) {
        return std::pair{std::max(set.lower(0, 0, a, 0), 1.0 - set.upper(0, 0, a, 1)),
                         std::min(set.upper(0, 0, a, 0), 1.0 - set.lower(0, 0, a, 1))};
    };
    const auto [lo0, hi0] = interval(0);
    const auto [lo1, hi1] = interval(1);
    const int n = 101;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x[2] = {lo0 + (hi0 - lo0) * i / (n - 1.0), lo1 + (hi1 - lo1) * j / (n - 1.0)};
            for (int s = 0; s < 2; ++s)
                for (int a = 0; a < 2; ++a) {
                    double value = 0.0;
                    for (int p = 0; p < 2; ++p) {
                        const double to0 = pis[std::size_t(p)](0, 0, 0) * x[0] + pis[std::size_t(p)](0, 0, 1) * x[1];
                        const double reach = s == 0 ? to0 : 1.0 - to0;
                        value += w[std::size_t(p)] * reach * pis[std::size_t(p)](1, s, a);
                    }
                    EXPECT_LE(value, u(1, s, a) + 1e-9);
                }
        }
}

// ---------------------------------------------------------------------------
// Known-transition solver

TEST(SolveOrepsKnown, ZeroLossIsIdentity) {
    const auto mdp = random_layered_mdp({3, 2, 3}, 1);
    Rng rng(2);
    const auto q_prev = state_action_occupancy(random_policy(mdp.dims, rng), mdp.p, 0);
    const auto sol = solve_oreps_known(q_prev, mdp.p, 0, EstimatedCostTable(mdp.dims, 0.0), 0.5, {});
    for (std::size_t i = 0; i < q_prev.values().size(); ++i)
        EXPECT_EQ(sol.q.values()[i], q_prev.values()[i]);
    for (double v : sol.duals.v)
        EXPECT_EQ(v, 0.0);
}

TEST(SolveOrepsKnown, SingleStateIsExponentialWeights) {
    const Dims d{1, 4, 3};
    const auto mdp = make_mdp(TransitionTable(d, 1.0), 0);
    Rng rng(3);
    const auto q_prev = state_action_occupancy(random_policy(d, rng), mdp.p, 0);
    const auto loss = random_loss(d, rng, 5.0);
    const auto sol = solve_oreps_known(q_prev, mdp.p, 0, loss, 0.7, {});
    for (int h = 0; h < d.H; ++h) {
        const auto w = exp_weights(q_prev.row(h, 0), loss.row(h, 0), 0.7);
        for (int a = 0; a < d.A; ++a)
            EXPECT_NEAR(sol.q(h, 0, a), w[std::size_t(a)], 1e-12);
    }
}

TEST(SolveOrepsKnown, BeatsRandomFeasiblePoints) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto mdp = random_layered_mdp({3, 3, 3}, seed, 0.7);
        Rng rng(seed);
        const auto q_prev = state_action_occupancy(random_policy(mdp.dims, rng), mdp.p, 0);
        const auto loss = random_loss(mdp.dims, rng, 4.0);
        const auto sol = solve_oreps_known(q_prev, mdp.p, 0, loss, 0.9, {});
        EXPECT_LE(known_flow_residual(sol.q, mdp.p, 0), 1e-12);
        const double best = omd_objective(sol.q, q_prev, loss, 0.9);
        for (int i = 0; i < 100; ++i) {
            const auto q = state_action_occupancy(random_policy(mdp.dims, rng, 0.5), mdp.p, 0);
            EXPECT_LE(best, omd_objective(q, q_prev, loss, 0.9));
        }
    }
}

TEST(SolveOrepsKnown, RejectsBadInputs) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 1);
    const auto q = state_action_occupancy(uniform_policy(mdp.dims), mdp.p, 0);
    EXPECT_THROW(solve_oreps_known(q, mdp.p, 0, EstimatedCostTable(mdp.dims, 0.0), 0.0, {}), InvalidInput);
    EXPECT_THROW(solve_oreps_known(q, mdp.p, 0, EstimatedCostTable(mdp.dims, -1.0), 1.0, {}), InvalidInput);
    SolverConfig cfg;
    cfg.max_iterations = 1;
    cfg.grad_tol = 1e-15;
    // A constant loss keeps the flow residual at zero, so vary it across cells.
    EstimatedCostTable loss(mdp.dims);
    for (std::size_t i = 0; i < loss.values().size(); ++i)
        loss.values()[i] = double(i % 3);
    EXPECT_THROW(solve_oreps_known(q, mdp.p, 0, loss, 1.0, cfg), SolverError);
}

// ---------------------------------------------------------------------------
// Unknown-transition solver

TEST(SolveOmdUnknown, ZeroLossIsIdentity) {
    const auto mdp = random_layered_mdp({3, 2, 3}, 2);
    const auto set = observed_set(mdp, 100, 3);
    Rng rng(4);
    const auto q_prev = occupancy_from(random_policy(mdp.dims, rng), sample_member(set, rng), 0);
    const auto sol = solve_omd_unknown(q_prev, set, 0, EstimatedCostTable(mdp.dims, 0.0), 0.5, {});
    for (std::size_t i = 0; i < q_prev.values().size(); ++i)
        EXPECT_EQ(sol.q.values()[i], q_prev.values()[i]);
    for (double x : sol.duals.mu_plus)
        EXPECT_EQ(x, 0.0);
    for (double x : sol.duals.mu_minus)
        EXPECT_EQ(x, 0.0);
    for (double x : sol.duals.beta)
        EXPECT_EQ(x, 0.0);
}

TEST(SolveOmdUnknown, TrivialSetSingleStateIsExponentialWeights) {
    const Dims d{1, 3, 2};
    Rng rng(5);
    const auto q_prev = occupancy_from(random_policy(d, rng), TransitionTable(d, 1.0), 0);
    const auto loss = random_loss(d, rng, 3.0);
    const auto sol = solve_omd_unknown(q_prev, trivial_confidence_set(d), 0, loss, 0.8, {});
    const auto m = marginal(q_prev);
    for (int h = 0; h < d.H; ++h) {
        const auto w = exp_weights(m.row(h, 0), loss.row(h, 0), 0.8);
        for (int a = 0; a < d.A; ++a)
            EXPECT_NEAR(sol.q(h, 0, a, 0), w[std::size_t(a)], 1e-8);
    }
}

TEST(SolveOmdUnknown, SingletonSetMatchesKnownSolver) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto mdp = random_layered_mdp({2, 2, 3}, 50 + seed);
        Rng rng(seed);
        const auto pi = random_policy(mdp.dims, rng);
        const auto loss = random_loss(mdp.dims, rng, 2.0);
        const auto known = solve_oreps_known(state_action_occupancy(pi, mdp.p, 0), mdp.p, 0, loss, 0.6, {});
        const auto unknown =
            solve_omd_unknown(occupancy_from(pi, mdp.p, 0), singleton_confidence_set(mdp.p), 0, loss, 0.6, {});
        const auto m = marginal(unknown.q);
        for (std::size_t i = 0; i < m.values().size(); ++i)
            EXPECT_NEAR(m.values()[i], known.q.values()[i], 1e-6);
    }
}

TEST(SolveOmdUnknown, FeasibleAndBeatsSampledPoints) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto mdp = random_layered_mdp({3, 2, 3}, 70 + seed);
        const auto set = observed_set(mdp, 20 + 30 * int(seed), seed);
        Rng rng(seed);
        const auto q_prev = occupancy_from(random_policy(mdp.dims, rng), sample_member(set, rng), 0);
        const auto loss = random_loss(mdp.dims, rng, 5.0);
        const auto sol = solve_omd_unknown(q_prev, set, 0, loss, 0.5, {});
        EXPECT_TRUE(validate_occupancy(sol.q, 0, 1e-6).empty());
        EXPECT_LE(occupancy_confidence_violation(sol.q, set), 1e-6);
        EXPECT_LE(sol.kkt.worst(), 1e-6);
        const double best = omd_objective(sol.q, q_prev, loss, 0.5);
        for (int i = 0; i < 100; ++i) {
            const auto q = occupancy_from(random_policy(mdp.dims, rng, 0.5), sample_member(set, rng), 0);
            EXPECT_LE(best, omd_objective(q, q_prev, loss, 0.5));
        }
    }
}

TEST(UniformOccupancy, IsValid) {
    const Dims d{3, 2, 4};
    const auto q = uniform_occupancy(d, 1);
    EXPECT_TRUE(validate_occupancy(q, 1, 1e-12).empty());
    EXPECT_NEAR(q(0, 1, 0, 2), 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(q(2, 0, 1, 1), 1.0 / 18.0, 1e-15);
}

// ---------------------------------------------------------------------------
// FTRL

TEST(SolveFtrl, ZeroLossSingleStateIsUniform) {
    const Dims d{1, 4, 2};
    const auto sol = solve_ftrl(EstimatedCostTable(d, 0.0), trivial_confidence_set(d), 0, 0.3, {});
    for (double x : sol.q.values())
        EXPECT_NEAR(x, 0.25, 1e-12);
}

TEST(SolveFtrl, SingleStateMatchesSimplexClosedForm) {
    const Dims d{1, 3, 3};
    Rng rng(12);
    const auto L = random_loss(d, rng, 10.0);
    const auto sol = solve_ftrl(L, trivial_confidence_set(d), 0, 0.4, {});
    const std::vector<double> flat(3, 1.0 / 3.0);
    for (int h = 0; h < d.H; ++h) {
        const auto w = exp_weights(flat, L.row(h, 0), 0.4);
        for (int a = 0; a < d.A; ++a)
            EXPECT_NEAR(sol.q(h, 0, a, 0), w[std::size_t(a)], 1e-8);
    }
}

TEST(SolveFtrl, PenaltyNestingOverShrinkingSets) {
    // min over P_k of F(L_k + c) <= min over P_{k+1} of F(L_{k+1}) when P_{k+1} is inside P_k.
    const auto mdp = random_layered_mdp({2, 2, 2}, 13);
    VisitCounters c(mdp.dims);
    Rng rng(14);
    ConfidenceSet set = initial_confidence_set(mdp.dims, CounterKind::immediate, 0.5, 1);
    EstimatedCostTable L(mdp.dims, 0.0);
    for (int k = 1; k <= 30; ++k) {
        for (int i = 0; i < 5; ++i)
            c.update(play_episode(uniform_policy(mdp.dims), mdp, rng, k), CounterKind::immediate);
        const auto next_set = intersect(set, build_confidence_set(c, CounterKind::immediate, 0.5, 1, k + 1));
        const auto cost = random_loss(mdp.dims, rng, 2.0);
        for (std::size_t i = 0; i < L.values().size(); ++i)
            L.values()[i] += cost.values()[i];
        const double cheating = solve_ftrl(L, set, 0, 0.5, {}).objective;
        const double next = solve_ftrl(L, next_set, 0, 0.5, {}).objective;
        EXPECT_LE(cheating, next + 1e-7) << "episode " << k;
        set = next_set;
    }
}

// ---------------------------------------------------------------------------
// Stability

TEST(KlStability, ZeroBatch) {
    const auto mdp = random_layered_mdp({2, 2, 2}, 1);
    const auto q = state_action_occupancy(uniform_policy(mdp.dims), mdp.p, 0);
    const auto [lhs, rhs] = kl_stability_check(q, q, EstimatedCostTable(mdp.dims, 0.0), 0.5);
    EXPECT_EQ(lhs, 0.0);
    EXPECT_EQ(rhs, 0.0);
}

TEST(KlStability, SingleStateClosedForm) {
    const Dims d{1, 2, 1};
    const auto p = TransitionTable(d, 1.0);
    StateActionOccupancy q(d, 0.5);
    EstimatedCostTable c(d, 0.0);
    c(0, 0, 0) = 1.0;
    const double eta = 0.5;
    const auto next = solve_oreps_known(q, p, 0, c, eta, {}).q;
    const double e = std::exp(-eta);
    const double q0 = e / (1 + e), q1 = 1 / (1 + e);
    EXPECT_NEAR(next(0, 0, 0), q0, 1e-12);
    const auto [lhs, rhs] = kl_stability_check(q, next, c, eta);
    const double expected_lhs = 0.5 * std::log(0.5 / q0) + 0.5 * std::log(0.5 / q1);
    EXPECT_NEAR(lhs, expected_lhs, 1e-12);
    EXPECT_NEAR(rhs, 0.5 * eta * eta * 0.5, 1e-15);
    EXPECT_LT(lhs, rhs);
}

TEST(KlStability, HoldsOnRandomUpdates) {
    Rng rng(15);
    for (int i = 0; i < 1000; ++i) {
        const auto mdp = random_layered_mdp({2, 2, 2}, std::uint64_t(i));
        const auto q = state_action_occupancy(random_policy(mdp.dims, rng), mdp.p, 0);
        // One-hot-per-layer batch, as produced by a single trajectory.
        EstimatedCostTable c(mdp.dims, 0.0);
        for (int h = 0; h < 2; ++h)
            c(h, int(rng.uniform_int(2)), int(rng.uniform_int(2))) = rng.uniform(0.0, 10.0);
        const double eta = rng.uniform(0.01, 0.5);
        SolverConfig cfg;
        cfg.grad_tol = 1e-12;
        const auto next = solve_oreps_known(q, mdp.p, 0, c, eta, cfg).q;
        const auto [lhs, rhs] = kl_stability_check(q, next, c, eta);
        EXPECT_LE(lhs, rhs + 1e-9);
    }
}

}  // namespace
}  // namespace dmdp
