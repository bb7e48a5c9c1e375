#pragma once

// The acceptance criteria as executable checks. Shared by the `check`
// subcommand and the acceptance test binary.

#include "dmdp/adversary.hpp"
#include "dmdp/bench.hpp"
#include "dmdp/confidence.hpp"
#include "dmdp/config.hpp"
#include "dmdp/estimators.hpp"
#include "dmdp/learners.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/occupancy_opt.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/testing/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace dmdp::acceptance {

struct CriterionResult {
    int id = 0;
    std::string suite;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

inline CriterionResult start(int id, const char* suite, const char* title) {
    CriterionResult r;
    r.id = id;
    r.suite = suite;
    r.title = title;
    return r;
}

inline ExperimentConfig base_config(LearnerKind kind, Dims dims, int K) {
    ExperimentConfig cfg;
    cfg.name = to_string(kind);
    cfg.K = K;
    cfg.seeds = {1};
    cfg.cost_mode = CostMode::exact;
    cfg.mdp.dims = dims;
    cfg.mdp.seed = 7;
    cfg.cost.kind = CostKind::iid;
    cfg.cost.seed = 11;
    cfg.delay.kind = DelayKind::constant;
    cfg.delay.params.value = 0;
    cfg.delay.seed = 13;
    cfg.learner.kind = kind;
    return cfg;
}

/// Worst flow / normalization / negativity residual of an occupancy measure.
inline double polytope_residual(const OccupancyMeasure& q, int s_init) {
    double worst = 0.0;
    for (const auto& v : validate_occupancy(q, s_init, 0.0))
        worst = std::max(worst, v.magnitude);
    return worst;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// 1. Zero-delay estimator reduction

inline CriterionResult check_estimator_reduction() {
    auto r = detail::start(1, "estimator-reduction", "zero-delay estimator reduction (uob-reps, K=2000, d=0)");
    auto run = [](EstimatorKind kind, std::vector<EstimatedCostTable>& estimates, std::vector<Policy>& policies) {
        auto cfg = detail::base_config(LearnerKind::uob_reps, Dims{3, 2, 3}, 2000);
        cfg.learner.estimator = kind;
        run_experiment(cfg, 1, [&](const EpisodeContext& ctx, const Learner& l) {
            const auto& reps = static_cast<const RepsLearner&>(l);
            for (const auto& e : reps.last_estimates())
                estimates.push_back(e.c_hat);
            policies.push_back(ctx.policy);
        });
    };
    std::vector<EstimatedCostTable> est_adapted, est_standard;
    std::vector<Policy> pol_adapted, pol_standard;
    run(EstimatorKind::delay_adapted, est_adapted, pol_adapted);
    run(EstimatorKind::standard, est_standard, pol_standard);
    std::size_t est_mismatch = 0, pol_mismatch = 0;
    for (std::size_t i = 0; i < std::min(est_adapted.size(), est_standard.size()); ++i)
        est_mismatch += !(est_adapted[i] == est_standard[i]);
    for (std::size_t i = 0; i < std::min(pol_adapted.size(), pol_standard.size()); ++i)
        pol_mismatch += !(pol_adapted[i] == pol_standard[i]);
    r.passed = est_adapted.size() == 2000 && est_standard.size() == 2000 && pol_adapted.size() == 2000 &&
               pol_standard.size() == 2000 && est_mismatch == 0 && pol_mismatch == 0;
    r.detail = detail::fmt("%zu estimates and %zu policies compared bitwise; %zu estimate and %zu policy mismatches",
                           est_adapted.size(), pol_adapted.size(), est_mismatch, pol_mismatch);
    return r;
}

// ---------------------------------------------------------------------------
// 2. Occupancy validity

inline CriterionResult check_occupancy_validity() {
    auto r = detail::start(2, "occupancy-validity", "occupancy validity (uob-reps/uob-ftrl/oreps-known, 10 seeds x K=2000, tol 1e-6)");
    constexpr double tol = 1e-6;
    double worst_flow = 0.0, worst_membership = 0.0;
    long checked = 0, failures = 0;
    for (auto kind : {LearnerKind::uob_reps, LearnerKind::uob_ftrl, LearnerKind::oreps_known}) {
        auto cfg = detail::base_config(kind, Dims{3, 2, 3}, 2000);
        cfg.delay.kind = DelayKind::uniform_random;
        cfg.delay.params.max = 20;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            run_experiment(cfg, seed, [&](const EpisodeContext& ctx, const Learner& l) {
                double flow = 0.0, membership = 0.0;
                const int s0 = ctx.mdp.s_init;
                if (kind == LearnerKind::uob_reps) {
                    const auto& x = static_cast<const RepsLearner&>(l);
                    flow = detail::polytope_residual(x.q(), s0);
                    membership = std::max(0.0, occupancy_confidence_violation(x.q(), x.current_set()));
                } else if (kind == LearnerKind::uob_ftrl) {
                    const auto& x = static_cast<const FtrlLearner&>(l);
                    flow = detail::polytope_residual(x.q(), s0);
                    membership = std::max(0.0, occupancy_confidence_violation(x.q(), x.decision_set()));
                } else {
                    const auto& x = static_cast<const OrepsKnownLearner&>(l);
                    flow = known_flow_residual(x.q(), ctx.mdp.p, s0);
                    for (double v : x.q().values())
                        flow = std::max(flow, -v);
                }
                worst_flow = std::max(worst_flow, flow);
                worst_membership = std::max(worst_membership, membership);
                failures += (flow > tol || membership > tol);
                ++checked;
            });
        }
    }
    r.passed = failures == 0 && checked == 3L * 10 * 2000;
    r.detail = detail::fmt("%ld iterates checked, %ld failures; worst flow residual %.2e, worst membership %.2e",
                           checked, failures, worst_flow, worst_membership);
    return r;
}

// ---------------------------------------------------------------------------
// 3. KL stability

inline CriterionResult check_kl_stability() {
    auto r = detail::start(3, "kl-stability", "KL stability lemma on oreps-known S=2,A=2,H=2 (>= 1e4 updates, slack 1e-9)");
    long updates = 0, violations = 0;
    double worst = -std::numeric_limits<double>::infinity();
    struct Variant {
        DelayKind kind;
        int value;
    };
    for (const Variant v : {Variant{DelayKind::constant, 0}, Variant{DelayKind::uniform_random, 30}}) {
        auto cfg = detail::base_config(LearnerKind::oreps_known, Dims{2, 2, 2}, 8000);
        cfg.delay.kind = v.kind;
        cfg.delay.params.value = v.value;
        cfg.delay.params.max = v.value;
        cfg.learner.solver.grad_tol = 1e-12;
        // Fixed rates large enough that each update moves q visibly.
        cfg.learner.eta = 0.2;
        cfg.learner.gamma = 0.05;
        run_experiment(cfg, 3, [&](const EpisodeContext&, const Learner& l) {
            const auto& x = static_cast<const OrepsKnownLearner&>(l);
            if (x.last_estimates().empty())
                return;
            const auto [lhs, rhs] = kl_stability_check(x.q_before(), x.q(), x.last_batch(), x.eta());
            ++updates;
            worst = std::max(worst, lhs - rhs);
            violations += !(lhs <= rhs + 1e-9);
        });
    }
    r.passed = updates >= 10000 && violations == 0;
    r.detail = detail::fmt("%ld updates, %ld violations; max(lhs - rhs) = %.3e", updates, violations, worst);
    return r;
}

// ---------------------------------------------------------------------------
// 4. Confidence coverage

inline CriterionResult check_coverage(int runs = 500) {
    auto r = detail::start(4, "coverage", "confidence coverage (500 runs, S=3,A=2,H=3, delta=0.1, K=2000)");
    const Dims d{3, 2, 3};
    constexpr int K = 2000;
    constexpr double delta = 0.1;
    int covered = 0;
    for (int run = 0; run < runs; ++run) {
        const auto mdp = random_layered_mdp(d, 1000 + std::uint64_t(run));
        Rng rng = Rng(std::uint64_t(run)).split("coverage");
        const auto pi = uniform_policy(d);
        VisitCounters counters(d);
        bool all = true;
        for (int k = 1; k <= K && all; ++k) {
            // P^k is built from the counts of episodes 1..k-1.
            const auto set = build_confidence_set(counters, CounterKind::immediate, delta, K, k);
            all = contains(set, mdp.p);
            counters.update(play_episode(pi, mdp, rng, k), CounterKind::immediate);
        }
        covered += all;
    }
    const double rate = double(covered) / runs;
    r.passed = rate >= 0.9;
    r.detail = detail::fmt("p in P^k for all k in %d of %d runs (rate %.4f, required >= 0.9)", covered, runs, rate);
    return r;
}

// ---------------------------------------------------------------------------
// 5. Comp-UOB correctness

inline CriterionResult check_comp_uob() {
    auto r = detail::start(5, "comp-uob", "comp-UOB dominance (1000 members, slack 1e-9) and grid max (within 1e-3)");
    const Dims d{2, 2, 2};
    long dominance_violations = 0;
    double worst_grid_gap = 0.0;
    int instances = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto mdp = random_layered_mdp(d, seed);
        Rng rng = Rng(seed).split("comp-uob");
        VisitCounters counters(d);
        const auto behaviour = uniform_policy(d);
        const int episodes = int(1000 * seed);
        for (int k = 1; k <= episodes; ++k)
            counters.update(play_episode(behaviour, mdp, rng, k), CounterKind::immediate);
        // A small delta would leave every row unconstrained at these counts;
        // delta close to one gives tight but valid boxes.
        const auto set = build_confidence_set(counters, CounterKind::immediate, 0.999, 1, 1);
        const auto pi = random_policy(d, rng);
        const auto u = comp_uob(pi, set, mdp.s_init);
        for (int i = 0; i < 1000; ++i) {
            const auto member = sample_member(set, rng);
            const auto q = state_action_occupancy(pi, member, mdp.s_init);
            for (int h = 0; h < d.H; ++h)
                for (int s = 0; s < d.S; ++s)
                    for (int a = 0; a < d.A; ++a)
                        dominance_violations += q(h, s, a) > u(h, s, a) + 1e-9;
        }
        const auto grid = testing::layer1_grid_max(pi, set, mdp.s_init, 201);
        for (int h = 0; h < d.H; ++h)
            for (int s = 0; s < d.S; ++s)
                for (int a = 0; a < d.A; ++a)
                    worst_grid_gap = std::max(worst_grid_gap, std::abs(u(h, s, a) - grid(h, s, a)));
        ++instances;
    }
    r.passed = dominance_violations == 0 && worst_grid_gap <= 1e-3;
    r.detail = detail::fmt("%d instances x 1000 members: %ld dominance violations; max |u - grid max| = %.3e",
                           instances, dominance_violations, worst_grid_gap);
    return r;
}

// ---------------------------------------------------------------------------
// 6. Bandit / EXP3 equivalence

inline CriterionResult check_exp3_equivalence() {
    auto r = detail::start(6, "exp3-equivalence", "delayed EXP3 equivalence on S=1 (hedge/oreps-known/uob-reps, K=500, spike delays, 1e-9)");
    double worst = 0.0;
    std::string per;
    bool ok = true;
    for (auto kind : {LearnerKind::hedge, LearnerKind::oreps_known, LearnerKind::uob_reps}) {
        auto cfg = detail::base_config(kind, Dims{1, 3, 1}, 500);
        cfg.delay.kind = DelayKind::spike;
        cfg.delay.params.period = 7;
        cfg.delay.params.magnitude = 25;
        cfg.delay.params.base = 2;
        // The estimate c / (w + gamma) amplifies weight perturbations by about
        // eta / gamma^2 per step, so a small gamma would let rounding
        // differences between two exact implementations grow past 1e-9.
        cfg.learner.eta = 0.1;
        cfg.learner.gamma = 0.25;
        // Hedge's optimistic estimator divides by the origin weight only; the
        // REPS variants use the delay-adapted denominator.
        testing::DelayedExp3Oracle oracle(3, 0.1, 0.25, kind != LearnerKind::hedge);
        std::vector<int> arms(501, -1);
        double run_worst = 0.0;
        run_experiment(cfg, 5, [&](const EpisodeContext& ctx, const Learner& l) {
            arms[std::size_t(ctx.k)] = ctx.trajectory.actions[0];
            std::vector<testing::DelayedExp3Oracle::Arrival> arrivals;
            for (const auto& p : ctx.arrivals)
                arrivals.push_back({p.origin, p.trajectory.actions[0], p.costs[0]});
            oracle.step(ctx.k, arrivals);
            std::vector<double> w(3);
            if (kind == LearnerKind::hedge) {
                const auto& x = static_cast<const HedgeLearner&>(l);
                for (std::size_t i = 0; i < 3; ++i) {
                    // Policy i plays action i at the single (h, s).
                    const auto& pi = x.policies()[i];
                    for (int a = 0; a < 3; ++a)
                        if (pi(0, 0, a) == 1.0)
                            w[std::size_t(a)] = x.weights()[i];
                }
            } else if (kind == LearnerKind::oreps_known) {
                const auto& x = static_cast<const OrepsKnownLearner&>(l);
                for (int a = 0; a < 3; ++a)
                    w[std::size_t(a)] = x.q()(0, 0, a);
            } else {
                const auto& x = static_cast<const RepsLearner&>(l);
                for (int a = 0; a < 3; ++a)
                    w[std::size_t(a)] = x.q()(0, 0, a, 0);
            }
            for (int a = 0; a < 3; ++a)
                run_worst = std::max(run_worst, std::abs(w[std::size_t(a)] - oracle.weights()[std::size_t(a)]));
        });
        worst = std::max(worst, run_worst);
        ok = ok && run_worst <= 1e-9;
        per += detail::fmt("%s%s %.2e", per.empty() ? "" : ", ", to_string(kind), run_worst);
    }
    r.passed = ok;
    r.detail = "max weight deviation: " + per;
    return r;
}

// ---------------------------------------------------------------------------
// 7, 8. Regret scaling

struct RegretScaling {
    double mean_regret_2000 = 0.0;
    double mean_regret_20000 = 0.0;
    double mean_regret_d50 = 0.0;
    double mean_regret_d200 = 0.0;
    bool computed = false;
};

inline ExperimentConfig scaling_config(int K, int delay) {
    auto cfg = detail::base_config(LearnerKind::oreps_known, Dims{2, 2, 2}, K);
    cfg.cost.kind = CostKind::switching;
    cfg.cost.params.period = 100;
    cfg.cost.params.flip_fraction = 0.3;
    cfg.delay.params.value = delay;
    cfg.seeds.clear();
    for (std::uint64_t s = 1; s <= 10; ++s)
        cfg.seeds.push_back(s);
    return cfg;
}

inline double mean_final_regret(const ExperimentConfig& cfg) {
    double total = 0.0;
    for (const auto& rec : run_all_seeds(cfg))
        total += rec.summary.regret;
    return total / double(cfg.seeds.size());
}

inline RegretScaling& scaling_cache() {
    static RegretScaling cache;
    return cache;
}

inline const RegretScaling& regret_scaling() {
    auto& c = scaling_cache();
    if (!c.computed) {
        c.mean_regret_2000 = mean_final_regret(scaling_config(2000, 0));
        c.mean_regret_20000 = mean_final_regret(scaling_config(20000, 0));
        c.mean_regret_d50 = mean_final_regret(scaling_config(20000, 50));
        c.mean_regret_d200 = mean_final_regret(scaling_config(20000, 200));
        c.computed = true;
    }
    return c;
}

inline CriterionResult check_sublinear_regret() {
    auto r = detail::start(7, "sublinear-regret", "sublinear regret (oreps-known, switching costs, 10 seeds): R/K at 20000 < 0.5 x R/K at 2000");
    const auto& s = regret_scaling();
    const double small = s.mean_regret_2000 / 2000.0;
    const double large = s.mean_regret_20000 / 20000.0;
    r.passed = large < 0.5 * small;
    r.detail = detail::fmt("mean R_K/K: %.5f at K=2000, %.5f at K=20000 (ratio %.3f, required < 0.5)", small, large,
                           large / small);
    return r;
}

inline CriterionResult check_delay_scaling() {
    auto r = detail::start(8, "delay-scaling", "delay scaling (d in {0,50,200}): nondecreasing and log-log slope <= 0.75");
    const auto& s = regret_scaling();
    const double r0 = s.mean_regret_20000, r50 = s.mean_regret_d50, r200 = s.mean_regret_d200;
    const bool monotone = r0 <= r50 && r50 <= r200;
    double slope = std::numeric_limits<double>::quiet_NaN();
    if (r50 > r0 && r200 > r0)
        slope = std::log((r200 - r0) / (r50 - r0)) / std::log((200.0 * 20000) / (50.0 * 20000));
    r.passed = monotone && std::isfinite(slope) && slope <= 0.75;
    r.detail = detail::fmt("mean R_K: %.2f (d=0), %.2f (d=50), %.2f (d=200); slope %.3f", r0, r50, r200, slope);
    return r;
}

// ---------------------------------------------------------------------------
// 9. Combinatorial lemma

inline CriterionResult check_overlap_lemma() {
    auto r = detail::start(9, "overlap-lemma", "delay overlap count <= D + K (1e4 random schedules)");
    Rng rng = Rng(2024).split("overlap");
    long violations = 0, oracle_mismatch = 0;
    for (int i = 0; i < 10000; ++i) {
        const int K = 1 + int(rng.uniform_int(200));
        DelayParams params;
        DelayKind kind;
        switch (rng.uniform_int(3)) {
        case 0:
            kind = DelayKind::uniform_random;
            params.max = int(rng.uniform_int(60));
            break;
        case 1:
            kind = DelayKind::spike;
            params.period = 1 + int(rng.uniform_int(20));
            params.magnitude = int(rng.uniform_int(150));
            params.base = int(rng.uniform_int(5));
            break;
        default:
            kind = DelayKind::explicit_list;
            for (int k = 0; k < K; ++k)
                params.values.push_back(rng.uniform() < 0.1 ? int(rng.uniform_int(300)) : int(rng.uniform_int(4)));
            break;
        }
        const auto schedule = generate_delays(kind, params, K, rng.next_u64());
        const auto count = delay_overlap_count(schedule);
        violations += count > schedule.total_delay() + K;
        if (i % 10 == 0)
            oracle_mismatch += count != testing::overlap_count_brute_force(schedule);
    }
    r.passed = violations == 0 && oracle_mismatch == 0;
    r.detail = detail::fmt("10000 schedules: %ld violations, %ld mismatches against the brute-force count (1000 compared)",
                           violations, oracle_mismatch);
    return r;
}

// ---------------------------------------------------------------------------
// 10. Hedge optimism

inline CriterionResult check_hedge_optimism() {
    auto r = detail::start(10, "hedge-optimism", "hedge optimism on covered runs (100 probes per run)");
    long probes = 0, violations = 0;
    int covered_runs = 0, runs = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        auto cfg = detail::base_config(LearnerKind::hedge, Dims{2, 2, 3}, 600);
        cfg.mdp.seed = 40 + seed;
        cfg.delay.kind = DelayKind::uniform_random;
        cfg.delay.params.max = 10;
        // Probe episodes are spread evenly; a run counts only if p stays in P^k throughout.
        Rng probe_rng = Rng(seed).split("optimism-probes");
        std::vector<int> probe_at(100);
        for (int i = 0; i < 100; ++i)
            probe_at[std::size_t(i)] = 1 + (i * cfg.K) / 100 + int(probe_rng.uniform_int(std::uint64_t(cfg.K / 100)));
        bool covered = true;
        long run_violations = 0;
        std::size_t next_probe = 0;
        run_experiment(cfg, seed, [&](const EpisodeContext& ctx, const Learner& l) {
            const auto& x = static_cast<const HedgeLearner&>(l);
            const auto& set = x.current_set();
            covered = covered && contains(set, ctx.mdp.p);
            while (next_probe < probe_at.size() && probe_at[next_probe] == ctx.k) {
                const Dims d = ctx.mdp.dims;
                const auto pi = probe_rng.uniform() < 0.5 ? random_policy(d, probe_rng)
                                                          : x.policies()[probe_rng.uniform_int(x.policies().size())];
                CostFunction c(d);
                for (auto& v : c.values())
                    v = probe_rng.uniform();
                const double optimistic = inner(state_action_occupancy(pi, set.center, ctx.mdp.s_init), c) -
                                          exploration_bonus(pi, set.center, set, ctx.mdp.s_init);
                const double truth = inner(state_action_occupancy(pi, ctx.mdp.p, ctx.mdp.s_init), c);
                run_violations += optimistic > truth + 1e-12;
                ++next_probe;
            }
        });
        ++runs;
        if (covered) {
            ++covered_runs;
            probes += long(next_probe);
            violations += run_violations;
        }
    }
    r.passed = covered_runs > 0 && violations == 0 && probes == 100L * covered_runs;
    r.detail = detail::fmt("%d of %d runs covered; %ld probes, %ld violations", covered_runs, runs, probes, violations);
    return r;
}

// ---------------------------------------------------------------------------
// 11. Dual-solver optimality

inline CriterionResult check_solver_optimality() {
    auto r = detail::start(11, "solver-optimality", "dual solvers: objective <= 100 feasible points and KKT <= 1e-6 (50 instances each)");
    long beaten[3] = {0, 0, 0};
    double worst_kkt[3] = {0, 0, 0};
    SolverConfig cfg;
    for (int inst = 0; inst < 50; ++inst) {
        Rng rng = Rng(std::uint64_t(inst)).split("solver-optimality");
        const Dims d{1 + int(rng.uniform_int(3)), 1 + int(rng.uniform_int(3)), 1 + int(rng.uniform_int(3))};
        const auto mdp = random_layered_mdp(d, 500 + std::uint64_t(inst), 0.7);
        const double eta = rng.uniform(0.05, 2.0);
        EstimatedCostTable loss(d);
        for (auto& v : loss.values())
            v = rng.uniform() < 0.5 ? rng.uniform(0.0, 10.0) : 0.0;

        // Known transitions.
        {
            const auto q_prev = state_action_occupancy(random_policy(d, rng), mdp.p, mdp.s_init);
            const auto sol = solve_oreps_known(q_prev, mdp.p, mdp.s_init, loss, eta, cfg);
            const double obj = omd_objective(sol.q, q_prev, loss, eta);
            worst_kkt[0] = std::max({worst_kkt[0], known_flow_residual(sol.q, mdp.p, mdp.s_init),
                                     sol.diagnostics.grad_norm});
            for (int i = 0; i < 100; ++i) {
                const auto q = state_action_occupancy(random_policy(d, rng, 0.5), mdp.p, mdp.s_init);
                beaten[0] += omd_objective(q, q_prev, loss, eta) < obj;
            }
        }

        // Unknown transitions: a confidence set from a few observed episodes.
        VisitCounters counters(d);
        const int episodes = 1 + int(rng.uniform_int(200));
        for (int k = 1; k <= episodes; ++k)
            counters.update(play_episode(uniform_policy(d), mdp, rng, k), CounterKind::immediate);
        const auto set = build_confidence_set(counters, CounterKind::immediate, rng.uniform(0.5, 0.99), 1, 1);
        {
            auto q_prev = occupancy_from(random_policy(d, rng), sample_member(set, rng), mdp.s_init);
            const auto uniform = uniform_occupancy(d, mdp.s_init);
            for (std::size_t i = 0; i < q_prev.values().size(); ++i)
                q_prev.values()[i] = 0.5 * q_prev.values()[i] + 0.5 * uniform.values()[i];
            const auto sol = solve_omd_unknown(q_prev, set, mdp.s_init, loss, eta, cfg);
            const double obj = omd_objective(sol.q, q_prev, loss, eta);
            worst_kkt[1] = std::max({worst_kkt[1], sol.kkt.worst(), sol.diagnostics.grad_norm});
            for (int i = 0; i < 100; ++i) {
                const auto q = occupancy_from(random_policy(d, rng, 0.5), sample_member(set, rng), mdp.s_init);
                beaten[1] += omd_objective(q, q_prev, loss, eta) < obj;
            }
        }

        // FTRL over an intersection of two sets with a larger cumulative loss.
        {
            VisitCounters more = counters;
            for (int k = 1; k <= 50; ++k)
                more.update(play_episode(uniform_policy(d), mdp, rng, k), CounterKind::immediate);
            const auto decision =
                intersect(set, build_confidence_set(more, CounterKind::immediate, set.delta, 1, 2));
            EstimatedCostTable cumulative(d);
            for (auto& v : cumulative.values())
                v = rng.uniform(0.0, 50.0);
            const auto sol = solve_ftrl(cumulative, decision, mdp.s_init, eta, cfg);
            worst_kkt[2] = std::max({worst_kkt[2], sol.kkt.worst(), sol.diagnostics.grad_norm});
            for (int i = 0; i < 100; ++i) {
                const auto q = occupancy_from(random_policy(d, rng, 0.5), sample_member(decision, rng), mdp.s_init);
                beaten[2] += ftrl_objective(q, cumulative, eta) < sol.objective;
            }
        }
    }
    r.passed = beaten[0] == 0 && beaten[1] == 0 && beaten[2] == 0 && worst_kkt[0] <= 1e-6 && worst_kkt[1] <= 1e-6 &&
               worst_kkt[2] <= 1e-6;
    r.detail = detail::fmt("points beating the solution: known %ld, unknown %ld, ftrl %ld; worst KKT residual %.2e / "
                           "%.2e / %.2e",
                           beaten[0], beaten[1], beaten[2], worst_kkt[0], worst_kkt[1], worst_kkt[2]);
    return r;
}

// ---------------------------------------------------------------------------
// Registry

struct Criterion {
    int id;
    const char* suite;
    std::function<CriterionResult()> run;
};

inline const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "estimator-reduction", [] { return check_estimator_reduction(); }},
        {2, "occupancy-validity", [] { return check_occupancy_validity(); }},
        {3, "kl-stability", [] { return check_kl_stability(); }},
        {4, "coverage", [] { return check_coverage(); }},
        {5, "comp-uob", [] { return check_comp_uob(); }},
        {6, "exp3-equivalence", [] { return check_exp3_equivalence(); }},
        {7, "sublinear-regret", [] { return check_sublinear_regret(); }},
        {8, "delay-scaling", [] { return check_delay_scaling(); }},
        {9, "overlap-lemma", [] { return check_overlap_lemma(); }},
        {10, "hedge-optimism", [] { return check_hedge_optimism(); }},
        {11, "solver-optimality", [] { return check_solver_optimality(); }},
    };
    return all;
}

inline std::vector<std::string> suite_names() {
    std::vector<std::string> out{"all"};
    for (const auto& c : criteria())
        out.emplace_back(c.suite);
    return out;
}

/// Runs "all", a suite name, or a criterion number. Unknown names throw.
/// A criterion that throws is reported as failed with the exception text.
inline std::vector<CriterionResult> run_suite(const std::string& name,
                                              const std::function<void(const CriterionResult&)>& on_result = {}) {
    std::vector<CriterionResult> out;
    bool matched = false;
    for (const auto& c : criteria()) {
        if (name != "all" && name != c.suite && name != std::to_string(c.id))
            continue;
        matched = true;
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult res;
        try {
            res = c.run();
        } catch (const std::exception& e) {
            res = detail::start(c.id, c.suite, c.suite);
            res.detail = std::string("exception: ") + e.what();
        }
        res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_result)
            on_result(res);
        out.push_back(std::move(res));
    }
    if (!matched)
        throw InvalidInput("unknown suite '" + name + "'");
    return out;
}

inline std::string format_result(const CriterionResult& r) {
    return detail::fmt("[%s] criterion %2d %-20s %s -- %s (%.1f s)", r.passed ? "PASS" : "FAIL", r.id,
                       r.suite.c_str(), r.title.c_str(), r.detail.c_str(), r.seconds);
}

}  // namespace dmdp::acceptance
