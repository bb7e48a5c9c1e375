#pragma once

// Runs a learner against the oblivious adversary under the delayed feedback
// protocol and records per-episode costs and regret.

#include "dmdp/adversary.hpp"
#include "dmdp/config.hpp"
#include "dmdp/learners.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace dmdp {

/// argmin over policies of sum_k V^{k,pi}(s_init) by backward induction on
/// the summed cost table. The minimizer is deterministic.
inline std::pair<Policy, double> best_in_hindsight(const CostSequence& costs, const MdpSpec& mdp) {
    const Dims d = mdp.dims;
    CostFunction total(d, 0.0);
    for (const auto& c : costs.costs) {
        require_same_dims(c.dims(), d, "cost vs MDP");
        auto dst = total.values();
        auto src = c.values();
        for (std::size_t i = 0; i < dst.size(); ++i)
            dst[i] += src[i];
    }
    Policy pi(d, 0.0);
    ValueTable v(d);
    for (int h = d.H - 1; h >= 0; --h)
        for (int s = 0; s < d.S; ++s) {
            int best_a = 0;
            double best = 0.0;
            for (int a = 0; a < d.A; ++a) {
                double q = total(h, s, a);
                for (int s2 = 0; s2 < d.S; ++s2)
                    q += mdp.p(h, s, a, s2) * v(h + 1, s2);
                if (a == 0 || q < best) {
                    best = q;
                    best_a = a;
                }
            }
            pi(h, s, best_a) = 1.0;
            v(h, s) = best;
        }
    return {std::move(pi), v(0, mdp.s_init)};
}

struct EpisodeRow {
    int k = 0;
    int d_k = 0;
    int arrivals = 0;
    double expected_cost = 0.0;
    double realized_cost = 0.0;
    double cum_expected = 0.0;
    double cum_best = 0.0;
    double regret = 0.0;
    StepDiagnostics diagnostics;
};

struct RunSummary {
    double regret = 0.0;            // R_K under the configured cost mode
    double regret_expected = 0.0;   // R_K from exact expected costs
    double regret_realized = 0.0;   // R_K from realized trajectory costs
    double best_total = 0.0;
    std::int64_t total_delay = 0;
    int max_delay = 0;
    bool max_delay_exceeds_sqrt_total = false;
    double eta = 0.0;
    double gamma = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;
};

struct RunRecord {
    std::string run_id;
    LearnerKind algorithm = LearnerKind::oreps_known;
    CostMode cost_mode = CostMode::exact;
    std::vector<EpisodeRow> rows;
    RunSummary summary;
    std::vector<std::vector<int>> delivered;  // delivered[k-1]: origins released at the end of episode k
};

/// Everything an observer may inspect after episode k has been processed.
struct EpisodeContext {
    int k = 0;
    const MdpSpec& mdp;
    const CostFunction& cost;
    const DelaySchedule& delays;
    const EpisodeTrajectory& trajectory;
    std::span<const FeedbackPacket> arrivals;
    const Policy& policy;
};

using EpisodeObserver = std::function<void(const EpisodeContext&, const Learner&)>;

/// Seeds of the adversary streams for one run; the MDP keeps its own seed.
inline std::uint64_t run_stream_seed(std::uint64_t base, std::uint64_t run_seed) {
    return detail::mix64(base ^ detail::mix64(run_seed + detail::kGolden));
}

/// Confirms that each episode receives exactly {j : j + d^j = k}, each once.
class ProtocolAuditor {
public:
    explicit ProtocolAuditor(const DelaySchedule& delays) : delays_(delays), seen_(std::size_t(delays.K()), 0) {}

    void check(int k, std::span<const FeedbackPacket> arrivals) {
        for (const auto& packet : arrivals) {
            const int j = packet.origin;
            if (j < 1 || j > delays_.K() || j + delays_.delay(j) != k)
                throw ProtocolViolation("episode " + std::to_string(k) + " received packet of episode " +
                                        std::to_string(j) + " out of schedule");
            if (seen_[std::size_t(j - 1)]++)
                throw ProtocolViolation("packet of episode " + std::to_string(j) + " delivered twice");
            if (packet.trajectory.episode != j)
                throw ProtocolViolation("packet trajectory does not belong to its origin");
        }
    }

private:
    const DelaySchedule& delays_;
    std::vector<char> seen_;
};

inline RunRecord run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const EpisodeObserver& observer = {}) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const MdpSpec mdp = build_mdp(cfg);
    const Dims d = mdp.dims;
    const CostSequence costs =
        generate_costs(cfg.cost.kind, cfg.cost.params, d, cfg.K, run_stream_seed(cfg.cost.seed, seed));
    const DelaySchedule delays =
        generate_delays(cfg.delay.kind, cfg.delay.params, cfg.K, run_stream_seed(cfg.delay.seed, seed));
    const LearnerParams params = resolve_learner_params(cfg, d, delays.total_delay());
    auto learner = make_learner(cfg.learner.kind, mdp, params);

    const Rng root(seed);
    Rng env_rng = root.split("environment");
    Rng learner_rng = root.split("learner");

    const auto [best_policy, best_total] = best_in_hindsight(costs, mdp);

    RunRecord rec;
    rec.run_id = cfg.name + "-s" + std::to_string(seed);
    rec.algorithm = cfg.learner.kind;
    rec.cost_mode = cfg.cost_mode;
    rec.rows.reserve(std::size_t(cfg.K));
    rec.delivered.resize(std::size_t(cfg.K));

    FeedbackQueue queue;
    ProtocolAuditor auditor(delays);
    double cum_expected = 0.0, cum_realized = 0.0, cum_best = 0.0;
    for (int k = 1; k <= cfg.K; ++k) {
        const CostFunction& c = costs.at(k);
        const Policy& pi = learner->begin_episode(k, learner_rng);
        const double expected = inner(learner->played_occupancy(mdp), c);
        auto traj = play_episode(pi, mdp, env_rng, k);
        FeedbackPacket packet = make_packet(c, traj);
        double realized = 0.0;
        for (double x : packet.costs)
            realized += x;
        queue.enqueue(std::move(packet), delays.delay(k));
        const auto arrivals = queue.arrivals_at(k);
        auditor.check(k, arrivals);
        for (const auto& a : arrivals)
            rec.delivered[std::size_t(k - 1)].push_back(a.origin);
        learner->end_episode(k, traj, arrivals);
        if (observer)
            observer(EpisodeContext{k, mdp, c, delays, traj, arrivals, pi}, *learner);

        cum_expected += expected;
        cum_realized += realized;
        cum_best += evaluate_policy(best_policy, mdp.p, c)(0, mdp.s_init);
        EpisodeRow row;
        row.k = k;
        row.d_k = delays.delay(k);
        row.arrivals = int(arrivals.size());
        row.expected_cost = expected;
        row.realized_cost = realized;
        row.cum_expected = cum_expected;
        row.cum_best = cum_best;
        row.regret = (cfg.cost_mode == CostMode::exact ? cum_expected : cum_realized) - cum_best;
        row.diagnostics = learner->diagnostics();
        rec.rows.push_back(row);
    }

    auto& sm = rec.summary;
    sm.regret_expected = cum_expected - cum_best;
    sm.regret_realized = cum_realized - cum_best;
    sm.regret = cfg.cost_mode == CostMode::exact ? sm.regret_expected : sm.regret_realized;
    sm.best_total = best_total;
    sm.total_delay = delays.total_delay();
    sm.max_delay = delays.max_delay();
    sm.max_delay_exceeds_sqrt_total = delays.exceeds_sqrt_total();
    sm.eta = params.eta;
    sm.gamma = params.gamma;
    sm.seed = seed;
    sm.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// One record per seed, run on up to `jobs` threads. Output order follows
/// cfg.seeds regardless of scheduling.
inline std::vector<RunRecord> run_all_seeds(const ExperimentConfig& cfg, int jobs = 1) {
    std::vector<RunRecord> out(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= cfg.seeds.size())
                return;
            try {
                out[i] = run_experiment(cfg, cfg.seeds[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, int(cfg.seeds.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < n; ++t)
            threads.emplace_back(worker);
        for (auto& t : threads)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation

struct AggregateCurve {
    std::vector<double> mean, median, q25, q75;  // regret per k across runs

    double final_mean() const { return mean.empty() ? 0.0 : mean.back(); }
};

namespace detail {

/// Linear-interpolation quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& x, double p) {
    if (x.empty())
        return 0.0;
    const double pos = p * double(x.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - double(lo)) * (x[hi] - x[lo]);
}

}  // namespace detail

inline AggregateCurve aggregate(const std::vector<RunRecord>& records) {
    AggregateCurve out;
    if (records.empty())
        return out;
    const std::size_t K = records.front().rows.size();
    for (const auto& r : records)
        if (r.rows.size() != K)
            throw InvalidInput("aggregate needs runs of equal length");
    std::vector<double> column(records.size());
    for (std::size_t k = 0; k < K; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            column[i] = records[i].rows[k].regret;
            sum += column[i];
        }
        std::sort(column.begin(), column.end());
        out.mean.push_back(sum / double(records.size()));
        out.median.push_back(detail::quantile_sorted(column, 0.5));
        out.q25.push_back(detail::quantile_sorted(column, 0.25));
        out.q75.push_back(detail::quantile_sorted(column, 0.75));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output

inline constexpr const char* kCsvHeader =
    "run_id,algorithm,k,d_k,arrivals,expected_cost,realized_cost,cum_expected,cum_best,regret";

namespace detail {

inline std::string format_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const RunRecord& rec) {
    out << kCsvHeader << '\n';
    const char* algo = to_string(rec.algorithm);
    for (const auto& r : rec.rows)
        out << rec.run_id << ',' << algo << ',' << r.k << ',' << r.d_k << ',' << r.arrivals << ','
            << detail::format_double(r.expected_cost) << ',' << detail::format_double(r.realized_cost) << ','
            << detail::format_double(r.cum_expected) << ',' << detail::format_double(r.cum_best) << ','
            << detail::format_double(r.regret) << '\n';
}

inline nlohmann::json run_summary_json(const RunRecord& rec) {
    const auto& s = rec.summary;
    long long solver_iterations = 0;
    for (const auto& r : rec.rows)
        solver_iterations += r.diagnostics.solver_iterations;
    return {{"run_id", rec.run_id},
            {"algorithm", to_string(rec.algorithm)},
            {"seed", s.seed},
            {"K", rec.rows.size()},
            {"R_K", s.regret},
            {"R_K_expected", s.regret_expected},
            {"R_K_realized", s.regret_realized},
            {"best_total", s.best_total},
            {"D", s.total_delay},
            {"d_max", s.max_delay},
            {"d_max_exceeds_sqrt_D", s.max_delay_exceeds_sqrt_total},
            {"eta", s.eta},
            {"gamma", s.gamma},
            {"solver_iterations", solver_iterations},
            {"wall_time_s", s.wall_time_s}};
}

inline nlohmann::json experiment_summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : records)
        runs.push_back(run_summary_json(r));
    const auto agg = aggregate(records);
    std::vector<double> finals;
    for (const auto& r : records)
        finals.push_back(r.summary.regret);
    std::sort(finals.begin(), finals.end());
    return {{"config", config_to_json(cfg)},
            {"runs", runs},
            {"aggregate",
             {{"mean_R_K", agg.final_mean()},
              {"median_R_K", detail::quantile_sorted(finals, 0.5)},
              {"iqr_R_K", detail::quantile_sorted(finals, 0.75) - detail::quantile_sorted(finals, 0.25)}}}};
}

/// Writes <dir>/<run_id>.csv per run, <dir>/aggregate.csv and <dir>/summary.json.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                          const std::vector<RunRecord>& records) {
    std::filesystem::create_directories(dir);
    for (const auto& rec : records) {
        std::ofstream out(dir / (rec.run_id + ".csv"));
        if (!out)
            throw InvalidInput("cannot write to " + dir.string());
        write_csv(out, rec);
    }
    const auto agg = aggregate(records);
    {
        std::ofstream out(dir / "aggregate.csv");
        out << "k,mean_regret,median_regret,q25_regret,q75_regret\n";
        for (std::size_t k = 0; k < agg.mean.size(); ++k)
            out << (k + 1) << ',' << detail::format_double(agg.mean[k]) << ','
                << detail::format_double(agg.median[k]) << ',' << detail::format_double(agg.q25[k]) << ','
                << detail::format_double(agg.q75[k]) << '\n';
    }
    std::ofstream out(dir / "summary.json");
    out << experiment_summary_json(cfg, records).dump(2) << '\n';
}

}  // namespace dmdp
