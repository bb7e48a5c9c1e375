#pragma once

// The episode-by-episode learners. Each learner is a state machine driven by
// the bench: begin_episode(k) fixes the policy of episode k, end_episode(k)
// hands over the learner's own trajectory and the packets {j : j + d^j = k}.

#include "dmdp/adversary.hpp"
#include "dmdp/confidence.hpp"
#include "dmdp/estimators.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/occupancy_opt.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dmdp {

enum class LearnerKind { hedge, uob_ftrl, uob_reps, oreps_known };

inline const char* to_string(LearnerKind k) {
    switch (k) {
    case LearnerKind::hedge: return "hedge";
    case LearnerKind::uob_ftrl: return "uob-ftrl";
    case LearnerKind::uob_reps: return "uob-reps";
    case LearnerKind::oreps_known: return "oreps-known";
    }
    return "unknown";
}

inline LearnerKind learner_kind_from_string(std::string_view name) {
    if (name == "hedge")
        return LearnerKind::hedge;
    if (name == "uob-ftrl")
        return LearnerKind::uob_ftrl;
    if (name == "uob-reps")
        return LearnerKind::uob_reps;
    if (name == "oreps-known")
        return LearnerKind::oreps_known;
    throw InvalidInput("unknown learner '" + std::string(name) + "'");
}

/// Fully resolved learner hyperparameters (no "auto" left).
struct LearnerParams {
    double eta = 0.1;
    double gamma = 0.1;
    double delta = 0.1;
    int K = 1;
    int enumeration_cap = 4096;
    EstimatorKind estimator = EstimatorKind::delay_adapted;  // uob-reps and oreps-known
    SolverConfig solver;

    void validate() const {
        if (!(eta > 0.0) || !std::isfinite(eta))
            throw InvalidInput("eta must be positive");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw InvalidInput("gamma must be positive");
        if (!(delta > 0.0 && delta < 1.0))
            throw InvalidInput("delta must lie in (0, 1)");
        if (K <= 0)
            throw InvalidInput("K must be positive");
        if (enumeration_cap <= 0)
            throw InvalidInput("enumeration cap must be positive");
        solver.validate();
    }
};

struct StepDiagnostics {
    int arrivals = 0;
    int solver_iterations = 0;
    double solver_grad_norm = 0.0;
    double bonus_mean = 0.0;      // hedge: sum_pi omega(pi) b^k(pi)
    double estimate_total = 0.0;  // sum of all entries of the arriving estimates
};

class Learner {
public:
    virtual ~Learner() = default;

    virtual LearnerKind kind() const noexcept = 0;

    /// Fixes and returns the policy played in episode k (k = 1, 2, ...).
    virtual const Policy& begin_episode(int k, Rng& rng) = 0;

    /// Hands over the learner's own trajectory of episode k and the packets
    /// released at the end of episode k, sorted by origin.
    virtual void end_episode(int k, const EpisodeTrajectory& own, std::span<const FeedbackPacket> arrivals) = 0;

    /// Expected state-action occupancy under the true transitions of the
    /// (possibly randomized) play of the current episode.
    virtual StateActionOccupancy played_occupancy(const MdpSpec& mdp) const = 0;

    const StepDiagnostics& diagnostics() const noexcept { return diag_; }

protected:
    void check_order_begin(int k) {
        if (k != last_end_ + 1 || begun_)
            throw ProtocolViolation("begin_episode(" + std::to_string(k) + ") out of order");
        begun_ = true;
    }
    void check_order_end(int k, std::span<const FeedbackPacket> arrivals) {
        if (!begun_ || k != last_end_ + 1)
            throw ProtocolViolation("end_episode(" + std::to_string(k) + ") out of order");
        int prev = 0;
        for (const auto& packet : arrivals) {
            if (packet.origin < 1 || packet.origin > k || packet.origin <= prev)
                throw ProtocolViolation("arrival with invalid origin " + std::to_string(packet.origin));
            prev = packet.origin;
        }
        begun_ = false;
        last_end_ = k;
    }

    StepDiagnostics diag_;

private:
    int last_end_ = 0;
    bool begun_ = false;
};

namespace detail {

inline double log_normalize(std::vector<double>& log_w) {
    const double lse = log_sum_exp(log_w);
    for (auto& x : log_w)
        x -= lse;
    return lse;
}

inline void add_into(EstimatedCostTable& acc, const EstimatedCostTable& x) {
    auto dst = acc.values();
    auto src = x.values();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += src[i];
}

inline double total(const EstimatedCostTable& x) {
    double t = 0.0;
    for (double v : x.values())
        t += v;
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Delayed Hedge

/// Upper bound on max_{p' in set} ||q^{pi,p_bar} - q^{pi,p'}||_1 by the
/// simulation lemma: an error in the layer-m transition shows up in each of
/// the H - m later layers. Capped at 2H.
inline double exploration_bonus(const Policy& pi, const TransitionTable& p_bar, const ConfidenceSet& set, int s_init) {
    const Dims d = set.dims();
    const auto q = state_action_occupancy(pi, p_bar, s_init);
    double b = 0.0;
    for (int h = 0; h + 1 < d.H; ++h) {
        const double later_layers = double(d.H - 1 - h);
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                const double mass = q(h, s, a);
                if (mass == 0.0)
                    continue;
                double width = 0.0;
                for (int s2 = 0; s2 < d.S; ++s2)
                    width += set.radius(h, s, a, s2);
                b += later_layers * mass * std::min(width, 2.0);
            }
    }
    return std::min(b, 2.0 * d.H);
}

/// All A^(S*H) deterministic policies, indexed by base-A digits of
/// actions[h * S + s].
inline std::vector<Policy> enumerate_deterministic_policies(Dims d, int cap) {
    const int slots = d.S * d.H;
    double count = std::pow(double(d.A), double(slots));
    if (count > double(cap))
        throw StructuralError("A^(S*H) = " + std::to_string(count) + " policies exceed the enumeration cap " +
                              std::to_string(cap));
    const int n = int(std::llround(count));
    std::vector<Policy> out;
    out.reserve(std::size_t(n));
    std::vector<int> actions(std::size_t(slots), 0);
    for (int i = 0; i < n; ++i) {
        int code = i;
        for (int slot = 0; slot < slots; ++slot) {
            actions[std::size_t(slot)] = code % d.A;
            code /= d.A;
        }
        out.push_back(deterministic_policy(d, actions));
    }
    return out;
}

class HedgeLearner final : public Learner {
public:
    HedgeLearner(Dims dims, int s_init, LearnerParams params)
        : dims_(dims), s_init_(s_init), params_(std::move(params)), counters_(dims) {
        params_.validate();
        policies_ = enumerate_deterministic_policies(dims, params_.enumeration_cap);
        log_w_.assign(policies_.size(), -std::log(double(policies_.size())));
        weights_.assign(policies_.size(), 1.0 / double(policies_.size()));
    }

    LearnerKind kind() const noexcept override { return LearnerKind::hedge; }

    const Policy& begin_episode(int k, Rng& rng) override {
        check_order_begin(k);
        set_ = build_confidence_set(counters_, CounterKind::immediate, params_.delta, params_.K, k);
        std::vector<UpperOccupancyBound> per_policy;
        per_policy.reserve(policies_.size());
        for (const auto& pi : policies_)
            per_policy.push_back(comp_uob(pi, set_, s_init_));
        stored_[k] = Stored{mixture_uob(weights_, per_policy), set_.center};
        current_ = rng.categorical(weights_);
        return policies_[current_];
    }

    void end_episode(int k, const EpisodeTrajectory& own, std::span<const FeedbackPacket> arrivals) override {
        check_order_end(k, arrivals);
        diag_ = {};
        diag_.arrivals = int(arrivals.size());
        // Bonus of episode k uses P^k and p_bar^k, before trajectory k is counted.
        bonus_.assign(policies_.size(), 0.0);
        for (std::size_t i = 0; i < policies_.size(); ++i) {
            bonus_[i] = exploration_bonus(policies_[i], set_.center, set_, s_init_);
            diag_.bonus_mean += weights_[i] * bonus_[i];
        }
        counters_.update(own, CounterKind::immediate);

        std::vector<double> loss(policies_.size(), 0.0);
        last_estimates_.clear();
        for (const auto& packet : arrivals) {
            auto it = stored_.find(packet.origin);
            if (it == stored_.end())
                throw ProtocolViolation("no stored bound for episode " + std::to_string(packet.origin));
            auto est = standard_estimator(packet, it->second.u, params_.gamma);
            diag_.estimate_total += detail::total(est.c_hat);
            for (std::size_t i = 0; i < policies_.size(); ++i)
                loss[i] += estimated_policy_loss(policies_[i], it->second.p_bar, s_init_, est.c_hat);
            last_estimates_.push_back(std::move(est));
            stored_.erase(it);
        }
        for (std::size_t i = 0; i < policies_.size(); ++i)
            log_w_[i] += params_.eta * bonus_[i] - params_.eta * loss[i];
        detail::log_normalize(log_w_);
        for (std::size_t i = 0; i < policies_.size(); ++i)
            weights_[i] = std::exp(log_w_[i]);
    }

    StateActionOccupancy played_occupancy(const MdpSpec& mdp) const override {
        if (true_occupancy_.empty())
            for (const auto& pi : policies_)
                true_occupancy_.push_back(state_action_occupancy(pi, mdp.p, mdp.s_init));
        StateActionOccupancy out(dims_, 0.0);
        auto dst = out.values();
        for (std::size_t i = 0; i < policies_.size(); ++i) {
            auto src = true_occupancy_[i].values();
            for (std::size_t c = 0; c < dst.size(); ++c)
                dst[c] += weights_[i] * src[c];
        }
        return out;
    }

    const std::vector<Policy>& policies() const noexcept { return policies_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& last_bonus() const noexcept { return bonus_; }
    const ConfidenceSet& current_set() const noexcept { return set_; }
    std::size_t current_policy_index() const noexcept { return current_; }
    const std::vector<EstimatedCost>& last_estimates() const noexcept { return last_estimates_; }

private:
    struct Stored {
        UpperOccupancyBound u;
        TransitionTable p_bar;
    };

    Dims dims_;
    int s_init_;
    LearnerParams params_;
    VisitCounters counters_;
    std::vector<Policy> policies_;
    std::vector<double> log_w_;
    std::vector<double> weights_;
    std::vector<double> bonus_;
    ConfidenceSet set_;
    std::map<int, Stored> stored_;
    std::size_t current_ = 0;
    std::vector<EstimatedCost> last_estimates_;
    mutable std::vector<StateActionOccupancy> true_occupancy_;
};

// ---------------------------------------------------------------------------
// Delayed UOB-FTRL

class FtrlLearner final : public Learner {
public:
    FtrlLearner(Dims dims, int s_init, LearnerParams params)
        : dims_(dims), s_init_(s_init), params_(std::move(params)), counters_(dims), cumulative_(dims, 0.0) {
        params_.validate();
        raw_set_ = initial_confidence_set(dims, CounterKind::immediate, params_.delta, params_.K);
        decision_set_ = raw_set_;
        auto sol = solve_ftrl(cumulative_, decision_set_, s_init_, params_.eta, params_.solver);
        q_ = std::move(sol.q);
        duals_ = std::move(sol.duals);
        kkt_ = sol.kkt;
        objective_ = sol.objective;
    }

    LearnerKind kind() const noexcept override { return LearnerKind::uob_ftrl; }

    const Policy& begin_episode(int k, Rng&) override {
        check_order_begin(k);
        policy_ = policy_from_occupancy(q_);
        stored_[k] = comp_uob(policy_, raw_set_, s_init_);
        return policy_;
    }

    void end_episode(int k, const EpisodeTrajectory& own, std::span<const FeedbackPacket> arrivals) override {
        check_order_end(k, arrivals);
        diag_ = {};
        diag_.arrivals = int(arrivals.size());
        counters_.update(own, CounterKind::immediate);
        previous_decision_set_ = decision_set_;
        raw_set_ = build_confidence_set(counters_, CounterKind::immediate, params_.delta, params_.K, k + 1);
        decision_set_ = intersect(decision_set_, raw_set_);
        for (const auto& packet : arrivals) {
            auto it = stored_.find(packet.origin);
            if (it == stored_.end())
                throw ProtocolViolation("no stored bound for episode " + std::to_string(packet.origin));
            auto est = standard_estimator(packet, it->second, params_.gamma);
            diag_.estimate_total += detail::total(est.c_hat);
            detail::add_into(cumulative_, est.c_hat);
            stored_.erase(it);
        }
        auto sol = solve_ftrl(cumulative_, decision_set_, s_init_, params_.eta, params_.solver, &duals_);
        q_ = std::move(sol.q);
        duals_ = std::move(sol.duals);
        kkt_ = sol.kkt;
        objective_ = sol.objective;
        diag_.solver_iterations = sol.diagnostics.iterations;
        diag_.solver_grad_norm = sol.diagnostics.grad_norm;
    }

    StateActionOccupancy played_occupancy(const MdpSpec& mdp) const override {
        return state_action_occupancy(policy_, mdp.p, mdp.s_init);
    }

    const OccupancyMeasure& q() const noexcept { return q_; }
    const ConfidenceSet& decision_set() const noexcept { return decision_set_; }
    const ConfidenceSet& previous_decision_set() const noexcept { return previous_decision_set_; }
    const EstimatedCostTable& cumulative_loss() const noexcept { return cumulative_; }
    const KktReport& kkt() const noexcept { return kkt_; }
    double objective() const noexcept { return objective_; }
    double eta() const noexcept { return params_.eta; }

private:
    Dims dims_;
    int s_init_;
    LearnerParams params_;
    VisitCounters counters_;
    EstimatedCostTable cumulative_;
    ConfidenceSet raw_set_;
    ConfidenceSet decision_set_;
    ConfidenceSet previous_decision_set_;
    OccupancyMeasure q_;
    DualVarsUnknown duals_;
    KktReport kkt_;
    double objective_ = 0.0;
    Policy policy_;
    std::map<int, UpperOccupancyBound> stored_;
};

// ---------------------------------------------------------------------------
// Delayed UOB-REPS

class RepsLearner final : public Learner {
public:
    RepsLearner(Dims dims, int s_init, LearnerParams params)
        : dims_(dims), s_init_(s_init), params_(std::move(params)), counters_(dims) {
        params_.validate();
        set_ = initial_confidence_set(dims, CounterKind::delayed, params_.delta, params_.K);
        q_ = uniform_occupancy(dims, s_init);
    }

    LearnerKind kind() const noexcept override { return LearnerKind::uob_reps; }

    const Policy& begin_episode(int k, Rng&) override {
        check_order_begin(k);
        policy_ = policy_from_occupancy(q_);
        current_u_ = comp_uob(policy_, set_, s_init_);
        stored_[k] = current_u_;
        return policy_;
    }

    void end_episode(int k, const EpisodeTrajectory&, std::span<const FeedbackPacket> arrivals) override {
        check_order_end(k, arrivals);
        diag_ = {};
        diag_.arrivals = int(arrivals.size());
        last_estimates_.clear();
        if (arrivals.empty())
            return;
        EstimatedCostTable batch(dims_, 0.0);
        for (const auto& packet : arrivals) {
            auto it = stored_.find(packet.origin);
            if (it == stored_.end())
                throw ProtocolViolation("no stored bound for episode " + std::to_string(packet.origin));
            auto est = params_.estimator == EstimatorKind::delay_adapted
                           ? delay_adapted_estimator(packet, it->second, current_u_, params_.gamma)
                           : standard_estimator(packet, it->second, params_.gamma);
            detail::add_into(batch, est.c_hat);
            last_estimates_.push_back(std::move(est));
            stored_.erase(it);
            counters_.update(packet.trajectory, CounterKind::delayed);
        }
        diag_.estimate_total = detail::total(batch);
        set_ = build_confidence_set(counters_, CounterKind::delayed, params_.delta, params_.K, k + 1);
        auto sol = solve_omd_unknown(q_, set_, s_init_, batch, params_.eta, params_.solver);
        q_ = std::move(sol.q);
        kkt_ = sol.kkt;
        diag_.solver_iterations = sol.diagnostics.iterations;
        diag_.solver_grad_norm = sol.diagnostics.grad_norm;
    }

    StateActionOccupancy played_occupancy(const MdpSpec& mdp) const override {
        return state_action_occupancy(policy_, mdp.p, mdp.s_init);
    }

    const OccupancyMeasure& q() const noexcept { return q_; }
    const ConfidenceSet& current_set() const noexcept { return set_; }
    const KktReport& kkt() const noexcept { return kkt_; }
    const std::vector<EstimatedCost>& last_estimates() const noexcept { return last_estimates_; }
    const Policy& policy() const noexcept { return policy_; }

private:
    Dims dims_;
    int s_init_;
    LearnerParams params_;
    VisitCounters counters_;
    ConfidenceSet set_;
    OccupancyMeasure q_;
    KktReport kkt_;
    Policy policy_;
    UpperOccupancyBound current_u_;
    std::map<int, UpperOccupancyBound> stored_;
    std::vector<EstimatedCost> last_estimates_;
};

// ---------------------------------------------------------------------------
// Delayed O-REPS with known transitions

class OrepsKnownLearner final : public Learner {
public:
    OrepsKnownLearner(const MdpSpec& mdp, LearnerParams params) : mdp_(mdp), params_(std::move(params)) {
        params_.validate();
        q_ = state_action_occupancy(uniform_policy(mdp.dims), mdp.p, mdp.s_init);
    }

    LearnerKind kind() const noexcept override { return LearnerKind::oreps_known; }

    const Policy& begin_episode(int k, Rng&) override {
        check_order_begin(k);
        policy_ = policy_from_occupancy(q_);
        stored_[k] = q_;
        return policy_;
    }

    void end_episode(int k, const EpisodeTrajectory&, std::span<const FeedbackPacket> arrivals) override {
        check_order_end(k, arrivals);
        diag_ = {};
        diag_.arrivals = int(arrivals.size());
        last_estimates_.clear();
        q_before_ = q_;
        batch_ = EstimatedCostTable(mdp_.dims, 0.0);
        if (arrivals.empty())
            return;
        for (const auto& packet : arrivals) {
            auto it = stored_.find(packet.origin);
            if (it == stored_.end())
                throw ProtocolViolation("no stored occupancy for episode " + std::to_string(packet.origin));
            auto est = params_.estimator == EstimatorKind::delay_adapted
                           ? delay_adapted_estimator(packet, it->second, q_, params_.gamma)
                           : standard_estimator(packet, it->second, params_.gamma);
            detail::add_into(batch_, est.c_hat);
            last_estimates_.push_back(std::move(est));
            stored_.erase(it);
        }
        diag_.estimate_total = detail::total(batch_);
        auto sol = solve_oreps_known(q_, mdp_.p, mdp_.s_init, batch_, params_.eta, params_.solver);
        q_ = std::move(sol.q);
        diag_.solver_iterations = sol.diagnostics.iterations;
        diag_.solver_grad_norm = sol.diagnostics.grad_norm;
    }

    StateActionOccupancy played_occupancy(const MdpSpec& mdp) const override {
        return state_action_occupancy(policy_, mdp.p, mdp.s_init);
    }

    const StateActionOccupancy& q() const noexcept { return q_; }
    /// q^k of the last processed episode and the batch loss applied to it.
    const StateActionOccupancy& q_before() const noexcept { return q_before_; }
    const EstimatedCostTable& last_batch() const noexcept { return batch_; }
    const std::vector<EstimatedCost>& last_estimates() const noexcept { return last_estimates_; }
    double eta() const noexcept { return params_.eta; }

private:
    MdpSpec mdp_;
    LearnerParams params_;
    StateActionOccupancy q_;
    StateActionOccupancy q_before_;
    EstimatedCostTable batch_;
    Policy policy_;
    std::map<int, StateActionOccupancy> stored_;
    std::vector<EstimatedCost> last_estimates_;
};

// ---------------------------------------------------------------------------

/// Oreps-known is the only learner that reads the true transitions.
inline std::unique_ptr<Learner> make_learner(LearnerKind kind, const MdpSpec& mdp, const LearnerParams& params) {
    switch (kind) {
    case LearnerKind::hedge: return std::make_unique<HedgeLearner>(mdp.dims, mdp.s_init, params);
    case LearnerKind::uob_ftrl: return std::make_unique<FtrlLearner>(mdp.dims, mdp.s_init, params);
    case LearnerKind::uob_reps: return std::make_unique<RepsLearner>(mdp.dims, mdp.s_init, params);
    case LearnerKind::oreps_known: return std::make_unique<OrepsKnownLearner>(mdp, params);
    }
    throw InvalidInput("unknown learner kind");
}

}  // namespace dmdp
