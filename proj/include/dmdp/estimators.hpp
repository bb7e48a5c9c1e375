#pragma once

// Importance-weighted loss estimators built from bandit feedback packets.

#include "dmdp/adversary.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/tables.hpp"

#include <algorithm>
#include <cmath>

namespace dmdp {

enum class EstimatorKind { standard, delay_adapted };

inline const char* to_string(EstimatorKind k) {
    return k == EstimatorKind::standard ? "standard" : "delay_adapted";
}

struct EstimatedCost {
    EstimatedCostTable c_hat;
    int origin = 0;
    EstimatorKind kind = EstimatorKind::standard;
};

namespace detail {

inline void check_gamma(double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw InvalidInput("gamma must be positive and finite");
}

inline void check_packet(const FeedbackPacket& packet, Dims d) {
    const auto& traj = packet.trajectory;
    if (traj.H() != d.H || traj.states.size() != std::size_t(d.H) + 1 || packet.costs.size() != std::size_t(d.H))
        throw InvalidInput("feedback packet does not match the horizon");
}

template <class DenomFn>
EstimatedCost build_estimate(const FeedbackPacket& packet, Dims d, double gamma, EstimatorKind kind,
                             DenomFn&& denominator) {
    check_gamma(gamma);
    check_packet(packet, d);
    EstimatedCost out{EstimatedCostTable(d, 0.0), packet.origin, kind};
    for (int h = 0; h < d.H; ++h) {
        const int s = packet.trajectory.states[std::size_t(h)];
        const int a = packet.trajectory.actions[std::size_t(h)];
        out.c_hat(h, s, a) = packet.costs[std::size_t(h)] / (denominator(h, s, a) + gamma);
    }
    return out;
}

}  // namespace detail

/// c_h(s,a) 1{visited} / (u_h(s,a) + gamma). The table may be a UOB, a
/// mixture UOB or a known-transition occupancy.
template <class Tag>
EstimatedCost standard_estimator(const FeedbackPacket& packet, const StateActionTable<Tag>& u, double gamma) {
    return detail::build_estimate(packet, u.dims(), gamma, EstimatorKind::standard,
                                  [&](int h, int s, int a) { return u(h, s, a); });
}

/// As standard_estimator with denominator max(u_origin, u_arrival) + gamma.
template <class Tag>
EstimatedCost delay_adapted_estimator(const FeedbackPacket& packet, const StateActionTable<Tag>& u_origin,
                                      const StateActionTable<Tag>& u_arrival, double gamma) {
    require_same_dims(u_origin.dims(), u_arrival.dims(), "origin vs arrival bound");
    return detail::build_estimate(packet, u_origin.dims(), gamma, EstimatorKind::delay_adapted,
                                  [&](int h, int s, int a) { return std::max(u_origin(h, s, a), u_arrival(h, s, a)); });
}

/// <q^{pi, p_bar}, c_hat>, evaluated by backward induction (p_bar may have
/// all-zero rows for unvisited pairs).
inline double estimated_policy_loss(const Policy& pi, const TransitionTable& p_bar, int s_init,
                                    const EstimatedCostTable& c_hat) {
    return evaluate_policy(pi, p_bar, c_hat)(0, s_init);
}

}  // namespace dmdp
