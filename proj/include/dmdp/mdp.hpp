#pragma once

// Tabular episodic MDPs and occupancy-measure algebra.

#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dmdp {

/// The tuple (S, A, H, p, s_init) of a layered episodic MDP.
struct MdpSpec {
    Dims dims;
    TransitionTable p;
    int s_init = 0;

    bool operator==(const MdpSpec&) const = default;
};

/// V(h, s) for h in [0, H]; V(H, .) is identically zero.
class ValueTable {
public:
    ValueTable() = default;
    explicit ValueTable(Dims dims) : dims_(dims), data_(std::size_t(dims.H + 1) * dims.S, 0.0) {}

    double& operator()(int h, int s) noexcept { return data_[std::size_t(h) * dims_.S + s]; }
    double operator()(int h, int s) const noexcept { return data_[std::size_t(h) * dims_.S + s]; }
    const Dims& dims() const noexcept { return dims_; }

private:
    Dims dims_{};
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Validation

/// Every row nonnegative and summing to one within kStructuralTol.
template <class Tag>
void check_row_stochastic(const TransitionTensor<Tag>& p, const char* what) {
    const Dims& d = p.dims();
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                double total = 0.0;
                for (double x : p.row(h, s, a)) {
                    if (!(x >= 0.0) || !std::isfinite(x))
                        throw InvalidInput(std::string(what) + ": negative or non-finite probability");
                    total += x;
                }
                if (std::abs(total - 1.0) > kStructuralTol)
                    throw InvalidInput(std::string(what) + ": row (h=" + std::to_string(h) + ", s=" +
                                       std::to_string(s) + ", a=" + std::to_string(a) +
                                       ") does not sum to one");
            }
}

inline void check_policy(const Policy& pi) {
    const Dims& d = pi.dims();
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s) {
            double total = 0.0;
            for (double x : pi.row(h, s)) {
                if (!(x >= 0.0) || !std::isfinite(x))
                    throw InvalidInput("policy: negative or non-finite probability");
                total += x;
            }
            if (std::abs(total - 1.0) > kStructuralTol)
                throw InvalidInput("policy: row does not sum to one");
        }
}

inline void check_cost(const CostFunction& c) {
    for (double x : c.values())
        if (!(x >= 0.0 && x <= 1.0))
            throw InvalidInput("cost entries must lie in [0, 1]");
}

inline MdpSpec make_mdp(TransitionTable p, int s_init) {
    const Dims d = p.dims();
    if (!d.valid())
        throw InvalidInput("MDP dimensions must be positive");
    if (s_init < 0 || s_init >= d.S)
        throw InvalidInput("s_init out of range");
    check_row_stochastic(p, "transition");
    return MdpSpec{d, std::move(p), s_init};
}

// ---------------------------------------------------------------------------
// Policies

inline Policy uniform_policy(Dims dims) { return Policy(dims, 1.0 / double(dims.A)); }

/// actions[h * S + s] is the action taken in state s at layer h.
inline Policy deterministic_policy(Dims dims, std::span<const int> actions) {
    if (actions.size() != std::size_t(dims.H) * dims.S)
        throw InvalidInput("deterministic policy needs H*S actions");
    Policy pi(dims, 0.0);
    for (int h = 0; h < dims.H; ++h)
        for (int s = 0; s < dims.S; ++s) {
            const int a = actions[std::size_t(h) * dims.S + s];
            if (a < 0 || a >= dims.A)
                throw InvalidInput("action index out of range");
            pi(h, s, a) = 1.0;
        }
    return pi;
}

inline Policy random_policy(Dims dims, Rng& rng, double alpha = 1.0) {
    Policy pi(dims);
    for (int h = 0; h < dims.H; ++h)
        for (int s = 0; s < dims.S; ++s) {
            auto w = rng.dirichlet(std::size_t(dims.A), alpha);
            std::copy(w.begin(), w.end(), pi.row(h, s).begin());
        }
    return pi;
}

// ---------------------------------------------------------------------------
// Occupancy measures

/// Forward induction for q(h, s, a, s') = Pr[s_h = s, a_h = a, s_{h+1} = s'].
/// The transition rows are not required to be stochastic: empirical
/// transitions with unvisited (all-zero) rows are valid inputs.
template <class PTag>
OccupancyMeasure occupancy_from(const Policy& pi, const TransitionTensor<PTag>& p, int s_init) {
    const Dims d = p.dims();
    require_same_dims(pi.dims(), d, "policy vs transition");
    if (s_init < 0 || s_init >= d.S)
        throw InvalidInput("s_init out of range");
    OccupancyMeasure q(d, 0.0);
    std::vector<double> reach(std::size_t(d.S), 0.0), next(std::size_t(d.S));
    reach[std::size_t(s_init)] = 1.0;
    for (int h = 0; h < d.H; ++h) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < d.S; ++s) {
            if (reach[std::size_t(s)] == 0.0)
                continue;
            for (int a = 0; a < d.A; ++a) {
                const double w = reach[std::size_t(s)] * pi(h, s, a);
                if (w == 0.0)
                    continue;
                for (int s2 = 0; s2 < d.S; ++s2) {
                    const double m = w * p(h, s, a, s2);
                    q(h, s, a, s2) = m;
                    next[std::size_t(s2)] += m;
                }
            }
        }
        reach.swap(next);
    }
    return q;
}

inline StateActionOccupancy marginal(const OccupancyMeasure& q) {
    const Dims d = q.dims();
    StateActionOccupancy out(d, 0.0);
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                double total = 0.0;
                for (double x : q.row(h, s, a))
                    total += x;
                out(h, s, a) = total;
            }
    return out;
}

template <class PTag>
StateActionOccupancy state_action_occupancy(const Policy& pi, const TransitionTensor<PTag>& p, int s_init) {
    return marginal(occupancy_from(pi, p, s_init));
}

/// pi(a|s) = q(s,a) / q(s); rows with zero mass become uniform.
inline Policy policy_from_occupancy(const StateActionOccupancy& q) {
    const Dims d = q.dims();
    Policy pi(d, 0.0);
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s) {
            double total = 0.0;
            for (double x : q.row(h, s))
                total += x;
            auto out = pi.row(h, s);
            if (total > 0.0) {
                auto in = q.row(h, s);
                for (int a = 0; a < d.A; ++a)
                    out[std::size_t(a)] = in[std::size_t(a)] / total;
            } else {
                std::fill(out.begin(), out.end(), 1.0 / double(d.A));
            }
        }
    return pi;
}

inline Policy policy_from_occupancy(const OccupancyMeasure& q) { return policy_from_occupancy(marginal(q)); }

/// p'(s'|s,a) = q(s,a,s') / q(s,a); zero-mass rows become uniform.
inline TransitionTable transition_from_occupancy(const OccupancyMeasure& q) {
    const Dims d = q.dims();
    TransitionTable p(d, 0.0);
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                auto in = q.row(h, s, a);
                auto out = p.row(h, s, a);
                double total = 0.0;
                for (double x : in)
                    total += x;
                if (total > 0.0) {
                    for (int s2 = 0; s2 < d.S; ++s2)
                        out[std::size_t(s2)] = in[std::size_t(s2)] / total;
                } else {
                    std::fill(out.begin(), out.end(), 1.0 / double(d.S));
                }
            }
    return p;
}

// ---------------------------------------------------------------------------
// Values

/// Backward induction. Accepts sub-stochastic transitions (see occupancy_from).
template <class PTag, class CTag>
ValueTable evaluate_policy(const Policy& pi, const TransitionTensor<PTag>& p, const StateActionTable<CTag>& c) {
    const Dims d = p.dims();
    require_same_dims(pi.dims(), d, "policy vs transition");
    require_same_dims(c.dims(), d, "cost vs transition");
    ValueTable v(d);
    for (int h = d.H - 1; h >= 0; --h)
        for (int s = 0; s < d.S; ++s) {
            double total = 0.0;
            for (int a = 0; a < d.A; ++a) {
                const double w = pi(h, s, a);
                if (w == 0.0)
                    continue;
                double cont = 0.0;
                for (int s2 = 0; s2 < d.S; ++s2)
                    cont += p(h, s, a, s2) * v(h + 1, s2);
                total += w * (c(h, s, a) + cont);
            }
            v(h, s) = total;
        }
    return v;
}

inline ValueTable value_of(const Policy& pi, const TransitionTable& p, const CostFunction& c) {
    check_policy(pi);
    check_row_stochastic(p, "transition");
    return evaluate_policy(pi, p, c);
}

// ---------------------------------------------------------------------------
// Membership in the occupancy polytope

enum class OccupancyViolationKind { negative, normalization, flow, initial_support };

struct OccupancyViolation {
    OccupancyViolationKind kind;
    int h = 0;
    int s = -1;
    double magnitude = 0.0;
};

inline const char* to_string(OccupancyViolationKind k) {
    switch (k) {
    case OccupancyViolationKind::negative: return "negative";
    case OccupancyViolationKind::normalization: return "normalization";
    case OccupancyViolationKind::flow: return "flow";
    case OccupancyViolationKind::initial_support: return "initial_support";
    }
    return "unknown";
}

/// Lists every violated invariant; empty iff q is a valid occupancy measure within tol.
inline std::vector<OccupancyViolation> validate_occupancy(const OccupancyMeasure& q, int s_init, double tol) {
    const Dims d = q.dims();
    std::vector<OccupancyViolation> report;
    double worst_negative = 0.0;
    int negative_layer = 0;
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a)
                for (double x : q.row(h, s, a))
                    if (-x > worst_negative) {
                        worst_negative = -x;
                        negative_layer = h;
                    }
    if (worst_negative > tol)
        report.push_back({OccupancyViolationKind::negative, negative_layer, -1, worst_negative});

    for (int h = 0; h < d.H; ++h) {
        double total = 0.0;
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a)
                for (double x : q.row(h, s, a))
                    total += x;
        if (std::abs(total - 1.0) > tol)
            report.push_back({OccupancyViolationKind::normalization, h, -1, std::abs(total - 1.0)});
    }

    for (int s = 0; s < d.S; ++s) {
        if (s == s_init)
            continue;
        double mass = 0.0;
        for (int a = 0; a < d.A; ++a)
            for (double x : q.row(0, s, a))
                mass += std::abs(x);
        if (mass > tol)
            report.push_back({OccupancyViolationKind::initial_support, 0, s, mass});
    }

    for (int h = 0; h + 1 < d.H; ++h)
        for (int s2 = 0; s2 < d.S; ++s2) {
            double in = 0.0, out = 0.0;
            for (int s = 0; s < d.S; ++s)
                for (int a = 0; a < d.A; ++a)
                    in += q(h, s, a, s2);
            for (int a = 0; a < d.A; ++a)
                for (double x : q.row(h + 1, s2, a))
                    out += x;
            if (std::abs(in - out) > tol)
                report.push_back({OccupancyViolationKind::flow, h, s2, std::abs(in - out)});
        }
    return report;
}

/// Largest flow-conservation residual of a state-action occupancy under known p.
inline double known_flow_residual(const StateActionOccupancy& q, const TransitionTable& p, int s_init) {
    const Dims d = q.dims();
    double worst = 0.0;
    for (int s = 0; s < d.S; ++s) {
        double mass = 0.0;
        for (double x : q.row(0, s))
            mass += x;
        worst = std::max(worst, std::abs(mass - (s == s_init ? 1.0 : 0.0)));
    }
    for (int h = 0; h + 1 < d.H; ++h)
        for (int s2 = 0; s2 < d.S; ++s2) {
            double in = 0.0, out = 0.0;
            for (int s = 0; s < d.S; ++s)
                for (int a = 0; a < d.A; ++a)
                    in += q(h, s, a) * p(h, s, a, s2);
            for (double x : q.row(h + 1, s2))
                out += x;
            worst = std::max(worst, std::abs(in - out));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Divergence

/// sum q log(q/q') + q' - q over all cells. Returns +infinity when q puts
/// mass where q' has none.
template <class Table>
double unnormalized_kl(const Table& q, const Table& q_ref) {
    require_same_dims(q.dims(), q_ref.dims(), "kl arguments");
    auto x = q.values();
    auto y = q_ref.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
            if (y[i] <= 0.0)
                return std::numeric_limits<double>::infinity();
            acc += x[i] * std::log(x[i] / y[i]);
        }
        acc += y[i] - x[i];
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Generators and serialization

/// Layered MDP whose rows are Dirichlet(alpha) draws.
inline MdpSpec random_layered_mdp(Dims dims, std::uint64_t seed, double alpha = 1.0, int s_init = 0) {
    if (!dims.valid())
        throw InvalidInput("MDP dimensions must be positive");
    Rng rng = Rng(seed).split("layered-random");
    TransitionTable p(dims);
    for (int h = 0; h < dims.H; ++h)
        for (int s = 0; s < dims.S; ++s)
            for (int a = 0; a < dims.A; ++a) {
                auto w = rng.dirichlet(std::size_t(dims.S), alpha);
                double total = 0.0;
                for (int s2 = 0; s2 + 1 < dims.S; ++s2) {
                    p(h, s, a, s2) = w[std::size_t(s2)];
                    total += w[std::size_t(s2)];
                }
                p(h, s, a, dims.S - 1) = std::max(0.0, 1.0 - total);
            }
    return make_mdp(std::move(p), s_init);
}

inline nlohmann::json mdp_to_json(const MdpSpec& mdp) {
    const Dims d = mdp.dims;
    nlohmann::json p = nlohmann::json::array();
    for (int h = 0; h < d.H; ++h) {
        nlohmann::json layer = nlohmann::json::array();
        for (int s = 0; s < d.S; ++s) {
            nlohmann::json state = nlohmann::json::array();
            for (int a = 0; a < d.A; ++a) {
                auto row = mdp.p.row(h, s, a);
                state.push_back(std::vector<double>(row.begin(), row.end()));
            }
            layer.push_back(std::move(state));
        }
        p.push_back(std::move(layer));
    }
    return {{"S", d.S}, {"A", d.A}, {"H", d.H}, {"s_init", mdp.s_init}, {"p", std::move(p)}};
}

inline MdpSpec mdp_from_json(const nlohmann::json& j) {
    try {
        Dims d{j.at("S").get<int>(), j.at("A").get<int>(), j.at("H").get<int>()};
        if (!d.valid())
            throw InvalidInput("MDP dimensions must be positive");
        const auto& p = j.at("p");
        if (!p.is_array() || p.size() != std::size_t(d.H))
            throw InvalidInput("p must have H layers");
        TransitionTable table(d);
        for (int h = 0; h < d.H; ++h) {
            const auto& layer = p[std::size_t(h)];
            if (!layer.is_array() || layer.size() != std::size_t(d.S))
                throw InvalidInput("p layer must have S states");
            for (int s = 0; s < d.S; ++s) {
                const auto& state = layer[std::size_t(s)];
                if (!state.is_array() || state.size() != std::size_t(d.A))
                    throw InvalidInput("p state must have A actions");
                for (int a = 0; a < d.A; ++a) {
                    const auto& row = state[std::size_t(a)];
                    if (!row.is_array() || row.size() != std::size_t(d.S))
                        throw InvalidInput("p row must have S entries");
                    for (int s2 = 0; s2 < d.S; ++s2)
                        table(h, s, a, s2) = row[std::size_t(s2)].get<double>();
                }
            }
        }
        return make_mdp(std::move(table), j.at("s_init").get<int>());
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed MDP JSON: ") + e.what());
    }
}

}  // namespace dmdp
