#pragma once

// Visit counters and Bernstein-style interval confidence sets over
// transition functions.

#include "dmdp/adversary.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace dmdp {

/// immediate: n-counters, trajectory of episode k counted at its end.
/// delayed:   m-counters, trajectory counted when its feedback arrives.
enum class CounterKind { immediate, delayed };

class VisitCounters {
public:
    VisitCounters() = default;
    explicit VisitCounters(Dims dims)
        : n_sa_(dims, 0), n_sas_(dims, 0), m_sa_(dims, 0), m_sas_(dims, 0) {}

    const Dims& dims() const noexcept { return n_sa_.dims(); }

    void update(const EpisodeTrajectory& traj, CounterKind kind) {
        const Dims d = dims();
        if (traj.H() != d.H || traj.states.size() != std::size_t(d.H) + 1)
            throw InvalidInput("trajectory length does not match horizon");
        auto& sa = kind == CounterKind::immediate ? n_sa_ : m_sa_;
        auto& sas = kind == CounterKind::immediate ? n_sas_ : m_sas_;
        for (int h = 0; h < d.H; ++h) {
            const int s = traj.states[std::size_t(h)];
            const int a = traj.actions[std::size_t(h)];
            const int s2 = traj.states[std::size_t(h) + 1];
            sa(h, s, a) += 1;
            sas(h, s, a, s2) += 1;
        }
    }

    std::int64_t count(CounterKind kind, int h, int s, int a) const noexcept {
        return kind == CounterKind::immediate ? n_sa_(h, s, a) : m_sa_(h, s, a);
    }
    std::int64_t count(CounterKind kind, int h, int s, int a, int s2) const noexcept {
        return kind == CounterKind::immediate ? n_sas_(h, s, a, s2) : m_sas_(h, s, a, s2);
    }

private:
    StateActionTable<CountTag, std::int64_t> n_sa_;
    TransitionTensor<CountTag, std::int64_t> n_sas_;
    StateActionTable<CountTag, std::int64_t> m_sa_;
    TransitionTensor<CountTag, std::int64_t> m_sas_;
};

inline void update_counts(VisitCounters& counters, const EpisodeTrajectory& traj, CounterKind kind) {
    counters.update(traj, kind);
}

/// Interval box |p'(s'|s,a) - center(s'|s,a)| <= radius(s'|s,a) intersected
/// with the row-stochastic transitions.
struct ConfidenceSet {
    TransitionTable center;
    RadiusTable radius;
    CounterKind counter_kind = CounterKind::immediate;
    double delta = 0.1;
    int episode = 1;

    const Dims& dims() const noexcept { return center.dims(); }

    double lower(int h, int s, int a, int s2) const noexcept {
        return std::max(0.0, center(h, s, a, s2) - radius(h, s, a, s2));
    }
    double upper(int h, int s, int a, int s2) const noexcept {
        return std::min(1.0, center(h, s, a, s2) + radius(h, s, a, s2));
    }
};

/// log(10 H S A K / delta), shared by every radius.
inline double confidence_log_term(Dims dims, int K, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw InvalidInput("delta must lie in (0, 1)");
    if (K <= 0)
        throw InvalidInput("K must be positive");
    return std::log(10.0 * dims.H * dims.S * dims.A * double(K) / delta);
}

inline double confidence_radius(double p_bar, std::int64_t count, double log_term) {
    const double n = double(std::max<std::int64_t>(count, 1));
    return std::sqrt(16.0 * p_bar * log_term / n) + 10.0 * log_term / n;
}

/// The set of episode k from the chosen counter family.
inline ConfidenceSet build_confidence_set(const VisitCounters& counters, CounterKind kind, double delta, int K,
                                          int k) {
    const Dims d = counters.dims();
    const double log_term = confidence_log_term(d, K, delta);
    ConfidenceSet set{TransitionTable(d, 0.0), RadiusTable(d, 0.0), kind, delta, k};
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                const std::int64_t n = counters.count(kind, h, s, a);
                const double denom = double(std::max<std::int64_t>(n, 1));
                for (int s2 = 0; s2 < d.S; ++s2) {
                    const double p_bar = double(counters.count(kind, h, s, a, s2)) / denom;
                    set.center(h, s, a, s2) = p_bar;
                    set.radius(h, s, a, s2) = confidence_radius(p_bar, n, log_term);
                }
            }
    return set;
}

/// No observations yet: every transition function is a member.
inline ConfidenceSet initial_confidence_set(Dims dims, CounterKind kind, double delta, int K) {
    return build_confidence_set(VisitCounters(dims), kind, delta, K, 1);
}

/// {p} exactly.
inline ConfidenceSet singleton_confidence_set(const TransitionTable& p) {
    return ConfidenceSet{p, RadiusTable(p.dims(), 0.0), CounterKind::immediate, 0.5, 1};
}

/// Box wide enough to hold every transition function.
inline ConfidenceSet trivial_confidence_set(Dims dims) {
    return ConfidenceSet{TransitionTable(dims, 0.0), RadiusTable(dims, 1.0), CounterKind::immediate, 0.5, 1};
}

inline bool contains(const ConfidenceSet& set, const TransitionTable& p, double tol = kStructuralTol) {
    const Dims d = set.dims();
    require_same_dims(p.dims(), d, "transition vs confidence set");
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                double total = 0.0;
                for (int s2 = 0; s2 < d.S; ++s2) {
                    const double x = p(h, s, a, s2);
                    if (x < -tol)
                        return false;
                    if (std::abs(x - set.center(h, s, a, s2)) > set.radius(h, s, a, s2) + tol)
                        return false;
                    total += x;
                }
                if (std::abs(total - 1.0) > tol)
                    return false;
            }
    return true;
}

/// Throws StructuralError if some row of the box admits no distribution.
inline void check_nonempty(const ConfidenceSet& set) {
    const Dims d = set.dims();
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                double lo = 0.0, hi = 0.0;
                for (int s2 = 0; s2 < d.S; ++s2) {
                    if (set.lower(h, s, a, s2) > set.upper(h, s, a, s2) + kStructuralTol)
                        throw StructuralError("confidence set has an empty interval");
                    lo += set.lower(h, s, a, s2);
                    hi += set.upper(h, s, a, s2);
                }
                if (lo > 1.0 + kStructuralTol || hi < 1.0 - kStructuralTol)
                    throw StructuralError("confidence set row admits no distribution");
            }
}

/// Entrywise interval intersection; the result's center is the midpoint.
inline ConfidenceSet intersect(const ConfidenceSet& x, const ConfidenceSet& y) {
    const Dims d = x.dims();
    require_same_dims(y.dims(), d, "confidence set intersection");
    ConfidenceSet out{TransitionTable(d), RadiusTable(d), y.counter_kind, y.delta, std::max(x.episode, y.episode)};
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a)
                for (int s2 = 0; s2 < d.S; ++s2) {
                    const double cx = x.center(h, s, a, s2), rx = x.radius(h, s, a, s2);
                    const double cy = y.center(h, s, a, s2), ry = y.radius(h, s, a, s2);
                    if (rx <= ry && std::abs(cx - cy) <= ry - rx) {  // x inside y
                        out.center(h, s, a, s2) = cx;
                        out.radius(h, s, a, s2) = rx;
                        continue;
                    }
                    if (ry <= rx && std::abs(cx - cy) <= rx - ry) {  // y inside x
                        out.center(h, s, a, s2) = cy;
                        out.radius(h, s, a, s2) = ry;
                        continue;
                    }
                    const double lo = std::max(cx - rx, cy - ry);
                    const double hi = std::min(cx + rx, cy + ry);
                    if (lo > hi)
                        throw StructuralError("confidence set intersection is empty");
                    out.center(h, s, a, s2) = 0.5 * (lo + hi);
                    out.radius(h, s, a, s2) = 0.5 * (hi - lo);
                }
    check_nonempty(out);
    return out;
}

/// Random member: Dirichlet draw clipped into the box, then the residual
/// mass is spread over the remaining slack so the row sums to one.
inline TransitionTable sample_member(const ConfidenceSet& set, Rng& rng, int max_rounds = 100) {
    const Dims d = set.dims();
    check_nonempty(set);
    TransitionTable p(d);
    std::vector<double> x(std::size_t(d.S)), lo(std::size_t(d.S)), hi(std::size_t(d.S));
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                for (int s2 = 0; s2 < d.S; ++s2) {
                    lo[std::size_t(s2)] = set.lower(h, s, a, s2);
                    hi[std::size_t(s2)] = std::max(lo[std::size_t(s2)], set.upper(h, s, a, s2));
                }
                bool done = false;
                for (int round = 0; round < max_rounds && !done; ++round) {
                    auto w = rng.dirichlet(std::size_t(d.S), 0.5);
                    for (int s2 = 0; s2 < d.S; ++s2)
                        x[std::size_t(s2)] = std::clamp(w[std::size_t(s2)], lo[std::size_t(s2)], hi[std::size_t(s2)]);
                    for (int pass = 0; pass < 4; ++pass) {
                        double total = 0.0;
                        for (double v : x)
                            total += v;
                        const double gap = 1.0 - total;
                        if (std::abs(gap) <= 1e-14)
                            break;
                        double slack = 0.0;
                        for (int s2 = 0; s2 < d.S; ++s2)
                            slack += gap > 0 ? hi[std::size_t(s2)] - x[std::size_t(s2)]
                                             : x[std::size_t(s2)] - lo[std::size_t(s2)];
                        if (slack <= 0.0)
                            break;
                        const double frac = std::min(1.0, std::abs(gap) / slack);
                        for (int s2 = 0; s2 < d.S; ++s2) {
                            const double room = gap > 0 ? hi[std::size_t(s2)] - x[std::size_t(s2)]
                                                        : x[std::size_t(s2)] - lo[std::size_t(s2)];
                            x[std::size_t(s2)] += (gap > 0 ? 1.0 : -1.0) * frac * room;
                        }
                    }
                    double total = 0.0;
                    bool inside = true;
                    for (int s2 = 0; s2 < d.S; ++s2) {
                        total += x[std::size_t(s2)];
                        inside = inside &&
                                 std::abs(x[std::size_t(s2)] - set.center(h, s, a, s2)) <= set.radius(h, s, a, s2);
                    }
                    if (inside && std::abs(total - 1.0) <= 1e-10) {
                        // Fold the rounding residue into the largest entry with room.
                        const double residue = 1.0 - total;
                        int best = 0;
                        for (int s2 = 1; s2 < d.S; ++s2)
                            if (x[std::size_t(s2)] > x[std::size_t(best)])
                                best = s2;
                        x[std::size_t(best)] += residue;
                        done = true;
                    }
                }
                if (!done)
                    throw StructuralError("sample_member failed: confidence set row is too tight");
                std::copy(x.begin(), x.end(), p.row(h, s, a).begin());
            }
    return p;
}

/// Largest violation of |q(s,a,s') - center q(s,a)| <= radius q(s,a) over all cells.
inline double occupancy_confidence_violation(const OccupancyMeasure& q, const ConfidenceSet& set) {
    const Dims d = q.dims();
    require_same_dims(set.dims(), d, "occupancy vs confidence set");
    double worst = 0.0;
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a) {
                double mass = 0.0;
                for (double x : q.row(h, s, a))
                    mass += x;
                for (int s2 = 0; s2 < d.S; ++s2) {
                    const double dev = std::abs(q(h, s, a, s2) - set.center(h, s, a, s2) * mass);
                    worst = std::max(worst, dev - set.radius(h, s, a, s2) * mass);
                }
            }
    return worst;
}

}  // namespace dmdp
