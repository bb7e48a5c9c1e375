#pragma once

// Oblivious adversary, episode simulation and the delayed release protocol.

#include "dmdp/mdp.hpp"
#include "dmdp/rng.hpp"
#include "dmdp/tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmdp {

// ---------------------------------------------------------------------------
// Delays

struct DelaySchedule {
    std::vector<int> d;  // d[k-1] is the delay of episode k

    int K() const noexcept { return int(d.size()); }
    int delay(int k) const { return d.at(std::size_t(k - 1)); }

    std::int64_t total_delay() const noexcept {
        std::int64_t total = 0;
        for (int x : d)
            total += x;
        return total;
    }

    int max_delay() const noexcept { return d.empty() ? 0 : *std::max_element(d.begin(), d.end()); }

    /// The analysis assumes d_max <= sqrt(D); schedules breaking it are allowed but flagged.
    bool exceeds_sqrt_total() const noexcept {
        return double(max_delay()) > std::sqrt(double(total_delay()));
    }
};

enum class DelayKind { constant, uniform_random, spike, explicit_list };

struct DelayParams {
    int value = 0;       // constant
    int max = 0;         // uniform_random: d ~ U{0..max}
    int period = 1;      // spike: every period-th episode
    int magnitude = 0;   // spike: delay at spikes
    int base = 0;        // spike: delay elsewhere
    std::vector<int> values{};  // explicit

    bool operator==(const DelayParams&) const = default;
};

inline DelaySchedule generate_delays(DelayKind kind, const DelayParams& params, int K, std::uint64_t seed) {
    if (K < 0)
        throw InvalidInput("K must be nonnegative");
    DelaySchedule out;
    out.d.resize(std::size_t(K), 0);
    switch (kind) {
    case DelayKind::constant:
        if (params.value < 0)
            throw InvalidInput("constant delay must be nonnegative");
        std::fill(out.d.begin(), out.d.end(), params.value);
        break;
    case DelayKind::uniform_random: {
        if (params.max < 0)
            throw InvalidInput("uniform_random max must be nonnegative");
        Rng rng = Rng(seed).split("delays");
        for (auto& x : out.d)
            x = int(rng.uniform_int(std::uint64_t(params.max) + 1));
        break;
    }
    case DelayKind::spike:
        if (params.period <= 0 || params.magnitude < 0 || params.base < 0)
            throw InvalidInput("spike delays need period > 0 and nonnegative magnitude/base");
        for (int k = 1; k <= K; ++k)
            out.d[std::size_t(k - 1)] = (k % params.period == 0) ? params.magnitude : params.base;
        break;
    case DelayKind::explicit_list:
        if (params.values.size() < std::size_t(K))
            throw InvalidInput("explicit delay list shorter than K");
        for (int k = 0; k < K; ++k) {
            if (params.values[std::size_t(k)] < 0)
                throw InvalidInput("explicit delays must be nonnegative");
            out.d[std::size_t(k)] = params.values[std::size_t(k)];
        }
        break;
    }
    return out;
}

/// sum_k sum_i 1{k <= i + d^i < k + d^k}, computed by counting release
/// times inside each half-open window.
inline std::int64_t delay_overlap_count(const DelaySchedule& schedule) {
    const int K = schedule.K();
    std::vector<std::int64_t> release(static_cast<std::size_t>(K));
    for (int i = 1; i <= K; ++i)
        release[std::size_t(i - 1)] = std::int64_t(i) + schedule.delay(i);
    std::sort(release.begin(), release.end());
    std::int64_t total = 0;
    for (int k = 1; k <= K; ++k) {
        const std::int64_t lo = k;
        const std::int64_t hi = std::int64_t(k) + schedule.delay(k);
        if (hi <= lo)
            continue;
        auto first = std::lower_bound(release.begin(), release.end(), lo);
        auto last = std::lower_bound(release.begin(), release.end(), hi);
        total += last - first;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Costs

struct CostSequence {
    std::vector<CostFunction> costs;  // costs[k-1] is c^k

    int K() const noexcept { return int(costs.size()); }
    const CostFunction& at(int k) const { return costs.at(std::size_t(k - 1)); }
};

enum class CostKind { fixed, iid, switching };

struct CostParams {
    int period = 100;            // switching: length of one cycle
    double flip_fraction = 0.3;  // switching: trailing share of each cycle using the mirrored table
    double noise = 0.0;          // switching: uniform jitter amplitude, clipped to [0, 1]
    std::optional<CostFunction> table;  // fixed: explicit table, otherwise drawn from the seed

    bool operator==(const CostParams&) const = default;
};

/// All K cost functions are drawn before the first episode.
inline CostSequence generate_costs(CostKind kind, const CostParams& params, Dims dims, int K, std::uint64_t seed) {
    if (K < 0)
        throw InvalidInput("K must be nonnegative");
    Rng rng = Rng(seed).split("costs");
    auto random_table = [&](Rng& r) {
        CostFunction c(dims);
        for (auto& x : c.values())
            x = r.uniform();
        return c;
    };
    CostSequence out;
    out.costs.reserve(std::size_t(K));
    switch (kind) {
    case CostKind::fixed: {
        CostFunction c = params.table ? *params.table : random_table(rng);
        require_same_dims(c.dims(), dims, "fixed cost table");
        check_cost(c);
        out.costs.assign(std::size_t(K), c);
        break;
    }
    case CostKind::iid:
        for (int k = 0; k < K; ++k)
            out.costs.push_back(random_table(rng));
        break;
    case CostKind::switching: {
        if (params.period <= 0)
            throw InvalidInput("switching period must be positive");
        if (params.noise < 0.0)
            throw InvalidInput("switching noise must be nonnegative");
        if (!(params.flip_fraction >= 0.0 && params.flip_fraction < 0.5))
            throw InvalidInput("switching flip_fraction must lie in [0, 0.5)");
        // The mirrored table reverses every preference. It is active for less
        // than half of each cycle, so the best fixed policy is the one for the
        // base table while the per-phase best keeps changing.
        CostFunction base = random_table(rng);
        CostFunction mirrored(dims);
        for (std::size_t i = 0; i < base.values().size(); ++i)
            mirrored.values()[i] = 1.0 - base.values()[i];
        const int flipped = int(std::floor(params.period * params.flip_fraction));
        Rng jitter = rng.split("jitter");
        for (int k = 1; k <= K; ++k) {
            const int phase = (k - 1) % params.period;
            const bool flip = phase >= params.period - flipped;
            CostFunction c = flip ? mirrored : base;
            if (params.noise > 0.0)
                for (auto& x : c.values())
                    x = std::clamp(x + params.noise * (2.0 * jitter.uniform() - 1.0), 0.0, 1.0);
            out.costs.push_back(std::move(c));
        }
        break;
    }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episodes and feedback

struct EpisodeTrajectory {
    int episode = 0;
    std::vector<int> states;   // s_1 .. s_{H+1}, size H + 1
    std::vector<int> actions;  // a_1 .. a_H, size H

    int H() const noexcept { return int(actions.size()); }
    bool operator==(const EpisodeTrajectory&) const = default;
};

inline EpisodeTrajectory play_episode(const Policy& pi, const MdpSpec& mdp, Rng& rng, int episode = 0) {
    const Dims d = mdp.dims;
    require_same_dims(pi.dims(), d, "policy vs MDP");
    EpisodeTrajectory traj;
    traj.episode = episode;
    traj.states.reserve(std::size_t(d.H) + 1);
    traj.actions.reserve(std::size_t(d.H));
    int s = mdp.s_init;
    traj.states.push_back(s);
    for (int h = 0; h < d.H; ++h) {
        const int a = int(rng.categorical(pi.row(h, s)));
        const int s2 = int(rng.categorical(mdp.p.row(h, s, a)));
        traj.actions.push_back(a);
        traj.states.push_back(s2);
        s = s2;
    }
    return traj;
}

/// Bandit feedback of one episode: only the costs along its own trajectory.
struct FeedbackPacket {
    int origin = 0;
    std::vector<double> costs;  // c^j_h(s^j_h, a^j_h), size H
    EpisodeTrajectory trajectory;
};

inline FeedbackPacket make_packet(const CostFunction& c, EpisodeTrajectory traj) {
    FeedbackPacket packet;
    packet.origin = traj.episode;
    packet.costs.reserve(traj.actions.size());
    for (int h = 0; h < traj.H(); ++h)
        packet.costs.push_back(c(h, traj.states[std::size_t(h)], traj.actions[std::size_t(h)]));
    packet.trajectory = std::move(traj);
    return packet;
}

/// Holds packets until the end of episode origin + delay.
class FeedbackQueue {
public:
    void enqueue(FeedbackPacket packet, int delay) {
        if (delay < 0)
            throw InvalidInput("delay must be nonnegative");
        const int release = packet.origin + delay;
        if (release <= last_query_)
            throw ProtocolViolation("packet for episode " + std::to_string(packet.origin) +
                                    " would be released in the past");
        pending_[release].push_back(std::move(packet));
        ++size_;
    }

    /// Packets {j : j + d^j = k}, in increasing j. Each k may be queried once.
    std::vector<FeedbackPacket> arrivals_at(int k) {
        if (k <= last_query_)
            throw ProtocolViolation("arrivals for episode " + std::to_string(k) + " already released");
        last_query_ = k;
        std::vector<FeedbackPacket> out;
        auto it = pending_.find(k);
        if (it != pending_.end()) {
            out = std::move(it->second);
            pending_.erase(it);
            std::stable_sort(out.begin(), out.end(),
                             [](const FeedbackPacket& x, const FeedbackPacket& y) { return x.origin < y.origin; });
        }
        if (!pending_.empty() && pending_.begin()->first < k)
            throw ProtocolViolation("episode " + std::to_string(pending_.begin()->first) +
                                    " was skipped with packets pending");
        size_ -= out.size();
        return out;
    }

    std::size_t pending() const noexcept { return size_; }

private:
    std::map<int, std::vector<FeedbackPacket>> pending_;
    std::size_t size_ = 0;
    int last_query_ = 0;
};

}  // namespace dmdp
