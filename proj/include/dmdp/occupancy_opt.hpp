#pragma once

// Optimization over occupancy-measure polytopes: upper occupancy bounds and
// the entropic mirror-descent / FTRL updates, solved through their duals.

#include "dmdp/confidence.hpp"
#include "dmdp/detail/spg.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dmdp {

struct SolverConfig {
    double grad_tol = 1e-8;
    int max_iterations = 5000;
    double armijo = 1e-4;
    double backtrack = 0.5;
    double feas_tol = 1e-6;

    bool operator==(const SolverConfig&) const = default;

    void validate() const {
        if (!(grad_tol > 0.0 && max_iterations > 0 && armijo > 0.0 && armijo < 1.0 && backtrack > 0.0 &&
              backtrack < 1.0 && feas_tol > 0.0))
            throw InvalidInput("solver configuration values must be positive (armijo, backtrack in (0,1))");
    }

    detail::SpgOptions spg() const {
        detail::SpgOptions o;
        o.grad_tol = grad_tol;
        o.max_iterations = max_iterations;
        o.armijo = armijo;
        o.backtrack = backtrack;
        return o;
    }
};

struct SolverDiagnostics {
    int iterations = 0;
    double grad_norm = 0.0;
    double dual_objective = 0.0;  // sum_h log Z_h at the returned duals
    bool converged = true;
};

/// Primal feasibility and complementary slackness of a returned solution.
struct KktReport {
    double flow_residual = 0.0;
    double confidence_violation = 0.0;
    double complementary_slackness = 0.0;
    double normalization = 0.0;

    double worst() const noexcept {
        return std::max({flow_residual, confidence_violation, complementary_slackness, normalization});
    }
};

// ---------------------------------------------------------------------------
// Upper occupancy bounds

namespace detail {

inline constexpr double kLogFloor = 1e-300;

/// max sum_s' p'(s') f(s') over the box row intersected with the simplex;
/// `order` lists successors by decreasing f.
inline double max_row_value(const ConfidenceSet& set, int h, int s, int a, std::span<const double> f,
                            std::span<const int> order) {
    const int S = set.dims().S;
    double value = 0.0;
    double remaining = 1.0;
    for (int s2 = 0; s2 < S; ++s2) {
        const double lo = set.lower(h, s, a, s2);
        value += lo * f[std::size_t(s2)];
        remaining -= lo;
    }
    for (int idx : order) {
        if (remaining <= 0.0)
            break;
        const double room = std::max(0.0, set.upper(h, s, a, idx) - set.lower(h, s, a, idx));
        const double add = std::min(room, remaining);
        value += add * f[std::size_t(idx)];
        remaining -= add;
    }
    return value;
}

}  // namespace detail

/// u(h,s,a) = max over p' in the set of q^{pi,p'}(h,s,a), via one backward
/// greedy program per target (h, s).
inline UpperOccupancyBound comp_uob(const Policy& pi, const ConfidenceSet& set, int s_init) {
    const Dims d = set.dims();
    require_same_dims(pi.dims(), d, "policy vs confidence set");
    check_nonempty(set);
    UpperOccupancyBound u(d, 0.0);
    std::vector<double> f(std::size_t(d.S)), g(std::size_t(d.S));
    std::vector<int> order(std::size_t(d.S));
    for (int target_h = 0; target_h < d.H; ++target_h)
        for (int target_s = 0; target_s < d.S; ++target_s) {
            std::fill(f.begin(), f.end(), 0.0);
            f[std::size_t(target_s)] = 1.0;
            for (int h = target_h - 1; h >= 0; --h) {
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](int x, int y) { return f[std::size_t(x)] > f[std::size_t(y)]; });
                for (int s = 0; s < d.S; ++s) {
                    double total = 0.0;
                    for (int a = 0; a < d.A; ++a) {
                        const double w = pi(h, s, a);
                        if (w == 0.0)
                            continue;
                        total += w * detail::max_row_value(set, h, s, a, f, order);
                    }
                    g[std::size_t(s)] = total;
                }
                f.swap(g);
            }
            const double reach = std::min(1.0, f[std::size_t(s_init)]);
            for (int a = 0; a < d.A; ++a)
                u(target_h, target_s, a) = reach * pi(target_h, target_s, a);
        }
    return u;
}

/// Sum over policies of weight * per-policy bound. Dominates the coupled
/// maximum over a shared transition.
inline UpperOccupancyBound mixture_uob(std::span<const double> weights, std::span<const UpperOccupancyBound> uobs) {
    if (weights.size() != uobs.size() || uobs.empty())
        throw InvalidInput("mixture_uob needs one bound per weight");
    UpperOccupancyBound out(uobs.front().dims(), 0.0);
    auto dst = out.values();
    for (std::size_t i = 0; i < uobs.size(); ++i) {
        if (weights[i] == 0.0)
            continue;
        auto src = uobs[i].values();
        for (std::size_t c = 0; c < dst.size(); ++c)
            dst[c] += weights[i] * src[c];
    }
    for (auto& x : dst)
        x = std::min(x, 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Known transitions

/// v(h, s) for h in [0, H]; layers 0 and H are pinned to zero.
struct DualVarsKnown {
    Dims dims;
    std::vector<double> v;

    double operator()(int h, int s) const noexcept { return v[std::size_t(h) * dims.S + s]; }
};

struct KnownSolution {
    StateActionOccupancy q;
    DualVarsKnown duals;
    SolverDiagnostics diagnostics;
};

/// eta <q, loss> + KL(q || q_prev).
template <class Table, class LossTag>
double omd_objective(const Table& q, const Table& q_prev, const StateActionTable<LossTag>& loss, double eta) {
    const Dims d = q.dims();
    double lin = 0.0;
    if constexpr (std::is_same_v<Table, OccupancyMeasure>) {
        const auto qm = marginal(q);
        lin = inner(qm, loss);
    } else {
        lin = inner(q, loss);
    }
    (void)d;
    return eta * lin + unnormalized_kl(q, q_prev);
}

namespace detail {

inline double log_sum_exp(std::span<const double> z) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : z)
        m = std::max(m, x);
    if (!std::isfinite(m))
        return m;
    double acc = 0.0;
    for (double x : z)
        acc += std::exp(x - m);
    return m + std::log(acc);
}

/// Closed-form primal point and gradient for the known-transition dual.
class KnownDual {
public:
    KnownDual(const StateActionOccupancy& q_prev, const TransitionTable& p, int s_init,
              const EstimatedCostTable& loss, double eta)
        : d_(p.dims()), p_(p), loss_(loss), eta_(eta), log_q_(d_, 0.0), support_(d_, 0), q_(d_, 0.0) {
        for (int h = 0; h < d_.H; ++h)
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a) {
                    const bool allowed = h > 0 || s == s_init;
                    if (allowed && q_prev(h, s, a) > 0.0) {
                        support_(h, s, a) = 1;
                        log_q_(h, s, a) = std::log(std::max(q_prev(h, s, a), kLogFloor));
                    }
                }
    }

    std::size_t size() const noexcept { return std::size_t(std::max(d_.H - 1, 0)) * d_.S; }

    double v(std::span<const double> x, int h, int s) const noexcept {
        if (h <= 0 || h >= d_.H)
            return 0.0;
        return x[std::size_t(h - 1) * d_.S + s];
    }

    double operator()(std::span<const double> x, std::span<double> grad) {
        double f = 0.0;
        std::vector<double> z;
        for (int h = 0; h < d_.H; ++h) {
            z.clear();
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a) {
                    if (!support_(h, s, a))
                        continue;
                    double b = v(x, h, s) - eta_ * loss_(h, s, a);
                    if (h + 1 < d_.H)
                        for (int s2 = 0; s2 < d_.S; ++s2)
                            b -= p_(h, s, a, s2) * v(x, h + 1, s2);
                    z.push_back(log_q_(h, s, a) + b);
                }
            const double log_z = log_sum_exp(z);
            f += log_z;
            std::size_t idx = 0;
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a)
                    q_(h, s, a) = support_(h, s, a) ? std::max(std::exp(z[idx++] - log_z), kLogFloor) : 0.0;
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int h = 1; h < d_.H; ++h)
            for (int s = 0; s < d_.S; ++s) {
                double out = 0.0;
                for (double qv : q_.row(h, s))
                    out += qv;
                double in = 0.0;
                for (int s0 = 0; s0 < d_.S; ++s0)
                    for (int a0 = 0; a0 < d_.A; ++a0)
                        in += q_(h - 1, s0, a0) * p_(h - 1, s0, a0, s);
                grad[std::size_t(h - 1) * d_.S + s] = out - in;
            }
        return f;
    }

    const StateActionOccupancy& q() const noexcept { return q_; }
    const StateActionTable<SaOccupancyTag, char>& support() const noexcept { return support_; }

private:
    Dims d_;
    const TransitionTable& p_;
    const EstimatedCostTable& loss_;
    double eta_;
    StateActionOccupancy log_q_;
    StateActionTable<SaOccupancyTag, char> support_;
    StateActionOccupancy q_;
};

inline bool all_zero(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

}  // namespace detail

/// argmin over occupancy measures of (M, p) of eta <q, loss> + KL(q || q_prev).
inline KnownSolution solve_oreps_known(const StateActionOccupancy& q_prev, const TransitionTable& p, int s_init,
                                       const EstimatedCostTable& loss, double eta, const SolverConfig& cfg,
                                       const DualVarsKnown* warm_start = nullptr) {
    const Dims d = p.dims();
    require_same_dims(q_prev.dims(), d, "q_prev vs transition");
    require_same_dims(loss.dims(), d, "loss vs transition");
    if (!(eta > 0.0))
        throw InvalidInput("eta must be positive");
    for (double c : loss.values())
        if (!(c >= 0.0) || !std::isfinite(c))
            throw InvalidInput("loss must be nonnegative and finite");
    cfg.validate();

    detail::KnownDual dual(q_prev, p, s_init, loss, eta);
    std::vector<double> x(dual.size(), 0.0);
    if (warm_start && warm_start->dims == d)
        for (int h = 1; h < d.H; ++h)
            for (int s = 0; s < d.S; ++s)
                x[std::size_t(h - 1) * d.S + s] = (*warm_start)(h, s);
    const std::vector<char> nonneg(x.size(), 0);

    KnownSolution out;
    out.duals.dims = d;
    out.duals.v.assign(std::size_t(d.H + 1) * d.S, 0.0);

    if (detail::all_zero(loss.values()) && detail::all_zero(x)) {
        std::vector<double> g(x.size());
        const double f = dual(x, g);
        const double gn = detail::projected_gradient_norm(x, g, nonneg);
        if (gn <= cfg.grad_tol) {
            out.q = q_prev;
            out.diagnostics = {0, gn, f, true};
            return out;
        }
    }

    const auto res = detail::spg_minimize(dual, x, nonneg, cfg.spg());
    if (!res.converged)
        throw SolverError("known-transition dual did not converge", res.grad_norm, res.iterations);
    std::vector<double> g(x.size());
    const double f = dual(x, g);
    // The dual optimum satisfies the flow constraints only up to the gradient
    // tolerance; rolling its induced policy through p makes it exactly feasible.
    out.q = state_action_occupancy(policy_from_occupancy(dual.q()), p, s_init);
    for (int h = 1; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            out.duals.v[std::size_t(h) * d.S + s] = x[std::size_t(h - 1) * d.S + s];
    out.diagnostics = {res.iterations, res.grad_norm, f, true};
    return out;
}

// ---------------------------------------------------------------------------
// Unknown transitions

/// mu_minus, mu_plus over (h, s, a, s'); beta(h, s) for h in [0, H] with
/// layers 0 and H pinned to zero.
struct DualVarsUnknown {
    Dims dims;
    std::vector<double> mu_minus;
    std::vector<double> mu_plus;
    std::vector<double> beta;

    double beta_at(int h, int s) const noexcept { return beta[std::size_t(h) * dims.S + s]; }
};

struct UnknownSolution {
    OccupancyMeasure q;
    DualVarsUnknown duals;
    SolverDiagnostics diagnostics;
    KktReport kkt;
};

/// Reference measure used to initialize the unknown-transition learners:
/// uniform over every cell reachable in layer structure, layer 0 on s_init.
inline OccupancyMeasure uniform_occupancy(Dims d, int s_init) {
    OccupancyMeasure q(d, 0.0);
    for (int h = 0; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            for (int a = 0; a < d.A; ++a)
                for (int s2 = 0; s2 < d.S; ++s2) {
                    if (h == 0)
                        q(h, s, a, s2) = s == s_init ? 1.0 / double(d.A * d.S) : 0.0;
                    else
                        q(h, s, a, s2) = 1.0 / double(d.S * d.S * d.A);
                }
    return q;
}

namespace detail {

class UnknownDual {
public:
    UnknownDual(const OccupancyMeasure& q_prev, const ConfidenceSet& set, int s_init, const EstimatedCostTable& loss,
                double eta)
        : d_(set.dims()), set_(set), loss_(loss), eta_(eta), log_q_(d_, 0.0), support_(d_, 0), q_(d_, 0.0),
          mass_(d_, 0.0) {
        for (int h = 0; h < d_.H; ++h)
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a)
                    for (int s2 = 0; s2 < d_.S; ++s2) {
                        const bool allowed = h > 0 || s == s_init;
                        if (allowed && q_prev(h, s, a, s2) > 0.0) {
                            support_(h, s, a, s2) = 1;
                            log_q_(h, s, a, s2) = std::log(std::max(q_prev(h, s, a, s2), kLogFloor));
                        }
                    }
    }

    std::size_t mu_size() const noexcept { return d_.transitions(); }
    std::size_t beta_size() const noexcept { return std::size_t(std::max(d_.H - 1, 0)) * d_.S; }
    std::size_t size() const noexcept { return 2 * mu_size() + beta_size(); }

    std::size_t cell(int h, int s, int a, int s2) const noexcept {
        return ((std::size_t(h) * d_.S + s) * d_.A + a) * d_.S + s2;
    }
    double mu_plus(std::span<const double> x, std::size_t c) const noexcept { return x[c]; }
    double mu_minus(std::span<const double> x, std::size_t c) const noexcept { return x[mu_size() + c]; }
    double beta(std::span<const double> x, int h, int s) const noexcept {
        if (h <= 0 || h >= d_.H)
            return 0.0;
        return x[2 * mu_size() + std::size_t(h - 1) * d_.S + s];
    }

    double operator()(std::span<const double> x, std::span<double> grad) {
        double f = 0.0;
        std::vector<double> z;
        for (int h = 0; h < d_.H; ++h) {
            z.clear();
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a) {
                    // Terms shared by every successor of (h, s, a).
                    double common = -eta_ * loss_(h, s, a) - beta(x, h, s);
                    for (int t = 0; t < d_.S; ++t) {
                        const std::size_t c = cell(h, s, a, t);
                        const double v = mu_minus(x, c) - mu_plus(x, c);
                        common -= set_.center(h, s, a, t) * v;
                        common += (mu_minus(x, c) + mu_plus(x, c)) * set_.radius(h, s, a, t);
                    }
                    for (int t = 0; t < d_.S; ++t) {
                        if (!support_(h, s, a, t))
                            continue;
                        const std::size_t c = cell(h, s, a, t);
                        const double v = mu_minus(x, c) - mu_plus(x, c);
                        z.push_back(log_q_(h, s, a, t) + common + v + beta(x, h + 1, t));
                    }
                }
            const double log_z = log_sum_exp(z);
            f += log_z;
            std::size_t idx = 0;
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a) {
                    double m = 0.0;
                    for (int t = 0; t < d_.S; ++t) {
                        const double val = support_(h, s, a, t) ? std::max(std::exp(z[idx++] - log_z), kLogFloor) : 0.0;
                        q_(h, s, a, t) = val;
                        m += val;
                    }
                    mass_(h, s, a) = m;
                }
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int h = 0; h < d_.H; ++h)
            for (int s = 0; s < d_.S; ++s)
                for (int a = 0; a < d_.A; ++a) {
                    const double m = mass_(h, s, a);
                    for (int t = 0; t < d_.S; ++t) {
                        const std::size_t c = cell(h, s, a, t);
                        const double ctr = set_.center(h, s, a, t);
                        const double r = set_.radius(h, s, a, t);
                        const double qv = q_(h, s, a, t);
                        grad[c] = -qv + (ctr + r) * m;
                        grad[mu_size() + c] = qv - ctr * m + r * m;
                    }
                }
        for (int h = 1; h < d_.H; ++h)
            for (int s = 0; s < d_.S; ++s) {
                double in = 0.0;
                for (int s0 = 0; s0 < d_.S; ++s0)
                    for (int a0 = 0; a0 < d_.A; ++a0)
                        in += q_(h - 1, s0, a0, s);
                double out = 0.0;
                for (int a = 0; a < d_.A; ++a)
                    out += mass_(h, s, a);
                grad[2 * mu_size() + std::size_t(h - 1) * d_.S + s] = in - out;
            }
        return f;
    }

    const OccupancyMeasure& q() const noexcept { return q_; }

private:
    Dims d_;
    const ConfidenceSet& set_;
    const EstimatedCostTable& loss_;
    double eta_;
    OccupancyMeasure log_q_;
    TransitionTensor<OccupancyTag, char> support_;
    OccupancyMeasure q_;
    StateActionOccupancy mass_;
};

}  // namespace detail

/// Feasibility residuals of q against the polytope of `set`, plus
/// complementary slackness of the given multipliers.
inline KktReport kkt_report(const OccupancyMeasure& q, const ConfidenceSet& set, int s_init,
                            const DualVarsUnknown* duals = nullptr) {
    const Dims d = q.dims();
    KktReport rep;
    for (const auto& v : validate_occupancy(q, s_init, 0.0)) {
        if (v.kind == OccupancyViolationKind::normalization)
            rep.normalization = std::max(rep.normalization, v.magnitude);
        else
            rep.flow_residual = std::max(rep.flow_residual, v.magnitude);
    }
    rep.confidence_violation = std::max(0.0, occupancy_confidence_violation(q, set));
    if (duals) {
        for (int h = 0; h < d.H; ++h)
            for (int s = 0; s < d.S; ++s)
                for (int a = 0; a < d.A; ++a) {
                    double m = 0.0;
                    for (double x : q.row(h, s, a))
                        m += x;
                    for (int t = 0; t < d.S; ++t) {
                        const std::size_t c = ((std::size_t(h) * d.S + s) * d.A + a) * d.S + t;
                        const double ctr = set.center(h, s, a, t), r = set.radius(h, s, a, t);
                        const double g_plus = q(h, s, a, t) - (ctr + r) * m;   // <= 0
                        const double g_minus = (ctr - r) * m - q(h, s, a, t);  // <= 0
                        rep.complementary_slackness =
                            std::max({rep.complementary_slackness, std::abs(duals->mu_plus[c] * g_plus),
                                      std::abs(duals->mu_minus[c] * g_minus)});
                    }
                }
    }
    return rep;
}

/// argmin over the occupancy polytope of `set` of eta <q, loss> + KL(q || q_prev).
inline UnknownSolution solve_omd_unknown(const OccupancyMeasure& q_prev, const ConfidenceSet& set, int s_init,
                                         const EstimatedCostTable& loss, double eta, const SolverConfig& cfg,
                                         const DualVarsUnknown* warm_start = nullptr) {
    const Dims d = set.dims();
    require_same_dims(q_prev.dims(), d, "q_prev vs confidence set");
    require_same_dims(loss.dims(), d, "loss vs confidence set");
    if (!(eta > 0.0))
        throw InvalidInput("eta must be positive");
    for (double c : loss.values())
        if (!(c >= 0.0) || !std::isfinite(c))
            throw InvalidInput("loss must be nonnegative and finite");
    cfg.validate();
    check_nonempty(set);

    detail::UnknownDual dual(q_prev, set, s_init, loss, eta);
    const std::size_t nmu = dual.mu_size();
    std::vector<double> x(dual.size(), 0.0);
    std::vector<char> nonneg(x.size(), 0);
    std::fill(nonneg.begin(), nonneg.begin() + std::ptrdiff_t(2 * nmu), 1);
    if (warm_start && warm_start->dims == d) {
        std::copy(warm_start->mu_plus.begin(), warm_start->mu_plus.end(), x.begin());
        std::copy(warm_start->mu_minus.begin(), warm_start->mu_minus.end(), x.begin() + std::ptrdiff_t(nmu));
        for (int h = 1; h < d.H; ++h)
            for (int s = 0; s < d.S; ++s)
                x[2 * nmu + std::size_t(h - 1) * d.S + s] = warm_start->beta_at(h, s);
    }

    UnknownSolution out;
    out.duals.dims = d;
    out.duals.mu_plus.assign(nmu, 0.0);
    out.duals.mu_minus.assign(nmu, 0.0);
    out.duals.beta.assign(std::size_t(d.H + 1) * d.S, 0.0);

    if (detail::all_zero(loss.values()) && detail::all_zero(x)) {
        std::vector<double> g(x.size());
        const double f = dual(x, g);
        const double gn = detail::projected_gradient_norm(x, g, nonneg);
        if (gn <= cfg.grad_tol) {
            out.q = q_prev;
            out.diagnostics = {0, gn, f, true};
            out.kkt = kkt_report(out.q, set, s_init, &out.duals);
            return out;
        }
    }

    const auto res = detail::spg_minimize(dual, x, nonneg, cfg.spg());
    if (!res.converged)
        throw SolverError("unknown-transition dual did not converge", res.grad_norm, res.iterations);
    std::vector<double> g(x.size());
    const double f = dual(x, g);
    out.q = dual.q();
    std::copy(x.begin(), x.begin() + std::ptrdiff_t(nmu), out.duals.mu_plus.begin());
    std::copy(x.begin() + std::ptrdiff_t(nmu), x.begin() + std::ptrdiff_t(2 * nmu), out.duals.mu_minus.begin());
    for (int h = 1; h < d.H; ++h)
        for (int s = 0; s < d.S; ++s)
            out.duals.beta[std::size_t(h) * d.S + s] = x[2 * nmu + std::size_t(h - 1) * d.S + s];
    out.diagnostics = {res.iterations, res.grad_norm, f, true};
    out.kkt = kkt_report(out.q, set, s_init, &out.duals);
    return out;
}

// ---------------------------------------------------------------------------
// FTRL

struct FtrlSolution {
    OccupancyMeasure q;
    DualVarsUnknown duals;
    SolverDiagnostics diagnostics;
    KktReport kkt;
    double objective = 0.0;  // <q, L> + (1/eta) sum q log q
};

inline double ftrl_objective(const OccupancyMeasure& q, const EstimatedCostTable& cumulative_loss, double eta) {
    double entropy = 0.0;
    for (double x : q.values())
        if (x > 0.0)
            entropy += x * std::log(x);
    return inner(marginal(q), cumulative_loss) + entropy / eta;
}

/// argmin over the (intersected) decision set of <q, L> + (1/eta) sum q log q.
/// Against a uniform reference the entropy and the KL differ by a constant per
/// layer, so this is one mirror step from the uniform measure with loss L.
inline FtrlSolution solve_ftrl(const EstimatedCostTable& cumulative_loss, const ConfidenceSet& decision_set,
                               int s_init, double eta, const SolverConfig& cfg,
                               const DualVarsUnknown* warm_start = nullptr) {
    const OccupancyMeasure reference = uniform_occupancy(decision_set.dims(), s_init);
    auto sol = solve_omd_unknown(reference, decision_set, s_init, cumulative_loss, eta, cfg, warm_start);
    FtrlSolution out;
    out.objective = ftrl_objective(sol.q, cumulative_loss, eta);
    out.q = std::move(sol.q);
    out.duals = std::move(sol.duals);
    out.diagnostics = sol.diagnostics;
    out.kkt = sol.kkt;
    return out;
}

// ---------------------------------------------------------------------------
// Stability

/// Both sides of sum_h KL(q^k_h || q^{k+1}_h) <= eta^2/2 sum q^k (c_batch)^2.
inline std::pair<double, double> kl_stability_check(const StateActionOccupancy& q_k,
                                                    const StateActionOccupancy& q_next,
                                                    const EstimatedCostTable& batch, double eta) {
    require_same_dims(q_k.dims(), q_next.dims(), "stability check");
    require_same_dims(q_k.dims(), batch.dims(), "stability check");
    const double lhs = unnormalized_kl(q_k, q_next);
    double rhs = 0.0;
    auto qv = q_k.values();
    auto cv = batch.values();
    for (std::size_t i = 0; i < qv.size(); ++i)
        rhs += qv[i] * cv[i] * cv[i];
    return {lhs, 0.5 * eta * eta * rhs};
}

}  // namespace dmdp
