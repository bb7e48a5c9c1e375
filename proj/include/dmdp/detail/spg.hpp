#pragma once

// Projected gradient descent with Barzilai-Borwein trial steps and monotone
// Armijo backtracking, for smooth convex objectives over a product of free
// coordinates and nonnegative half-lines.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace dmdp::detail {

struct SpgOptions {
    double grad_tol = 1e-8;
    int max_iterations = 5000;
    double armijo = 1e-4;
    double backtrack = 0.5;
    int max_backtracks = 60;
    double min_step = 1e-12;
    double max_step = 1e12;
};

struct SpgResult {
    double value = 0.0;
    double grad_norm = 0.0;  // sup-norm of the projected gradient
    int iterations = 0;
    bool converged = false;
};

inline void project(std::span<double> x, std::span<const char> nonneg) {
    for (std::size_t i = 0; i < x.size(); ++i)
        if (nonneg[i] && x[i] < 0.0)
            x[i] = 0.0;
}

inline double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                                       std::span<const char> nonneg) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double step = -g[i];
        if (nonneg[i] && x[i] + step < 0.0)
            step = -x[i];
        worst = std::max(worst, std::abs(step));
    }
    return worst;
}

/// eval(x, grad) returns f(x) and writes the gradient. x is updated in place.
template <class Eval>
SpgResult spg_minimize(Eval&& eval, std::vector<double>& x, std::span<const char> nonneg, const SpgOptions& opt) {
    const std::size_t n = x.size();
    project(x, nonneg);
    std::vector<double> g(n), x_trial(n), g_trial(n), dir(n);
    SpgResult result;
    double f = eval(std::span<const double>(x), std::span<double>(g));
    double step = 1.0;
    {
        double gmax = 0.0;
        for (double v : g)
            gmax = std::max(gmax, std::abs(v));
        if (gmax > 0.0)
            step = std::clamp(1.0 / gmax, opt.min_step, opt.max_step);
    }
    for (int it = 0;; ++it) {
        result.iterations = it;
        result.value = f;
        result.grad_norm = projected_gradient_norm(x, g, nonneg);
        if (result.grad_norm <= opt.grad_tol) {
            result.converged = true;
            return result;
        }
        if (it >= opt.max_iterations)
            return result;

        double slope = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double xi = x[i] - step * g[i];
            if (nonneg[i] && xi < 0.0)
                xi = 0.0;
            dir[i] = xi - x[i];
            slope += g[i] * dir[i];
        }
        const double rounding = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
        double lambda = 1.0;
        double f_trial = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            for (std::size_t i = 0; i < n; ++i)
                x_trial[i] = x[i] + lambda * dir[i];
            project(x_trial, nonneg);
            f_trial = eval(std::span<const double>(x_trial), std::span<double>(g_trial));
            // The slack term absorbs rounding in f once the predicted decrease
            // falls below machine precision.
            if (std::isfinite(f_trial) && f_trial <= f + opt.armijo * lambda * slope + rounding) {
                accepted = true;
                break;
            }
            lambda *= opt.backtrack;
        }
        if (!accepted) {
            // Line search stalled at rounding level; report where we are.
            return result;
        }
        double ss = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = x_trial[i] - x[i];
            const double y = g_trial[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        step = sy > 0.0 ? std::clamp(ss / sy, opt.min_step, opt.max_step) : opt.max_step;
        x.swap(x_trial);
        g.swap(g_trial);
        f = f_trial;
    }
}

}  // namespace dmdp::detail
