#pragma once

// Counter-based, splittable random stream.
//
// Every draw is a pure function of (key, counter), and child streams are
// derived by hashing a stream id into the key. Distributions are coded here
// rather than taken from <random> so that sequences are identical across
// standard library implementations.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace dmdp {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return mix64(h);
}

}  // namespace detail

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : key_(detail::mix64(seed + detail::kGolden)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next_u64(); }

    result_type next_u64() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::kGolden);
    }

    /// Independent child stream. Does not advance this stream.
    Rng split(std::uint64_t stream) const noexcept {
        Rng child;
        child.key_ = detail::mix64(key_ ^ detail::mix64(stream * detail::kGolden + 0x632BE59BD9B4E019ULL));
        return child;
    }
    Rng split(std::string_view name) const noexcept { return split(detail::hash_name(name)); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) noexcept {
        if (n <= 1)
            return 0;
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0)
            u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Marsaglia-Tsang; shape > 0.
    double gamma(double shape) noexcept {
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0)
                u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x)
                return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
                return d * v;
        }
    }

    std::vector<double> dirichlet(std::size_t n, double alpha) noexcept {
        std::vector<double> out(n);
        double total = 0.0;
        for (auto& x : out) {
            x = gamma(alpha);
            total += x;
        }
        if (total <= 0.0) {
            for (auto& x : out)
                x = 1.0 / double(n);
            return out;
        }
        for (auto& x : out)
            x /= total;
        return out;
    }

    /// Index drawn from unnormalized nonnegative weights.
    std::size_t categorical(std::span<const double> weights) noexcept {
        double total = 0.0;
        for (double w : weights)
            total += w;
        double target = uniform() * total;
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0)
                continue;
            last_positive = i;
            if (target < weights[i])
                return i;
            target -= weights[i];
        }
        return last_positive;
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace dmdp
