#pragma once

// Dense tabular storage for layered episodic MDPs.
//
// Layers are 0-based in code: h in [0, H). Episode indices (k, j) are
// 1-based everywhere, matching the feedback protocol.

#include <cassert>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmdp {

/// Malformed or inconsistent caller input.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The delayed-feedback protocol was used out of order.
class ProtocolViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A structural impossibility: empty confidence set, enumeration too large, ...
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dual solver did not reach the requested tolerance.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double grad_norm, int iterations)
        : std::runtime_error(describe(what, grad_norm, iterations)), grad_norm_(grad_norm), iterations_(iterations) {}

    double grad_norm() const noexcept { return grad_norm_; }
    int iterations() const noexcept { return iterations_; }

private:
    static std::string describe(const std::string& what, double grad_norm, int iterations) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " (final projected gradient norm %.3e after %d iterations)", grad_norm,
                      iterations);
        return what + buf;
    }

    double grad_norm_;
    int iterations_;
};

inline constexpr double kStructuralTol = 1e-12;
inline constexpr double kFlowTol = 1e-9;

struct Dims {
    int S = 0;
    int A = 0;
    int H = 0;

    bool operator==(const Dims&) const = default;

    bool valid() const noexcept { return S > 0 && A > 0 && H > 0; }
    std::size_t state_actions() const noexcept { return std::size_t(H) * S * A; }
    std::size_t transitions() const noexcept { return std::size_t(H) * S * A * S; }
};

inline void require_same_dims(const Dims& a, const Dims& b, const char* what) {
    if (!(a == b))
        throw InvalidInput(std::string("dimension mismatch: ") + what);
}

/// Table indexed (h, s, a). The tag keeps policies, costs and occupancy
/// marginals from being mixed up.
template <class Tag, class T = double>
class StateActionTable {
public:
    using value_type = T;

    StateActionTable() = default;
    explicit StateActionTable(Dims dims, T fill = T{})
        : dims_(dims), data_(dims.state_actions(), fill) {}

    const Dims& dims() const noexcept { return dims_; }

    T& operator()(int h, int s, int a) noexcept { return data_[index(h, s, a)]; }
    const T& operator()(int h, int s, int a) const noexcept { return data_[index(h, s, a)]; }

    std::span<T> row(int h, int s) noexcept { return {data_.data() + index(h, s, 0), std::size_t(dims_.A)}; }
    std::span<const T> row(int h, int s) const noexcept {
        return {data_.data() + index(h, s, 0), std::size_t(dims_.A)};
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    bool operator==(const StateActionTable&) const = default;

private:
    std::size_t index(int h, int s, int a) const noexcept {
        assert(h >= 0 && h < dims_.H && s >= 0 && s < dims_.S && a >= 0 && a < dims_.A);
        return (std::size_t(h) * dims_.S + s) * dims_.A + a;
    }

    Dims dims_{};
    std::vector<T> data_;
};

/// Table indexed (h, s, a, s').
template <class Tag, class T = double>
class TransitionTensor {
public:
    using value_type = T;

    TransitionTensor() = default;
    explicit TransitionTensor(Dims dims, T fill = T{})
        : dims_(dims), data_(dims.transitions(), fill) {}

    const Dims& dims() const noexcept { return dims_; }

    T& operator()(int h, int s, int a, int s2) noexcept { return data_[index(h, s, a, s2)]; }
    const T& operator()(int h, int s, int a, int s2) const noexcept { return data_[index(h, s, a, s2)]; }

    std::span<T> row(int h, int s, int a) noexcept {
        return {data_.data() + index(h, s, a, 0), std::size_t(dims_.S)};
    }
    std::span<const T> row(int h, int s, int a) const noexcept {
        return {data_.data() + index(h, s, a, 0), std::size_t(dims_.S)};
    }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }

    bool operator==(const TransitionTensor&) const = default;

private:
    std::size_t index(int h, int s, int a, int s2) const noexcept {
        assert(h >= 0 && h < dims_.H && s >= 0 && s < dims_.S && a >= 0 && a < dims_.A && s2 >= 0 &&
               s2 < dims_.S);
        return ((std::size_t(h) * dims_.S + s) * dims_.A + a) * dims_.S + s2;
    }

    Dims dims_{};
    std::vector<T> data_;
};

struct PolicyTag {};
struct CostTag {};
struct UobTag {};
struct EstimateTag {};
struct SaOccupancyTag {};
struct TransitionTag {};
struct OccupancyTag {};
struct RadiusTag {};
struct CountTag {};

/// pi(h, s, a) = probability of action a in state s at layer h.
using Policy = StateActionTable<PolicyTag>;
/// c(h, s, a) in [0, 1].
using CostFunction = StateActionTable<CostTag>;
/// Upper occupancy bound u(h, s, a).
using UpperOccupancyBound = StateActionTable<UobTag>;
/// Importance-weighted cost estimate c_hat(h, s, a).
using EstimatedCostTable = StateActionTable<EstimateTag>;
/// Occupancy marginal q(h, s, a).
using StateActionOccupancy = StateActionTable<SaOccupancyTag>;
/// p(h, s, a, s').
using TransitionTable = TransitionTensor<TransitionTag>;
/// q(h, s, a, s').
using OccupancyMeasure = TransitionTensor<OccupancyTag>;
/// Confidence radius r(h, s, a, s').
using RadiusTable = TransitionTensor<RadiusTag>;

template <class TagA, class TagB>
double inner(const StateActionTable<TagA>& x, const StateActionTable<TagB>& y) {
    require_same_dims(x.dims(), y.dims(), "inner product");
    double acc = 0.0;
    auto xv = x.values();
    auto yv = y.values();
    for (std::size_t i = 0; i < xv.size(); ++i)
        acc += xv[i] * yv[i];
    return acc;
}

/// Reinterpret the values of one state-action table under another tag.
template <class To, class From>
To retag(const From& from) {
    To out(from.dims());
    auto src = from.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i)
        dst[i] = src[i];
    return out;
}

}  // namespace dmdp
