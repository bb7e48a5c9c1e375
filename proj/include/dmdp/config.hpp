#pragma once

// Experiment configuration: a single JSON document, validated before any run.

#include "dmdp/adversary.hpp"
#include "dmdp/learners.hpp"
#include "dmdp/mdp.hpp"
#include "dmdp/occupancy_opt.hpp"
#include "dmdp/tables.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace dmdp {

enum class CostMode { exact, realized };

struct MdpSource {
    std::optional<MdpSpec> inline_mdp;  // set: use it, otherwise generate
    Dims dims{2, 2, 2};
    std::uint64_t seed = 1;
    double alpha = 1.0;
    int s_init = 0;

    bool operator==(const MdpSource&) const = default;
};

struct CostConfig {
    CostKind kind = CostKind::iid;
    CostParams params;
    std::uint64_t seed = 1;

    bool operator==(const CostConfig&) const = default;
};

struct DelayConfig {
    DelayKind kind = DelayKind::constant;
    DelayParams params;
    std::uint64_t seed = 1;

    bool operator==(const DelayConfig&) const = default;
};

struct LearnerConfig {
    LearnerKind kind = LearnerKind::oreps_known;
    std::optional<double> eta;    // nullopt: theorem tuning
    std::optional<double> gamma;  // nullopt: theorem tuning
    double delta = 0.1;
    int enumeration_cap = 4096;
    EstimatorKind estimator = EstimatorKind::delay_adapted;
    SolverConfig solver;

    bool operator==(const LearnerConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    int K = 1000;
    std::vector<std::uint64_t> seeds{1};
    CostMode cost_mode = CostMode::exact;
    std::string output_dir = "out";
    MdpSource mdp;
    CostConfig cost;
    DelayConfig delay;
    LearnerConfig learner;

    bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Names

inline const char* to_string(CostKind k) {
    switch (k) {
    case CostKind::fixed: return "fixed";
    case CostKind::iid: return "iid";
    case CostKind::switching: return "switching";
    }
    return "unknown";
}

inline const char* to_string(DelayKind k) {
    switch (k) {
    case DelayKind::constant: return "constant";
    case DelayKind::uniform_random: return "uniform";
    case DelayKind::spike: return "spike";
    case DelayKind::explicit_list: return "explicit";
    }
    return "unknown";
}

inline const char* to_string(CostMode m) { return m == CostMode::exact ? "exact" : "realized"; }

namespace detail {

inline CostKind cost_kind_from(const std::string& s) {
    if (s == "fixed")
        return CostKind::fixed;
    if (s == "iid")
        return CostKind::iid;
    if (s == "switching")
        return CostKind::switching;
    throw InvalidInput("unknown cost kind '" + s + "'");
}

inline DelayKind delay_kind_from(const std::string& s) {
    if (s == "constant")
        return DelayKind::constant;
    if (s == "uniform")
        return DelayKind::uniform_random;
    if (s == "spike")
        return DelayKind::spike;
    if (s == "explicit")
        return DelayKind::explicit_list;
    throw InvalidInput("unknown delay kind '" + s + "'");
}

inline EstimatorKind estimator_kind_from(const std::string& s) {
    if (s == "standard")
        return EstimatorKind::standard;
    if (s == "delay_adapted")
        return EstimatorKind::delay_adapted;
    throw InvalidInput("unknown estimator '" + s + "'");
}

inline CostMode cost_mode_from(const std::string& s) {
    if (s == "exact")
        return CostMode::exact;
    if (s == "realized")
        return CostMode::realized;
    throw InvalidInput("unknown cost_mode '" + s + "'");
}

inline void require_object(const nlohmann::json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw InvalidInput(std::string(where) + " must be a JSON object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key()))
            throw InvalidInput(std::string("unknown key '") + it.key() + "' in " + where);
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline std::optional<double> rate_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key))
        return std::nullopt;
    const auto& v = j.at(key);
    if (v.is_string()) {
        if (v.get<std::string>() != "auto")
            throw InvalidInput(std::string(key) + " must be a number or \"auto\"");
        return std::nullopt;
    }
    return v.get<double>();
}

inline nlohmann::json rate_to(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json("auto");
}

inline nlohmann::json cost_table_to_json(const CostFunction& c) {
    const Dims d = c.dims();
    nlohmann::json out = nlohmann::json::array();
    for (int h = 0; h < d.H; ++h) {
        nlohmann::json layer = nlohmann::json::array();
        for (int s = 0; s < d.S; ++s) {
            auto row = c.row(h, s);
            layer.push_back(std::vector<double>(row.begin(), row.end()));
        }
        out.push_back(std::move(layer));
    }
    return out;
}

inline CostFunction cost_table_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty() || !j[0][0].is_array())
        throw InvalidInput("cost table must be an [H][S][A] array");
    const Dims d{int(j[0].size()), int(j[0][0].size()), int(j.size())};
    CostFunction c(d);
    for (int h = 0; h < d.H; ++h) {
        if (j[std::size_t(h)].size() != std::size_t(d.S))
            throw InvalidInput("cost table layers must have S rows");
        for (int s = 0; s < d.S; ++s) {
            const auto& row = j[std::size_t(h)][std::size_t(s)];
            if (!row.is_array() || row.size() != std::size_t(d.A))
                throw InvalidInput("cost table rows must have A entries");
            for (int a = 0; a < d.A; ++a)
                c(h, s, a) = row[std::size_t(a)].get<double>();
        }
    }
    return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.K <= 0)
        throw InvalidInput("K must be positive");
    if (cfg.seeds.empty())
        throw InvalidInput("seeds must be nonempty");
    const Dims d = cfg.mdp.inline_mdp ? cfg.mdp.inline_mdp->dims : cfg.mdp.dims;
    if (!d.valid())
        throw InvalidInput("MDP dimensions must be positive");
    if (!cfg.mdp.inline_mdp) {
        if (!(cfg.mdp.alpha > 0.0))
            throw InvalidInput("mdp alpha must be positive");
        if (cfg.mdp.s_init < 0 || cfg.mdp.s_init >= d.S)
            throw InvalidInput("s_init out of range");
    }
    const auto& l = cfg.learner;
    if (l.eta && !(*l.eta > 0.0 && std::isfinite(*l.eta)))
        throw InvalidInput("eta must be positive or \"auto\"");
    if (l.gamma && !(*l.gamma > 0.0 && std::isfinite(*l.gamma)))
        throw InvalidInput("gamma must be positive or \"auto\"");
    if (!(l.delta > 0.0 && l.delta < 1.0))
        throw InvalidInput("delta must lie in (0, 1)");
    if (l.enumeration_cap <= 0)
        throw InvalidInput("enumeration_cap must be positive");
    l.solver.validate();
    if (l.kind == LearnerKind::hedge && std::pow(double(d.A), double(d.S * d.H)) > double(l.enumeration_cap))
        throw InvalidInput("hedge: A^(S*H) deterministic policies exceed enumeration_cap");
    if (cfg.cost.kind == CostKind::fixed && cfg.cost.params.table)
        require_same_dims(cfg.cost.params.table->dims(), d, "fixed cost table");
    if (cfg.cost.kind == CostKind::switching) {
        const auto& p = cfg.cost.params;
        if (p.period <= 0 || p.noise < 0.0 || !(p.flip_fraction >= 0.0 && p.flip_fraction < 0.5))
            throw InvalidInput("switching costs need period > 0, noise >= 0, flip_fraction in [0, 0.5)");
    }
    const auto& dp = cfg.delay.params;
    switch (cfg.delay.kind) {
    case DelayKind::constant:
        if (dp.value < 0)
            throw InvalidInput("constant delay must be nonnegative");
        break;
    case DelayKind::uniform_random:
        if (dp.max < 0)
            throw InvalidInput("uniform delay max must be nonnegative");
        break;
    case DelayKind::spike:
        if (dp.period <= 0 || dp.magnitude < 0 || dp.base < 0)
            throw InvalidInput("spike delays need period > 0 and nonnegative magnitude/base");
        break;
    case DelayKind::explicit_list:
        if (dp.values.size() < std::size_t(cfg.K))
            throw InvalidInput("explicit delay list shorter than K");
        break;
    }
}

// ---------------------------------------------------------------------------
// JSON

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    using detail::get_or;
    try {
        detail::require_object(j, "config",
                               {"name", "K", "seeds", "cost_mode", "output_dir", "mdp", "adversary", "learner"});
        ExperimentConfig cfg;
        cfg.name = get_or<std::string>(j, "name", cfg.name);
        cfg.K = j.at("K").get<int>();
        if (j.contains("seeds"))
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        if (j.contains("cost_mode"))
            cfg.cost_mode = detail::cost_mode_from(j.at("cost_mode").get<std::string>());
        cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);

        const auto& m = j.at("mdp");
        detail::require_object(m, "mdp", {"generator", "S", "A", "H", "seed", "alpha", "s_init", "inline"});
        if (m.contains("inline")) {
            cfg.mdp.inline_mdp = mdp_from_json(m.at("inline"));
            cfg.mdp.dims = cfg.mdp.inline_mdp->dims;
            cfg.mdp.s_init = cfg.mdp.inline_mdp->s_init;
        } else {
            const auto gen = get_or<std::string>(m, "generator", "layered-random");
            if (gen != "layered-random")
                throw InvalidInput("unknown MDP generator '" + gen + "'");
            cfg.mdp.dims = Dims{m.at("S").get<int>(), m.at("A").get<int>(), m.at("H").get<int>()};
            cfg.mdp.seed = get_or<std::uint64_t>(m, "seed", cfg.mdp.seed);
            cfg.mdp.alpha = get_or<double>(m, "alpha", cfg.mdp.alpha);
            cfg.mdp.s_init = get_or<int>(m, "s_init", cfg.mdp.s_init);
        }

        const auto& adv = j.at("adversary");
        detail::require_object(adv, "adversary", {"cost", "delay"});
        const auto& c = adv.at("cost");
        detail::require_object(c, "adversary.cost", {"kind", "seed", "period", "flip_fraction", "noise", "table"});
        cfg.cost.kind = detail::cost_kind_from(c.at("kind").get<std::string>());
        cfg.cost.seed = get_or<std::uint64_t>(c, "seed", cfg.cost.seed);
        cfg.cost.params.period = get_or<int>(c, "period", cfg.cost.params.period);
        cfg.cost.params.flip_fraction = get_or<double>(c, "flip_fraction", cfg.cost.params.flip_fraction);
        cfg.cost.params.noise = get_or<double>(c, "noise", cfg.cost.params.noise);
        if (c.contains("table") && !c.at("table").is_null())
            cfg.cost.params.table = detail::cost_table_from_json(c.at("table"));

        const auto& dl = adv.at("delay");
        detail::require_object(dl, "adversary.delay",
                               {"kind", "seed", "value", "max", "period", "magnitude", "base", "values"});
        cfg.delay.kind = detail::delay_kind_from(dl.at("kind").get<std::string>());
        cfg.delay.seed = get_or<std::uint64_t>(dl, "seed", cfg.delay.seed);
        auto& dp = cfg.delay.params;
        dp.value = get_or<int>(dl, "value", dp.value);
        dp.max = get_or<int>(dl, "max", dp.max);
        dp.period = get_or<int>(dl, "period", dp.period);
        dp.magnitude = get_or<int>(dl, "magnitude", dp.magnitude);
        dp.base = get_or<int>(dl, "base", dp.base);
        if (dl.contains("values"))
            dp.values = dl.at("values").get<std::vector<int>>();

        const auto& l = j.at("learner");
        detail::require_object(l, "learner",
                               {"name", "eta", "gamma", "delta", "enumeration_cap", "estimator", "solver"});
        cfg.learner.kind = learner_kind_from_string(l.at("name").get<std::string>());
        cfg.learner.eta = detail::rate_from(l, "eta");
        cfg.learner.gamma = detail::rate_from(l, "gamma");
        cfg.learner.delta = get_or<double>(l, "delta", cfg.learner.delta);
        cfg.learner.enumeration_cap = get_or<int>(l, "enumeration_cap", cfg.learner.enumeration_cap);
        if (l.contains("estimator"))
            cfg.learner.estimator = detail::estimator_kind_from(l.at("estimator").get<std::string>());
        if (l.contains("solver")) {
            const auto& s = l.at("solver");
            detail::require_object(s, "learner.solver",
                                   {"grad_tol", "max_iterations", "armijo", "backtrack", "feas_tol"});
            auto& sc = cfg.learner.solver;
            sc.grad_tol = get_or<double>(s, "grad_tol", sc.grad_tol);
            sc.max_iterations = get_or<int>(s, "max_iterations", sc.max_iterations);
            sc.armijo = get_or<double>(s, "armijo", sc.armijo);
            sc.backtrack = get_or<double>(s, "backtrack", sc.backtrack);
            sc.feas_tol = get_or<double>(s, "feas_tol", sc.feas_tol);
        }
        validate(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed config: ") + e.what());
    }
}

/// Every field is written, so serialize-then-parse reproduces the config.
/// Keys come out sorted, which keeps the output byte-stable.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json mdp;
    if (cfg.mdp.inline_mdp) {
        mdp["inline"] = mdp_to_json(*cfg.mdp.inline_mdp);
    } else {
        mdp = {{"generator", "layered-random"}, {"S", cfg.mdp.dims.S},      {"A", cfg.mdp.dims.A},
               {"H", cfg.mdp.dims.H},           {"seed", cfg.mdp.seed},     {"alpha", cfg.mdp.alpha},
               {"s_init", cfg.mdp.s_init}};
    }
    const auto& cp = cfg.cost.params;
    nlohmann::json cost = {{"kind", to_string(cfg.cost.kind)},
                           {"seed", cfg.cost.seed},
                           {"period", cp.period},
                           {"flip_fraction", cp.flip_fraction},
                           {"noise", cp.noise},
                           {"table", cp.table ? detail::cost_table_to_json(*cp.table) : nlohmann::json(nullptr)}};
    const auto& dp = cfg.delay.params;
    nlohmann::json delay = {{"kind", to_string(cfg.delay.kind)},
                            {"seed", cfg.delay.seed},
                            {"value", dp.value},
                            {"max", dp.max},
                            {"period", dp.period},
                            {"magnitude", dp.magnitude},
                            {"base", dp.base},
                            {"values", dp.values}};
    const auto& sc = cfg.learner.solver;
    nlohmann::json solver = {{"grad_tol", sc.grad_tol},
                             {"max_iterations", sc.max_iterations},
                             {"armijo", sc.armijo},
                             {"backtrack", sc.backtrack},
                             {"feas_tol", sc.feas_tol}};
    nlohmann::json learner = {{"name", to_string(cfg.learner.kind)},
                              {"eta", detail::rate_to(cfg.learner.eta)},
                              {"gamma", detail::rate_to(cfg.learner.gamma)},
                              {"delta", cfg.learner.delta},
                              {"enumeration_cap", cfg.learner.enumeration_cap},
                              {"estimator", to_string(cfg.learner.estimator)},
                              {"solver", solver}};
    return {{"name", cfg.name},
            {"K", cfg.K},
            {"seeds", cfg.seeds},
            {"cost_mode", to_string(cfg.cost_mode)},
            {"output_dir", cfg.output_dir},
            {"mdp", mdp},
            {"adversary", {{"cost", cost}, {"delay", delay}}},
            {"learner", learner}};
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw InvalidInput("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
    std::string label;  // "key=value,key=value"
    ExperimentConfig config;
};

/// {"base": config, "grid": {"/json/pointer": [values...], ...}} expands to
/// the Cartesian product of the grid, in sorted key order with the last key
/// varying fastest.
inline std::vector<SweepPoint> expand_sweep(const nlohmann::json& sweep) {
    try {
        detail::require_object(sweep, "sweep", {"base", "grid"});
        const auto& base = sweep.at("base");
        const auto& grid = sweep.at("grid");
        if (!grid.is_object() || grid.empty())
            throw InvalidInput("sweep grid must be a nonempty object");
        std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
        for (auto it = grid.begin(); it != grid.end(); ++it) {
            if (!it.value().is_array() || it.value().empty())
                throw InvalidInput("sweep axis '" + it.key() + "' must be a nonempty array");
            axes.emplace_back(it.key(), std::vector<nlohmann::json>(it.value().begin(), it.value().end()));
        }
        std::vector<SweepPoint> out;
        std::vector<std::size_t> idx(axes.size(), 0);
        for (;;) {
            nlohmann::json point = base;
            std::string label;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                const auto& value = axes[a].second[idx[a]];
                point[nlohmann::json::json_pointer(axes[a].first)] = value;
                if (!label.empty())
                    label += ",";
                label += axes[a].first + "=" + value.dump();
            }
            out.push_back({label, config_from_json(point)});
            std::size_t a = axes.size();
            while (a > 0) {
                --a;
                if (++idx[a] < axes[a].second.size())
                    break;
                idx[a] = 0;
                if (a == 0)
                    return out;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed sweep: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Instantiation

inline MdpSpec build_mdp(const ExperimentConfig& cfg) {
    if (cfg.mdp.inline_mdp)
        return *cfg.mdp.inline_mdp;
    return random_layered_mdp(cfg.mdp.dims, cfg.mdp.seed, cfg.mdp.alpha, cfg.mdp.s_init);
}

/// Theorem tunings with iota = log(HSAK / delta), given K and total delay D.
/// A zero total delay drops the delay-dependent term.
inline std::pair<double, double> auto_rates(LearnerKind kind, Dims d, int K, std::int64_t D, double delta) {
    const double H = d.H, S = d.S, A = d.A, Kd = K, Dd = double(D);
    const double iota = std::log(H * S * A * Kd / delta);
    switch (kind) {
    case LearnerKind::hedge: {
        const double r = std::sqrt(S * iota / (H * Dd + H * S * A * Kd));
        return {r, r};
    }
    case LearnerKind::uob_ftrl: {
        const double eta = std::sqrt(H * iota / (H * S * A * Kd + (H * S * A) * (H * S * A) * Dd));
        const double gamma = std::sqrt(iota / (S * A * Kd));
        return {eta, gamma};
    }
    case LearnerKind::uob_reps:
    case LearnerKind::oreps_known: {
        const double log_term = kind == LearnerKind::uob_reps ? iota : std::log(H * S * A / delta);
        double r = std::sqrt(log_term / (S * A * Kd));
        if (D > 0)
            r = std::min(r, std::sqrt(log_term / (std::sqrt(H * S * A) * Dd)));
        return {r, r};
    }
    }
    throw InvalidInput("unknown learner kind");
}

inline LearnerParams resolve_learner_params(const ExperimentConfig& cfg, Dims d, std::int64_t D) {
    LearnerParams p;
    const auto [eta, gamma] = auto_rates(cfg.learner.kind, d, cfg.K, D, cfg.learner.delta);
    p.eta = cfg.learner.eta.value_or(eta);
    p.gamma = cfg.learner.gamma.value_or(gamma);
    p.delta = cfg.learner.delta;
    p.K = cfg.K;
    p.enumeration_cap = cfg.learner.enumeration_cap;
    p.estimator = cfg.learner.estimator;
    p.solver = cfg.learner.solver;
    p.validate();
    return p;
}

}  // namespace dmdp
