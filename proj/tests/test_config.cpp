#include "dmdp/config.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

namespace dmdp {
namespace {

const char* kMinimal = R"({
  "K": 100,
  "mdp": {"S": 2, "A": 2, "H": 2},
  "adversary": {"cost": {"kind": "iid"}, "delay": {"kind": "constant", "value": 3}},
  "learner": {"name": "uob-reps"}
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

TEST(Config, MinimalDocumentUsesDefaults) {
    const auto cfg = config_from_json(minimal());
    EXPECT_EQ(cfg.K, 100);
    EXPECT_EQ(cfg.mdp.dims, (Dims{2, 2, 2}));
    EXPECT_EQ(cfg.delay.params.value, 3);
    EXPECT_EQ(cfg.learner.kind, LearnerKind::uob_reps);
    EXPECT_FALSE(cfg.learner.eta.has_value());
    EXPECT_FALSE(cfg.learner.gamma.has_value());
    EXPECT_EQ(cfg.cost_mode, CostMode::exact);
}

TEST(Config, RoundTripIsIdentity) {
    std::vector<nlohmann::json> docs{minimal()};
    auto j = minimal();
    j["learner"] = {{"name", "hedge"}, {"eta", 0.25}, {"gamma", "auto"}, {"delta", 0.05}, {"enumeration_cap", 64},
                    {"solver", {{"grad_tol", 1e-9}, {"max_iterations", 100}}}};
    j["adversary"]["delay"] = {{"kind", "explicit"}, {"values", std::vector<int>(100, 2)}};
    j["cost_mode"] = "realized";
    j["seeds"] = {3, 1, 2};
    docs.push_back(j);
    auto k = minimal();
    k["mdp"] = {{"inline", mdp_to_json(random_layered_mdp({2, 3, 2}, 5))}};
    CostFunction table({2, 3, 2}, 0.25);
    table(1, 1, 2) = 0.75;
    k["adversary"]["cost"] = {{"kind", "fixed"}, {"table", detail::cost_table_to_json(table)}};
    k["learner"] = {{"name", "uob-ftrl"}, {"eta", 0.1}, {"gamma", 0.2}, {"estimator", "standard"}};
    docs.push_back(k);
    auto s = minimal();
    s["adversary"] = {{"cost", {{"kind", "switching"}, {"period", 50}, {"flip_fraction", 0.2}, {"noise", 0.1}}},
                      {"delay", {{"kind", "spike"}, {"period", 7}, {"magnitude", 25}, {"base", 2}}}};
    docs.push_back(s);

    for (const auto& doc : docs) {
        const auto cfg = config_from_json(doc);
        const auto text = config_to_json(cfg).dump();
        const auto again = config_from_json(nlohmann::json::parse(text));
        EXPECT_EQ(cfg, again);
        EXPECT_EQ(text, config_to_json(again).dump());
    }
}

TEST(Config, RejectsInvalidDocuments) {
    auto unknown = minimal();
    unknown["learner"]["etaa"] = 1.0;
    EXPECT_THROW(config_from_json(unknown), InvalidInput);

    auto zero_gamma = minimal();
    zero_gamma["learner"]["gamma"] = 0.0;
    EXPECT_THROW(config_from_json(zero_gamma), InvalidInput);

    auto bad_eta = minimal();
    bad_eta["learner"]["eta"] = "fast";
    EXPECT_THROW(config_from_json(bad_eta), InvalidInput);

    auto bad_delta = minimal();
    bad_delta["learner"]["delta"] = 1.5;
    EXPECT_THROW(config_from_json(bad_delta), InvalidInput);

    auto big_hedge = minimal();
    big_hedge["mdp"] = {{"S", 3}, {"A", 3}, {"H", 3}};
    big_hedge["learner"]["name"] = "hedge";
    EXPECT_THROW(config_from_json(big_hedge), InvalidInput);

    auto no_k = minimal();
    no_k.erase("K");
    EXPECT_THROW(config_from_json(no_k), InvalidInput);

    auto short_list = minimal();
    short_list["adversary"]["delay"] = {{"kind", "explicit"}, {"values", {1, 2}}};
    EXPECT_THROW(config_from_json(short_list), InvalidInput);

    auto bad_name = minimal();
    bad_name["learner"]["name"] = "po";
    EXPECT_THROW(config_from_json(bad_name), InvalidInput);
}

TEST(Config, BundledConfigsLoad) {
    const std::string root = DMDP_SOURCE_DIR;
    const auto cfg = load_config(root + "/configs/example.json");
    EXPECT_EQ(cfg.learner.kind, LearnerKind::uob_reps);
    EXPECT_EQ(expand_sweep(read_json_file(root + "/configs/sweep_delays.json")).size(), 3u);
    EXPECT_THROW(load_config(root + "/configs/missing.json"), InvalidInput);
}

TEST(ExpandSweep, CartesianProductInKeyOrder) {
    nlohmann::json sweep{{"base", minimal()},
                         {"grid", {{"/adversary/delay/value", {0, 5}}, {"/learner/eta", {0.1, 0.2, 0.3}}}}};
    const auto points = expand_sweep(sweep);
    ASSERT_EQ(points.size(), 6u);
    EXPECT_EQ(points[0].label, "/adversary/delay/value=0,/learner/eta=0.1");
    EXPECT_EQ(points[5].label, "/adversary/delay/value=5,/learner/eta=0.3");
    EXPECT_EQ(points[4].config.delay.params.value, 5);
    EXPECT_DOUBLE_EQ(*points[4].config.learner.eta, 0.2);

    sweep["grid"] = nlohmann::json::object();
    EXPECT_THROW(expand_sweep(sweep), InvalidInput);
}

TEST(AutoRates, DefaultTunings) {
    const Dims d{3, 2, 4};
    const int K = 1000;
    const double delta = 0.1;
    const double iota = std::log(4.0 * 3 * 2 * K / delta);
    const double HSA = 24.0;
    {
        const auto [eta, gamma] = auto_rates(LearnerKind::hedge, d, K, 500, delta);
        EXPECT_NEAR(eta, std::sqrt(3 * iota / (4.0 * 500 + HSA * K)), 1e-15);
        EXPECT_EQ(eta, gamma);
    }
    {
        const auto [eta, gamma] = auto_rates(LearnerKind::uob_ftrl, d, K, 500, delta);
        EXPECT_NEAR(eta, std::sqrt(4 * iota / (HSA * K + HSA * HSA * 500)), 1e-15);
        EXPECT_NEAR(gamma, std::sqrt(iota / (6.0 * K)), 1e-15);
    }
    {
        const auto [eta, gamma] = auto_rates(LearnerKind::uob_reps, d, K, 500, delta);
        EXPECT_NEAR(eta, std::min(std::sqrt(iota / (6.0 * K)), std::sqrt(iota / (std::sqrt(HSA) * 500))), 1e-15);
        const auto [eta0, gamma0] = auto_rates(LearnerKind::uob_reps, d, K, 0, delta);
        EXPECT_NEAR(eta0, std::sqrt(iota / (6.0 * K)), 1e-15);
        EXPECT_EQ(eta0, gamma0);
    }
    {
        const double known_log = std::log(HSA / delta);
        const auto [eta, gamma] = auto_rates(LearnerKind::oreps_known, d, K, 0, delta);
        EXPECT_NEAR(eta, std::sqrt(known_log / (6.0 * K)), 1e-15);
        EXPECT_EQ(eta, gamma);
    }
}

TEST(ResolveLearnerParams, ExplicitRatesWin) {
    auto cfg = config_from_json(minimal());
    cfg.learner.eta = 0.7;
    const auto p = resolve_learner_params(cfg, cfg.mdp.dims, 300);
    EXPECT_EQ(p.eta, 0.7);
    EXPECT_EQ(p.gamma, auto_rates(LearnerKind::uob_reps, cfg.mdp.dims, cfg.K, 300, cfg.learner.delta).second);
    EXPECT_EQ(p.K, 100);
}

}  // namespace
}  // namespace dmdp
