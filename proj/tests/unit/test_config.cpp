#include <gtest/gtest.h>

#include "fedfim/config.hpp"
#include "fedfim/error.hpp"
#include "json.hpp"

using namespace fedfim;

namespace {

std::string error_of(std::string_view text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalConfigFillsDefaults) {
  ExperimentConfig cfg = parse_config_text("{}");
  EXPECT_EQ(cfg.round.local_epochs, 5u);
  EXPECT_EQ(cfg.round.batch_size, 15u);
  EXPECT_DOUBLE_EQ(cfg.round.participation, 0.2);
  EXPECT_EQ(cfg.num_clients, 100u);
  EXPECT_EQ(cfg.round.memory, 10u);
  EXPECT_DOUBLE_EQ(cfg.round.cautious_eps, 1e-8);
  EXPECT_DOUBLE_EQ(cfg.round.fim_damping, 1e-6);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1}));
}

TEST(Config, NestedAndDottedKeysAgree) {
  ExperimentConfig a = parse_config_text(R"({"fed": {"rounds": 7, "batch_size": "full"}, "seeds": [3, 4]})");
  ExperimentConfig b = parse_config_text(R"({"fed.rounds": 7, "fed.batch_size": "full", "seeds": [3, 4]})");
  EXPECT_EQ(a.round.rounds, 7u);
  EXPECT_EQ(a.round.batch_size, 0u);
  EXPECT_EQ(effective_config_json(a), effective_config_json(b));
}

TEST(Config, UnknownKeySuggestsClosest) {
  const std::string msg = error_of(R"({"fed": {"learning_rat": 0.1}})");
  EXPECT_NE(msg.find("fed.learning_rat"), std::string::npos) << msg;
  EXPECT_NE(msg.find("fed.learning_rate"), std::string::npos) << msg;
  EXPECT_EQ(suggest_key("learning_rat"), std::optional<std::string>("fed.learning_rate"));
  EXPECT_FALSE(suggest_key("completely_unrelated_thing").has_value());
}

TEST(Config, TypeErrorsNameTheKey) {
  EXPECT_NE(error_of(R"({"fed": {"rounds": "many"}})").find("fed.rounds"), std::string::npos);
  EXPECT_NE(error_of(R"({"fed": {"clients": -3}})").find("fed.clients"), std::string::npos);
  EXPECT_NE(error_of(R"({"fed": {"optimizer": "sgd"}})").find("fed.optimizer"), std::string::npos);
  EXPECT_NE(error_of("[1, 2]").size(), 0u);
  EXPECT_NE(error_of("{not json").size(), 0u);
}

TEST(Config, DivisibilityConstraintIsNamed) {
  const std::string msg =
      error_of(R"({"partition": {"scheme": "noniid", "labels_per_client": 3}, "fed": {"clients": 15}})");
  EXPECT_NE(msg.find("divisible"), std::string::npos) << msg;
  EXPECT_NE(msg.find("l=3"), std::string::npos) << msg;
}

TEST(Config, CrossFieldChecks) {
  EXPECT_NE(error_of(R"({"fed": {"participation": 0.001}})").size(), 0u);
  EXPECT_NE(error_of(R"({"scheme": "fedova", "model": {"kind": "softmax-regression"}})").size(), 0u);
  EXPECT_NE(error_of(R"({"data": {"source": "idx"}})").size(), 0u);
  EXPECT_NE(error_of(R"({"sharing": {"beta": 2}})").size(), 0u);
  EXPECT_EQ(error_of(R"({"scheme": "fedova", "model": {"kind": "mlp1"}})"), "");
}

TEST(Config, OverridesApplyOneToOne) {
  ExperimentConfig cfg = parse_config_text("{}");
  apply_override(cfg, "fed.learning_rate=0.3");
  apply_override(cfg, "fed.optimizer=fim-lbfgs");
  apply_override(cfg, "seeds=[5,6]");
  apply_override(cfg, "name=trial");
  EXPECT_DOUBLE_EQ(cfg.round.learning_rate, 0.3);
  EXPECT_EQ(cfg.round.optimizer, OptimizerKind::FimLbfgs);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{5, 6}));
  EXPECT_EQ(cfg.name, "trial");
  EXPECT_THROW(apply_override(cfg, "no_equals_sign"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "fed.learnin_rate=1"), ConfigError);
}

TEST(Config, EffectiveConfigRoundTrips) {
  ExperimentConfig cfg = parse_config_text(
      R"({"name": "x", "scheme": "fedova", "fed": {"rounds": 9, "tau": 4}, "stop": {"target_accuracy": 0.8},
          "data": {"seed": 12}, "fedova": {"update": "fim-lbfgs", "balanced": true}})");
  const std::string dump = effective_config_json(cfg);
  ExperimentConfig again = parse_config_text(dump);
  EXPECT_EQ(effective_config_json(again), dump);
  auto parsed = nlohmann::json::parse(dump);
  for (const auto& key : config_keys()) EXPECT_TRUE(parsed.contains(key.key)) << key.key;
}

TEST(Config, EveryKeyDocumented) {
  for (const auto& key : config_keys()) {
    EXPECT_FALSE(key.type.empty()) << key.key;
    EXPECT_FALSE(key.description.empty()) << key.key;
  }
}
