#include <gtest/gtest.h>

#include "chunkrag/config.hpp"
#include "chunkrag/errors.hpp"

namespace chunkrag {
namespace {

using nlohmann::json;

std::string config_error(const json& j) {
    try {
        pipeline_config_from_json(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TEST(PipelineConfig, DefaultsValidate) { EXPECT_NO_THROW(PipelineConfig{}.validate()); }

TEST(PipelineConfig, RoundTripThroughJson) {
    PipelineConfig cfg;
    cfg.chunker.theta = 0.65;
    cfg.hybrid.lambda_dup = 0.7;
    cfg.rerank.top_n = 3;
    cfg.threshold.mode = ThresholdMode::Llm;
    cfg.backends.critic.model_name = "critic-model";
    cfg.temporal_consistency = false;
    const auto j = to_json(cfg);
    const auto back = pipeline_config_from_json(j);
    EXPECT_EQ(to_json(back), j);
    EXPECT_EQ(back.backends.critic.model_name, "critic-model");
    EXPECT_EQ(back.rerank.top_n, 3U);
}

TEST(PipelineConfig, PartialDocumentOverlaysDefaults) {
    const auto cfg = pipeline_config_from_json(json::parse(R"({"chunker": {"theta": 0.5}})"));
    EXPECT_DOUBLE_EQ(cfg.chunker.theta, 0.5);
    EXPECT_EQ(cfg.chunker.max_chars, 500U);
    EXPECT_DOUBLE_EQ(cfg.hybrid.lambda_dup, 0.9);
}

TEST(PipelineConfig, UnknownKeysNameTheirPath) {
    EXPECT_NE(config_error(json::parse(R"({"chunker": {"thetaa": 0.5}})")).find("chunker.thetaa"), std::string::npos);
    EXPECT_NE(config_error(json::parse(R"({"thetaa": 0.5})")).find("'thetaa'"), std::string::npos);
    EXPECT_NE(config_error(json::parse(R"({"backends": {"score": {"api_key": "x"}}})")).find("backends.score.api_key"),
              std::string::npos);
    EXPECT_NE(config_error(json::parse(R"({"backends": {"scorer": {}}})")).find("backends.scorer"),
              std::string::npos);
}

TEST(PipelineConfig, TypeErrorsNameTheField) {
    EXPECT_NE(config_error(json::parse(R"({"hybrid": {"k_per_arm": "many"}})")).find("hybrid.k_per_arm"),
              std::string::npos);
    EXPECT_NE(config_error(json::parse(R"({"rerank": {"kind": "fancy"}})")).find("rerank.kind"), std::string::npos);
}

TEST(PipelineConfig, ValidateNamesStage) {
    PipelineConfig cfg;
    cfg.backends.generate.kind = LlmKind::Remote;
    try {
        cfg.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("backends.generate"), std::string::npos);
    }
    cfg = {};
    cfg.jobs = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace chunkrag
