#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkrag/chunker.hpp"
#include "chunkrag/embeddings.hpp"
#include "chunkrag/llm_gateway.hpp"
#include "chunkrag/rerank.hpp"
#include "chunkrag/retrieval.hpp"
#include "chunkrag/scoring.hpp"
#include "chunkrag/segmentation.hpp"

namespace chunkrag {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;
};

/// One model backend per LLM-driven stage.
struct StageBackendConfigs {
    LlmBackendConfig rewrite;
    LlmBackendConfig score;
    LlmBackendConfig reflect;
    LlmBackendConfig critic;
    LlmBackendConfig threshold;
    LlmBackendConfig generate;

    /// Applies `fn` to every stage config.
    template <typename Fn>
    void for_each(Fn&& fn) {
        for (auto* c : {&rewrite, &score, &reflect, &critic, &threshold, &generate}) {
            fn(*c);
        }
    }
};

struct PipelineConfig {
    SplitterOptions segmentation;
    ChunkerConfig chunker;
    EmbeddingProviderConfig embedding;
    Bm25Params bm25;
    HybridConfig hybrid;
    ScoreWeights score_weights;
    bool temporal_consistency = true;
    ThresholdConfig threshold;
    RerankConfig rerank;
    StageBackendConfigs backends;
    bool rewrite_fail_open = true;
    std::size_t jobs = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Full serialization, defaults included.
nlohmann::json to_json(const PipelineConfig& cfg);

/// Overlays `j` onto `base`. Unknown keys throw ConfigError carrying the dotted
/// key path (e.g. "chunker.thetaa"); type errors name the field likewise.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});

/// Reads one JSON object of a strict schema: every key must be consumed.
class StrictObject {
public:
    StrictObject(const nlohmann::json& j, std::string path);

    bool has(const std::string& key) const;
    const nlohmann::json* take(const std::string& key);

    template <typename T>
    void read(const std::string& key, T& out) {
        if (const auto* v = take(key); v != nullptr) {
            try {
                out = v->get<T>();
            } catch (const nlohmann::json::exception&) {
                throw_type_error(key);
            }
        }
    }

    std::string child_path(const std::string& key) const;

    /// Throws on the first key never read.
    void finish() const;

private:
    [[noreturn]] void throw_type_error(const std::string& key) const;

    const nlohmann::json& j_;
    std::string path_;
    std::vector<std::string> consumed_;
};

}  // namespace chunkrag
