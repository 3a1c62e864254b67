#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkrag/embeddings.hpp"
#include "chunkrag/scored_chunk.hpp"

namespace chunkrag {

enum class RerankKind { Remote, LocalFallback, None };

struct RerankConfig {
    RerankKind kind = RerankKind::LocalFallback;
    std::string model_name = "rerank-english-v3.0";
    std::string endpoint_url;
    std::string api_key_env = "RERANK_API_KEY";
    std::optional<std::size_t> top_n;  // empty keeps every chunk
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int initial_backoff_ms = 500;

    void validate() const;
};

struct RerankOutcome {
    std::vector<ScoredChunk> hits;
    RerankKind applied = RerankKind::None;  // LocalFallback when a remote call failed
    std::optional<std::string> warning;
};

/// Orders chunks by embedding cosine to the query, descending, ties by
/// ascending id, then truncates to top_n.
std::vector<ScoredChunk> local_rerank(std::span<const ScoredChunk> hits, const EmbeddingVector& query_vec,
                                      std::optional<std::size_t> top_n);

/// Remote: sends `{"model", "query", "documents", "top_n"}` and reorders by
/// `results[i].relevance_score`; any failure falls back to local_rerank.
/// LocalFallback: local_rerank. None: identity.
RerankOutcome rerank(std::span<const ScoredChunk> hits, std::string_view rewritten_query,
                     const EmbeddingVector& query_vec, const RerankConfig& cfg);

}  // namespace chunkrag
