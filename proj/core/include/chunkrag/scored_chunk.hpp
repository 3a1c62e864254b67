#pragma once

#include <optional>

#include "chunkrag/chunker.hpp"

namespace chunkrag {

/// Per-stage relevance scores, all in [0, 1].
struct RelevanceScore {
    double base = 0.0;
    double reflect = 0.0;
    double critic = 0.0;
    double combined = 0.0;
};

/// A retrieved chunk carried through the filtering stages.
struct ScoredChunk {
    Chunk chunk;

    // Hybrid retrieval: retrieval_score = w_bm25 * bm25_component + w_llm * dense_component.
    double retrieval_score = 0.0;
    double bm25_component = 0.0;
    double dense_component = 0.0;

    // Initial filtering sort key and its two halves.
    double tfidf_cosine = 0.0;
    double embedding_cosine = 0.0;
    double filter_score = 0.0;

    std::optional<RelevanceScore> relevance;

    const std::string& id() const noexcept { return chunk.id; }
};

}  // namespace chunkrag
