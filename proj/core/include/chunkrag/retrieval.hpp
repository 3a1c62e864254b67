#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkrag/embeddings.hpp"
#include "chunkrag/index.hpp"
#include "chunkrag/scored_chunk.hpp"

namespace chunkrag {

struct HybridConfig {
    double w_bm25 = 0.5;
    double w_llm = 0.5;
    std::size_t k_per_arm = 20;
    std::size_t k_combined = 10;
    double lambda_dup = 0.9;

    void validate() const;
};

/// Min-max normalizes each arm over its own hits (a single hit or a constant
/// list normalizes to 1.0), scores the union by the weighted sum with absent
/// arms contributing 0, and keeps the top k_combined (ties by ascending id).
/// Hit ids must exist in `store`.
std::vector<ScoredChunk> combine_retrieval(std::span<const Hit> bm25_hits, std::span<const Hit> dense_hits,
                                           const HybridConfig& cfg, const ChunkIndex& store);

/// Cosine of raw-tf * ln(N/df) vectors over the store's corpus statistics.
/// Terms unseen in the corpus carry no weight; a zero vector has cosine 0.
double tfidf_cosine(std::string_view query, std::string_view chunk_text, const Bm25Index& stats);

/// Scores each hit by 0.5 * tfidf_cosine + 0.5 * embedding cosine to the
/// query and stably re-sorts descending by that key. Nothing is dropped.
std::vector<ScoredChunk> initial_filter(std::vector<ScoredChunk> hits, std::string_view rewritten_query,
                                        const EmbeddingVector& query_vec, const Bm25Index& stats);

struct DedupDecision {
    std::string chunk_id;
    bool kept = false;
    std::optional<double> max_cosine;  // against already-kept hits; empty for the first
    std::string nearest_kept;          // id of the most similar kept hit
};

struct DedupResult {
    std::vector<ScoredChunk> kept;
    std::vector<ScoredChunk> dropped;
    std::vector<DedupDecision> decisions;  // one per input hit, in input order
};

/// Greedy redundancy removal in rank order: a hit survives iff its maximum
/// embedding cosine to every already-kept hit is <= lambda_dup.
DedupResult dedup(std::span<const ScoredChunk> hits, double lambda_dup);

/// Mean cosine over all unordered pairs; 0 when fewer than two chunks.
double mean_pairwise_cosine(std::span<const ScoredChunk> hits);

}  // namespace chunkrag
