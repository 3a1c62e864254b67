#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chunkrag/embeddings.hpp"
#include "chunkrag/segmentation.hpp"

namespace chunkrag {

struct ChunkerConfig {
    double theta = 0.8;
    std::size_t max_chars = 500;

    void validate() const;
};

struct Chunk {
    std::string id;  // "<doc_id>#<ordinal>"
    std::string doc_id;
    std::size_t sentence_begin = 0;  // half-open sentence ordinal range
    std::size_t sentence_end = 0;
    std::string text;                // sentence texts joined by single spaces
    std::size_t char_len = 0;        // code points in `text`
    std::optional<EmbeddingVector> embedding;

    std::size_t sentence_count() const noexcept { return sentence_end - sentence_begin; }
    bool oversize(std::size_t max_chars) const noexcept { return sentence_count() == 1 && char_len > max_chars; }
};

enum class BoundaryReason { Similarity, Cap };

/// Why a chunk starts at `sentence` (never recorded for sentence 0).
struct ChunkBoundary {
    std::size_t sentence = 0;
    BoundaryReason reason = BoundaryReason::Similarity;
    double cosine = 0.0;  // similarity of sentence-1 and sentence
};

struct ChunkingResult {
    std::vector<Chunk> chunks;
    std::vector<ChunkBoundary> boundaries;
};

/// Greedy left-to-right grouping: sentence i opens a new chunk when its cosine
/// similarity to sentence i-1 is below theta, or when appending it (with one
/// joining space) would push the chunk past max_chars. A single sentence
/// longer than max_chars becomes its own chunk.
///
/// Throws InvalidArgument when the two lists differ in length.
ChunkingResult chunk_document_traced(std::span<const Sentence> sentences,
                                     std::span<const EmbeddingVector> sentence_embeddings,
                                     const ChunkerConfig& cfg);

std::vector<Chunk> chunk_document(std::span<const Sentence> sentences,
                                  std::span<const EmbeddingVector> sentence_embeddings, const ChunkerConfig& cfg);

/// Attaches an embedding of each chunk's full text, batching through `provider`.
std::vector<Chunk> embed_chunks(std::vector<Chunk> chunks, EmbeddingProvider& provider, std::size_t batch_size);

}  // namespace chunkrag
