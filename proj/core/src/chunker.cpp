#include "chunkrag/chunker.hpp"

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

void ChunkerConfig::validate() const {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigError("chunker.theta must lie in [0, 1]");
    }
    if (max_chars < 1) {
        throw ConfigError("chunker.max_chars must be >= 1");
    }
}

ChunkingResult chunk_document_traced(std::span<const Sentence> sentences,
                                     std::span<const EmbeddingVector> sentence_embeddings,
                                     const ChunkerConfig& cfg) {
    cfg.validate();
    if (sentences.size() != sentence_embeddings.size()) {
        throw InvalidArgument("chunk_document: " + std::to_string(sentences.size()) + " sentences but " +
                              std::to_string(sentence_embeddings.size()) + " embeddings");
    }
    ChunkingResult result;
    if (sentences.empty()) {
        return result;
    }

    const auto open_chunk = [&](std::size_t i) {
        Chunk chunk;
        chunk.doc_id = sentences[i].doc_id;
        chunk.id = chunk.doc_id + "#" + std::to_string(result.chunks.size());
        chunk.sentence_begin = i;
        chunk.sentence_end = i + 1;
        chunk.text = sentences[i].text;
        chunk.char_len = text::codepoint_length(chunk.text);
        result.chunks.push_back(std::move(chunk));
    };

    open_chunk(0);
    for (std::size_t i = 1; i < sentences.size(); ++i) {
        auto& current = result.chunks.back();
        const double cos = cosine_similarity(sentence_embeddings[i - 1], sentence_embeddings[i]);
        const auto len = text::codepoint_length(sentences[i].text);
        if (cos < cfg.theta) {
            result.boundaries.push_back({i, BoundaryReason::Similarity, cos});
            open_chunk(i);
        } else if (current.char_len + 1 + len > cfg.max_chars) {
            result.boundaries.push_back({i, BoundaryReason::Cap, cos});
            open_chunk(i);
        } else {
            current.text += ' ';
            current.text += sentences[i].text;
            current.char_len += 1 + len;
            current.sentence_end = i + 1;
        }
    }
    return result;
}

std::vector<Chunk> chunk_document(std::span<const Sentence> sentences,
                                  std::span<const EmbeddingVector> sentence_embeddings, const ChunkerConfig& cfg) {
    return chunk_document_traced(sentences, sentence_embeddings, cfg).chunks;
}

std::vector<Chunk> embed_chunks(std::vector<Chunk> chunks, EmbeddingProvider& provider, std::size_t batch_size) {
    std::vector<std::string> texts;
    texts.reserve(chunks.size());
    for (const auto& c : chunks) {
        texts.push_back(c.text);
    }
    auto vectors = embed_texts(texts, provider, batch_size);
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        chunks[i].embedding = std::move(vectors[i]);
    }
    return chunks;
}

}  // namespace chunkrag
