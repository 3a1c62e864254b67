#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkrag/chunker.hpp"
#include "chunkrag/embeddings.hpp"

namespace chunkrag {

inline constexpr std::string_view kIndexFormatVersion = "chunkrag-index-v1";

/// A retrieval result: chunk id and arm-specific score.
struct Hit {
    std::string chunk_id;
    double score = 0.0;

    friend bool operator==(const Hit&, const Hit&) = default;
};

/// Sorts by descending score, ties by ascending chunk id.
void sort_hits(std::vector<Hit>& hits);

/// Exact cosine k-NN over a flat list of unit vectors.
class VectorIndex {
public:
    void add(const std::string& id, const EmbeddingVector& vec);

    /// Full scan; top-k by cosine, ties by ascending id. Empty index -> empty.
    std::vector<Hit> search(const EmbeddingVector& query, std::size_t k) const;

    const EmbeddingVector* find(std::string_view id) const;
    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::unordered_map<std::string, std::size_t> positions_;
};

/// Okapi BM25 over an inverted index.
///
///   idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
///   score(d, q) = sum over distinct query terms t of
///                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
class Bm25Index {
public:
    struct Posting {
        std::string chunk_id;
        std::uint32_t tf = 0;

        friend bool operator==(const Posting&, const Posting&) = default;
    };

    explicit Bm25Index(double k1 = 1.5, double b = 0.75);

    void add(const std::string& id, std::string_view text);

    /// Chunks with a positive score, descending, ties by ascending id.
    std::vector<Hit> search(std::string_view query, std::size_t k) const;

    std::size_t n_docs() const noexcept { return doc_lengths_.size(); }
    double avgdl() const noexcept;
    std::size_t document_frequency(const std::string& term) const;
    double idf(const std::string& term) const;
    double k1() const noexcept { return k1_; }
    double b() const noexcept { return b_; }

    const std::map<std::string, std::vector<Posting>>& postings() const noexcept { return postings_; }
    const std::map<std::string, std::size_t>& doc_lengths() const noexcept { return doc_lengths_; }

    nlohmann::json to_json() const;
    static Bm25Index from_json(const nlohmann::json& j);

private:
    double k1_;
    double b_;
    std::map<std::string, std::vector<Posting>> postings_;  // each list sorted by chunk id
    std::map<std::string, std::size_t> doc_lengths_;
    std::size_t total_length_ = 0;
};

/// Chunk store plus its dense and lexical indexes.
///
/// Const member functions may run concurrently; add_chunks needs exclusive
/// access (many readers or one writer).
class ChunkIndex {
public:
    explicit ChunkIndex(double k1 = 1.5, double b = 0.75) : bm25_(k1, b) {}

    /// Adds embedded chunks to both indexes. All-or-nothing: throws
    /// InvalidArgument on a duplicate or unembedded chunk and DimensionError
    /// on a dimension mismatch before anything is inserted.
    void add_chunks(std::span<const Chunk> chunks);

    std::vector<Hit> dense_search(const EmbeddingVector& query, std::size_t k) const;
    std::vector<Hit> bm25_search(std::string_view query, std::size_t k) const;

    const Chunk& chunk(std::string_view id) const;
    const Chunk* find(std::string_view id) const;
    const std::map<std::string, Chunk, std::less<>>& chunks() const noexcept { return chunks_; }
    std::size_t size() const noexcept { return chunks_.size(); }
    std::size_t dim() const noexcept { return vectors_.dim(); }

    const VectorIndex& vectors() const noexcept { return vectors_; }
    const Bm25Index& bm25() const noexcept { return bm25_; }

    nlohmann::json to_json() const;
    static ChunkIndex from_json(const nlohmann::json& j);

    void save(const std::filesystem::path& path) const;
    /// Throws IoError, ParseError (truncated/malformed) or VersionMismatchError.
    static ChunkIndex load(const std::filesystem::path& path);

private:
    std::map<std::string, Chunk, std::less<>> chunks_;
    VectorIndex vectors_;
    Bm25Index bm25_;
};

}  // namespace chunkrag
