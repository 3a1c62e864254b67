#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkrag/config.hpp"
#include "chunkrag/errors.hpp"
#include "chunkrag/index.hpp"
#include "chunkrag/retrieval.hpp"
#include "chunkrag/scoring.hpp"

namespace chunkrag {

inline constexpr std::string_view kTraceFormatVersion = "chunkrag-trace-v1";

struct CorpusStats {
    std::size_t documents = 0;
    std::size_t sentences = 0;
    std::size_t chunks = 0;
    std::size_t oversize_chunks = 0;

    nlohmann::json to_json() const;
};

struct BuildResult {
    ChunkIndex index;
    CorpusStats stats;
};

/// split -> embed sentences -> chunk -> embed chunks -> index.
BuildResult build_index(std::span<const Document> docs, const PipelineConfig& cfg, EmbeddingProvider& provider);

/// Same, reading the corpus from disk and saving the index to `index_path`.
CorpusStats build_index(const std::filesystem::path& corpus_path, CorpusFormat format,
                        const std::filesystem::path& index_path, const PipelineConfig& cfg);

/// Candidate as it stood after hybrid retrieval and initial filtering.
struct CandidateRecord {
    std::string chunk_id;
    double retrieval_score = 0.0;
    double bm25_component = 0.0;
    double dense_component = 0.0;
    double tfidf_cosine = 0.0;
    double embedding_cosine = 0.0;
    double filter_score = 0.0;
};

/// Everything each stage saw and produced for one query.
struct PipelineTrace {
    nlohmann::json config;
    std::string original_query;
    std::string rewritten_query;
    std::vector<Hit> bm25_hits;
    std::vector<Hit> dense_hits;
    std::vector<CandidateRecord> combined;
    std::vector<CandidateRecord> initial_filter;
    std::vector<DedupDecision> dedup;
    std::vector<std::pair<std::string, RelevanceScore>> scores;
    std::optional<ThresholdResult> threshold;
    std::vector<std::string> post_threshold;
    std::vector<std::string> rerank_order;
    std::string rerank_applied;
    std::string generation_prompt;
    std::string answer;
    std::vector<std::string> warnings;
    std::optional<std::string> error;

    nlohmann::json to_json() const;
};

struct Answer {
    std::string text;
    std::vector<std::string> used_chunks;
    PipelineTrace trace;
};

/// Raised when a stage fails unrecoverably; carries the partial trace.
class PipelineError : public Error {
public:
    PipelineError(const std::string& what, PipelineTrace trace) : Error(what), trace_(std::move(trace)) {}

    const PipelineTrace& trace() const noexcept { return trace_; }

private:
    PipelineTrace trace_;
};

struct PipelineBackends {
    std::shared_ptr<LlmBackend> rewrite;
    std::shared_ptr<LlmBackend> score;
    std::shared_ptr<LlmBackend> reflect;
    std::shared_ptr<LlmBackend> critic;
    std::shared_ptr<LlmBackend> threshold;
    std::shared_ptr<LlmBackend> generate;

    /// One backend per stage from its config. Stages whose configs are equal
    /// share a backend instance.
    static PipelineBackends from_config(const StageBackendConfigs& cfg);
    /// The same backend for every stage.
    static PipelineBackends shared(std::shared_ptr<LlmBackend> backend);
};

/// Output of the retrieval half (rewrite, hybrid retrieval, initial filter).
struct RetrievalOutcome {
    std::string rewritten_query;
    EmbeddingVector query_vec;
    std::vector<Hit> bm25_hits;
    std::vector<Hit> dense_hits;
    std::vector<ScoredChunk> combined;
    std::vector<ScoredChunk> filtered;  // initial_filter order
};

/// Output of retrieval, dedup, scoring and thresholding (no rerank/generation).
struct FilterOutcome {
    RetrievalOutcome retrieval;
    DedupResult dedup;
    std::optional<ThresholdResult> threshold;
    std::vector<ScoredChunk> post_threshold;
};

/// Query-time orchestration over a loaded index. answer() is const and may be
/// called from several threads at once.
class Pipeline {
public:
    Pipeline(const ChunkIndex& index, PipelineConfig cfg);
    Pipeline(const ChunkIndex& index, PipelineConfig cfg, std::shared_ptr<EmbeddingProvider> embedder,
             PipelineBackends backends);

    Answer answer(std::string_view query) const;

    /// Rewrite, hybrid retrieval and initial filter; `filtered` feeds dedup.
    RetrievalOutcome retrieve(std::string_view query) const;
    FilterOutcome filter(std::string_view query, std::vector<std::string>* warnings = nullptr) const;

    /// Scores every hit (base -> reflect -> critic -> combine), fanning out over cfg.jobs workers.
    void score_all(std::vector<ScoredChunk>& hits, std::string_view query,
                   std::vector<std::string>* warnings = nullptr) const;

    EmbeddingVector embed_query(std::string_view text) const;

    const PipelineConfig& config() const noexcept { return cfg_; }
    const ChunkIndex& index() const noexcept { return index_; }
    const PipelineBackends& backends() const noexcept { return backends_; }

private:
    void run(std::string_view query, Answer& answer) const;
    FilterOutcome filter_impl(std::string_view query, PipelineTrace* trace, std::vector<std::string>* warnings,
                              bool score) const;

    const ChunkIndex& index_;
    PipelineConfig cfg_;
    std::shared_ptr<EmbeddingProvider> embedder_;
    PipelineBackends backends_;
    std::vector<Heuristic> heuristics_;
};

/// Numbered context block used in the generation prompt ("[1] ...", blank-line separated).
std::string assemble_context(std::span<const ScoredChunk> hits);

}  // namespace chunkrag
