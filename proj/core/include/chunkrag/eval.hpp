#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkrag/pipeline.hpp"

namespace chunkrag {

struct QaExample {
    std::string id;
    std::string question;
    std::vector<std::string> gold_answers;
};

/// Dataset JSONL: `{"id", "question", "answers": [...]}` per line.
std::vector<QaExample> load_dataset(const std::filesystem::path& path);
std::vector<QaExample> parse_dataset(std::string_view content, std::string_view source = "<memory>");

/// Lowercase (ASCII) and collapse whitespace.
std::string normalize_answer(std::string_view s);

/// True when any normalized gold answer is a substring of the normalized answer.
bool answer_matches(std::string_view answer, std::span<const std::string> gold_answers);

/// Optional external scorer for long-form outputs (e.g. an atomic-fact metric).
using LongFormScorer = std::function<double(const QaExample&, const std::string& answer)>;

struct ExampleRecord {
    std::string id;
    std::string question;
    std::string answer;
    bool correct = false;
    std::vector<std::string> used_chunks;
    std::optional<std::string> error;
    std::optional<double> long_form_score;
    std::optional<PipelineTrace> trace;

    nlohmann::json to_json() const;  // trace excluded
};

struct EvalReport {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::size_t failed = 0;
    std::vector<ExampleRecord> records;  // dataset order
    std::optional<double> mean_long_form_score;

    nlohmann::json summary_json() const;
};

/// Runs every example through the pipeline (up to `jobs` at a time). Pipeline
/// failures count as incorrect and are recorded, never rethrown. Throws
/// InvalidArgument on an empty dataset.
EvalReport evaluate_accuracy(std::span<const QaExample> dataset, const Pipeline& pipeline, std::size_t jobs = 1,
                             const LongFormScorer& long_form = {});

void write_results_jsonl(const EvalReport& report, const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

struct AblationRow {
    double threshold = 0.0;
    std::size_t chunks_removed = 0;
    double avg_chunk_length = 0.0;  // whitespace tokens per kept chunk
    double sim_before = 0.0;        // mean pairwise cosine of the candidates
    double sim_after = 0.0;         // mean pairwise cosine of the kept chunks

    friend bool operator==(const AblationRow&, const AblationRow&) = default;
};

/// For each redundancy threshold, dedups every query's filtered candidates and
/// aggregates over the query set. Pairwise means pool all pairs of all queries.
/// Throws InvalidArgument for thresholds outside [0, 1].
std::vector<AblationRow> ablate_dedup(const Pipeline& pipeline, std::span<const double> thresholds,
                                      std::span<const std::string> queries);

std::string ablation_csv(std::span<const AblationRow> rows);
std::vector<AblationRow> parse_ablation_csv(std::string_view csv);
void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path);

enum class RetrieverKind { Naive, ChunkRag };

struct RetrieverComparison {
    double naive_avg_relevance = 0.0;
    double chunkrag_avg_relevance = 0.0;
    std::size_t naive_chunks = 0;
    std::size_t chunkrag_chunks = 0;

    nlohmann::json to_json() const;
};

/// Naive: dense top-k_combined for the original query, unfiltered. ChunkRag:
/// the filtered set after thresholding. Both sets are scored against the
/// original query by the pipeline's relevance backend; the means pool every
/// retrieved chunk. `first`/`second` choose what fills each slot of the result.
RetrieverComparison compare_retrievers(const Pipeline& pipeline, std::span<const std::string> queries,
                                       RetrieverKind first = RetrieverKind::Naive,
                                       RetrieverKind second = RetrieverKind::ChunkRag);

}  // namespace chunkrag
