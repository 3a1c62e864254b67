#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkrag/llm_gateway.hpp"
#include "chunkrag/scored_chunk.hpp"

namespace chunkrag {

struct ScoreWeights {
    double base = 1.0;
    double reflect = 1.0;
    double critic = 1.0;

    void validate() const;
};

/// Weighted mean of the three stage scores (plain mean by default).
double combine_scores(double base, double reflect, double critic, const ScoreWeights& weights = {});

struct CriticContext {
    std::string_view chunk_text;
    std::string_view query;
};

/// A score adjuster applied after the critic's model score. Results are
/// clamped to [0, 1] after every step.
struct Heuristic {
    std::string name;
    std::function<double(double, const CriticContext&)> adjust;
};

/// Halves the score when the query names a year (1000-2100) that the chunk
/// never mentions.
Heuristic temporal_consistency_heuristic();
Heuristic scale_heuristic(double factor);
Heuristic clamp_min_heuristic(double floor);

/// Runs `heuristics` in order over `score`, clamping after each step.
double apply_heuristics(double score, std::span<const Heuristic> heuristics, const CriticContext& ctx);

/// Model relevance of a chunk to the query. An unparseable reply is retried
/// once; a second failure scores 0 and appends a message to `warnings`.
double base_score(std::string_view chunk_text, std::string_view query, LlmBackend& backend,
                  std::vector<std::string>* warnings = nullptr);

/// Second pass that shows the model its own score (two decimals) for revision.
double self_reflect(std::string_view chunk_text, std::string_view query, double base, LlmBackend& backend,
                    std::vector<std::string>* warnings = nullptr);

/// Critic pass: model score from the critic prompt, then the heuristics.
double critic_eval(std::string_view chunk_text, std::string_view query, double base, double reflect,
                   LlmBackend& backend, std::span<const Heuristic> heuristics,
                   std::vector<std::string>* warnings = nullptr);

struct StageBackends {
    LlmBackend& score;
    LlmBackend& reflect;
    LlmBackend& critic;
};

/// base -> reflect -> critic -> combine for one chunk.
RelevanceScore score_chunk(std::string_view chunk_text, std::string_view query, const StageBackends& backends,
                           std::span<const Heuristic> heuristics, const ScoreWeights& weights,
                           std::vector<std::string>* warnings = nullptr);

enum class ThresholdMode { Statistical, Llm };

struct ThresholdConfig {
    ThresholdMode mode = ThresholdMode::Statistical;
    double epsilon = 0.01;

    void validate() const;
};

enum class ThresholdBranch { MeanPlusStd, Mean, Llm };

std::string_view to_string(ThresholdBranch branch) noexcept;

struct ThresholdResult {
    double mean = 0.0;
    double stddev = 0.0;    // population
    double variance = 0.0;  // population
    double threshold = 0.0;
    ThresholdBranch branch = ThresholdBranch::Mean;
    bool llm_fallback = false;  // llm mode fell back to the statistical rule
};

/// Statistical mode: T = mean + stddev when the population variance is below
/// epsilon, else T = mean. LLM mode asks the threshold prompt with the scores
/// as two-decimal, comma-separated values and falls back to the statistical
/// rule when the reply cannot be used. Throws InvalidArgument on no scores.
ThresholdResult dynamic_threshold(std::span<const double> scores, const ThresholdConfig& cfg,
                                  LlmBackend* backend = nullptr, std::vector<std::string>* warnings = nullptr);

/// Rounding slack for apply_threshold. mean + stddev of two scores equals the
/// larger one exactly, but the floating-point sum can land an ulp above it.
inline constexpr double kThresholdSlack = 1e-12;

/// Hits whose combined score is >= threshold - kThresholdSlack, order preserved.
std::vector<ScoredChunk> apply_threshold(std::span<const ScoredChunk> hits, double threshold);

}  // namespace chunkrag
