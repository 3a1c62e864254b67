#include "chunkrag/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

void ScoreWeights::validate() const {
    if (!(base >= 0.0) || !(reflect >= 0.0) || !(critic >= 0.0) || base + reflect + critic <= 0.0) {
        throw ConfigError("score weights must be non-negative with a positive sum");
    }
}

double combine_scores(double base, double reflect, double critic, const ScoreWeights& w) {
    if (w.base == w.reflect && w.reflect == w.critic) {
        return (base + reflect + critic) / 3.0;
    }
    return (w.base * base + w.reflect * reflect + w.critic * critic) / (w.base + w.reflect + w.critic);
}

namespace {

std::set<std::string> years_in(std::string_view s) {
    std::set<std::string> years;
    const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i = 0; i < s.size();) {
        if (!is_digit(s[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_digit(s[j])) {
            ++j;
        }
        if (j - i == 4) {
            const int value = std::stoi(std::string(s.substr(i, 4)));
            if (value >= 1000 && value <= 2100) {
                years.emplace(s.substr(i, 4));
            }
        }
        i = j;
    }
    return years;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

double scored_completion(const std::string& prompt, TemplateName tmpl, LlmBackend& backend,
                         std::vector<std::string>* warnings) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        const auto reply = complete(backend, prompt, tmpl);
        try {
            return parse_score(reply);
        } catch (const ParseError& e) {
            if (attempt == 1) {
                if (warnings != nullptr) {
                    warnings->push_back(std::string(to_string(tmpl)) + ": unparseable score after retry (" +
                                        e.what() + "); using 0");
                }
            }
        }
    }
    return 0.0;
}

}  // namespace

Heuristic temporal_consistency_heuristic() {
    return {"temporal_consistency", [](double score, const CriticContext& ctx) {
                const auto wanted = years_in(ctx.query);
                if (wanted.empty()) {
                    return score;
                }
                const auto present = years_in(ctx.chunk_text);
                const bool missing = std::any_of(wanted.begin(), wanted.end(),
                                                 [&](const std::string& y) { return !present.contains(y); });
                return missing ? score * 0.5 : score;
            }};
}

Heuristic scale_heuristic(double factor) {
    return {"scale", [factor](double score, const CriticContext&) { return score * factor; }};
}

Heuristic clamp_min_heuristic(double floor) {
    return {"clamp_min", [floor](double score, const CriticContext&) { return std::max(score, floor); }};
}

double apply_heuristics(double score, std::span<const Heuristic> heuristics, const CriticContext& ctx) {
    score = clamp01(score);
    for (const auto& h : heuristics) {
        score = clamp01(h.adjust(score, ctx));
    }
    return score;
}

double base_score(std::string_view chunk_text, std::string_view query, LlmBackend& backend,
                  std::vector<std::string>* warnings) {
    if (chunk_text.empty()) {
        throw InvalidArgument("base_score: chunk text must not be empty");
    }
    const auto prompt = render(prompt_template(TemplateName::RelevanceScore),
                               {{"chunk", std::string(chunk_text)}, {"query", std::string(query)}});
    return scored_completion(prompt, TemplateName::RelevanceScore, backend, warnings);
}

double self_reflect(std::string_view chunk_text, std::string_view query, double base, LlmBackend& backend,
                    std::vector<std::string>* warnings) {
    if (!(base >= 0.0 && base <= 1.0)) {
        throw InvalidArgument("self_reflect: base score must lie in [0, 1]");
    }
    const auto prompt = render(prompt_template(TemplateName::SelfReflect), {{"score", text::format_fixed(base, 2)},
                                                                            {"chunk", std::string(chunk_text)},
                                                                            {"query", std::string(query)}});
    return scored_completion(prompt, TemplateName::SelfReflect, backend, warnings);
}

double critic_eval(std::string_view chunk_text, std::string_view query, double base, double reflect,
                   LlmBackend& backend, std::span<const Heuristic> heuristics, std::vector<std::string>* warnings) {
    if (!(base >= 0.0 && base <= 1.0) || !(reflect >= 0.0 && reflect <= 1.0)) {
        throw InvalidArgument("critic_eval: scores must lie in [0, 1]");
    }
    const auto prompt = render(prompt_template(TemplateName::Critic), {{"base", text::format_fixed(base, 2)},
                                                                       {"reflect", text::format_fixed(reflect, 2)},
                                                                       {"chunk", std::string(chunk_text)},
                                                                       {"query", std::string(query)}});
    const double model_score = scored_completion(prompt, TemplateName::Critic, backend, warnings);
    return apply_heuristics(model_score, heuristics, CriticContext{chunk_text, query});
}

RelevanceScore score_chunk(std::string_view chunk_text, std::string_view query, const StageBackends& backends,
                           std::span<const Heuristic> heuristics, const ScoreWeights& weights,
                           std::vector<std::string>* warnings) {
    RelevanceScore s;
    s.base = base_score(chunk_text, query, backends.score, warnings);
    s.reflect = self_reflect(chunk_text, query, s.base, backends.reflect, warnings);
    s.critic = critic_eval(chunk_text, query, s.base, s.reflect, backends.critic, heuristics, warnings);
    s.combined = combine_scores(s.base, s.reflect, s.critic, weights);
    return s;
}

void ThresholdConfig::validate() const {
    if (!(epsilon > 0.0)) {
        throw ConfigError("threshold.epsilon must be > 0");
    }
}

std::string_view to_string(ThresholdBranch branch) noexcept {
    switch (branch) {
        case ThresholdBranch::MeanPlusStd:
            return "mean_plus_std";
        case ThresholdBranch::Mean:
            return "mean";
        case ThresholdBranch::Llm:
            return "llm";
    }
    return "unknown";
}

ThresholdResult dynamic_threshold(std::span<const double> scores, const ThresholdConfig& cfg, LlmBackend* backend,
                                  std::vector<std::string>* warnings) {
    cfg.validate();
    if (scores.empty()) {
        throw InvalidArgument("dynamic_threshold: no scores");
    }
    // Shifted accumulation keeps mean == x exactly when every score equals x.
    const double n = static_cast<double>(scores.size());
    const double pivot = scores.front();
    double shifted = 0.0;
    for (double s : scores) {
        shifted += s - pivot;
    }
    ThresholdResult r;
    r.mean = pivot + shifted / n;
    double squares = 0.0;
    for (double s : scores) {
        squares += (s - r.mean) * (s - r.mean);
    }
    r.variance = squares / n;
    r.stddev = std::sqrt(r.variance);
    if (r.variance < cfg.epsilon) {
        r.branch = ThresholdBranch::MeanPlusStd;
        r.threshold = r.mean + r.stddev;
    } else {
        r.branch = ThresholdBranch::Mean;
        r.threshold = r.mean;
    }

    if (cfg.mode == ThresholdMode::Llm) {
        if (backend == nullptr) {
            throw InvalidArgument("dynamic_threshold: llm mode needs a backend");
        }
        std::string list;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (i > 0) {
                list += ", ";
            }
            list += text::format_fixed(scores[i], 2);
        }
        const auto prompt = render(prompt_template(TemplateName::ThresholdDetermination), {{"scores", list}});
        try {
            r.threshold = parse_score(complete(*backend, prompt, TemplateName::ThresholdDetermination));
            r.branch = ThresholdBranch::Llm;
        } catch (const Error& e) {
            r.llm_fallback = true;
            if (warnings != nullptr) {
                warnings->push_back(std::string("threshold_determination: ") + e.what() +
                                    "; using the statistical threshold");
            }
        }
    }
    return r;
}

std::vector<ScoredChunk> apply_threshold(std::span<const ScoredChunk> hits, double threshold) {
    std::vector<ScoredChunk> kept;
    for (const auto& h : hits) {
        if (!h.relevance.has_value()) {
            throw InvalidArgument("apply_threshold: chunk '" + h.id() + "' has no relevance score");
        }
        if (h.relevance->combined >= threshold - kThresholdSlack) {
            kept.push_back(h);
        }
    }
    return kept;
}

}  // namespace chunkrag
