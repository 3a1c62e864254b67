#include "chunkrag/rerank.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "chunkrag/errors.hpp"
#include "chunkrag/http.hpp"

namespace chunkrag {

using nlohmann::json;

void RerankConfig::validate() const {
    if (kind == RerankKind::Remote && endpoint_url.empty()) {
        throw ConfigError("rerank.endpoint_url is required for the remote reranker");
    }
    if (top_n.has_value() && *top_n < 1) {
        throw ConfigError("rerank.top_n must be >= 1 when set");
    }
}

std::vector<ScoredChunk> local_rerank(std::span<const ScoredChunk> hits, const EmbeddingVector& query_vec,
                                      std::optional<std::size_t> top_n) {
    std::vector<std::pair<double, const ScoredChunk*>> keyed;
    keyed.reserve(hits.size());
    for (const auto& h : hits) {
        if (!h.chunk.embedding.has_value()) {
            throw InvalidArgument("rerank: chunk '" + h.id() + "' has no embedding");
        }
        keyed.emplace_back(cosine_similarity(query_vec, *h.chunk.embedding), &h);
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second->id() < b.second->id();
    });
    const auto n = std::min(keyed.size(), top_n.value_or(keyed.size()));
    std::vector<ScoredChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(*keyed[i].second);
    }
    return out;
}

namespace {

std::vector<ScoredChunk> remote_rerank(std::span<const ScoredChunk> hits, std::string_view query,
                                       const RerankConfig& cfg) {
    json body = {{"model", cfg.model_name}, {"query", std::string(query)}, {"documents", json::array()}};
    for (const auto& h : hits) {
        body["documents"].push_back(h.chunk.text);
    }
    if (cfg.top_n.has_value()) {
        body["top_n"] = *cfg.top_n;
    }
    http::RetryPolicy policy;
    policy.max_retries = cfg.max_retries;
    policy.timeout_seconds = cfg.timeout_seconds;
    policy.initial_backoff = std::chrono::milliseconds(cfg.initial_backoff_ms);
    const auto response = http::post_json(cfg.endpoint_url, body, http::api_key_from_env(cfg.api_key_env), policy);

    std::vector<std::pair<double, std::size_t>> ranked;
    std::set<std::size_t> seen;
    try {
        for (const auto& r : response.at("results")) {
            const auto index = r.at("index").get<std::size_t>();
            if (index >= hits.size() || !seen.insert(index).second) {
                throw BackendError("rerank response has an invalid or repeated index " + std::to_string(index));
            }
            ranked.emplace_back(r.at("relevance_score").get<double>(), index);
        }
    } catch (const json::exception& e) {
        throw BackendError(std::string("malformed rerank response: ") + e.what());
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first > b.first;
        }
        return a.second < b.second;
    });
    const auto n = std::min(ranked.size(), cfg.top_n.value_or(ranked.size()));
    std::vector<ScoredChunk> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(hits[ranked[i].second]);
    }
    return out;
}

}  // namespace

RerankOutcome rerank(std::span<const ScoredChunk> hits, std::string_view rewritten_query,
                     const EmbeddingVector& query_vec, const RerankConfig& cfg) {
    cfg.validate();
    RerankOutcome outcome;
    outcome.applied = cfg.kind;
    if (hits.empty()) {
        return outcome;
    }
    switch (cfg.kind) {
        case RerankKind::None:
            outcome.hits.assign(hits.begin(), hits.end());
            return outcome;
        case RerankKind::LocalFallback:
            outcome.hits = local_rerank(hits, query_vec, cfg.top_n);
            return outcome;
        case RerankKind::Remote:
            try {
                outcome.hits = remote_rerank(hits, rewritten_query, cfg);
            } catch (const Error& e) {
                outcome.warning = std::string("remote rerank failed, using local fallback: ") + e.what();
                outcome.applied = RerankKind::LocalFallback;
                outcome.hits = local_rerank(hits, query_vec, cfg.top_n);
            }
            return outcome;
    }
    return outcome;
}

}  // namespace chunkrag
