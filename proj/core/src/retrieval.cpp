#include "chunkrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

void HybridConfig::validate() const {
    if (!(w_bm25 >= 0.0) || !(w_llm >= 0.0)) {
        throw ConfigError("hybrid weights must be non-negative");
    }
    if (std::abs(w_bm25 + w_llm - 1.0) > 1e-9) {
        throw ConfigError("hybrid.w_bm25 + hybrid.w_llm must equal 1");
    }
    if (k_per_arm < 1 || k_combined < 1) {
        throw ConfigError("hybrid.k_per_arm and hybrid.k_combined must be >= 1");
    }
    if (k_combined > 2 * k_per_arm) {
        throw ConfigError("hybrid.k_combined must not exceed 2 * hybrid.k_per_arm");
    }
    if (!(lambda_dup >= -1.0 && lambda_dup <= 1.0)) {
        throw ConfigError("hybrid.lambda_dup must lie in [-1, 1]");
    }
}

namespace {

std::map<std::string, double> min_max_normalize(std::span<const Hit> hits) {
    std::map<std::string, double> out;
    if (hits.empty()) {
        return out;
    }
    const auto [lo, hi] = std::minmax_element(hits.begin(), hits.end(),
                                              [](const Hit& a, const Hit& b) { return a.score < b.score; });
    const double min = lo->score;
    const double range = hi->score - min;
    for (const auto& h : hits) {
        out[h.chunk_id] = range > 0.0 ? (h.score - min) / range : 1.0;
    }
    return out;
}

}  // namespace

std::vector<ScoredChunk> combine_retrieval(std::span<const Hit> bm25_hits, std::span<const Hit> dense_hits,
                                           const HybridConfig& cfg, const ChunkIndex& store) {
    const auto bm25 = min_max_normalize(bm25_hits);
    const auto dense = min_max_normalize(dense_hits);

    std::map<std::string, std::pair<double, double>> components;
    for (const auto& [id, v] : bm25) {
        components[id].first = v;
    }
    for (const auto& [id, v] : dense) {
        components[id].second = v;
    }

    std::vector<ScoredChunk> out;
    out.reserve(components.size());
    for (const auto& [id, parts] : components) {
        ScoredChunk sc;
        sc.chunk = store.chunk(id);
        sc.bm25_component = parts.first;
        sc.dense_component = parts.second;
        sc.retrieval_score = cfg.w_bm25 * parts.first + cfg.w_llm * parts.second;
        out.push_back(std::move(sc));
    }
    std::sort(out.begin(), out.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.retrieval_score != b.retrieval_score) {
            return a.retrieval_score > b.retrieval_score;
        }
        return a.id() < b.id();
    });
    if (out.size() > cfg.k_combined) {
        out.resize(cfg.k_combined);
    }
    return out;
}

double tfidf_cosine(std::string_view query, std::string_view chunk_text, const Bm25Index& stats) {
    const auto n_docs = static_cast<double>(stats.n_docs());
    if (n_docs == 0.0) {
        return 0.0;
    }
    const auto weigh = [&](std::string_view s) {
        std::map<std::string, double> tf;
        for (auto& t : text::tokenize(s)) {
            tf[std::move(t)] += 1.0;
        }
        std::map<std::string, double> weights;
        for (const auto& [term, count] : tf) {
            const auto df = stats.document_frequency(term);
            if (df > 0) {
                weights[term] = count * std::log(n_docs / static_cast<double>(df));
            }
        }
        return weights;
    };
    const auto q = weigh(query);
    const auto c = weigh(chunk_text);

    double dot = 0.0;
    double qq = 0.0;
    double cc = 0.0;
    for (const auto& [term, w] : q) {
        qq += w * w;
        if (const auto it = c.find(term); it != c.end()) {
            dot += w * it->second;
        }
    }
    for (const auto& [term, w] : c) {
        cc += w * w;
    }
    if (qq == 0.0 || cc == 0.0) {
        return 0.0;
    }
    return std::clamp(dot / (std::sqrt(qq) * std::sqrt(cc)), 0.0, 1.0);
}

std::vector<ScoredChunk> initial_filter(std::vector<ScoredChunk> hits, std::string_view rewritten_query,
                                        const EmbeddingVector& query_vec, const Bm25Index& stats) {
    for (auto& h : hits) {
        if (!h.chunk.embedding.has_value()) {
            throw InvalidArgument("initial_filter: chunk '" + h.id() + "' has no embedding");
        }
        h.tfidf_cosine = tfidf_cosine(rewritten_query, h.chunk.text, stats);
        h.embedding_cosine = cosine_similarity(query_vec, *h.chunk.embedding);
        h.filter_score = 0.5 * h.tfidf_cosine + 0.5 * h.embedding_cosine;
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const ScoredChunk& a, const ScoredChunk& b) { return a.filter_score > b.filter_score; });
    return hits;
}

DedupResult dedup(std::span<const ScoredChunk> hits, double lambda_dup) {
    DedupResult result;
    for (const auto& h : hits) {
        if (!h.chunk.embedding.has_value()) {
            throw InvalidArgument("dedup: chunk '" + h.id() + "' has no embedding");
        }
        DedupDecision decision;
        decision.chunk_id = h.id();
        double max_cos = -std::numeric_limits<double>::infinity();
        for (const auto& k : result.kept) {
            const double cos = cosine_similarity(*h.chunk.embedding, *k.chunk.embedding);
            if (cos > max_cos) {
                max_cos = cos;
                decision.nearest_kept = k.id();
            }
        }
        if (!result.kept.empty()) {
            decision.max_cosine = max_cos;
        }
        decision.kept = result.kept.empty() || max_cos <= lambda_dup;
        if (decision.kept) {
            result.kept.push_back(h);
        } else {
            result.dropped.push_back(h);
        }
        result.decisions.push_back(std::move(decision));
    }
    return result;
}

double mean_pairwise_cosine(std::span<const ScoredChunk> hits) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        for (std::size_t j = i + 1; j < hits.size(); ++j) {
            sum += cosine_similarity(*hits[i].chunk.embedding, *hits[j].chunk.embedding);
            ++pairs;
        }
    }
    return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

}  // namespace chunkrag
