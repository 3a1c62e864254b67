#include "chunkrag/pipeline.hpp"

#include <tuple>

#include "chunkrag/text.hpp"
#include "parallel.hpp"

namespace chunkrag {

using nlohmann::json;

json CorpusStats::to_json() const {
    return json{{"documents", documents}, {"sentences", sentences}, {"chunks", chunks},
                {"oversize_chunks", oversize_chunks}};
}

namespace {

template <typename Fn>
auto with_document_context(const std::string& doc_id, Fn&& fn) {
    const auto prefix = "document '" + doc_id + "': ";
    try {
        return fn();
    } catch (const AuthError& e) {
        throw AuthError(prefix + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError(prefix + e.what());
    } catch (const BackendError& e) {
        throw BackendError(prefix + e.what());
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

}  // namespace

BuildResult build_index(std::span<const Document> docs, const PipelineConfig& cfg, EmbeddingProvider& provider) {
    cfg.chunker.validate();
    BuildResult result{ChunkIndex(cfg.bm25.k1, cfg.bm25.b), {}};
    std::vector<Chunk> all_chunks;
    for (const auto& doc : docs) {
        ++result.stats.documents;
        const auto sentences = split_sentences(doc, cfg.segmentation);
        result.stats.sentences += sentences.size();
        if (sentences.empty()) {
            continue;
        }
        auto chunks = with_document_context(doc.id, [&] {
            std::vector<std::string> texts;
            texts.reserve(sentences.size());
            for (const auto& s : sentences) {
                texts.push_back(s.text);
            }
            const auto embeddings = embed_texts(texts, provider, cfg.embedding.batch_size);
            return chunk_document(sentences, embeddings, cfg.chunker);
        });
        for (auto& c : chunks) {
            if (c.oversize(cfg.chunker.max_chars)) {
                ++result.stats.oversize_chunks;
            }
            all_chunks.push_back(std::move(c));
        }
    }
    all_chunks = embed_chunks(std::move(all_chunks), provider, cfg.embedding.batch_size);
    result.stats.chunks = all_chunks.size();
    result.index.add_chunks(all_chunks);
    return result;
}

CorpusStats build_index(const std::filesystem::path& corpus_path, CorpusFormat format,
                        const std::filesystem::path& index_path, const PipelineConfig& cfg) {
    cfg.validate();
    const auto docs = ingest_corpus(corpus_path, format);
    auto provider = make_embedding_provider(cfg.embedding);
    auto built = build_index(docs, cfg, *provider);
    built.index.save(index_path);
    return built.stats;
}

// ---------------------------------------------------------------------------
// Trace serialization

namespace {

json candidate_json(const CandidateRecord& c) {
    return json{{"chunk_id", c.chunk_id},
                {"retrieval_score", c.retrieval_score},
                {"bm25_component", c.bm25_component},
                {"dense_component", c.dense_component},
                {"tfidf_cosine", c.tfidf_cosine},
                {"embedding_cosine", c.embedding_cosine},
                {"filter_score", c.filter_score}};
}

json hits_json(const std::vector<Hit>& hits) {
    json out = json::array();
    for (const auto& h : hits) {
        out.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}});
    }
    return out;
}

CandidateRecord record_of(const ScoredChunk& sc) {
    return {sc.id(),          sc.retrieval_score,  sc.bm25_component, sc.dense_component,
            sc.tfidf_cosine, sc.embedding_cosine, sc.filter_score};
}

std::vector<std::string> ids_of(std::span<const ScoredChunk> hits) {
    std::vector<std::string> ids;
    ids.reserve(hits.size());
    for (const auto& h : hits) {
        ids.push_back(h.id());
    }
    return ids;
}

}  // namespace

json PipelineTrace::to_json() const {
    json combined_json = json::array();
    for (const auto& c : combined) {
        combined_json.push_back(candidate_json(c));
    }
    json filter_json = json::array();
    for (const auto& c : initial_filter) {
        filter_json.push_back(candidate_json(c));
    }
    json kept = json::array();
    json dropped = json::array();
    for (const auto& d : dedup) {
        json entry = {{"chunk_id", d.chunk_id}, {"max_cosine", nullptr}, {"nearest_kept", d.nearest_kept}};
        if (d.max_cosine.has_value()) {
            entry["max_cosine"] = *d.max_cosine;
        }
        (d.kept ? kept : dropped).push_back(std::move(entry));
    }
    json scores_json = json::array();
    for (const auto& [id, s] : scores) {
        scores_json.push_back({{"chunk_id", id},
                               {"base", s.base},
                               {"reflect", s.reflect},
                               {"critic", s.critic},
                               {"combined", s.combined}});
    }
    json threshold_json = nullptr;
    if (threshold.has_value()) {
        threshold_json = {{"mean", threshold->mean},
                          {"stddev", threshold->stddev},
                          {"variance", threshold->variance},
                          {"branch", to_string(threshold->branch)},
                          {"threshold", threshold->threshold},
                          {"llm_fallback", threshold->llm_fallback}};
    }
    json out = {
        {"version", kTraceFormatVersion},
        {"config", config},
        {"original_query", original_query},
        {"rewritten_query", rewritten_query},
        {"retrieval", {{"bm25", hits_json(bm25_hits)}, {"dense", hits_json(dense_hits)}}},
        {"combined", std::move(combined_json)},
        {"initial_filter", std::move(filter_json)},
        {"dedup", {{"kept", std::move(kept)}, {"dropped", std::move(dropped)}}},
        {"scores", std::move(scores_json)},
        {"threshold", std::move(threshold_json)},
        {"post_threshold", post_threshold},
        {"rerank", {{"applied", rerank_applied}, {"order", rerank_order}}},
        {"generation_prompt", generation_prompt},
        {"answer", answer},
        {"warnings", warnings},
        {"error", nullptr},
    };
    if (error.has_value()) {
        out["error"] = *error;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Backends

namespace {

auto backend_key(const LlmBackendConfig& c) {
    return std::tie(c.kind, c.model_name, c.endpoint_url, c.api_key_env, c.temperature, c.max_retries,
                    c.timeout_seconds, c.initial_backoff_ms, c.mock_script_path, c.max_in_flight,
                    c.requests_per_minute);
}

}  // namespace

PipelineBackends PipelineBackends::from_config(const StageBackendConfigs& cfg) {
    std::vector<std::pair<const LlmBackendConfig*, std::shared_ptr<LlmBackend>>> built;
    const auto get = [&](const LlmBackendConfig& c) {
        for (const auto& [known, backend] : built) {
            if (backend_key(*known) == backend_key(c)) {
                return backend;
            }
        }
        std::shared_ptr<LlmBackend> backend = make_llm_backend(c);
        built.emplace_back(&c, backend);
        return backend;
    };
    PipelineBackends b;
    b.rewrite = get(cfg.rewrite);
    b.score = get(cfg.score);
    b.reflect = get(cfg.reflect);
    b.critic = get(cfg.critic);
    b.threshold = get(cfg.threshold);
    b.generate = get(cfg.generate);
    return b;
}

PipelineBackends PipelineBackends::shared(std::shared_ptr<LlmBackend> backend) {
    return {backend, backend, backend, backend, backend, backend};
}

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(const ChunkIndex& index, PipelineConfig cfg)
    : Pipeline(index, cfg, make_embedding_provider(cfg.embedding), PipelineBackends::from_config(cfg.backends)) {}

Pipeline::Pipeline(const ChunkIndex& index, PipelineConfig cfg, std::shared_ptr<EmbeddingProvider> embedder,
                   PipelineBackends backends)
    : index_(index), cfg_(std::move(cfg)), embedder_(std::move(embedder)), backends_(std::move(backends)) {
    cfg_.hybrid.validate();
    cfg_.threshold.validate();
    cfg_.rerank.validate();
    cfg_.score_weights.validate();
    if (!embedder_ || !backends_.rewrite || !backends_.score || !backends_.reflect || !backends_.critic ||
        !backends_.threshold || !backends_.generate) {
        throw InvalidArgument("pipeline needs an embedder and a backend for every stage");
    }
    if (cfg_.temporal_consistency) {
        heuristics_.push_back(temporal_consistency_heuristic());
    }
}

EmbeddingVector Pipeline::embed_query(std::string_view text) const {
    const std::string owned(text);
    auto vectors = embed_texts(std::span<const std::string>(&owned, 1), *embedder_, 1);
    if (index_.size() > 0 && vectors.front().dim() != index_.dim()) {
        throw DimensionError("query embedding has dimension " + std::to_string(vectors.front().dim()) +
                             " but the index stores " + std::to_string(index_.dim()));
    }
    return std::move(vectors.front());
}

RetrievalOutcome Pipeline::retrieve(std::string_view query) const {
    return filter_impl(query, nullptr, nullptr, false).retrieval;
}

void Pipeline::score_all(std::vector<ScoredChunk>& hits, std::string_view query,
                         std::vector<std::string>* warnings) const {
    const StageBackends stages{*backends_.score, *backends_.reflect, *backends_.critic};
    std::vector<std::vector<std::string>> per_chunk(hits.size());
    detail::parallel_for(hits.size(), cfg_.jobs, [&](std::size_t i) {
        hits[i].relevance =
            score_chunk(hits[i].chunk.text, query, stages, heuristics_, cfg_.score_weights, &per_chunk[i]);
    });
    if (warnings != nullptr) {
        for (std::size_t i = 0; i < hits.size(); ++i) {
            for (auto& w : per_chunk[i]) {
                warnings->push_back(hits[i].id() + ": " + w);
            }
        }
    }
}

FilterOutcome Pipeline::filter(std::string_view query, std::vector<std::string>* warnings) const {
    return filter_impl(query, nullptr, warnings, true);
}

FilterOutcome Pipeline::filter_impl(std::string_view query, PipelineTrace* trace, std::vector<std::string>* warnings,
                                    bool score) const {
    FilterOutcome out;
    auto& r = out.retrieval;
    r.rewritten_query = rewrite_query(query, *backends_.rewrite, cfg_.rewrite_fail_open);
    if (trace != nullptr) {
        trace->rewritten_query = r.rewritten_query;
    }
    r.query_vec = embed_query(r.rewritten_query);
    r.bm25_hits = index_.bm25_search(r.rewritten_query, cfg_.hybrid.k_per_arm);
    r.dense_hits = index_.dense_search(r.query_vec, cfg_.hybrid.k_per_arm);
    r.combined = combine_retrieval(r.bm25_hits, r.dense_hits, cfg_.hybrid, index_);
    r.filtered = initial_filter(r.combined, r.rewritten_query, r.query_vec, index_.bm25());
    out.dedup = dedup(r.filtered, cfg_.hybrid.lambda_dup);
    if (trace != nullptr) {
        trace->bm25_hits = r.bm25_hits;
        trace->dense_hits = r.dense_hits;
        for (const auto& c : r.combined) {
            trace->combined.push_back(record_of(c));
        }
        for (const auto& c : r.filtered) {
            trace->initial_filter.push_back(record_of(c));
        }
        trace->dedup = out.dedup.decisions;
    }
    if (!score || out.dedup.kept.empty()) {
        return out;
    }

    score_all(out.dedup.kept, r.rewritten_query, warnings);
    std::vector<double> scores;
    scores.reserve(out.dedup.kept.size());
    for (const auto& h : out.dedup.kept) {
        scores.push_back(h.relevance->combined);
        if (trace != nullptr) {
            trace->scores.emplace_back(h.id(), *h.relevance);
        }
    }
    out.threshold = dynamic_threshold(scores, cfg_.threshold, backends_.threshold.get(), warnings);
    out.post_threshold = apply_threshold(out.dedup.kept, out.threshold->threshold);
    if (trace != nullptr) {
        trace->threshold = out.threshold;
        trace->post_threshold = ids_of(out.post_threshold);
    }
    return out;
}

std::string assemble_context(std::span<const ScoredChunk> hits) {
    std::string context;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (i > 0) {
            context += "\n\n";
        }
        context += "[" + std::to_string(i + 1) + "] " + hits[i].chunk.text;
    }
    return context;
}

void Pipeline::run(std::string_view query, Answer& answer) const {
    auto& trace = answer.trace;
    auto filtered = filter_impl(query, &trace, &trace.warnings, true);
    const auto& retrieval = filtered.retrieval;

    if (filtered.post_threshold.empty()) {
        answer.text = std::string(kCannotAnswer);
        trace.answer = answer.text;
        return;
    }

    auto reranked = rerank(filtered.post_threshold, retrieval.rewritten_query, retrieval.query_vec, cfg_.rerank);
    if (reranked.warning.has_value()) {
        trace.warnings.push_back(*reranked.warning);
    }
    trace.rerank_applied = std::string(reranked.applied == RerankKind::Remote          ? "remote"
                                       : reranked.applied == RerankKind::LocalFallback ? "local-fallback"
                                                                                       : "none");
    trace.rerank_order = ids_of(reranked.hits);

    trace.generation_prompt = render(prompt_template(TemplateName::AnswerGeneration),
                                     {{"context", assemble_context(reranked.hits)}, {"query", std::string(query)}});
    const auto reply = complete(*backends_.generate, trace.generation_prompt, TemplateName::AnswerGeneration);
    const auto trimmed = text::trim(reply);
    answer.text = trimmed.empty() ? std::string(kCannotAnswer) : std::string(trimmed);
    answer.used_chunks = trace.rerank_order;
    trace.answer = answer.text;
}

Answer Pipeline::answer(std::string_view query) const {
    Answer answer;
    answer.trace.config = to_json(cfg_);
    answer.trace.original_query = std::string(query);
    try {
        run(query, answer);
    } catch (const std::exception& e) {
        answer.trace.error = e.what();
        throw PipelineError(std::string("pipeline failed: ") + e.what(), std::move(answer.trace));
    }
    return answer;
}

}  // namespace chunkrag
