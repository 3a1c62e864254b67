#include "chunkrag/config.hpp"

#include <algorithm>

#include "chunkrag/errors.hpp"

namespace chunkrag {

using nlohmann::json;

StrictObject::StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
        throw ConfigError("config key '" + (path_.empty() ? std::string("<root>") : path_) + "' must be an object");
    }
}

std::string StrictObject::child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
}

bool StrictObject::has(const std::string& key) const { return j_.contains(key); }

const json* StrictObject::take(const std::string& key) {
    const auto it = j_.find(key);
    if (it == j_.end()) {
        return nullptr;
    }
    consumed_.push_back(key);
    return &*it;
}

void StrictObject::finish() const {
    for (const auto& [key, value] : j_.items()) {
        (void)value;
        if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end()) {
            throw ConfigError("unknown config key '" + child_path(key) + "'");
        }
    }
}

void StrictObject::throw_type_error(const std::string& key) const {
    throw ConfigError("config key '" + child_path(key) + "' has the wrong type");
}

namespace {

std::string_view embedding_kind_name(EmbeddingKind k) { return k == EmbeddingKind::Remote ? "remote" : "local"; }

EmbeddingKind parse_embedding_kind(const std::string& s, const std::string& path) {
    if (s == "remote") {
        return EmbeddingKind::Remote;
    }
    if (s == "local" || s == "deterministic-local") {
        return EmbeddingKind::DeterministicLocal;
    }
    throw ConfigError("config key '" + path + "': unknown embedding kind '" + s + "'");
}

std::string_view llm_kind_name(LlmKind k) { return k == LlmKind::Remote ? "remote" : "mock"; }

LlmKind parse_llm_kind(const std::string& s, const std::string& path) {
    if (s == "remote") {
        return LlmKind::Remote;
    }
    if (s == "mock") {
        return LlmKind::Mock;
    }
    throw ConfigError("config key '" + path + "': unknown backend kind '" + s + "'");
}

std::string_view rerank_kind_name(RerankKind k) {
    switch (k) {
        case RerankKind::Remote:
            return "remote";
        case RerankKind::LocalFallback:
            return "local-fallback";
        case RerankKind::None:
            return "none";
    }
    return "none";
}

RerankKind parse_rerank_kind(const std::string& s, const std::string& path) {
    if (s == "remote") {
        return RerankKind::Remote;
    }
    if (s == "local-fallback") {
        return RerankKind::LocalFallback;
    }
    if (s == "none") {
        return RerankKind::None;
    }
    throw ConfigError("config key '" + path + "': unknown rerank kind '" + s + "'");
}

json llm_to_json(const LlmBackendConfig& c) {
    return json{{"kind", llm_kind_name(c.kind)},
                {"model_name", c.model_name},
                {"endpoint_url", c.endpoint_url},
                {"api_key_env", c.api_key_env},
                {"temperature", c.temperature},
                {"max_retries", c.max_retries},
                {"timeout_seconds", c.timeout_seconds},
                {"initial_backoff_ms", c.initial_backoff_ms},
                {"mock_script_path", c.mock_script_path},
                {"max_in_flight", c.max_in_flight},
                {"requests_per_minute", c.requests_per_minute}};
}

void llm_from_json(StrictObject& o, LlmBackendConfig& c) {
    if (const auto* kind = o.take("kind"); kind != nullptr) {
        if (!kind->is_string()) {
            throw ConfigError("config key '" + o.child_path("kind") + "' has the wrong type");
        }
        c.kind = parse_llm_kind(kind->get<std::string>(), o.child_path("kind"));
    }
    o.read("model_name", c.model_name);
    o.read("endpoint_url", c.endpoint_url);
    o.read("api_key_env", c.api_key_env);
    o.read("temperature", c.temperature);
    o.read("max_retries", c.max_retries);
    o.read("timeout_seconds", c.timeout_seconds);
    o.read("initial_backoff_ms", c.initial_backoff_ms);
    o.read("mock_script_path", c.mock_script_path);
    o.read("max_in_flight", c.max_in_flight);
    o.read("requests_per_minute", c.requests_per_minute);
    o.finish();
}

template <typename Fn>
void with_child(StrictObject& parent, const std::string& key, Fn&& fn) {
    if (const auto* child = parent.take(key); child != nullptr) {
        StrictObject o(*child, parent.child_path(key));
        fn(o);
        o.finish();
    }
}

std::string read_string(StrictObject& o, const std::string& key) {
    std::string value;
    o.read(key, value);
    return value;
}

}  // namespace

void PipelineConfig::validate() const {
    chunker.validate();
    embedding.validate();
    hybrid.validate();
    score_weights.validate();
    threshold.validate();
    rerank.validate();
    if (!(bm25.k1 >= 0.0) || !(bm25.b >= 0.0 && bm25.b <= 1.0)) {
        throw ConfigError("bm25 requires k1 >= 0 and 0 <= b <= 1");
    }
    const std::pair<const char*, const LlmBackendConfig*> stages[] = {
        {"rewrite", &backends.rewrite}, {"score", &backends.score},         {"reflect", &backends.reflect},
        {"critic", &backends.critic},   {"threshold", &backends.threshold}, {"generate", &backends.generate},
    };
    for (const auto& [name, c] : stages) {
        try {
            c->validate();
        } catch (const ConfigError& e) {
            throw ConfigError(std::string("backends.") + name + ": " + e.what());
        }
    }
    if (jobs < 1) {
        throw ConfigError("jobs must be >= 1");
    }
}

json to_json(const PipelineConfig& cfg) {
    json rerank = {{"kind", rerank_kind_name(cfg.rerank.kind)},
                   {"model_name", cfg.rerank.model_name},
                   {"endpoint_url", cfg.rerank.endpoint_url},
                   {"api_key_env", cfg.rerank.api_key_env},
                   {"top_n", nullptr},
                   {"timeout_seconds", cfg.rerank.timeout_seconds},
                   {"max_retries", cfg.rerank.max_retries},
                   {"initial_backoff_ms", cfg.rerank.initial_backoff_ms}};
    if (cfg.rerank.top_n.has_value()) {
        rerank["top_n"] = *cfg.rerank.top_n;
    }
    const auto& b = cfg.backends;
    return json{
        {"segmentation", {{"abbreviations", cfg.segmentation.abbreviations}}},
        {"chunker", {{"theta", cfg.chunker.theta}, {"max_chars", cfg.chunker.max_chars}}},
        {"embedding",
         {{"kind", embedding_kind_name(cfg.embedding.kind)},
          {"model_name", cfg.embedding.model_name},
          {"endpoint_url", cfg.embedding.endpoint_url},
          {"api_key_env", cfg.embedding.api_key_env},
          {"dim", cfg.embedding.dim},
          {"batch_size", cfg.embedding.batch_size},
          {"timeout_seconds", cfg.embedding.timeout_seconds},
          {"max_retries", cfg.embedding.max_retries},
          {"initial_backoff_ms", cfg.embedding.initial_backoff_ms},
          {"max_in_flight", cfg.embedding.max_in_flight}}},
        {"bm25", {{"k1", cfg.bm25.k1}, {"b", cfg.bm25.b}}},
        {"hybrid",
         {{"w_bm25", cfg.hybrid.w_bm25},
          {"w_llm", cfg.hybrid.w_llm},
          {"k_per_arm", cfg.hybrid.k_per_arm},
          {"k_combined", cfg.hybrid.k_combined},
          {"lambda_dup", cfg.hybrid.lambda_dup}}},
        {"scoring",
         {{"weights",
           {{"base", cfg.score_weights.base},
            {"reflect", cfg.score_weights.reflect},
            {"critic", cfg.score_weights.critic}}},
          {"temporal_consistency", cfg.temporal_consistency}}},
        {"threshold",
         {{"mode", cfg.threshold.mode == ThresholdMode::Llm ? "llm" : "statistical"},
          {"epsilon", cfg.threshold.epsilon}}},
        {"rerank", std::move(rerank)},
        {"backends",
         {{"rewrite", llm_to_json(b.rewrite)},
          {"score", llm_to_json(b.score)},
          {"reflect", llm_to_json(b.reflect)},
          {"critic", llm_to_json(b.critic)},
          {"threshold", llm_to_json(b.threshold)},
          {"generate", llm_to_json(b.generate)}}},
        {"rewrite_fail_open", cfg.rewrite_fail_open},
        {"jobs", cfg.jobs},
    };
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig cfg) {
    StrictObject root(j, "");
    with_child(root, "segmentation", [&](StrictObject& o) { o.read("abbreviations", cfg.segmentation.abbreviations); });
    with_child(root, "chunker", [&](StrictObject& o) {
        o.read("theta", cfg.chunker.theta);
        o.read("max_chars", cfg.chunker.max_chars);
    });
    with_child(root, "embedding", [&](StrictObject& o) {
        if (o.has("kind")) {
            cfg.embedding.kind = parse_embedding_kind(read_string(o, "kind"), o.child_path("kind"));
        }
        o.read("model_name", cfg.embedding.model_name);
        o.read("endpoint_url", cfg.embedding.endpoint_url);
        o.read("api_key_env", cfg.embedding.api_key_env);
        o.read("dim", cfg.embedding.dim);
        o.read("batch_size", cfg.embedding.batch_size);
        o.read("timeout_seconds", cfg.embedding.timeout_seconds);
        o.read("max_retries", cfg.embedding.max_retries);
        o.read("initial_backoff_ms", cfg.embedding.initial_backoff_ms);
        o.read("max_in_flight", cfg.embedding.max_in_flight);
    });
    with_child(root, "bm25", [&](StrictObject& o) {
        o.read("k1", cfg.bm25.k1);
        o.read("b", cfg.bm25.b);
    });
    with_child(root, "hybrid", [&](StrictObject& o) {
        o.read("w_bm25", cfg.hybrid.w_bm25);
        o.read("w_llm", cfg.hybrid.w_llm);
        o.read("k_per_arm", cfg.hybrid.k_per_arm);
        o.read("k_combined", cfg.hybrid.k_combined);
        o.read("lambda_dup", cfg.hybrid.lambda_dup);
    });
    with_child(root, "scoring", [&](StrictObject& o) {
        with_child(o, "weights", [&](StrictObject& w) {
            w.read("base", cfg.score_weights.base);
            w.read("reflect", cfg.score_weights.reflect);
            w.read("critic", cfg.score_weights.critic);
        });
        o.read("temporal_consistency", cfg.temporal_consistency);
    });
    with_child(root, "threshold", [&](StrictObject& o) {
        if (o.has("mode")) {
            const auto mode = read_string(o, "mode");
            if (mode == "statistical") {
                cfg.threshold.mode = ThresholdMode::Statistical;
            } else if (mode == "llm") {
                cfg.threshold.mode = ThresholdMode::Llm;
            } else {
                throw ConfigError("config key '" + o.child_path("mode") + "': unknown threshold mode '" + mode + "'");
            }
        }
        o.read("epsilon", cfg.threshold.epsilon);
    });
    with_child(root, "rerank", [&](StrictObject& o) {
        if (o.has("kind")) {
            cfg.rerank.kind = parse_rerank_kind(read_string(o, "kind"), o.child_path("kind"));
        }
        o.read("model_name", cfg.rerank.model_name);
        o.read("endpoint_url", cfg.rerank.endpoint_url);
        o.read("api_key_env", cfg.rerank.api_key_env);
        if (const auto* top_n = o.take("top_n"); top_n != nullptr) {
            if (top_n->is_null()) {
                cfg.rerank.top_n.reset();
            } else if (top_n->is_number_unsigned()) {
                cfg.rerank.top_n = top_n->get<std::size_t>();
            } else {
                throw ConfigError("config key '" + o.child_path("top_n") + "' has the wrong type");
            }
        }
        o.read("timeout_seconds", cfg.rerank.timeout_seconds);
        o.read("max_retries", cfg.rerank.max_retries);
        o.read("initial_backoff_ms", cfg.rerank.initial_backoff_ms);
    });
    with_child(root, "backends", [&](StrictObject& o) {
        const std::pair<const char*, LlmBackendConfig*> stages[] = {
            {"rewrite", &cfg.backends.rewrite}, {"score", &cfg.backends.score},
            {"reflect", &cfg.backends.reflect}, {"critic", &cfg.backends.critic},
            {"threshold", &cfg.backends.threshold}, {"generate", &cfg.backends.generate},
        };
        for (const auto& [name, c] : stages) {
            if (const auto* child = o.take(name); child != nullptr) {
                StrictObject stage(*child, o.child_path(name));
                llm_from_json(stage, *c);
            }
        }
    });
    root.read("rewrite_fail_open", cfg.rewrite_fail_open);
    root.read("jobs", cfg.jobs);
    root.finish();
    return cfg;
}

}  // namespace chunkrag
