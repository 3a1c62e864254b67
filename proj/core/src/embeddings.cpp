#include "chunkrag/embeddings.hpp"

#include <algorithm>
#include <cmath>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

namespace {

double l2_norm(std::span<const double> v) {
    double sum = 0.0;
    for (double x : v) {
        sum += x * x;
    }
    return std::sqrt(sum);
}

}  // namespace

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    if (raw.empty()) {
        throw InvalidArgument("embedding vector must have at least one dimension");
    }
    const double norm = l2_norm(raw);
    if (norm == 0.0 || !std::isfinite(norm)) {
        std::fill(raw.begin(), raw.end(), 0.0);
        raw[0] = 1.0;
        return EmbeddingVector(std::move(raw));
    }
    for (auto& x : raw) {
        x /= norm;
    }
    return EmbeddingVector(std::move(raw));
}

EmbeddingVector EmbeddingVector::from_unit(std::vector<double> values) {
    if (values.empty()) {
        throw InvalidArgument("embedding vector must have at least one dimension");
    }
    if (std::abs(l2_norm(values) - 1.0) > 1e-6) {
        throw InvalidArgument("embedding vector is not unit length");
    }
    return EmbeddingVector(std::move(values));
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("cosine similarity of vectors with dimensions " + std::to_string(a.dim()) + " and " +
                             std::to_string(b.dim()));
    }
    const auto x = a.values();
    const auto y = b.values();
    double dot = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * y[i];
    }
    return std::clamp(dot, -1.0, 1.0);
}

void EmbeddingProviderConfig::validate() const {
    if (batch_size < 1) {
        throw ConfigError("embedding.batch_size must be >= 1");
    }
    if (kind == EmbeddingKind::DeterministicLocal && dim < 8) {
        throw ConfigError("embedding.dim must be >= 8 for the local embedder");
    }
    if (kind == EmbeddingKind::Remote && endpoint_url.empty()) {
        throw ConfigError("embedding.endpoint_url is required for the remote embedder");
    }
    if (max_retries < 0) {
        throw ConfigError("embedding.max_retries must be >= 0");
    }
    if (timeout_seconds <= 0) {
        throw ConfigError("embedding.timeout_seconds must be positive");
    }
}

LocalHashEmbedder::LocalHashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
    if (dim_ < 8) {
        throw ConfigError("local embedder dimension must be >= 8");
    }
}

EmbeddingVector LocalHashEmbedder::embed(std::string_view input) const {
    const auto lowered = text::to_lower_ascii(input);
    std::vector<char32_t> cps{U' '};
    const auto decoded = text::decode_utf8(lowered);
    cps.insert(cps.end(), decoded.begin(), decoded.end());
    cps.push_back(U' ');

    std::vector<double> counts(dim_, 0.0);
    std::string gram;
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        gram.clear();
        for (std::size_t k = 0; k < 3; ++k) {
            text::append_utf8(gram, cps[i + k]);
        }
        counts[text::fnv1a64(gram, seed_) % dim_] += 1.0;
    }
    return EmbeddingVector::normalized(std::move(counts));
}

std::vector<EmbeddingVector> LocalHashEmbedder::embed_batch(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(embed(t));
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(EmbeddingProviderConfig cfg) : cfg_(std::move(cfg)), gate_(cfg_.max_in_flight) {
    cfg_.validate();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) {
    if (texts.empty()) {
        return {};
    }
    nlohmann::json body = {{"model", cfg_.model_name}, {"input", nlohmann::json::array()}};
    for (const auto& t : texts) {
        body["input"].push_back(t);
    }
    http::RetryPolicy policy;
    policy.max_retries = cfg_.max_retries;
    policy.timeout_seconds = cfg_.timeout_seconds;
    policy.initial_backoff = std::chrono::milliseconds(cfg_.initial_backoff_ms);

    nlohmann::json response;
    {
        auto permit = gate_.acquire();
        response = http::post_json(cfg_.endpoint_url, body, http::api_key_from_env(cfg_.api_key_env), policy);
    }

    const auto data = response.find("data");
    if (data == response.end() || !data->is_array() || data->size() != texts.size()) {
        throw BackendError("embeddings response must carry one 'data' entry per input");
    }
    std::vector<std::vector<double>> raw(texts.size());
    for (std::size_t i = 0; i < data->size(); ++i) {
        const auto& item = (*data)[i];
        std::size_t slot = i;
        if (const auto idx = item.find("index"); idx != item.end() && idx->is_number_unsigned()) {
            slot = idx->get<std::size_t>();
        }
        const auto emb = item.find("embedding");
        if (slot >= raw.size() || emb == item.end() || !emb->is_array() || !raw[slot].empty()) {
            throw BackendError("malformed embeddings response entry " + std::to_string(i));
        }
        try {
            raw[slot] = emb->get<std::vector<double>>();
        } catch (const nlohmann::json::exception&) {
            throw BackendError("non-numeric embedding in response entry " + std::to_string(i));
        }
    }

    const std::size_t dim = raw.front().size();
    if (dim == 0) {
        throw BackendError("embeddings response contains an empty vector");
    }
    for (const auto& v : raw) {
        if (v.size() != dim) {
            throw DimensionError("embeddings response mixes dimensions " + std::to_string(dim) + " and " +
                                 std::to_string(v.size()));
        }
    }
    {
        std::lock_guard lock(dim_mutex_);
        if (locked_dim_ == 0) {
            locked_dim_ = dim;
        } else if (locked_dim_ != dim) {
            throw DimensionError("embedding dimension changed from " + std::to_string(locked_dim_) + " to " +
                                 std::to_string(dim));
        }
    }

    std::vector<EmbeddingVector> out;
    out.reserve(raw.size());
    for (auto& v : raw) {
        out.push_back(EmbeddingVector::normalized(std::move(v)));
    }
    return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg) {
    cfg.validate();
    if (cfg.kind == EmbeddingKind::Remote) {
        return std::make_unique<RemoteEmbedder>(cfg);
    }
    return std::make_unique<LocalHashEmbedder>(cfg.dim);
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, EmbeddingProvider& provider,
                                         std::size_t batch_size) {
    if (batch_size == 0) {
        throw InvalidArgument("batch_size must be >= 1");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t begin = 0; begin < texts.size(); begin += batch_size) {
        const auto end = std::min(texts.size(), begin + batch_size);
        const auto range = "embedding batch [" + std::to_string(begin) + ", " + std::to_string(end) + "): ";
        std::vector<EmbeddingVector> batch;
        try {
            batch = provider.embed_batch(texts.subspan(begin, end - begin));
        } catch (const AuthError& e) {
            throw AuthError(range + e.what());
        } catch (const DimensionError& e) {
            throw DimensionError(range + e.what());
        } catch (const Error& e) {
            throw BackendError(range + e.what());
        }
        if (batch.size() != end - begin) {
            throw BackendError(range + "provider returned " + std::to_string(batch.size()) + " vectors");
        }
        for (auto& v : batch) {
            if (!out.empty() && v.dim() != out.front().dim()) {
                throw DimensionError(range + "dimension mismatch with earlier batches");
            }
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, const EmbeddingProviderConfig& cfg) {
    auto provider = make_embedding_provider(cfg);
    return embed_texts(texts, *provider, cfg.batch_size);
}

}  // namespace chunkrag
