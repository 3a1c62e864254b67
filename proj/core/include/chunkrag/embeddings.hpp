#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chunkrag/http.hpp"

namespace chunkrag {

/// Unit-length real vector. Construction normalizes; an all-zero input maps
/// to the first basis vector.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    /// L2-normalizes `raw`. Throws InvalidArgument on an empty vector.
    static EmbeddingVector normalized(std::vector<double> raw);

    /// Wraps values that are already unit length (e.g. read back from an
    /// index file) without touching their bits. Throws InvalidArgument if the
    /// norm is off by more than 1e-6.
    static EmbeddingVector from_unit(std::vector<double> values);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

    std::vector<double> values_;
};

/// Dot product of two unit vectors, clamped to [-1, 1]. Throws DimensionError.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

enum class EmbeddingKind { Remote, DeterministicLocal };

struct EmbeddingProviderConfig {
    EmbeddingKind kind = EmbeddingKind::DeterministicLocal;
    std::string model_name = "text-embedding-3-small";
    std::string endpoint_url;
    std::string api_key_env = "EMBEDDING_API_KEY";
    std::size_t dim = 256;
    std::size_t batch_size = 64;
    double timeout_seconds = 30.0;
    int max_retries = 3;
    int initial_backoff_ms = 500;
    std::size_t max_in_flight = 4;

    /// Throws ConfigError on a violated invariant.
    void validate() const;
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    /// Embeds one batch; must return exactly one vector per input, in order.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) = 0;
};

/// Hashed character-trigram embedder: lowercases, pads with one space on each
/// side, hashes every code-point trigram with seeded FNV-1a into `dim` buckets
/// and normalizes the counts. Output depends only on the input bytes.
class LocalHashEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::uint64_t kDefaultSeed = 0x9E3779B97F4A7C15ULL;

    explicit LocalHashEmbedder(std::size_t dim = 256, std::uint64_t seed = kDefaultSeed);

    EmbeddingVector embed(std::string_view text) const;
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

/// Client for an HTTP embeddings endpoint speaking
/// `{"model": ..., "input": [...]}` -> `data[i].embedding`.
/// The dimension of the first successful response is enforced afterwards.
class RemoteEmbedder final : public EmbeddingProvider {
public:
    explicit RemoteEmbedder(EmbeddingProviderConfig cfg);

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override;

private:
    EmbeddingProviderConfig cfg_;
    http::RequestGate gate_;
    std::mutex dim_mutex_;
    std::size_t locked_dim_ = 0;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingProviderConfig& cfg);

/// Embeds `texts` in batches of `batch_size`, preserving order. Provider
/// failures are rethrown with the failing batch's index range in the message.
std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, EmbeddingProvider& provider,
                                         std::size_t batch_size);

std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts, const EmbeddingProviderConfig& cfg);

}  // namespace chunkrag
