#include <gtest/gtest.h>

#include <cmath>

#include "chunkrag/embeddings.hpp"
#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"
#include "test_support.hpp"

namespace chunkrag {
namespace {

using testing::StubServer;

TEST(EmbeddingVector, NormalizesAndMapsZeroToFirstAxis) {
    const auto v = EmbeddingVector::normalized({3.0, 4.0});
    EXPECT_DOUBLE_EQ(v.values()[0], 0.6);
    EXPECT_DOUBLE_EQ(v.values()[1], 0.8);
    const auto z = EmbeddingVector::normalized({0.0, 0.0, 0.0});
    EXPECT_EQ(std::vector<double>(z.values().begin(), z.values().end()), (std::vector<double>{1.0, 0.0, 0.0}));
    EXPECT_THROW(EmbeddingVector::normalized({}), InvalidArgument);
    EXPECT_THROW(EmbeddingVector::from_unit({1.0, 1.0}), InvalidArgument);
}

TEST(CosineSimilarity, HandComputedCases) {
    const auto e1 = EmbeddingVector::normalized({1.0, 0.0});
    const auto e2 = EmbeddingVector::normalized({0.0, 1.0});
    EXPECT_DOUBLE_EQ(cosine_similarity(e1, e1), 1.0);
    EXPECT_DOUBLE_EQ(cosine_similarity(e1, e2), 0.0);
    const auto a = EmbeddingVector::normalized({0.6, 0.8});
    const auto b = EmbeddingVector::normalized({0.8, 0.6});
    EXPECT_NEAR(cosine_similarity(a, b), 0.6 * 0.8 + 0.8 * 0.6, 1e-12);
}

TEST(CosineSimilarity, DimensionMismatchThrows) {
    EXPECT_THROW(cosine_similarity(EmbeddingVector::normalized({1.0, 0.0}), EmbeddingVector::normalized({1.0})),
                 DimensionError);
}

TEST(LocalEmbedder, DeterministicAndUnitLength) {
    LocalHashEmbedder e(64);
    const auto a = e.embed("The quick brown fox");
    const auto b = e.embed("The quick brown fox");
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.dim(), 64U);
    double norm = 0.0;
    for (const double x : a.values()) {
        norm += x * x;
    }
    EXPECT_NEAR(norm, 1.0, 1e-12);
}

TEST(LocalEmbedder, IdenticalTextsAreParallelAndDifferentTextsAreNot) {
    LocalHashEmbedder e;
    EXPECT_DOUBLE_EQ(cosine_similarity(e.embed("paris"), e.embed("paris")), 1.0);
    EXPECT_LT(cosine_similarity(e.embed("paris"), e.embed("zzzzqq")), 0.9);
    // Case-insensitive by construction.
    EXPECT_EQ(e.embed("Paris"), e.embed("paris"));
}

TEST(LocalEmbedder, MatchesTrigramOracle) {
    // Oracle: count seeded-FNV buckets of the code-point trigrams of " abcd ".
    const std::size_t dim = 16;
    LocalHashEmbedder e(dim);
    std::vector<double> counts(dim, 0.0);
    for (const std::string tri : {" ab", "abc", "bcd", "cd "}) {
        counts[text::fnv1a64(tri, LocalHashEmbedder::kDefaultSeed) % dim] += 1.0;
    }
    EXPECT_EQ(e.embed("ABCD"), EmbeddingVector::normalized(counts));
}

TEST(EmbedTexts, EmptyBatch) {
    EmbeddingProviderConfig cfg;
    EXPECT_TRUE(embed_texts({}, cfg).empty());
}

TEST(EmbedTexts, BatchesPreserveOrder) {
    struct Counting final : EmbeddingProvider {
        LocalHashEmbedder inner{32};
        std::vector<std::size_t> batch_sizes;
        std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
            batch_sizes.push_back(texts.size());
            return inner.embed_batch(texts);
        }
    } provider;
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) {
        texts.push_back("text number " + std::to_string(i));
    }
    const auto vecs = embed_texts(texts, provider, 64);
    EXPECT_EQ(provider.batch_sizes, (std::vector<std::size_t>{64, 36}));
    ASSERT_EQ(vecs.size(), 100U);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        EXPECT_EQ(vecs[i], provider.inner.embed(texts[i]));
    }
}

TEST(EmbedTexts, FailureNamesTheBatchRange) {
    struct Failing final : EmbeddingProvider {
        int calls = 0;
        std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
            if (calls++ == 1) {
                throw BackendError("boom");
            }
            return LocalHashEmbedder(8).embed_batch(texts);
        }
    } provider;
    const std::vector<std::string> texts(5, "x");
    try {
        embed_texts(texts, provider, 2);
        FAIL() << "expected BackendError";
    } catch (const BackendError& e) {
        EXPECT_NE(std::string(e.what()).find("[2, 4)"), std::string::npos) << e.what();
    }
}

TEST(EmbeddingConfig, Validation) {
    EmbeddingProviderConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.kind = EmbeddingKind::Remote;
    EXPECT_THROW(cfg.validate(), ConfigError);  // no endpoint
}

class RemoteEmbedderTest : public ::testing::Test {
protected:
    void SetUp() override {
        stub_.server().Post("/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = nlohmann::json::parse(req.body);
            requests_.push_back(body);
            if (status_ != 200) {
                res.status = status_;
                return;
            }
            nlohmann::json data = nlohmann::json::array();
            const auto& input = body["input"];
            // Reply out of order to check that `index` is honoured.
            for (std::size_t i = input.size(); i-- > 0;) {
                const auto len = static_cast<double>(input[i].get<std::string>().size());
                std::vector<double> v(dim_, 0.0);
                v[0] = 1.0;
                v[1] = len;
                data.push_back({{"index", i}, {"embedding", v}});
            }
            res.set_content(nlohmann::json{{"data", data}}.dump(), "application/json");
        });
        stub_.start();
        cfg_.kind = EmbeddingKind::Remote;
        cfg_.endpoint_url = stub_.url("/embeddings");
        cfg_.initial_backoff_ms = 1;
        cfg_.max_retries = 0;
    }

    StubServer stub_;
    EmbeddingProviderConfig cfg_;
    std::vector<nlohmann::json> requests_;
    int status_ = 200;
    std::size_t dim_ = 3;
};

TEST_F(RemoteEmbedderTest, SendsModelAndInputAndOrdersByIndex) {
    RemoteEmbedder e(cfg_);
    const std::vector<std::string> texts = {"a", "bbb"};
    const auto vecs = e.embed_batch(texts);
    ASSERT_EQ(requests_.size(), 1U);
    EXPECT_EQ(requests_[0]["model"], "text-embedding-3-small");
    EXPECT_EQ(requests_[0]["input"], nlohmann::json(texts));
    ASSERT_EQ(vecs.size(), 2U);
    EXPECT_EQ(vecs[0], EmbeddingVector::normalized({1.0, 1.0, 0.0}));
    EXPECT_EQ(vecs[1], EmbeddingVector::normalized({1.0, 3.0, 0.0}));
}

TEST_F(RemoteEmbedderTest, DimensionChangeIsAnError) {
    RemoteEmbedder e(cfg_);
    e.embed_batch(std::vector<std::string>{"a"});
    dim_ = 4;
    EXPECT_THROW(e.embed_batch(std::vector<std::string>{"a"}), DimensionError);
}

TEST_F(RemoteEmbedderTest, AuthFailureSurfacesAsAuthError) {
    status_ = 401;
    EXPECT_THROW(embed_texts(std::vector<std::string>{"a"}, cfg_), AuthError);
}

}  // namespace
}  // namespace chunkrag
