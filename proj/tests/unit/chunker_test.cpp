#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "chunkrag/chunker.hpp"
#include "chunkrag/errors.hpp"
#include "test_support.hpp"

namespace chunkrag {
namespace {

std::vector<Sentence> sentences_of(const std::vector<std::string>& texts, const std::string& doc = "doc") {
    std::vector<Sentence> out;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.push_back(Sentence{doc, i, texts[i], Span{offset, offset + texts[i].size()}});
        offset += texts[i].size() + 1;
    }
    return out;
}

EmbeddingVector at_angle(double radians) { return EmbeddingVector::normalized({std::cos(radians), std::sin(radians)}); }

std::vector<std::pair<std::size_t, std::size_t>> ranges(const std::vector<Chunk>& chunks) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : chunks) {
        out.emplace_back(c.sentence_begin, c.sentence_end);
    }
    return out;
}

TEST(ChunkDocument, NoSentencesNoChunks) {
    EXPECT_TRUE(chunk_document({}, {}, ChunkerConfig{}).empty());
}

TEST(ChunkDocument, IdenticalSentencesFormOneChunk) {
    const auto sents = sentences_of({"Same words here.", "Same words here.", "Same words here."});
    const std::vector<EmbeddingVector> vecs(3, at_angle(0.0));
    const auto chunks = chunk_document(sents, vecs, ChunkerConfig{});
    ASSERT_EQ(chunks.size(), 1U);
    EXPECT_EQ(chunks[0].id, "doc#0");
    EXPECT_EQ(chunks[0].sentence_count(), 3U);
    EXPECT_EQ(chunks[0].text, "Same words here. Same words here. Same words here.");
    EXPECT_EQ(chunks[0].char_len, chunks[0].text.size());
}

TEST(ChunkDocument, SplitsWhereConsecutiveCosineDropsBelowTheta) {
    // Consecutive cosines 0.9, 0.1, 0.9 built from plane rotations.
    const double a = std::acos(0.9);
    const double b = std::acos(0.1);
    const std::vector<EmbeddingVector> vecs = {at_angle(0.0), at_angle(a), at_angle(a + b), at_angle(2 * a + b)};
    EXPECT_NEAR(cosine_similarity(vecs[1], vecs[2]), 0.1, 1e-12);
    const auto sents = sentences_of({"s1.", "s2.", "s3.", "s4."});
    const auto result = chunk_document_traced(sents, vecs, ChunkerConfig{0.8, 500});
    EXPECT_EQ(ranges(result.chunks), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}, {2, 4}}));
    ASSERT_EQ(result.boundaries.size(), 1U);
    EXPECT_EQ(result.boundaries[0].sentence, 2U);
    EXPECT_EQ(result.boundaries[0].reason, BoundaryReason::Similarity);
    EXPECT_NEAR(result.boundaries[0].cosine, 0.1, 1e-12);
    EXPECT_EQ(result.chunks[1].id, "doc#1");
}

TEST(ChunkDocument, CapSplitsCountingTheJoiningSpace) {
    const std::string s(200, 'x');
    const auto sents = sentences_of({s, s, s, s, s});
    const std::vector<EmbeddingVector> vecs(5, at_angle(0.0));
    const auto result = chunk_document_traced(sents, vecs, ChunkerConfig{0.8, 500});
    // 200 + 1 + 200 = 401 fits; a third sentence would reach 602.
    EXPECT_EQ(ranges(result.chunks), (std::vector<std::pair<std::size_t, std::size_t>>{{0, 2}, {2, 4}, {4, 5}}));
    for (const auto& b : result.boundaries) {
        EXPECT_EQ(b.reason, BoundaryReason::Cap);
    }
    const auto exact = chunk_document(sentences_of({std::string(250, 'y'), std::string(249, 'z')}),
                                      std::vector<EmbeddingVector>(2, at_angle(0.0)), ChunkerConfig{0.8, 500});
    EXPECT_EQ(exact.size(), 1U);
    EXPECT_EQ(exact[0].char_len, 500U);
}

TEST(ChunkDocument, CapCountsCodePoints) {
    // 100 two-byte characters per sentence: 201 code points but 401 bytes.
    std::string s;
    for (int i = 0; i < 100; ++i) {
        s += "\xc3\xa9";
    }
    const auto chunks = chunk_document(sentences_of({s, s}), std::vector<EmbeddingVector>(2, at_angle(0.0)),
                                       ChunkerConfig{0.8, 250});
    ASSERT_EQ(chunks.size(), 1U);
    EXPECT_EQ(chunks[0].char_len, 201U);
}

TEST(ChunkDocument, OversizeSentenceStandsAlone) {
    const auto sents = sentences_of({"short.", std::string(600, 'q'), "tail."});
    const auto chunks = chunk_document(sents, std::vector<EmbeddingVector>(3, at_angle(0.0)), ChunkerConfig{});
    ASSERT_EQ(chunks.size(), 3U);
    EXPECT_FALSE(chunks[0].oversize(500));
    EXPECT_TRUE(chunks[1].oversize(500));
    EXPECT_EQ(chunks[1].sentence_count(), 1U);
}

TEST(ChunkDocument, LengthMismatchThrows) {
    const auto sents = sentences_of({"a.", "b."});
    const std::vector<EmbeddingVector> vecs(1, at_angle(0.0));
    EXPECT_THROW(chunk_document(sents, vecs, ChunkerConfig{}), InvalidArgument);
}

TEST(ChunkDocument, HigherThetaNeverGivesFewerChunks) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi / 2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> texts;
        std::vector<EmbeddingVector> vecs;
        for (int i = 0; i < 12; ++i) {
            texts.push_back("sentence " + std::to_string(i) + ".");
            vecs.push_back(at_angle(angle(rng)));
        }
        const auto sents = sentences_of(texts);
        std::size_t previous = 0;
        for (const double theta : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95, 1.0}) {
            const auto n = chunk_document(sents, vecs, ChunkerConfig{theta, 500}).size();
            EXPECT_GE(n, previous);
            previous = n;
        }
    }
}

TEST(ChunkerConfig, Validation) {
    EXPECT_THROW((ChunkerConfig{1.5, 500}.validate()), ConfigError);
    EXPECT_THROW((ChunkerConfig{0.5, 0}.validate()), ConfigError);
    EXPECT_NO_THROW((ChunkerConfig{0.5, 10}.validate()));
}

TEST(EmbedChunks, EmptyAndSingle) {
    LocalHashEmbedder provider(32);
    EXPECT_TRUE(embed_chunks({}, provider, 64).empty());
    const auto chunks = embed_chunks({testing::make_chunk("d#0", "some chunk text")}, provider, 64);
    ASSERT_EQ(chunks.size(), 1U);
    EXPECT_EQ(*chunks[0].embedding, provider.embed("some chunk text"));
}

TEST(EmbedChunks, HundredChunksInTwoBatches) {
    struct Counting final : EmbeddingProvider {
        LocalHashEmbedder inner{32};
        int batches = 0;
        std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) override {
            ++batches;
            return inner.embed_batch(texts);
        }
    } provider;
    std::vector<Chunk> chunks;
    for (int i = 0; i < 100; ++i) {
        chunks.push_back(testing::make_chunk("d#" + std::to_string(i), "chunk " + std::to_string(i)));
    }
    const auto out = embed_chunks(chunks, provider, 64);
    EXPECT_EQ(provider.batches, 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_EQ(out[i].id, chunks[i].id);
        EXPECT_EQ(*out[i].embedding, provider.inner.embed(chunks[i].text));
    }
}

}  // namespace
}  // namespace chunkrag
