#include <gtest/gtest.h>

#include "chunkrag/errors.hpp"
#include "chunkrag/rerank.hpp"
#include "test_support.hpp"

namespace chunkrag {
namespace {

using testing::at_cos;
using testing::make_scored;
using testing::StubServer;

std::vector<ScoredChunk> three_hits() {
    return {make_scored("first", "one", at_cos(0.9)), make_scored("second", "two", at_cos(0.2)),
            make_scored("third", "three", at_cos(0.6))};
}

std::vector<std::string> ids(const std::vector<ScoredChunk>& hits) {
    std::vector<std::string> out;
    for (const auto& h : hits) {
        out.push_back(h.id());
    }
    return out;
}

TEST(Rerank, EmptyInput) {
    RerankConfig cfg;
    EXPECT_TRUE(rerank({}, "q", at_cos(1.0), cfg).hits.empty());
}

TEST(Rerank, NoneKeepsOrder) {
    RerankConfig cfg;
    cfg.kind = RerankKind::None;
    cfg.top_n = 1;
    const auto out = rerank(three_hits(), "q", at_cos(1.0), cfg);
    EXPECT_EQ(ids(out.hits), (std::vector<std::string>{"first", "second", "third"}));
    EXPECT_EQ(out.applied, RerankKind::None);
}

TEST(Rerank, LocalFallbackSortsByCosine) {
    RerankConfig cfg;
    const auto out = rerank(three_hits(), "q", at_cos(1.0), cfg);
    EXPECT_EQ(ids(out.hits), (std::vector<std::string>{"first", "third", "second"}));
    EXPECT_EQ(out.applied, RerankKind::LocalFallback);
    cfg.top_n = 2;
    EXPECT_EQ(ids(rerank(three_hits(), "q", at_cos(1.0), cfg).hits), (std::vector<std::string>{"first", "third"}));
}

TEST(Rerank, LocalTiesBreakById) {
    const std::vector<ScoredChunk> hits = {make_scored("b", "x", at_cos(0.5)), make_scored("a", "y", at_cos(0.5))};
    EXPECT_EQ(ids(local_rerank(hits, at_cos(1.0), std::nullopt)), (std::vector<std::string>{"a", "b"}));
}

TEST(Rerank, RemoteOrdersByRelevanceScore) {
    StubServer stub;
    nlohmann::json seen;
    stub.server().Post("/rerank", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        res.set_content(R"({"results":[{"index":1,"relevance_score":0.9},{"index":2,"relevance_score":0.5},
                                       {"index":0,"relevance_score":0.1}]})",
                        "application/json");
    });
    stub.start();
    RerankConfig cfg;
    cfg.kind = RerankKind::Remote;
    cfg.endpoint_url = stub.url("/rerank");
    const auto out = rerank(three_hits(), "the query", at_cos(1.0), cfg);
    EXPECT_EQ(out.applied, RerankKind::Remote);
    EXPECT_FALSE(out.warning.has_value());
    EXPECT_EQ(ids(out.hits), (std::vector<std::string>{"second", "third", "first"}));
    EXPECT_EQ(seen["query"], "the query");
    EXPECT_EQ(seen["documents"], (nlohmann::json{"one", "two", "three"}));
    EXPECT_EQ(seen["model"], "rerank-english-v3.0");
}

TEST(Rerank, RemoteFailureFallsBackToLocal) {
    StubServer stub;
    stub.server().Post("/rerank", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    stub.start();
    RerankConfig cfg;
    cfg.kind = RerankKind::Remote;
    cfg.endpoint_url = stub.url("/rerank");
    const auto out = rerank(three_hits(), "q", at_cos(1.0), cfg);
    EXPECT_EQ(out.applied, RerankKind::LocalFallback);
    EXPECT_TRUE(out.warning.has_value());
    EXPECT_EQ(ids(out.hits), (std::vector<std::string>{"first", "third", "second"}));
}

TEST(RerankConfig, Validation) {
    RerankConfig cfg;
    cfg.kind = RerankKind::Remote;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = {};
    cfg.top_n = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace chunkrag
