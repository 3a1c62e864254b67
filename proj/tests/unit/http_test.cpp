#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>

#include "chunkrag/errors.hpp"
#include "chunkrag/http.hpp"
#include "test_support.hpp"

namespace chunkrag {
namespace {

using namespace std::chrono_literals;
using testing::StubServer;

http::RetryPolicy fast_policy(int retries = 3) {
    http::RetryPolicy p;
    p.max_retries = retries;
    p.initial_backoff = 10ms;
    p.max_backoff = 40ms;
    p.timeout_seconds = 5.0;
    return p;
}

TEST(Backoff, DoublesUntilCapped) {
    http::RetryPolicy p;
    EXPECT_EQ(http::backoff_delay(p, 0), 500ms);
    EXPECT_EQ(http::backoff_delay(p, 1), 1000ms);
    EXPECT_EQ(http::backoff_delay(p, 3), 4000ms);
    EXPECT_EQ(http::backoff_delay(p, 4), 8000ms);
    EXPECT_EQ(http::backoff_delay(p, 10), 8000ms);
}

TEST(ParseUrl, SplitsHostAndPath) {
    const auto u = http::parse_url("https://api.example.com/v1/chat/completions");
    EXPECT_EQ(u.scheme_host_port, "https://api.example.com");
    EXPECT_EQ(u.path, "/v1/chat/completions");
    const auto bare = http::parse_url("http://localhost:8080");
    EXPECT_EQ(bare.scheme_host_port, "http://localhost:8080");
    EXPECT_EQ(bare.path, "/");
    EXPECT_THROW(http::parse_url("ftp://x/y"), ConfigError);
}

TEST(PostJson, RetriesAfter429ThenSucceeds) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1", [&](const httplib::Request& req, httplib::Response& res) {
        if (calls++ == 0) {
            res.status = 429;
            res.set_content("{\"error\":\"slow down\"}", "application/json");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(nlohmann::json{{"echo", body["x"]}}.dump(), "application/json");
    });
    stub.start();
    const auto reply = http::post_json(stub.url("/v1"), {{"x", 7}}, "", fast_policy());
    EXPECT_EQ(reply["echo"], 7);
    EXPECT_EQ(calls.load(), 2);
}

TEST(PostJson, SendsBearerToken) {
    StubServer stub;
    std::string auth;
    stub.server().Post("/v1", [&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        res.set_content("{}", "application/json");
    });
    stub.start();
    http::post_json(stub.url("/v1"), nlohmann::json::object(), "sekrit", fast_policy());
    EXPECT_EQ(auth, "Bearer sekrit");
}

TEST(PostJson, UnauthorizedIsAnAuthErrorWithoutRetry) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 401;
    });
    stub.start();
    EXPECT_THROW(http::post_json(stub.url("/v1"), nlohmann::json::object(), "", fast_policy()), AuthError);
    EXPECT_EQ(calls.load(), 1);
}

TEST(PostJson, ClientErrorIsNotRetried) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 400;
    });
    stub.start();
    EXPECT_THROW(http::post_json(stub.url("/v1"), nlohmann::json::object(), "", fast_policy()), BackendError);
    EXPECT_EQ(calls.load(), 1);
}

TEST(PostJson, ServerErrorsExhaustRetries) {
    StubServer stub;
    std::atomic<int> calls{0};
    stub.server().Post("/v1", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    stub.start();
    EXPECT_THROW(http::post_json(stub.url("/v1"), nlohmann::json::object(), "", fast_policy(2)), BackendError);
    EXPECT_EQ(calls.load(), 3);
}

TEST(PostJson, NonJsonBodyIsABackendError) {
    StubServer stub;
    stub.server().Post("/v1", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json", "text/plain");
    });
    stub.start();
    EXPECT_THROW(http::post_json(stub.url("/v1"), nlohmann::json::object(), "", fast_policy()), BackendError);
}

TEST(ApiKey, ReadFromEnvironmentOnly) {
    ::setenv("CHUNKRAG_TEST_KEY", "abc", 1);
    EXPECT_EQ(http::api_key_from_env("CHUNKRAG_TEST_KEY"), "abc");
    ::unsetenv("CHUNKRAG_TEST_KEY");
    EXPECT_EQ(http::api_key_from_env("CHUNKRAG_TEST_KEY"), "");
}

TEST(RequestGate, BoundsConcurrency) {
    http::RequestGate gate(2);
    std::atomic<int> active{0};
    std::atomic<int> peak{0};
    std::vector<std::jthread> threads;
    for (int i = 0; i < 6; ++i) {
        threads.emplace_back([&] {
            auto permit = gate.acquire();
            const int now = ++active;
            int prev = peak.load();
            while (now > prev && !peak.compare_exchange_weak(prev, now)) {
            }
            std::this_thread::sleep_for(20ms);
            --active;
        });
    }
    threads.clear();
    EXPECT_LE(peak.load(), 2);
    EXPECT_GE(peak.load(), 1);
}

}  // namespace
}  // namespace chunkrag
