#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "chunkrag/chunker.hpp"
#include "chunkrag/embeddings.hpp"
#include "chunkrag/config.hpp"
#include "chunkrag/llm_gateway.hpp"
#include "chunkrag/pipeline.hpp"
#include "chunkrag/scored_chunk.hpp"

namespace chunkrag::testing {

inline std::filesystem::path data_dir() { return CHUNKRAG_TEST_DATA_DIR; }
inline std::filesystem::path golden_dir() { return CHUNKRAG_GOLDEN_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

class TempDir {
public:
    TempDir() {
        static std::atomic<unsigned> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("chunkrag-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

/// Unit vector in the plane at the given cosine to (1, 0).
inline EmbeddingVector at_cos(double c) {
    return EmbeddingVector::normalized({c, std::sqrt(std::max(0.0, 1.0 - c * c))});
}

inline Chunk make_chunk(const std::string& id, const std::string& text, std::optional<EmbeddingVector> vec = {}) {
    Chunk c;
    c.id = id;
    c.doc_id = id.substr(0, id.find('#'));
    c.sentence_begin = 0;
    c.sentence_end = 1;
    c.text = text;
    c.char_len = text.size();
    c.embedding = std::move(vec);
    return c;
}

inline ScoredChunk make_scored(const std::string& id, const std::string& text, EmbeddingVector vec) {
    ScoredChunk s;
    s.chunk = make_chunk(id, text, std::move(vec));
    return s;
}

/// LLM backend driven by a callback; records every prompt it sees.
class FnBackend final : public LlmBackend {
public:
    using Fn = std::function<std::string(std::string_view, std::optional<TemplateName>)>;
    explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}

    std::string complete(std::string_view prompt, std::optional<TemplateName> tmpl) override {
        {
            std::lock_guard lock(mutex_);
            prompts_.emplace_back(prompt);
            templates_.push_back(tmpl);
        }
        return fn_(prompt, tmpl);
    }

    std::vector<std::string> prompts() const {
        std::lock_guard lock(mutex_);
        return prompts_;
    }
    std::vector<std::optional<TemplateName>> templates() const {
        std::lock_guard lock(mutex_);
        return templates_;
    }

private:
    Fn fn_;
    mutable std::mutex mutex_;
    std::vector<std::string> prompts_;
    std::vector<std::optional<TemplateName>> templates_;
};

inline std::shared_ptr<FnBackend> constant_backend(std::string reply) {
    return std::make_shared<FnBackend>([reply](std::string_view, std::optional<TemplateName>) { return reply; });
}

/// A local HTTP server on an ephemeral port, torn down with the object.
class StubServer {
public:
    StubServer() = default;
    ~StubServer() { stop(); }
    StubServer(const StubServer&) = delete;
    StubServer& operator=(const StubServer&) = delete;

    httplib::Server& server() { return server_; }

    void start() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (thread_.joinable()) {
            server_.stop();
            thread_.join();
        }
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

/// Offline config: every stage on the given mock script, local embeddings.
inline PipelineConfig mock_config(const std::filesystem::path& script) {
    PipelineConfig cfg;
    cfg.backends.for_each([&](LlmBackendConfig& c) {
        c.kind = LlmKind::Mock;
        c.mock_script_path = script.string();
    });
    return cfg;
}

inline ChunkIndex index_from_jsonl(const std::filesystem::path& corpus, const PipelineConfig& cfg) {
    LocalHashEmbedder embedder(cfg.embedding.dim);
    return build_index(ingest_corpus(corpus, CorpusFormat::Jsonl), cfg, embedder).index;
}

inline std::filesystem::path feilden_dir() { return data_dir() / "feilden"; }

}  // namespace chunkrag::testing
