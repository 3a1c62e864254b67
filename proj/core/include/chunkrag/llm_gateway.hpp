#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chunkrag/http.hpp"

namespace chunkrag {

enum class TemplateName {
    QueryRewrite,
    RelevanceScore,
    SelfReflect,
    ThresholdDetermination,
    AnswerGeneration,
    Critic,
};

std::string_view to_string(TemplateName name) noexcept;
TemplateName parse_template_name(std::string_view name);

/// Prompt text with `{placeholder}` slots (lowercase letters and underscores).
struct PromptTemplate {
    TemplateName name;
    std::string text;

    /// Distinct placeholder names in order of first appearance.
    std::vector<std::string> placeholders() const;
};

const PromptTemplate& prompt_template(TemplateName name);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution; bound values are inserted verbatim and never
/// re-scanned. Throws InvalidArgument naming any missing or extra binding.
std::string render(const PromptTemplate& tmpl, const Bindings& bindings);

inline constexpr std::string_view kCannotAnswer = "I cannot answer from the provided context.";

enum class LlmKind { Remote, Mock };

struct LlmBackendConfig {
    LlmKind kind = LlmKind::Mock;
    std::string model_name = "gpt-4o";
    std::string endpoint_url;
    std::string api_key_env = "LLM_API_KEY";
    double temperature = 0.0;
    int max_retries = 3;
    double timeout_seconds = 60.0;
    int initial_backoff_ms = 500;
    std::string mock_script_path;
    std::size_t max_in_flight = 4;
    std::size_t requests_per_minute = 0;  // 0 = unlimited

    void validate() const;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    /// One completion. `tmpl` tells scripted backends which prompt kind this is.
    virtual std::string complete(std::string_view prompt, std::optional<TemplateName> tmpl) = 0;
};

/// One scripted response. A rule matches when its template (if any) equals the
/// call's template, every `contains` substring occurs in the prompt, and the
/// optional ECMAScript `pattern` is found in the prompt. With a pattern, `$1`
/// style references in the response expand to the captured groups.
struct MockRule {
    std::optional<TemplateName> template_name;
    std::vector<std::string> contains;
    std::optional<std::string> pattern;
    std::string response;
};

struct MockScript {
    std::vector<MockRule> rules;
    std::optional<std::string> default_response;

    /// First matching rule's response, else the default, else nullopt.
    std::optional<std::string> respond(std::string_view prompt, std::optional<TemplateName> tmpl) const;

    /// Accepts either a bare JSON array of rules or
    /// `{"rules": [...], "default_response": "..."}`. Rule keys: `template`,
    /// `contains` (string or list), `pattern`, `response`.
    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::filesystem::path& path);
};

class MockBackend final : public LlmBackend {
public:
    explicit MockBackend(MockScript script) : script_(std::move(script)) {}

    std::string complete(std::string_view prompt, std::optional<TemplateName> tmpl) override;

    std::size_t calls() const noexcept { return calls_.load(); }

private:
    MockScript script_;
    std::atomic<std::size_t> calls_{0};
};

/// Chat-completions client: POSTs
/// `{"model", "temperature", "messages": [{"role": "user", "content": prompt}]}`
/// and reads `choices[0].message.content`.
class RemoteChatBackend final : public LlmBackend {
public:
    explicit RemoteChatBackend(LlmBackendConfig cfg);

    std::string complete(std::string_view prompt, std::optional<TemplateName> tmpl) override;

private:
    LlmBackendConfig cfg_;
    http::RequestGate gate_;
};

std::unique_ptr<LlmBackend> make_llm_backend(const LlmBackendConfig& cfg);

/// Raw completion through a backend. Throws InvalidArgument on an empty prompt.
std::string complete(LlmBackend& backend, std::string_view prompt, std::optional<TemplateName> tmpl = std::nullopt);

/// Rewrites a query for retrieval. The reply is stripped of surrounding
/// whitespace and quotes; an empty reply yields `query` unchanged. With
/// `fail_open`, backend errors also fall back to `query`.
std::string rewrite_query(std::string_view query, LlmBackend& backend, bool fail_open = true);

/// First decimal number in `raw`, clamped to [0, 1]. Throws ParseError when
/// the text holds no number.
double parse_score(std::string_view raw);

}  // namespace chunkrag
