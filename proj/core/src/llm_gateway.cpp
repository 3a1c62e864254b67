#include "chunkrag/llm_gateway.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <regex>
#include <set>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

using nlohmann::json;

namespace {

constexpr std::string_view kQueryRewriteText = R"tmpl(You are an AI assistant that improves user queries for better search results.
Rewrite the following query to be more effective for document retrieval without changing its meaning.

Original Query: "{query}"

Rewritten Query:)tmpl";

constexpr std::string_view kRelevanceScoreText = R"tmpl(You are an AI assistant tasked with determining the relevance of a text chunk to a user query.
Analyze the provided chunk and query, then assign a relevance score between 0 and 1, where 1 means highly relevant and 0 means not relevant at all.

Chunk: {chunk}

User Query: {query}

A single decimal number between 0 and 1, representing the final relevance score. No other text.

Relevance Score (between 0 and 1):)tmpl";

constexpr std::string_view kSelfReflectText = R"tmpl(You have assigned a relevance score to a text chunk based on a user query.
Your initial score was: {score}

Reflect on your scoring and adjust the score if necessary. Provide the final score.

Chunk: {chunk}

User Query: {query}

A single decimal number between 0 and 1, representing the final relevance score. No other text.
Final Relevance Score (between 0 and 1):)tmpl";

constexpr std::string_view kThresholdText = R"tmpl(Based on the user query and the following set of relevance scores, determine the optimal threshold to filter out irrelevant chunks.

Relevance Scores: {scores}

A single decimal number between 0 and 1, representing the final relevance score. No other text.
Provide the optimal threshold (between 0 and 1):)tmpl";

constexpr std::string_view kCriticPreamble =
    "You are a strict critic reviewing a prior relevance assessment of {base} and a reflection score of {reflect}.\n";

constexpr std::string_view kAnswerGenerationText =
    "Answer the question using ONLY the context below. If the context is insufficient, say 'I cannot answer from "
    "the provided context.'\n\nContext:\n{context}\n\nQuestion: {query}\n\nAnswer:";

struct TemplateNameEntry {
    TemplateName name;
    std::string_view label;
};

constexpr TemplateNameEntry kTemplateNames[] = {
    {TemplateName::QueryRewrite, "query_rewrite"},
    {TemplateName::RelevanceScore, "relevance_score"},
    {TemplateName::SelfReflect, "self_reflect"},
    {TemplateName::ThresholdDetermination, "threshold_determination"},
    {TemplateName::AnswerGeneration, "answer_generation"},
    {TemplateName::Critic, "critic"},
};

bool is_placeholder_char(char c) noexcept { return (c >= 'a' && c <= 'z') || c == '_'; }

// Calls `on_text(view)` for literal runs and `on_slot(name)` for placeholders.
template <typename OnText, typename OnSlot>
void scan_template(std::string_view text, OnText on_text, OnSlot on_slot) {
    std::size_t literal_begin = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_placeholder_char(text[j])) {
                ++j;
            }
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                on_text(text.substr(literal_begin, i - literal_begin));
                on_slot(text.substr(i + 1, j - i - 1));
                i = j + 1;
                literal_begin = i;
                continue;
            }
        }
        ++i;
    }
    on_text(text.substr(literal_begin));
}

}  // namespace

std::string_view to_string(TemplateName name) noexcept {
    for (const auto& entry : kTemplateNames) {
        if (entry.name == name) {
            return entry.label;
        }
    }
    return "unknown";
}

TemplateName parse_template_name(std::string_view name) {
    for (const auto& entry : kTemplateNames) {
        if (entry.label == name) {
            return entry.name;
        }
    }
    throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> names;
    scan_template(
        text, [](std::string_view) {},
        [&](std::string_view slot) {
            if (std::find(names.begin(), names.end(), slot) == names.end()) {
                names.emplace_back(slot);
            }
        });
    return names;
}

const PromptTemplate& prompt_template(TemplateName name) {
    static const std::vector<PromptTemplate> templates = {
        {TemplateName::QueryRewrite, std::string(kQueryRewriteText)},
        {TemplateName::RelevanceScore, std::string(kRelevanceScoreText)},
        {TemplateName::SelfReflect, std::string(kSelfReflectText)},
        {TemplateName::ThresholdDetermination, std::string(kThresholdText)},
        {TemplateName::AnswerGeneration, std::string(kAnswerGenerationText)},
        {TemplateName::Critic, std::string(kCriticPreamble) + std::string(kRelevanceScoreText)},
    };
    for (const auto& t : templates) {
        if (t.name == name) {
            return t;
        }
    }
    throw InvalidArgument("unknown prompt template");
}

std::string render(const PromptTemplate& tmpl, const Bindings& bindings) {
    const auto slots = tmpl.placeholders();
    for (const auto& slot : slots) {
        if (!bindings.contains(slot)) {
            throw InvalidArgument("template '" + std::string(to_string(tmpl.name)) + "': missing binding for {" +
                                  slot + "}");
        }
    }
    for (const auto& [key, value] : bindings) {
        (void)value;
        if (std::find(slots.begin(), slots.end(), key) == slots.end()) {
            throw InvalidArgument("template '" + std::string(to_string(tmpl.name)) + "': no placeholder {" + key +
                                  "}");
        }
    }
    std::string out;
    out.reserve(tmpl.text.size());
    scan_template(
        tmpl.text, [&](std::string_view literal) { out += literal; },
        [&](std::string_view slot) { out += bindings.find(slot)->second; });
    return out;
}

void LlmBackendConfig::validate() const {
    if (!(temperature >= 0.0)) {
        throw ConfigError("llm temperature must be >= 0");
    }
    if (max_retries < 0) {
        throw ConfigError("llm max_retries must be >= 0");
    }
    if (kind == LlmKind::Remote && endpoint_url.empty()) {
        throw ConfigError("remote llm backend requires endpoint_url");
    }
    if (timeout_seconds <= 0) {
        throw ConfigError("llm timeout_seconds must be positive");
    }
}

// ---------------------------------------------------------------------------
// Mock backend

std::optional<std::string> MockScript::respond(std::string_view prompt, std::optional<TemplateName> tmpl) const {
    for (const auto& rule : rules) {
        if (rule.template_name.has_value() && rule.template_name != tmpl) {
            continue;
        }
        const bool all_found = std::all_of(rule.contains.begin(), rule.contains.end(), [&](const std::string& needle) {
            return prompt.find(needle) != std::string_view::npos;
        });
        if (!all_found) {
            continue;
        }
        if (!rule.pattern.has_value()) {
            return rule.response;
        }
        const std::regex re(*rule.pattern);
        std::match_results<std::string_view::const_iterator> match;
        if (std::regex_search(prompt.begin(), prompt.end(), match, re)) {
            return match.format(rule.response);
        }
    }
    return default_response;
}

MockScript MockScript::from_json(const json& j) {
    MockScript script;
    const json* rules = &j;
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) {
            if (key != "rules" && key != "default_response") {
                throw ConfigError("mock script: unknown key '" + key + "'");
            }
        }
        if (const auto d = j.find("default_response"); d != j.end() && !d->is_null()) {
            script.default_response = d->get<std::string>();
        }
        static const json kEmpty = json::array();
        rules = j.contains("rules") ? &j.at("rules") : &kEmpty;
    }
    if (!rules->is_array()) {
        throw ConfigError("mock script must be a JSON array of rules or an object with 'rules'");
    }
    std::size_t index = 0;
    for (const auto& r : *rules) {
        const auto where = "mock script rule " + std::to_string(index++);
        if (!r.is_object()) {
            throw ConfigError(where + ": expected an object");
        }
        MockRule rule;
        for (const auto& [key, value] : r.items()) {
            if (key == "template") {
                rule.template_name = parse_template_name(value.get<std::string>());
            } else if (key == "contains") {
                if (value.is_string()) {
                    rule.contains.push_back(value.get<std::string>());
                } else {
                    rule.contains = value.get<std::vector<std::string>>();
                }
            } else if (key == "pattern") {
                rule.pattern = value.get<std::string>();
                try {
                    std::regex check(*rule.pattern);
                } catch (const std::regex_error& e) {
                    throw ConfigError(where + ": invalid pattern: " + e.what());
                }
            } else if (key == "response") {
                rule.response = value.get<std::string>();
            } else {
                throw ConfigError(where + ": unknown key '" + key + "'");
            }
        }
        if (!r.contains("response")) {
            throw ConfigError(where + ": missing 'response'");
        }
        script.rules.push_back(std::move(rule));
    }
    return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read mock script '" + path.string() + "'");
    }
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw ConfigError("mock script '" + path.string() + "': " + e.what());
    }
}

std::string MockBackend::complete(std::string_view prompt, std::optional<TemplateName> tmpl) {
    ++calls_;
    auto reply = script_.respond(prompt, tmpl);
    if (!reply.has_value()) {
        throw BackendError("mock backend: no rule matched and no default response");
    }
    return *reply;
}

// ---------------------------------------------------------------------------
// Remote backend

RemoteChatBackend::RemoteChatBackend(LlmBackendConfig cfg)
    : cfg_(std::move(cfg)), gate_(cfg_.max_in_flight, cfg_.requests_per_minute) {
    cfg_.validate();
}

std::string RemoteChatBackend::complete(std::string_view prompt, std::optional<TemplateName> /*tmpl*/) {
    const json body = {
        {"model", cfg_.model_name},
        {"temperature", cfg_.temperature},
        {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})},
    };
    http::RetryPolicy policy;
    policy.max_retries = cfg_.max_retries;
    policy.timeout_seconds = cfg_.timeout_seconds;
    policy.initial_backoff = std::chrono::milliseconds(cfg_.initial_backoff_ms);

    json response;
    {
        auto permit = gate_.acquire();
        response = http::post_json(cfg_.endpoint_url, body, http::api_key_from_env(cfg_.api_key_env), policy);
    }
    try {
        const auto& content = response.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const json::exception& e) {
        throw BackendError(std::string("chat response lacks choices[0].message.content: ") + e.what());
    }
}

std::unique_ptr<LlmBackend> make_llm_backend(const LlmBackendConfig& cfg) {
    cfg.validate();
    if (cfg.kind == LlmKind::Remote) {
        return std::make_unique<RemoteChatBackend>(cfg);
    }
    if (cfg.mock_script_path.empty()) {
        throw ConfigError("mock llm backend requires mock_script_path");
    }
    return std::make_unique<MockBackend>(MockScript::load(cfg.mock_script_path));
}

// ---------------------------------------------------------------------------
// Operations

std::string complete(LlmBackend& backend, std::string_view prompt, std::optional<TemplateName> tmpl) {
    if (prompt.empty()) {
        throw InvalidArgument("prompt must not be empty");
    }
    return backend.complete(prompt, tmpl);
}

namespace {

// Length of a quote character at the start (front=true) or end of s, or 0.
std::size_t quote_length(std::string_view s, bool front) {
    constexpr std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98",
                                            "\xE2\x80\x99"};
    for (auto q : kQuotes) {
        if (s.size() >= q.size() && (front ? s.substr(0, q.size()) : s.substr(s.size() - q.size())) == q) {
            return q.size();
        }
    }
    return 0;
}

std::string strip_quotes_and_space(std::string_view s) {
    for (;;) {
        const auto before = s.size();
        s = text::trim(s);
        if (const auto n = quote_length(s, true); n > 0) {
            s.remove_prefix(n);
        }
        if (const auto n = quote_length(s, false); n > 0) {
            s.remove_suffix(n);
        }
        if (s.size() == before) {
            return std::string(s);
        }
    }
}

}  // namespace

std::string rewrite_query(std::string_view query, LlmBackend& backend, bool fail_open) {
    if (query.empty()) {
        throw InvalidArgument("query must not be empty");
    }
    const auto prompt = render(prompt_template(TemplateName::QueryRewrite), {{"query", std::string(query)}});
    std::string reply;
    try {
        reply = complete(backend, prompt, TemplateName::QueryRewrite);
    } catch (const Error&) {
        if (!fail_open) {
            throw;
        }
        return std::string(query);
    }
    auto rewritten = strip_quotes_and_space(reply);
    return rewritten.empty() ? std::string(query) : rewritten;
}

double parse_score(std::string_view raw) {
    const auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const bool starts_number =
            is_digit(raw[i]) || (raw[i] == '.' && i + 1 < raw.size() && is_digit(raw[i + 1]));
        if (!starts_number) {
            continue;
        }
        std::size_t begin = (i > 0 && raw[i - 1] == '-') ? i - 1 : i;
        std::size_t end = i;
        while (end < raw.size() && is_digit(raw[end])) {
            ++end;
        }
        if (end < raw.size() && raw[end] == '.') {
            ++end;
            while (end < raw.size() && is_digit(raw[end])) {
                ++end;
            }
        }
        std::string number(raw.substr(begin, end - begin));
        if (number.back() == '.') {
            number.pop_back();
        }
        if (number.front() == '.' || number.starts_with("-.")) {
            number.insert(number.find('.'), "0");
        }
        double value = 0.0;
        const auto res = std::from_chars(number.data(), number.data() + number.size(), value);
        if (res.ec == std::errc::result_out_of_range) {
            return number.front() == '-' ? 0.0 : 1.0;
        }
        if (res.ec != std::errc{}) {
            throw ParseError("cannot parse score from '" + std::string(raw) + "'");
        }
        return std::clamp(value, 0.0, 1.0);
    }
    throw ParseError("no number found in model output '" + std::string(raw) + "'");
}

}  // namespace chunkrag
