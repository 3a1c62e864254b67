#include "chunkrag/segmentation.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

using nlohmann::json;

CorpusFormat parse_corpus_format(std::string_view name) {
    if (name == "jsonl") {
        return CorpusFormat::Jsonl;
    }
    if (name == "plain-dir") {
        return CorpusFormat::PlainDir;
    }
    throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected jsonl or plain-dir)");
}

std::string_view to_string(CorpusFormat format) noexcept {
    return format == CorpusFormat::Jsonl ? "jsonl" : "plain-dir";
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read '" + path.string() + "'");
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw IoError("error while reading '" + path.string() + "'");
    }
    return content;
}

class IdAllocator {
public:
    std::string claim(const std::string& wanted) {
        if (used_.insert(wanted).second) {
            return wanted;
        }
        for (std::size_t suffix = 1;; ++suffix) {
            auto candidate = wanted + "-" + std::to_string(suffix);
            if (used_.insert(candidate).second) {
                return candidate;
            }
        }
    }

private:
    std::set<std::string> used_;
};

}  // namespace

std::vector<Document> parse_jsonl_corpus(std::string_view content, std::string_view source) {
    if (!text::is_valid_utf8(content)) {
        throw IoError(std::string(source) + ": content is not valid UTF-8");
    }
    std::vector<Document> docs;
    IdAllocator ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto eol = content.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = content.size();
        }
        const auto line = content.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        const auto where = std::string(source) + " line " + std::to_string(line_no);
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": malformed JSON: " + e.what());
        }
        if (!record.is_object()) {
            throw ParseError(where + ": expected a JSON object");
        }
        const auto id_it = record.find("id");
        if (id_it == record.end() || !id_it->is_string() || id_it->get_ref<const std::string&>().empty()) {
            throw ParseError(where + ": field 'id' must be a non-empty string");
        }
        const auto text_it = record.find("text");
        if (text_it == record.end() || !text_it->is_string()) {
            throw ParseError(where + ": field 'text' must be a string");
        }
        Document doc;
        doc.id = ids.claim(id_it->get<std::string>());
        doc.text = text_it->get<std::string>();
        if (const auto meta = record.find("meta"); meta != record.end() && !meta->is_null()) {
            if (!meta->is_object()) {
                throw ParseError(where + ": field 'meta' must be an object");
            }
            for (const auto& [key, value] : meta->items()) {
                doc.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> ingest_corpus(const std::filesystem::path& path, CorpusFormat format) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw IoError("corpus path '" + path.string() + "' does not exist");
    }
    if (format == CorpusFormat::Jsonl) {
        if (std::filesystem::is_directory(path, ec)) {
            throw IoError("corpus path '" + path.string() + "' is a directory, expected a JSONL file");
        }
        auto docs = parse_jsonl_corpus(read_file(path), path.string());
        for (auto& doc : docs) {
            doc.metadata.try_emplace("source", path.string());
        }
        return docs;
    }

    if (!std::filesystem::is_directory(path, ec)) {
        throw IoError("corpus path '" + path.string() + "' is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    std::vector<Document> docs;
    IdAllocator ids;
    for (const auto& file : files) {
        Document doc;
        doc.text = read_file(file);
        if (!text::is_valid_utf8(doc.text)) {
            throw IoError(file.string() + ": content is not valid UTF-8");
        }
        doc.id = ids.claim(file.stem().string());
        doc.metadata["source"] = file.string();
        doc.metadata["title"] = file.stem().string();
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<std::string> SplitterOptions::default_abbreviations() {
    return {"Mr.", "Mrs.", "Dr.", "St.", "No.", "Fig.", "e.g.", "i.e.", "et al."};
}

namespace {

bool is_ascii_terminator(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

// Length of a full-width terminator (。！？) at position i, or 0.
std::size_t cjk_terminator_at(std::string_view s, std::size_t i) noexcept {
    constexpr std::string_view kTerminators[] = {"\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"};
    for (auto t : kTerminators) {
        if (s.substr(i, t.size()) == t) {
            return t.size();
        }
    }
    return 0;
}

// Length of a closing quote or bracket at position i, or 0.
std::size_t closer_at(std::string_view s, std::size_t i) noexcept {
    const char c = s[i];
    if (c == '"' || c == '\'' || c == ')' || c == ']') {
        return 1;
    }
    // ’ ” » 」 』 ）
    constexpr std::string_view kClosers[] = {"\xE2\x80\x99", "\xE2\x80\x9D", "\xC2\xBB",
                                             "\xE3\x80\x8D", "\xE3\x80\x8F", "\xEF\xBC\x89"};
    for (auto t : kClosers) {
        if (s.substr(i, t.size()) == t) {
            return t.size();
        }
    }
    return 0;
}

std::size_t skip_closers(std::string_view s, std::size_t i) noexcept {
    while (i < s.size()) {
        const auto len = closer_at(s, i);
        if (len == 0) {
            break;
        }
        i += len;
    }
    return i;
}

bool starts_sentence(char c) noexcept {
    const auto u = static_cast<unsigned char>(c);
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '"' || c == '\'' || c == '(' || c == '[' ||
           u >= 0x80;
}

bool ends_with_abbreviation(std::string_view prefix, const std::vector<std::string>& abbreviations) {
    for (const auto& abbr : abbreviations) {
        if (abbr.empty() || prefix.size() < abbr.size() ||
            prefix.substr(prefix.size() - abbr.size()) != abbr) {
            continue;
        }
        const auto start = prefix.size() - abbr.size();
        if (start == 0) {
            return true;
        }
        const char before = prefix[start - 1];
        if (text::is_space(before) || before == '(' || before == '"' || before == '\'') {
            return true;
        }
    }
    return false;
}

// True when the trimmed line ends in terminal punctuation (closers ignored).
bool line_is_terminated(std::string_view line) {
    line = text::trim(line);
    // Strip trailing closers, which are at most a few bytes each.
    bool stripped = true;
    while (stripped && !line.empty()) {
        stripped = false;
        for (std::size_t len = 1; len <= 3 && len <= line.size(); ++len) {
            const auto at = line.size() - len;
            if (closer_at(line, at) == len) {
                line.remove_suffix(len);
                stripped = true;
                break;
            }
        }
    }
    if (line.empty()) {
        return false;
    }
    if (is_ascii_terminator(line.back())) {
        return true;
    }
    return line.size() >= 3 && cjk_terminator_at(line, line.size() - 3) == 3;
}

}  // namespace

std::vector<Sentence> split_sentences(const Document& doc, const SplitterOptions& options) {
    const std::string_view s = doc.text;
    const std::size_t n = s.size();
    std::vector<std::size_t> cuts;
    std::size_t line_start = 0;

    std::size_t i = 0;
    while (i < n) {
        const char c = s[i];
        if (is_ascii_terminator(c)) {
            std::size_t j = i;
            while (j < n && is_ascii_terminator(s[j])) {
                ++j;
            }
            const bool single_period = (j - i == 1) && c == '.';
            const std::size_t after = skip_closers(s, j);
            if (after < n && text::is_space(s[after])) {
                std::size_t k = after;
                while (k < n && text::is_space(s[k])) {
                    ++k;
                }
                if (k < n && starts_sentence(s[k]) &&
                    !(single_period && ends_with_abbreviation(s.substr(0, j), options.abbreviations))) {
                    cuts.push_back(after);
                }
            }
            i = after;
            continue;
        }
        if (const auto len = cjk_terminator_at(s, i); len > 0) {
            std::size_t j = i + len;
            while (j < n) {
                if (const auto more = cjk_terminator_at(s, j); more > 0) {
                    j += more;
                } else if (const auto close = closer_at(s, j); close > 0) {
                    j += close;
                } else {
                    break;
                }
            }
            if (j < n) {
                cuts.push_back(j);
            }
            i = j;
            continue;
        }
        if (c == '\n') {
            std::size_t k = i;
            std::size_t newlines = 0;
            while (k < n && text::is_space(s[k])) {
                if (s[k] == '\n') {
                    ++newlines;
                }
                ++k;
            }
            const auto line = s.substr(line_start, i - line_start);
            if (newlines >= 2) {
                cuts.push_back(i);
            } else if (k < n && !text::trim(line).empty() && !line_is_terminated(line) &&
                       !(s[k] >= 'a' && s[k] <= 'z')) {
                cuts.push_back(i);
            }
            // The next line begins after the last newline of the run.
            line_start = s.rfind('\n', k == 0 ? 0 : k - 1) + 1;
            i = k;
            continue;
        }
        ++i;
    }
    cuts.push_back(n);

    std::vector<Sentence> sentences;
    std::size_t begin = 0;
    for (const auto cut : cuts) {
        if (cut <= begin) {
            continue;
        }
        std::size_t b = begin;
        std::size_t e = cut;
        while (b < e && text::is_space(s[b])) {
            ++b;
        }
        while (e > b && text::is_space(s[e - 1])) {
            --e;
        }
        if (e > b) {
            Sentence sentence;
            sentence.doc_id = doc.id;
            sentence.index = sentences.size();
            sentence.text = std::string(s.substr(b, e - b));
            sentence.span = Span{b, e};
            sentences.push_back(std::move(sentence));
        }
        begin = cut;
    }
    return sentences;
}

}  // namespace chunkrag
