#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace chunkrag {

struct Document {
    std::string id;
    std::string text;
    std::map<std::string, std::string> metadata;
};

/// Half-open byte range [begin, end) into Document::text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const Span&, const Span&) = default;
};

struct Sentence {
    std::string doc_id;
    std::size_t index = 0;
    std::string text;
    Span span;
};

enum class CorpusFormat { Jsonl, PlainDir };

CorpusFormat parse_corpus_format(std::string_view name);
std::string_view to_string(CorpusFormat format) noexcept;

/// Reads a corpus. JSONL records carry `id`, `text` and an optional `meta`
/// object; a plain directory contributes one document per `*.txt` file, with
/// the file stem as id. Colliding ids get `-1`, `-2`, ... suffixes in input
/// order. Plain-dir files are read in lexicographic path order.
///
/// Throws IoError for unreadable paths and non-UTF-8 content, ParseError
/// (mentioning the 1-based line number) for malformed JSONL records.
std::vector<Document> ingest_corpus(const std::filesystem::path& path, CorpusFormat format);

/// Parses JSONL corpus content already in memory. `source` names it in errors.
std::vector<Document> parse_jsonl_corpus(std::string_view content, std::string_view source = "<memory>");

struct SplitterOptions {
    /// Tokens ending in '.' that never end a sentence. Matched case-sensitively
    /// against the text immediately preceding the terminator.
    std::vector<std::string> abbreviations = default_abbreviations();

    static std::vector<std::string> default_abbreviations();
};

/// Rule-based sentence splitter.
///
/// A sentence ends after a run of `.`, `!` or `?` (plus closing quotes or
/// brackets) when it is followed by whitespace and then an uppercase letter,
/// digit, opening quote/bracket or any non-ASCII character. A period that
/// completes a listed abbreviation does not split. The full-width terminators
/// U+3002, U+FF01 and U+FF1F end a sentence wherever they occur, since CJK
/// text does not put spaces between sentences.
///
/// Blank lines always separate sentences. A single line break also separates
/// them when the line lacks terminal punctuation and the next line does not
/// start with a lowercase ASCII letter, so headings and list items become
/// their own sentences while hard-wrapped prose stays joined.
///
/// Spans are byte offsets; each sentence's text is exactly the trimmed slice
/// at its span.
std::vector<Sentence> split_sentences(const Document& doc, const SplitterOptions& options = {});

}  // namespace chunkrag
