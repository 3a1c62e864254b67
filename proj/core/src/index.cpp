#include "chunkrag/index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag {

using nlohmann::json;

namespace {

bool hit_order(const Hit& a, const Hit& b) {
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.chunk_id < b.chunk_id;
}

void keep_top(std::vector<Hit>& hits, std::size_t k) {
    if (k < hits.size()) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), hit_order);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), hit_order);
    }
}

void require_positive_k(std::size_t k) {
    if (k < 1) {
        throw InvalidArgument("k must be >= 1");
    }
}

}  // namespace

void sort_hits(std::vector<Hit>& hits) { std::sort(hits.begin(), hits.end(), hit_order); }

// ---------------------------------------------------------------------------
// VectorIndex

void VectorIndex::add(const std::string& id, const EmbeddingVector& vec) {
    if (positions_.contains(id)) {
        throw InvalidArgument("duplicate vector id '" + id + "'");
    }
    if (dim_ != 0 && vec.dim() != dim_) {
        throw DimensionError("vector '" + id + "' has dimension " + std::to_string(vec.dim()) + ", index has " +
                             std::to_string(dim_));
    }
    dim_ = vec.dim();
    positions_.emplace(id, ids_.size());
    ids_.push_back(id);
    vectors_.push_back(vec);
}

std::vector<Hit> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
    require_positive_k(k);
    std::vector<Hit> hits;
    if (ids_.empty()) {
        return hits;
    }
    hits.reserve(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        hits.push_back({ids_[i], cosine_similarity(query, vectors_[i])});
    }
    keep_top(hits, k);
    return hits;
}

const EmbeddingVector* VectorIndex::find(std::string_view id) const {
    const auto it = positions_.find(std::string(id));
    return it == positions_.end() ? nullptr : &vectors_[it->second];
}

// ---------------------------------------------------------------------------
// Bm25Index

Bm25Index::Bm25Index(double k1, double b) : k1_(k1), b_(b) {
    if (!(k1 >= 0.0) || !(b >= 0.0 && b <= 1.0)) {
        throw ConfigError("bm25 parameters require k1 >= 0 and 0 <= b <= 1");
    }
}

void Bm25Index::add(const std::string& id, std::string_view body) {
    if (doc_lengths_.contains(id)) {
        throw InvalidArgument("duplicate chunk id '" + id + "'");
    }
    const auto tokens = text::tokenize(body);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : tokens) {
        ++tf[t];
    }
    for (const auto& [term, count] : tf) {
        auto& list = postings_[term];
        const auto pos = std::lower_bound(list.begin(), list.end(), id,
                                          [](const Posting& p, const std::string& key) { return p.chunk_id < key; });
        list.insert(pos, Posting{id, count});
    }
    doc_lengths_.emplace(id, tokens.size());
    total_length_ += tokens.size();
}

double Bm25Index::avgdl() const noexcept {
    return doc_lengths_.empty() ? 0.0 : static_cast<double>(total_length_) / static_cast<double>(doc_lengths_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const {
    const auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(const std::string& term) const {
    const auto n = static_cast<double>(n_docs());
    const auto df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<Hit> Bm25Index::search(std::string_view query, std::size_t k) const {
    require_positive_k(k);
    const auto tokens = text::tokenize(query);
    const std::set<std::string> terms(tokens.begin(), tokens.end());
    const double mean_len = avgdl();

    std::map<std::string, double> scores;
    for (const auto& term : terms) {
        const auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        const double term_idf = idf(term);
        for (const auto& posting : it->second) {
            const auto tf = static_cast<double>(posting.tf);
            const auto dl = static_cast<double>(doc_lengths_.at(posting.chunk_id));
            const double norm = mean_len > 0.0 ? dl / mean_len : 0.0;
            scores[posting.chunk_id] += term_idf * tf * (k1_ + 1.0) / (tf + k1_ * (1.0 - b_ + b_ * norm));
        }
    }
    std::vector<Hit> hits;
    for (const auto& [id, score] : scores) {
        if (score > 0.0) {
            hits.push_back({id, score});
        }
    }
    keep_top(hits, k);
    return hits;
}

json Bm25Index::to_json() const {
    json postings = json::object();
    for (const auto& [term, list] : postings_) {
        json entries = json::array();
        for (const auto& p : list) {
            entries.push_back(json::array({p.chunk_id, p.tf}));
        }
        postings[term] = std::move(entries);
    }
    json lengths = json::object();
    for (const auto& [id, len] : doc_lengths_) {
        lengths[id] = len;
    }
    return json{{"k1", k1_}, {"b", b_}, {"doc_lengths", std::move(lengths)}, {"postings", std::move(postings)}};
}

Bm25Index Bm25Index::from_json(const json& j) {
    Bm25Index index(j.at("k1").get<double>(), j.at("b").get<double>());
    for (const auto& [id, len] : j.at("doc_lengths").items()) {
        const auto n = len.get<std::size_t>();
        index.doc_lengths_.emplace(id, n);
        index.total_length_ += n;
    }
    for (const auto& [term, entries] : j.at("postings").items()) {
        auto& list = index.postings_[term];
        for (const auto& entry : entries) {
            Posting p{entry.at(0).get<std::string>(), entry.at(1).get<std::uint32_t>()};
            if (!index.doc_lengths_.contains(p.chunk_id)) {
                throw ParseError("bm25 posting for '" + term + "' references unknown chunk '" + p.chunk_id + "'");
            }
            list.push_back(std::move(p));
        }
        if (!std::is_sorted(list.begin(), list.end(),
                            [](const Posting& a, const Posting& b) { return a.chunk_id < b.chunk_id; })) {
            throw ParseError("bm25 postings for '" + term + "' are not sorted by chunk id");
        }
    }
    return index;
}

// ---------------------------------------------------------------------------
// ChunkIndex

void ChunkIndex::add_chunks(std::span<const Chunk> chunks) {
    std::set<std::string, std::less<>> incoming;
    std::size_t dim = vectors_.dim();
    for (const auto& c : chunks) {
        if (!c.embedding.has_value()) {
            throw InvalidArgument("chunk '" + c.id + "' has no embedding");
        }
        if (chunks_.contains(c.id) || !incoming.insert(c.id).second) {
            throw InvalidArgument("duplicate chunk id '" + c.id + "'");
        }
        if (dim == 0) {
            dim = c.embedding->dim();
        } else if (c.embedding->dim() != dim) {
            throw DimensionError("chunk '" + c.id + "' has dimension " + std::to_string(c.embedding->dim()) +
                                 ", expected " + std::to_string(dim));
        }
    }
    for (const auto& c : chunks) {
        vectors_.add(c.id, *c.embedding);
        bm25_.add(c.id, c.text);
        chunks_.emplace(c.id, c);
    }
}

std::vector<Hit> ChunkIndex::dense_search(const EmbeddingVector& query, std::size_t k) const {
    return vectors_.search(query, k);
}

std::vector<Hit> ChunkIndex::bm25_search(std::string_view query, std::size_t k) const {
    return bm25_.search(query, k);
}

const Chunk* ChunkIndex::find(std::string_view id) const {
    const auto it = chunks_.find(id);
    return it == chunks_.end() ? nullptr : &it->second;
}

const Chunk& ChunkIndex::chunk(std::string_view id) const {
    const auto* c = find(id);
    if (c == nullptr) {
        throw InvalidArgument("unknown chunk id '" + std::string(id) + "'");
    }
    return *c;
}

json ChunkIndex::to_json() const {
    json chunks = json::array();
    json vectors = json::object();
    for (const auto& [id, c] : chunks_) {
        chunks.push_back({{"id", c.id},
                          {"doc_id", c.doc_id},
                          {"sentence_range", json::array({c.sentence_begin, c.sentence_end})},
                          {"text", c.text},
                          {"char_len", c.char_len}});
        const auto values = c.embedding->values();
        vectors[id] = std::vector<double>(values.begin(), values.end());
    }
    return json{{"version", kIndexFormatVersion},
                {"dim", dim()},
                {"chunks", std::move(chunks)},
                {"vectors", std::move(vectors)},
                {"bm25", bm25_.to_json()}};
}

ChunkIndex ChunkIndex::from_json(const json& j) {
    if (!j.is_object() || !j.contains("version") || !j["version"].is_string()) {
        throw ParseError("index document has no version tag");
    }
    const auto version = j["version"].get<std::string>();
    if (version != kIndexFormatVersion) {
        throw VersionMismatchError("index version '" + version + "' is not supported (expected '" +
                                   std::string(kIndexFormatVersion) + "')");
    }
    try {
        ChunkIndex index;
        const auto dim = j.at("dim").get<std::size_t>();
        const auto& vectors = j.at("vectors");
        for (const auto& rec : j.at("chunks")) {
            Chunk c;
            c.id = rec.at("id").get<std::string>();
            c.doc_id = rec.at("doc_id").get<std::string>();
            c.sentence_begin = rec.at("sentence_range").at(0).get<std::size_t>();
            c.sentence_end = rec.at("sentence_range").at(1).get<std::size_t>();
            c.text = rec.at("text").get<std::string>();
            c.char_len = rec.at("char_len").get<std::size_t>();
            auto values = vectors.at(c.id).get<std::vector<double>>();
            if (values.size() != dim) {
                throw DimensionError("stored vector for '" + c.id + "' does not match index dim");
            }
            c.embedding = EmbeddingVector::from_unit(std::move(values));
            if (index.chunks_.contains(c.id)) {
                throw ParseError("duplicate chunk id '" + c.id + "' in index file");
            }
            index.vectors_.add(c.id, *c.embedding);
            index.chunks_.emplace(c.id, std::move(c));
        }
        index.bm25_ = Bm25Index::from_json(j.at("bm25"));
        if (index.bm25_.n_docs() != index.chunks_.size()) {
            throw ParseError("bm25 section does not cover the stored chunks");
        }
        for (const auto& [id, len] : index.bm25_.doc_lengths()) {
            (void)len;
            if (!index.chunks_.contains(id)) {
                throw ParseError("bm25 section references unknown chunk '" + id + "'");
            }
        }
        return index;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed index document: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string("malformed index document: ") + e.what());
    }
}

void ChunkIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write index file '" + path.string() + "'");
    }
    out << to_json().dump() << '\n';
    if (!out) {
        throw IoError("error while writing index file '" + path.string() + "'");
    }
}

ChunkIndex ChunkIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read index file '" + path.string() + "'");
    }
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError("index file '" + path.string() + "' is truncated or malformed: " + e.what());
    }
    return from_json(j);
}

}  // namespace chunkrag
