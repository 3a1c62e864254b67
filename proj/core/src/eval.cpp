#include "chunkrag/eval.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "chunkrag/errors.hpp"
#include "chunkrag/text.hpp"
#include "parallel.hpp"

namespace chunkrag {

using nlohmann::json;

std::vector<QaExample> parse_dataset(std::string_view content, std::string_view source) {
    if (!text::is_valid_utf8(content)) {
        throw IoError(std::string(source) + ": content is not valid UTF-8");
    }
    std::vector<QaExample> out;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) {
            continue;
        }
        const auto where = std::string(source) + " line " + std::to_string(line_no);
        try {
            const auto j = json::parse(line);
            QaExample ex;
            ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
            ex.question = j.at("question").get<std::string>();
            ex.gold_answers = j.at("answers").get<std::vector<std::string>>();
            if (ex.gold_answers.empty()) {
                throw ParseError(where + ": 'answers' must not be empty");
            }
            out.push_back(std::move(ex));
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
    }
    return out;
}

std::vector<QaExample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read dataset '" + path.string() + "'");
    }
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_dataset(content, path.string());
}

std::string normalize_answer(std::string_view s) { return text::collapse_whitespace(text::to_lower_ascii(s)); }

bool answer_matches(std::string_view answer, std::span<const std::string> gold_answers) {
    const auto normalized = normalize_answer(answer);
    for (const auto& gold : gold_answers) {
        const auto g = normalize_answer(gold);
        if (!g.empty() && normalized.find(g) != std::string::npos) {
            return true;
        }
    }
    return false;
}

json ExampleRecord::to_json() const {
    json j = {{"id", id},         {"question", question}, {"answer", answer}, {"correct", correct},
              {"used_chunks", used_chunks}, {"error", nullptr}};
    if (error.has_value()) {
        j["error"] = *error;
    }
    if (long_form_score.has_value()) {
        j["long_form_score"] = *long_form_score;
    }
    return j;
}

json EvalReport::summary_json() const {
    json j = {{"accuracy", accuracy}, {"correct", correct}, {"total", total}, {"failed", failed}};
    if (mean_long_form_score.has_value()) {
        j["mean_long_form_score"] = *mean_long_form_score;
    }
    return j;
}

EvalReport evaluate_accuracy(std::span<const QaExample> dataset, const Pipeline& pipeline, std::size_t jobs,
                             const LongFormScorer& long_form) {
    if (dataset.empty()) {
        throw InvalidArgument("evaluate_accuracy: dataset is empty");
    }
    EvalReport report;
    report.records.resize(dataset.size());
    detail::parallel_for(dataset.size(), jobs, [&](std::size_t i) {
        const auto& ex = dataset[i];
        auto& rec = report.records[i];
        rec.id = ex.id;
        rec.question = ex.question;
        try {
            auto answer = pipeline.answer(ex.question);
            rec.answer = answer.text;
            rec.used_chunks = answer.used_chunks;
            rec.correct = answer_matches(answer.text, ex.gold_answers);
            if (long_form) {
                rec.long_form_score = long_form(ex, answer.text);
            }
            rec.trace = std::move(answer.trace);
        } catch (const PipelineError& e) {
            rec.error = e.what();
            rec.trace = e.trace();
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
    });

    double long_form_sum = 0.0;
    std::size_t long_form_count = 0;
    for (const auto& rec : report.records) {
        report.correct += rec.correct ? 1 : 0;
        report.failed += rec.error.has_value() ? 1 : 0;
        if (rec.long_form_score.has_value()) {
            long_form_sum += *rec.long_form_score;
            ++long_form_count;
        }
    }
    report.total = dataset.size();
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
    if (long_form_count > 0) {
        report.mean_long_form_score = long_form_sum / static_cast<double>(long_form_count);
    }
    return report;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    return out;
}

void check_written(const std::ofstream& out, const std::filesystem::path& path) {
    if (!out) {
        throw IoError("error while writing '" + path.string() + "'");
    }
}

}  // namespace

void write_results_jsonl(const EvalReport& report, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    for (const auto& rec : report.records) {
        out << rec.to_json().dump() << '\n';
    }
    check_written(out, path);
}

void write_json_file(const json& j, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << j.dump(2) << '\n';
    check_written(out, path);
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> ablate_dedup(const Pipeline& pipeline, std::span<const double> thresholds,
                                      std::span<const std::string> queries) {
    for (double t : thresholds) {
        if (!(t >= 0.0 && t <= 1.0)) {
            throw InvalidArgument("ablation thresholds must lie in [0, 1]");
        }
    }
    std::vector<std::vector<ScoredChunk>> candidates;
    candidates.reserve(queries.size());
    for (const auto& q : queries) {
        candidates.push_back(pipeline.retrieve(q).filtered);
    }

    const auto pair_stats = [](std::span<const ScoredChunk> hits) {
        const double pairs = static_cast<double>(hits.size()) * static_cast<double>(hits.size() - (hits.empty() ? 0 : 1)) / 2.0;
        return std::pair{mean_pairwise_cosine(hits) * pairs, pairs};
    };

    double before_sum = 0.0;
    double before_pairs = 0.0;
    for (const auto& c : candidates) {
        const auto [sum, pairs] = pair_stats(c);
        before_sum += sum;
        before_pairs += pairs;
    }
    const double sim_before = before_pairs > 0.0 ? before_sum / before_pairs : 0.0;

    std::vector<AblationRow> rows;
    rows.reserve(thresholds.size());
    for (double lambda : thresholds) {
        AblationRow row;
        row.threshold = lambda;
        row.sim_before = sim_before;
        double after_sum = 0.0;
        double after_pairs = 0.0;
        double tokens = 0.0;
        std::size_t kept_total = 0;
        for (const auto& c : candidates) {
            const auto result = dedup(c, lambda);
            row.chunks_removed += result.dropped.size();
            for (const auto& k : result.kept) {
                tokens += static_cast<double>(text::whitespace_token_count(k.chunk.text));
            }
            kept_total += result.kept.size();
            const auto [sum, pairs] = pair_stats(result.kept);
            after_sum += sum;
            after_pairs += pairs;
        }
        row.avg_chunk_length = kept_total > 0 ? tokens / static_cast<double>(kept_total) : 0.0;
        row.sim_after = after_pairs > 0.0 ? after_sum / after_pairs : 0.0;
        rows.push_back(row);
    }
    return rows;
}

namespace {

constexpr std::string_view kAblationHeader = "threshold,chunks_removed,avg_chunk_length,sim_before,sim_after";

double parse_double_field(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
        throw ParseError("ablation csv line " + std::to_string(line_no) + ": bad number '" + std::string(field) + "'");
    }
    return value;
}

}  // namespace

std::string ablation_csv(std::span<const AblationRow> rows) {
    std::string out(kAblationHeader);
    out += '\n';
    for (const auto& r : rows) {
        out += text::format_shortest(r.threshold) + ',' + std::to_string(r.chunks_removed) + ',' +
               text::format_shortest(r.avg_chunk_length) + ',' + text::format_shortest(r.sim_before) + ',' +
               text::format_shortest(r.sim_after) + '\n';
    }
    return out;
}

std::vector<AblationRow> parse_ablation_csv(std::string_view csv) {
    std::vector<AblationRow> rows;
    std::istringstream in{std::string(csv)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != kAblationHeader) {
                throw ParseError("ablation csv: unexpected header '" + line + "'");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
            fields.push_back(rest.substr(0, comma));
            rest.remove_prefix(comma + 1);
        }
        fields.push_back(rest);
        if (fields.size() != 5) {
            throw ParseError("ablation csv line " + std::to_string(line_no) + ": expected 5 fields");
        }
        AblationRow row;
        row.threshold = parse_double_field(fields[0], line_no);
        std::size_t removed = 0;
        const auto res = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), removed);
        if (res.ec != std::errc{} || res.ptr != fields[1].data() + fields[1].size()) {
            throw ParseError("ablation csv line " + std::to_string(line_no) + ": bad count");
        }
        row.chunks_removed = removed;
        row.avg_chunk_length = parse_double_field(fields[2], line_no);
        row.sim_before = parse_double_field(fields[3], line_no);
        row.sim_after = parse_double_field(fields[4], line_no);
        rows.push_back(row);
    }
    return rows;
}

void write_ablation_csv(std::span<const AblationRow> rows, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    out << ablation_csv(rows);
    check_written(out, path);
}

// ---------------------------------------------------------------------------
// Retriever comparison

json RetrieverComparison::to_json() const {
    return json{{"naive_avg_relevance", naive_avg_relevance},
                {"chunkrag_avg_relevance", chunkrag_avg_relevance},
                {"naive_chunks", naive_chunks},
                {"chunkrag_chunks", chunkrag_chunks}};
}

namespace {

std::vector<ScoredChunk> retrieve_with(const Pipeline& pipeline, const std::string& query, RetrieverKind kind) {
    if (kind == RetrieverKind::ChunkRag) {
        return pipeline.filter(query).post_threshold;
    }
    std::vector<ScoredChunk> out;
    const auto qvec = pipeline.embed_query(query);
    for (const auto& hit : pipeline.index().dense_search(qvec, pipeline.config().hybrid.k_combined)) {
        ScoredChunk sc;
        sc.chunk = pipeline.index().chunk(hit.chunk_id);
        sc.retrieval_score = hit.score;
        sc.dense_component = hit.score;
        out.push_back(std::move(sc));
    }
    return out;
}

std::pair<double, std::size_t> relevance_sum(const Pipeline& pipeline, const std::string& query,
                                             std::span<const ScoredChunk> hits) {
    double sum = 0.0;
    for (const auto& h : hits) {
        sum += base_score(h.chunk.text, query, *pipeline.backends().score);
    }
    return {sum, hits.size()};
}

}  // namespace

RetrieverComparison compare_retrievers(const Pipeline& pipeline, std::span<const std::string> queries,
                                       RetrieverKind first, RetrieverKind second) {
    if (queries.empty()) {
        throw InvalidArgument("compare_retrievers: query set is empty");
    }
    double first_sum = 0.0;
    double second_sum = 0.0;
    RetrieverComparison out;
    for (const auto& q : queries) {
        const auto a = relevance_sum(pipeline, q, retrieve_with(pipeline, q, first));
        const auto b = relevance_sum(pipeline, q, retrieve_with(pipeline, q, second));
        first_sum += a.first;
        out.naive_chunks += a.second;
        second_sum += b.first;
        out.chunkrag_chunks += b.second;
    }
    out.naive_avg_relevance = out.naive_chunks > 0 ? first_sum / static_cast<double>(out.naive_chunks) : 0.0;
    out.chunkrag_avg_relevance =
        out.chunkrag_chunks > 0 ? second_sum / static_cast<double>(out.chunkrag_chunks) : 0.0;
    return out;
}

}  // namespace chunkrag
