#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "chunkrag/config.hpp"
#include "chunkrag/errors.hpp"
#include "chunkrag/eval.hpp"
#include "chunkrag/index.hpp"
#include "chunkrag/pipeline.hpp"
#include "chunkrag/text.hpp"

namespace chunkrag::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config_path;
    std::string corpus;
    std::string format;
    std::string index;
    std::string dataset;
    std::string out_dir;
    std::string query;
    std::string trace_path;
    std::string traces_dir;
    std::string thresholds;

    std::string backend;
    std::string mock_script;
    std::string model;
    std::string embedding;
    std::string rerank;
    std::string threshold_mode;
    double theta = 0.0;
    std::size_t max_chars = 0;
    std::size_t dim = 0;
    double lambda_dup = 0.0;
    double w_bm25 = 0.0;
    double w_llm = 0.0;
    std::size_t k_per_arm = 0;
    std::size_t k_combined = 0;
    double epsilon = 0.0;
    std::size_t top_n = 0;
    std::size_t jobs = 0;
};

// Options registered on a subcommand, keyed by long name, so we can ask
// whether the user actually passed them.
class FlagSet {
public:
    explicit FlagSet(CLI::App* app) : app_(app) {}

    template <typename T>
    void add(const std::string& name, T& target, const std::string& help) {
        opts_[name] = app_->add_option("--" + name, target, help);
    }

    bool given(const std::string& name) const {
        const auto it = opts_.find(name);
        return it != opts_.end() && it->second->count() > 0;
    }

private:
    CLI::App* app_;
    std::map<std::string, CLI::Option*> opts_;
};

void add_pipeline_flags(FlagSet& f, Options& o) {
    f.add("config", o.config_path, "JSON config file");
    f.add("backend", o.backend, "LLM backend for every stage: mock or remote");
    f.add("mock-script", o.mock_script, "scripted responses for the mock backend");
    f.add("model", o.model, "chat model name for every stage");
    f.add("embedding", o.embedding, "embedding provider: local or remote");
    f.add("dim", o.dim, "embedding dimension");
    f.add("theta", o.theta, "chunk boundary similarity threshold");
    f.add("max-chars", o.max_chars, "chunk length cap in characters");
    f.add("lambda-dup", o.lambda_dup, "redundancy threshold for dedup");
    f.add("w-bm25", o.w_bm25, "lexical weight in hybrid fusion");
    f.add("w-llm", o.w_llm, "dense weight in hybrid fusion");
    f.add("k-per-arm", o.k_per_arm, "hits fetched from each retriever");
    f.add("k-combined", o.k_combined, "candidates kept after fusion");
    f.add("threshold-mode", o.threshold_mode, "statistical or llm");
    f.add("epsilon", o.epsilon, "variance cutoff for the dynamic threshold");
    f.add("rerank", o.rerank, "remote, local-fallback or none");
    f.add("top-n", o.top_n, "rerank cutoff");
    f.add("jobs", o.jobs, "worker cap");
}

// Config file contents after path keys are split off.
struct FileConfig {
    std::optional<std::string> corpus;
    std::optional<std::string> corpus_format;
    std::optional<std::string> index;
    std::optional<std::string> dataset;
    std::optional<std::string> out_dir;
    bool sets_dim = false;
};

std::string resolve_against(const fs::path& base, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) {
        return p;
    }
    return (base / p).lexically_normal().string();
}

json read_config_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("--config: cannot open '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("--config: '" + path.string() + "' is not valid JSON: " + e.what());
    }
}

PipelineConfig load_config_file(const fs::path& path, FileConfig& files) {
    json j = read_config_json(path);
    if (!j.is_object()) {
        throw ConfigError("--config: top level must be a JSON object");
    }
    const fs::path base = path.parent_path();
    auto take_path = [&](const char* key) -> std::optional<std::string> {
        const auto it = j.find(key);
        if (it == j.end()) {
            return std::nullopt;
        }
        if (!it->is_string()) {
            throw ConfigError(std::string("config key '") + key + "' must be a string");
        }
        auto value = it->get<std::string>();
        j.erase(it);
        return value;
    };
    files.corpus = take_path("corpus");
    files.corpus_format = take_path("corpus_format");
    files.index = take_path("index");
    files.dataset = take_path("dataset");
    files.out_dir = take_path("out_dir");
    for (auto* p : {&files.corpus, &files.index, &files.dataset, &files.out_dir}) {
        if (p->has_value()) {
            **p = resolve_against(base, **p);
        }
    }
    files.sets_dim = j.contains("embedding") && j["embedding"].is_object() && j["embedding"].contains("dim");

    PipelineConfig cfg = pipeline_config_from_json(j);
    cfg.backends.for_each([&](LlmBackendConfig& c) { c.mock_script_path = resolve_against(base, c.mock_script_path); });
    return cfg;
}

LlmKind parse_backend_flag(const std::string& s) {
    if (s == "mock") {
        return LlmKind::Mock;
    }
    if (s == "remote") {
        return LlmKind::Remote;
    }
    throw ConfigError("--backend: expected mock or remote, got '" + s + "'");
}

// defaults < config file < flags
PipelineConfig effective_config(const Options& o, const FlagSet& f, FileConfig& files) {
    PipelineConfig cfg;
    if (f.given("config")) {
        cfg = load_config_file(o.config_path, files);
    }
    if (f.given("backend")) {
        const auto kind = parse_backend_flag(o.backend);
        cfg.backends.for_each([&](LlmBackendConfig& c) { c.kind = kind; });
    }
    if (f.given("mock-script")) {
        cfg.backends.for_each([&](LlmBackendConfig& c) { c.mock_script_path = o.mock_script; });
    }
    if (f.given("model")) {
        cfg.backends.for_each([&](LlmBackendConfig& c) { c.model_name = o.model; });
    }
    if (f.given("embedding")) {
        if (o.embedding == "local") {
            cfg.embedding.kind = EmbeddingKind::DeterministicLocal;
        } else if (o.embedding == "remote") {
            cfg.embedding.kind = EmbeddingKind::Remote;
        } else {
            throw ConfigError("--embedding: expected local or remote, got '" + o.embedding + "'");
        }
    }
    if (f.given("dim")) {
        cfg.embedding.dim = o.dim;
        files.sets_dim = true;
    }
    if (f.given("theta")) {
        cfg.chunker.theta = o.theta;
    }
    if (f.given("max-chars")) {
        cfg.chunker.max_chars = o.max_chars;
    }
    if (f.given("lambda-dup")) {
        cfg.hybrid.lambda_dup = o.lambda_dup;
    }
    // The weights must sum to 1, so a lone weight flag also sets its partner.
    if (f.given("w-bm25")) {
        cfg.hybrid.w_bm25 = o.w_bm25;
        cfg.hybrid.w_llm = f.given("w-llm") ? o.w_llm : 1.0 - o.w_bm25;
    } else if (f.given("w-llm")) {
        cfg.hybrid.w_llm = o.w_llm;
        cfg.hybrid.w_bm25 = 1.0 - o.w_llm;
    }
    if (f.given("k-per-arm")) {
        cfg.hybrid.k_per_arm = o.k_per_arm;
    }
    if (f.given("k-combined")) {
        cfg.hybrid.k_combined = o.k_combined;
    }
    if (f.given("threshold-mode")) {
        if (o.threshold_mode == "statistical") {
            cfg.threshold.mode = ThresholdMode::Statistical;
        } else if (o.threshold_mode == "llm") {
            cfg.threshold.mode = ThresholdMode::Llm;
        } else {
            throw ConfigError("--threshold-mode: expected statistical or llm, got '" + o.threshold_mode + "'");
        }
    }
    if (f.given("epsilon")) {
        cfg.threshold.epsilon = o.epsilon;
    }
    if (f.given("rerank")) {
        if (o.rerank == "remote") {
            cfg.rerank.kind = RerankKind::Remote;
        } else if (o.rerank == "local-fallback") {
            cfg.rerank.kind = RerankKind::LocalFallback;
        } else if (o.rerank == "none") {
            cfg.rerank.kind = RerankKind::None;
        } else {
            throw ConfigError("--rerank: expected remote, local-fallback or none, got '" + o.rerank + "'");
        }
    }
    if (f.given("top-n")) {
        cfg.rerank.top_n = o.top_n;
    }
    if (f.given("jobs")) {
        cfg.jobs = o.jobs;
    }
    cfg.validate();
    return cfg;
}

std::string require_path(const FlagSet& f, const std::string& flag, const std::string& flag_value,
                         const std::optional<std::string>& from_file, const char* file_key) {
    if (f.given(flag)) {
        return flag_value;
    }
    if (from_file.has_value() && !from_file->empty()) {
        return *from_file;
    }
    throw ConfigError("missing required --" + flag + " (or config key '" + file_key + "')");
}

// The query embedder must produce vectors of the index's dimension; unless the
// user pinned a dimension, adopt the one stored in the index.
void match_index_dim(PipelineConfig& cfg, const ChunkIndex& index, const FileConfig& files) {
    if (index.size() > 0 && !files.sets_dim) {
        cfg.embedding.dim = index.dim();
    }
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create output directory '" + dir.string() + "'" + (ec ? ": " + ec.message() : ""));
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

std::string trace_file_name(std::size_t n, const std::string& id) {
    std::string safe;
    for (const char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        safe.push_back(ok ? c : '_');
    }
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%04zu-", n);
    return prefix + safe + ".json";
}

std::vector<double> parse_thresholds(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = text::trim(item);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || v < 0.0 || v > 1.0) {
            throw ConfigError("--thresholds: '" + std::string(t) + "' is not a number in [0, 1]");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw ConfigError("--thresholds: empty list");
    }
    return out;
}

int cmd_ingest(const Options& o, const FlagSet& f, std::ostream& out, std::ostream& err) {
    FileConfig files;
    const PipelineConfig cfg = effective_config(o, f, files);
    const auto corpus = require_path(f, "corpus", o.corpus, files.corpus, "corpus");
    const auto index = require_path(f, "index", o.index, files.index, "index");

    CorpusFormat format = fs::is_directory(corpus) ? CorpusFormat::PlainDir : CorpusFormat::Jsonl;
    if (f.given("format")) {
        format = parse_corpus_format(o.format);
    } else if (files.corpus_format.has_value()) {
        format = parse_corpus_format(*files.corpus_format);
    }

    err << "chunkrag: ingesting " << corpus << " (" << to_string(format) << ")\n";
    const CorpusStats stats = build_index(corpus, format, index, cfg);
    err << "chunkrag: wrote " << stats.chunks << " chunks to " << index << "\n";
    out << stats.to_json().dump() << "\n";
    return kExitOk;
}

int cmd_query(const Options& o, const FlagSet& f, std::ostream& out, std::ostream& err) {
    FileConfig files;
    PipelineConfig cfg = effective_config(o, f, files);
    const auto index_path = require_path(f, "index", o.index, files.index, "index");
    if (!f.given("query")) {
        throw ConfigError("missing required --query");
    }
    const ChunkIndex index = ChunkIndex::load(index_path);
    match_index_dim(cfg, index, files);
    const Pipeline pipeline(index, cfg);

    auto write_trace = [&](const PipelineTrace& trace) {
        if (f.given("trace")) {
            write_text(o.trace_path, trace.to_json().dump(2) + "\n");
        }
    };
    try {
        const Answer answer = pipeline.answer(o.query);
        for (const auto& w : answer.trace.warnings) {
            err << "chunkrag: warning: " << w << "\n";
        }
        write_trace(answer.trace);
        out << answer.text << "\n";
    } catch (const PipelineError& e) {
        write_trace(e.trace());
        throw;
    }
    return kExitOk;
}

std::vector<QaExample> dataset_from(const Options& o, const FlagSet& f, const FileConfig& files) {
    const auto path = require_path(f, "dataset", o.dataset, files.dataset, "dataset");
    return load_dataset(path);
}

int cmd_eval(const Options& o, const FlagSet& f, std::ostream& out, std::ostream& err) {
    FileConfig files;
    PipelineConfig cfg = effective_config(o, f, files);
    const auto index_path = require_path(f, "index", o.index, files.index, "index");
    const auto out_dir = require_path(f, "out", o.out_dir, files.out_dir, "out_dir");
    const auto dataset = dataset_from(o, f, files);
    const ChunkIndex index = ChunkIndex::load(index_path);
    match_index_dim(cfg, index, files);
    const Pipeline pipeline(index, cfg);

    ensure_out_dir(out_dir);
    err << "chunkrag: evaluating " << dataset.size() << " examples\n";
    const EvalReport report = evaluate_accuracy(dataset, pipeline, cfg.jobs);
    write_results_jsonl(report, fs::path(out_dir) / "results.jsonl");
    const json summary = report.summary_json();
    write_json_file(summary, fs::path(out_dir) / "summary.json");
    if (f.given("traces")) {
        ensure_out_dir(o.traces_dir);
        for (std::size_t i = 0; i < report.records.size(); ++i) {
            const auto& rec = report.records[i];
            if (rec.trace.has_value()) {
                write_text(fs::path(o.traces_dir) / trace_file_name(i, rec.id), rec.trace->to_json().dump(2) + "\n");
            }
        }
    }
    for (const auto& rec : report.records) {
        if (rec.error.has_value()) {
            err << "chunkrag: example " << rec.id << " failed: " << *rec.error << "\n";
        }
    }
    out << summary.dump() << "\n";
    return kExitOk;
}

int cmd_ablate(const Options& o, const FlagSet& f, std::ostream& out, std::ostream& err) {
    FileConfig files;
    PipelineConfig cfg = effective_config(o, f, files);
    const auto index_path = require_path(f, "index", o.index, files.index, "index");
    const auto out_dir = require_path(f, "out", o.out_dir, files.out_dir, "out_dir");
    const auto thresholds = parse_thresholds(f.given("thresholds") ? o.thresholds : "0.5,0.6,0.7,0.8,0.9");
    const auto dataset = dataset_from(o, f, files);
    std::vector<std::string> queries;
    queries.reserve(dataset.size());
    for (const auto& ex : dataset) {
        queries.push_back(ex.question);
    }
    const ChunkIndex index = ChunkIndex::load(index_path);
    match_index_dim(cfg, index, files);
    const Pipeline pipeline(index, cfg);

    ensure_out_dir(out_dir);
    err << "chunkrag: ablating " << thresholds.size() << " thresholds over " << queries.size() << " queries\n";
    const auto rows = ablate_dedup(pipeline, thresholds, queries);
    write_ablation_csv(rows, fs::path(out_dir) / "ablation.csv");
    const auto comparison = compare_retrievers(pipeline, queries);
    write_json_file(comparison.to_json(), fs::path(out_dir) / "comparison.json");
    out << ablation_csv(rows);
    return kExitOk;
}

int cmd_config(const Options& o, const FlagSet& f, std::ostream& out) {
    FileConfig files;
    const PipelineConfig cfg = effective_config(o, f, files);
    out << to_json(cfg).dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Chunk-filtered retrieval-augmented generation", "chunkrag"};
    app.require_subcommand(1);

    Options o;
    auto* ingest = app.add_subcommand("ingest", "split, chunk and index a corpus");
    auto* query = app.add_subcommand("query", "answer one question from an index");
    auto* eval = app.add_subcommand("eval", "run a QA dataset and score accuracy");
    auto* ablate = app.add_subcommand("ablate", "dedup threshold sweep and retriever comparison");
    auto* config = app.add_subcommand("config", "print the effective configuration");

    FlagSet f_ingest(ingest), f_query(query), f_eval(eval), f_ablate(ablate), f_config(config);
    for (auto* fs : {&f_ingest, &f_query, &f_eval, &f_ablate, &f_config}) {
        add_pipeline_flags(*fs, o);
    }
    f_ingest.add("corpus", o.corpus, "JSONL file or directory of .txt files");
    f_ingest.add("format", o.format, "jsonl or plain-dir");
    f_ingest.add("index", o.index, "index file to write");
    f_query.add("index", o.index, "index file");
    f_query.add("query", o.query, "question text");
    f_query.add("trace", o.trace_path, "write the stage trace here");
    f_eval.add("index", o.index, "index file");
    f_eval.add("dataset", o.dataset, "QA dataset (JSONL)");
    f_eval.add("out", o.out_dir, "output directory");
    f_eval.add("traces", o.traces_dir, "write one trace per example into this directory");
    f_ablate.add("index", o.index, "index file");
    f_ablate.add("dataset", o.dataset, "dataset whose questions drive the sweep");
    f_ablate.add("thresholds", o.thresholds, "comma-separated redundancy thresholds");
    f_ablate.add("out", o.out_dir, "output directory");

    std::vector<std::string> argv_store;
    argv_store.reserve(args.size() + 1);
    argv_store.emplace_back("chunkrag");
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) {
        argv.push_back(a.c_str());
    }

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "chunkrag: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (ingest->parsed()) {
            return cmd_ingest(o, f_ingest, out, err);
        }
        if (query->parsed()) {
            return cmd_query(o, f_query, out, err);
        }
        if (eval->parsed()) {
            return cmd_eval(o, f_eval, out, err);
        }
        if (ablate->parsed()) {
            return cmd_ablate(o, f_ablate, out, err);
        }
        return cmd_config(o, f_config, out);
    } catch (const ConfigError& e) {
        err << "chunkrag: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "chunkrag: error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace chunkrag::cli
