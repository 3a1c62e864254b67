#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

namespace oracle {

std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        const bool word = c >= 0x80 || std::isalnum(c) != 0;
        if (word) {
            cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

double dot(const Vec& a, const Vec& b) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += static_cast<long double>(a[i]) * b[i];
    }
    return static_cast<double>(acc);
}

Vec unit(Vec v) {
    long double sq = 0.0L;
    for (double x : v) {
        sq += static_cast<long double>(x) * x;
    }
    const double n = std::sqrt(static_cast<double>(sq));
    for (double& x : v) {
        x /= n;
    }
    return v;
}

void rank(std::vector<Ranked>& r) {
    std::sort(r.begin(), r.end(), [](const Ranked& a, const Ranked& b) {
        return a.score != b.score ? a.score > b.score : a.id < b.id;
    });
}

std::vector<Ranked> bm25(const Corpus& corpus, const std::string& query, double k1, double b) {
    const double n = static_cast<double>(corpus.texts.size());
    std::map<std::string, std::vector<std::string>> toks;
    double total = 0.0;
    for (const auto& [id, text] : corpus.texts) {
        toks[id] = tokens(text);
        total += static_cast<double>(toks[id].size());
    }
    const double avgdl = total / n;
    const auto q = tokens(query);
    const std::set<std::string> distinct(q.begin(), q.end());

    std::vector<Ranked> out;
    for (const auto& [id, words] : toks) {
        double score = 0.0;
        bool any = false;
        for (const auto& t : distinct) {
            const double tf = static_cast<double>(std::count(words.begin(), words.end(), t));
            if (tf == 0.0) {
                continue;
            }
            any = true;
            double df = 0.0;
            for (const auto& [other, w] : toks) {
                df += std::find(w.begin(), w.end(), t) != w.end() ? 1.0 : 0.0;
            }
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double dl = static_cast<double>(words.size());
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if (any && score > 0.0) {
            out.push_back({id, score});
        }
    }
    rank(out);
    return out;
}

double tfidf_cosine(const Corpus& corpus, const std::string& query, const std::string& text) {
    const double n = static_cast<double>(corpus.texts.size());
    std::vector<std::set<std::string>> docs;
    for (const auto& [id, t] : corpus.texts) {
        const auto w = tokens(t);
        docs.emplace_back(w.begin(), w.end());
    }
    const auto weights = [&](const std::string& s) {
        std::map<std::string, double> tf;
        for (const auto& t : tokens(s)) {
            tf[t] += 1.0;
        }
        std::map<std::string, double> w;
        for (const auto& [term, count] : tf) {
            double df = 0.0;
            for (const auto& d : docs) {
                df += d.contains(term) ? 1.0 : 0.0;
            }
            if (df > 0.0) {
                w[term] = count * std::log(n / df);
            }
        }
        return w;
    };
    const auto a = weights(query);
    const auto c = weights(text);
    double num = 0.0;
    double na = 0.0;
    double nc = 0.0;
    for (const auto& [t, w] : a) {
        na += w * w;
        const auto it = c.find(t);
        num += it == c.end() ? 0.0 : w * it->second;
    }
    for (const auto& [t, w] : c) {
        nc += w * w;
    }
    if (na == 0.0 || nc == 0.0) {
        return 0.0;
    }
    return std::clamp(num / std::sqrt(na * nc), 0.0, 1.0);
}

std::vector<Ranked> dense(const std::map<std::string, Vec>& vectors, const Vec& query) {
    std::vector<Ranked> out;
    for (const auto& [id, v] : vectors) {
        out.push_back({id, std::clamp(dot(v, query), -1.0, 1.0)});
    }
    rank(out);
    return out;
}

bool same_ranking(const std::vector<Ranked>& got, const std::vector<Ranked>& want, double tol, double tie_tol,
                  std::string* why) {
    std::ostringstream msg;
    if (got.size() != want.size()) {
        msg << "length " << got.size() << " vs " << want.size();
        *why = msg.str();
        return false;
    }
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::abs(got[i].score - want[i].score) > tol) {
            msg << "rank " << i << ": score " << got[i].score << " vs " << want[i].score;
            *why = msg.str();
            return false;
        }
        if (got[i].id == want[i].id) {
            continue;
        }
        // Accept a swap only inside a group of reference ties.
        const auto it = std::find_if(want.begin(), want.end(), [&](const Ranked& r) { return r.id == got[i].id; });
        if (it == want.end() || std::abs(it->score - want[i].score) > tie_tol) {
            msg << "rank " << i << ": id " << got[i].id << " vs " << want[i].id;
            *why = msg.str();
            return false;
        }
    }
    return true;
}

namespace {

std::map<std::string, double> minmax(const std::vector<Ranked>& hits) {
    std::map<std::string, double> out;
    if (hits.empty()) {
        return out;
    }
    double lo = hits.front().score;
    double hi = hits.front().score;
    for (const auto& h : hits) {
        lo = std::min(lo, h.score);
        hi = std::max(hi, h.score);
    }
    for (const auto& h : hits) {
        out[h.id] = hi > lo ? (h.score - lo) / (hi - lo) : 1.0;
    }
    return out;
}

}  // namespace

std::vector<Ranked> hybrid(std::vector<Ranked> bm25_hits, std::vector<Ranked> dense_hits, double w_bm25,
                           double w_dense, std::size_t k) {
    const auto a = minmax(bm25_hits);
    const auto d = minmax(dense_hits);
    std::set<std::string> ids;
    for (const auto& [id, s] : a) {
        ids.insert(id);
    }
    for (const auto& [id, s] : d) {
        ids.insert(id);
    }
    std::vector<Ranked> out;
    for (const auto& id : ids) {
        const double x = a.contains(id) ? a.at(id) : 0.0;
        const double y = d.contains(id) ? d.at(id) : 0.0;
        out.push_back({id, w_bm25 * x + w_dense * y});
    }
    rank(out);
    if (out.size() > k) {
        out.resize(k);
    }
    return out;
}

std::vector<std::string> dedup(const std::vector<std::string>& order, const std::map<std::string, Vec>& vectors,
                               double lambda) {
    std::vector<std::string> kept;
    for (const auto& id : order) {
        bool redundant = false;
        for (const auto& k : kept) {
            if (dot(vectors.at(id), vectors.at(k)) > lambda) {
                redundant = true;
                break;
            }
        }
        if (!redundant) {
            kept.push_back(id);
        }
    }
    return kept;
}

Threshold threshold(const std::vector<double>& scores, double epsilon) {
    long double sum = 0.0L;
    for (double s : scores) {
        sum += s;
    }
    const long double n = static_cast<long double>(scores.size());
    const long double mean = sum / n;
    long double sq = 0.0L;
    for (double s : scores) {
        sq += (s - mean) * (s - mean);
    }
    Threshold t;
    t.mean = static_cast<double>(mean);
    t.variance = static_cast<double>(sq / n);
    t.plus_std = t.variance < epsilon;
    t.value = t.plus_std ? static_cast<double>(mean + std::sqrt(sq / n)) : t.mean;
    return t;
}

std::optional<double> parse_score(const std::string& s) {
    static const std::regex number(R"(-?(\d+(\.\d*)?|\.\d+))");
    std::smatch m;
    if (!std::regex_search(s, m, number)) {
        return std::nullopt;
    }
    return std::clamp(std::stod(m.str()), 0.0, 1.0);
}

std::vector<std::string> years(const std::string& s) {
    static const std::regex run(R"(\d+)");
    std::vector<std::string> out;
    for (std::sregex_iterator it(s.begin(), s.end(), run), end; it != end; ++it) {
        const auto y = it->str();
        if (y.size() == 4 && std::stoi(y) >= 1000 && std::stoi(y) <= 2100) {
            out.push_back(y);
        }
    }
    return out;
}

std::size_t utf8_length(const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

}  // namespace oracle
