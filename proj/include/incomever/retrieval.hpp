#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "canon.hpp"
#include "corpus.hpp"
#include "csv.hpp"
#include "text.hpp"

namespace incv::retrieval {

// ---------------------------------------------------------------------------
// Industries

inline constexpr std::array<std::string_view, 12> kIndustries = {
    "Technology", "Finance",    "Healthcare", "Government", "Manufacturing", "Retail",
    "Education",  "Travel",     "Energy",     "Logistics",  "Hospitality",   "Consulting"};

inline bool is_industry(std::string_view s) {
    return std::find(kIndustries.begin(), kIndustries.end(), s) != kIndustries.end();
}

/// Canonical employer -> industry. Keys compare on their normalized form; there is no fuzzy matching.
class IndustryTable {
public:
    void add(std::string_view employer, std::string_view industry) {
        if (!is_industry(industry))
            throw ConfigError("industry table: '" + std::string(industry) + "' is not a known industry");
        map_[text::key_normalize(employer)] = std::string(industry);
    }

    std::optional<std::string> find(std::string_view employer) const {
        auto it = map_.find(text::key_normalize(employer));
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const { return map_.size(); }
    bool empty() const { return map_.empty(); }

    /// CSV with header employer,industry.
    static IndustryTable parse_csv(std::string_view content) {
        IndustryTable t;
        auto rows = csv::parse(content);
        if (rows.empty()) return t;
        auto cols = csv::locate(rows[0], {"employer", "industry"});
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() <= std::max(cols[0], cols[1]))
                throw ConfigError("industry table: row " + std::to_string(r + 1) + " is short");
            t.add(rows[r][cols[0]], rows[r][cols[1]]);
        }
        return t;
    }

    static IndustryTable load(const std::string& path) { return parse_csv(csv::read_file(path)); }

private:
    std::map<std::string, std::string> map_;
};

inline std::optional<std::string> infer_industry(std::string_view canonical_employer, const IndustryTable& table) {
    return table.find(canonical_employer);
}

// ---------------------------------------------------------------------------
// Queries

/// Specific before generic.
enum class Tier { employer_title = 0, title_only = 1, industry_title = 2 };

struct Query {
    std::string text;
    Tier tier = Tier::employer_title;

    friend bool operator==(const Query&, const Query&) = default;
};

/// "<Employer> <Job Title> Salary", "<Job Title> Salary", "<Industry> <Job Title> Salary".
inline std::vector<Query> build_queries(std::string_view employer, std::string_view job_title,
                                        const std::optional<std::string>& industry) {
    auto join = [](std::initializer_list<std::string_view> parts) {
        std::string s;
        for (auto p : parts) {
            auto c = text::collapse_ws(p);
            if (c.empty()) continue;
            if (!s.empty()) s += ' ';
            s += c;
        }
        return s;
    };
    std::vector<Query> q;
    q.push_back({join({employer, job_title, "Salary"}), Tier::employer_title});
    q.push_back({join({job_title, "Salary"}), Tier::title_only});
    if (industry) q.push_back({join({*industry, job_title, "Salary"}), Tier::industry_title});
    return q;
}

// ---------------------------------------------------------------------------
// Index

/// Text a raw record contributes to the index.
inline std::string index_text(const RawRecord& r) {
    const auto& p = r.payload;
    auto field = [&](const char* k) -> std::string {
        if (!p.is_object() || !p.contains(k)) return {};
        const auto& v = p.at(k);
        return v.is_string() ? v.get<std::string>() : v.dump();
    };
    switch (r.source_type) {
        case SourceType::government:
            return field("name") + " " + field("agency") + " " + field("location") + " " + field("state") + " " +
                   field("occupation") + " " + field("year");
        case SourceType::salary_site: {
            std::string doc = field("document");
            // Strip markup: index only element text and attribute values.
            std::string out;
            bool in_tag = false;
            for (char c : doc) {
                if (c == '<') {
                    in_tag = true;
                    out += ' ';
                } else if (c == '>') {
                    in_tag = false;
                    out += ' ';
                } else if (!in_tag) {
                    out += c;
                } else if (c == '"' || c == '\'') {
                    out += ' ';
                }
            }
            return field("site") + " " + out;
        }
        case SourceType::snippet:
            return field("text");
    }
    return {};
}

struct Posting {
    std::uint32_t doc = 0;  // position in CorpusIndex::ids
    std::uint32_t tf = 0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Inverted index over record text with BM25 scoring. Documents are ordered by
/// record id, so posting lists sorted by doc position are sorted by id too.
class CorpusIndex {
public:
    static constexpr int kFormatVersion = 1;

    static CorpusIndex build(const SourceCorpus& corpus) {
        std::vector<std::pair<std::string, std::string>> docs;
        docs.reserve(corpus.records.size());
        for (const auto& r : corpus.records) docs.emplace_back(r.id, index_text(r));
        return build_from_text(std::move(docs));
    }

    /// (record id, text) pairs; ids must be unique.
    static CorpusIndex build_from_text(std::vector<std::pair<std::string, std::string>> docs) {
        std::sort(docs.begin(), docs.end());
        CorpusIndex idx;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            if (d > 0 && docs[d].first == docs[d - 1].first)
                throw InputError("index: duplicate record id '" + docs[d].first + "'");
            const auto toks = text::tokenize(docs[d].second);
            idx.ids_.push_back(docs[d].first);
            idx.lengths_.push_back(static_cast<std::uint32_t>(toks.size()));
            std::map<std::string, std::uint32_t> tf;
            for (const auto& t : toks) ++tf[t];
            for (const auto& [t, n] : tf) idx.postings_[t].push_back({static_cast<std::uint32_t>(d), n});
        }
        idx.finish();
        return idx;
    }

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    double avg_length() const { return avg_len_; }

    std::size_t doc_freq(const std::string& token) const {
        auto it = postings_.find(token);
        return it == postings_.end() ? 0 : it->second.size();
    }

    const std::vector<Posting>* postings(const std::string& token) const {
        auto it = postings_.find(token);
        return it == postings_.end() ? nullptr : &it->second;
    }

    std::uint32_t length(std::size_t doc) const { return lengths_[doc]; }

    double idf(std::size_t df) const {
        const double n = static_cast<double>(ids_.size());
        const double f = static_cast<double>(df);
        return std::log(1.0 + (n - f + 0.5) / (f + 0.5));
    }

    json to_json() const {
        json docs = json::array();
        for (std::size_t d = 0; d < ids_.size(); ++d) docs.push_back({ids_[d], lengths_[d]});
        json post = json::object();
        for (const auto& [t, list] : postings_) {
            json arr = json::array();
            for (const auto& p : list) arr.push_back({p.doc, p.tf});
            post[t] = std::move(arr);
        }
        return {{"format", "incomever-bm25-index"}, {"version", kFormatVersion}, {"docs", docs}, {"postings", post}};
    }

    static CorpusIndex from_json(const json& j) {
        if (j.value("format", "") != "incomever-bm25-index") throw ConfigError("index: unrecognized format tag");
        if (j.value("version", 0) != kFormatVersion)
            throw ConfigError("index: unsupported version " + std::to_string(j.value("version", 0)));
        CorpusIndex idx;
        for (const auto& d : j.at("docs")) {
            idx.ids_.push_back(d.at(0).get<std::string>());
            idx.lengths_.push_back(d.at(1).get<std::uint32_t>());
        }
        for (const auto& [t, arr] : j.at("postings").items()) {
            auto& list = idx.postings_[t];
            for (const auto& p : arr) {
                const auto doc = p.at(0).get<std::uint32_t>();
                if (doc >= idx.ids_.size()) throw InputError("index: posting refers to missing document");
                list.push_back({doc, p.at(1).get<std::uint32_t>()});
            }
        }
        idx.finish();
        return idx;
    }

private:
    void finish() {
        double total = 0.0;
        for (auto l : lengths_) total += l;
        avg_len_ = ids_.empty() ? 0.0 : total / static_cast<double>(ids_.size());
    }

    std::vector<std::string> ids_;
    std::vector<std::uint32_t> lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_len_ = 0.0;
};

struct Hit {
    std::string id;
    double score = 0.0;

    friend bool operator==(const Hit&, const Hit&) = default;
};

/// Top-k records by BM25; ties broken by ascending record id. Query tokens are deduplicated.
inline std::vector<Hit> search(const CorpusIndex& index, std::string_view query, std::size_t k,
                               const Bm25Params& params = {}) {
    if (k == 0) throw ContractViolation("search: k must be >= 1");
    if (index.size() == 0) return {};
    std::vector<std::string> terms;
    for (auto& t : text::tokenize(query))
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(std::move(t));

    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& t : terms) {
        const auto* list = index.postings(t);
        if (!list) continue;
        const double w = index.idf(list->size());
        for (const auto& p : *list) {
            const double tf = p.tf;
            const double norm = 1.0 - params.b + params.b * index.length(p.doc) / index.avg_length();
            acc[p.doc] += w * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
    }
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(acc.size());
    for (const auto& [doc, s] : acc) scored.emplace_back(s, doc);
    auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
    const auto keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    std::vector<Hit> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back({index.ids()[scored[i].second], scored[i].first});
    return out;
}

inline std::vector<Hit> search(const CorpusIndex& index, const Query& query, std::size_t k,
                               const Bm25Params& params = {}) {
    return search(index, query.text, k, params);
}

struct Candidate {
    std::string id;
    Tier tier = Tier::employer_title;
    double score = 0.0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct RetrievalConfig {
    std::size_t per_query_k = 10;
    std::size_t candidate_cap = 50;
    Bm25Params bm25;
};

/// Runs the tiered queries and unions the hits. A record keeps its first
/// (most specific) tier; output is ordered by tier, then score, then id.
inline std::vector<Candidate> retrieve_candidates(std::string_view canonical_employer,
                                                  std::string_view canonical_title, const CorpusIndex& index,
                                                  const IndustryTable& industries, const RetrievalConfig& cfg = {}) {
    const auto industry = infer_industry(canonical_employer, industries);
    std::vector<Candidate> out;
    std::unordered_set<std::string> seen;
    for (const auto& q : build_queries(canonical_employer, canonical_title, industry)) {
        for (auto& h : search(index, q, cfg.per_query_k, cfg.bm25)) {
            if (!seen.insert(h.id).second) continue;
            out.push_back({std::move(h.id), q.tier, h.score});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        if (a.tier != b.tier) return a.tier < b.tier;
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (out.size() > cfg.candidate_cap) out.resize(cfg.candidate_cap);
    return out;
}

}  // namespace incv::retrieval
