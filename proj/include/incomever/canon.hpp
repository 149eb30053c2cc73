#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>

#include "csv.hpp"
#include "text.hpp"

namespace incv::canon {

enum class Kind { employer, title };

inline std::string_view kind_name(Kind k) { return k == Kind::employer ? "employer" : "title"; }

using text::key_normalize;

/// Lookup table for employer / job-title surface variants.
///
/// Two layers: whole-string entries (key_normalize(raw) -> canonical text) and
/// token abbreviations ("Sr." -> "Senior") expanded one whitespace token at a time
/// before the whole-string lookup. Every canonical text is a fixed point of
/// canonicalize(); add_* and validate() enforce that.
class AliasTable {
public:
    void add_entry(Kind kind, std::string_view raw, std::string canonical) {
        auto key = key_normalize(raw);
        if (key.empty()) throw ConfigError("alias table: raw text '" + std::string(raw) + "' has an empty key");
        if (text::collapse_ws(canonical).empty()) throw ConfigError("alias table: empty canonical text");
        entries_[idx(kind)][std::move(key)] = text::collapse_ws(canonical);
    }

    void add_token(Kind kind, std::string_view raw, std::string replacement) {
        auto key = key_normalize(raw);
        if (key.empty() || key.find(' ') != std::string::npos)
            throw ConfigError("alias table: token rule '" + std::string(raw) + "' must be a single token");
        if (text::collapse_ws(replacement).empty()) throw ConfigError("alias table: empty token replacement");
        tokens_[idx(kind)][std::move(key)] = text::collapse_ws(replacement);
    }

    const std::string* lookup(Kind kind, std::string_view key) const {
        const auto& m = entries_[idx(kind)];
        auto it = m.find(std::string(key));
        return it == m.end() ? nullptr : &it->second;
    }

    const std::string* token(Kind kind, std::string_view key) const {
        const auto& m = tokens_[idx(kind)];
        auto it = m.find(std::string(key));
        return it == m.end() ? nullptr : &it->second;
    }

    std::size_t size() const {
        return entries_[0].size() + entries_[1].size() + tokens_[0].size() + tokens_[1].size();
    }

    /// Checks the fixed-point invariant; throws ConfigError on the first offender.
    void validate() const;

    /// CSV with header kind,raw,canonical. kind is employer, title, employer_token or title_token.
    static AliasTable parse_csv(std::string_view content) {
        AliasTable t;
        auto rows = csv::parse(content);
        if (rows.empty()) return t;
        auto cols = csv::locate(rows[0], {"kind", "raw", "canonical"});
        for (std::size_t r = 1; r < rows.size(); ++r) {
            const auto& row = rows[r];
            if (row.size() <= std::max({cols[0], cols[1], cols[2]}))
                throw ConfigError("alias table: row " + std::to_string(r + 1) + " is short");
            const auto& kind = row[cols[0]];
            if (kind == "employer")
                t.add_entry(Kind::employer, row[cols[1]], row[cols[2]]);
            else if (kind == "title")
                t.add_entry(Kind::title, row[cols[1]], row[cols[2]]);
            else if (kind == "employer_token")
                t.add_token(Kind::employer, row[cols[1]], row[cols[2]]);
            else if (kind == "title_token")
                t.add_token(Kind::title, row[cols[1]], row[cols[2]]);
            else
                throw ConfigError("alias table: unknown kind '" + kind + "' on row " + std::to_string(r + 1));
        }
        t.validate();
        return t;
    }

    static AliasTable load(const std::string& path) { return parse_csv(csv::read_file(path)); }

    std::string to_csv() const {
        std::vector<csv::Row> rows{{"kind", "raw", "canonical"}};
        for (int k = 0; k < 2; ++k) {
            const std::string kn(kind_name(static_cast<Kind>(k)));
            for (const auto& [key, canon] : entries_[k]) rows.push_back({kn, key, canon});
            for (const auto& [key, rep] : tokens_[k]) rows.push_back({kn + "_token", key, rep});
        }
        return csv::format(rows);
    }

private:
    static std::size_t idx(Kind k) { return k == Kind::employer ? 0 : 1; }

    std::map<std::string, std::string> entries_[2];
    std::map<std::string, std::string> tokens_[2];
};

/// Table hit for the given kind, else the token-expanded text with whitespace
/// normalized and original casing kept. Whitespace-only input is returned as is.
inline std::string canonicalize(std::string_view raw, Kind kind, const AliasTable& table) {
    const auto toks = text::split_ws(raw);
    if (toks.empty()) return std::string(raw);
    std::string joined;
    for (const auto& t : toks) {
        if (!joined.empty()) joined += ' ';
        const auto* rep = table.token(kind, key_normalize(t));
        joined += rep ? *rep : t;
    }
    if (const auto* hit = table.lookup(kind, key_normalize(joined))) return *hit;
    if (const auto* hit = table.lookup(kind, key_normalize(raw))) return *hit;
    return joined;
}

inline void AliasTable::validate() const {
    for (int k = 0; k < 2; ++k) {
        const auto kind = static_cast<Kind>(k);
        for (const auto& [key, rep] : tokens_[k]) {
            for (const auto& word : text::split_ws(rep)) {
                if (tokens_[k].count(key_normalize(word)))
                    throw ConfigError("alias table: token replacement '" + rep + "' re-triggers token rule '" +
                                      key_normalize(word) + "'");
            }
        }
        for (const auto& [key, canon] : entries_[k]) {
            if (canonicalize(canon, kind, *this) != canon)
                throw ConfigError("alias table: canonical text '" + canon + "' is not a fixed point");
        }
    }
}

}  // namespace incv::canon
