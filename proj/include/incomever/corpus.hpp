#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core.hpp"

namespace incv {

using json = nlohmann::json;

enum class SourceType { government, salary_site, snippet };

inline std::string_view to_string(SourceType t) {
    switch (t) {
        case SourceType::government: return "government";
        case SourceType::salary_site: return "salary_site";
        case SourceType::snippet: return "snippet";
    }
    return "?";
}

inline std::optional<SourceType> parse_source_type(std::string_view s) {
    if (s == "government") return SourceType::government;
    if (s == "salary_site") return SourceType::salary_site;
    if (s == "snippet") return SourceType::snippet;
    return std::nullopt;
}

/// One raw document of the local source corpus.
///
/// payload by type:
///   government  {"name","salary","bonus","agency","location","state","occupation","year"}
///   salary_site {"site","document"}  (document is an XML string)
///   snippet     {"text","url"}
struct RawRecord {
    std::string id;
    SourceType source_type = SourceType::snippet;
    json payload;

    json to_json() const { return {{"id", id}, {"source_type", std::string(to_string(source_type))}, {"payload", payload}}; }
};

struct SourceCorpus {
    std::vector<RawRecord> records;  // sorted by id, ids unique
};

}  // namespace incv
