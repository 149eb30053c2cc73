#pragma once

#include <array>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "csv.hpp"
#include "text.hpp"
#include "xml.hpp"

namespace incv::extract {

// ---------------------------------------------------------------------------
// Salary attributes

enum Attr : std::size_t { base_low, base_median, base_high, total_low, total_median, total_high };

inline constexpr std::size_t kNumAttrs = 6;
inline constexpr std::array<std::string_view, kNumAttrs> kAttrNames = {
    "base_low", "base_median", "base_high", "total_low", "total_median", "total_high"};

inline std::optional<Attr> attr_from_name(std::string_view n) {
    for (std::size_t i = 0; i < kNumAttrs; ++i)
        if (kAttrNames[i] == n) return static_cast<Attr>(i);
    return std::nullopt;
}

struct SalaryAttributes {
    std::array<std::optional<Money>, kNumAttrs> values{};

    std::optional<Money>& operator[](Attr a) { return values[a]; }
    const std::optional<Money>& operator[](Attr a) const { return values[a]; }

    bool any() const {
        for (const auto& v : values)
            if (v) return true;
        return false;
    }

    bool all() const {
        for (const auto& v : values)
            if (!v) return false;
        return true;
    }

    /// Empty when low <= median <= high holds among present values; else the first violation.
    std::optional<std::string> ordering_violation() const {
        for (std::size_t g = 0; g < 2; ++g) {
            const auto& lo = values[3 * g];
            const auto& med = values[3 * g + 1];
            const auto& hi = values[3 * g + 2];
            const char* grp = g == 0 ? "base" : "total";
            if (lo && med && *lo > *med) return std::string(grp) + " low exceeds median";
            if (med && hi && *med > *hi) return std::string(grp) + " median exceeds high";
            if (lo && hi && *lo > *hi) return std::string(grp) + " low exceeds high";
        }
        return std::nullopt;
    }

    friend bool operator==(const SalaryAttributes&, const SalaryAttributes&) = default;
};

// ---------------------------------------------------------------------------
// Source records

struct IdentityFragment {
    std::optional<std::string> name;
    std::optional<std::string> city;
    std::optional<std::string> state;
    std::optional<std::string> employer;  // employer or agency
    std::optional<std::string> occupation;
    std::optional<std::string> industry;  // only when the source states it
    std::optional<int> year;

    friend bool operator==(const IdentityFragment&, const IdentityFragment&) = default;
};

inline double default_trust(SourceType t) {
    switch (t) {
        case SourceType::government: return 1.0;
        case SourceType::salary_site: return 0.7;
        case SourceType::snippet: return 0.4;
    }
    return 0.4;
}

struct SourceRecord {
    std::string id;
    SourceType source_type = SourceType::snippet;
    IdentityFragment fragment;
    SalaryAttributes attributes;
    double trust_weight = 0.4;
    bool discardable = false;
    std::string discard_reason;

    friend bool operator==(const SourceRecord&, const SourceRecord&) = default;
};

/// Marks the record discardable when it carries no attribute or violates the ordering invariant.
inline void finalize(SourceRecord& r) {
    if (r.discardable) return;
    if (auto v = r.attributes.ordering_violation()) {
        r.discardable = true;
        r.discard_reason = *v;
        r.attributes = {};
    } else if (!r.attributes.any()) {
        r.discardable = true;
        r.discard_reason = "no salary attribute";
    }
}

inline json to_json(const SourceRecord& r) {
    json frag = json::object();
    auto put = [&](const char* k, const auto& v) {
        if (v) frag[k] = *v;
    };
    put("name", r.fragment.name);
    put("city", r.fragment.city);
    put("state", r.fragment.state);
    put("employer", r.fragment.employer);
    put("occupation", r.fragment.occupation);
    put("industry", r.fragment.industry);
    put("year", r.fragment.year);
    json attrs = json::object();
    for (std::size_t i = 0; i < kNumAttrs; ++i)
        if (r.attributes.values[i]) attrs[std::string(kAttrNames[i])] = r.attributes.values[i]->cents();
    json j = {{"id", r.id},
              {"source_type", std::string(to_string(r.source_type))},
              {"fragment", frag},
              {"attributes_cents", attrs},
              {"trust_weight", r.trust_weight},
              {"discardable", r.discardable}};
    if (r.discardable) j["discard_reason"] = r.discard_reason;
    return j;
}

inline SourceRecord record_from_json(const json& j) {
    SourceRecord r;
    r.id = j.at("id").get<std::string>();
    auto st = parse_source_type(j.at("source_type").get<std::string>());
    if (!st) throw InputError("source record " + r.id + ": unknown source_type");
    r.source_type = *st;
    const auto& f = j.at("fragment");
    auto get = [&](const char* k, auto& out) {
        if (f.contains(k)) out = f.at(k).get<typename std::decay_t<decltype(out)>::value_type>();
    };
    get("name", r.fragment.name);
    get("city", r.fragment.city);
    get("state", r.fragment.state);
    get("employer", r.fragment.employer);
    get("occupation", r.fragment.occupation);
    get("industry", r.fragment.industry);
    get("year", r.fragment.year);
    for (const auto& [k, v] : j.at("attributes_cents").items()) {
        auto a = attr_from_name(k);
        if (!a) throw InputError("source record " + r.id + ": unknown attribute " + k);
        r.attributes[*a] = Money::from_cents(v.get<std::int64_t>());
    }
    r.trust_weight = j.at("trust_weight").get<double>();
    r.discardable = j.at("discardable").get<bool>();
    if (j.contains("discard_reason")) r.discard_reason = j.at("discard_reason").get<std::string>();
    return r;
}

// ---------------------------------------------------------------------------
// Money text

/// "$73,482", "73482", "\$1,000,000", "$85.5k", "73,482.50". Whole string must be monetary.
inline std::optional<Money> parse_money_text(std::string_view raw) {
    auto s = std::string_view(raw);
    while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && text::is_space(s.back())) s.remove_suffix(1);
    if (s.starts_with("\\")) s.remove_prefix(1);
    if (s.starts_with("$")) s.remove_prefix(1);
    while (!s.empty() && text::is_space(s.front())) s.remove_prefix(1);
    if (s.empty() || s.front() < '0' || s.front() > '9') return std::nullopt;

    std::int64_t whole = 0;
    std::size_t i = 0;
    std::size_t group = 0;  // digits since last comma
    bool saw_comma = false;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (c >= '0' && c <= '9') {
            if (whole > 9'000'000'000'000LL) return std::nullopt;
            whole = whole * 10 + (c - '0');
            ++group;
        } else if (c == ',') {
            if ((saw_comma && group != 3) || group == 0 || group > 3) return std::nullopt;
            saw_comma = true;
            group = 0;
        } else {
            break;
        }
    }
    if (saw_comma && group != 3) return std::nullopt;
    std::int64_t cents = 0;
    if (i < s.size() && s[i] == '.') {
        ++i;
        int digits = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            if (digits < 2) cents = cents * 10 + (s[i] - '0');
            ++digits;
            ++i;
        }
        if (digits == 0) return std::nullopt;
        if (digits == 1) cents *= 10;
    }
    std::int64_t total = whole * 100 + cents;
    while (i < s.size() && text::is_space(s[i])) ++i;
    if (i < s.size() && (s[i] == 'k' || s[i] == 'K')) {
        total *= 1000;
        ++i;
    }
    if (i != s.size()) return std::nullopt;
    return Money::from_cents(total);
}

/// "90,000 - 234,000", "$90,000 to $234,000", "90k–120k" → both endpoints.
inline std::optional<std::pair<Money, Money>> parse_money_range(std::string_view raw) {
    static const std::array<std::string_view, 5> seps = {" to ", " - ", "\xE2\x80\x93", "\xE2\x80\x94", "-"};
    for (auto sep : seps) {
        const auto at = raw.find(sep);
        if (at == std::string_view::npos) continue;
        auto lo = parse_money_text(raw.substr(0, at));
        auto hi = parse_money_text(raw.substr(at + sep.size()));
        if (lo && hi) return std::make_pair(*lo, *hi);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Structured (government) rows

/// Field names of a government row.
struct GovernmentSchema {
    std::string name = "name";
    std::string salary = "salary";
    std::string bonus = "bonus";
    std::string agency = "agency";
    std::string location = "location";
    std::string state = "state";
    std::string occupation = "occupation";
    std::string year = "year";
};

inline std::optional<std::string> json_text(const json& row, const std::string& key) {
    if (!row.is_object() || !row.contains(key) || row.at(key).is_null()) return std::nullopt;
    const auto& v = row.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    if (v.is_number()) return v.dump();
    return std::nullopt;
}

/// Government row: base_median = salary, total_median = salary + bonus.
inline SourceRecord extract_structured(const std::string& id, const json& row, const GovernmentSchema& schema = {}) {
    SourceRecord r;
    r.id = id;
    r.source_type = SourceType::government;
    r.trust_weight = default_trust(r.source_type);
    r.fragment.name = json_text(row, schema.name);
    r.fragment.employer = json_text(row, schema.agency);
    r.fragment.city = json_text(row, schema.location);
    r.fragment.state = json_text(row, schema.state);
    r.fragment.occupation = json_text(row, schema.occupation);
    if (auto y = json_text(row, schema.year)) {
        try {
            r.fragment.year = std::stoi(*y);
        } catch (const std::exception&) {
        }
    }
    const auto salary_text = json_text(row, schema.salary);
    const auto salary = salary_text ? parse_money_text(*salary_text) : std::nullopt;
    if (!salary) {
        r.discardable = true;
        r.discard_reason = "unparsable salary '" + salary_text.value_or("") + "'";
        return r;
    }
    Money bonus;
    if (auto b = json_text(row, schema.bonus)) {
        if (auto parsed = parse_money_text(*b)) bonus = *parsed;
    }
    r.attributes[base_median] = *salary;
    r.attributes[total_median] = *salary + bonus;
    finalize(r);
    return r;
}

// ---------------------------------------------------------------------------
// Wrapper (path) extraction

/// Per-site map from field name (a salary attribute or employer / occupation /
/// city / state / industry) to a path expression.
struct PathSpecs {
    std::map<std::string, std::map<std::string, std::string>> sites;

    static PathSpecs from_json(const json& j) {
        PathSpecs p;
        for (const auto& [site, fields] : j.items()) {
            for (const auto& [field, path] : fields.items()) {
                if (!attr_from_name(field) && field != "employer" && field != "occupation" && field != "city" &&
                    field != "state" && field != "industry")
                    throw ConfigError("path spec for site '" + site + "': unknown field '" + field + "'");
                xml::detail::compile(path.get<std::string>());  // validate early
                p.sites[site][field] = path.get<std::string>();
            }
        }
        return p;
    }

    static PathSpecs load(const std::string& path) {
        try {
            return from_json(json::parse(csv::read_file(path)));
        } catch (const json::exception& e) {
            throw ConfigError("path spec file '" + path + "': " + e.what());
        }
    }
};

struct ExtractionError : InputError {
    using InputError::InputError;
};

inline SourceRecord extract_wrapper(const std::string& id, const std::string& site, std::string_view document,
                                    const PathSpecs& specs) {
    auto spec_it = specs.sites.find(site);
    if (spec_it == specs.sites.end()) throw ConfigError("no path spec for site '" + site + "'");
    SourceRecord r;
    r.id = id;
    r.source_type = SourceType::salary_site;
    r.trust_weight = default_trust(r.source_type);
    if (text::collapse_ws(document).empty()) {
        finalize(r);
        return r;
    }
    std::unique_ptr<xml::Node> root;
    try {
        root = xml::parse(document);
    } catch (const xml::ParseError& e) {
        throw ExtractionError("site '" + site + "', record " + id + ": " + e.what());
    }
    for (const auto& [field, path] : spec_it->second) {
        auto v = xml::value(*root, path);
        if (!v) continue;
        if (auto a = attr_from_name(field)) {
            if (auto m = parse_money_text(*v)) r.attributes[*a] = *m;
        } else if (field == "employer") {
            r.fragment.employer = *v;
        } else if (field == "occupation") {
            r.fragment.occupation = *v;
        } else if (field == "city") {
            r.fragment.city = *v;
        } else if (field == "state") {
            r.fragment.state = *v;
        } else if (field == "industry") {
            r.fragment.industry = *v;
        }
    }
    finalize(r);
    return r;
}

// ---------------------------------------------------------------------------
// Pattern extraction

struct Pattern {
    std::string name;
    std::string source;                 // as written, before placeholder expansion
    std::vector<std::string> captures;  // field per capture group, in group order
    std::regex re;
};

/// Placeholders usable in pattern files.
inline std::string expand_placeholders(std::string p) {
    static const std::array<std::pair<std::string_view, std::string_view>, 2> subs = {{
        {"{money}", R"((\\?\$?\s?[0-9][0-9,]*(?:\.[0-9]{1,2})?\s?[kK]?))"},
        {"{text}", R"(([A-Za-z0-9][A-Za-z0-9 .&'/-]*?))"},
    }};
    for (const auto& [from, to] : subs) {
        std::size_t at;
        while ((at = p.find(from)) != std::string::npos) p.replace(at, from.size(), to);
    }
    return p;
}

struct PatternSet {
    int version = 1;
    std::vector<Pattern> patterns;

    /// Ordered list [{"name", "pattern", "captures": [...]}], or {"version", "patterns": [...]}.
    static PatternSet from_json(const json& j) {
        PatternSet set;
        const json* list = &j;
        if (j.is_object()) {
            set.version = j.value("version", 1);
            list = &j.at("patterns");
        }
        for (const auto& e : *list) {
            Pattern p;
            p.name = e.at("name").get<std::string>();
            p.source = e.at("pattern").get<std::string>();
            p.captures = e.at("captures").get<std::vector<std::string>>();
            for (const auto& c : p.captures) {
                if (!attr_from_name(c) && c != "employer" && c != "occupation" && c != "industry" && c != "city")
                    throw ConfigError("pattern '" + p.name + "': unknown capture field '" + c + "'");
            }
            try {
                p.re = std::regex(expand_placeholders(p.source), std::regex::ECMAScript | std::regex::icase);
            } catch (const std::regex_error& err) {
                throw ConfigError("pattern '" + p.name + "': " + err.what());
            }
            if (p.re.mark_count() != p.captures.size())
                throw ConfigError("pattern '" + p.name + "': " + std::to_string(p.re.mark_count()) +
                                  " groups but " + std::to_string(p.captures.size()) + " capture fields");
            set.patterns.push_back(std::move(p));
        }
        return set;
    }

    static PatternSet load(const std::string& path) {
        try {
            return from_json(json::parse(csv::read_file(path)));
        } catch (const json::exception& e) {
            throw ConfigError("pattern file '" + path + "': " + e.what());
        }
    }
};

/// Applies every pattern in order; the first pattern to capture a field wins it.
/// Returns nullopt when no pattern yields a salary attribute.
inline std::optional<SourceRecord> extract_pattern(const std::string& id, std::string_view snippet,
                                                   const PatternSet& patterns) {
    SourceRecord r;
    r.id = id;
    r.source_type = SourceType::snippet;
    r.trust_weight = default_trust(r.source_type);
    const std::string s(snippet);
    for (const auto& p : patterns.patterns) {
        std::smatch m;
        if (!std::regex_search(s, m, p.re)) continue;
        for (std::size_t g = 0; g < p.captures.size(); ++g) {
            if (!m[g + 1].matched) continue;
            const auto& field = p.captures[g];
            const auto val = text::collapse_ws(m[g + 1].str());
            if (auto a = attr_from_name(field)) {
                if (!r.attributes[*a])
                    if (auto money = parse_money_text(val)) r.attributes[*a] = *money;
            } else if (field == "occupation") {
                if (!r.fragment.occupation) r.fragment.occupation = val;
            } else if (field == "employer") {
                if (!r.fragment.employer) r.fragment.employer = val;
            } else if (field == "industry") {
                if (!r.fragment.industry) r.fragment.industry = val;
            } else if (field == "city") {
                if (!r.fragment.city) r.fragment.city = val;
            }
        }
    }
    if (!r.attributes.any()) return std::nullopt;
    finalize(r);
    return r;
}

/// Dispatches on source type. Snippets without a pattern hit come back discardable.
inline SourceRecord extract_record(const RawRecord& raw, const PathSpecs& specs, const PatternSet& patterns) {
    switch (raw.source_type) {
        case SourceType::government:
            return extract_structured(raw.id, raw.payload);
        case SourceType::salary_site: {
            const auto site = json_text(raw.payload, "site").value_or("");
            const auto doc = json_text(raw.payload, "document").value_or("");
            return extract_wrapper(raw.id, site, doc, specs);
        }
        case SourceType::snippet: {
            const auto txt = json_text(raw.payload, "text").value_or("");
            if (auto r = extract_pattern(raw.id, txt, patterns)) return *r;
            SourceRecord r;
            r.id = raw.id;
            r.source_type = SourceType::snippet;
            r.trust_weight = default_trust(r.source_type);
            r.discardable = true;
            r.discard_reason = "no pattern matched";
            return r;
        }
    }
    throw ContractViolation("extract_record: bad source type");
}

}  // namespace incv::extract
