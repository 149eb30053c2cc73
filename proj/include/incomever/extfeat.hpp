#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "extract.hpp"
#include "match.hpp"
#include "retrieval.hpp"

namespace incv::extfeat {

using extract::Attr;
using extract::kNumAttrs;
using extract::SalaryAttributes;

inline constexpr std::size_t kSources = 5;
inline constexpr std::size_t kSlotWidth = kNumAttrs + 1;
inline constexpr std::size_t kExternalDim = kSources * kSlotWidth;  // 35

/// Slot s occupies [s*7, s*7+7): six attribute/stated-income ratios in Attr
/// order (base low, median, high, total low, median, high), then the match score.
using ExternalFeatureVector = std::array<double, kExternalDim>;

inline constexpr std::size_t slot_index(std::size_t slot, std::size_t attr) { return slot * kSlotWidth + attr; }
inline constexpr std::size_t score_index(std::size_t slot) { return slot * kSlotWidth + kNumAttrs; }

inline std::vector<std::string> feature_names() {
    std::vector<std::string> names;
    for (std::size_t s = 0; s < kSources; ++s) {
        for (auto a : extract::kAttrNames) names.push_back("s" + std::to_string(s + 1) + "_" + std::string(a) + "_ratio");
        names.push_back("s" + std::to_string(s + 1) + "_match_score");
    }
    return names;
}

/// Fallback ratios used when no record anywhere has both attributes of a pair:
/// r[i/j] = scale[i] / scale[j].
inline constexpr std::array<double, kNumAttrs> kDefaultScale = {0.75, 1.0, 1.35, 0.85, 1.15, 1.6};

/// Industries need this many records carrying both attributes before their own mean is used.
inline constexpr std::size_t kMinIndustrySupport = 5;

using Matrix6 = std::array<std::array<double, kNumAttrs>, kNumAttrs>;
using Count6 = std::array<std::array<std::size_t, kNumAttrs>, kNumAttrs>;

/// Mean attribute-to-attribute ratios, per industry and globally.
class RatioTable {
public:
    struct Row {
        Matrix6 mean{};
        Count6 support{};
    };

    /// r[num/den] for the industry, falling back to the global row, then to defaults.
    double ratio(const std::optional<std::string>& industry, Attr num, Attr den) const {
        if (num == den) return 1.0;
        if (industry) {
            auto it = industries_.find(*industry);
            if (it != industries_.end() && it->second.support[num][den] >= kMinIndustrySupport)
                return it->second.mean[num][den];
        }
        if (global_.support[num][den] > 0) return global_.mean[num][den];
        return kDefaultScale[num] / kDefaultScale[den];
    }

    /// True when the global row had no complete pair for (num, den).
    bool defaulted(Attr num, Attr den) const { return num != den && global_.support[num][den] == 0; }

    bool any_defaulted() const {
        for (std::size_t i = 0; i < kNumAttrs; ++i)
            for (std::size_t j = 0; j < kNumAttrs; ++j)
                if (defaulted(static_cast<Attr>(i), static_cast<Attr>(j))) return true;
        return false;
    }

    const Row& global() const { return global_; }
    const std::map<std::string, Row>& industries() const { return industries_; }

    json to_json() const {
        auto row_json = [](const Row& r) {
            json m = json::array(), s = json::array();
            for (std::size_t i = 0; i < kNumAttrs; ++i) {
                m.push_back(std::vector<double>(r.mean[i].begin(), r.mean[i].end()));
                s.push_back(std::vector<std::size_t>(r.support[i].begin(), r.support[i].end()));
            }
            return json{{"mean", m}, {"support", s}};
        };
        json ind = json::object();
        for (const auto& [k, r] : industries_) ind[k] = row_json(r);
        return {{"format", "incomever-ratio-table"}, {"version", 1}, {"global", row_json(global_)}, {"industries", ind}};
    }

    static RatioTable from_json(const json& j) {
        if (j.value("format", "") != "incomever-ratio-table") throw ConfigError("ratio table: bad format tag");
        auto row = [](const json& r) {
            Row out;
            for (std::size_t i = 0; i < kNumAttrs; ++i)
                for (std::size_t k = 0; k < kNumAttrs; ++k) {
                    out.mean[i][k] = r.at("mean").at(i).at(k).get<double>();
                    out.support[i][k] = r.at("support").at(i).at(k).get<std::size_t>();
                }
            return out;
        };
        RatioTable t;
        t.global_ = row(j.at("global"));
        for (const auto& [k, r] : j.at("industries").items()) t.industries_[k] = row(r);
        return t;
    }

    friend RatioTable build_ratio_table(const std::vector<extract::SourceRecord>&, const retrieval::IndustryTable&);

private:
    Row global_;
    std::map<std::string, Row> industries_;
};

/// Industry a record belongs to: stated by the source, else looked up from its employer.
inline std::optional<std::string> record_industry(const extract::SourceRecord& r,
                                                  const retrieval::IndustryTable& industries) {
    if (r.fragment.industry && retrieval::is_industry(*r.fragment.industry)) return r.fragment.industry;
    if (r.fragment.employer) return retrieval::infer_industry(*r.fragment.employer, industries);
    return std::nullopt;
}

inline RatioTable build_ratio_table(const std::vector<extract::SourceRecord>& records,
                                    const retrieval::IndustryTable& industries) {
    if (records.empty()) throw ContractViolation("build_ratio_table: empty corpus");
    RatioTable t;
    auto accumulate = [](RatioTable::Row& row, const SalaryAttributes& a) {
        for (std::size_t i = 0; i < kNumAttrs; ++i)
            for (std::size_t j = 0; j < kNumAttrs; ++j) {
                if (i == j || !a.values[i] || !a.values[j] || a.values[j]->is_zero()) continue;
                row.mean[i][j] += a.values[i]->dollars() / a.values[j]->dollars();
                ++row.support[i][j];
            }
    };
    for (const auto& r : records) {
        if (r.discardable) continue;
        accumulate(t.global_, r.attributes);
        if (auto ind = record_industry(r, industries)) accumulate(t.industries_[*ind], r.attributes);
    }
    auto finish = [](RatioTable::Row& row) {
        for (std::size_t i = 0; i < kNumAttrs; ++i)
            for (std::size_t j = 0; j < kNumAttrs; ++j) {
                if (i == j) {
                    row.mean[i][j] = 1.0;
                } else if (row.support[i][j] > 0) {
                    row.mean[i][j] /= static_cast<double>(row.support[i][j]);
                }
            }
    };
    finish(t.global_);
    for (auto& [k, row] : t.industries_) finish(row);
    return t;
}

/// Order in which present attributes are used as the anchor for filling the rest.
inline constexpr std::array<Attr, kNumAttrs> kFillPriority = {
    extract::base_median, extract::total_median, extract::base_low,
    extract::base_high, extract::total_low, extract::total_high};

/// Fills absent attributes from the highest-priority present one times the
/// industry ratio. nullopt means no attribute was present: discard the source.
inline std::optional<SalaryAttributes> impute_attributes(const SalaryAttributes& attrs,
                                                         const std::optional<std::string>& industry,
                                                         const RatioTable& table) {
    std::optional<Attr> anchor;
    for (auto a : kFillPriority) {
        if (attrs[a]) {
            anchor = a;
            break;
        }
    }
    if (!anchor) return std::nullopt;
    SalaryAttributes out = attrs;
    const double base = attrs[*anchor]->dollars();
    for (std::size_t i = 0; i < kNumAttrs; ++i) {
        const auto a = static_cast<Attr>(i);
        if (!out[a]) out[a] = Money::from_dollars(std::max(0.0, base * table.ratio(industry, a, *anchor)));
    }
    return out;
}

/// Ranks matches by score (ties: ascending id), keeps the top `max_sources`
/// (at most 5), drops those without imputed attributes and lays the survivors
/// out slot by slot. Unused slots stay zero.
inline ExternalFeatureVector build_external_features(
    const std::optional<Money>& stated_income, std::vector<match::MatchResult> matches,
    const std::map<std::string, std::optional<SalaryAttributes>>& attrs_by_record, std::size_t max_sources = kSources) {
    if (!stated_income || stated_income->is_zero())
        throw ContractViolation("build_external_features: a positive stated income is required");
    std::sort(matches.begin(), matches.end(), [](const match::MatchResult& a, const match::MatchResult& b) {
        return a.score != b.score ? a.score > b.score : a.record_id < b.record_id;
    });
    ExternalFeatureVector v{};
    const double stated = stated_income->dollars();
    std::size_t slot = 0;
    const std::size_t keep = std::min({max_sources, kSources, matches.size()});
    for (std::size_t m = 0; m < keep; ++m) {
        auto it = attrs_by_record.find(matches[m].record_id);
        if (it == attrs_by_record.end() || !it->second) continue;
        for (std::size_t a = 0; a < kNumAttrs; ++a) {
            const auto& val = it->second->values[a];
            v[slot_index(slot, a)] = val ? val->dollars() / stated : 0.0;
        }
        v[score_index(slot)] = matches[m].score;
        ++slot;
    }
    return v;
}

}  // namespace incv::extfeat
