#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "../core.hpp"
#include "../text.hpp"

namespace incv::learners {

using json = nlohmann::json;

/// Feature groups that can be blanked for ablation.
struct BowMask {
    bool title = true;
    bool employer = true;
    bool state = true;
    bool city = true;
};

/// Bag-of-words featurizer: counts of the top-200 title tokens and top-200
/// employer tokens, then a city code and a state code (0 = unseen).
/// Layout: [0,200) title counts, [200,400) employer counts, 400 city, 401 state.
class BowFeaturizer {
public:
    static constexpr std::size_t kTopWords = 200;
    static constexpr std::size_t kDim = 2 * kTopWords + 2;  // 402
    static constexpr std::size_t kCityIndex = 2 * kTopWords;
    static constexpr std::size_t kStateIndex = 2 * kTopWords + 1;

    using Mask = BowMask;

    static BowFeaturizer fit(const std::vector<RedactedIdentity>& train) {
        BowFeaturizer f;
        std::map<std::string, std::size_t> title_counts, employer_counts;
        std::map<std::string, int> cities, states;
        for (const auto& r : train) {
            for (const auto& t : text::tokenize(r.job_title)) ++title_counts[t];
            for (const auto& t : text::tokenize(r.employer)) ++employer_counts[t];
            if (auto c = text::key_normalize(r.city); !c.empty()) cities[c] = 0;
            if (auto s = text::key_normalize(r.state); !s.empty()) states[s] = 0;
        }
        f.title_words_ = top(title_counts);
        f.employer_words_ = top(employer_counts);
        int code = 1;
        for (auto& [k, v] : cities) v = code++;
        code = 1;
        for (auto& [k, v] : states) v = code++;
        f.cities_ = std::move(cities);
        f.states_ = std::move(states);
        f.reindex();
        return f;
    }

    Eigen::RowVectorXd featurize(const RedactedIdentity& r, const Mask& mask = Mask{}) const {
        Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(kDim);
        if (mask.title)
            for (const auto& t : text::tokenize(r.job_title))
                if (auto it = title_index_.find(t); it != title_index_.end()) x(it->second) += 1.0;
        if (mask.employer)
            for (const auto& t : text::tokenize(r.employer))
                if (auto it = employer_index_.find(t); it != employer_index_.end())
                    x(static_cast<Eigen::Index>(kTopWords) + it->second) += 1.0;
        if (mask.city)
            if (auto it = cities_.find(text::key_normalize(r.city)); it != cities_.end()) x(kCityIndex) = it->second;
        if (mask.state)
            if (auto it = states_.find(text::key_normalize(r.state)); it != states_.end()) x(kStateIndex) = it->second;
        return x;
    }

    const std::vector<std::string>& title_words() const { return title_words_; }
    const std::vector<std::string>& employer_words() const { return employer_words_; }

    json to_json() const {
        return {{"format", "incomever-bow"}, {"version", 1}, {"title_words", title_words_},
                {"employer_words", employer_words_}, {"cities", cities_}, {"states", states_}};
    }

    static BowFeaturizer from_json(const json& j) {
        if (j.value("format", "") != "incomever-bow") throw ConfigError("bow: bad format tag");
        BowFeaturizer f;
        f.title_words_ = j.at("title_words").get<std::vector<std::string>>();
        f.employer_words_ = j.at("employer_words").get<std::vector<std::string>>();
        f.cities_ = j.at("cities").get<std::map<std::string, int>>();
        f.states_ = j.at("states").get<std::map<std::string, int>>();
        f.reindex();
        return f;
    }

private:
    /// Most frequent first; frequency ties broken alphabetically.
    static std::vector<std::string> top(const std::map<std::string, std::size_t>& counts) {
        std::vector<std::pair<std::string, std::size_t>> v(counts.begin(), counts.end());
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        if (v.size() > kTopWords) v.resize(kTopWords);
        std::vector<std::string> out;
        for (auto& [w, c] : v) out.push_back(w);
        return out;
    }

    void reindex() {
        title_index_.clear();
        employer_index_.clear();
        for (std::size_t i = 0; i < title_words_.size(); ++i) title_index_[title_words_[i]] = static_cast<Eigen::Index>(i);
        for (std::size_t i = 0; i < employer_words_.size(); ++i)
            employer_index_[employer_words_[i]] = static_cast<Eigen::Index>(i);
    }

    std::vector<std::string> title_words_, employer_words_;
    std::map<std::string, Eigen::Index> title_index_, employer_index_;
    std::map<std::string, int> cities_, states_;
};

inline Eigen::RowVectorXd bow_featurize(const BowFeaturizer& f, const RedactedIdentity& r) { return f.featurize(r); }

}  // namespace incv::learners
