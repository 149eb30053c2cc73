#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core.hpp"
#include "corpus.hpp"
#include "extract.hpp"
#include "retrieval.hpp"
#include "text.hpp"

namespace incv::match {

// ---------------------------------------------------------------------------
// Similarity primitives

struct MiddleNamePenalty {
    double initial_match = 0.9;  // "R" vs "Ryan", or one side has no middle name
    double conflict = 0.7;       // "S" vs "Ryan"
};

/// Normalized edit similarity of "first last" times a middle-name factor.
inline double name_score(const PersonName& a, const PersonName& b, const MiddleNamePenalty& pen = {}) {
    const auto fa = text::key_normalize(a.first + " " + a.last);
    const auto fb = text::key_normalize(b.first + " " + b.last);
    const double base = text::edit_similarity(fa, fb);
    const auto ma = text::key_normalize(a.middle.value_or(""));
    const auto mb = text::key_normalize(b.middle.value_or(""));
    double factor = 1.0;
    if (ma.empty() && mb.empty()) {
        factor = 1.0;
    } else if (ma == mb) {
        factor = 1.0;
    } else if (ma.empty() || mb.empty()) {
        factor = pen.initial_match;
    } else if ((ma.size() == 1 || mb.size() == 1) && ma[0] == mb[0]) {
        factor = pen.initial_match;
    } else {
        factor = pen.conflict;
    }
    return base * factor;
}

/// Sparse term-frequency vector.
using TermVector = std::map<std::string, double>;

inline TermVector char_trigrams(std::string_view s) {
    const std::string padded = " " + text::key_normalize(s) + " ";
    TermVector v;
    if (padded.size() < 3) return v;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) v[padded.substr(i, 3)] += 1.0;
    return v;
}

inline double cosine(const TermVector& a, const TermVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [k, v] : a) {
        na += v * v;
        if (auto it = b.find(k); it != b.end()) dot += v * it->second;
    }
    for (const auto& [k, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

/// Token-unigram TF cosine; character trigrams when either side has fewer than two tokens.
inline double string_cosine(std::string_view a, std::string_view b) {
    const auto ta = text::tokenize(a);
    const auto tb = text::tokenize(b);
    if (ta.empty() || tb.empty()) return 0.0;
    if (ta.size() < 2 || tb.size() < 2) return cosine(char_trigrams(a), char_trigrams(b));
    TermVector va, vb;
    for (const auto& t : ta) va[t] += 1.0;
    for (const auto& t : tb) vb[t] += 1.0;
    return cosine(va, vb);
}

// ---------------------------------------------------------------------------
// Features

enum Feature : std::size_t {
    f_name,
    f_city,
    f_street,
    f_county,
    f_zip,
    f_country,
    f_employer,
    f_title,
    f_industry,
};

inline constexpr std::size_t kNumFeatures = 9;
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "name_score", "city_sim", "street_sim", "county_sim", "zip_exact",
    "country_exact", "employer_cos", "title_cos", "industry_match"};

/// Similarity features of an (input, source) pair. present[f] is false when one
/// side lacks the field; value[f] is then 0 and must not be read.
struct MatchFeatures {
    std::array<double, kNumFeatures> value{};
    std::array<bool, kNumFeatures> present{};

    void set(Feature f, double v) {
        value[f] = v;
        present[f] = true;
    }

    friend bool operator==(const MatchFeatures&, const MatchFeatures&) = default;
};

namespace detail {
inline std::optional<std::string> nonempty(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    auto k = text::key_normalize(*s);
    if (k.empty()) return std::nullopt;
    return k;
}
}  // namespace detail

/// City, street and county by edit similarity; zip and country exact.
inline void address_score(const Address& a, const Address& b, MatchFeatures& out) {
    auto sim = [&](Feature f, const std::optional<std::string>& x, const std::optional<std::string>& y) {
        auto kx = detail::nonempty(x), ky = detail::nonempty(y);
        if (kx && ky) out.set(f, text::edit_similarity(*kx, *ky));
    };
    auto exact = [&](Feature f, const std::optional<std::string>& x, const std::optional<std::string>& y) {
        auto kx = detail::nonempty(x), ky = detail::nonempty(y);
        if (kx && ky) out.set(f, *kx == *ky ? 1.0 : 0.0);
    };
    sim(f_city, a.city, b.city);
    sim(f_street, a.street, b.street);
    sim(f_county, a.county, b.county);
    exact(f_zip, a.zip, b.zip);
    exact(f_country, a.country, b.country);
}

inline MatchFeatures address_score(const Address& a, const Address& b) {
    MatchFeatures f;
    address_score(a, b, f);
    return f;
}

struct EmploymentSim {
    std::optional<double> employer_cos;
    std::optional<double> title_cos;
};

inline EmploymentSim employment_sim(const RedactedIdentity& input, const extract::IdentityFragment& frag) {
    EmploymentSim s;
    if (frag.employer && !text::tokenize(*frag.employer).empty() && !text::tokenize(input.employer).empty())
        s.employer_cos = string_cosine(input.employer, *frag.employer);
    if (frag.occupation && !text::tokenize(*frag.occupation).empty() && !text::tokenize(input.job_title).empty())
        s.title_cos = string_cosine(input.job_title, *frag.occupation);
    return s;
}

/// Identity and fragment employer/occupation are expected to be canonicalized already.
inline MatchFeatures compute_features(const Identity& input, const extract::IdentityFragment& frag,
                                      const retrieval::IndustryTable& industries, const MiddleNamePenalty& pen = {}) {
    MatchFeatures f;
    if (frag.name && !text::key_normalize(*frag.name).empty() && !text::key_normalize(input.name.first).empty())
        f.set(f_name, name_score(input.name, PersonName::parse(*frag.name), pen));
    Address src;
    src.city = frag.city;
    address_score(input.address, src, f);
    const auto emp = employment_sim(RedactedIdentity::of(input), frag);
    if (emp.employer_cos) f.set(f_employer, *emp.employer_cos);
    if (emp.title_cos) f.set(f_title, *emp.title_cos);
    const auto in_ind = retrieval::infer_industry(input.employer, industries);
    std::optional<std::string> src_ind = frag.industry;
    if (!src_ind && frag.employer) src_ind = retrieval::infer_industry(*frag.employer, industries);
    if (in_ind && src_ind) f.set(f_industry, text::key_normalize(*in_ind) == text::key_normalize(*src_ind) ? 1.0 : 0.0);
    return f;
}

// ---------------------------------------------------------------------------
// Decision tree

struct TreeParams {
    std::size_t max_depth = 4;
    std::size_t min_leaf = 5;
};

struct LabeledPair {
    MatchFeatures features;
    int label = 0;  // 1 = co-referent
};

/// Binary CART tree over MatchFeatures. Leaves hold the positive-class fraction.
/// A sample missing the split feature follows the child that received more
/// present samples at training time.
class PairDecisionTree {
public:
    static constexpr int kFormatVersion = 1;

    struct Node {
        int feature = -1;  // -1 = leaf
        double threshold = 0.0;
        bool missing_left = true;
        int left = -1;
        int right = -1;
        double positive_fraction = 0.0;
        std::size_t count = 0;
    };

    double predict(const MatchFeatures& x) const {
        if (nodes_.empty()) return 0.0;
        std::size_t at = 0;
        while (nodes_[at].feature >= 0) {
            const auto& n = nodes_[at];
            const auto f = static_cast<std::size_t>(n.feature);
            bool go_left = x.present[f] ? x.value[f] <= n.threshold : n.missing_left;
            at = static_cast<std::size_t>(go_left ? n.left : n.right);
        }
        return nodes_[at].positive_fraction;
    }

    const std::vector<Node>& nodes() const { return nodes_; }
    bool single_class() const { return single_class_; }

    std::size_t depth() const { return nodes_.empty() ? 0 : depth_of(0); }

    static PairDecisionTree train(const std::vector<LabeledPair>& data, const TreeParams& params = {});

    json to_json() const {
        json ns = json::array();
        for (const auto& n : nodes_)
            ns.push_back({{"feature", n.feature},
                          {"threshold", n.threshold},
                          {"missing_left", n.missing_left},
                          {"left", n.left},
                          {"right", n.right},
                          {"positive_fraction", n.positive_fraction},
                          {"count", n.count}});
        return {{"format", "incomever-pair-tree"}, {"version", kFormatVersion}, {"single_class", single_class_},
                {"nodes", ns}};
    }

    static PairDecisionTree from_json(const json& j) {
        if (j.value("format", "") != "incomever-pair-tree" || j.value("version", 0) != kFormatVersion)
            throw ConfigError("pair tree: unrecognized format or version");
        PairDecisionTree t;
        t.single_class_ = j.value("single_class", false);
        for (const auto& n : j.at("nodes")) {
            Node x;
            x.feature = n.at("feature").get<int>();
            x.threshold = n.at("threshold").get<double>();
            x.missing_left = n.at("missing_left").get<bool>();
            x.left = n.at("left").get<int>();
            x.right = n.at("right").get<int>();
            x.positive_fraction = n.at("positive_fraction").get<double>();
            x.count = n.at("count").get<std::size_t>();
            if (x.feature >= static_cast<int>(kNumFeatures)) throw ConfigError("pair tree: bad feature index");
            t.nodes_.push_back(x);
        }
        for (const auto& n : t.nodes_) {
            if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= static_cast<int>(t.nodes_.size()) ||
                                   n.right >= static_cast<int>(t.nodes_.size())))
                throw ConfigError("pair tree: dangling child index");
        }
        return t;
    }

private:
    std::size_t depth_of(std::size_t i) const {
        const auto& n = nodes_[i];
        if (n.feature < 0) return 0;
        return 1 + std::max(depth_of(static_cast<std::size_t>(n.left)), depth_of(static_cast<std::size_t>(n.right)));
    }

    int build(const std::vector<LabeledPair>& data, std::vector<std::size_t> idx, std::size_t depth,
              const TreeParams& params);

    std::vector<Node> nodes_;
    bool single_class_ = false;
};

/// Best split of one node; also used (independently re-derived) by the test oracle.
struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    bool missing_left = true;
    double impurity = 0.0;  // sum over children of n_child * gini(child)
};

namespace detail {

inline double weighted_gini(double n, double pos) {
    if (n <= 0.0) return 0.0;
    const double neg = n - pos;
    return n - (pos * pos + neg * neg) / n;
}

inline std::optional<SplitChoice> best_split(const std::vector<LabeledPair>& data, const std::vector<std::size_t>& idx,
                                             std::size_t min_leaf) {
    const double n = static_cast<double>(idx.size());
    double total_pos = 0.0;
    for (auto i : idx) total_pos += data[i].label;
    const double parent = weighted_gini(n, total_pos);
    std::optional<SplitChoice> best;
    double best_imp = parent - 1e-12;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        std::vector<std::pair<double, int>> present;
        double miss_n = 0.0, miss_pos = 0.0;
        for (auto i : idx) {
            if (data[i].features.present[f])
                present.emplace_back(data[i].features.value[f], data[i].label);
            else
                miss_n += 1.0, miss_pos += data[i].label;
        }
        std::sort(present.begin(), present.end());
        const double pn = static_cast<double>(present.size());
        double present_pos = 0.0;
        for (const auto& p : present) present_pos += p.second;
        double left_n = 0.0, left_pos = 0.0;
        for (std::size_t k = 0; k + 1 < present.size(); ++k) {
            left_n += 1.0;
            left_pos += present[k].second;
            if (present[k].first == present[k + 1].first) continue;
            const double right_n = pn - left_n;
            const double right_pos = present_pos - left_pos;
            const bool miss_left = left_n >= right_n;
            const double ln = left_n + (miss_left ? miss_n : 0.0);
            const double lp = left_pos + (miss_left ? miss_pos : 0.0);
            const double rn = right_n + (miss_left ? 0.0 : miss_n);
            const double rp = right_pos + (miss_left ? 0.0 : miss_pos);
            if (ln < static_cast<double>(min_leaf) || rn < static_cast<double>(min_leaf)) continue;
            const double imp = weighted_gini(ln, lp) + weighted_gini(rn, rp);
            if (imp < best_imp) {
                best_imp = imp - 1e-12;
                best = SplitChoice{static_cast<int>(f), 0.5 * (present[k].first + present[k + 1].first), miss_left, imp};
            }
        }
    }
    return best;
}

}  // namespace detail

inline int PairDecisionTree::build(const std::vector<LabeledPair>& data, std::vector<std::size_t> idx,
                                   std::size_t depth, const TreeParams& params) {
    Node node;
    node.count = idx.size();
    double pos = 0.0;
    for (auto i : idx) pos += data[i].label;
    node.positive_fraction = idx.empty() ? 0.0 : pos / static_cast<double>(idx.size());
    const int me = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const bool pure = pos == 0.0 || pos == static_cast<double>(idx.size());
    if (depth >= params.max_depth || pure || idx.size() < 2 * params.min_leaf) return me;
    const auto split = detail::best_split(data, idx, params.min_leaf);
    if (!split) return me;
    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(split->feature);
    for (auto i : idx) {
        const auto& x = data[i].features;
        bool go_left = x.present[f] ? x.value[f] <= split->threshold : split->missing_left;
        (go_left ? left : right).push_back(i);
    }
    const int l = build(data, std::move(left), depth + 1, params);
    const int r = build(data, std::move(right), depth + 1, params);
    nodes_[static_cast<std::size_t>(me)].feature = split->feature;
    nodes_[static_cast<std::size_t>(me)].threshold = split->threshold;
    nodes_[static_cast<std::size_t>(me)].missing_left = split->missing_left;
    nodes_[static_cast<std::size_t>(me)].left = l;
    nodes_[static_cast<std::size_t>(me)].right = r;
    return me;
}

/// Greedy Gini CART. Ties go to the lowest feature index, then the lowest threshold.
/// Single-class input yields a one-leaf stump with single_class() set.
inline PairDecisionTree PairDecisionTree::train(const std::vector<LabeledPair>& data, const TreeParams& params) {
    if (data.size() < 2) throw ContractViolation("train_matcher: need at least 2 labeled pairs");
    PairDecisionTree t;
    std::size_t pos = 0;
    for (const auto& d : data) pos += d.label != 0;
    std::vector<LabeledPair> clean(data);
    for (auto& d : clean) d.label = d.label != 0;
    std::vector<std::size_t> idx(clean.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (pos == 0 || pos == data.size()) {
        t.single_class_ = true;
        Node leaf;
        leaf.count = data.size();
        leaf.positive_fraction = pos == 0 ? 0.0 : 1.0;
        t.nodes_.push_back(leaf);
        return t;
    }
    t.build(clean, std::move(idx), 0, params);
    return t;
}

inline PairDecisionTree train_matcher(const std::vector<LabeledPair>& data, const TreeParams& params = {}) {
    return PairDecisionTree::train(data, params);
}

// ---------------------------------------------------------------------------
// Scoring

enum class Bucket { low, medium, high };

inline std::string_view to_string(Bucket b) {
    switch (b) {
        case Bucket::low: return "low";
        case Bucket::medium: return "medium";
        case Bucket::high: return "high";
    }
    return "?";
}

struct BucketThresholds {
    double high = 0.8;    // score > high
    double medium = 0.5;  // medium < score <= high
};

inline Bucket bucket_of(double score, const BucketThresholds& t = {}) {
    if (score > t.high) return Bucket::high;
    if (score > t.medium) return Bucket::medium;
    return Bucket::low;
}

struct MatchResult {
    std::string record_id;
    double score = 0.0;
    Bucket bucket = Bucket::low;
    MatchFeatures features;
};

inline MatchResult score_pair(const PairDecisionTree& tree, std::string record_id, const MatchFeatures& features,
                              const BucketThresholds& t = {}) {
    const double s = std::clamp(tree.predict(features), 0.0, 1.0);
    return {std::move(record_id), s, bucket_of(s, t), features};
}

struct BinaryScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

inline BinaryScores binary_scores(const std::vector<int>& truth, const std::vector<int>& predicted) {
    require(truth.size() == predicted.size(), "binary_scores: length mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (predicted[i] && truth[i]) ++tp;
        else if (predicted[i]) ++fp;
        else if (truth[i]) ++fn;
    }
    BinaryScores s;
    s.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

}  // namespace incv::match
