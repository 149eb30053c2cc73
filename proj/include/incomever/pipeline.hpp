#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "canon.hpp"
#include "core.hpp"
#include "corpus.hpp"
#include "datagen.hpp"
#include "extfeat.hpp"
#include "extract.hpp"
#include "learners/bow.hpp"
#include "learners/ffn.hpp"
#include "learners/gbt.hpp"
#include "learners/lstm.hpp"
#include "learners/word2vec.hpp"
#include "match.hpp"
#include "retrieval.hpp"
#include "rng.hpp"
#include "text.hpp"

namespace incv::pipeline {

using json = nlohmann::json;
using datagen::Dataset;
using extfeat::ExternalFeatureVector;
using extfeat::kExternalDim;

// ---------------------------------------------------------------------------
// Variants and configuration

enum class Variant { bow_gbt, mean_wv_nn, external_wv_nn, tuned_wv_nn };

inline constexpr std::array<std::string_view, 4> kVariantNames = {"bow_gbt", "mean_wv_nn", "external_wv_nn", "tuned_wv_nn"};

inline std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

inline Variant parse_variant(std::string_view s) {
    for (std::size_t i = 0; i < kVariantNames.size(); ++i)
        if (kVariantNames[i] == s) return static_cast<Variant>(i);
    throw ConfigError("unknown internal model variant '" + std::string(s) +
                      "' (expected bow_gbt, mean_wv_nn, external_wv_nn or tuned_wv_nn)");
}

/// Row labels used in report tables.
inline std::string_view display_name(Variant v) {
    switch (v) {
        case Variant::bow_gbt: return "BOW + GBT";
        case Variant::mean_wv_nn: return "Mean WV + NN";
        case Variant::external_wv_nn: return "External Mean WV + NN";
        case Variant::tuned_wv_nn: return "Tuned Mean WV + NN";
    }
    return "";
}

inline constexpr std::string_view kExternalDisplay = "External data + GBT";
inline constexpr std::string_view kCombinedDisplay = "Combined + GBT";

namespace detail {

inline json gbt_params_json(const learners::GbtParams& p) {
    return {{"rounds", p.rounds}, {"max_depth", p.max_depth}, {"learning_rate", p.learning_rate}, {"min_leaf", p.min_leaf}};
}

inline learners::GbtParams gbt_params_from(const json& j, learners::GbtParams p) {
    p.rounds = j.value("rounds", p.rounds);
    p.max_depth = j.value("max_depth", p.max_depth);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.min_leaf = j.value("min_leaf", p.min_leaf);
    if (!(p.learning_rate > 0) || p.max_depth == 0) throw ConfigError("gbt params: learning_rate > 0 and max_depth >= 1 required");
    return p;
}

inline json ffn_cfg_json(const learners::FFNTrainConfig& c) {
    return {{"hidden", c.hidden}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate}};
}

inline learners::FFNTrainConfig ffn_cfg_from(const json& j, learners::FFNTrainConfig c) {
    c.hidden = j.value("hidden", c.hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    return c;
}

}  // namespace detail

struct InternalConfig {
    learners::GbtParams bow_gbt{600, 5, 0.01, 1};
    std::size_t embedding_dim = 300;
    learners::Word2VecParams word2vec;
    learners::FFNTrainConfig mean_ffn{{300, 100}, 40, 32, 0.01, 1};
    learners::FFNTrainConfig tuned_ffn{{200}, 40, 32, 0.01, 1};
    learners::LSTMTrainConfig lstm{128, 200, 0.5, 2, 16, 0.01, 0.01, 16, 1};
    std::size_t lstm_rows = 8000;  // outside-corpus rows used to tune title vectors

    json to_json() const {
        return {{"bow_gbt", detail::gbt_params_json(bow_gbt)},
                {"embedding_dim", embedding_dim},
                {"word2vec", {{"epochs", word2vec.epochs}, {"negatives", word2vec.negatives}, {"window", word2vec.window},
                              {"learning_rate", word2vec.learning_rate}}},
                {"mean_ffn", detail::ffn_cfg_json(mean_ffn)},
                {"tuned_ffn", detail::ffn_cfg_json(tuned_ffn)},
                {"lstm", {{"hidden", lstm.hidden}, {"dense", lstm.dense}, {"dropout", lstm.dropout}, {"epochs", lstm.epochs},
                          {"batch_size", lstm.batch_size}, {"learning_rate", lstm.learning_rate},
                          {"embedding_learning_rate", lstm.embedding_learning_rate}, {"max_len", lstm.max_len}}},
                {"lstm_rows", lstm_rows}};
    }

    static InternalConfig from_json(const json& j) {
        InternalConfig c;
        if (j.contains("bow_gbt")) c.bow_gbt = detail::gbt_params_from(j.at("bow_gbt"), c.bow_gbt);
        c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
        if (j.contains("word2vec")) {
            const auto& w = j.at("word2vec");
            c.word2vec.epochs = w.value("epochs", c.word2vec.epochs);
            c.word2vec.negatives = w.value("negatives", c.word2vec.negatives);
            c.word2vec.window = w.value("window", c.word2vec.window);
            c.word2vec.learning_rate = w.value("learning_rate", c.word2vec.learning_rate);
        }
        if (j.contains("mean_ffn")) c.mean_ffn = detail::ffn_cfg_from(j.at("mean_ffn"), c.mean_ffn);
        if (j.contains("tuned_ffn")) c.tuned_ffn = detail::ffn_cfg_from(j.at("tuned_ffn"), c.tuned_ffn);
        if (j.contains("lstm")) {
            const auto& l = j.at("lstm");
            c.lstm.hidden = l.value("hidden", c.lstm.hidden);
            c.lstm.dense = l.value("dense", c.lstm.dense);
            c.lstm.dropout = l.value("dropout", c.lstm.dropout);
            c.lstm.epochs = l.value("epochs", c.lstm.epochs);
            c.lstm.batch_size = l.value("batch_size", c.lstm.batch_size);
            c.lstm.learning_rate = l.value("learning_rate", c.lstm.learning_rate);
            c.lstm.embedding_learning_rate = l.value("embedding_learning_rate", c.lstm.embedding_learning_rate);
            c.lstm.max_len = l.value("max_len", c.lstm.max_len);
        }
        c.lstm_rows = j.value("lstm_rows", c.lstm_rows);
        if (c.embedding_dim == 0) throw ConfigError("internal config: embedding_dim must be >= 1");
        if (!(c.lstm.dropout >= 0.0 && c.lstm.dropout < 1.0)) throw ConfigError("internal config: lstm dropout must be in [0,1)");
        return c;
    }
};

struct ExternalConfig {
    learners::GbtParams gbt{1500, 5, 0.003, 1};
    std::size_t max_sources = extfeat::kSources;
    retrieval::RetrievalConfig retrieval;
    match::TreeParams matcher;
    std::size_t matcher_pairs = 4000;
    match::MiddleNamePenalty penalty;

    json to_json() const {
        return {{"gbt", detail::gbt_params_json(gbt)},
                {"max_sources", max_sources},
                {"retrieval", {{"per_query_k", retrieval.per_query_k}, {"candidate_cap", retrieval.candidate_cap},
                               {"bm25_k1", retrieval.bm25.k1}, {"bm25_b", retrieval.bm25.b}}},
                {"matcher", {{"max_depth", matcher.max_depth}, {"min_leaf", matcher.min_leaf}, {"pairs", matcher_pairs}}},
                {"middle_name_penalty", {{"initial_match", penalty.initial_match}, {"conflict", penalty.conflict}}}};
    }

    static ExternalConfig from_json(const json& j) {
        ExternalConfig c;
        if (j.contains("gbt")) c.gbt = detail::gbt_params_from(j.at("gbt"), c.gbt);
        c.max_sources = j.value("max_sources", c.max_sources);
        if (j.contains("retrieval")) {
            const auto& r = j.at("retrieval");
            c.retrieval.per_query_k = r.value("per_query_k", c.retrieval.per_query_k);
            c.retrieval.candidate_cap = r.value("candidate_cap", c.retrieval.candidate_cap);
            c.retrieval.bm25.k1 = r.value("bm25_k1", c.retrieval.bm25.k1);
            c.retrieval.bm25.b = r.value("bm25_b", c.retrieval.bm25.b);
        }
        if (j.contains("matcher")) {
            const auto& m = j.at("matcher");
            c.matcher.max_depth = m.value("max_depth", c.matcher.max_depth);
            c.matcher.min_leaf = m.value("min_leaf", c.matcher.min_leaf);
            c.matcher_pairs = m.value("pairs", c.matcher_pairs);
        }
        if (j.contains("middle_name_penalty")) {
            const auto& p = j.at("middle_name_penalty");
            c.penalty.initial_match = p.value("initial_match", c.penalty.initial_match);
            c.penalty.conflict = p.value("conflict", c.penalty.conflict);
        }
        if (c.max_sources < 1 || c.max_sources > extfeat::kSources) throw ConfigError("external config: max_sources must be in 1..5");
        if (c.retrieval.per_query_k == 0 || c.retrieval.candidate_cap == 0)
            throw ConfigError("external config: retrieval k and cap must be >= 1");
        return c;
    }
};

struct CombinedConfig {
    Variant internal = Variant::bow_gbt;
    learners::GbtParams gbt{1500, 5, 0.003, 1};
    bool out_of_fold = true;  // false: stack on in-sample internal predictions
    std::size_t stacking_folds = 5;

    json to_json() const {
        return {{"internal_variant", std::string(to_string(internal))},
                {"gbt", detail::gbt_params_json(gbt)},
                {"out_of_fold", out_of_fold},
                {"stacking_folds", stacking_folds}};
    }

    static CombinedConfig from_json(const json& j) {
        CombinedConfig c;
        if (j.contains("internal_variant")) c.internal = parse_variant(j.at("internal_variant").get<std::string>());
        if (j.contains("gbt")) c.gbt = detail::gbt_params_from(j.at("gbt"), c.gbt);
        c.out_of_fold = j.value("out_of_fold", c.out_of_fold);
        c.stacking_folds = j.value("stacking_folds", c.stacking_folds);
        if (c.stacking_folds < 2) throw ConfigError("combined config: stacking_folds must be >= 2");
        return c;
    }
};

struct PipelineConfig {
    InternalConfig internal;
    ExternalConfig external;
    CombinedConfig combined;
    double tau = 0.15;
    std::size_t cv_folds = 5;
    std::uint64_t seed = 42;
    std::size_t threads = 1;

    void validate() const {
        if (!(tau >= 0.0)) throw ConfigError("tau must be >= 0");
        if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
        if (threads < 1) throw ConfigError("threads must be >= 1");
    }

    json to_json() const {
        return {{"internal", internal.to_json()}, {"external", external.to_json()}, {"combined", combined.to_json()},
                {"tau", tau}, {"cv_folds", cv_folds}, {"seed", seed}, {"threads", threads}};
    }

    static PipelineConfig from_json(const json& j) {
        PipelineConfig c;
        try {
            if (j.contains("internal")) c.internal = InternalConfig::from_json(j.at("internal"));
            if (j.contains("external")) c.external = ExternalConfig::from_json(j.at("external"));
            if (j.contains("combined")) c.combined = CombinedConfig::from_json(j.at("combined"));
            c.tau = j.value("tau", c.tau);
            c.cv_folds = j.value("cv_folds", c.cv_folds);
            c.seed = j.value("seed", c.seed);
            c.threads = j.value("threads", c.threads);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("pipeline config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Internal model

/// State as a 50-slot one-hot; DC, territories and unknown codes are all zeros.
inline Eigen::RowVectorXd state_one_hot(std::string_view state) {
    Eigen::RowVectorXd v = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(kStates.size()));
    std::string up(state);
    for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto s = state_slot(text::collapse_ws(up))) v(static_cast<Eigen::Index>(*s)) = 1.0;
    return v;
}

/// [mean title vector | mean employer vector | state one-hot].
inline Eigen::RowVectorXd mean_vector_features(const learners::Embeddings& title_emb, const learners::Embeddings& employer_emb,
                                               const RedactedIdentity& r) {
    const auto d = static_cast<Eigen::Index>(title_emb.dim());
    if (employer_emb.dim() != title_emb.dim()) throw ContractViolation("mean_vector_features: embedding dims differ");
    Eigen::RowVectorXd x(2 * d + static_cast<Eigen::Index>(kStates.size()));
    x.segment(0, d) = title_emb.mean_of(text::tokenize(r.job_title)).transpose();
    x.segment(d, d) = employer_emb.mean_of(text::tokenize(r.employer)).transpose();
    x.segment(2 * d, static_cast<Eigen::Index>(kStates.size())) = state_one_hot(r.state);
    return x;
}

inline std::vector<std::vector<std::string>> embedding_sentences(const std::vector<RedactedIdentity>& rows,
                                                                 const std::vector<datagen::TextRow>* outside) {
    std::vector<std::vector<std::string>> s;
    for (const auto& r : rows) {
        s.push_back(text::tokenize(r.job_title));
        s.push_back(text::tokenize(r.employer));
    }
    if (outside)
        for (const auto& r : *outside) {
            s.push_back(text::tokenize(r.job_title));
            s.push_back(text::tokenize(r.employer));
        }
    std::erase_if(s, [](const auto& v) { return v.empty(); });
    return s;
}

class InternalModel {
public:
    Variant variant = Variant::bow_gbt;
    learners::BowMask mask;
    std::optional<learners::BowFeaturizer> bow;
    std::optional<learners::Embeddings> title_emb;
    std::optional<learners::Embeddings> employer_emb;
    std::optional<learners::GBTEnsemble> gbt;
    std::optional<learners::FFNParams> ffn;

    std::size_t input_dim() const {
        if (variant == Variant::bow_gbt) return learners::BowFeaturizer::kDim;
        return 2 * title_emb->dim() + kStates.size();
    }

    /// Only redacted fields (employer, title, city, state) reach the features.
    Eigen::RowVectorXd features(const RedactedIdentity& r) const {
        if (variant == Variant::bow_gbt) return bow->featurize(r, mask);
        return mean_vector_features(*title_emb, *employer_emb, r);
    }

    Eigen::RowVectorXd features(const Identity& id) const { return features(RedactedIdentity::of(id)); }

    double predict(const Identity& id) const {
        const auto x = features(id);
        if (variant == Variant::bow_gbt) return gbt->predict(x);
        return std::max(0.0, ffn->predict(x)(0));
    }

    std::vector<double> predict(const Dataset& ds) const {
        if (ds.empty()) return {};
        if (variant == Variant::bow_gbt) {
            std::vector<double> out;
            out.reserve(ds.size());
            for (const auto& e : ds) out.push_back(predict(e.identity));
            return out;
        }
        Eigen::MatrixXd X(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(input_dim()));
        for (std::size_t i = 0; i < ds.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = features(ds[i].identity);
        const Eigen::VectorXd p = ffn->predict(X);
        std::vector<double> out(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) out[i] = std::max(0.0, p(static_cast<Eigen::Index>(i)));
        return out;
    }

    json to_json() const {
        json j = {{"format", "incomever-internal"}, {"version", 1}, {"variant", std::string(to_string(variant))},
                  {"mask", {{"title", mask.title}, {"employer", mask.employer}, {"state", mask.state}, {"city", mask.city}}}};
        if (bow) j["bow"] = bow->to_json();
        if (title_emb) j["title_embeddings"] = title_emb->to_json();
        if (employer_emb) j["employer_embeddings"] = employer_emb->to_json();
        if (gbt) j["gbt"] = gbt->to_json();
        if (ffn) j["ffn"] = ffn->to_json();
        return j;
    }

    static InternalModel from_json(const json& j) {
        if (j.value("format", "") != "incomever-internal") throw ConfigError("internal model: bad format tag");
        InternalModel m;
        m.variant = parse_variant(j.at("variant").get<std::string>());
        const auto& mk = j.at("mask");
        m.mask = {mk.at("title").get<bool>(), mk.at("employer").get<bool>(), mk.at("state").get<bool>(), mk.at("city").get<bool>()};
        if (j.contains("bow")) m.bow = learners::BowFeaturizer::from_json(j.at("bow"));
        if (j.contains("title_embeddings")) m.title_emb = learners::Embeddings::from_json(j.at("title_embeddings"));
        if (j.contains("employer_embeddings")) m.employer_emb = learners::Embeddings::from_json(j.at("employer_embeddings"));
        if (j.contains("gbt")) m.gbt = learners::GBTEnsemble::from_json(j.at("gbt"));
        if (j.contains("ffn")) m.ffn = learners::FFNParams::from_json(j.at("ffn"));
        const bool ok = m.variant == Variant::bow_gbt ? (m.bow && m.gbt) : (m.title_emb && m.employer_emb && m.ffn);
        if (!ok) throw ConfigError("internal model: missing components for variant " + std::string(to_string(m.variant)));
        return m;
    }
};

/// Trains one of the four internal variants. `outside` is the outside text
/// corpus (job title, employer, income) used by the external and tuned variants.
inline InternalModel train_internal(const Dataset& train, Variant variant, const InternalConfig& cfg, std::uint64_t seed,
                                    const std::vector<datagen::TextRow>* outside = nullptr,
                                    const learners::BowMask& mask = {}) {
    if (train.empty()) throw ContractViolation("train_internal: empty training set");
    std::vector<RedactedIdentity> rows;
    rows.reserve(train.size());
    std::vector<double> y;
    for (const auto& e : train) {
        rows.push_back(RedactedIdentity::of(e.identity));
        y.push_back(e.true_income.dollars());
    }
    InternalModel m;
    m.variant = variant;
    m.mask = mask;
    Rng rng(seed);
    if (variant == Variant::bow_gbt) {
        m.bow = learners::BowFeaturizer::fit(rows);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(learners::BowFeaturizer::kDim));
        for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = m.bow->featurize(rows[i], mask);
        m.gbt = learners::gbt_train(X, y, cfg.bow_gbt);
        return m;
    }
    const bool use_outside = variant != Variant::mean_wv_nn;
    if (use_outside && (!outside || outside->empty()))
        throw ConfigError("variant " + std::string(to_string(variant)) + " needs the outside text corpus");
    auto w2v = cfg.word2vec;
    w2v.dim = cfg.embedding_dim;
    w2v.seed = rng.fork(1).next_u64();
    const auto emb = learners::train_word_vectors(embedding_sentences(rows, use_outside ? outside : nullptr), w2v);
    m.employer_emb = emb;
    m.title_emb = emb;
    auto ffn_cfg = variant == Variant::tuned_wv_nn ? cfg.tuned_ffn : cfg.mean_ffn;
    if (variant == Variant::tuned_wv_nn) {
        std::vector<std::size_t> pick(outside->size());
        std::iota(pick.begin(), pick.end(), 0);
        Rng sample_rng = rng.fork(2);
        sample_rng.shuffle(pick);
        pick.resize(std::min(pick.size(), cfg.lstm_rows));
        std::sort(pick.begin(), pick.end());
        std::vector<learners::TokenSequence> seqs;
        std::vector<double> targets;
        for (auto i : pick) {
            const auto& r = (*outside)[i];
            if (r.income.is_zero()) continue;
            seqs.push_back(learners::encode_tokens(emb, text::tokenize(r.job_title), cfg.lstm.max_len));
            targets.push_back(r.income.dollars());
        }
        auto lcfg = cfg.lstm;
        lcfg.seed = rng.fork(3).next_u64();
        m.title_emb = learners::lstm_regress_train(seqs, emb, targets, lcfg).embeddings;
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.input_dim()));
    for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = m.features(rows[i]);
    ffn_cfg.seed = rng.fork(4).next_u64();
    m.ffn = learners::ffn_train(X, y, ffn_cfg).params;
    return m;
}

// ---------------------------------------------------------------------------
// External machinery

/// Which salary attributes survive; a removed attribute is stripped from every
/// source before imputation and its feature columns are zero.
struct AttrMask {
    std::array<bool, extract::kNumAttrs> keep{true, true, true, true, true, true};

    bool all() const { return std::all_of(keep.begin(), keep.end(), [](bool b) { return b; }); }

    json to_json() const {
        json j = json::array();
        for (std::size_t i = 0; i < keep.size(); ++i)
            if (!keep[i]) j.push_back(std::string(extract::kAttrNames[i]));
        return j;
    }

    static AttrMask from_json(const json& j) {
        AttrMask m;
        for (const auto& n : j) {
            auto a = extract::attr_from_name(n.get<std::string>());
            if (!a) throw ConfigError("attribute mask: unknown attribute '" + n.get<std::string>() + "'");
            m.keep[*a] = false;
        }
        return m;
    }
};

enum class SalaryGroup { low, median, high };

inline AttrMask without(SalaryGroup g) {
    AttrMask m;
    using namespace extract;
    switch (g) {
        case SalaryGroup::low: m.keep[base_low] = m.keep[total_low] = false; break;
        case SalaryGroup::median: m.keep[base_median] = m.keep[total_median] = false; break;
        case SalaryGroup::high: m.keep[base_high] = m.keep[total_high] = false; break;
    }
    return m;
}

inline extract::SalaryAttributes apply_mask(extract::SalaryAttributes a, const AttrMask& m) {
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (!m.keep[i]) a.values[i].reset();
    return a;
}

struct ExtractionStats {
    std::size_t records = 0;
    std::size_t discardable = 0;
    std::map<std::string, std::size_t> reasons;

    json to_json() const { return {{"records", records}, {"discardable", discardable}, {"reasons", reasons}}; }
};

/// Canonicalized copy of an identity's employer and title.
inline Identity canonical_identity(const Identity& id, const canon::AliasTable& aliases) {
    Identity c = id;
    c.employer = canon::canonicalize(id.employer, canon::Kind::employer, aliases);
    c.job_title = canon::canonicalize(id.job_title, canon::Kind::title, aliases);
    return c;
}

/// Non-discardable candidates of one identity with their pairwise match features.
struct Evidence {
    std::vector<std::string> record_ids;
    std::vector<match::MatchFeatures> features;
};

/// Everything the external flow needs that does not depend on training labels:
/// extracted (and canonicalized) corpus records, the BM25 index, alias and
/// industry tables.
class ExternalContext {
public:
    ExternalContext(const SourceCorpus& corpus, canon::AliasTable aliases, retrieval::IndustryTable industries,
                    const extract::PathSpecs& specs, const extract::PatternSet& patterns, retrieval::RetrievalConfig rcfg,
                    std::optional<retrieval::CorpusIndex> prebuilt = std::nullopt, match::MiddleNamePenalty penalty = {})
        : aliases_(std::move(aliases)), industries_(std::move(industries)), retrieval_(rcfg), penalty_(penalty) {
        stats_.records = corpus.records.size();
        for (const auto& raw : corpus.records) {
            extract::SourceRecord r;
            try {
                r = extract::extract_record(raw, specs, patterns);
            } catch (const extract::ExtractionError& e) {
                r.id = raw.id;
                r.source_type = raw.source_type;
                r.discardable = true;
                r.discard_reason = e.what();
            }
            auto& f = r.fragment;
            if (f.employer) f.employer = canon::canonicalize(*f.employer, canon::Kind::employer, aliases_);
            if (f.occupation) f.occupation = canon::canonicalize(*f.occupation, canon::Kind::title, aliases_);
            if (r.discardable) {
                ++stats_.discardable;
                ++stats_.reasons[r.discard_reason];
            }
            by_id_[r.id] = records_.size();
            records_.push_back(std::move(r));
        }
        index_ = prebuilt ? std::move(*prebuilt) : retrieval::CorpusIndex::build(corpus);
    }

    const std::vector<extract::SourceRecord>& records() const { return records_; }
    const extract::SourceRecord* record(const std::string& id) const {
        auto it = by_id_.find(id);
        return it == by_id_.end() ? nullptr : &records_[it->second];
    }
    const canon::AliasTable& aliases() const { return aliases_; }
    const retrieval::IndustryTable& industries() const { return industries_; }
    const retrieval::CorpusIndex& index() const { return index_; }
    const ExtractionStats& extraction_stats() const { return stats_; }
    const match::MiddleNamePenalty& penalty() const { return penalty_; }

    match::MatchFeatures pair_features(const Identity& canonical, const extract::SourceRecord& r) const {
        return match::compute_features(canonical, r.fragment, industries_, penalty_);
    }

    /// Retrieves candidates for the identity and computes match features for
    /// the usable ones.
    Evidence evidence(const Identity& id) const {
        const auto c = canonical_identity(id, aliases_);
        Evidence ev;
        for (const auto& cand : retrieval::retrieve_candidates(c.employer, c.job_title, index_, industries_, retrieval_)) {
            const auto* r = record(cand.id);
            if (!r || r->discardable) continue;
            ev.record_ids.push_back(cand.id);
            ev.features.push_back(pair_features(c, *r));
        }
        return ev;
    }

    /// Ratio table over the usable records with masked attributes stripped.
    extfeat::RatioTable ratio_table(const AttrMask& mask = {}) const {
        std::vector<extract::SourceRecord> rs;
        rs.reserve(records_.size());
        for (const auto& r : records_) {
            if (r.discardable) continue;
            auto copy = r;
            copy.attributes = apply_mask(r.attributes, mask);
            if (!copy.attributes.any()) continue;
            rs.push_back(std::move(copy));
        }
        if (rs.empty()) throw InputError("corpus has no usable salary record");
        return extfeat::build_ratio_table(rs, industries_);
    }

    /// Imputed attributes of a record under the mask; nullopt when nothing survives.
    std::optional<extract::SalaryAttributes> imputed(const extract::SourceRecord& r, const extfeat::RatioTable& t,
                                                     const AttrMask& mask) const {
        return extfeat::impute_attributes(apply_mask(r.attributes, mask), extfeat::record_industry(r, industries_), t);
    }

private:
    canon::AliasTable aliases_;
    retrieval::IndustryTable industries_;
    retrieval::RetrievalConfig retrieval_;
    match::MiddleNamePenalty penalty_;
    std::vector<extract::SourceRecord> records_;
    std::unordered_map<std::string, std::size_t> by_id_;
    retrieval::CorpusIndex index_;
    ExtractionStats stats_;
};

/// Labeled (identity, record) pairs turned into matcher training rows. Pairs
/// whose identity or record is unknown or unusable are skipped. At most
/// `max_pairs` rows, sampled with the seed and then kept in label order.
inline std::vector<match::LabeledPair> matcher_training_pairs(const ExternalContext& ctx, const Dataset& identities,
                                                              const std::vector<datagen::MatchLabel>& labels,
                                                              std::size_t max_pairs, std::uint64_t seed) {
    std::unordered_map<std::string, const Identity*> by_id;
    for (const auto& e : identities) by_id[e.identity.id] = &e.identity;
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = by_id.find(labels[i].identity_id);
        const auto* r = ctx.record(labels[i].record_id);
        if (it != by_id.end() && r && !r->discardable) usable.push_back(i);
    }
    if (usable.size() > max_pairs) {
        Rng rng(seed);
        rng.shuffle(usable);
        usable.resize(max_pairs);
        std::sort(usable.begin(), usable.end());
    }
    std::vector<match::LabeledPair> out;
    out.reserve(usable.size());
    std::unordered_map<std::string, Identity> canon_cache;
    for (auto i : usable) {
        const auto& l = labels[i];
        auto cit = canon_cache.find(l.identity_id);
        if (cit == canon_cache.end())
            cit = canon_cache.emplace(l.identity_id, canonical_identity(*by_id.at(l.identity_id), ctx.aliases())).first;
        out.push_back({ctx.pair_features(cit->second, *ctx.record(l.record_id)), l.label});
    }
    return out;
}

inline match::PairDecisionTree train_matcher(const ExternalContext& ctx, const Dataset& identities,
                                             const std::vector<datagen::MatchLabel>& labels, const ExternalConfig& cfg,
                                             std::uint64_t seed) {
    auto pairs = matcher_training_pairs(ctx, identities, labels, cfg.matcher_pairs, seed);
    if (pairs.empty()) throw InputError("train_matcher: no usable labeled pairs");
    return match::train_matcher(pairs, cfg.matcher);
}

inline std::vector<match::MatchResult> score_evidence(const Evidence& ev, const match::PairDecisionTree& matcher) {
    std::vector<match::MatchResult> out;
    out.reserve(ev.record_ids.size());
    for (std::size_t i = 0; i < ev.record_ids.size(); ++i) out.push_back(match::score_pair(matcher, ev.record_ids[i], ev.features[i]));
    return out;
}

/// retrieve → extract → match → top sources → impute → 35-vector, from scored evidence.
inline ExternalFeatureVector assemble_external(const ExternalContext& ctx, const std::vector<match::MatchResult>& scored,
                                               const Money& stated, const extfeat::RatioTable& ratios, const AttrMask& mask,
                                               std::size_t max_sources) {
    std::map<std::string, std::optional<extract::SalaryAttributes>> attrs;
    for (const auto& m : scored) attrs[m.record_id] = ctx.imputed(*ctx.record(m.record_id), ratios, mask);
    auto v = extfeat::build_external_features(stated, scored, attrs, max_sources);
    for (std::size_t s = 0; s < extfeat::kSources; ++s)
        for (std::size_t a = 0; a < extract::kNumAttrs; ++a)
            if (!mask.keep[a]) v[extfeat::slot_index(s, a)] = 0.0;
    return v;
}

inline ExternalFeatureVector external_features(const ExternalContext& ctx, const Identity& id,
                                               const match::PairDecisionTree& matcher, const extfeat::RatioTable& ratios,
                                               const AttrMask& mask = {}, std::size_t max_sources = extfeat::kSources) {
    if (!id.stated_income || id.stated_income->is_zero())
        throw InputError("identity '" + id.id + "': the external model needs a positive stated income");
    return assemble_external(ctx, score_evidence(ctx.evidence(id), matcher), *id.stated_income, ratios, mask, max_sources);
}

inline bool has_stated(const Identity& id) { return id.stated_income && !id.stated_income->is_zero(); }

/// GBT on the 35 external features. The regression target is true / stated
/// income, and predictions are scaled back by the stated income.
struct ExternalModel {
    match::PairDecisionTree matcher;
    extfeat::RatioTable ratios;
    learners::GBTEnsemble gbt;
    AttrMask mask;
    std::size_t max_sources = extfeat::kSources;
    std::size_t excluded = 0;  // training rows without a stated income

    double predict_from(const ExternalFeatureVector& v, const Money& stated) const {
        return std::max(0.0, gbt.predict(std::span<const double>(v)) * stated.dollars());
    }

    double predict(const ExternalContext& ctx, const Identity& id) const {
        const auto v = external_features(ctx, id, matcher, ratios, mask, max_sources);
        return predict_from(v, *id.stated_income);
    }

    json to_json() const {
        return {{"format", "incomever-external"}, {"version", 1}, {"matcher", matcher.to_json()}, {"ratios", ratios.to_json()},
                {"gbt", gbt.to_json()}, {"dropped_attributes", mask.to_json()}, {"max_sources", max_sources},
                {"excluded_rows", excluded}};
    }

    static ExternalModel from_json(const json& j) {
        if (j.value("format", "") != "incomever-external") throw ConfigError("external model: bad format tag");
        ExternalModel m;
        m.matcher = match::PairDecisionTree::from_json(j.at("matcher"));
        m.ratios = extfeat::RatioTable::from_json(j.at("ratios"));
        m.gbt = learners::GBTEnsemble::from_json(j.at("gbt"));
        m.mask = AttrMask::from_json(j.at("dropped_attributes"));
        m.max_sources = j.at("max_sources").get<std::size_t>();
        m.excluded = j.value("excluded_rows", std::size_t{0});
        if (m.gbt.n_features != kExternalDim) throw ConfigError("external model: GBT input dimension must be 35");
        return m;
    }
};

inline Eigen::MatrixXd to_matrix(const std::vector<ExternalFeatureVector>& rows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(kExternalDim));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t c = 0; c < kExternalDim; ++c) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
    return X;
}

/// Fits the external GBT from precomputed feature vectors.
inline learners::GBTEnsemble fit_external_gbt(const std::vector<ExternalFeatureVector>& X, const std::vector<double>& ratio_target,
                                              const learners::GbtParams& p) {
    if (X.empty()) throw ContractViolation("external model: no training rows with a stated income");
    return learners::gbt_train(to_matrix(X), ratio_target, p);
}

inline ExternalModel train_external(const Dataset& train, const ExternalContext& ctx, const match::PairDecisionTree& matcher,
                                    const extfeat::RatioTable& ratios, const ExternalConfig& cfg, const AttrMask& mask = {}) {
    ExternalModel m;
    m.matcher = matcher;
    m.ratios = ratios;
    m.mask = mask;
    m.max_sources = cfg.max_sources;
    std::vector<ExternalFeatureVector> X;
    std::vector<double> y;
    for (const auto& e : train) {
        if (!has_stated(e.identity)) {
            ++m.excluded;
            continue;
        }
        X.push_back(external_features(ctx, e.identity, matcher, ratios, mask, cfg.max_sources));
        y.push_back(e.true_income.dollars() / e.identity.stated_income->dollars());
    }
    m.gbt = fit_external_gbt(X, y, cfg.gbt);
    return m;
}

// ---------------------------------------------------------------------------
// Combined model

inline constexpr std::size_t kStackDim = kExternalDim + 1;

/// 36-wide stacking row: the external vector, then internal prediction / stated income.
inline std::array<double, kStackDim> stack_row(const ExternalFeatureVector& v, double internal_pred, const Money& stated) {
    std::array<double, kStackDim> r{};
    std::copy(v.begin(), v.end(), r.begin());
    r[kExternalDim] = internal_pred / stated.dollars();
    return r;
}

struct CombinedModel {
    InternalModel internal;
    ExternalModel external;  // machinery (matcher, ratios) plus the standalone external GBT
    learners::GBTEnsemble stack;

    double predict_from(const ExternalFeatureVector& v, double internal_pred, const Money& stated) const {
        if (stack.n_features != kStackDim) throw ContractViolation("combined model: stacking input must be 36 wide");
        const auto row = stack_row(v, internal_pred, stated);
        return std::max(0.0, stack.predict(std::span<const double>(row)) * stated.dollars());
    }

    double predict(const ExternalContext& ctx, const Identity& id) const {
        const auto v = external_features(ctx, id, external.matcher, external.ratios, external.mask, external.max_sources);
        return predict_from(v, internal.predict(id), *id.stated_income);
    }

    json to_json() const {
        return {{"format", "incomever-combined"}, {"version", 1}, {"internal", internal.to_json()},
                {"external", external.to_json()}, {"stack", stack.to_json()}};
    }

    static CombinedModel from_json(const json& j) {
        if (j.value("format", "") != "incomever-combined") throw ConfigError("combined model: bad format tag");
        CombinedModel m;
        m.internal = InternalModel::from_json(j.at("internal"));
        m.external = ExternalModel::from_json(j.at("external"));
        m.stack = learners::GBTEnsemble::from_json(j.at("stack"));
        if (m.stack.n_features != kStackDim) throw ConfigError("combined model: stacking input must be 36 wide");
        return m;
    }
};

/// Fits the stacking GBT on rows of [external vector, internal prediction].
inline learners::GBTEnsemble fit_stack(const std::vector<ExternalFeatureVector>& ext, const std::vector<double>& internal_pred,
                                       const std::vector<Money>& stated, const std::vector<double>& truth,
                                       const learners::GbtParams& p) {
    const auto n = ext.size();
    if (n == 0 || internal_pred.size() != n || stated.size() != n || truth.size() != n)
        throw ContractViolation("fit_stack: mismatched or empty inputs");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kStackDim));
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = stack_row(ext[i], internal_pred[i], stated[i]);
        for (std::size_t c = 0; c < kStackDim; ++c) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
        y[i] = truth[i] / stated[i].dollars();
    }
    if (static_cast<std::size_t>(X.cols()) != kExternalDim + 1) throw ContractViolation("fit_stack: width must be 36");
    return learners::gbt_train(X, y, p);
}

// ---------------------------------------------------------------------------
// Verification

struct VerificationDecision {
    Money predicted;
    Money stated;
    double relative_gap = 0.0;
    bool verified = false;
    double tau = 0.15;

    json to_json() const {
        return {{"predicted", predicted.dollars()}, {"stated", stated.dollars()}, {"relative_gap", relative_gap},
                {"verified", verified}, {"tau", tau}};
    }
};

/// verified iff |stated - predicted| <= tau * predicted.
inline VerificationDecision verify_income(const Money& predicted, const Money& stated, double tau = 0.15) {
    if (predicted.is_zero() || stated.is_zero()) throw ContractViolation("verify_income: predicted and stated must be positive");
    if (!(tau >= 0.0)) throw ContractViolation("verify_income: tau must be >= 0");
    const auto gap = std::llabs(stated.cents() - predicted.cents());
    VerificationDecision d;
    d.predicted = predicted;
    d.stated = stated;
    d.tau = tau;
    d.relative_gap = static_cast<double>(gap) / static_cast<double>(predicted.cents());
    d.verified = static_cast<double>(gap) <= tau * static_cast<double>(predicted.cents());
    return d;
}

/// Precision / recall / F1 of the "verified" label. Ground truth is
/// |stated - true| <= tau * true; a zero prediction counts as not verified.
inline match::BinaryScores verification_scores(const std::vector<double>& predicted, const Dataset& ds, double tau) {
    require(predicted.size() == ds.size(), "verification_scores: one prediction per row");
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& id = ds[i].identity;
        if (!has_stated(id)) continue;
        const double s = id.stated_income->dollars(), t = ds[i].true_income.dollars();
        truth.push_back(std::abs(s - t) <= tau * t ? 1 : 0);
        const auto pm = Money::from_dollars(std::max(0.0, predicted[i]));
        pred.push_back(pm.is_zero() ? 0 : verify_income(pm, *id.stated_income, tau).verified ? 1 : 0);
    }
    return match::binary_scores(truth, pred);
}

// ---------------------------------------------------------------------------
// Evaluation

/// Seeded shuffle split into k near-equal folds; returns each fold's validation indices.
inline std::vector<std::vector<std::size_t>> kfold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ContractViolation("kfold: k must be >= 2");
    if (k > n) throw InputError("kfold: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " examples");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

inline std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& fold) {
    std::vector<char> in(n, 0);
    for (auto i : fold) in[i] = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!in[i]) out.push_back(i);
    return out;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

inline double mae(const std::vector<double>& pred, const std::vector<double>& truth) {
    require(pred.size() == truth.size() && !pred.empty(), "mae: need equal, non-empty inputs");
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
    return s / static_cast<double>(pred.size());
}

inline double mre(const std::vector<double>& pred, const std::vector<double>& truth) {
    require(pred.size() == truth.size() && !pred.empty(), "mre: need equal, non-empty inputs");
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]) / truth[i];
    return s / static_cast<double>(pred.size());
}

struct CvResult {
    std::vector<double> fold_mae;
    double mean = 0.0;
};

/// `fit_predict(train_idx, val_idx)` returns predictions for val_idx. The CV MAE is the mean of fold MAEs.
/// Folds run on up to `threads` workers; the result does not depend on the thread count.
inline CvResult kfold_cv(const std::vector<double>& truth, std::size_t k, std::uint64_t seed,
                         const std::function<std::vector<double>(const std::vector<std::size_t>&, const std::vector<std::size_t>&)>& fit_predict,
                         std::size_t threads = 1) {
    const auto folds = kfold_indices(truth.size(), k, seed);
    CvResult r;
    r.fold_mae.assign(k, 0.0);
    auto run = [&](std::size_t f) {
        const auto train_idx = complement(truth.size(), folds[f]);
        const auto pred = fit_predict(train_idx, folds[f]);
        return mae(pred, take(truth, folds[f]));
    };
    if (threads <= 1) {
        for (std::size_t f = 0; f < k; ++f) r.fold_mae[f] = run(f);
    } else {
        for (std::size_t start = 0; start < k; start += threads) {
            std::vector<std::future<double>> jobs;
            for (std::size_t f = start; f < std::min(k, start + threads); ++f) jobs.push_back(std::async(std::launch::async, run, f));
            for (std::size_t j = 0; j < jobs.size(); ++j) r.fold_mae[start + j] = jobs[j].get();
        }
    }
    r.mean = std::accumulate(r.fold_mae.begin(), r.fold_mae.end(), 0.0) / static_cast<double>(k);
    return r;
}

struct ModelScore {
    std::string model;
    std::optional<double> cv_mae;
    double test_mae = 0.0;
    double test_mre = 0.0;
    std::vector<double> test_predictions;
};

/// Report table with the Table 7-11 column layout. `first_header` names the row column.
inline std::string report_csv(const std::string& first_header, const std::vector<ModelScore>& rows) {
    std::string out;
    csv::append_row(out, {first_header, "CV MAE", "Test Set MAE", "Test Set MRE"});
    char buf[64];
    for (const auto& r : rows) {
        std::vector<std::string> cells{r.model};
        if (r.cv_mae) {
            std::snprintf(buf, sizeof buf, "%.3f", *r.cv_mae);
            cells.emplace_back(buf);
        } else {
            cells.emplace_back("");
        }
        std::snprintf(buf, sizeof buf, "%.3f", r.test_mae);
        cells.emplace_back(buf);
        std::snprintf(buf, sizeof buf, "%.3f", r.test_mre);
        cells.emplace_back(buf);
        csv::append_row(out, cells);
    }
    return out;
}

struct VerificationRow {
    std::string model;
    match::BinaryScores scores;
};

inline std::string verification_csv(const std::vector<VerificationRow>& rows) {
    std::string out;
    csv::append_row(out, {"Model", "Precision", "Recall", "F1 score"});
    char p[32], r[32], f[32];
    for (const auto& row : rows) {
        std::snprintf(p, sizeof p, "%.4f", row.scores.precision);
        std::snprintf(r, sizeof r, "%.4f", row.scores.recall);
        std::snprintf(f, sizeof f, "%.4f", row.scores.f1);
        csv::append_row(out, {row.model, p, r, f});
    }
    return out;
}

enum class Study { sources_count, input_features, salary_features };

inline Study parse_study(std::string_view s) {
    if (s == "sources_count") return Study::sources_count;
    if (s == "input_features") return Study::input_features;
    if (s == "salary_features") return Study::salary_features;
    throw ConfigError("unknown ablation study '" + std::string(s) + "' (expected sources_count, input_features or salary_features)");
}

inline std::string_view to_string(Study s) {
    switch (s) {
        case Study::sources_count: return "sources_count";
        case Study::input_features: return "input_features";
        case Study::salary_features: return "salary_features";
    }
    return "";
}

/// Train/test data with the external machinery prepared once: the matcher, the
/// per-identity evidence and matcher scores are shared by every model and
/// ablation run.
class Benchmark {
public:
    Benchmark(Dataset train, Dataset test, const ExternalContext& ctx, match::PairDecisionTree matcher,
              std::vector<datagen::TextRow> outside, PipelineConfig cfg)
        : train_(std::move(train)), test_(std::move(test)), ctx_(ctx), matcher_(std::move(matcher)),
          outside_(std::move(outside)), cfg_(std::move(cfg)) {
        cfg_.validate();
        if (train_.empty() || test_.empty()) throw InputError("benchmark: train and test sets must be non-empty");
        std::erase_if(train_, [&](const auto& e) {
            if (has_stated(e.identity)) return false;
            ++excluded_;
            return true;
        });
        std::erase_if(test_, [&](const auto& e) {
            if (has_stated(e.identity)) return false;
            ++excluded_;
            return true;
        });
        if (train_.size() < cfg_.cv_folds || test_.empty()) throw InputError("benchmark: too few rows with a stated income");
        for (const auto& e : train_) train_scored_.push_back(score_evidence(ctx_.evidence(e.identity), matcher_));
        for (const auto& e : test_) test_scored_.push_back(score_evidence(ctx_.evidence(e.identity), matcher_));
        train_truth_ = truths(train_);
        test_truth_ = truths(test_);
    }

    const Dataset& train() const { return train_; }
    const Dataset& test() const { return test_; }
    const PipelineConfig& config() const { return cfg_; }
    const match::PairDecisionTree& matcher() const { return matcher_; }
    std::size_t excluded() const { return excluded_; }
    const std::vector<std::vector<match::MatchResult>>& train_scored() const { return train_scored_; }
    const std::vector<std::vector<match::MatchResult>>& test_scored() const { return test_scored_; }

    // -- internal ------------------------------------------------------------

    InternalModel fit_internal(Variant v, const std::vector<std::size_t>& idx, std::uint64_t seed,
                               const learners::BowMask& mask = {}) const {
        return train_internal(take(train_, idx), v, cfg_.internal, seed, &outside_, mask);
    }

    ModelScore internal_score(Variant v, bool with_cv, const learners::BowMask& mask = {}, std::string label = "") const {
        ModelScore s;
        s.model = label.empty() ? std::string(display_name(v)) : label;
        const auto seed = model_seed(1 + static_cast<std::uint64_t>(v));
        if (with_cv)
            s.cv_mae = kfold_cv(train_truth_, cfg_.cv_folds, fold_seed(),
                                [&](const auto& tr, const auto& va) { return fit_internal(v, tr, seed, mask).predict(take(train_, va)); },
                                cfg_.threads)
                           .mean;
        const auto m = fit_internal(v, all_train(), seed, mask);
        finish(s, m.predict(test_));
        return s;
    }

    // -- external ------------------------------------------------------------

    struct ExternalDesign {
        extfeat::RatioTable ratios;
        std::vector<ExternalFeatureVector> train_x, test_x;
        std::vector<double> train_ratio;  // true / stated
    };

    ExternalDesign external_design(const AttrMask& mask, std::size_t max_sources) const {
        ExternalDesign d{ctx_.ratio_table(mask), {}, {}, {}};
        for (std::size_t i = 0; i < train_.size(); ++i) {
            d.train_x.push_back(assemble_external(ctx_, train_scored_[i], *train_[i].identity.stated_income, d.ratios, mask, max_sources));
            d.train_ratio.push_back(train_truth_[i] / train_[i].identity.stated_income->dollars());
        }
        for (std::size_t i = 0; i < test_.size(); ++i)
            d.test_x.push_back(assemble_external(ctx_, test_scored_[i], *test_[i].identity.stated_income, d.ratios, mask, max_sources));
        return d;
    }

    ExternalModel fit_external(const ExternalDesign& d, const std::vector<std::size_t>& idx, const AttrMask& mask,
                               std::size_t max_sources) const {
        ExternalModel m;
        m.matcher = matcher_;
        m.ratios = d.ratios;
        m.mask = mask;
        m.max_sources = max_sources;
        m.excluded = excluded_;
        m.gbt = fit_external_gbt(take(d.train_x, idx), take(d.train_ratio, idx), cfg_.external.gbt);
        return m;
    }

    ModelScore external_score(bool with_cv, const AttrMask& mask = {}, std::optional<std::size_t> max_sources = std::nullopt,
                              std::string label = "") const {
        const auto k = max_sources.value_or(cfg_.external.max_sources);
        const auto d = external_design(mask, k);
        ModelScore s;
        s.model = label.empty() ? std::string(kExternalDisplay) : label;
        if (with_cv)
            s.cv_mae = kfold_cv(train_truth_, cfg_.cv_folds, fold_seed(),
                                [&](const auto& tr, const auto& va) {
                                    const auto m = fit_external(d, tr, mask, k);
                                    std::vector<double> p;
                                    for (auto i : va) p.push_back(m.predict_from(d.train_x[i], *train_[i].identity.stated_income));
                                    return p;
                                },
                                cfg_.threads)
                           .mean;
        const auto m = fit_external(d, all_train(), mask, k);
        std::vector<double> p;
        for (std::size_t i = 0; i < test_.size(); ++i) p.push_back(m.predict_from(d.test_x[i], *test_[i].identity.stated_income));
        finish(s, p);
        return s;
    }

    // -- combined ------------------------------------------------------------

    /// Internal predictions for the rows in idx, out of fold over an inner
    /// k-split (or in-sample when out_of_fold is off).
    std::vector<double> stacking_internal(const std::vector<std::size_t>& idx, std::uint64_t seed) const {
        const auto v = cfg_.combined.internal;
        if (!cfg_.combined.out_of_fold) return fit_internal(v, idx, seed).predict(take(train_, idx));
        std::vector<double> out(idx.size());
        const auto inner = kfold_indices(idx.size(), std::min(cfg_.combined.stacking_folds, idx.size()), seed ^ 0x5eedULL);
        for (const auto& fold : inner) {
            const auto rest = complement(idx.size(), fold);
            const auto m = fit_internal(v, take(idx, rest), seed);
            const auto p = m.predict(take(train_, take(idx, fold)));
            for (std::size_t j = 0; j < fold.size(); ++j) out[fold[j]] = p[j];
        }
        return out;
    }

    struct CombinedFit {
        CombinedModel model;
        std::vector<double> train_internal;  // the stacking column actually used
    };

    CombinedFit fit_combined(const ExternalDesign& d, const std::vector<std::size_t>& idx) const {
        const auto seed = model_seed(1 + static_cast<std::uint64_t>(cfg_.combined.internal));
        CombinedFit f;
        f.train_internal = stacking_internal(idx, seed);
        f.model.internal = fit_internal(cfg_.combined.internal, idx, seed);
        f.model.external = fit_external(d, idx, {}, cfg_.external.max_sources);
        std::vector<Money> stated;
        for (auto i : idx) stated.push_back(*train_[i].identity.stated_income);
        f.model.stack = fit_stack(take(d.train_x, idx), f.train_internal, stated, take(train_truth_, idx), cfg_.combined.gbt);
        return f;
    }

    ModelScore combined_score(bool with_cv) const {
        const auto d = external_design({}, cfg_.external.max_sources);
        ModelScore s;
        s.model = std::string(kCombinedDisplay);
        auto predict_rows = [&](const CombinedModel& m, const Dataset& ds, const std::vector<ExternalFeatureVector>& X,
                                const std::vector<std::size_t>& rows) {
            const auto internal = m.internal.predict(take(ds, rows));
            std::vector<double> p;
            for (std::size_t j = 0; j < rows.size(); ++j)
                p.push_back(m.predict_from(X[rows[j]], internal[j], *ds[rows[j]].identity.stated_income));
            return p;
        };
        if (with_cv)
            s.cv_mae = kfold_cv(train_truth_, cfg_.cv_folds, fold_seed(),
                                [&](const auto& tr, const auto& va) { return predict_rows(fit_combined(d, tr).model, train_, d.train_x, va); },
                                cfg_.threads)
                           .mean;
        const auto f = fit_combined(d, all_train());
        finish(s, predict_rows(f.model, test_, d.test_x, all(test_.size())));
        return s;
    }

    CombinedModel train_combined_model() const {
        const auto d = external_design({}, cfg_.external.max_sources);
        return fit_combined(d, all_train()).model;
    }

    // -- ablations -----------------------------------------------------------

    std::vector<ModelScore> ablate(Study study, bool with_cv) const {
        std::vector<ModelScore> rows;
        switch (study) {
            case Study::sources_count:
                for (std::size_t k = 1; k <= extfeat::kSources; ++k) rows.push_back(external_score(with_cv, {}, k, std::to_string(k)));
                break;
            case Study::input_features: {
                rows.push_back(internal_score(Variant::bow_gbt, with_cv, {}, "All features"));
                learners::BowMask m;
                m.title = false;
                rows.push_back(internal_score(Variant::bow_gbt, with_cv, m, "- Job Title"));
                m = {};
                m.employer = false;
                rows.push_back(internal_score(Variant::bow_gbt, with_cv, m, "- Employer Name"));
                m = {};
                m.state = false;
                rows.push_back(internal_score(Variant::bow_gbt, with_cv, m, "- State"));
                m = {};
                m.city = false;
                rows.push_back(internal_score(Variant::bow_gbt, with_cv, m, "- City"));
                break;
            }
            case Study::salary_features:
                rows.push_back(external_score(with_cv, {}, std::nullopt, "All features"));
                rows.push_back(external_score(with_cv, without(SalaryGroup::low), std::nullopt, "- Low"));
                rows.push_back(external_score(with_cv, without(SalaryGroup::median), std::nullopt, "- Median"));
                rows.push_back(external_score(with_cv, without(SalaryGroup::high), std::nullopt, "- High"));
                break;
        }
        return rows;
    }

    static std::string_view first_header(Study s) { return s == Study::sources_count ? "# sources" : "Features"; }

    VerificationRow verification(const ModelScore& s) const { return {s.model, verification_scores(s.test_predictions, test_, cfg_.tau)}; }

private:
    static std::vector<double> truths(const Dataset& ds) {
        std::vector<double> t;
        for (const auto& e : ds) t.push_back(e.true_income.dollars());
        return t;
    }
    static std::vector<std::size_t> all(std::size_t n) {
        std::vector<std::size_t> v(n);
        std::iota(v.begin(), v.end(), 0);
        return v;
    }
    std::vector<std::size_t> all_train() const { return all(train_.size()); }
    std::uint64_t fold_seed() const { return Rng(cfg_.seed).fork(100).next_u64(); }
    std::uint64_t model_seed(std::uint64_t salt) const { return Rng(cfg_.seed).fork(200 + salt).next_u64(); }

    void finish(ModelScore& s, std::vector<double> pred) const {
        s.test_mae = mae(pred, test_truth_);
        s.test_mre = mre(pred, test_truth_);
        s.test_predictions = std::move(pred);
    }

    Dataset train_, test_;
    const ExternalContext& ctx_;
    match::PairDecisionTree matcher_;
    std::vector<datagen::TextRow> outside_;
    PipelineConfig cfg_;
    std::size_t excluded_ = 0;
    std::vector<std::vector<match::MatchResult>> train_scored_, test_scored_;
    std::vector<double> train_truth_, test_truth_;
};

// ---------------------------------------------------------------------------
// Single-identity prediction

/// Prediction from whichever model is loaded: internal, external or combined.
struct AnyModel {
    std::optional<InternalModel> internal;
    std::optional<ExternalModel> external;
    std::optional<CombinedModel> combined;

    static AnyModel from_json(const json& j) {
        AnyModel m;
        const auto fmt = j.value("format", "");
        if (fmt == "incomever-internal")
            m.internal = InternalModel::from_json(j);
        else if (fmt == "incomever-external")
            m.external = ExternalModel::from_json(j);
        else if (fmt == "incomever-combined")
            m.combined = CombinedModel::from_json(j);
        else
            throw ConfigError("model file: unrecognized format '" + fmt + "'");
        return m;
    }

    bool needs_corpus() const { return !internal.has_value(); }
};

/// Deterministic, never negative. External and combined models need a stated income.
inline Money predict_income(const AnyModel& m, const Identity& id, const ExternalContext* ctx) {
    double p = 0.0;
    if (m.internal) {
        p = m.internal->predict(id);
    } else {
        if (!ctx) throw ContractViolation("predict_income: the external flow needs the corpus");
        p = m.external ? m.external->predict(*ctx, id) : m.combined->predict(*ctx, id);
    }
    return Money::from_dollars(std::max(0.0, std::round(p * 100.0) / 100.0));
}

}  // namespace incv::pipeline
