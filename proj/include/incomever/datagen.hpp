#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "canon.hpp"
#include "core.hpp"
#include "corpus.hpp"
#include "csv.hpp"
#include "extract.hpp"
#include "rng.hpp"
#include "world.hpp"
#include "xml.hpp"

namespace incv::datagen {

using json = nlohmann::json;

struct LabeledExample {
    Identity identity;
    Money true_income;
};

using Dataset = std::vector<LabeledExample>;

inline std::vector<Money> true_incomes(const Dataset& d) {
    std::vector<Money> out;
    out.reserve(d.size());
    for (const auto& e : d) out.push_back(e.true_income);
    return out;
}

// ---------------------------------------------------------------------------
// H-1B ingestion

/// Column names of a disclosure CSV. wage_to_col is optional: when set and the
/// row carries a range end, the lower bound (wage_col) is still the one used.
struct ColumnMap {
    std::string employer_col;
    std::string title_col;
    std::string city_col;
    std::string state_col;
    std::string wage_col;
    std::string wage_unit_col;

    std::vector<std::string> names() const {
        return {employer_col, title_col, city_col, state_col, wage_col, wage_unit_col};
    }

    void validate() const {
        auto n = names();
        for (const auto& s : n)
            if (s.empty()) throw ConfigError("column map: empty column name");
        std::sort(n.begin(), n.end());
        if (std::adjacent_find(n.begin(), n.end()) != n.end()) throw ConfigError("column map: column names must be distinct");
    }

    static ColumnMap from_json(const json& j) {
        ColumnMap m;
        try {
            m.employer_col = j.at("employer_col").get<std::string>();
            m.title_col = j.at("title_col").get<std::string>();
            m.city_col = j.at("city_col").get<std::string>();
            m.state_col = j.at("state_col").get<std::string>();
            m.wage_col = j.at("wage_col").get<std::string>();
            m.wage_unit_col = j.at("wage_unit_col").get<std::string>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("column map: ") + e.what());
        }
        m.validate();
        return m;
    }

    static ColumnMap load(const std::string& path) {
        try {
            return from_json(json::parse(csv::read_file(path)));
        } catch (const json::parse_error& e) {
            throw ConfigError("column map '" + path + "': " + e.what());
        }
    }
};

inline constexpr double kHoursPerYear = 2080.0;

/// Multiplier from the stated wage unit to a year, or nullopt for an unknown unit.
inline std::optional<double> annualization_factor(std::string_view unit) {
    const auto u = text::key_normalize(unit);
    if (u == "hour" || u == "hourly" || u == "hr") return kHoursPerYear;
    if (u == "week" || u == "weekly" || u == "wk") return 52.0;
    if (u == "biweekly" || u == "bi weekly" || u == "bi") return 26.0;
    if (u == "month" || u == "monthly" || u == "mth") return 12.0;
    if (u == "year" || u == "yearly" || u == "annual" || u == "yr") return 1.0;
    return std::nullopt;
}

struct IngestResult {
    Dataset examples;
    std::size_t data_rows = 0;
    std::size_t skipped = 0;
    std::vector<std::string> skip_reasons;  // one per skipped row: "row N: reason"
};

/// Wage text to an annual amount; a "from - to" range uses its lower bound.
inline std::optional<Money> annual_wage(std::string_view wage, std::string_view unit) {
    auto factor = annualization_factor(unit);
    if (!factor) return std::nullopt;
    std::optional<Money> base;
    if (auto range = extract::parse_money_range(wage))
        base = range->first;
    else
        base = extract::parse_money_text(wage);
    if (!base || base->is_zero()) return std::nullopt;
    return Money::from_dollars(base->dollars() * *factor);
}

inline IngestResult ingest_hib_text(std::string_view content, const ColumnMap& map) {
    map.validate();
    auto rows = csv::parse(content);
    if (rows.empty()) throw ConfigError("H-1B file has no header row");
    const auto cols = csv::locate(rows[0], map.names());
    IngestResult out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;  // blank line
        ++out.data_rows;
        auto skip = [&](const std::string& why) {
            ++out.skipped;
            out.skip_reasons.push_back("row " + std::to_string(r + 1) + ": " + why);
        };
        auto cell = [&](std::size_t c) -> std::string { return c < row.size() ? text::collapse_ws(row[c]) : ""; };
        const auto employer = cell(cols[0]), title = cell(cols[1]), city = cell(cols[2]);
        std::string state = cell(cols[3]);
        for (auto& ch : state) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        if (employer.empty() || title.empty()) {
            skip("missing employer or title");
            continue;
        }
        const auto wage = annual_wage(cell(cols[4]), cell(cols[5]));
        if (!wage) {
            skip("missing or unparsable wage '" + cell(cols[4]) + "' / unit '" + cell(cols[5]) + "'");
            continue;
        }
        LabeledExample ex;
        ex.identity.id = "h1b-" + std::to_string(r);
        ex.identity.employer = employer;
        ex.identity.job_title = title;
        if (!city.empty()) ex.identity.address.city = city;
        if (!state.empty()) {
            if (!is_known_state_code(state)) {
                skip("unknown state code '" + state + "'");
                continue;
            }
            ex.identity.address.state = state;
        }
        ex.identity.address.country = "US";
        ex.true_income = *wage;
        out.examples.push_back(std::move(ex));
    }
    return out;
}

inline IngestResult ingest_hib(const std::string& csv_path, const ColumnMap& map) {
    return ingest_hib_text(csv::read_file(csv_path), map);
}

/// Seeded sample of n examples, kept in input order. n >= size returns everything.
inline Dataset sample_examples(const Dataset& all, std::size_t n, std::uint64_t seed) {
    if (n >= all.size()) return all;
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    rng.shuffle(idx);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    Dataset out;
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct CorruptionRates {
    double alias_noise = 0.3;
    double income_inflation_rate = 0.25;
    double inflation_low = 1.3;
    double inflation_high = 2.0;
    double stated_noise = 0.35;  // log-sd of everyday misreporting, applied to every stated income
};

struct SynthConfig {
    std::size_t n_rows = 3108;
    std::size_t test_rows = 1037;
    double income_mean = 77571.760;
    double income_stddev = 57979.323;
    std::vector<std::string> titles;     // subset of the world vocabulary; empty = all
    std::vector<std::string> employers;  // likewise
    CorruptionRates corruption;
    std::vector<double> sources_per_identity = {0.0, 0.25, 0.30, 0.25, 0.15, 0.05};  // P(k co-referent sources)
    std::vector<double> distractors_per_identity = {0.25, 0.40, 0.35};
    std::vector<double> source_type_weights = {0.15, 0.55, 0.30};  // government, salary site, snippet
    double government_noise = 0.08;  // log-sd of a payroll figure around the person's income
    double page_noise = 0.12;        // log-sd of a site or snippet figure around the employment level
    std::size_t external_text_rows = 10000;
    std::uint64_t seed = 42;

    std::size_t min_sources() const {
        for (std::size_t k = 0; k < sources_per_identity.size(); ++k)
            if (sources_per_identity[k] > 0) return k;
        return 0;
    }

    void validate() const {
        auto rate = [](double r, const char* what) {
            if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(std::string("synth config: ") + what + " must be in [0,1]");
        };
        if (n_rows < 1) throw ConfigError("synth config: n_rows must be >= 1");
        if (!(income_mean > 0) || !(income_stddev > 0)) throw ConfigError("synth config: income moments must be positive");
        rate(corruption.alias_noise, "alias_noise");
        rate(corruption.income_inflation_rate, "income_inflation_rate");
        if (!(corruption.stated_noise >= 0)) throw ConfigError("synth config: stated_noise must be >= 0");
        if (!(corruption.inflation_low >= 1.0 && corruption.inflation_high >= corruption.inflation_low))
            throw ConfigError("synth config: inflation_factor_range must satisfy 1 <= low <= high");
        auto dist = [](const std::vector<double>& w, const char* what) {
            double s = 0;
            for (double x : w) {
                if (!(x >= 0)) throw ConfigError(std::string("synth config: ") + what + " weights must be >= 0");
                s += x;
            }
            if (!(s > 0)) throw ConfigError(std::string("synth config: ") + what + " weights sum to zero");
        };
        dist(sources_per_identity, "sources_per_identity");
        dist(distractors_per_identity, "distractors_per_identity");
        dist(source_type_weights, "source_type_weights");
        if (source_type_weights.size() != 3) throw ConfigError("synth config: source_type_weights needs three values");
        if (!(government_noise >= 0) || !(page_noise >= 0)) throw ConfigError("synth config: noise levels must be >= 0");
        if (sources_per_identity.size() > 6) throw ConfigError("synth config: at most 5 sources per identity");
        for (const auto& t : titles)
            if (std::none_of(world::kTitles.begin(), world::kTitles.end(), [&](const auto& s) { return s.name == t; }))
                throw ConfigError("synth config: unknown title '" + t + "'");
        for (const auto& e : employers)
            if (std::none_of(world::employers().begin(), world::employers().end(), [&](const auto& s) { return s.name == e; }))
                throw ConfigError("synth config: unknown employer '" + e + "'");
    }

    json to_json() const {
        return {{"n_rows", n_rows},
                {"test_rows", test_rows},
                {"income_mean", income_mean},
                {"income_stddev", income_stddev},
                {"titles", titles},
                {"employers", employers},
                {"alias_noise", corruption.alias_noise},
                {"income_inflation_rate", corruption.income_inflation_rate},
                {"inflation_factor_range", {corruption.inflation_low, corruption.inflation_high}},
                {"stated_noise", corruption.stated_noise},
                {"sources_per_identity", sources_per_identity},
                {"distractors_per_identity", distractors_per_identity},
                {"source_type_weights", source_type_weights},
                {"government_noise", government_noise},
                {"page_noise", page_noise},
                {"external_text_rows", external_text_rows},
                {"seed", seed}};
    }

    /// Missing keys keep their defaults.
    static SynthConfig from_json(const json& j) {
        SynthConfig c;
        try {
            c.n_rows = j.value("n_rows", c.n_rows);
            c.test_rows = j.value("test_rows", c.test_rows);
            c.income_mean = j.value("income_mean", c.income_mean);
            c.income_stddev = j.value("income_stddev", c.income_stddev);
            c.titles = j.value("titles", c.titles);
            c.employers = j.value("employers", c.employers);
            c.corruption.alias_noise = j.value("alias_noise", c.corruption.alias_noise);
            c.corruption.income_inflation_rate = j.value("income_inflation_rate", c.corruption.income_inflation_rate);
            if (j.contains("inflation_factor_range")) {
                const auto r = j.at("inflation_factor_range").get<std::vector<double>>();
                if (r.size() != 2) throw ConfigError("synth config: inflation_factor_range needs two values");
                c.corruption.inflation_low = r[0];
                c.corruption.inflation_high = r[1];
            }
            c.corruption.stated_noise = j.value("stated_noise", c.corruption.stated_noise);
            c.sources_per_identity = j.value("sources_per_identity", c.sources_per_identity);
            c.distractors_per_identity = j.value("distractors_per_identity", c.distractors_per_identity);
            c.source_type_weights = j.value("source_type_weights", c.source_type_weights);
            c.government_noise = j.value("government_noise", c.government_noise);
            c.page_noise = j.value("page_noise", c.page_noise);
            c.external_text_rows = j.value("external_text_rows", c.external_text_rows);
            c.seed = j.value("seed", c.seed);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("synth config: ") + e.what());
        }
        c.validate();
        return c;
    }
};

struct MatchLabel {
    std::string identity_id;
    std::string record_id;
    int label = 0;
};

/// One row of the bundled outside text corpus (job title, employer, income).
struct TextRow {
    std::string job_title;
    std::string employer;
    Money income;
};

struct SynthOutput {
    Dataset train;
    Dataset test;
    SourceCorpus corpus;
    std::vector<MatchLabel> match_labels;
    std::vector<TextRow> external_text;
};

/// Variance shares of the log-income components: title, employer, location, individual.
struct ComponentShares {
    double title = 0.42;
    double employer = 0.12;
    double location = 0.16;
    double individual = 0.30;
};

namespace detail {

inline double normal_quantile(double p) {
    p = std::clamp(p, 1e-12, 1.0 - 1e-12);
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Discrete effect table standardized to mean 0, variance 1 under `weights`.
inline std::vector<double> standardize(std::vector<double> z, const std::vector<double>& weights) {
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    double m = 0, v = 0;
    for (std::size_t i = 0; i < z.size(); ++i) m += weights[i] * z[i];
    m /= wsum;
    for (std::size_t i = 0; i < z.size(); ++i) v += weights[i] * (z[i] - m) * (z[i] - m);
    v /= wsum;
    const double sd = v > 0 ? std::sqrt(v) : 1.0;
    for (auto& x : z) x = (x - m) / sd;
    return z;
}

/// Evenly spaced normal quantiles in the given order.
inline std::vector<double> quantile_ladder(std::size_t n) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    return z;
}

/// E[exp(s X)] for a discrete X.
inline double mgf(const std::vector<double>& x, const std::vector<double>& w, double s) {
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * std::exp(s * x[i]);
    return acc / wsum;
}

inline std::size_t pick_cdf(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

inline std::vector<double> cumulative(const std::vector<double>& w) {
    std::vector<double> c(w.size());
    std::partial_sum(w.begin(), w.end(), c.begin());
    return c;
}

/// Latin-hypercube draws: one uniform per stratum of width 1/n, in random order.
inline std::vector<double> stratified_uniforms(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (static_cast<double>(perm[i]) + rng.uniform()) / static_cast<double>(n);
    return u;
}

/// Pay level of each industry, lowest first.
inline constexpr std::array<std::string_view, 12> kIndustryPayOrder = {
    "Retail", "Hospitality", "Education", "Logistics", "Travel", "Government",
    "Healthcare", "Manufacturing", "Energy", "Consulting", "Finance", "Technology"};

/// Typical total-to-base pay multiplier by industry.
inline double bonus_factor(std::string_view industry) {
    if (industry == "Finance") return 1.30;
    if (industry == "Technology") return 1.35;
    if (industry == "Consulting") return 1.25;
    if (industry == "Energy") return 1.15;
    if (industry == "Manufacturing") return 1.10;
    if (industry == "Government" || industry == "Education") return 1.02;
    return 1.06;
}

inline std::string usd(double dollars) {
    auto whole = static_cast<long long>(std::llround(dollars));
    std::string digits = std::to_string(whole);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return "$" + out;
}

}  // namespace detail

/// The seeded labour market: effect tables, sampling weights and the
/// log-income location/scale solved so the income mixture has the configured
/// mean and standard deviation exactly.
class WorldModel {
public:
    struct Draw {
        std::size_t title, employer, city;
        double noise;
    };

    WorldModel(const SynthConfig& cfg, Rng rng, ComponentShares shares = {}) : shares_(shares) {
        for (std::size_t i = 0; i < world::kTitles.size(); ++i) {
            const auto& t = world::kTitles[i];
            if (!cfg.titles.empty() && std::find(cfg.titles.begin(), cfg.titles.end(), t.name) == cfg.titles.end())
                continue;
            title_names_.emplace_back(t.name);
            title_w_.push_back(t.weight);
            title_rank_.push_back(i);
        }
        {
            auto ladder = detail::quantile_ladder(world::kTitles.size());
            std::vector<double> z;
            for (auto r : title_rank_) z.push_back(ladder[r]);
            title_fx_ = detail::standardize(z, title_w_);
        }
        const auto& all = world::employers();
        std::vector<std::size_t> chosen;
        for (std::size_t i = 0; i < all.size(); ++i)
            if (cfg.employers.empty() || std::find(cfg.employers.begin(), cfg.employers.end(), all[i].name) != cfg.employers.end())
                chosen.push_back(i);
        // Size ranks: Zipf-like weights over a seeded order.
        std::vector<std::size_t> order(chosen.size());
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        employer_w_.assign(chosen.size(), 0.0);
        for (std::size_t r = 0; r < order.size(); ++r) employer_w_[order[r]] = 1.0 / std::pow(static_cast<double>(r) + 3.0, 0.8);
        auto ind_ladder = detail::quantile_ladder(detail::kIndustryPayOrder.size());
        std::vector<double> z;
        for (auto i : chosen) {
            employer_names_.push_back(all[i].name);
            employer_industry_.push_back(all[i].industry);
            const auto pos = std::find(detail::kIndustryPayOrder.begin(), detail::kIndustryPayOrder.end(), all[i].industry) -
                             detail::kIndustryPayOrder.begin();
            z.push_back(0.75 * ind_ladder[static_cast<std::size_t>(pos)] + 0.66 * rng.normal());
        }
        employer_fx_ = detail::standardize(z, employer_w_);
        for (const auto& c : world::kCities) city_w_.push_back(c.weight);
        city_fx_ = detail::standardize(detail::quantile_ladder(world::kCities.size()), city_w_);
        title_cdf_ = detail::cumulative(title_w_);
        employer_cdf_ = detail::cumulative(employer_w_);
        city_cdf_ = detail::cumulative(city_w_);
        solve(cfg.income_mean, cfg.income_stddev);
    }

    double mu() const { return mu_; }
    double sigma() const { return sigma_; }
    const ComponentShares& shares() const { return shares_; }

    std::size_t titles() const { return title_names_.size(); }
    std::size_t employer_count() const { return employer_names_.size(); }
    const std::string& title_name(std::size_t t) const { return title_names_[t]; }
    const std::string& employer_name(std::size_t e) const { return employer_names_[e]; }
    const std::string& industry_of(std::size_t e) const { return employer_industry_[e]; }
    const world::CitySpec& city(std::size_t c) const { return world::kCities[c]; }

    double log_income(const Draw& d) const {
        return mu_ + sigma_ * (std::sqrt(shares_.title) * title_fx_[d.title] + std::sqrt(shares_.employer) * employer_fx_[d.employer] +
                               std::sqrt(shares_.location) * city_fx_[d.city] + std::sqrt(shares_.individual) * d.noise);
    }

    /// Typical pay of a title at an employer: location and individual terms at their mean.
    double employment_level(std::size_t t, std::size_t e) const {
        const double s2 = sigma_ * sigma_;
        return std::exp(mu_ + sigma_ * (std::sqrt(shares_.title) * title_fx_[t] + std::sqrt(shares_.employer) * employer_fx_[e]) +
                        0.5 * s2 * shares_.individual) *
               detail::mgf(city_fx_, city_w_, sigma_ * std::sqrt(shares_.location));
    }

    /// Typical pay of a title across an industry's employers.
    double industry_level(std::size_t t, const std::string& industry) const {
        double acc = 0, w = 0;
        for (std::size_t e = 0; e < employer_names_.size(); ++e) {
            if (employer_industry_[e] != industry) continue;
            acc += employer_w_[e] * employment_level(t, e);
            w += employer_w_[e];
        }
        return w > 0 ? acc / w : 0.0;
    }

    /// n draws; each component is Latin-hypercube stratified.
    std::vector<Draw> sample(std::size_t n, Rng& rng) const {
        auto ut = detail::stratified_uniforms(n, rng), ue = detail::stratified_uniforms(n, rng),
             uc = detail::stratified_uniforms(n, rng), un = detail::stratified_uniforms(n, rng);
        std::vector<Draw> out(n);
        for (std::size_t i = 0; i < n; ++i)
            out[i] = {detail::pick_cdf(title_cdf_, ut[i]), detail::pick_cdf(employer_cdf_, ue[i]),
                      detail::pick_cdf(city_cdf_, uc[i]), detail::normal_quantile(un[i])};
        return out;
    }

    /// One unstratified draw.
    Draw draw(Rng& rng) const {
        return {detail::pick_cdf(title_cdf_, rng.uniform()), detail::pick_cdf(employer_cdf_, rng.uniform()),
                detail::pick_cdf(city_cdf_, rng.uniform()), rng.normal()};
    }

    /// Exact mean and standard deviation of the income mixture.
    std::pair<double, double> moments() const { return moments_at(mu_, sigma_); }

private:
    std::pair<double, double> moments_at(double mu, double sigma) const {
        auto m = [&](double k) {
            return std::exp(k * mu) * detail::mgf(title_fx_, title_w_, k * sigma * std::sqrt(shares_.title)) *
                   detail::mgf(employer_fx_, employer_w_, k * sigma * std::sqrt(shares_.employer)) *
                   detail::mgf(city_fx_, city_w_, k * sigma * std::sqrt(shares_.location)) *
                   std::exp(0.5 * k * k * sigma * sigma * shares_.individual);
        };
        const double m1 = m(1), m2 = m(2);
        return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
    }

    void solve(double mean, double sd) {
        const double target_cv = sd / mean;
        auto cv = [&](double s) {
            auto [m, d] = moments_at(0.0, s);
            return d / m;
        };
        double lo = 0.0, hi = 0.1;
        while (cv(hi) < target_cv) {
            hi *= 2;
            if (hi > 50) throw ConfigError("synth config: coefficient of variation is out of reach");
        }
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (cv(mid) < target_cv ? lo : hi) = mid;
        }
        sigma_ = 0.5 * (lo + hi);
        mu_ = std::log(mean) - std::log(moments_at(0.0, sigma_).first);
    }

    ComponentShares shares_;
    std::vector<std::string> title_names_, employer_names_, employer_industry_;
    std::vector<std::size_t> title_rank_;
    std::vector<double> title_w_, employer_w_, city_w_;
    std::vector<double> title_fx_, employer_fx_, city_fx_;
    std::vector<double> title_cdf_, employer_cdf_, city_cdf_;
    double mu_ = 0, sigma_ = 0;
};

namespace detail {

/// Surface variant of a canonical employer or title.
inline std::string corrupt(const std::string& canonical, bool employer, Rng& rng) {
    std::vector<std::string> variants;
    std::vector<double> weights;
    if (employer) {
        for (const auto& a : world::kEmployerAliases)
            if (a.canonical == canonical) variants.emplace_back(a.raw), weights.push_back(3.0 / 2);
    } else {
        for (const auto& a : world::kTitleAliases)
            if (a.canonical == canonical) variants.emplace_back(a.raw), weights.push_back(3.0);
    }
    // Token abbreviations.
    {
        auto toks = text::split_ws(canonical);
        bool changed = false;
        std::string out;
        for (auto& t : toks) {
            std::string rep = t;
            auto try_rules = [&](const auto& rules) {
                for (const auto& a : rules) {
                    if (a.full != t) continue;
                    std::vector<std::string_view> forms;
                    for (auto f : a.forms)
                        if (!f.empty()) forms.push_back(f);
                    if (!forms.empty() && rng.bernoulli(0.8)) {
                        rep = std::string(forms[rng.below(forms.size())]);
                        changed = true;
                    }
                }
            };
            if (employer)
                try_rules(world::kEmployerAbbreviations);
            else
                try_rules(world::kTitleAbbreviations);
            if (!out.empty()) out += ' ';
            out += rep;
        }
        if (changed) variants.push_back(out), weights.push_back(4.0);
    }
    {
        std::string up = canonical;
        for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        variants.push_back(up);
        weights.push_back(1.0);
        std::string low = canonical;
        for (auto& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        variants.push_back(low);
        weights.push_back(1.0);
    }
    if (canonical.size() > 4) {
        // A dropped letter: not recoverable through the alias table.
        std::string typo = canonical;
        std::size_t pos = 1 + rng.below(typo.size() - 2);
        while (pos < typo.size() - 1 && !std::isalpha(static_cast<unsigned char>(typo[pos]))) ++pos;
        typo.erase(pos, 1);
        variants.push_back(typo);
        weights.push_back(1.0);
    }
    return variants[rng.categorical(weights)];
}

struct RecordTruth {
    int person = -1;     // government records only
    int employer = -1;   // -1: no employer in the record
    int title = -1;
    std::string industry;  // industry-level snippets only
};

}  // namespace detail

/// Builds train/test datasets, the source corpus, match labels and the outside
/// text corpus. A pure function of the config.
inline SynthOutput generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng root(cfg.seed);
    const WorldModel world(cfg, root.fork(1));
    Rng id_rng = root.fork(4), src_rng = root.fork(5), text_rng = root.fork(6);
    const double noise = cfg.corruption.alias_noise;

    struct Person {
        WorldModel::Draw draw;
        PersonName name;
        double income;
    };
    std::vector<Person> people;
    SynthOutput out;

    auto make_name = [&](Rng& r) {
        PersonName n;
        n.first = std::string(world::kFirstNames[r.below(world::kFirstNames.size())]);
        if (r.bernoulli(0.6)) n.middle = std::string(world::kMiddleNames[r.below(world::kMiddleNames.size())]);
        n.last = std::string(world::kLastNames[r.below(world::kLastNames.size())]);
        return n;
    };

    auto make_split = [&](std::size_t n, const std::string& prefix, Rng split_rng) {
        Dataset ds;
        auto draws = world.sample(n, split_rng);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        split_rng.shuffle(idx);
        const auto inflated_count =
            static_cast<std::size_t>(std::llround(cfg.corruption.income_inflation_rate * static_cast<double>(n)));
        std::vector<char> inflated(n, 0);
        for (std::size_t i = 0; i < inflated_count; ++i) inflated[idx[i]] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& d = draws[i];
            Person p{d, make_name(id_rng), std::exp(world.log_income(d))};
            LabeledExample ex;
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s-%06zu", prefix.c_str(), i + 1);
            ex.identity.id = buf;
            ex.identity.name = p.name;
            const auto& c = world.city(d.city);
            ex.identity.address.street = std::to_string(100 + id_rng.below(9800)) + " " +
                                         std::string(world::kStreetNames[id_rng.below(world::kStreetNames.size())]) + " " +
                                         std::string(world::kStreetKinds[id_rng.below(world::kStreetKinds.size())]);
            ex.identity.address.city = std::string(c.city);
            ex.identity.address.county = std::string(c.county);
            ex.identity.address.state = std::string(c.state);
            ex.identity.address.zip = std::string(c.zip3) + std::to_string(10 + id_rng.below(90));
            ex.identity.address.country = "US";
            ex.identity.dob = Date{static_cast<int>(1950 + id_rng.below(50)), static_cast<int>(1 + id_rng.below(12)),
                                   static_cast<int>(1 + id_rng.below(28))};
            const auto& emp = world.employer_name(d.employer);
            const auto& title = world.title_name(d.title);
            ex.identity.employer = id_rng.bernoulli(noise) ? detail::corrupt(emp, true, id_rng) : emp;
            ex.identity.job_title = id_rng.bernoulli(noise) ? detail::corrupt(title, false, id_rng) : title;
            ex.true_income = Money::from_dollars(std::round(p.income));
            double stated = ex.true_income.dollars() * std::exp(cfg.corruption.stated_noise * id_rng.normal());
            if (inflated[i]) stated *= id_rng.uniform(cfg.corruption.inflation_low, cfg.corruption.inflation_high);
            ex.identity.stated_income = Money::from_dollars(std::round(stated));
            ds.push_back(std::move(ex));
            people.push_back(std::move(p));
        }
        return ds;
    };
    out.train = make_split(cfg.n_rows, "train", root.fork(2));
    out.test = make_split(cfg.test_rows, "test", root.fork(3));

    // Corpus.
    std::vector<std::pair<RawRecord, detail::RecordTruth>> records;
    std::vector<std::vector<std::size_t>> distractors_of(people.size());
    auto add_record = [&](SourceType type, json payload, detail::RecordTruth truth) {
        RawRecord r;
        char buf[32];
        const char* prefix = type == SourceType::government ? "gov" : type == SourceType::salary_site ? "site" : "snip";
        std::snprintf(buf, sizeof buf, "%s-%06zu", prefix, records.size() + 1);
        r.id = buf;
        r.source_type = type;
        r.payload = std::move(payload);
        records.emplace_back(std::move(r), std::move(truth));
        return records.size() - 1;
    };
    auto maybe_corrupt = [&](const std::string& s, bool employer) {
        return src_rng.bernoulli(noise) ? detail::corrupt(s, employer, src_rng) : s;
    };
    auto upper = [](std::string s) {
        for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        return s;
    };
    auto name_variant = [&](const PersonName& n) {
        std::string s = n.first;
        if (n.middle) {
            const double u = src_rng.uniform();
            if (u < 0.45)
                s += " " + *n.middle;
            else if (u < 0.8)
                s += " " + n.middle->substr(0, 1);
        }
        std::string last = n.last;
        if (src_rng.bernoulli(0.05) && last.size() > 3) last.erase(1 + src_rng.below(last.size() - 2), 1);
        s += " " + last;
        return src_rng.bernoulli(0.3) ? upper(s) : s;
    };
    auto government = [&](const std::string& name, std::size_t e, std::size_t t, std::size_t city, double income, int person) {
        double salary = income * std::exp(cfg.government_noise * src_rng.normal());
        double bonus = 0;
        if (src_rng.bernoulli(0.3)) {
            bonus = salary * src_rng.uniform(0.05, 0.15);
            salary -= bonus;
        }
        const auto& c = world.city(city);
        json p = {{"name", name},
                  {"salary", detail::usd(salary)},
                  {"bonus", detail::usd(bonus)},
                  {"agency", maybe_corrupt(world.employer_name(e), true)},
                  {"location", upper(std::string(c.city))},
                  {"state", std::string(c.state)},
                  {"occupation", maybe_corrupt(world.title_name(t), false)},
                  {"year", static_cast<int>(2014 + src_rng.below(3))}};
        return add_record(SourceType::government, std::move(p),
                          {person, static_cast<int>(e), static_cast<int>(t), ""});
    };
    auto site = [&](std::size_t e, std::size_t t) {
        const auto& ind = world.industry_of(e);
        const double bf = detail::bonus_factor(ind) * src_rng.uniform(0.97, 1.03);
        const double median = world.employment_level(t, e) / bf * std::exp(cfg.page_noise * src_rng.normal());
        std::optional<double> bm = median, bl, bh, tm, tl, th;
        const bool range = src_rng.bernoulli(0.6);
        if (range) {
            bl = median * src_rng.uniform(0.6, 0.8);
            bh = median * src_rng.uniform(1.3, 1.7);
        }
        if (src_rng.bernoulli(0.45)) {
            tm = median * bf;
            if (range) {
                tl = *bl * src_rng.uniform(1.0, bf);
                th = *bh * bf * src_rng.uniform(1.0, 1.2);
            }
        }
        if (range && src_rng.bernoulli(0.12)) bm.reset(), tm.reset();
        const std::string emp = maybe_corrupt(world.employer_name(e), true);
        const std::string title = maybe_corrupt(world.title_name(t), false);
        auto fmt = [](const std::optional<double>& v) { return detail::usd(*v).substr(1); };
        std::string doc;
        std::string site_id;
        if (src_rng.bernoulli(0.5)) {
            site_id = "paysite";
            auto block = [&](const char* tag, const auto& lo, const auto& md, const auto& hi) {
                if (!lo && !md && !hi) return std::string();
                std::string b = std::string("<") + tag + ">";
                if (md) b += "<mean>" + fmt(md) + "</mean>";
                if (lo) b += "<min>" + fmt(lo) + "</min>";
                if (hi) b += "<max>" + fmt(hi) + "</max>";
                return b + "</" + tag + ">";
            };
            doc = "<salary-report site=\"paysite\"><company>" + xml::escape(emp) + "</company><position>" +
                  xml::escape(title) + "</position>" + block("base", bl, bm, bh) + block("total", tl, tm, th) +
                  "</salary-report>";
        } else {
            site_id = "compsite";
            auto pay = [&](const char* kind, const auto& lo, const auto& md, const auto& hi) {
                if (!lo && !md && !hi) return std::string();
                std::string b = std::string("<pay kind=\"") + kind + "\"";
                if (lo) b += " low=\"" + fmt(lo) + "\"";
                if (md) b += " median=\"" + fmt(md) + "\"";
                if (hi) b += " high=\"" + fmt(hi) + "\"";
                return b + "/>";
            };
            doc = "<page><meta name=\"employer\" value=\"" + xml::escape(emp) + "\"/><meta name=\"title\" value=\"" +
                  xml::escape(title) + "\"/><meta name=\"industry\" value=\"" + ind + "\"/>" + pay("base", bl, bm, bh) +
                  pay("total", tl, tm, th) + "</page>";
        }
        return add_record(SourceType::salary_site, {{"site", site_id}, {"document", doc}},
                          {-1, static_cast<int>(e), static_cast<int>(t), ""});
    };
    auto snippet = [&](std::size_t e, std::size_t t) {
        const auto& ind = world.industry_of(e);
        const double bf = detail::bonus_factor(ind);
        const std::string emp = maybe_corrupt(world.employer_name(e), true);
        const std::string title = maybe_corrupt(world.title_name(t), false);
        const double u = src_rng.uniform();
        std::string text;
        detail::RecordTruth truth{-1, static_cast<int>(e), static_cast<int>(t), ""};
        const double level = world.employment_level(t, e) / bf * std::exp(cfg.page_noise * src_rng.normal());
        if (u < 0.45) {
            text = "The average " + title + " salary at " + emp + " is " + detail::usd(level) + ".";
        } else if (u < 0.7) {
            const double ilevel = world.industry_level(t, ind) / bf * std::exp(0.5 * cfg.page_noise * src_rng.normal());
            text = "The average " + title + " salary in the " + ind + " industry is " + detail::usd(ilevel) + ".";
            truth.employer = -1;
            truth.industry = ind;
        } else if (u < 0.88) {
            text = title + " salaries at " + emp + " range from " + detail::usd(level * src_rng.uniform(0.6, 0.8)) +
                   " to " + detail::usd(level * src_rng.uniform(1.3, 1.7)) + ".";
        } else {
            text = "Total compensation for a " + title + " at " + emp + " averages " + detail::usd(level * bf) + " per year.";
        }
        const auto id = add_record(SourceType::snippet, {{"text", text}, {"url", ""}}, truth);
        records[id].first.payload["url"] = "https://snippets.example/" + records[id].first.id;
        return id;
    };

    for (std::size_t pi = 0; pi < people.size(); ++pi) {
        const auto& p = people[pi];
        const auto k = src_rng.categorical(cfg.sources_per_identity);
        int govs = 0;
        for (std::size_t s = 0; s < k; ++s) {
            auto type = src_rng.categorical(cfg.source_type_weights);
            if (type == 0 && govs >= 1) type = 1;
            if (type == 0) {
                ++govs;
                government(name_variant(p.name), p.draw.employer, p.draw.title, p.draw.city, p.income, static_cast<int>(pi));
            } else if (type == 1) {
                site(p.draw.employer, p.draw.title);
            } else {
                snippet(p.draw.employer, p.draw.title);
            }
        }
        const auto dcount = src_rng.categorical(cfg.distractors_per_identity);
        for (std::size_t s = 0; s < dcount; ++s) {
            const double u = src_rng.uniform();
            if (u < 0.3) {
                // Namesake at another employer.
                auto d = world.draw(src_rng);
                if (d.employer == p.draw.employer) d.employer = (d.employer + 1) % world.employer_count();
                PersonName n = p.name;
                if (src_rng.bernoulli(0.5)) n.middle = std::string(world::kMiddleNames[src_rng.below(world::kMiddleNames.size())]);
                distractors_of[pi].push_back(
                    government(name_variant(n), d.employer, d.title, d.city, std::exp(world.log_income(d)), -2));
            } else if (u < 0.6) {
                // Coworker: same employer and title, another person.
                auto d = world.draw(src_rng);
                d.employer = p.draw.employer;
                d.title = p.draw.title;
                distractors_of[pi].push_back(
                    government(name_variant(make_name(src_rng)), d.employer, d.title, d.city, std::exp(world.log_income(d)), -2));
            } else if (u < 0.85) {
                std::size_t e = src_rng.below(world.employer_count());
                if (e == p.draw.employer) e = (e + 1) % world.employer_count();
                distractors_of[pi].push_back(site(e, p.draw.title));
            } else {
                std::size_t t = src_rng.below(world.titles());
                if (t == p.draw.title) t = (t + 1) % world.titles();
                distractors_of[pi].push_back(snippet(p.draw.employer, t));
            }
        }
    }

    // Co-reference labels.
    std::map<int, std::vector<std::size_t>> by_person;
    std::map<std::pair<int, int>, std::vector<std::size_t>> by_job;
    std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_industry_title;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& t = records[r].second;
        if (records[r].first.source_type == SourceType::government) {
            if (t.person >= 0) by_person[t.person].push_back(r);
        } else if (t.employer >= 0) {
            by_job[{t.employer, t.title}].push_back(r);
        } else {
            by_industry_title[{t.industry, t.title}].push_back(r);
        }
    }
    auto all_ids = [&](const std::vector<LabeledExample>& a, const std::vector<LabeledExample>& b, std::size_t i) -> const std::string& {
        return i < a.size() ? a[i].identity.id : b[i - a.size()].identity.id;
    };
    for (std::size_t pi = 0; pi < people.size(); ++pi) {
        const auto& p = people[pi];
        std::set<std::size_t> pos;
        if (auto it = by_person.find(static_cast<int>(pi)); it != by_person.end()) pos.insert(it->second.begin(), it->second.end());
        if (auto it = by_job.find({static_cast<int>(p.draw.employer), static_cast<int>(p.draw.title)}); it != by_job.end())
            pos.insert(it->second.begin(), it->second.end());
        if (auto it = by_industry_title.find({world.industry_of(p.draw.employer), static_cast<int>(p.draw.title)});
            it != by_industry_title.end())
            pos.insert(it->second.begin(), it->second.end());
        std::map<std::string, int> labels;
        for (auto r : pos) labels[records[r].first.id] = 1;
        for (auto r : distractors_of[pi])
            if (!pos.count(r)) labels[records[r].first.id] = 0;
        const auto& iid = all_ids(out.train, out.test, pi);
        for (const auto& [rid, lab] : labels) out.match_labels.push_back({iid, rid, lab});
    }

    for (auto& [r, t] : records) out.corpus.records.push_back(std::move(r));

    for (std::size_t i = 0; i < cfg.external_text_rows; ++i) {
        const auto d = world.draw(text_rng);
        TextRow row;
        row.job_title = text_rng.bernoulli(noise) ? detail::corrupt(world.title_name(d.title), false, text_rng)
                                                  : world.title_name(d.title);
        row.employer = world.employer_name(d.employer);
        row.income = Money::from_dollars(std::round(std::exp(world.log_income(d))));
        out.external_text.push_back(std::move(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files

inline const std::vector<std::string>& dataset_columns() {
    static const std::vector<std::string> cols = {"id",    "first_name", "middle_name", "last_name", "street",
                                                  "city",  "county",     "state",       "zip",       "country",
                                                  "dob",   "employer",   "job_title",   "stated_income", "true_income"};
    return cols;
}

inline std::string dataset_to_csv(const Dataset& ds) {
    std::string out;
    csv::append_row(out, dataset_columns());
    for (const auto& ex : ds) {
        const auto& id = ex.identity;
        const auto& a = id.address;
        csv::append_row(out, {id.id, id.name.first, id.name.middle.value_or(""), id.name.last, a.street.value_or(""),
                              a.city.value_or(""), a.county.value_or(""), a.state.value_or(""), a.zip.value_or(""),
                              a.country.value_or(""), id.dob ? id.dob->str() : "", id.employer, id.job_title,
                              id.stated_income ? id.stated_income->str() : "", ex.true_income.str()});
    }
    return out;
}

/// Reads a dataset CSV. true_income is required; stated_income may be blank.
inline Dataset dataset_from_csv(std::string_view content) {
    auto rows = csv::parse(content);
    if (rows.empty()) throw ConfigError("dataset CSV: missing header");
    const auto c = csv::locate(rows[0], dataset_columns());
    Dataset ds;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() < rows[0].size()) throw InputError("dataset CSV: row " + std::to_string(r + 1) + " is short");
        auto opt = [&](std::size_t k) -> std::optional<std::string> {
            const auto& v = row[c[k]];
            if (v.empty()) return std::nullopt;
            return v;
        };
        LabeledExample ex;
        auto& id = ex.identity;
        id.id = row[c[0]];
        id.name.first = row[c[1]];
        id.name.middle = opt(2);
        id.name.last = row[c[3]];
        id.address = {opt(4), opt(5), opt(6), opt(7), opt(8), opt(9)};
        if (auto d = opt(10)) {
            id.dob = Date::parse(*d);
            if (!id.dob) throw InputError("dataset CSV: row " + std::to_string(r + 1) + ": bad dob '" + *d + "'");
        }
        id.employer = row[c[11]];
        id.job_title = row[c[12]];
        if (auto s = opt(13)) {
            auto m = extract::parse_money_text(*s);
            if (!m) throw InputError("dataset CSV: row " + std::to_string(r + 1) + ": bad stated_income");
            id.stated_income = *m;
        }
        auto t = extract::parse_money_text(row[c[14]]);
        if (!t || t->is_zero()) throw InputError("dataset CSV: row " + std::to_string(r + 1) + ": true_income must be > 0");
        ex.true_income = *t;
        id.validate();
        ds.push_back(std::move(ex));
    }
    return ds;
}

inline Dataset read_dataset(const std::string& path) { return dataset_from_csv(csv::read_file(path)); }

inline std::string corpus_to_jsonl(const SourceCorpus& c) {
    std::string out;
    for (const auto& r : c.records) out += r.to_json().dump() + "\n";
    return out;
}

inline std::string labels_to_csv(const std::vector<MatchLabel>& labels) {
    std::string out;
    csv::append_row(out, {"identity_id", "record_id", "label"});
    for (const auto& l : labels) csv::append_row(out, {l.identity_id, l.record_id, std::to_string(l.label)});
    return out;
}

inline std::vector<MatchLabel> labels_from_csv(std::string_view content) {
    auto rows = csv::parse(content);
    std::vector<MatchLabel> out;
    if (rows.empty()) return out;
    const auto c = csv::locate(rows[0], {"identity_id", "record_id", "label"});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() == 1 && rows[r][0].empty()) continue;
        if (rows[r].size() < 3) throw InputError("match labels: row " + std::to_string(r + 1) + " is short");
        const auto& lab = rows[r][c[2]];
        if (lab != "0" && lab != "1") throw InputError("match labels: row " + std::to_string(r + 1) + ": label must be 0 or 1");
        out.push_back({rows[r][c[0]], rows[r][c[1]], lab == "1" ? 1 : 0});
    }
    return out;
}

inline std::string text_rows_to_csv(const std::vector<TextRow>& rows) {
    std::string out;
    csv::append_row(out, {"job_title", "employer", "income"});
    for (const auto& r : rows) csv::append_row(out, {r.job_title, r.employer, r.income.str()});
    return out;
}

inline std::vector<TextRow> text_rows_from_csv(std::string_view content) {
    auto rows = csv::parse(content);
    std::vector<TextRow> out;
    if (rows.empty()) return out;
    const auto c = csv::locate(rows[0], {"job_title", "employer", "income"});
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() == 1 && rows[r][0].empty()) continue;
        if (rows[r].size() < 3) throw InputError("text corpus: row " + std::to_string(r + 1) + " is short");
        auto m = extract::parse_money_text(rows[r][c[2]]);
        out.push_back({rows[r][c[0]], rows[r][c[1]], m.value_or(Money{})});
    }
    return out;
}

/// Writes train.csv, test.csv, corpus/corpus.jsonl, match_labels.csv,
/// external_text.csv, alias_table.csv and industry_table.csv under `dir`.
/// Returns the written paths, relative to dir.
inline std::vector<std::string> write_synthetic(const SynthOutput& s, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "corpus");
    std::vector<std::pair<std::string, std::string>> files = {
        {"train.csv", dataset_to_csv(s.train)},
        {"test.csv", dataset_to_csv(s.test)},
        {"corpus/corpus.jsonl", corpus_to_jsonl(s.corpus)},
        {"match_labels.csv", labels_to_csv(s.match_labels)},
        {"external_text.csv", text_rows_to_csv(s.external_text)},
        {"alias_table.csv", world::default_alias_table().to_csv()},
        {"industry_table.csv", world::default_industry_csv()},
    };
    std::vector<std::string> written;
    for (const auto& [name, content] : files) {
        csv::write_file((fs::path(dir) / name).string(), content);
        written.push_back(name);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Corpus loading

struct LoadIssue {
    std::string file;
    std::size_t line = 0;
    std::string message;
};

struct LoadedCorpus {
    SourceCorpus corpus;
    std::vector<LoadIssue> errors;
};

/// Parses JSON Lines text. Malformed lines are reported, not dropped silently.
inline void parse_corpus_lines(std::string_view content, const std::string& file, std::vector<RawRecord>& out,
                               std::vector<LoadIssue>& errors) {
    std::size_t line_no = 0, start = 0;
    while (start <= content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string_view::npos) end = content.size();
        ++line_no;
        std::string_view line = content.substr(start, end - start);
        start = end + 1;
        if (text::collapse_ws(line).empty()) {
            if (end == content.size()) break;
            continue;
        }
        try {
            auto j = json::parse(line);
            if (!j.is_object() || !j.contains("id") || !j.at("id").is_string() || j.at("id").get<std::string>().empty())
                throw InputError("missing or non-string id");
            auto type = j.contains("source_type") && j.at("source_type").is_string()
                            ? parse_source_type(j.at("source_type").get<std::string>())
                            : std::nullopt;
            if (!type) throw InputError("source_type must be government, salary_site or snippet");
            if (!j.contains("payload") || !j.at("payload").is_object()) throw InputError("payload must be an object");
            out.push_back({j.at("id").get<std::string>(), *type, j.at("payload")});
        } catch (const std::exception& e) {
            errors.push_back({file, line_no, e.what()});
        }
        if (end == content.size()) break;
    }
}

/// Loads every *.jsonl file in the directory (sorted by name). A duplicate id is a hard error.
inline LoadedCorpus load_corpus(const std::string& dir_path) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir_path)) throw IoError("corpus directory '" + dir_path + "' does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_path))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    LoadedCorpus out;
    std::map<std::string, std::string> origin;
    for (const auto& f : files) {
        std::vector<RawRecord> recs;
        parse_corpus_lines(csv::read_file(f.string()), f.filename().string(), recs, out.errors);
        for (auto& r : recs) {
            auto [it, fresh] = origin.emplace(r.id, f.filename().string());
            if (!fresh)
                throw InputError("duplicate record id '" + r.id + "' in " + it->second + " and " + f.filename().string());
            out.corpus.records.push_back(std::move(r));
        }
    }
    std::sort(out.corpus.records.begin(), out.corpus.records.end(),
              [](const RawRecord& a, const RawRecord& b) { return a.id < b.id; });
    return out;
}

// ---------------------------------------------------------------------------
// Identity documents

/// Identity JSON mirroring the input table: name (object or "First [Middle] Last"),
/// address object, dob, employer, job_title, stated_income (dollars).
inline Identity identity_from_json(const json& j) {
    Identity id;
    try {
        id.id = j.value("id", std::string("input"));
        if (j.contains("name")) {
            const auto& n = j.at("name");
            if (n.is_string()) {
                id.name = PersonName::parse(n.get<std::string>());
            } else {
                id.name.first = n.value("first", "");
                if (n.contains("middle") && n.at("middle").is_string()) id.name.middle = n.at("middle").get<std::string>();
                id.name.last = n.value("last", "");
            }
        }
        if (j.contains("address")) {
            const auto& a = j.at("address");
            auto f = [&](const char* k) -> std::optional<std::string> {
                if (!a.contains(k) || !a.at(k).is_string()) return std::nullopt;
                return a.at(k).get<std::string>();
            };
            id.address = {f("street"), f("city"), f("county"), f("state"), f("zip"), f("country")};
        }
        if (j.contains("dob") && j.at("dob").is_string()) {
            id.dob = Date::parse(j.at("dob").get<std::string>());
            if (!id.dob) throw InputError("identity: bad dob");
        }
        id.employer = j.at("employer").get<std::string>();
        id.job_title = j.at("job_title").get<std::string>();
        if (j.contains("stated_income") && !j.at("stated_income").is_null()) {
            const auto& s = j.at("stated_income");
            if (s.is_number())
                id.stated_income = Money::from_dollars(s.get<double>());
            else if (auto m = extract::parse_money_text(s.get<std::string>()))
                id.stated_income = *m;
            else
                throw InputError("identity: unparsable stated_income");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("identity JSON: ") + e.what());
    }
    id.validate();
    return id;
}

inline json identity_to_json(const Identity& id) {
    json j = {{"id", id.id}, {"employer", id.employer}, {"job_title", id.job_title}};
    json n = {{"first", id.name.first}, {"last", id.name.last}};
    if (id.name.middle) n["middle"] = *id.name.middle;
    j["name"] = n;
    json a = json::object();
    auto put = [&](const char* k, const std::optional<std::string>& v) {
        if (v) a[k] = *v;
    };
    put("street", id.address.street);
    put("city", id.address.city);
    put("county", id.address.county);
    put("state", id.address.state);
    put("zip", id.address.zip);
    put("country", id.address.country);
    j["address"] = a;
    if (id.dob) j["dob"] = id.dob->str();
    if (id.stated_income) j["stated_income"] = id.stated_income->dollars();
    return j;
}

}  // namespace incv::datagen
