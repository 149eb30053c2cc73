#include <gtest/gtest.h>

#include <set>

#include <incomever/datagen.hpp>
#include <incomever/retrieval.hpp>

#include "support/oracles.hpp"

using namespace incv;
using namespace incv::retrieval;

namespace {

IndustryTable shipped_industries() { return IndustryTable::load(std::string(INCV_DATA_DIR) + "/industry_table.csv"); }

SourceCorpus toy_corpus() { return datagen::load_corpus(std::string(INCV_DATA_DIR) + "/fixtures/toy_corpus").corpus; }

std::vector<std::string> texts(const SourceCorpus& c) {
    std::vector<std::string> out;
    for (const auto& r : c.records) out.push_back(index_text(r));
    return out;
}

SourceCorpus random_corpus(Rng& rng, std::size_t n) {
    static const std::vector<std::string> vocab = {"software", "engineer", "salary", "xyz", "company", "nurse",
                                                   "teacher",  "senior",   "acme",   "travel", "agent", "manager"};
    SourceCorpus c;
    for (std::size_t i = 0; i < n; ++i) {
        std::string t;
        const auto len = 1 + rng.below(12);
        for (std::size_t k = 0; k < len; ++k) t += vocab[rng.below(vocab.size())] + " ";
        char id[16];
        std::snprintf(id, sizeof id, "r%03zu", i);
        c.records.push_back({id, SourceType::snippet, {{"text", t}}});
    }
    return c;
}

}  // namespace

TEST(Industry, ShippedTableLookups) {
    const auto t = shipped_industries();
    EXPECT_EQ(infer_industry("General Electric", t), "Manufacturing");
    EXPECT_EQ(infer_industry("United States Postal Service", t), "Government");
    EXPECT_EQ(infer_industry("Zyxcorp LLC", t), std::nullopt);
    EXPECT_EQ(infer_industry("General Electric", IndustryTable{}), std::nullopt);
}

TEST(Queries, Table5Templates) {
    const auto q = build_queries("XYZ Company", "Software Engineer", std::string("Travel"));
    ASSERT_EQ(q.size(), 3u);
    EXPECT_EQ(q[0].text, "XYZ Company Software Engineer Salary");
    EXPECT_EQ(q[1].text, "Software Engineer Salary");
    EXPECT_EQ(q[2].text, "Travel Software Engineer Salary");
    EXPECT_EQ(q[0].tier, Tier::employer_title);
    EXPECT_EQ(q[1].tier, Tier::title_only);
    EXPECT_EQ(q[2].tier, Tier::industry_title);
    EXPECT_EQ(build_queries("XYZ Company", "Software Engineer", std::nullopt).size(), 2u);
}

TEST(Search, EmptyCorpus) {
    const auto idx = CorpusIndex::build(SourceCorpus{});
    EXPECT_TRUE(search(idx, "software engineer", 5).empty());
}

TEST(Search, ToyCorpusEmployerRecordRanksFirst) {
    SourceCorpus c;
    c.records = {{"a", SourceType::snippet, {{"text", "Software engineers earn well at Globex"}}},
                 {"b", SourceType::snippet, {{"text", "XYZ Company pays software engineers"}}},
                 {"c", SourceType::snippet, {{"text", "Company picnic photos"}}},
                 {"d", SourceType::snippet, {{"text", "Nurse salary survey"}}},
                 {"e", SourceType::snippet, {{"text", "XYZ is a ticker symbol"}}}};
    const auto idx = CorpusIndex::build(c);
    const auto hits = search(idx, "XYZ Company Software Engineer Salary", 5);
    ASSERT_FALSE(hits.empty());
    EXPECT_EQ(hits[0].id, "b");
    auto scan = oracle::bm25_scan(texts(c), "XYZ Company Software Engineer Salary");
    std::sort(scan.begin(), scan.end(), [](auto x, auto y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    ASSERT_EQ(scan.size(), hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        EXPECT_EQ(hits[i].id, c.records[scan[i].second].id);
        EXPECT_NEAR(hits[i].score, scan[i].first, 1e-9);
    }
}

TEST(Search, MatchesLinearScanOnRandomCorpora) {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const auto c = random_corpus(rng, 1 + rng.below(50));
        const auto idx = CorpusIndex::build(c);
        const auto docs = texts(c);
        for (const char* q : {"software engineer salary", "xyz company nurse", "senior senior manager", "unknown words"}) {
            const std::size_t k = 1 + rng.below(8);
            const auto hits = search(idx, q, k);
            auto scan = oracle::bm25_scan(docs, q);
            std::sort(scan.begin(), scan.end(),
                      [&](auto x, auto y) { return x.first != y.first ? x.first > y.first : c.records[x.second].id < c.records[y.second].id; });
            ASSERT_EQ(hits.size(), std::min(k, scan.size()));
            for (std::size_t i = 0; i < hits.size(); ++i) {
                EXPECT_NEAR(hits[i].score, scan[i].first, 1e-9);
                EXPECT_EQ(hits[i].id, c.records[scan[i].second].id);
            }
            // Every returned score is at least every non-returned score.
            if (!hits.empty() && scan.size() > hits.size()) EXPECT_GE(hits.back().score + 1e-12, scan[hits.size()].first);
        }
    }
}

TEST(Search, Deterministic) {
    Rng rng(1);
    const auto c = random_corpus(rng, 30);
    const auto a = search(CorpusIndex::build(c), "software salary", 10);
    const auto b = search(CorpusIndex::build(c), "software salary", 10);
    EXPECT_EQ(a, b);
}

TEST(Search, IndexRoundTrip) {
    Rng rng(2);
    const auto c = random_corpus(rng, 20);
    const auto idx = CorpusIndex::build(c);
    const auto back = CorpusIndex::from_json(idx.to_json());
    EXPECT_EQ(search(idx, "teacher agent", 7), search(back, "teacher agent", 7));
}

TEST(Candidates, ToyCorpusHandEnumeratedUnion) {
    const auto c = toy_corpus();
    const auto idx = CorpusIndex::build(c);
    const auto cands = retrieve_candidates("XYZ Company", "Software Engineer", idx, shipped_industries());
    // Records sharing a term with "XYZ Company Software Engineer Salary"; the
    // later tiers only re-hit these, so all stay tier 1.
    const std::set<std::string> expected = {"site-xyz", "snip-avg", "snip-range", "snip-industry", "snip-hiring"};
    std::set<std::string> got;
    for (const auto& cd : cands) {
        EXPECT_TRUE(got.insert(cd.id).second) << "duplicate " << cd.id;
        EXPECT_EQ(cd.tier, Tier::employer_title);
    }
    EXPECT_EQ(got, expected);
    for (std::size_t i = 1; i < cands.size(); ++i) EXPECT_GE(cands[i - 1].score, cands[i].score);
}

TEST(Candidates, TierAttributionAndMiss) {
    SourceCorpus c;
    c.records = {{"a", SourceType::snippet, {{"text", "Nurse salary in Ohio"}}},
                 {"b", SourceType::snippet, {{"text", "Acme Widgets nurse pay"}}},
                 {"c", SourceType::snippet, {{"text", "Healthcare nurse overview"}}}};
    const auto idx = CorpusIndex::build(c);
    IndustryTable t;
    t.add("Acme Widgets", "Healthcare");
    RetrievalConfig cfg;
    cfg.per_query_k = 1;
    const auto cands = retrieve_candidates("Acme Widgets", "Nurse", idx, t, cfg);
    ASSERT_EQ(cands.size(), 3u);
    EXPECT_EQ(cands[0].id, "b");
    EXPECT_EQ(cands[0].tier, Tier::employer_title);
    EXPECT_EQ(cands[1].tier, Tier::title_only);
    EXPECT_EQ(cands[2].id, "c");
    EXPECT_EQ(cands[2].tier, Tier::industry_title);
    SourceCorpus plain;
    plain.records = {c.records[1], c.records[2]};
    EXPECT_TRUE(retrieve_candidates("Zzz", "Qqq", CorpusIndex::build(plain), t).empty());
}
