#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <incomever/datagen.hpp>
#include <incomever/extract.hpp>

using namespace incv;
using namespace incv::datagen;
namespace fs = std::filesystem;

namespace {

const std::string kData = INCV_DATA_DIR;

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("incv-datagen-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

SynthConfig small_config(std::uint64_t seed) {
    SynthConfig c;
    c.n_rows = 120;
    c.test_rows = 40;
    c.external_text_rows = 50;
    c.seed = seed;
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// H-1B ingestion

TEST(Ingest, FixtureRows) {
    const auto map = ColumnMap::load(kData + "/fixtures/hib_column_map.json");
    const auto r = ingest_hib(kData + "/fixtures/hib_sample.csv", map);
    EXPECT_EQ(r.data_rows, 7u);
    EXPECT_EQ(r.examples.size() + r.skipped, r.data_rows);
    EXPECT_EQ(r.skip_reasons.size(), r.skipped);
    std::map<std::string, double> by_title;
    for (const auto& e : r.examples) by_title[e.identity.job_title] = e.true_income.dollars();
    EXPECT_EQ(by_title.at("Data Scientist"), 93600.0);
    EXPECT_EQ(by_title.at("Software Engineer"), 91000.0);
    EXPECT_EQ(by_title.at("Registered Nurse"), 78000.0);
    EXPECT_EQ(by_title.at("Product Manager"), 108000.0);
    EXPECT_FALSE(by_title.count("Business Analyst"));
    EXPECT_FALSE(by_title.count("Accountant"));
    EXPECT_FALSE(by_title.count("Mechanical Engineer"));
    for (const auto& e : r.examples) {
        EXPECT_FALSE(e.identity.stated_income.has_value());
        EXPECT_GT(e.true_income.dollars(), 0.0);
    }
    EXPECT_EQ(r.examples.front().identity.address.state, std::optional<std::string>("TX"));
}

TEST(Ingest, HeaderMismatchIsConfigError) {
    const auto map = ColumnMap::load(kData + "/fixtures/hib_column_map.json");
    EXPECT_THROW(ingest_hib_text("EMPLOYER_NAME,JOB_TITLE\nA,B\n", map), ConfigError);
    EXPECT_THROW(ingest_hib(kData + "/fixtures/does_not_exist.csv", map), IoError);
    json dup = json::parse(R"({"employer_col":"A","title_col":"A","city_col":"C","state_col":"D","wage_col":"E","wage_unit_col":"F"})");
    EXPECT_THROW(ColumnMap::from_json(dup), ConfigError);
}

TEST(Ingest, SampleIsSeededSubset) {
    Dataset all;
    for (int i = 0; i < 50; ++i) {
        LabeledExample e;
        e.identity.id = "x" + std::to_string(i);
        e.true_income = Money::from_dollars(1000 + i);
        all.push_back(e);
    }
    const auto a = sample_examples(all, 10, 3), b = sample_examples(all, 10, 3);
    ASSERT_EQ(a.size(), 10u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].identity.id, b[i].identity.id);
    EXPECT_EQ(sample_examples(all, 99, 3).size(), 50u);
}

// ---------------------------------------------------------------------------
// Synthetic generator

TEST(Synth, Deterministic) {
    const auto a = generate_synthetic(small_config(11)), b = generate_synthetic(small_config(11));
    EXPECT_EQ(dataset_to_csv(a.train), dataset_to_csv(b.train));
    EXPECT_EQ(dataset_to_csv(a.test), dataset_to_csv(b.test));
    EXPECT_EQ(corpus_to_jsonl(a.corpus), corpus_to_jsonl(b.corpus));
    EXPECT_EQ(labels_to_csv(a.match_labels), labels_to_csv(b.match_labels));
    EXPECT_EQ(text_rows_to_csv(a.external_text), text_rows_to_csv(b.external_text));
    EXPECT_NE(dataset_to_csv(generate_synthetic(small_config(12)).train), dataset_to_csv(a.train));
}

TEST(Synth, ZeroNoiseStatesTheTruth) {
    auto c = small_config(5);
    c.corruption.alias_noise = 0.0;
    c.corruption.income_inflation_rate = 0.0;
    c.corruption.stated_noise = 0.0;
    const auto s = generate_synthetic(c);
    for (const auto* ds : {&s.train, &s.test})
        for (const auto& e : *ds) {
            ASSERT_TRUE(e.identity.stated_income.has_value());
            EXPECT_EQ(*e.identity.stated_income, e.true_income) << e.identity.id;
        }
}

TEST(Synth, InflationRateIsRespected) {
    auto c = small_config(6);
    c.n_rows = 2000;
    c.corruption.stated_noise = 0.0;
    const auto s = generate_synthetic(c);
    std::size_t inflated = 0;
    for (const auto& e : s.train) {
        const double ratio = e.identity.stated_income->dollars() / e.true_income.dollars();
        if (ratio > 1.0 + 1e-9) {
            ++inflated;
            EXPECT_GE(ratio, c.corruption.inflation_low - 1e-6);
            EXPECT_LE(ratio, c.corruption.inflation_high + 1e-6);
        } else {
            EXPECT_NEAR(ratio, 1.0, 1e-6);
        }
    }
    EXPECT_NEAR(static_cast<double>(inflated) / 2000.0, 0.25, 0.03);
}

TEST(Synth, LabelsReferToRealRowsAndRecords) {
    const auto s = generate_synthetic(small_config(7));
    std::set<std::string> ids, recs;
    for (const auto* ds : {&s.train, &s.test})
        for (const auto& e : *ds) ids.insert(e.identity.id);
    for (const auto& r : s.corpus.records) EXPECT_TRUE(recs.insert(r.id).second) << "duplicate " << r.id;
    std::set<std::string> positive;
    for (const auto& l : s.match_labels) {
        EXPECT_TRUE(ids.count(l.identity_id));
        EXPECT_TRUE(recs.count(l.record_id));
        if (l.label == 1) positive.insert(l.identity_id);
    }
    ASSERT_GE(small_config(7).min_sources(), 1u);
    for (const auto& id : ids) EXPECT_TRUE(positive.count(id)) << id;
}

TEST(Synth, RejectsInvalidConfig) {
    auto c = small_config(1);
    c.corruption.alias_noise = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_config(1);
    c.n_rows = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(SynthConfig::from_json(json::parse(R"({"titles":["Astronaut Wizard"]})")), ConfigError);
}

TEST(Synth, Table6Moments) {
    SynthConfig c;
    c.external_text_rows = 10;
    const auto s = generate_synthetic(c);
    ASSERT_EQ(s.train.size(), 3108u);
    double sum = 0.0;
    for (const auto& e : s.train) sum += e.true_income.dollars();
    const double mean = sum / 3108.0;
    double ss = 0.0;
    for (const auto& e : s.train) ss += (e.true_income.dollars() - mean) * (e.true_income.dollars() - mean);
    const double sd = std::sqrt(ss / 3107.0);
    EXPECT_LT(std::abs(mean - 77571.760) / 77571.760, 0.02);
    EXPECT_LT(std::abs(sd - 57979.323) / 57979.323, 0.05);
}

TEST(Synth, CsvRoundTrip) {
    const auto s = generate_synthetic(small_config(9));
    const auto csv = dataset_to_csv(s.train);
    EXPECT_EQ(dataset_to_csv(dataset_from_csv(csv)), csv);
    const auto dir = scratch_dir("write");
    const auto files = write_synthetic(s, dir.string());
    for (const auto& f : files) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto loaded = load_corpus((dir / "corpus").string());
    EXPECT_TRUE(loaded.errors.empty());
    EXPECT_EQ(loaded.corpus.records.size(), s.corpus.records.size());
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Corpus loading

TEST(LoadCorpus, EmptyDirectory) {
    const auto dir = scratch_dir("empty");
    const auto r = load_corpus(dir.string());
    EXPECT_TRUE(r.corpus.records.empty());
    EXPECT_TRUE(r.errors.empty());
    fs::remove_all(dir);
    EXPECT_THROW(load_corpus(dir.string()), IoError);
}

TEST(LoadCorpus, Table2Record) {
    const auto r = load_corpus(kData + "/fixtures/table2_gov");
    ASSERT_TRUE(r.errors.empty());
    const auto it = std::find_if(r.corpus.records.begin(), r.corpus.records.end(), [](const RawRecord& x) { return x.id == "gov-bond"; });
    ASSERT_NE(it, r.corpus.records.end());
    const auto rec = extract::extract_record(*it, extract::PathSpecs::load(kData + "/path_specs.json"),
                                             extract::PatternSet::load(kData + "/patterns.json"));
    EXPECT_EQ(rec.attributes[extract::Attr::base_median], Money::from_dollars(73482));
    EXPECT_EQ(rec.attributes[extract::Attr::total_median], Money::from_dollars(73482));
}

TEST(LoadCorpus, MalformedLineIsReported) {
    const auto dir = scratch_dir("malformed");
    write_text(dir / "a.jsonl",
               "{\"id\":\"r1\",\"source_type\":\"snippet\",\"payload\":{\"text\":\"x\"}}\n"
               "{not json\n"
               "{\"id\":\"r2\",\"source_type\":\"weird\",\"payload\":{}}\n");
    const auto r = load_corpus(dir.string());
    ASSERT_EQ(r.corpus.records.size(), 1u);
    ASSERT_EQ(r.errors.size(), 2u);
    EXPECT_EQ(r.errors[0].line, 2u);
    EXPECT_EQ(r.errors[1].line, 3u);
    fs::remove_all(dir);
}

TEST(LoadCorpus, DuplicateIdNamesBothFiles) {
    const auto dir = scratch_dir("dup");
    const std::string line = "{\"id\":\"same\",\"source_type\":\"snippet\",\"payload\":{\"text\":\"x\"}}\n";
    write_text(dir / "a.jsonl", line);
    write_text(dir / "b.jsonl", line);
    try {
        load_corpus(dir.string());
        ADD_FAILURE() << "expected InputError";
    } catch (const InputError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("a.jsonl"), std::string::npos);
        EXPECT_NE(msg.find("b.jsonl"), std::string::npos);
    }
    fs::remove_all(dir);
}
