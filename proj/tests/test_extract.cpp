#include <gtest/gtest.h>

#include <incomever/datagen.hpp>
#include <incomever/extract.hpp>

using namespace incv;
using namespace incv::extract;

namespace {

const std::string kData = INCV_DATA_DIR;

PathSpecs specs() { return PathSpecs::load(kData + "/path_specs.json"); }
PatternSet patterns() { return PatternSet::load(kData + "/patterns.json"); }

Money usd(double d) { return Money::from_dollars(d); }

}  // namespace

TEST(MoneyText, PaperValues) {
    EXPECT_EQ(parse_money_text("$73,482"), usd(73482));
    EXPECT_EQ(parse_money_text("1,000,000"), usd(1000000));
    EXPECT_EQ(parse_money_text("salary information"), std::nullopt);
    EXPECT_EQ(parse_money_text("$10000"), usd(10000));
}

TEST(Structured, Table2Rows) {
    const auto loaded = datagen::load_corpus(kData + "/fixtures/table2_gov");
    ASSERT_TRUE(loaded.errors.empty());
    ASSERT_EQ(loaded.corpus.records.size(), 2u);
    const auto& bond_raw = loaded.corpus.records[0];
    EXPECT_EQ(bond_raw.id, "gov-bond");
    const auto bond = extract_structured(bond_raw.id, bond_raw.payload);
    EXPECT_FALSE(bond.discardable);
    EXPECT_EQ(bond.attributes[base_median], usd(73482));
    EXPECT_EQ(bond.attributes[total_median], usd(73482));
    EXPECT_EQ(bond.fragment.name, "James Bond");
    EXPECT_EQ(bond.fragment.occupation, "Medical Technologist");
    EXPECT_EQ(bond.fragment.year, 2016);
    const auto potter = extract_structured("gov-potter", loaded.corpus.records[1].payload);
    EXPECT_EQ(potter.attributes[base_median], usd(84443));
    EXPECT_EQ(potter.attributes[total_median], usd(94443));
}

TEST(Structured, UnparsableSalaryIsDiscardable) {
    const auto r = extract_structured("x", {{"name", "A B"}, {"salary", "N/A"}});
    EXPECT_TRUE(r.discardable);
    EXPECT_FALSE(r.discard_reason.empty());
}

TEST(Wrapper, Table3Document) {
    const auto doc = csv::read_file(kData + "/fixtures/table3_paysite.xml");
    const auto r = extract_wrapper("site-1", "paysite", doc, specs());
    EXPECT_FALSE(r.discardable);
    EXPECT_EQ(r.attributes[base_low], usd(90000));
    EXPECT_EQ(r.attributes[base_median], usd(150000));
    EXPECT_EQ(r.attributes[base_high], usd(234000));
    EXPECT_EQ(r.attributes[total_low], usd(90000));
    EXPECT_EQ(r.attributes[total_median], usd(265000));
    EXPECT_EQ(r.attributes[total_high], usd(1000000));
    EXPECT_EQ(r.fragment.employer, "XYZ Company");
    EXPECT_EQ(r.fragment.occupation, "Software Engineer");
}

TEST(Wrapper, MissingPathLeavesAttributeAbsent) {
    const auto r = extract_wrapper("s", "paysite",
                                   "<salary-report><company>Acme</company><base><mean>50,000</mean></base></salary-report>", specs());
    EXPECT_EQ(r.attributes[base_median], usd(50000));
    EXPECT_FALSE(r.attributes[base_low]);
    EXPECT_FALSE(r.attributes[total_median]);
    EXPECT_FALSE(r.fragment.occupation);
    EXPECT_FALSE(r.discardable);
}

TEST(Wrapper, AttributePaths) {
    const auto r = extract_wrapper(
        "s", "compsite",
        "<page><meta name=\"employer\" value=\"Globex\"/><meta name=\"industry\" value=\"Travel\"/>"
        "<pay kind=\"base\" low=\"38000\" median=\"45000\" high=\"56000\"/></page>",
        specs());
    EXPECT_EQ(r.fragment.employer, "Globex");
    EXPECT_EQ(r.fragment.industry, "Travel");
    EXPECT_EQ(r.attributes[base_low], usd(38000));
    EXPECT_EQ(r.attributes[base_high], usd(56000));
}

TEST(Wrapper, EmptyDocumentIsDiscardable) {
    EXPECT_TRUE(extract_wrapper("s", "paysite", "", specs()).discardable);
    EXPECT_TRUE(extract_wrapper("s", "paysite", "   ", specs()).discardable);
}

TEST(Wrapper, OrderingViolationIsDiscarded) {
    const auto r = extract_wrapper(
        "s", "paysite", "<salary-report><base><mean>50,000</mean><min>60,000</min></base></salary-report>", specs());
    EXPECT_TRUE(r.discardable);
    EXPECT_FALSE(r.attributes.any());
}

TEST(Pattern, AveragePlain) {
    const auto r = extract_pattern("p", "The average Software Engineer salary is $100,000", patterns());
    ASSERT_TRUE(r);
    EXPECT_EQ(r->attributes[base_median], usd(100000));
    EXPECT_EQ(r->fragment.occupation, "Software Engineer");
}

TEST(Pattern, RangePlain) {
    const auto r = extract_pattern("p", "salaries range from $90,000 to $234,000", patterns());
    ASSERT_TRUE(r);
    EXPECT_EQ(r->attributes[base_low], usd(90000));
    EXPECT_EQ(r->attributes[base_high], usd(234000));
}

TEST(Pattern, NoSalaryNoRecord) { EXPECT_FALSE(extract_pattern("p", "We are hiring engineers", patterns())); }

TEST(Pattern, EmployerAndIndustryForms) {
    const auto p = patterns();
    const auto a = extract_pattern("p", "The average Software Engineer salary at XYZ Company is $140,000 per year.", p);
    ASSERT_TRUE(a);
    EXPECT_EQ(a->fragment.employer, "XYZ Company");
    EXPECT_EQ(a->attributes[base_median], usd(140000));
    const auto b = extract_pattern("p", "The average Software Engineer salary in the Technology industry is $120,000.", p);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->fragment.industry, "Technology");
}

TEST(Record, JsonRoundTrip) {
    const auto doc = csv::read_file(kData + "/fixtures/table3_paysite.xml");
    const auto r = extract_wrapper("site-1", "paysite", doc, specs());
    EXPECT_EQ(record_from_json(to_json(r)), r);
    const auto g = extract_structured("g", {{"name", "James Bond"}, {"salary", "$73,482"}, {"bonus", "$0"}, {"year", 2016}});
    EXPECT_EQ(record_from_json(to_json(g)), g);
}

TEST(Record, ToyCorpusExtractsDeterministically) {
    const auto c = datagen::load_corpus(kData + "/fixtures/toy_corpus").corpus;
    const auto s = specs();
    const auto p = patterns();
    std::size_t discardable = 0;
    for (const auto& raw : c.records) {
        const auto a = extract_record(raw, s, p);
        EXPECT_EQ(a, extract_record(raw, s, p));
        discardable += a.discardable;
        EXPECT_FALSE(a.attributes.ordering_violation());
    }
    EXPECT_EQ(discardable, 1u);  // the hiring snippet
}
