#include <gtest/gtest.h>

#include <incomever/match.hpp>
#include <incomever/rng.hpp>

#include "support/oracles.hpp"

using namespace incv;
using namespace incv::match;

namespace {

PersonName nm(const char* s) { return PersonName::parse(s); }

LabeledPair random_pair(Rng& rng, bool grid) {
    LabeledPair p;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        if (rng.bernoulli(0.2)) continue;
        p.features.set(static_cast<Feature>(f), grid ? static_cast<double>(rng.below(4)) / 3.0 : rng.uniform());
    }
    p.label = rng.bernoulli(0.5);
    return p;
}

}  // namespace

TEST(NameScore, IdenticalIsOne) {
    EXPECT_EQ(name_score(nm("James Ryan Smith"), nm("James Ryan Smith")), 1.0);
    EXPECT_EQ(name_score(nm("Ann Lee"), nm("ann  LEE")), 1.0);
}

TEST(NameScore, MiddleNameConflictPenalized) {
    const double conflict = name_score(nm("James Ryan Smith"), nm("James S Smith"));
    const double initial = name_score(nm("James Ryan Smith"), nm("James R Smith"));
    EXPECT_LT(conflict, initial);
    EXPECT_LT(initial, 1.0);
}

TEST(NameScore, EditDistanceBase) {
    EXPECT_NEAR(text::edit_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
    EXPECT_NEAR(name_score(nm("Jon Smith"), nm("John Smith")), 1.0 - 1.0 / 10.0, 1e-12);
}

TEST(NameScore, SymmetricAndBounded) {
    Rng rng(4);
    const std::vector<std::string> names = {"James Ryan Smith", "James S Smith", "Ann Lee", "Anne B Leigh", "Bo Li", "J R Smith", "X"};
    for (const auto& a : names)
        for (const auto& b : names) {
            const double ab = name_score(nm(a.c_str()), nm(b.c_str()));
            EXPECT_EQ(ab, name_score(nm(b.c_str()), nm(a.c_str())));
            EXPECT_GE(ab, 0.0);
            EXPECT_LE(ab, 1.0);
        }
}

TEST(AddressScore, IdenticalFullAddress) {
    Address a{"1 Main St", "Ames", "Story", "IA", "50010", "US"};
    const auto f = address_score(a, a);
    for (auto k : {f_city, f_street, f_county, f_zip, f_country}) {
        EXPECT_TRUE(f.present[k]);
        EXPECT_EQ(f.value[k], 1.0);
    }
}

TEST(AddressScore, ZipIsExactOnly) {
    Address a, b;
    a.zip = "94103";
    b.zip = "94104";
    const auto f = address_score(a, b);
    EXPECT_TRUE(f.present[f_zip]);
    EXPECT_EQ(f.value[f_zip], 0.0);
}

TEST(AddressScore, EmptyAddressesMaskEverything) {
    const auto f = address_score(Address{}, Address{});
    for (bool p : f.present) EXPECT_FALSE(p);
}

TEST(EmploymentSim, CosineCases) {
    extract::IdentityFragment frag;
    RedactedIdentity in{"Acme Corp", "Senior Software Engineer", "", ""};
    frag.employer = "Acme Corp";
    frag.occupation = "Software Engineer";
    auto s = employment_sim(in, frag);
    EXPECT_DOUBLE_EQ(*s.employer_cos, 1.0);
    // Direct computation: <1,1,1>.<0,1,1> / (sqrt(3) sqrt(2)).
    EXPECT_NEAR(*s.title_cos, 2.0 / std::sqrt(6.0), 1e-12);
    frag.employer = "Globex LLC";
    s = employment_sim(in, frag);
    EXPECT_EQ(*s.employer_cos, 0.0);
    EXPECT_DOUBLE_EQ(string_cosine("Software Engineer", "Senior Software Engineer"),
                     string_cosine("Senior Software Engineer", "Software Engineer"));
}

TEST(Matcher, SeparableSetIsLearnedExactly) {
    Rng rng(8);
    std::vector<LabeledPair> data;
    for (int i = 0; i < 200; ++i) {
        LabeledPair p;
        const double v = rng.uniform();
        p.features.set(f_name, v);
        p.features.set(f_city, rng.uniform());
        p.label = v > 0.5;
        data.push_back(p);
    }
    const auto tree = train_matcher(data);
    for (const auto& d : data) EXPECT_EQ(tree.predict(d.features) > 0.5, d.label == 1);
}

TEST(Matcher, DepthOneEqualsExhaustiveGiniSplit) {
    TreeParams params;
    params.max_depth = 1;
    params.min_leaf = 1;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const bool grid = seed % 2 == 0;
        std::vector<LabeledPair> data;
        const auto n = 2 + rng.below(29);
        for (std::size_t i = 0; i < n; ++i) data.push_back(random_pair(rng, grid));
        const auto best = oracle::best_gini_split(data, 1);
        std::size_t pos = 0;
        for (const auto& d : data) pos += d.label;
        const auto tree = train_matcher(data, params);
        const auto j = tree.to_json();
        const auto& root = j.at("nodes").at(0);
        if (pos == 0 || pos == n || !best) {
            EXPECT_EQ(tree.depth(), 0u) << "seed " << seed;
            continue;
        }
        ASSERT_EQ(tree.depth(), 1u) << "seed " << seed;
        EXPECT_EQ(root.at("feature").get<int>(), best->feature) << "seed " << seed;
        EXPECT_DOUBLE_EQ(root.at("threshold").get<double>(), best->threshold) << "seed " << seed;
        EXPECT_EQ(root.at("missing_left").get<bool>(), best->missing_left) << "seed " << seed;
    }
}

TEST(Matcher, PermutedInputGivesIdenticalTree) {
    Rng rng(21);
    std::vector<LabeledPair> data;
    for (int i = 0; i < 120; ++i) data.push_back(random_pair(rng, true));
    const auto a = train_matcher(data).to_json();
    rng.shuffle(data);
    EXPECT_EQ(train_matcher(data).to_json(), a);
}

TEST(Matcher, JsonRoundTrip) {
    Rng rng(22);
    std::vector<LabeledPair> data;
    for (int i = 0; i < 80; ++i) data.push_back(random_pair(rng, false));
    const auto t = train_matcher(data);
    const auto back = PairDecisionTree::from_json(t.to_json());
    for (const auto& d : data) EXPECT_EQ(back.predict(d.features), t.predict(d.features));
}

TEST(Bucket, Thresholds) {
    EXPECT_EQ(bucket_of(0.85), Bucket::high);
    EXPECT_EQ(bucket_of(0.8), Bucket::medium);
    EXPECT_EQ(bucket_of(0.5), Bucket::low);
    EXPECT_EQ(bucket_of(0.51), Bucket::medium);
}

TEST(Bucket, MonotoneSweep) {
    Bucket prev = Bucket::low;
    for (int i = 0; i <= 1000; ++i) {
        const auto b = bucket_of(i / 1000.0);
        EXPECT_GE(static_cast<int>(b), static_cast<int>(prev));
        if (i / 1000.0 > 0.8) EXPECT_EQ(b, Bucket::high);
        prev = b;
    }
}

TEST(BinaryScores, HandCounts) {
    const auto s = binary_scores({1, 1, 0, 0, 1}, {1, 0, 1, 0, 1});
    EXPECT_DOUBLE_EQ(s.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s.f1, 2.0 / 3.0);
}
