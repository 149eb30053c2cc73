#include <gtest/gtest.h>

#include <incomever/canon.hpp>
#include <incomever/rng.hpp>
#include <incomever/world.hpp>

#include "support/oracles.hpp"
#include "support/samples.hpp"

using namespace incv;
using canon::Kind;

namespace {

canon::AliasTable shipped_table() { return canon::AliasTable::load(std::string(INCV_DATA_DIR) + "/alias_table.csv"); }

}  // namespace

TEST(KeyNormalize, StatedRule) {
    EXPECT_EQ(text::key_normalize("U.S.P.S"), "usps");
    EXPECT_EQ(text::key_normalize("  Sr.   Manager "), "sr manager");
}

TEST(KeyNormalize, Idempotent) {
    Rng rng(5);
    for (int i = 0; i < 2000; ++i) {
        const auto s = samples::alias_text(rng);
        EXPECT_EQ(text::key_normalize(text::key_normalize(s)), text::key_normalize(s));
    }
}

TEST(Levenshtein, KittenSitting) {
    EXPECT_EQ(text::levenshtein("kitten", "sitting"), 3u);
    EXPECT_NEAR(text::edit_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0, 1e-12);
}

TEST(Levenshtein, MatchesExhaustiveSearchOnShortStrings) {
    // Lengths <= 4 here; the acceptance binary covers the full length-6 space.
    const auto strings = oracle::all_strings("abc", 4);
    for (const auto& a : strings) {
        const auto dist = oracle::edit_bfs(a, "abc", 4);
        for (const auto& b : strings) ASSERT_EQ(text::levenshtein(a, b), static_cast<std::size_t>(dist.at(b))) << a << " " << b;
    }
}

TEST(Canonicalize, Table4Rows) {
    const auto t = shipped_table();
    EXPECT_EQ(canon::canonicalize("U.S.P.S", Kind::employer, t), "United States Postal Service");
    EXPECT_EQ(canon::canonicalize("U.S. Postal Service", Kind::employer, t), "United States Postal Service");
    EXPECT_EQ(canon::canonicalize("GE", Kind::employer, t), "General Electric");
    EXPECT_EQ(canon::canonicalize("G.E", Kind::employer, t), "General Electric");
    EXPECT_EQ(canon::canonicalize("Acc. Manager", Kind::title, t), "Account Manager");
    EXPECT_EQ(canon::canonicalize("Sr. Manager", Kind::title, t), "Senior Manager");
    EXPECT_EQ(canon::canonicalize("Snr. Manager", Kind::title, t), "Senior Manager");
}

TEST(Canonicalize, MissPassesThrough) {
    EXPECT_EQ(canon::canonicalize("Zyxcorp LLC", Kind::employer, shipped_table()), "Zyxcorp LLC");
}

TEST(Canonicalize, ShippedFileEqualsBuiltInTable) {
    EXPECT_EQ(shipped_table().to_csv(), world::default_alias_table().to_csv());
}

TEST(Canonicalize, IdempotentAndNonEmpty) {
    const auto t = shipped_table();
    Rng rng(17);
    for (int i = 0; i < 10000; ++i) {
        const auto s = samples::alias_text(rng);
        for (auto k : {Kind::employer, Kind::title}) {
            const auto once = canon::canonicalize(s, k, t);
            ASSERT_EQ(canon::canonicalize(once, k, t), once) << "'" << s << "'";
            if (!s.empty()) ASSERT_FALSE(once.empty());
        }
    }
}

TEST(AliasTable, RejectsNonFixedPointTable) {
    canon::AliasTable t;
    t.add_token(Kind::title, "sr", "Senior");
    t.add_entry(Kind::title, "lead", "Sr Lead");
    EXPECT_THROW(t.validate(), ConfigError);
    EXPECT_THROW(canon::AliasTable::parse_csv("kind,raw,canonical\nbogus,a,b\n"), ConfigError);
}
