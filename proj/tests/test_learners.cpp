#include <gtest/gtest.h>

#include <incomever/learners/bow.hpp>
#include <incomever/learners/ffn.hpp>
#include <incomever/learners/gbt.hpp>
#include <incomever/learners/lstm.hpp>
#include <incomever/learners/word2vec.hpp>

#include "support/oracles.hpp"
#include "support/samples.hpp"

using namespace incv;
using namespace incv::learners;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

Embeddings toy_embeddings(Rng& rng, std::size_t vocab, std::size_t d) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < vocab; ++i) words.push_back("w" + std::to_string(i));
    return Embeddings(words, random_matrix(rng, static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(d)));
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

// ---------------------------------------------------------------------------
// word2vec

TEST(Word2Vec, Deterministic) {
    const std::vector<std::vector<std::string>> s = {{"senior", "software", "engineer"}, {"software", "developer"}, {"head", "chef"}};
    Word2VecParams p;
    p.dim = 8;
    p.epochs = 5;
    EXPECT_EQ(train_word_vectors(s, p).matrix(), train_word_vectors(s, p).matrix());
}

TEST(Word2Vec, SharedContextsAreCloser) {
    std::vector<std::vector<std::string>> s;
    for (int i = 0; i < 200; ++i) {
        s.push_back({"senior", "software", "engineer", "team"});
        s.push_back({"senior", "software", "developer", "team"});
        s.push_back({"kitchen", "head", "chef", "restaurant"});
    }
    Word2VecParams p;
    p.dim = 16;
    p.epochs = 10;
    p.seed = 42;
    const auto e = train_word_vectors(s, p);
    EXPECT_GT(cosine(e.vector("engineer"), e.vector("developer")), cosine(e.vector("engineer"), e.vector("chef")));
}

TEST(Word2Vec, SingleTokenCorpus) {
    Word2VecParams p;
    p.dim = 4;
    const auto e = train_word_vectors({{"solo"}}, p);
    EXPECT_EQ(e.size(), 1u);
    EXPECT_TRUE(e.matrix().allFinite());
}

TEST(Word2Vec, MeanOfCopiesIsTheVector) {
    Rng rng(1);
    const auto e = toy_embeddings(rng, 3, 5);
    EXPECT_TRUE(e.mean_of({"w1", "w1", "w1"}).isApprox(e.vector("w1")));
    EXPECT_TRUE(Embeddings::from_json(e.to_json()).matrix().isApprox(e.matrix()));
}

// ---------------------------------------------------------------------------
// Bag of words

TEST(Bow, CountsAndDimension) {
    const std::vector<RedactedIdentity> train = {{"Acme Corp", "software software engineer", "Austin", "TX"},
                                                 {"Globex", "chef", "Boston", "MA"}};
    const auto f = BowFeaturizer::fit(train);
    const auto x = bow_featurize(f, train[0]);
    EXPECT_EQ(x.size(), 402);
    const auto& words = f.title_words();
    const auto pos = std::find(words.begin(), words.end(), "software") - words.begin();
    EXPECT_EQ(x(pos), 2.0);
    const auto unseen = bow_featurize(f, {"Zzz", "qqq", "Austin", "TX"});
    EXPECT_EQ(unseen.head(400).sum(), 0.0);
    EXPECT_NE(unseen(BowFeaturizer::kCityIndex), 0.0);
    EXPECT_NE(unseen(BowFeaturizer::kStateIndex), 0.0);
}

TEST(Bow, AlwaysLength402) {
    Rng rng(3);
    std::vector<RedactedIdentity> train;
    for (int i = 0; i < 300; ++i)
        train.push_back({"emp" + std::to_string(rng.below(500)) + " co", "t" + std::to_string(rng.below(500)) + " x", "c", "CA"});
    const auto f = BowFeaturizer::fit(train);
    EXPECT_EQ(f.title_words().size(), 200u);
    for (const auto& r : train) ASSERT_EQ(bow_featurize(f, r).size(), 402);
    EXPECT_EQ(BowFeaturizer::from_json(f.to_json()).featurize(train[5]), f.featurize(train[5]));
}

// ---------------------------------------------------------------------------
// Feed-forward network

TEST(FFN, ZeroOutputLayerPredictsBias) {
    Rng rng(1);
    auto p = FFNParams::init({4, 6, 1}, rng, true);
    p.b.back()(0) = 3.25;
    const auto out = p.predict(random_matrix(rng, 10, 4));
    for (Eigen::Index i = 0; i < out.size(); ++i) EXPECT_EQ(out(i), 3.25);
}

TEST(FFN, GradientsMatchFiniteDifferences) {
    for (double e : samples::ffn_gradient_errors(20, 2024)) EXPECT_LT(e, 1e-4);
}

TEST(FFN, ConstantTargetConverges) {
    Rng rng(7);
    const auto X = random_matrix(rng, 64, 5);
    const std::vector<double> y(64, 50000.0);
    FFNTrainConfig cfg;
    cfg.hidden = {8};
    cfg.epochs = 200;
    cfg.seed = 7;
    cfg.learning_rate = 0.003;
    const auto res = ffn_train(X, y, cfg);
    EXPECT_LT(res.loss_trace.back(), 0.01 * 50000.0);
}

TEST(FFN, Deterministic) {
    Rng rng(9);
    const auto X = random_matrix(rng, 40, 3);
    std::vector<double> y;
    for (int i = 0; i < 40; ++i) y.push_back(1000.0 + 100.0 * X(i, 0) * X(i, 0));
    FFNTrainConfig cfg;
    cfg.hidden = {6, 4};
    cfg.epochs = 20;
    EXPECT_EQ(ffn_train(X, y, cfg).params.to_json(), ffn_train(X, y, cfg).params.to_json());
}

// ---------------------------------------------------------------------------
// LSTM

TEST(LSTM, TrainModeWithoutDropoutMatchesEval) {
    Rng rng(5);
    const auto emb = toy_embeddings(rng, 6, 4);
    const auto p = LSTMParams::init(4, 5, 7, 0.0, rng);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(5);
    const TokenSequence seq{0, 3, 2};
    EXPECT_EQ(lstm_forward(p, emb, seq, &ones), lstm_forward(p, emb, seq, nullptr));
}

TEST(LSTM, GradientsMatchFiniteDifferences) {
    for (double e : samples::lstm_gradient_errors(20, 77)) EXPECT_LT(e, 1e-4);
}

TEST(LSTM, RepeatedTokensStayFinite) {
    Rng rng(8);
    const auto emb = toy_embeddings(rng, 3, 4);
    const auto p = LSTMParams::init(4, 8, 8, 0.5, rng);
    EXPECT_TRUE(std::isfinite(lstm_predict(p, emb, {1})));
    EXPECT_TRUE(std::isfinite(lstm_predict(p, emb, TokenSequence(16, 1))));
    EXPECT_TRUE(std::isfinite(lstm_predict(p, emb, {})));
}

TEST(LSTM, TrainingIsDeterministic) {
    Rng rng(10);
    const auto emb = toy_embeddings(rng, 6, 4);
    std::vector<TokenSequence> seqs;
    std::vector<double> y;
    for (int i = 0; i < 30; ++i) {
        seqs.push_back({static_cast<int>(rng.below(6)), static_cast<int>(rng.below(6))});
        y.push_back(40000.0 + 10000.0 * seqs.back()[0]);
    }
    LSTMTrainConfig cfg;
    cfg.hidden = 6;
    cfg.dense = 5;
    cfg.epochs = 3;
    const auto a = lstm_regress_train(seqs, emb, y, cfg);
    const auto b = lstm_regress_train(seqs, emb, y, cfg);
    EXPECT_EQ(a.params.to_json(), b.params.to_json());
    EXPECT_EQ(a.embeddings.matrix(), b.embeddings.matrix());
}

// ---------------------------------------------------------------------------
// Gradient boosting

TEST(GBT, ZeroRoundsPredictsMean) {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    const std::vector<double> y{10, 20, 60};
    GbtParams p;
    p.rounds = 0;
    const auto e = gbt_train(X, y, p);
    for (double v : {0.0, 2.5, 9.0}) EXPECT_DOUBLE_EQ(gbt_predict(e, std::vector<double>{v}), 30.0);
}

TEST(GBT, SingleStumpHandTrace) {
    // x = 1,2,3,4 and y = 10,12,30,32: the best cut is x <= 2.5; means 11 and 31.
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    const std::vector<double> y{10, 12, 30, 32};
    GbtParams p;
    p.rounds = 1;
    p.max_depth = 1;
    p.learning_rate = 1.0;
    const auto e = gbt_train(X, y, p);
    ASSERT_EQ(e.trees.size(), 1u);
    EXPECT_DOUBLE_EQ(e.trees[0].nodes[0].threshold, 2.5);
    EXPECT_NEAR(gbt_predict(e, std::vector<double>{1.0}), 11.0, 1e-12);
    EXPECT_NEAR(gbt_predict(e, std::vector<double>{4.0}), 31.0, 1e-12);
    p.learning_rate = 0.5;
    const auto half = gbt_train(X, y, p);
    EXPECT_NEAR(gbt_predict(half, std::vector<double>{1.0}), 21.0 - 0.5 * 10.0, 1e-12);
}

TEST(GBT, DepthOneEqualsExhaustiveSplit) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const auto n = 2 + rng.below(29);
        const auto d = 1 + rng.below(4);
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        std::vector<double> y(n);
        Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < d; ++f) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = rows[i][f] = rng.uniform(0, 10);
            y[i] = rng.uniform(0, 1000);
        }
        GbtParams p;
        p.rounds = 1;
        p.max_depth = 1;
        p.learning_rate = 1.0;
        const auto e = gbt_train(X, y, p);
        const auto best = oracle::best_regression_split(rows, y);
        if (!best) {
            EXPECT_TRUE(e.trees.empty()) << "seed " << seed;
            continue;
        }
        ASSERT_EQ(e.trees.size(), 1u) << "seed " << seed;
        EXPECT_EQ(e.trees[0].nodes[0].feature, best->feature) << "seed " << seed;
        EXPECT_EQ(e.trees[0].nodes[0].threshold, best->threshold) << "seed " << seed;
        for (std::size_t i = 0; i < n; ++i) {
            const double want = rows[i][static_cast<std::size_t>(best->feature)] <= best->threshold ? best->left_mean : best->right_mean;
            EXPECT_NEAR(e.raw(rows[i]), want, 1e-9 * std::max(1.0, std::abs(want))) << "seed " << seed;
        }
    }
}

TEST(GBT, TrainingErrorNonIncreasing) {
    Rng rng(5);
    const Eigen::Index n = 200;
    Eigen::MatrixXd X = random_matrix(rng, n, 4);
    std::vector<double> y;
    for (Eigen::Index i = 0; i < n; ++i) y.push_back(100.0 + 30.0 * X(i, 0) - 10.0 * X(i, 1) * X(i, 2) + 5.0 * rng.normal());
    for (double eta : {0.1, 0.5, 1.0}) {
        GbtParams p;
        p.rounds = 50;
        p.max_depth = 3;
        p.learning_rate = eta;
        GbtTrace trace;
        gbt_train(X, y, p, &trace);
        for (std::size_t r = 1; r < trace.size(); ++r) EXPECT_LE(trace[r], trace[r - 1] * (1.0 + 1e-12)) << "eta " << eta;
    }
}

TEST(GBT, PredictionsNeverNegative) {
    Eigen::MatrixXd X(4, 1);
    X << 0, 1, 2, 3;
    const std::vector<double> y{-100, -50, 10, 20};
    GbtParams p;
    p.rounds = 10;
    p.learning_rate = 1.0;
    const auto e = gbt_train(X, y, p);
    for (double v : {0.0, 1.0, 2.0, 3.0}) EXPECT_GE(gbt_predict(e, std::vector<double>{v}), 0.0);
    EXPECT_EQ(GBTEnsemble::from_json(e.to_json()).to_json(), e.to_json());
}
