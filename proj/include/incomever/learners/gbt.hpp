#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "../core.hpp"

namespace incv::learners {

using json = nlohmann::json;

struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 = leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    std::vector<Node> nodes;

    template <class Row>
    double predict(const Row& x) const {
        std::size_t at = 0;
        while (nodes[at].feature >= 0) {
            const auto& n = nodes[at];
            at = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
        }
        return nodes[at].value;
    }

    std::size_t depth(std::size_t at = 0) const {
        if (nodes[at].feature < 0) return 0;
        return 1 + std::max(depth(static_cast<std::size_t>(nodes[at].left)), depth(static_cast<std::size_t>(nodes[at].right)));
    }

    bool is_stump_leaf() const { return nodes.size() == 1; }
};

struct GbtParams {
    std::size_t rounds = 100;
    std::size_t max_depth = 5;
    double learning_rate = 0.1;
    std::size_t min_leaf = 1;
};

/// Squared-loss gradient boosting: prediction = initial + learning_rate * sum(tree outputs).
class GBTEnsemble {
public:
    static constexpr int kFormatVersion = 1;

    double initial = 0.0;
    double learning_rate = 0.1;
    std::size_t max_depth = 5;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;

    /// Unclamped model output.
    template <class Row>
    double raw(const Row& x) const {
        double sum = 0.0;
        for (const auto& t : trees) sum += t.predict(x);
        return initial + learning_rate * sum;
    }

    /// Income-style prediction: never negative.
    double predict(std::span<const double> x) const {
        if (x.size() != n_features) throw ContractViolation("gbt_predict: feature dimension mismatch");
        return std::max(0.0, raw(x));
    }

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        if (static_cast<std::size_t>(x.size()) != n_features)
            throw ContractViolation("gbt_predict: feature dimension mismatch");
        return std::max(0.0, raw(x));
    }

    json to_json() const {
        json ts = json::array();
        for (const auto& t : trees) {
            json ns = json::array();
            for (const auto& n : t.nodes) ns.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            ts.push_back(std::move(ns));
        }
        return {{"format", "incomever-gbt"}, {"version", kFormatVersion}, {"initial", initial},
                {"learning_rate", learning_rate}, {"max_depth", max_depth}, {"n_features", n_features},
                {"trees", ts}};
    }

    static GBTEnsemble from_json(const json& j) {
        if (j.value("format", "") != "incomever-gbt" || j.value("version", 0) != kFormatVersion)
            throw ConfigError("gbt: unrecognized format or version");
        GBTEnsemble e;
        e.initial = j.at("initial").get<double>();
        e.learning_rate = j.at("learning_rate").get<double>();
        e.max_depth = j.at("max_depth").get<std::size_t>();
        e.n_features = j.at("n_features").get<std::size_t>();
        for (const auto& ns : j.at("trees")) {
            RegressionTree t;
            for (const auto& n : ns) {
                RegressionTree::Node x{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                       n.at(3).get<int>(), n.at(4).get<double>()};
                if (x.feature >= static_cast<int>(e.n_features)) throw ConfigError("gbt: feature index out of range");
                t.nodes.push_back(x);
            }
            if (t.nodes.empty()) throw ConfigError("gbt: empty tree");
            e.trees.push_back(std::move(t));
        }
        return e;
    }
};

namespace detail {

/// Level-wise exact greedy regression tree on presorted feature columns.
/// Split gain is S_L^2/n_L + S_R^2/n_R - S^2/n (variance reduction). Candidates
/// are visited by ascending feature, then ascending threshold; a later candidate
/// must beat the incumbent by a relative 1e-12 to replace it.
class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, std::size_t max_depth, std::size_t min_leaf)
        : X_(X), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(1, min_leaf)) {
        const auto n = static_cast<std::size_t>(X.rows());
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            const auto col = X.col(f);
            if (n == 0 || col.minCoeff() == col.maxCoeff()) continue;
            std::vector<std::uint32_t> order(n);
            std::iota(order.begin(), order.end(), 0u);
            std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return col(a) < col(b); });
            features_.push_back(static_cast<int>(f));
            orders_.push_back(std::move(order));
        }
        node_of_.resize(n);
    }

    RegressionTree fit(const std::vector<double>& residual) {
        const auto n = residual.size();
        RegressionTree tree;
        std::fill(node_of_.begin(), node_of_.end(), 0);
        tree.nodes.push_back({});
        struct Stats {
            double sum = 0.0, sq = 0.0;
            std::size_t cnt = 0;
        };
        std::vector<Stats> stats(1);
        for (std::size_t i = 0; i < n; ++i) {
            stats[0].sum += residual[i];
            stats[0].sq += residual[i] * residual[i];
            ++stats[0].cnt;
        }
        std::vector<int> frontier{0};
        for (std::size_t depth = 0; depth < max_depth_ && !frontier.empty(); ++depth) {
            struct Best {
                double gain = 0.0;
                int feature = -1;
                double threshold = 0.0;
            };
            std::vector<Best> best(tree.nodes.size());
            std::vector<char> open(tree.nodes.size(), 0);
            for (int nd : frontier) {
                const auto& s = stats[static_cast<std::size_t>(nd)];
                if (s.cnt < 2 * min_leaf_) continue;
                const double sse = s.sq - s.sum * s.sum / static_cast<double>(s.cnt);
                if (sse <= 0.0) continue;
                open[static_cast<std::size_t>(nd)] = 1;
                best[static_cast<std::size_t>(nd)].gain = 1e-10 * sse;
            }
            struct Scan {
                double sum = 0.0;
                std::size_t cnt = 0;
                double last = 0.0;
            };
            std::vector<Scan> scan(tree.nodes.size());
            for (std::size_t fi = 0; fi < features_.size(); ++fi) {
                const int f = features_[fi];
                for (int nd : frontier) scan[static_cast<std::size_t>(nd)] = {};
                for (auto i : orders_[fi]) {
                    const auto nd = static_cast<std::size_t>(node_of_[i]);
                    if (!open[nd]) continue;
                    auto& sc = scan[nd];
                    const double v = X_(i, f);
                    if (sc.cnt > 0 && v != sc.last) {
                        const auto& s = stats[nd];
                        const std::size_t rc = s.cnt - sc.cnt;
                        if (sc.cnt >= min_leaf_ && rc >= min_leaf_) {
                            const double rs = s.sum - sc.sum;
                            const double gain = sc.sum * sc.sum / static_cast<double>(sc.cnt) +
                                                rs * rs / static_cast<double>(rc) -
                                                s.sum * s.sum / static_cast<double>(s.cnt);
                            auto& b = best[nd];
                            if (gain > b.gain + 1e-12 * std::abs(b.gain)) {
                                b.gain = gain;
                                b.feature = f;
                                b.threshold = 0.5 * (sc.last + v);
                            }
                        }
                    }
                    sc.sum += residual[i];
                    ++sc.cnt;
                    sc.last = v;
                }
            }
            std::vector<int> next;
            std::vector<int> left_of(tree.nodes.size(), -1);
            for (int nd : frontier) {
                const auto& b = best[static_cast<std::size_t>(nd)];
                if (!open[static_cast<std::size_t>(nd)] || b.feature < 0) continue;
                const int l = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({});
                tree.nodes.push_back({});
                stats.resize(tree.nodes.size());
                auto& node = tree.nodes[static_cast<std::size_t>(nd)];
                node.feature = b.feature;
                node.threshold = b.threshold;
                node.left = l;
                node.right = l + 1;
                left_of[static_cast<std::size_t>(nd)] = l;
                next.push_back(l);
                next.push_back(l + 1);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const auto nd = static_cast<std::size_t>(node_of_[i]);
                if (nd >= left_of.size() || left_of[nd] < 0) continue;
                const auto& node = tree.nodes[nd];
                const int child = X_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
                node_of_[i] = child;
                auto& cs = stats[static_cast<std::size_t>(child)];
                cs.sum += residual[i];
                cs.sq += residual[i] * residual[i];
                ++cs.cnt;
            }
            frontier = std::move(next);
        }
        // Leaf value: mean residual, summed in sample order.
        std::vector<double> sum(tree.nodes.size(), 0.0);
        std::vector<std::size_t> cnt(tree.nodes.size(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sum[static_cast<std::size_t>(node_of_[i])] += residual[i];
            ++cnt[static_cast<std::size_t>(node_of_[i])];
        }
        for (std::size_t k = 0; k < tree.nodes.size(); ++k)
            if (tree.nodes[k].feature < 0) tree.nodes[k].value = cnt[k] ? sum[k] / static_cast<double>(cnt[k]) : 0.0;
        return tree;
    }

    int leaf_of(std::size_t i) const { return node_of_[i]; }

private:
    const Eigen::MatrixXd& X_;
    std::size_t max_depth_;
    std::size_t min_leaf_;
    std::vector<int> features_;
    std::vector<std::vector<std::uint32_t>> orders_;
    std::vector<int> node_of_;
};

}  // namespace detail

/// Optional per-round hook: (round, training MSE after the round).
using GbtTrace = std::vector<double>;

inline GBTEnsemble gbt_train(const Eigen::MatrixXd& X, std::span<const double> y, const GbtParams& p,
                             GbtTrace* trace = nullptr) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n == 0 || n != y.size()) throw ContractViolation("gbt_train: need |X| = |y| >= 1");
    if (!(p.learning_rate > 0.0)) throw ContractViolation("gbt_train: learning rate must be positive");
    GBTEnsemble e;
    e.learning_rate = p.learning_rate;
    e.max_depth = p.max_depth;
    e.n_features = static_cast<std::size_t>(X.cols());
    double sum = 0.0;
    for (double v : y) sum += v;
    e.initial = sum / static_cast<double>(n);
    std::vector<double> fitted(n, e.initial);
    std::vector<double> residual(n);
    detail::TreeBuilder builder(X, p.max_depth, p.min_leaf);
    for (std::size_t r = 0; r < p.rounds; ++r) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - fitted[i];
        auto tree = builder.fit(residual);
        if (tree.is_stump_leaf()) break;  // nothing left to split on
        for (std::size_t i = 0; i < n; ++i)
            fitted[i] += p.learning_rate * tree.nodes[static_cast<std::size_t>(builder.leaf_of(i))].value;
        e.trees.push_back(std::move(tree));
        if (trace) {
            double mse = 0.0;
            for (std::size_t i = 0; i < n; ++i) mse += (y[i] - fitted[i]) * (y[i] - fitted[i]);
            trace->push_back(mse / static_cast<double>(n));
        }
    }
    return e;
}

inline double gbt_predict(const GBTEnsemble& e, std::span<const double> x) { return e.predict(x); }

}  // namespace incv::learners
