#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "../core.hpp"
#include "../rng.hpp"

namespace incv::learners {

using json = nlohmann::json;

/// Token -> row of a |V| x d matrix. Unknown tokens resolve to the mean row.
class Embeddings {
public:
    Embeddings() = default;

    Embeddings(std::vector<std::string> words, Eigen::MatrixXd vectors)
        : words_(std::move(words)), vectors_(std::move(vectors)) {
        if (static_cast<Eigen::Index>(words_.size()) != vectors_.rows())
            throw ContractViolation("Embeddings: one row per vocabulary word required");
        for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
        refresh_mean();
    }

    std::size_t size() const { return words_.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(vectors_.cols()); }
    const std::vector<std::string>& words() const { return words_; }
    const Eigen::MatrixXd& matrix() const { return vectors_; }
    Eigen::MatrixXd& matrix_mut() { return vectors_; }

    /// Row index, or -1 for out-of-vocabulary tokens.
    int index(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? -1 : it->second;
    }

    Eigen::VectorXd vector(const std::string& token) const {
        const int i = index(token);
        return i < 0 ? mean_ : Eigen::VectorXd(vectors_.row(i).transpose());
    }

    const Eigen::VectorXd& mean_vector() const { return mean_; }

    /// Mean of the token vectors; the mean row for an empty token list.
    Eigen::VectorXd mean_of(const std::vector<std::string>& tokens) const {
        if (tokens.empty()) return mean_;
        Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
        for (const auto& t : tokens) acc += vector(t);
        return acc / static_cast<double>(tokens.size());
    }

    /// Call after editing rows through matrix_mut().
    void refresh_mean() {
        mean_ = vectors_.rows() > 0 ? Eigen::VectorXd(vectors_.colwise().mean().transpose())
                                    : Eigen::VectorXd::Zero(vectors_.cols());
    }

    json to_json() const {
        json rows = json::array();
        for (Eigen::Index r = 0; r < vectors_.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(vectors_.cols()));
            for (Eigen::Index c = 0; c < vectors_.cols(); ++c) row[static_cast<std::size_t>(c)] = vectors_(r, c);
            rows.push_back(std::move(row));
        }
        return {{"format", "incomever-embeddings"}, {"version", 1}, {"dim", dim()}, {"words", words_}, {"vectors", rows}};
    }

    static Embeddings from_json(const json& j) {
        if (j.value("format", "") != "incomever-embeddings") throw ConfigError("embeddings: bad format tag");
        auto words = j.at("words").get<std::vector<std::string>>();
        const auto d = j.at("dim").get<Eigen::Index>();
        Eigen::MatrixXd m(static_cast<Eigen::Index>(words.size()), d);
        const auto& rows = j.at("vectors");
        if (rows.size() != words.size()) throw ConfigError("embeddings: row count mismatch");
        for (std::size_t r = 0; r < words.size(); ++r) {
            if (rows[r].size() != static_cast<std::size_t>(d)) throw ConfigError("embeddings: row width mismatch");
            for (Eigen::Index c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)].get<double>();
        }
        return Embeddings(std::move(words), std::move(m));
    }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    Eigen::MatrixXd vectors_;
    Eigen::VectorXd mean_;
};

struct Word2VecParams {
    std::size_t dim = 300;
    std::size_t epochs = 15;
    std::size_t negatives = 5;
    std::size_t window = 2;
    double learning_rate = 0.025;
    std::uint64_t seed = 1;
};

/// Skip-gram with negative sampling, single-threaded. Noise words are drawn from
/// the unigram distribution raised to 0.75; the learning rate decays linearly to
/// 1e-4 of its start over all epochs.
inline Embeddings train_word_vectors(const std::vector<std::vector<std::string>>& sentences,
                                     const Word2VecParams& p) {
    std::map<std::string, std::size_t> counts;
    std::size_t total_tokens = 0;
    for (const auto& s : sentences)
        for (const auto& t : s) ++counts[t], ++total_tokens;
    if (counts.empty()) throw InputError("train_word_vectors: empty vocabulary");
    if (p.dim == 0) throw ContractViolation("train_word_vectors: dim must be positive");

    std::vector<std::pair<std::string, std::size_t>> vocab(counts.begin(), counts.end());
    std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> words;
    std::unordered_map<std::string, int> index;
    for (const auto& [w, c] : vocab) {
        index[w] = static_cast<int>(words.size());
        words.push_back(w);
    }
    const auto V = static_cast<Eigen::Index>(words.size());
    const auto d = static_cast<Eigen::Index>(p.dim);

    std::vector<double> noise_cdf(words.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        acc += std::pow(static_cast<double>(vocab[i].second), 0.75);
        noise_cdf[i] = acc;
    }

    Rng rng(p.seed);
    Eigen::MatrixXd in(V, d), out = Eigen::MatrixXd::Zero(V, d);
    for (Eigen::Index r = 0; r < V; ++r)
        for (Eigen::Index c = 0; c < d; ++c) in(r, c) = (rng.uniform() - 0.5) / static_cast<double>(d);

    std::vector<std::vector<int>> encoded;
    encoded.reserve(sentences.size());
    for (const auto& s : sentences) {
        std::vector<int> e;
        for (const auto& t : s) e.push_back(index.at(t));
        encoded.push_back(std::move(e));
    }

    auto sigmoid = [](double x) {
        if (x > 30) return 1.0;
        if (x < -30) return 0.0;
        return 1.0 / (1.0 + std::exp(-x));
    };
    auto draw_noise = [&]() {
        const double r = rng.uniform() * acc;
        auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), r);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - noise_cdf.begin(), V - 1));
    };

    const double total_work = static_cast<double>(std::max<std::size_t>(1, p.epochs * total_tokens));
    double done = 0.0;
    Eigen::VectorXd grad(d);
    for (std::size_t epoch = 0; epoch < p.epochs; ++epoch) {
        for (const auto& sent : encoded) {
            for (std::size_t pos = 0; pos < sent.size(); ++pos, done += 1.0) {
                const double lr = std::max(p.learning_rate * 1e-4, p.learning_rate * (1.0 - done / total_work));
                const int center = sent[pos];
                const std::size_t lo = pos >= p.window ? pos - p.window : 0;
                const std::size_t hi = std::min(sent.size() - 1, pos + p.window);
                for (std::size_t cpos = lo; cpos <= hi; ++cpos) {
                    if (cpos == pos) continue;
                    const int context = sent[cpos];
                    grad.setZero();
                    for (std::size_t k = 0; k <= p.negatives; ++k) {
                        int target;
                        double label;
                        if (k == 0) {
                            target = context;
                            label = 1.0;
                        } else {
                            target = draw_noise();
                            if (target == context) continue;
                            label = 0.0;
                        }
                        const double f = in.row(center).dot(out.row(target));
                        const double g = (label - sigmoid(f)) * lr;
                        grad += g * out.row(target).transpose();
                        out.row(target) += g * in.row(center);
                    }
                    in.row(center) += grad.transpose();
                }
            }
        }
    }
    return Embeddings(std::move(words), std::move(in));
}

}  // namespace incv::learners
