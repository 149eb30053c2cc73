#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "../core.hpp"
#include "../rng.hpp"
#include "ffn.hpp"
#include "word2vec.hpp"

namespace incv::learners {

/// Embedding -> LSTM -> dropout on the last hidden state -> dense ReLU -> scalar.
/// Gate blocks are stacked in the order input, forget, output, cell.
struct LSTMParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 128;
    std::size_t dense = 200;
    double dropout = 0.5;
    double target_scale = 1.0;
    Eigen::MatrixXd Wx;  // 4H x d
    Eigen::MatrixXd Wh;  // 4H x H
    Eigen::VectorXd b;   // 4H
    Eigen::MatrixXd W1;  // dense x H
    Eigen::VectorXd b1;
    Eigen::VectorXd w2;  // dense
    double b2 = 0.0;

    static LSTMParams init(std::size_t d, std::size_t hidden, std::size_t dense, double dropout, Rng& rng) {
        if (d == 0 || hidden == 0 || dense == 0) throw ContractViolation("LSTMParams: sizes must be positive");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractViolation("LSTMParams: dropout must be in [0,1)");
        LSTMParams p;
        p.input_dim = d;
        p.hidden = hidden;
        p.dense = dense;
        p.dropout = dropout;
        const auto H = static_cast<Eigen::Index>(hidden), D = static_cast<Eigen::Index>(dense);
        auto fill = [&](Eigen::Index r, Eigen::Index c, double sd) {
            Eigen::MatrixXd m(r, c);
            for (Eigen::Index i = 0; i < r; ++i)
                for (Eigen::Index j = 0; j < c; ++j) m(i, j) = sd * rng.normal();
            return m;
        };
        p.Wx = fill(4 * H, static_cast<Eigen::Index>(d), 1.0 / std::sqrt(static_cast<double>(d)));
        p.Wh = fill(4 * H, H, 1.0 / std::sqrt(static_cast<double>(hidden)));
        p.b = Eigen::VectorXd::Zero(4 * H);
        p.b.segment(H, H).setOnes();
        p.W1 = fill(D, H, std::sqrt(2.0 / static_cast<double>(hidden)));
        p.b1 = Eigen::VectorXd::Zero(D);
        p.w2 = fill(D, 1, 0.01).col(0);
        return p;
    }

    void check_shapes() const {
        const auto H = static_cast<Eigen::Index>(hidden), D = static_cast<Eigen::Index>(dense);
        const auto d = static_cast<Eigen::Index>(input_dim);
        if (Wx.rows() != 4 * H || Wx.cols() != d || Wh.rows() != 4 * H || Wh.cols() != H || b.size() != 4 * H ||
            W1.rows() != D || W1.cols() != H || b1.size() != D || w2.size() != D)
            throw ContractViolation("LSTMParams: inconsistent gate shapes");
    }

    json to_json() const {
        return {{"format", "incomever-lstm"}, {"version", 1}, {"input_dim", input_dim}, {"hidden", hidden},
                {"dense", dense}, {"dropout", dropout}, {"target_scale", target_scale},
                {"Wx", matrix_to_json(Wx)}, {"Wh", matrix_to_json(Wh)}, {"b", vector_to_json(b)},
                {"W1", matrix_to_json(W1)}, {"b1", vector_to_json(b1)}, {"w2", vector_to_json(w2)}, {"b2", b2}};
    }

    static LSTMParams from_json(const json& j) {
        if (j.value("format", "") != "incomever-lstm") throw ConfigError("lstm: bad format tag");
        LSTMParams p;
        p.input_dim = j.at("input_dim").get<std::size_t>();
        p.hidden = j.at("hidden").get<std::size_t>();
        p.dense = j.at("dense").get<std::size_t>();
        p.dropout = j.at("dropout").get<double>();
        p.target_scale = j.at("target_scale").get<double>();
        p.Wx = matrix_from_json(j.at("Wx"));
        p.Wh = matrix_from_json(j.at("Wh"));
        p.b = vector_from_json(j.at("b"));
        p.W1 = matrix_from_json(j.at("W1"));
        p.b1 = vector_from_json(j.at("b1"));
        p.w2 = vector_from_json(j.at("w2"));
        p.b2 = j.at("b2").get<double>();
        try {
            p.check_shapes();
        } catch (const ContractViolation& e) {
            throw ConfigError(e.what());
        }
        return p;
    }
};

struct LSTMGradients {
    Eigen::MatrixXd Wx, Wh, W1;
    Eigen::VectorXd b, b1, w2;
    double b2 = 0.0;
    std::vector<std::pair<int, Eigen::VectorXd>> embedding_rows;  // (row, gradient); rows may repeat

    void reset(const LSTMParams& p) {
        Wx = Eigen::MatrixXd::Zero(p.Wx.rows(), p.Wx.cols());
        Wh = Eigen::MatrixXd::Zero(p.Wh.rows(), p.Wh.cols());
        W1 = Eigen::MatrixXd::Zero(p.W1.rows(), p.W1.cols());
        b = Eigen::VectorXd::Zero(p.b.size());
        b1 = Eigen::VectorXd::Zero(p.b1.size());
        w2 = Eigen::VectorXd::Zero(p.w2.size());
        b2 = 0.0;
        embedding_rows.clear();
    }
};

namespace detail {

inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct LstmTape {
    std::vector<Eigen::VectorXd> x, h, c, i, f, o, g;  // h[0], c[0] are the zero initial state
    Eigen::VectorXd hd, pre1, a1;
    double y = 0.0;
};

}  // namespace detail

/// Token indices for one sequence; -1 entries and an empty list use the mean vector.
using TokenSequence = std::vector<int>;

/// Network output (in target_scale units). `mask` multiplies h_T elementwise;
/// pass nullptr for eval mode.
inline double lstm_forward(const LSTMParams& p, const Embeddings& emb, const TokenSequence& seq,
                           const Eigen::VectorXd* mask, detail::LstmTape* tape = nullptr) {
    const auto H = static_cast<Eigen::Index>(p.hidden);
    detail::LstmTape local;
    auto& t = tape ? *tape : local;
    t = {};
    t.h.push_back(Eigen::VectorXd::Zero(H));
    t.c.push_back(Eigen::VectorXd::Zero(H));
    const std::size_t steps = std::max<std::size_t>(1, seq.size());
    for (std::size_t s = 0; s < steps; ++s) {
        const int row = s < seq.size() ? seq[s] : -1;
        Eigen::VectorXd x = row >= 0 ? Eigen::VectorXd(emb.matrix().row(row).transpose()) : emb.mean_vector();
        Eigen::VectorXd z = p.Wx * x + p.Wh * t.h.back() + p.b;
        Eigen::VectorXd i = z.segment(0, H).unaryExpr(&detail::sigmoid);
        Eigen::VectorXd f = z.segment(H, H).unaryExpr(&detail::sigmoid);
        Eigen::VectorXd o = z.segment(2 * H, H).unaryExpr(&detail::sigmoid);
        Eigen::VectorXd g = z.segment(3 * H, H).array().tanh();
        Eigen::VectorXd c = f.cwiseProduct(t.c.back()) + i.cwiseProduct(g);
        Eigen::VectorXd h = o.cwiseProduct(c.array().tanh().matrix());
        t.x.push_back(std::move(x));
        t.i.push_back(std::move(i));
        t.f.push_back(std::move(f));
        t.o.push_back(std::move(o));
        t.g.push_back(std::move(g));
        t.c.push_back(std::move(c));
        t.h.push_back(std::move(h));
    }
    t.hd = mask ? Eigen::VectorXd(t.h.back().cwiseProduct(*mask)) : t.h.back();
    t.pre1 = p.W1 * t.hd + p.b1;
    t.a1 = t.pre1.cwiseMax(0.0);
    t.y = p.w2.dot(t.a1) + p.b2;
    return t.y;
}

/// Absolute error |y - target| for one sequence (target in scaled units) and,
/// optionally, gradients accumulated into `grads` (which must be reset first).
inline double lstm_loss_and_gradients(const LSTMParams& p, const Embeddings& emb, const TokenSequence& seq,
                                      double target, const Eigen::VectorXd* mask, LSTMGradients* grads) {
    detail::LstmTape t;
    const double y = lstm_forward(p, emb, seq, mask, &t);
    const double r = y - target;
    if (!grads) return std::abs(r);
    const auto H = static_cast<Eigen::Index>(p.hidden);
    const double dy = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
    grads->w2 += dy * t.a1;
    grads->b2 += dy;
    const Eigen::VectorXd dpre1 = (dy * p.w2).cwiseProduct((t.pre1.array() > 0.0).cast<double>().matrix());
    grads->W1 += dpre1 * t.hd.transpose();
    grads->b1 += dpre1;
    Eigen::VectorXd dh = p.W1.transpose() * dpre1;
    if (mask) dh = dh.cwiseProduct(*mask);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dz(4 * H);
    for (std::size_t s = t.x.size(); s-- > 0;) {
        const auto& c = t.c[s + 1];
        const auto& i = t.i[s];
        const auto& f = t.f[s];
        const auto& o = t.o[s];
        const auto& g = t.g[s];
        const Eigen::ArrayXd tc = c.array().tanh();
        const Eigen::ArrayXd dc = dc_next.array() + dh.array() * o.array() * (1.0 - tc.square());
        dz.segment(0, H) = (dc * g.array() * i.array() * (1.0 - i.array())).matrix();
        dz.segment(H, H) = (dc * t.c[s].array() * f.array() * (1.0 - f.array())).matrix();
        dz.segment(2 * H, H) = (dh.array() * tc * o.array() * (1.0 - o.array())).matrix();
        dz.segment(3 * H, H) = (dc * i.array() * (1.0 - g.array().square())).matrix();
        dc_next = (dc * f.array()).matrix();
        grads->Wx += dz * t.x[s].transpose();
        grads->Wh += dz * t.h[s].transpose();
        grads->b += dz;
        const int row = s < seq.size() ? seq[s] : -1;
        if (row >= 0) grads->embedding_rows.emplace_back(row, p.Wx.transpose() * dz);
        dh = p.Wh.transpose() * dz;
    }
    return std::abs(r);
}

inline double lstm_predict(const LSTMParams& p, const Embeddings& emb, const TokenSequence& seq) {
    return lstm_forward(p, emb, seq, nullptr) * p.target_scale;
}

/// Maps tokens to embedding rows, capped at `max_len`; unknown tokens become -1.
inline TokenSequence encode_tokens(const Embeddings& emb, const std::vector<std::string>& tokens, std::size_t max_len = 16) {
    TokenSequence s;
    for (const auto& t : tokens) {
        if (s.size() >= max_len) break;
        s.push_back(emb.index(t));
    }
    return s;
}

struct LSTMTrainConfig {
    std::size_t hidden = 128;
    std::size_t dense = 200;
    double dropout = 0.5;
    std::size_t epochs = 5;
    std::size_t batch_size = 16;
    double learning_rate = 0.01;
    double embedding_learning_rate = 0.01;
    std::size_t max_len = 16;
    std::uint64_t seed = 1;
};

struct LSTMTrainResult {
    LSTMParams params;
    Embeddings embeddings;              // tuned copy
    std::vector<double> loss_trace;     // per-epoch training MAE in target units (train mode)
    std::size_t empty_sequences = 0;    // sequences that took the mean-vector path
};

/// Mini-batch gradient descent on MAE; embedding rows are updated alongside
/// the network weights.
inline LSTMTrainResult lstm_regress_train(const std::vector<TokenSequence>& sequences, const Embeddings& embeddings,
                                          const std::vector<double>& targets, const LSTMTrainConfig& cfg) {
    const auto n = sequences.size();
    if (n == 0 || n != targets.size()) throw ContractViolation("lstm_regress_train: need >= 1 sequence and one target each");
    if (embeddings.size() == 0) throw ContractViolation("lstm_regress_train: empty embeddings");
    Rng rng(cfg.seed);
    LSTMTrainResult res;
    res.embeddings = embeddings;
    auto& p = res.params;
    p = LSTMParams::init(embeddings.dim(), cfg.hidden, cfg.dense, cfg.dropout, rng);
    std::vector<double> sorted = targets;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    p.target_scale = sorted[n / 2] > 0 ? sorted[n / 2] : 1.0;
    p.b2 = 1.0;

    std::vector<TokenSequence> seqs;
    seqs.reserve(n);
    for (const auto& s : sequences) {
        TokenSequence capped(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), cfg.max_len)));
        if (capped.empty()) ++res.empty_sequences;
        seqs.push_back(std::move(capped));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = std::max<std::size_t>(1, std::min(cfg.batch_size, n));
    const double keep = 1.0 - cfg.dropout;
    LSTMGradients g;
    Eigen::VectorXd mask(static_cast<Eigen::Index>(cfg.hidden));
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t m = std::min(bs, n - start);
            g.reset(p);
            double batch = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const auto idx = order[start + k];
                for (Eigen::Index j = 0; j < mask.size(); ++j) mask(j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
                batch += lstm_loss_and_gradients(p, res.embeddings, seqs[idx], targets[idx] / p.target_scale,
                                                 cfg.dropout > 0.0 ? &mask : nullptr, &g);
            }
            if (!std::isfinite(batch))
                throw NonFiniteLoss("lstm_regress_train: non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch offset " + std::to_string(start));
            total += batch;
            const double step = cfg.learning_rate / static_cast<double>(m);
            p.Wx -= step * g.Wx;
            p.Wh -= step * g.Wh;
            p.b -= step * g.b;
            p.W1 -= step * g.W1;
            p.b1 -= step * g.b1;
            p.w2 -= step * g.w2;
            p.b2 -= step * g.b2;
            const double estep = cfg.embedding_learning_rate / static_cast<double>(m);
            auto& E = res.embeddings.matrix_mut();
            for (const auto& [row, grad] : g.embedding_rows) E.row(row) -= estep * grad.transpose();
        }
        res.loss_trace.push_back(total / static_cast<double>(n) * p.target_scale);
    }
    res.embeddings.refresh_mean();
    return res;
}

}  // namespace incv::learners
