#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "../core.hpp"
#include "../rng.hpp"

namespace incv::learners {

using json = nlohmann::json;

struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
    Eigen::MatrixXd m(r, c);
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r) throw ConfigError("matrix: row count mismatch");
    for (Eigen::Index i = 0; i < r; ++i) {
        if (static_cast<Eigen::Index>(data[static_cast<std::size_t>(i)].size()) != c)
            throw ConfigError("matrix: column count mismatch");
        for (Eigen::Index k = 0; k < c; ++k) m(i, k) = data[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
    }
    return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vector_from_json(const json& j) {
    auto v = j.get<std::vector<double>>();
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

/// Feed-forward regressor: ReLU hidden layers, linear scalar output.
/// Inputs are standardized with stored per-feature mean/scale and the output is
/// in units of target_scale, so raw network values stay near 1.
struct FFNParams {
    std::vector<std::size_t> sizes;  // input, hidden..., 1
    std::vector<Eigen::MatrixXd> W;  // W[l]: sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> b;
    Eigen::RowVectorXd input_mean;
    Eigen::RowVectorXd input_scale;
    double target_scale = 1.0;

    std::size_t input_dim() const { return sizes.empty() ? 0 : sizes.front(); }
    std::size_t layers() const { return W.size(); }

    /// He-normal hidden weights, small output weights, zero biases.
    static FFNParams init(const std::vector<std::size_t>& sizes, Rng& rng, bool zero_output_layer = false) {
        if (sizes.size() < 2 || sizes.back() != 1) throw ContractViolation("FFNParams: sizes must end with 1");
        FFNParams p;
        p.sizes = sizes;
        for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
            const auto out = static_cast<Eigen::Index>(sizes[l + 1]), in = static_cast<Eigen::Index>(sizes[l]);
            Eigen::MatrixXd w(out, in);
            const bool last = l + 2 == sizes.size();
            const double sd = last ? 0.01 : std::sqrt(2.0 / static_cast<double>(in));
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c) w(r, c) = (last && zero_output_layer) ? 0.0 : sd * rng.normal();
            p.W.push_back(std::move(w));
            p.b.push_back(Eigen::VectorXd::Zero(out));
        }
        p.input_mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(sizes.front()));
        p.input_scale = Eigen::RowVectorXd::Ones(static_cast<Eigen::Index>(sizes.front()));
        return p;
    }

    Eigen::MatrixXd normalize(const Eigen::MatrixXd& X) const {
        return (X.rowwise() - input_mean).array().rowwise() / input_scale.array();
    }

    /// Network output on already-normalized inputs (one row per example).
    Eigen::VectorXd forward_normalized(const Eigen::MatrixXd& Xn) const {
        Eigen::MatrixXd a = Xn;
        for (std::size_t l = 0; l < W.size(); ++l) {
            Eigen::MatrixXd z = (a * W[l].transpose()).rowwise() + b[l].transpose();
            a = (l + 1 < W.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        }
        return a.col(0);
    }

    /// Predictions in target units (dollars).
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
        if (static_cast<std::size_t>(X.cols()) != input_dim()) throw ContractViolation("ffn: input dimension mismatch");
        return forward_normalized(normalize(X)) * target_scale;
    }

    json to_json() const {
        json ws = json::array(), bs = json::array();
        for (const auto& w : W) ws.push_back(matrix_to_json(w));
        for (const auto& v : b) bs.push_back(vector_to_json(v));
        return {{"format", "incomever-ffn"},
                {"version", 1},
                {"sizes", sizes},
                {"activation", "relu"},
                {"W", ws},
                {"b", bs},
                {"input_mean", vector_to_json(input_mean.transpose())},
                {"input_scale", vector_to_json(input_scale.transpose())},
                {"target_scale", target_scale}};
    }

    static FFNParams from_json(const json& j) {
        if (j.value("format", "") != "incomever-ffn") throw ConfigError("ffn: bad format tag");
        FFNParams p;
        p.sizes = j.at("sizes").get<std::vector<std::size_t>>();
        for (const auto& w : j.at("W")) p.W.push_back(matrix_from_json(w));
        for (const auto& v : j.at("b")) p.b.push_back(vector_from_json(v));
        p.input_mean = vector_from_json(j.at("input_mean")).transpose();
        p.input_scale = vector_from_json(j.at("input_scale")).transpose();
        p.target_scale = j.at("target_scale").get<double>();
        if (p.W.size() + 1 != p.sizes.size() || p.b.size() != p.W.size()) throw ConfigError("ffn: layer count mismatch");
        for (std::size_t l = 0; l < p.W.size(); ++l)
            if (p.W[l].rows() != static_cast<Eigen::Index>(p.sizes[l + 1]) ||
                p.W[l].cols() != static_cast<Eigen::Index>(p.sizes[l]))
                throw ConfigError("ffn: weight shape mismatch");
        return p;
    }
};

struct FFNGradients {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
};

/// Mean absolute error of the network on normalized inputs and its gradient.
/// d|r|/dr is sign(r), with 0 at r = 0.
inline double ffn_loss_and_gradients(const FFNParams& p, const Eigen::MatrixXd& Xn, const Eigen::VectorXd& y,
                                     FFNGradients* grads) {
    const auto L = p.W.size();
    const double n = static_cast<double>(Xn.rows());
    std::vector<Eigen::MatrixXd> acts{Xn};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::MatrixXd z = (acts.back() * p.W[l].transpose()).rowwise() + p.b[l].transpose();
        pre.push_back(z);
        acts.push_back(l + 1 < L ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z);
    }
    const Eigen::VectorXd r = acts.back().col(0) - y;
    const double loss = r.cwiseAbs().sum() / n;
    if (!grads) return loss;
    grads->W.resize(L);
    grads->b.resize(L);
    Eigen::MatrixXd delta(r.size(), 1);
    for (Eigen::Index i = 0; i < r.size(); ++i) delta(i, 0) = (r(i) > 0 ? 1.0 : (r(i) < 0 ? -1.0 : 0.0)) / n;
    for (std::size_t l = L; l-- > 0;) {
        grads->W[l] = delta.transpose() * acts[l];
        grads->b[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd back = delta * p.W[l];
        delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
    }
    return loss;
}

struct FFNTrainConfig {
    std::vector<std::size_t> hidden = {200};
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 0.01;
    std::uint64_t seed = 1;
};

struct FFNTrainResult {
    FFNParams params;
    std::vector<double> loss_trace;  // training MAE in target units, one entry per epoch
};

/// Mini-batch gradient descent on MAE with a constant learning rate.
/// Output bias starts at the target median (in scaled units: 1).
inline FFNTrainResult ffn_train(const Eigen::MatrixXd& X, const std::vector<double>& y, const FFNTrainConfig& cfg) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n == 0 || n != y.size()) throw ContractViolation("ffn_train: need >= 1 example and |X| = |y|");
    std::vector<std::size_t> sizes{static_cast<std::size_t>(X.cols())};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(1);
    Rng rng(cfg.seed);
    FFNTrainResult res;
    auto& p = res.params;
    p = FFNParams::init(sizes, rng);

    p.input_mean = X.colwise().mean();
    p.input_scale = ((X.rowwise() - p.input_mean).array().square().colwise().sum() / static_cast<double>(n)).sqrt();
    for (Eigen::Index c = 0; c < p.input_scale.size(); ++c)
        if (!(p.input_scale(c) > 1e-12)) p.input_scale(c) = 1.0;
    std::vector<double> sorted = y;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
    p.target_scale = sorted[n / 2] > 0 ? sorted[n / 2] : 1.0;
    p.b.back()(0) = 1.0;

    const Eigen::MatrixXd Xn = p.normalize(X);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) ys(static_cast<Eigen::Index>(i)) = y[i] / p.target_scale;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = std::max<std::size_t>(1, std::min(cfg.batch_size, n));
    FFNGradients g;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t m = std::min(bs, n - start);
            Eigen::MatrixXd xb(static_cast<Eigen::Index>(m), Xn.cols());
            Eigen::VectorXd yb(static_cast<Eigen::Index>(m));
            for (std::size_t k = 0; k < m; ++k) {
                xb.row(static_cast<Eigen::Index>(k)) = Xn.row(static_cast<Eigen::Index>(order[start + k]));
                yb(static_cast<Eigen::Index>(k)) = ys(static_cast<Eigen::Index>(order[start + k]));
            }
            const double loss = ffn_loss_and_gradients(p, xb, yb, &g);
            if (!std::isfinite(loss))
                throw NonFiniteLoss("ffn_train: non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                                    std::to_string(start));
            epoch_loss += loss * static_cast<double>(m);
            for (std::size_t l = 0; l < p.W.size(); ++l) {
                p.W[l] -= cfg.learning_rate * g.W[l];
                p.b[l] -= cfg.learning_rate * g.b[l];
            }
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(n) * p.target_scale);
    }
    return res;
}

}  // namespace incv::learners
