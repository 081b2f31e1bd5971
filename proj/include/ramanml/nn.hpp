#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ramanml/errors.hpp"
#include "ramanml/matrix.hpp"
#include "ramanml/rng.hpp"

namespace ramanml {

struct CnnConfig {
    int conv_filters = 64;
    int kernel_width = 3;
    double dropout_rate = 0.5;
    int pool_width = 2;
    int hidden_units = 100;
    double learning_rate = 1e-3;  // Adam alpha
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 50;
    int epochs = 20;
    std::uint64_t seed = 0;

    void validate() const {
        if (conv_filters < 1) throw ConfigError("cnn: conv_filters must be >= 1");
        if (kernel_width < 1) throw ConfigError("cnn: kernel_width must be >= 1");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw ConfigError("cnn: dropout_rate must be in [0,1)");
        if (pool_width != 2) throw ConfigError("cnn: pool_width must be 2");
        if (hidden_units < 1) throw ConfigError("cnn: hidden_units must be >= 1");
        if (batch_size < 1) throw ConfigError("cnn: batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("cnn: epochs must be >= 0");
    }
};

// Two valid 1-D convolutions (relu), dropout, width-2 max pooling, then a
// relu hidden layer into softmax. Weight layout keeps the filter index
// contiguous: conv weights are [dx][in_channel][filter].
struct CnnNetwork {
    CnnConfig config;
    std::size_t input_length = 0;
    std::size_t n_classes = 0;
    std::size_t conv1_length = 0;
    std::size_t conv2_length = 0;
    std::size_t pool_length = 0;
    std::size_t flat_length = 0;

    std::vector<double> conv1_w, conv1_b;  // [k][1][F], [F]
    std::vector<double> conv2_w, conv2_b;  // [k][F][F], [F]
    std::vector<double> dense_w, dense_b;  // [flat][H], [H]
    std::vector<double> out_w, out_b;      // [H][n_c], [n_c]

    std::size_t filters() const { return static_cast<std::size_t>(config.conv_filters); }
    std::size_t kernel() const { return static_cast<std::size_t>(config.kernel_width); }
    std::size_t hidden() const { return static_cast<std::size_t>(config.hidden_units); }

    std::vector<std::vector<double>*> parameter_arrays() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b, &out_w, &out_b};
    }
};

inline CnnNetwork make_cnn(const CnnConfig& config, std::size_t input_length, std::size_t n_classes) {
    config.validate();
    const auto k = static_cast<std::size_t>(config.kernel_width);
    if (k >= input_length) throw ConfigError("cnn: kernel width must be smaller than the input length");
    if (n_classes < 2) throw ConfigError("cnn: need at least 2 classes");

    CnnNetwork net;
    net.config = config;
    net.input_length = input_length;
    net.n_classes = n_classes;
    net.conv1_length = input_length - k + 1;
    if (net.conv1_length < k) throw ConfigError("cnn: input too short for two convolutions");
    net.conv2_length = net.conv1_length - k + 1;
    net.pool_length = net.conv2_length / 2;
    if (net.pool_length == 0) throw ConfigError("cnn: input too short for pooling");
    const std::size_t f = net.filters();
    net.flat_length = net.pool_length * f;

    const auto he_uniform = [](std::vector<double>& w, std::size_t fan_in, Rng& rng) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : w) v = rng.uniform(-bound, bound);
    };

    Rng rng(config.seed, 0);
    net.conv1_w.resize(k * f);
    net.conv1_b.assign(f, 0.0);
    he_uniform(net.conv1_w, k, rng);
    net.conv2_w.resize(k * f * f);
    net.conv2_b.assign(f, 0.0);
    he_uniform(net.conv2_w, k * f, rng);
    net.dense_w.resize(net.flat_length * net.hidden());
    net.dense_b.assign(net.hidden(), 0.0);
    he_uniform(net.dense_w, net.flat_length, rng);
    net.out_w.resize(net.hidden() * n_classes);
    net.out_b.assign(n_classes, 0.0);
    he_uniform(net.out_w, net.hidden(), rng);
    return net;
}

namespace detail {

// per-sample activations, kept around for the backward pass
struct CnnWorkspace {
    std::vector<double> a1;       // conv1 activations, [t][f]
    std::vector<double> a2;       // conv2 activations, [t][f]
    std::vector<double> dropped;  // after dropout, [t][f]
    std::vector<double> mask;     // inverted-dropout multipliers
    std::vector<double> pooled;   // [t][f], flat vector doubles as the flatten output
    std::vector<std::size_t> argmax;
    std::vector<double> hidden;   // relu activations
    std::vector<double> probs;

    void resize(const CnnNetwork& net) {
        const std::size_t f = net.filters();
        a1.assign(net.conv1_length * f, 0.0);
        a2.assign(net.conv2_length * f, 0.0);
        dropped.assign(net.conv2_length * f, 0.0);
        mask.assign(net.conv2_length * f, 1.0);
        pooled.assign(net.flat_length, 0.0);
        argmax.assign(net.flat_length, 0);
        hidden.assign(net.hidden(), 0.0);
        probs.assign(net.n_classes, 0.0);
    }
};

inline void cnn_forward_sample(const CnnNetwork& net, std::span<const double> x, bool train_mode,
                               Rng* dropout_rng, CnnWorkspace& ws) {
    const std::size_t f = net.filters();
    const std::size_t k = net.kernel();

    // conv1 (single input channel)
    for (std::size_t t = 0; t < net.conv1_length; ++t) {
        double* out = ws.a1.data() + t * f;
        for (std::size_t j = 0; j < f; ++j) out[j] = net.conv1_b[j];
        for (std::size_t dx = 0; dx < k; ++dx) {
            const double xv = x[t + dx];
            const double* w = net.conv1_w.data() + dx * f;
            for (std::size_t j = 0; j < f; ++j) out[j] += xv * w[j];
        }
        for (std::size_t j = 0; j < f; ++j) out[j] = std::max(0.0, out[j]);
    }

    // conv2
    for (std::size_t t = 0; t < net.conv2_length; ++t) {
        double* out = ws.a2.data() + t * f;
        for (std::size_t j = 0; j < f; ++j) out[j] = net.conv2_b[j];
        for (std::size_t dx = 0; dx < k; ++dx) {
            const double* in = ws.a1.data() + (t + dx) * f;
            const double* w = net.conv2_w.data() + dx * f * f;
            for (std::size_t c = 0; c < f; ++c) {
                const double av = in[c];
                if (av == 0.0) continue;
                const double* wc = w + c * f;
                for (std::size_t j = 0; j < f; ++j) out[j] += av * wc[j];
            }
        }
        for (std::size_t j = 0; j < f; ++j) out[j] = std::max(0.0, out[j]);
    }

    // dropout (inverted scaling, train mode only)
    const double keep = 1.0 - net.config.dropout_rate;
    if (train_mode && net.config.dropout_rate > 0.0) {
        for (std::size_t i = 0; i < ws.a2.size(); ++i) {
            const bool kept = dropout_rng->uniform() < keep;
            ws.mask[i] = kept ? 1.0 / keep : 0.0;
            ws.dropped[i] = ws.a2[i] * ws.mask[i];
        }
    } else {
        std::fill(ws.mask.begin(), ws.mask.end(), 1.0);
        std::copy(ws.a2.begin(), ws.a2.end(), ws.dropped.begin());
    }

    // max pool, width 2 (ties keep the earlier position)
    for (std::size_t t = 0; t < net.pool_length; ++t) {
        for (std::size_t j = 0; j < f; ++j) {
            const std::size_t i0 = (2 * t) * f + j;
            const std::size_t i1 = (2 * t + 1) * f + j;
            if (ws.dropped[i1] > ws.dropped[i0]) {
                ws.pooled[t * f + j] = ws.dropped[i1];
                ws.argmax[t * f + j] = i1;
            } else {
                ws.pooled[t * f + j] = ws.dropped[i0];
                ws.argmax[t * f + j] = i0;
            }
        }
    }

    // dense relu
    for (std::size_t j = 0; j < net.hidden(); ++j) ws.hidden[j] = net.dense_b[j];
    for (std::size_t i = 0; i < net.flat_length; ++i) {
        const double v = ws.pooled[i];
        if (v == 0.0) continue;
        const double* w = net.dense_w.data() + i * net.hidden();
        for (std::size_t j = 0; j < net.hidden(); ++j) ws.hidden[j] += v * w[j];
    }
    for (std::size_t j = 0; j < net.hidden(); ++j) ws.hidden[j] = std::max(0.0, ws.hidden[j]);

    // output softmax
    for (std::size_t c = 0; c < net.n_classes; ++c) ws.probs[c] = net.out_b[c];
    for (std::size_t j = 0; j < net.hidden(); ++j) {
        const double v = ws.hidden[j];
        if (v == 0.0) continue;
        const double* w = net.out_w.data() + j * net.n_classes;
        for (std::size_t c = 0; c < net.n_classes; ++c) ws.probs[c] += v * w[c];
    }
    double mx = ws.probs[0];
    for (double v : ws.probs) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : ws.probs) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : ws.probs) v /= sum;
}

struct CnnGradients {
    std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, dense_w, dense_b, out_w, out_b;

    void resize_like(const CnnNetwork& net) {
        conv1_w.assign(net.conv1_w.size(), 0.0);
        conv1_b.assign(net.conv1_b.size(), 0.0);
        conv2_w.assign(net.conv2_w.size(), 0.0);
        conv2_b.assign(net.conv2_b.size(), 0.0);
        dense_w.assign(net.dense_w.size(), 0.0);
        dense_b.assign(net.dense_b.size(), 0.0);
        out_w.assign(net.out_w.size(), 0.0);
        out_b.assign(net.out_b.size(), 0.0);
    }

    std::vector<std::vector<double>*> arrays() {
        return {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &dense_w, &dense_b, &out_w, &out_b};
    }
};

// accumulate gradients for one sample; dlogits = (p - y) * weight
inline void cnn_backward_sample(const CnnNetwork& net, std::span<const double> x,
                                const CnnWorkspace& ws, std::span<const double> dlogits,
                                CnnGradients& g) {
    const std::size_t f = net.filters();
    const std::size_t k = net.kernel();

    // output layer
    std::vector<double> dhidden(net.hidden(), 0.0);
    for (std::size_t c = 0; c < net.n_classes; ++c) g.out_b[c] += dlogits[c];
    for (std::size_t j = 0; j < net.hidden(); ++j) {
        const double h = ws.hidden[j];
        double acc = 0.0;
        const double* w = net.out_w.data() + j * net.n_classes;
        double* gw = g.out_w.data() + j * net.n_classes;
        for (std::size_t c = 0; c < net.n_classes; ++c) {
            gw[c] += h * dlogits[c];
            acc += w[c] * dlogits[c];
        }
        dhidden[j] = h > 0.0 ? acc : 0.0;
    }

    // dense layer
    std::vector<double> dpooled(net.flat_length, 0.0);
    for (std::size_t j = 0; j < net.hidden(); ++j) g.dense_b[j] += dhidden[j];
    for (std::size_t i = 0; i < net.flat_length; ++i) {
        const double v = ws.pooled[i];
        const double* w = net.dense_w.data() + i * net.hidden();
        double* gw = g.dense_w.data() + i * net.hidden();
        double acc = 0.0;
        for (std::size_t j = 0; j < net.hidden(); ++j) {
            const double dj = dhidden[j];
            gw[j] += v * dj;
            acc += w[j] * dj;
        }
        dpooled[i] = acc;
    }

    // unpool, dropout, conv2 relu
    std::vector<double> da2(net.conv2_length * f, 0.0);
    for (std::size_t i = 0; i < net.flat_length; ++i) {
        const std::size_t src = ws.argmax[i];
        // through dropout scaling, then relu gate
        const double grad = dpooled[i] * ws.mask[src];
        da2[src] += ws.a2[src] > 0.0 ? grad : 0.0;
    }

    // conv2
    std::vector<double> da1(net.conv1_length * f, 0.0);
    for (std::size_t t = 0; t < net.conv2_length; ++t) {
        const double* dout = da2.data() + t * f;
        for (std::size_t j = 0; j < f; ++j) g.conv2_b[j] += dout[j];
        for (std::size_t dx = 0; dx < k; ++dx) {
            const double* in = ws.a1.data() + (t + dx) * f;
            double* din = da1.data() + (t + dx) * f;
            const double* w = net.conv2_w.data() + dx * f * f;
            double* gw = g.conv2_w.data() + dx * f * f;
            for (std::size_t c = 0; c < f; ++c) {
                const double av = in[c];
                const double* wc = w + c * f;
                double* gwc = gw + c * f;
                double acc = 0.0;
                for (std::size_t j = 0; j < f; ++j) {
                    gwc[j] += av * dout[j];
                    acc += wc[j] * dout[j];
                }
                din[c] += acc;
            }
        }
    }
    for (std::size_t i = 0; i < da1.size(); ++i)
        if (!(ws.a1[i] > 0.0)) da1[i] = 0.0;

    // conv1
    for (std::size_t t = 0; t < net.conv1_length; ++t) {
        const double* dout = da1.data() + t * f;
        for (std::size_t j = 0; j < f; ++j) g.conv1_b[j] += dout[j];
        for (std::size_t dx = 0; dx < k; ++dx) {
            const double xv = x[t + dx];
            double* gw = g.conv1_w.data() + dx * f;
            for (std::size_t j = 0; j < f; ++j) gw[j] += xv * dout[j];
        }
    }
}

}  // namespace detail

// Forward pass over a batch. Dropout is active only in train mode; infer
// mode is deterministic.
inline Matrix cnn_forward(const CnnNetwork& net, const Matrix& batch, bool train_mode = false,
                          Rng* dropout_rng = nullptr) {
    if (batch.cols() != net.input_length)
        throw ShapeMismatchError("cnn_forward: batch feature length " + std::to_string(batch.cols()) +
                                 " != network input length " + std::to_string(net.input_length));
    Rng local(net.config.seed, 0xd20f);
    if (train_mode && net.config.dropout_rate > 0.0 && dropout_rng == nullptr) dropout_rng = &local;

    Matrix probs(batch.rows(), net.n_classes);
    detail::CnnWorkspace ws;
    ws.resize(net);
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        detail::cnn_forward_sample(net, batch.row(r), train_mode, dropout_rng, ws);
        probs.set_row(r, ws.probs);
    }
    return probs;
}

inline double cross_entropy(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows() != labels.size()) throw LengthMismatchError("cross_entropy: label count mismatch");
    double loss = 0.0;
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        const double p = std::max(probs(r, static_cast<std::size_t>(labels[r])), 1e-12);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(probs.rows());
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size()) throw LengthMismatchError("accuracy: length mismatch");
    if (predicted.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

inline std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
};

namespace detail {

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    void resize_like(CnnNetwork& net) {
        const auto params = net.parameter_arrays();
        m.resize(params.size());
        v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i].assign(params[i]->size(), 0.0);
            v[i].assign(params[i]->size(), 0.0);
        }
    }

    void update(CnnNetwork& net, CnnGradients& grads) {
        ++step;
        const auto& cfg = net.config;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        auto params = net.parameter_arrays();
        auto garr = grads.arrays();
        for (std::size_t a = 0; a < params.size(); ++a) {
            auto& w = *params[a];
            const auto& g = *garr[a];
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[a][i] = cfg.beta1 * m[a][i] + (1.0 - cfg.beta1) * g[i];
                v[a][i] = cfg.beta2 * v[a][i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double mhat = m[a][i] / bc1;
                const double vhat = v[a][i] / bc2;
                w[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
            }
        }
    }
};

}  // namespace detail

// Mini-batch training with Adam. Per-epoch history records the running
// train loss/accuracy (dropout active) and the infer-mode validation
// metrics, mirroring the usual learning-curve output.
inline TrainHistory cnn_train(CnnNetwork& net, const Matrix& train_x, const std::vector<int>& train_y,
                              const Matrix& val_x, const std::vector<int>& val_y) {
    if (train_x.rows() == 0 || val_x.rows() == 0)
        throw EmptyDatasetError("cnn_train: train and validation sets must be non-empty");
    if (train_x.rows() != train_y.size() || val_x.rows() != val_y.size())
        throw LengthMismatchError("cnn_train: label count mismatch");
    for (int l : train_y)
        if (l < 0 || static_cast<std::size_t>(l) >= net.n_classes)
            throw DomainError("cnn_train: label outside network class range");

    const auto& cfg = net.config;
    detail::AdamState adam;
    adam.resize_like(net);
    detail::CnnWorkspace ws;
    ws.resize(net);
    detail::CnnGradients grads;

    Rng shuffle_rng(cfg.seed, 1);
    Rng dropout_rng(cfg.seed, 2);

    std::vector<std::size_t> order(train_x.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainHistory hist;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t epoch_hits = 0;
        std::size_t seen = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto b = static_cast<double>(end - start);
            grads.resize_like(net);
            double batch_loss = 0.0;

            for (std::size_t idx = start; idx < end; ++idx) {
                const std::size_t r = order[idx];
                detail::cnn_forward_sample(net, train_x.row(r), true, &dropout_rng, ws);
                const auto label = static_cast<std::size_t>(train_y[r]);
                batch_loss -= std::log(std::max(ws.probs[label], 1e-12));

                std::size_t best = 0;
                for (std::size_t c = 1; c < net.n_classes; ++c)
                    if (ws.probs[c] > ws.probs[best]) best = c;
                epoch_hits += best == label ? 1 : 0;

                std::vector<double> dlogits(net.n_classes);
                for (std::size_t c = 0; c < net.n_classes; ++c)
                    dlogits[c] = (ws.probs[c] - (c == label ? 1.0 : 0.0)) / b;
                detail::cnn_backward_sample(net, train_x.row(r), ws, dlogits, grads);
            }
            batch_loss /= b;
            if (!std::isfinite(batch_loss))
                throw NumericalDivergenceError("cnn_train: loss diverged at epoch " +
                                               std::to_string(epoch + 1));
            epoch_loss += batch_loss * b;
            seen += end - start;
            adam.update(net, grads);
        }

        hist.train_loss.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);
        hist.train_accuracy.push_back(seen ? static_cast<double>(epoch_hits) / static_cast<double>(seen)
                                           : 0.0);
        const Matrix val_probs = cnn_forward(net, val_x, false);
        hist.val_loss.push_back(cross_entropy(val_probs, val_y));
        hist.val_accuracy.push_back(accuracy(argmax_rows(val_probs), val_y));
    }
    return hist;
}

// Central finite-difference check of the analytic gradients. Dropout must be
// disabled; returns the max over parameters of the relative disagreement.
inline double gradient_check(CnnNetwork& net, const Matrix& batch, const std::vector<int>& labels,
                             double h = 1e-5) {
    if (net.config.dropout_rate != 0.0)
        throw ConfigError("gradient_check: dropout must be disabled");

    detail::CnnWorkspace ws;
    ws.resize(net);
    detail::CnnGradients grads;
    grads.resize_like(net);

    const auto batch_loss = [&]() {
        double loss = 0.0;
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            detail::cnn_forward_sample(net, batch.row(r), false, nullptr, ws);
            loss -= std::log(std::max(ws.probs[static_cast<std::size_t>(labels[r])], 1e-12));
        }
        return loss / static_cast<double>(batch.rows());
    };

    const auto b = static_cast<double>(batch.rows());
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        detail::cnn_forward_sample(net, batch.row(r), false, nullptr, ws);
        std::vector<double> dlogits(net.n_classes);
        for (std::size_t c = 0; c < net.n_classes; ++c)
            dlogits[c] = (ws.probs[c] - (static_cast<int>(c) == labels[r] ? 1.0 : 0.0)) / b;
        detail::cnn_backward_sample(net, batch.row(r), ws, dlogits, grads);
    }

    double max_rel = 0.0;
    auto params = net.parameter_arrays();
    auto garr = grads.arrays();
    for (std::size_t a = 0; a < params.size(); ++a) {
        auto& w = *params[a];
        const auto& g = *garr[a];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + h;
            const double lp = batch_loss();
            w[i] = saved - h;
            const double lm = batch_loss();
            w[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double rel = std::abs(g[i] - numeric) /
                               std::max({std::abs(g[i]), std::abs(numeric), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace ramanml
