#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recoc/data.hpp"
#include "recoc/errors.hpp"
#include "recoc/matrix.hpp"
#include "recoc/rng.hpp"

namespace recoc {

// ---- Configs ---------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 100;
    int batch_size = 4096;  // chunks of this size in fixed data order; >= n means full batch
    int hidden_width = 16;  // MLP trainers only
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
        if (epochs < 1) throw ConfigError("TrainConfig: epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (hidden_width < 1) throw ConfigError("TrainConfig: hidden_width must be >= 1");
    }
};

enum class BinaryKind { LogisticLinear, Mlp };
enum class SubstituteArch { LinearSoftmax, Mlp };

inline const char* to_string(BinaryKind k) {
    return k == BinaryKind::LogisticLinear ? "logistic-linear" : "mlp";
}
inline const char* to_string(SubstituteArch a) {
    return a == SubstituteArch::LinearSoftmax ? "linear-softmax" : "mlp";
}

inline BinaryKind binary_kind_from_string(const std::string& s) {
    if (s == "logistic-linear") return BinaryKind::LogisticLinear;
    if (s == "mlp") return BinaryKind::Mlp;
    throw ConfigError("unknown binary classifier kind: " + s);
}
inline SubstituteArch substitute_arch_from_string(const std::string& s) {
    if (s == "linear-softmax") return SubstituteArch::LinearSoftmax;
    if (s == "mlp") return SubstituteArch::Mlp;
    throw ConfigError("unknown substitute architecture: " + s);
}

// ---- Numerics ---------------------------------------------------------------

namespace nn {

inline double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// log(1 + exp(-m)), overflow-safe.
inline double logistic_loss(double margin) {
    if (margin >= 0.0) return std::log1p(std::exp(-margin));
    return -margin + std::log1p(std::exp(margin));
}

inline void require_finite(const Matrix& x, const char* who) {
    for (double v : x.data())
        if (!std::isfinite(v)) throw TrainingError(std::string(who) + ": non-finite feature");
}

}  // namespace nn

// ---- Binary classifiers -----------------------------------------------------

// Sign predictor f: R^d -> {+1, -1}. Score exactly 0 maps to +1; that fixed
// convention keeps sign-equivariance testable.
struct BinaryClassifier {
    BinaryKind kind = BinaryKind::LogisticLinear;
    std::size_t input_dim = 0;

    // logistic-linear parameters
    std::vector<double> w;
    double b = 0.0;

    // mlp parameters: score = w2 . tanh(W1 x + b1) + b2
    Matrix w1;                // hidden_width x d
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;

    double score(std::span<const double> x) const {
        if (x.size() != input_dim)
            throw DimensionError("BinaryClassifier::score: dimension mismatch");
        if (kind == BinaryKind::LogisticLinear) return dot(w, x) + b;
        double s = b2;
        for (std::size_t h = 0; h < w1.rows(); ++h)
            s += w2[h] * std::tanh(dot(w1.row(h), x) + b1[h]);
        return s;
    }

    int predict(std::span<const double> x) const { return score(x) >= 0.0 ? +1 : -1; }

    bool operator==(const BinaryClassifier&) const = default;
};

namespace detail {

inline void check_binary_inputs(const Matrix& x, const std::vector<int>& z) {
    if (x.rows() == 0) throw TrainingError("train_binary: empty data");
    if (z.size() != x.rows()) throw TrainingError("train_binary: label count mismatch");
    for (int zi : z)
        if (zi != 1 && zi != -1) throw TrainingError("train_binary: labels must be +1/-1");
    nn::require_finite(x, "train_binary");
}

// d(logistic loss)/d(score) for label z at score s: -z * sigmoid(-z s).
inline double dloss_dscore(double s, int z) {
    return -static_cast<double>(z) * nn::sigmoid(-static_cast<double>(z) * s);
}

}  // namespace detail

// Gradient descent on logistic loss from zero initialization, fixed batch
// order. Zero init makes the trainer exactly sign-equivariant: flipping every
// label negates every intermediate quantity, and IEEE arithmetic commutes
// with negation, so the trained weights negate bit-for-bit.
inline BinaryClassifier train_logistic_linear(const Matrix& x, const std::vector<int>& z,
                                              const TrainConfig& cfg) {
    cfg.validate();
    detail::check_binary_inputs(x, z);
    const std::size_t n = x.rows(), d = x.cols();
    std::vector<double> w(d, 0.0), gw(d);
    double b = 0.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const auto xi = x.row(i);
                const double coef = detail::dloss_dscore(dot(w, xi) + b, z[i]) * inv;
                for (std::size_t j = 0; j < d; ++j) gw[j] += coef * xi[j];
                gb += coef;
            }
            for (std::size_t j = 0; j < d; ++j) w[j] -= cfg.learning_rate * gw[j];
            b -= cfg.learning_rate * gb;
        }
    }

    BinaryClassifier f;
    f.kind = BinaryKind::LogisticLinear;
    f.input_dim = d;
    f.w = std::move(w);
    f.b = b;
    return f;
}

// One tanh hidden layer. The hidden layer is seeded (identically for z and
// -z); the output layer starts at zero, so a label flip negates only the
// output layer while the hidden trajectory stays bit-identical. That
// construction gives the same sign-equivariance as the linear trainer.
inline BinaryClassifier train_mlp_binary(const Matrix& x, const std::vector<int>& z,
                                         const TrainConfig& cfg) {
    cfg.validate();
    detail::check_binary_inputs(x, z);
    const std::size_t n = x.rows(), d = x.cols();
    const std::size_t hw = static_cast<std::size_t>(cfg.hidden_width);

    Matrix w1(hw, d);
    std::vector<double> b1(hw, 0.0), w2(hw, 0.0);
    double b2 = 0.0;
    {
        const double scale = 1.0 / std::sqrt(static_cast<double>(d));
        for (std::size_t h = 0; h < hw; ++h) {
            rng::Stream s(rng::fold(cfg.seed, h));
            for (std::size_t j = 0; j < d; ++j) w1(h, j) = scale * (2.0 * s.unit() - 1.0);
        }
    }

    Matrix gw1(hw, d);
    std::vector<double> gb1(hw), gw2(hw), hidden(hw), pre(hw);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            std::fill(gw1.data().begin(), gw1.data().end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            double gb2 = 0.0;

            for (std::size_t i = start; i < stop; ++i) {
                const auto xi = x.row(i);
                double s = b2;
                for (std::size_t h = 0; h < hw; ++h) {
                    pre[h] = dot(w1.row(h), xi) + b1[h];
                    hidden[h] = std::tanh(pre[h]);
                    s += w2[h] * hidden[h];
                }
                const double g = detail::dloss_dscore(s, z[i]) * inv;
                gb2 += g;
                for (std::size_t h = 0; h < hw; ++h) {
                    gw2[h] += g * hidden[h];
                    const double gpre = g * w2[h] * (1.0 - hidden[h] * hidden[h]);
                    gb1[h] += gpre;
                    for (std::size_t j = 0; j < d; ++j) gw1(h, j) += gpre * xi[j];
                }
            }
            for (std::size_t h = 0; h < hw; ++h) {
                w2[h] -= cfg.learning_rate * gw2[h];
                b1[h] -= cfg.learning_rate * gb1[h];
                for (std::size_t j = 0; j < d; ++j) w1(h, j) -= cfg.learning_rate * gw1(h, j);
            }
            b2 -= cfg.learning_rate * gb2;
        }
    }

    BinaryClassifier f;
    f.kind = BinaryKind::Mlp;
    f.input_dim = d;
    f.w1 = std::move(w1);
    f.b1 = std::move(b1);
    f.w2 = std::move(w2);
    f.b2 = b2;
    return f;
}

inline BinaryClassifier train_binary(const Matrix& x, const std::vector<int>& z,
                                     const TrainConfig& cfg,
                                     BinaryKind kind = BinaryKind::LogisticLinear) {
    return kind == BinaryKind::LogisticLinear ? train_logistic_linear(x, z, cfg)
                                              : train_mlp_binary(x, z, cfg);
}

// ---- Substitute models -------------------------------------------------------

// Differentiable multiclass scorer used by the attacker: logits(x) in R^N,
// softmax cross-entropy loss, analytic input gradients.
struct SubstituteModel {
    SubstituteArch arch = SubstituteArch::LinearSoftmax;
    int n_classes = 0;
    std::size_t input_dim = 0;

    // linear-softmax: logits = W x + b
    Matrix w;  // n_classes x d
    std::vector<double> b;

    // mlp: logits = W2 tanh(W1 x + b1) + b2
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;  // n_classes x hidden
    std::vector<double> b2;

    std::vector<double> hidden(std::span<const double> x) const {
        std::vector<double> h(w1.rows());
        for (std::size_t k = 0; k < w1.rows(); ++k) h[k] = std::tanh(dot(w1.row(k), x) + b1[k]);
        return h;
    }

    std::vector<double> logits(std::span<const double> x) const {
        if (x.size() != input_dim)
            throw DimensionError("SubstituteModel::logits: dimension mismatch");
        std::vector<double> out(n_classes);
        if (arch == SubstituteArch::LinearSoftmax) {
            for (int c = 0; c < n_classes; ++c) out[c] = dot(w.row(c), x) + b[c];
        } else {
            const auto h = hidden(x);
            for (int c = 0; c < n_classes; ++c) out[c] = dot(w2.row(c), h) + b2[c];
        }
        return out;
    }

    int predict(std::span<const double> x) const {
        const auto l = logits(x);
        return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
    }

    double loss(std::span<const double> x, int y) const {
        if (y < 0 || y >= n_classes) throw DomainError("SubstituteModel::loss: invalid class");
        const auto l = logits(x);
        const double mx = *std::max_element(l.begin(), l.end());
        double lse = 0.0;
        for (double v : l) lse += std::exp(v - mx);
        return mx + std::log(lse) - l[y];
    }

    bool operator==(const SubstituteModel&) const = default;
};

namespace detail {

inline std::vector<double> softmax(const std::vector<double>& logits) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) sum += (p[c] = std::exp(logits[c] - mx));
    for (double& v : p) v /= sum;
    return p;
}

}  // namespace detail

inline SubstituteModel train_substitute(const Matrix& x, const std::vector<int>& y,
                                        int n_classes, SubstituteArch arch,
                                        const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows() == 0) throw TrainingError("train_substitute: empty data");
    if (y.size() != x.rows()) throw TrainingError("train_substitute: label count mismatch");
    nn::require_finite(x, "train_substitute");
    if (n_classes < 2) throw TrainingError("train_substitute: need at least 2 classes");
    for (int yi : y)
        if (yi < 0 || yi >= n_classes) throw TrainingError("train_substitute: label out of range");
    if (*std::min_element(y.begin(), y.end()) == *std::max_element(y.begin(), y.end()))
        throw TrainingError("train_substitute: degenerate labels (single class present)");

    const std::size_t n = x.rows(), d = x.cols();
    const auto NC = static_cast<std::size_t>(n_classes);

    SubstituteModel m;
    m.arch = arch;
    m.n_classes = n_classes;
    m.input_dim = d;

    if (arch == SubstituteArch::LinearSoftmax) {
        m.w = Matrix(NC, d);
        m.b.assign(NC, 0.0);
        Matrix gw(NC, d);
        std::vector<double> gb(NC);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (std::size_t start = 0; start < n; start += cfg.batch_size) {
                const std::size_t stop = std::min(n, start + cfg.batch_size);
                const double inv = 1.0 / static_cast<double>(stop - start);
                std::fill(gw.data().begin(), gw.data().end(), 0.0);
                std::fill(gb.begin(), gb.end(), 0.0);
                for (std::size_t i = start; i < stop; ++i) {
                    const auto xi = x.row(i);
                    auto p = detail::softmax(m.logits(xi));
                    p[y[i]] -= 1.0;  // dL/dlogits
                    for (std::size_t c = 0; c < NC; ++c) {
                        const double g = p[c] * inv;
                        gb[c] += g;
                        for (std::size_t j = 0; j < d; ++j) gw(c, j) += g * xi[j];
                    }
                }
                for (std::size_t c = 0; c < NC; ++c) {
                    m.b[c] -= cfg.learning_rate * gb[c];
                    for (std::size_t j = 0; j < d; ++j) m.w(c, j) -= cfg.learning_rate * gw(c, j);
                }
            }
        }
        return m;
    }

    const auto hw = static_cast<std::size_t>(cfg.hidden_width);
    m.w1 = Matrix(hw, d);
    m.b1.assign(hw, 0.0);
    m.w2 = Matrix(NC, hw);
    m.b2.assign(NC, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t h = 0; h < hw; ++h) {
        rng::Stream s(rng::fold(cfg.seed, h));
        for (std::size_t j = 0; j < d; ++j) m.w1(h, j) = scale * (2.0 * s.unit() - 1.0);
    }

    Matrix gw1(hw, d), gw2(NC, hw);
    std::vector<double> gb1(hw), gb2(NC), h(hw);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            std::fill(gw1.data().begin(), gw1.data().end(), 0.0);
            std::fill(gw2.data().begin(), gw2.data().end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);
            for (std::size_t i = start; i < stop; ++i) {
                const auto xi = x.row(i);
                for (std::size_t k = 0; k < hw; ++k) h[k] = std::tanh(dot(m.w1.row(k), xi) + m.b1[k]);
                std::vector<double> l(NC);
                for (std::size_t c = 0; c < NC; ++c) l[c] = dot(m.w2.row(c), h) + m.b2[c];
                auto p = detail::softmax(l);
                p[y[i]] -= 1.0;
                for (std::size_t k = 0; k < hw; ++k) {
                    double dh = 0.0;
                    for (std::size_t c = 0; c < NC; ++c) {
                        const double g = p[c] * inv;
                        if (k == 0) gb2[c] += g;
                        gw2(c, k) += g * h[k];
                        dh += p[c] * m.w2(c, k);
                    }
                    const double gpre = dh * inv * (1.0 - h[k] * h[k]);
                    gb1[k] += gpre;
                    for (std::size_t j = 0; j < d; ++j) gw1(k, j) += gpre * xi[j];
                }
            }
            for (std::size_t k = 0; k < hw; ++k) {
                m.b1[k] -= cfg.learning_rate * gb1[k];
                for (std::size_t j = 0; j < d; ++j) m.w1(k, j) -= cfg.learning_rate * gw1(k, j);
            }
            for (std::size_t c = 0; c < NC; ++c) {
                m.b2[c] -= cfg.learning_rate * gb2[c];
                for (std::size_t k = 0; k < hw; ++k) m.w2(c, k) -= cfg.learning_rate * gw2(c, k);
            }
        }
    }
    return m;
}

inline SubstituteModel train_substitute(const Dataset& data, SubstituteArch arch,
                                        const TrainConfig& cfg) {
    return train_substitute(data.features, data.labels, data.n_classes, arch, cfg);
}

namespace detail {

// dL/dx given dL/dlogits.
inline std::vector<double> backprop_to_input(const SubstituteModel& m,
                                             std::span<const double> x,
                                             const std::vector<double>& glogits) {
    std::vector<double> gx(m.input_dim, 0.0);
    if (m.arch == SubstituteArch::LinearSoftmax) {
        for (int c = 0; c < m.n_classes; ++c) {
            const auto wc = m.w.row(c);
            for (std::size_t j = 0; j < m.input_dim; ++j) gx[j] += glogits[c] * wc[j];
        }
        return gx;
    }
    const auto h = m.hidden(x);
    for (std::size_t k = 0; k < h.size(); ++k) {
        double dh = 0.0;
        for (int c = 0; c < m.n_classes; ++c) dh += glogits[c] * m.w2(c, k);
        const double gpre = dh * (1.0 - h[k] * h[k]);
        const auto w1k = m.w1.row(k);
        for (std::size_t j = 0; j < m.input_dim; ++j) gx[j] += gpre * w1k[j];
    }
    return gx;
}

}  // namespace detail

// Gradient of the attack objective with respect to the input: the loss
// gradient at (x, y) when untargeted, and the negated loss gradient at
// (x, target) when targeted, so callers always ascend the returned direction.
inline std::vector<double> input_gradient(const SubstituteModel& m, std::span<const double> x,
                                          int y, std::optional<int> targeted = std::nullopt) {
    const int label = targeted.value_or(y);
    if (label < 0 || label >= m.n_classes || y < 0 || y >= m.n_classes)
        throw DomainError("input_gradient: invalid class index");
    auto glogits = detail::softmax(m.logits(x));
    glogits[label] -= 1.0;
    auto gx = detail::backprop_to_input(m, x, glogits);
    if (targeted)
        for (double& v : gx) v = -v;
    return gx;
}

// Gradient of one logit (not the loss); drives Jacobian data augmentation.
inline std::vector<double> logit_gradient(const SubstituteModel& m, std::span<const double> x,
                                          int c) {
    if (c < 0 || c >= m.n_classes) throw DomainError("logit_gradient: invalid class index");
    std::vector<double> glogits(m.n_classes, 0.0);
    glogits[c] = 1.0;
    return detail::backprop_to_input(m, x, glogits);
}

}  // namespace recoc
